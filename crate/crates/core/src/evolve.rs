//! Time integration of the perturbation systems and of the Cole-Hopf system
//! in the frame moving with the wave.
//!
//! All fields are advanced as Fourier coefficients in `y`
//! (see [`crate::spectral`]): diffusion is implicit and solved mode by mode
//! with a tridiagonal factorization in `z`, transport, coupling and
//! nonlinear terms are explicit.

use std::sync::Arc;

use log::{debug, warn};
use rustfft::num_complex::Complex64;

use crate::energy::{ledger_row, EnergyLedger, LedgerSample};
use crate::error::{Error, Result};
use crate::grid::{Grid, VectorField};
use crate::spectral::{HelmholtzSolver, ModalField};
use crate::transforms::{ColeHopfState, PerturbationState};
use crate::waves::WaveProfile;

/// Growth of `M` over `M_0` treated as blowup.
const BLOWUP_FACTOR: f64 = 1e6;
/// Curl level that triggers a warning in Cole-Hopf runs.
const CURL_WARNING: f64 = 1e-4;
/// Fraction of the domain covered by each sponge layer.
const SPONGE_WIDTH: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Backward/forward Euler.
    Imex1,
    /// Second-order semi-implicit BDF, started with one `Imex1` step.
    Sbdf2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsiTransport {
    /// Upwind without chemical diffusion, central otherwise.
    Auto,
    Upwind,
    Central,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Moving,
    Lab,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum System {
    /// Nonlinear perturbation system for `eps = 0`.
    Nonlinear0,
    /// Linearized perturbation system for `eps > 0`.
    LinearEps,
    /// Full system in the Cole-Hopf variables `(n, q)`.
    Nq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub cfl_safety: f64,
    /// Ledger row every this many steps (the final step is always recorded).
    pub record_every: usize,
    /// Field snapshot every this many steps; 0 disables snapshots.
    pub snapshot_every: usize,
    pub psi_transport: PsiTransport,
    /// Peak damping rate of the boundary sponge layers; 0 disables them.
    pub sponge: f64,
    /// Project `q` onto gradients after every step (Cole-Hopf runs).
    pub projection: bool,
    /// Frame of the Cole-Hopf system; the perturbation systems always use
    /// the moving frame.
    pub frame: Frame,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            dt: 0.01,
            t_end: 20.0,
            scheme: Scheme::Sbdf2,
            cfl_safety: 0.5,
            record_every: 1,
            snapshot_every: 0,
            psi_transport: PsiTransport::Auto,
            sponge: 0.0,
            projection: false,
            frame: Frame::Moving,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::param(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::param(format!("t_end must be non-negative, got {}", self.t_end)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::param(format!(
                "cfl_safety must lie in (0, 1], got {}",
                self.cfl_safety
            )));
        }
        if self.record_every == 0 {
            return Err(Error::param("record_every must be at least 1"));
        }
        if !(self.sponge >= 0.0) || !self.sponge.is_finite() {
            return Err(Error::param(format!("sponge must be non-negative, got {}", self.sponge)));
        }
        Ok(())
    }

    /// Number of steps to reach `t_end`.
    pub fn n_steps(&self) -> Result<usize> {
        let n = (self.t_end / self.dt).round();
        if (n * self.dt - self.t_end).abs() > 1e-9 * self.t_end.max(self.dt) {
            return Err(Error::param(format!(
                "t_end = {} is not a multiple of dt = {}",
                self.t_end, self.dt
            )));
        }
        Ok(n as usize)
    }
}

#[derive(Debug, Clone)]
pub enum InitialState {
    Perturbation(PerturbationState),
    ColeHopf(ColeHopfState),
}

impl From<PerturbationState> for InitialState {
    fn from(s: PerturbationState) -> Self {
        InitialState::Perturbation(s)
    }
}

impl From<ColeHopfState> for InitialState {
    fn from(s: ColeHopfState) -> Self {
        InitialState::ColeHopf(s)
    }
}

pub type StateSnapshot = InitialState;

#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub system: System,
    pub times: Vec<f64>,
    pub ledger: EnergyLedger,
    pub snapshots: Vec<StateSnapshot>,
    /// State at the last completed step.
    pub final_state: StateSnapshot,
    /// Largest `max_z |mean_y f|` over recorded states, all fields.
    pub max_mean_drift: f64,
    /// Largest `max |curl q|` over recorded states (Cole-Hopf runs).
    pub max_curl: f64,
    pub steps: usize,
}

/// Boundary treatment of one field: `Some(v)` clamps mode 0 to `v` and all
/// other modes to 0 at that end, `None` leaves the end free.
#[derive(Debug, Clone, Copy)]
struct FieldSpec {
    diffusion: f64,
    left: Option<f64>,
    right: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Stepper {
    system: System,
    grid: Arc<Grid>,
    dt: f64,
    scheme: Scheme,
    eps: f64,
    frame_s: f64,
    psi_upwind: bool,
    q_upwind: bool,
    projection: bool,
    wave_n: Vec<f64>,
    wave_p: Vec<f64>,
    specs: [FieldSpec; 3],
    solvers: [[Option<HelmholtzSolver>; 3]; 2],
    sponge: Vec<f64>,
    targets: [Vec<f64>; 3],
    laplace: Option<HelmholtzSolver>,
    u: Vec<ModalField>,
    prev: Option<(Vec<ModalField>, Vec<ModalField>)>,
    t0: f64,
    steps: usize,
}

fn sponge_profile(grid: &Grid, strength: f64) -> Vec<f64> {
    let width = SPONGE_WIDTH * 2.0 * grid.l_z();
    grid.z()
        .iter()
        .map(|z| {
            let depth = (z.abs() - (grid.l_z() - width)) / width;
            if strength > 0.0 && depth > 0.0 {
                strength * depth * depth
            } else {
                0.0
            }
        })
        .collect()
}

fn max_mode0(f: &ModalField) -> f64 {
    f.mode(0).iter().fold(0.0, |m, c| m.max(c.norm()))
}

impl Stepper {
    pub fn new(
        system: System,
        init: &InitialState,
        profile: &WaveProfile,
        config: &IntegratorConfig,
    ) -> Result<Self> {
        config.validate()?;
        let grid = Arc::clone(&profile.grid);
        let eps = profile.eps();
        let s = profile.s();
        let n_z = grid.n_z();
        let (u, t0) = match (system, init) {
            (System::Nonlinear0 | System::LinearEps, InitialState::Perturbation(p)) => {
                if !crate::grid::same_grid(p.grid(), &grid) {
                    return Err(Error::GridMismatch);
                }
                (
                    vec![
                        ModalField::from_physical(&p.phi.z),
                        ModalField::from_physical(&p.phi.y),
                        ModalField::from_physical(&p.psi),
                    ],
                    p.t,
                )
            }
            (System::Nq, InitialState::ColeHopf(c)) => {
                if !crate::grid::same_grid(c.n.grid(), &grid) {
                    return Err(Error::GridMismatch);
                }
                (
                    vec![
                        ModalField::from_physical(&c.n),
                        ModalField::from_physical(&c.q.z),
                        ModalField::from_physical(&c.q.y),
                    ],
                    c.t,
                )
            }
            _ => {
                return Err(Error::param(format!(
                    "initial state does not match system {system:?}"
                )))
            }
        };
        match system {
            System::Nonlinear0 if eps != 0.0 => {
                return Err(Error::param(format!(
                    "the nonlinear perturbation system needs an eps = 0 wave, got eps = {eps}"
                )))
            }
            System::LinearEps if !(eps > 0.0) => {
                return Err(Error::param("the linear system needs an eps > 0 wave"))
            }
            _ => {}
        }
        if system == System::LinearEps {
            let drift = u.iter().map(max_mode0).fold(0.0, f64::max);
            if drift > 1e-12 {
                warn!("initial data are not mean-free in y: max |mean| = {drift:.3e}");
            }
        }

        let frame_s = if system == System::Nq && config.frame == Frame::Lab {
            0.0
        } else {
            s
        };
        let psi_upwind = match config.psi_transport {
            PsiTransport::Auto => eps == 0.0,
            PsiTransport::Upwind => true,
            PsiTransport::Central => false,
        };
        let q_upwind = eps == 0.0 && frame_s != 0.0;
        let zero = FieldSpec {
            diffusion: 1.0,
            left: Some(0.0),
            right: Some(0.0),
        };
        let (p_left, p_right) = (profile.p[0], profile.p[n_z - 1]);
        let specs = match system {
            System::Nonlinear0 | System::LinearEps => [
                zero,
                zero,
                if eps > 0.0 {
                    FieldSpec {
                        diffusion: eps,
                        ..zero
                    }
                } else {
                    // pure transport toward -z: only the right end is inflow
                    FieldSpec {
                        diffusion: 0.0,
                        left: None,
                        right: Some(0.0),
                    }
                },
            ],
            System::Nq => {
                let ends = |l: f64, r: f64| {
                    if eps > 0.0 {
                        (Some(l), Some(r))
                    } else if frame_s != 0.0 {
                        (None, Some(r))
                    } else {
                        (None, None)
                    }
                };
                let (l1, r1) = ends(p_left, p_right);
                let (l2, r2) = ends(0.0, 0.0);
                [
                    FieldSpec {
                        diffusion: 1.0,
                        left: Some(profile.n[0]),
                        right: Some(profile.n[n_z - 1]),
                    },
                    FieldSpec {
                        diffusion: eps,
                        left: l1,
                        right: r1,
                    },
                    FieldSpec {
                        diffusion: eps,
                        left: l2,
                        right: r2,
                    },
                ]
            }
        };
        let targets = match system {
            System::Nq => [profile.n.clone(), profile.p.clone(), vec![0.0; n_z]],
            _ => [vec![0.0; n_z], vec![0.0; n_z], vec![0.0; n_z]],
        };
        let sponge = sponge_profile(&grid, config.sponge);
        let dt = config.dt;
        let damping: Vec<f64> = sponge.iter().map(|v| v * dt).collect();
        let make = |a: f64| -> [Option<HelmholtzSolver>; 3] {
            let mk = |spec: &FieldSpec| {
                (spec.diffusion > 0.0).then(|| {
                    HelmholtzSolver::new(
                        n_z,
                        grid.n_modes(),
                        grid.dz(),
                        grid.k1(),
                        a,
                        dt * spec.diffusion,
                        &damping,
                    )
                })
            };
            [mk(&specs[0]), mk(&specs[1]), mk(&specs[2])]
        };
        let solvers = [make(1.0), make(1.5)];
        let laplace = (system == System::Nq && config.projection)
            .then(|| HelmholtzSolver::new(n_z, grid.n_modes(), grid.dz(), grid.k1(), 0.0, -1.0, &[]));

        let speed = match system {
            System::Nq => s.max(u[1].max_abs()).max(u[2].max_abs()),
            _ => s,
        };
        let limit = config.cfl_safety * grid.dz() / speed;
        if dt > limit {
            return Err(Error::param(format!(
                "dt = {dt} violates the CFL bound {limit:.4e}"
            )));
        }

        Ok(Stepper {
            system,
            dt,
            scheme: config.scheme,
            eps,
            frame_s,
            psi_upwind,
            q_upwind,
            projection: config.projection,
            wave_n: profile.n.clone(),
            wave_p: profile.p.clone(),
            specs,
            solvers,
            sponge,
            targets,
            laplace,
            u,
            prev: None,
            t0,
            steps: 0,
            grid,
        })
    }

    pub fn time(&self) -> f64 {
        self.t0 + self.steps as f64 * self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    fn transport(&self, f: &ModalField, upwind: bool) -> ModalField {
        if upwind {
            f.dz_forward(self.grid.dz())
        } else {
            f.dz(self.grid.dz())
        }
    }

    fn explicit(&self, u: &[ModalField]) -> Vec<ModalField> {
        let (dz, k1, s) = (self.grid.dz(), self.grid.k1(), self.frame_s);
        match self.system {
            System::Nonlinear0 | System::LinearEps => {
                let (phi1, phi2, psi) = (&u[0], &u[1], &u[2]);
                let phi1_z = phi1.dz(dz);
                let div = phi1_z.add(&phi2.dy(k1));
                let psi_z = psi.dz(dz);
                let psi_y = psi.dy(k1);
                let mut f0 = phi1_z.scaled(s);
                f0.axpy(1.0, &psi_z.mul_planar(&self.wave_n));
                f0.axpy(1.0, &div.mul_planar(&self.wave_p));
                let mut f1 = phi2.dz(dz).scaled(s);
                f1.axpy(1.0, &psi_y.mul_planar(&self.wave_n));
                let mut f2 = self.transport(psi, self.psi_upwind).scaled(s);
                f2.axpy(1.0, &div);
                if self.system == System::Nonlinear0 {
                    f0.axpy(1.0, &div.product(&psi_z));
                    f1.axpy(1.0, &div.product(&psi_y));
                } else {
                    f2.axpy(-2.0 * self.eps, &psi_z.mul_planar(&self.wave_p));
                }
                vec![f0, f1, f2]
            }
            System::Nq => {
                let (n, q1, q2) = (&u[0], &u[1], &u[2]);
                let eps = self.eps;
                let n_z = n.dz(dz);
                let mut f0 = n_z.scaled(s);
                f0.axpy(1.0, &n.product(q1).dz(dz));
                f0.axpy(1.0, &n.product(q2).dy(k1));
                let mut f1 = self.transport(q1, self.q_upwind).scaled(s);
                let mut f2 = self.transport(q2, self.q_upwind).scaled(s);
                if eps > 0.0 {
                    let (q1z, q1y) = (q1.dz(dz), q1.dy(k1));
                    let (q2z, q2y) = (q2.dz(dz), q2.dy(k1));
                    f1.axpy(-2.0 * eps, &q1.product(&q1z).add(&q2.product(&q1y)));
                    f2.axpy(-2.0 * eps, &q1.product(&q2z).add(&q2.product(&q2y)));
                }
                f1.axpy(1.0, &n_z);
                f2.axpy(1.0, &n.dy(k1));
                vec![f0, f1, f2]
            }
        }
    }

    fn set_ends(spec: &FieldSpec, f: &mut ModalField) {
        let n = f.n_z;
        for k in 0..f.n_modes {
            let m = f.mode_mut(k);
            if let Some(v) = spec.left {
                m[0] = Complex64::new(if k == 0 { v } else { 0.0 }, 0.0);
            }
            if let Some(v) = spec.right {
                m[n - 1] = Complex64::new(if k == 0 { v } else { 0.0 }, 0.0);
            }
        }
    }

    /// Solves `(a + dt sigma - dt c Lap) u = rhs + dt sigma target` for
    /// every field.
    fn implicit(&self, mut rhs: Vec<ModalField>, second_order: bool) -> Vec<ModalField> {
        let a = if second_order { 1.5 } else { 1.0 };
        let solvers = &self.solvers[usize::from(second_order)];
        for (f, field) in rhs.iter_mut().enumerate() {
            let spec = &self.specs[f];
            if self.sponge.iter().any(|v| *v > 0.0) {
                for (c, (sig, tgt)) in field
                    .mode_mut(0)
                    .iter_mut()
                    .zip(self.sponge.iter().zip(&self.targets[f]))
                {
                    c.re += self.dt * sig * tgt;
                }
            }
            match &solvers[f] {
                Some(solver) => {
                    Self::set_ends(spec, field);
                    solver.solve(field);
                }
                None => {
                    for k in 0..field.n_modes {
                        for (c, sig) in field.mode_mut(k).iter_mut().zip(&self.sponge) {
                            *c /= a + self.dt * sig;
                        }
                    }
                    Self::set_ends(spec, field);
                }
            }
        }
        rhs
    }

    /// Replaces the modes `k >= 1` of `q` by the gradient of the solution
    /// of `Lap chi = div q`, and drops the mean of `q_y`.
    fn project(&self, u: &mut [ModalField]) {
        let Some(lap) = &self.laplace else { return };
        let (dz, k1) = (self.grid.dz(), self.grid.k1());
        let mut chi = u[1].dz(dz).add(&u[2].dy(k1));
        for c in chi.mode_mut(0) {
            *c = Complex64::new(0.0, 0.0);
        }
        let n = chi.n_z;
        for k in 1..chi.n_modes {
            let m = chi.mode_mut(k);
            m[0] = Complex64::new(0.0, 0.0);
            m[n - 1] = Complex64::new(0.0, 0.0);
        }
        lap.solve(&mut chi);
        let gz = chi.dz(dz);
        let gy = chi.dy(k1);
        for k in 1..chi.n_modes {
            u[1].mode_mut(k).copy_from_slice(gz.mode(k));
            u[2].mode_mut(k).copy_from_slice(gy.mode(k));
        }
        for c in u[2].mode_mut(0) {
            *c = Complex64::new(0.0, 0.0);
        }
    }

    /// Advances one step of size `dt`.
    pub fn step(&mut self) -> Result<()> {
        let f_now = self.explicit(&self.u);
        let dt = self.dt;
        let (rhs, second) = match (&self.prev, self.scheme) {
            (Some((u_prev, f_prev)), Scheme::Sbdf2) => {
                let rhs: Vec<ModalField> = (0..3)
                    .map(|f| {
                        let mut r = self.u[f].scaled(2.0);
                        r.axpy(-0.5, &u_prev[f]);
                        r.axpy(2.0 * dt, &f_now[f]);
                        r.axpy(-dt, &f_prev[f]);
                        r
                    })
                    .collect();
                (rhs, true)
            }
            _ => {
                let rhs: Vec<ModalField> = (0..3)
                    .map(|f| {
                        let mut r = self.u[f].clone();
                        r.axpy(dt, &f_now[f]);
                        r
                    })
                    .collect();
                (rhs, false)
            }
        };
        let mut next = self.implicit(rhs, second);
        if self.projection {
            self.project(&mut next);
        }
        let old = std::mem::replace(&mut self.u, next);
        if self.scheme == Scheme::Sbdf2 {
            self.prev = Some((old, f_now));
        }
        self.steps += 1;
        if !self.u.iter().all(ModalField::is_finite) {
            return Err(Error::Blowup {
                t: self.time(),
                reason: "non-finite value".into(),
                partial: None,
            });
        }
        Ok(())
    }

    pub fn perturbation_state(&self) -> Option<PerturbationState> {
        if self.system == System::Nq {
            return None;
        }
        let g = &self.grid;
        Some(PerturbationState {
            phi: VectorField::new(self.u[0].to_physical(g), self.u[1].to_physical(g)).ok()?,
            psi: self.u[2].to_physical(g),
            t: self.time(),
            eps: self.eps,
        })
    }

    pub fn cole_hopf_state(&self) -> Option<ColeHopfState> {
        if self.system != System::Nq {
            return None;
        }
        let g = &self.grid;
        Some(ColeHopfState {
            n: self.u[0].to_physical(g),
            q: VectorField::new(self.u[1].to_physical(g), self.u[2].to_physical(g)).ok()?,
            t: self.time(),
        })
    }

    pub fn snapshot(&self) -> StateSnapshot {
        match self.system {
            System::Nq => InitialState::ColeHopf(self.cole_hopf_state().expect("nq state")),
            _ => InitialState::Perturbation(self.perturbation_state().expect("perturbation state")),
        }
    }

    /// `max_z |mean_y f|` over the three fields (mode 0 of the deviation
    /// from the wave for Cole-Hopf runs is not meaningful and is skipped).
    pub fn mean_drift(&self) -> f64 {
        match self.system {
            System::Nq => 0.0,
            _ => self.u.iter().map(max_mode0).fold(0.0, f64::max),
        }
    }

    /// `max |d_y q_z - d_z q_y|`, evaluated mode by mode.
    pub fn curl_norm(&self) -> f64 {
        if self.system != System::Nq {
            return 0.0;
        }
        let (dz, k1) = (self.grid.dz(), self.grid.k1());
        let c = self.u[1].dy(k1);
        let d = self.u[2].dz(dz);
        let n_modes = c.n_modes;
        let mut worst: f64 = 0.0;
        for k in 0..n_modes {
            for (a, b) in c.mode(k).iter().zip(d.mode(k)) {
                // a real field has amplitude 2|c_k| in mode k >= 1
                let w = if k == 0 { 1.0 } else { 2.0 };
                worst = worst.max(w * (a - b).norm());
            }
        }
        worst
    }

    /// Ledger functionals of a Cole-Hopf run, computed from the Fourier
    /// coefficients so that `Q` keeps its relative accuracy far below the
    /// size of the planar background.
    fn nq_sample(&self) -> LedgerSample {
        let g = &self.grid;
        let (k1, lambda) = (g.k1(), g.lambda());
        let quad = g.quad_z();
        let mut scale: f64 = 0.0;
        for f in &self.u {
            for k in 1..f.n_modes {
                let kk = k as f64 * k1;
                for c in f.mode(k) {
                    scale = scale.max(kk * c.norm());
                }
            }
        }
        let ln_q = if scale == 0.0 {
            f64::NEG_INFINITY
        } else {
            let mut total = 0.0;
            for f in &self.u {
                for k in 1..f.n_modes {
                    let kk = k as f64 * k1;
                    for (c, w) in f.mode(k).iter().zip(quad) {
                        let a = kk * c.norm() / scale;
                        total += w * 2.0 * a * a;
                    }
                }
            }
            2.0 * scale.ln() + (lambda * total).ln()
        };
        let mass = lambda
            * self.u[0]
                .mode(0)
                .iter()
                .zip(&self.wave_n)
                .zip(quad)
                .map(|((c, nw), w)| w * (c.re - nw))
                .sum::<f64>();
        LedgerSample {
            t: self.time(),
            q: ln_q.exp(),
            ln_q,
            mass,
            ..LedgerSample::default()
        }
    }

    pub fn ledger_sample(&self, profile: &WaveProfile) -> Result<LedgerSample> {
        match self.system {
            System::Nq => Ok(self.nq_sample()),
            _ => ledger_row(&self.perturbation_state().expect("perturbation state"), profile),
        }
    }
}

/// One first-order step of the nonlinear `eps = 0` perturbation system.
pub fn step_nonlinear_eps0(state: &PerturbationState, profile: &WaveProfile, dt: f64) -> Result<PerturbationState> {
    single_step(System::Nonlinear0, state.clone().into(), profile, dt)
        .map(|s| s.perturbation_state().expect("perturbation state"))
}

/// One first-order step of the linearized `eps > 0` perturbation system.
pub fn step_linear_eps(state: &PerturbationState, profile: &WaveProfile, dt: f64) -> Result<PerturbationState> {
    single_step(System::LinearEps, state.clone().into(), profile, dt)
        .map(|s| s.perturbation_state().expect("perturbation state"))
}

/// One first-order step of the Cole-Hopf system in the moving frame, with
/// the chemical diffusion of `profile` and its end states as far field.
pub fn step_nq(state: &ColeHopfState, profile: &WaveProfile, dt: f64) -> Result<ColeHopfState> {
    single_step(System::Nq, state.clone().into(), profile, dt)
        .map(|s| s.cole_hopf_state().expect("nq state"))
}

fn single_step(system: System, init: InitialState, profile: &WaveProfile, dt: f64) -> Result<Stepper> {
    let config = IntegratorConfig {
        dt,
        t_end: dt,
        scheme: Scheme::Imex1,
        cfl_safety: 1.0,
        ..IntegratorConfig::default()
    };
    let mut st = Stepper::new(system, &init, profile, &config)?;
    st.step()?;
    Ok(st)
}

struct Recorder {
    record: TrajectoryRecord,
    m0: f64,
    curl_warned: bool,
}

impl Recorder {
    fn sample(&mut self, st: &Stepper, profile: &WaveProfile) -> Result<()> {
        let sample = st.ledger_sample(profile)?;
        self.record.times.push(sample.t);
        self.record.ledger.push(sample);
        self.record.max_mean_drift = self.record.max_mean_drift.max(st.mean_drift());
        if st.system == System::Nq {
            let c = st.curl_norm();
            self.record.max_curl = self.record.max_curl.max(c);
            if c > CURL_WARNING && !self.curl_warned {
                warn!("curl of q drifted to {c:.3e} at t = {}", st.time());
                self.curl_warned = true;
            }
        }
        Ok(())
    }
}

/// Integrates `system` from `init` to `config.t_end`, recording the energy
/// ledger. On blowup the error carries everything recorded so far.
pub fn run(
    system: System,
    init: impl Into<InitialState>,
    profile: &WaveProfile,
    config: &IntegratorConfig,
) -> Result<TrajectoryRecord> {
    let init = init.into();
    let n_steps = config.n_steps()?;
    let mut st = Stepper::new(system, &init, profile, config)?;
    let mut rec = Recorder {
        record: TrajectoryRecord {
            system,
            times: Vec::new(),
            ledger: EnergyLedger::new(profile.eps()),
            snapshots: Vec::new(),
            final_state: init.clone(),
            max_mean_drift: 0.0,
            max_curl: 0.0,
            steps: 0,
        },
        m0: 0.0,
        curl_warned: false,
    };
    rec.sample(&st, profile)?;
    rec.m0 = rec.record.ledger.m0();
    if config.snapshot_every > 0 {
        rec.record.snapshots.push(st.snapshot());
    }
    let fail = |rec: Recorder, st: &Stepper, reason: String| {
        let mut record = rec.record;
        record.steps = st.steps();
        record.final_state = st.snapshot();
        Error::Blowup {
            t: st.time(),
            reason,
            partial: Some(Box::new(record)),
        }
    };
    for n in 1..=n_steps {
        if let Err(e) = st.step() {
            let reason = match e {
                Error::Blowup { reason, .. } => reason,
                other => return Err(other),
            };
            // the failed state is not kept; report the last recorded one
            let mut record = rec.record;
            record.steps = n - 1;
            return Err(Error::Blowup {
                t: st.time(),
                reason,
                partial: Some(Box::new(record)),
            });
        }
        if n % config.record_every == 0 || n == n_steps {
            rec.sample(&st, profile)?;
            let m = rec.record.ledger.last().map_or(0.0, |r| r.m_inst);
            if rec.m0 > 0.0 && m > BLOWUP_FACTOR * rec.m0 {
                let reason = format!("M = {m:.3e} exceeds {BLOWUP_FACTOR:e} M0");
                return Err(fail(rec, &st, reason));
            }
        }
        if config.snapshot_every > 0 && n % config.snapshot_every == 0 {
            rec.record.snapshots.push(st.snapshot());
        }
    }
    debug!("{system:?}: {} steps to t = {}", st.steps(), st.time());
    let mut record = rec.record;
    record.steps = st.steps();
    record.final_state = st.snapshot();
    Ok(record)
}
