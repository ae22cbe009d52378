//! Changes of variables between the physical pair `(n, c)`, the Cole-Hopf
//! pair `(n, q)` with `q = -grad ln c`, and the perturbation pair
//! `(phi, psi)` with `n = N + div phi`, `c = C e^{-psi}`.

use std::sync::Arc;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use crate::energy::{sobolev_norm, sobolev_norm_vector};
use crate::error::{Error, Result};
use crate::grid::{
    ddy, ddz, ddz_1d, divergence, gradient, remove_mean_in_y, same_grid, Grid, ScalarField,
    VectorField,
};
use crate::waves::WaveProfile;

#[derive(Debug, Clone)]
pub struct PhysicalState {
    pub n: ScalarField,
    pub c: ScalarField,
    pub t: f64,
}

#[derive(Debug, Clone)]
pub struct ColeHopfState {
    pub n: ScalarField,
    pub q: VectorField,
    pub t: f64,
}

#[derive(Debug, Clone)]
pub struct PerturbationState {
    pub phi: VectorField,
    pub psi: ScalarField,
    pub t: f64,
    /// Chemical diffusion of the system the state belongs to.
    pub eps: f64,
}

impl PerturbationState {
    pub fn zeros(grid: &Arc<Grid>, eps: f64) -> Self {
        PerturbationState {
            phi: VectorField::zeros(grid),
            psi: ScalarField::zeros(grid),
            t: 0.0,
            eps,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.psi.grid()
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn is_finite(&self) -> bool {
        self.phi.is_finite() && self.psi.is_finite()
    }

    pub fn scale(&self, a: f64) -> Self {
        PerturbationState {
            phi: self.phi.scale(a),
            psi: &self.psi * a,
            t: self.t,
            eps: self.eps,
        }
    }

    /// `a * self + b * other`, keeping the time of `self`.
    pub fn combine(&self, a: f64, other: &PerturbationState, b: f64) -> Result<Self> {
        let lin = |x: &ScalarField, y: &ScalarField| x.zip_map(y, |u, v| a * u + b * v);
        Ok(PerturbationState {
            phi: VectorField::new(lin(&self.phi.z, &other.phi.z)?, lin(&self.phi.y, &other.phi.y)?)?,
            psi: lin(&self.psi, &other.psi)?,
            t: self.t,
            eps: self.eps,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.phi.max_abs().max(self.psi.max_abs())
    }
}

pub fn cole_hopf_forward(state: &PhysicalState) -> Result<ColeHopfState> {
    let c = &state.c;
    if !same_grid(c.grid(), state.n.grid()) {
        return Err(Error::GridMismatch);
    }
    let n_y = c.grid().n_y();
    if let Some((k, &value)) = c.values().iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositiveConcentration {
            i: k / n_y,
            j: k % n_y,
            value,
        });
    }
    let qz = ddz(c).zip_map(c, |d, v| -d / v)?;
    let qy = ddy(c).zip_map(c, |d, v| -d / v)?;
    Ok(ColeHopfState {
        n: state.n.clone(),
        q: VectorField::new(qz, qy)?,
        t: state.t,
    })
}

/// `d_y q_z - d_z q_y`.
pub fn curl(q: &VectorField) -> ScalarField {
    &ddy(&q.z) - &ddz(&q.y)
}

/// Admissible curl for [`cole_hopf_inverse`].
pub fn curl_limit(q: &VectorField) -> f64 {
    1e-6 * q.max_abs() + 1e-10
}

/// Cumulative integral from the first node, trapezoid with the endpoint
/// derivative correction (fourth order for smooth integrands).
fn cumulative_integral(f: &[f64], h: f64) -> Vec<f64> {
    let df = ddz_1d(f, h);
    let mut out = vec![0.0; f.len()];
    let mut trap = 0.0;
    for i in 1..f.len() {
        trap += 0.5 * h * (f[i - 1] + f[i]);
        out[i] = trap - h * h / 12.0 * (df[i] - df[0]);
    }
    out
}

/// Integral of the cubic through four nodes around `x`, from node `m` to `x`.
fn partial_cell(f: &[f64], z0: f64, h: f64, x: f64) -> f64 {
    let n = f.len();
    let m = (((x - z0) / h).floor() as isize).clamp(0, n as isize - 2) as usize;
    let base = m.saturating_sub(1).min(n - 4);
    let t_end = (x - z0) / h - base as f64;
    let t_start = m as f64 - base as f64;
    // Lagrange basis on nodes 0..3 in local units, integrated exactly
    let nodes = [0.0, 1.0, 2.0, 3.0];
    let mut total = 0.0;
    for a in 0..4 {
        // coefficients of prod_{b != a} (t - t_b) / (t_a - t_b)
        let mut poly = [1.0, 0.0, 0.0, 0.0];
        let mut denom = 1.0;
        for b in 0..4 {
            if b == a {
                continue;
            }
            let mut next = [0.0; 4];
            for d in 0..3 {
                next[d + 1] += poly[d];
                next[d] -= poly[d] * nodes[b];
            }
            poly = next;
            denom *= nodes[a] - nodes[b];
        }
        let antider = |t: f64| {
            poly.iter()
                .enumerate()
                .map(|(d, c)| c * t.powi(d as i32 + 1) / (d as f64 + 1.0))
                .sum::<f64>()
        };
        total += f[base + a] * (antider(t_end) - antider(t_start)) / denom;
    }
    total * h
}

/// Recovers `c` from a curl-free `q` by integrating `-q . dl` along the path
/// `(anchor_z, 0) -> (z, 0) -> (z, y)`. The `z` leg uses the corrected
/// trapezoid rule, the periodic `y` leg the exact antiderivative of the
/// resolved Fourier modes.
pub fn cole_hopf_inverse(q: &VectorField, c_anchor: f64, anchor_z: f64) -> Result<ScalarField> {
    if !(c_anchor > 0.0) || !c_anchor.is_finite() {
        return Err(Error::param(format!("c_anchor must be positive, got {c_anchor}")));
    }
    let g = Arc::clone(q.grid());
    if !(anchor_z.abs() <= g.l_z()) {
        return Err(Error::param(format!(
            "anchor_z = {anchor_z} lies outside [-{0}, {0}]",
            g.l_z()
        )));
    }
    let max_curl = curl(q).max_abs();
    let limit = curl_limit(q);
    if max_curl >= limit {
        return Err(Error::NotCurlFree { max_curl, limit });
    }
    let (n_z, n_y, h) = (g.n_z(), g.n_y(), g.dz());
    let q1: Vec<f64> = (0..n_z).map(|i| q.z.at(i, 0)).collect();
    let cum = cumulative_integral(&q1, h);
    let m = (((anchor_z - g.z()[0]) / h).floor() as usize).min(n_z - 2);
    let at_anchor = cum[m] + partial_cell(&q1, g.z()[0], h, anchor_z);
    let ln_base: Vec<f64> = cum.iter().map(|v| c_anchor.ln() - (v - at_anchor)).collect();

    // y leg: spectral antiderivative of the mean-free part plus the mean
    let anti = g.apply_y_symbol(
        q.y.values(),
        |k| {
            if k == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, -1.0 / k)
            }
        },
        Complex64::new(0.0, 0.0),
    );
    let y = g.y();
    let mut values = vec![0.0; g.len()];
    for i in 0..n_z {
        let row = q.y.row(i);
        let mean = row.iter().sum::<f64>() / n_y as f64;
        let a = &anti[i * n_y..(i + 1) * n_y];
        for j in 0..n_y {
            let leg = a[j] - a[0] + mean * y[j];
            values[i * n_y + j] = (ln_base[i] - leg).exp();
        }
    }
    ScalarField::from_values(&g, values)
}

/// `(N + div phi, C e^{-psi})`.
pub fn assemble_physical(pert: &PerturbationState, profile: &WaveProfile) -> Result<PhysicalState> {
    let g = pert.grid();
    if !same_grid(g, &profile.grid) {
        return Err(Error::GridMismatch);
    }
    let wave_n = ScalarField::from_profile(g, &profile.n)?;
    let wave_c = ScalarField::from_profile(g, &profile.c)?;
    let n = &wave_n + &divergence(&pert.phi);
    let c = wave_c.zip_map(&pert.psi, |cv, p| cv * (-p).exp())?;
    let min_n = n.values().iter().cloned().fold(f64::INFINITY, f64::min);
    if min_n < -1e-8 {
        warn!("assembled density dips to {min_n:.3e}: perturbation too large for positivity");
    }
    Ok(PhysicalState { n, c, t: pert.t })
}

/// `(N + div phi, P + grad psi)` directly, without the logarithm.
pub fn assemble_cole_hopf(pert: &PerturbationState, profile: &WaveProfile) -> Result<ColeHopfState> {
    let g = pert.grid();
    if !same_grid(g, &profile.grid) {
        return Err(Error::GridMismatch);
    }
    let wave_n = ScalarField::from_profile(g, &profile.n)?;
    let wave_p = ScalarField::from_profile(g, &profile.p)?;
    let grad = gradient(&pert.psi);
    Ok(ColeHopfState {
        n: &wave_n + &divergence(&pert.phi),
        q: VectorField::new(&wave_p + &grad.z, grad.y)?,
        t: pert.t,
    })
}

/// The planar wave as a Cole-Hopf state.
pub fn wave_cole_hopf(profile: &WaveProfile) -> Result<ColeHopfState> {
    let g = &profile.grid;
    Ok(ColeHopfState {
        n: ScalarField::from_profile(g, &profile.n)?,
        q: VectorField::new(ScalarField::from_profile(g, &profile.p)?, ScalarField::zeros(g))?,
        t: 0.0,
    })
}

/// `exp(-1/(1 - x^2))` on `|x| < 1`.
fn bump(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - x * x)).exp()
    }
}

const TERMS_PER_COMPONENT: usize = 3;

fn random_component(grid: &Arc<Grid>, rng: &mut ChaCha8Rng, mean_zero_y: bool) -> ScalarField {
    let k1 = grid.k1();
    let top = grid.n_modes().min(3);
    let lowest = if mean_zero_y { 1 } else { 0 };
    let mut values = vec![0.0; grid.len()];
    for _ in 0..TERMS_PER_COMPONENT {
        let centre: f64 = rng.gen_range(-2.0..2.0);
        let radius: f64 = rng.gen_range(2.0..4.0);
        let amp: f64 = rng.gen_range(-1.0..1.0);
        let mode = rng.gen_range(lowest..top.max(lowest + 1));
        let use_sin: bool = rng.gen();
        let profile: Vec<f64> = grid.z().iter().map(|z| bump((z - centre) / radius)).collect();
        let n_y = grid.n_y();
        for (i, b) in profile.iter().enumerate() {
            if *b == 0.0 {
                continue;
            }
            for (j, y) in grid.y().iter().enumerate() {
                let arg = mode as f64 * k1 * y;
                let shape = if mode == 0 {
                    1.0
                } else if use_sin {
                    arg.sin()
                } else {
                    arg.cos()
                };
                values[i * n_y + j] += amp * b * shape;
            }
        }
    }
    let f = ScalarField::from_values(grid, values).expect("sizes match");
    if mean_zero_y {
        remove_mean_in_y(&f)
    } else {
        f
    }
}

/// `M = |phi|^2_{H^3_w} + |psi|^2_{H^3} + |grad psi|^2_{H^2_w}`.
pub fn energy_m(pert: &PerturbationState) -> Result<f64> {
    let g = gradient(&pert.psi);
    Ok(sobolev_norm_vector(&pert.phi, 3, true)?
        + sobolev_norm(&pert.psi, 3, false)?
        + sobolev_norm_vector(&g, 2, true)?)
}

/// Smooth compactly supported data of size `M = amplitude`, deterministic
/// in `seed`. The returned state has `eps = 0`; see
/// [`PerturbationState::with_eps`].
pub fn make_initial_perturbation(
    grid: &Arc<Grid>,
    amplitude: f64,
    seed: u64,
    mean_zero_y: bool,
) -> Result<PerturbationState> {
    if !(amplitude >= 0.0) || !amplitude.is_finite() {
        return Err(Error::param(format!("amplitude must be non-negative, got {amplitude}")));
    }
    if amplitude == 0.0 {
        return Ok(PerturbationState::zeros(grid, 0.0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi_z = random_component(grid, &mut rng, mean_zero_y);
    let phi_y = random_component(grid, &mut rng, mean_zero_y);
    let psi = random_component(grid, &mut rng, mean_zero_y);
    let raw = PerturbationState {
        phi: VectorField::new(phi_z, phi_y)?,
        psi,
        t: 0.0,
        eps: 0.0,
    };
    let m = energy_m(&raw)?;
    if !(m > 0.0) {
        return Err(Error::param("bump sum vanished on this grid; the grid is too coarse"));
    }
    Ok(raw.scale((amplitude / m).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{integrate, make_grid, mean_in_y};
    use crate::waves::{explicit_wave_eps0, WaveParams};
    use std::f64::consts::PI;

    fn wave(n_z: usize) -> WaveProfile {
        let p = WaveParams::new(0.0, 1.0, 1.0).unwrap();
        let g = make_grid(25.0, n_z, 0.5, 16, 1.0).unwrap();
        explicit_wave_eps0(&p, &g).unwrap()
    }

    #[test]
    fn constant_c_gives_zero_q() {
        let g = make_grid(5.0, 64, 0.5, 8, 1.0).unwrap();
        let st = PhysicalState {
            n: ScalarField::zeros(&g),
            c: ScalarField::constant(&g, 2.5),
            t: 0.0,
        };
        let ch = cole_hopf_forward(&st).unwrap();
        assert!(ch.q.max_abs() < 1e-14);
    }

    #[test]
    fn forward_rejects_non_positive_c() {
        let g = make_grid(5.0, 32, 0.5, 4, 1.0).unwrap();
        let mut c = ScalarField::constant(&g, 1.0);
        c.values_mut()[5 * 4 + 2] = -0.1;
        let st = PhysicalState {
            n: ScalarField::zeros(&g),
            c,
            t: 0.0,
        };
        match cole_hopf_forward(&st) {
            Err(Error::NonPositiveConcentration { i, j, .. }) => assert_eq!((i, j), (5, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn forward_of_wave_is_p() {
        let mut errs = Vec::new();
        for &n_z in &[512, 1024] {
            let w = wave(n_z);
            let g = &w.grid;
            let st = PhysicalState {
                n: ScalarField::from_profile(g, &w.n).unwrap(),
                c: ScalarField::from_profile(g, &w.c).unwrap(),
                t: 0.0,
            };
            let ch = cole_hopf_forward(&st).unwrap();
            let p = ScalarField::from_profile(g, &w.p).unwrap();
            errs.push((&ch.q.z - &p).max_abs());
            assert!(ch.q.y.max_abs() < 1e-14);
        }
        let ratio = errs[0] / errs[1];
        assert!(ratio > 3.5 && ratio < 4.5, "{errs:?}");
    }

    #[test]
    fn forward_of_perturbed_c_is_p_plus_grad_psi() {
        let w = wave(1024);
        let g = &w.grid;
        let k = g.k1();
        let psi = ScalarField::from_fn(g, |z, y| 0.1 * (-z * z / 4.0).exp() * (k * y).cos());
        let st = assemble_physical(
            &PerturbationState {
                phi: VectorField::zeros(g),
                psi: psi.clone(),
                t: 0.0,
                eps: 0.0,
            },
            &w,
        )
        .unwrap();
        let ch = cole_hopf_forward(&st).unwrap();
        let psi_z = ScalarField::from_fn(g, |z, y| 0.1 * (-z / 2.0) * (-z * z / 4.0).exp() * (k * y).cos());
        let expect_z = &ScalarField::from_profile(g, &w.p).unwrap() + &psi_z;
        let expect_y = ScalarField::from_fn(g, |z, y| -0.1 * k * (-z * z / 4.0).exp() * (k * y).sin());
        let dz2 = g.dz() * g.dz();
        assert!((&ch.q.z - &expect_z).max_abs() < 10.0 * dz2);
        assert!((&ch.q.y - &expect_y).max_abs() < 1e-10);
    }

    #[test]
    fn inverse_trivial() {
        let g = make_grid(5.0, 64, 0.5, 8, 1.0).unwrap();
        let c = cole_hopf_inverse(&VectorField::zeros(&g), 3.0, 0.3).unwrap();
        assert!(c.values().iter().all(|v| (v - 3.0).abs() < 1e-15));
    }

    #[test]
    fn inverse_recovers_wave() {
        let w = wave(2048);
        let g = &w.grid;
        let q = VectorField::new(ScalarField::from_profile(g, &w.p).unwrap(), ScalarField::zeros(g)).unwrap();
        let c = cole_hopf_inverse(&q, 0.5, 0.0).unwrap();
        let exact = ScalarField::from_profile(g, &w.c).unwrap();
        let rel = c
            .values()
            .iter()
            .zip(exact.values())
            .fold(0.0f64, |m, (a, b)| m.max((a / b - 1.0).abs()));
        assert!(rel < 1e-6, "rel = {rel}");
    }

    #[test]
    fn inverse_rejects_rotational_field() {
        let g = make_grid(5.0, 64, 0.5, 8, 1.0).unwrap();
        let k = g.k1();
        let q = VectorField::new(ScalarField::from_fn(&g, |_, y| (k * y).sin()), ScalarField::zeros(&g)).unwrap();
        assert!(matches!(cole_hopf_inverse(&q, 1.0, 0.0), Err(Error::NotCurlFree { .. })));
    }

    #[test]
    fn curl_examples() {
        let g = make_grid(5.0, 64, 0.5, 16, 1.0).unwrap();
        let k = 2.0 * PI / 0.5;
        let q = VectorField::new(ScalarField::from_fn(&g, |_, y| (k * y).sin()), ScalarField::zeros(&g)).unwrap();
        let exact = ScalarField::from_fn(&g, |_, y| k * (k * y).cos());
        assert!((&curl(&q) - &exact).max_abs() < 1e-12);
        let planar = VectorField::new(ScalarField::from_fn(&g, |z, _| z.tanh()), ScalarField::zeros(&g)).unwrap();
        assert!(curl(&planar).max_abs() < 1e-14);
        let psi = ScalarField::from_fn(&g, |z, y| (-z * z).exp() * (k * y).cos());
        assert!(curl(&gradient(&psi)).max_abs() < 1e-10);
    }

    #[test]
    fn assemble_zero_and_constant_psi() {
        let w = wave(256);
        let g = &w.grid;
        let st = assemble_physical(&PerturbationState::zeros(g, 0.0), &w).unwrap();
        for i in 0..g.n_z() {
            for j in 0..g.n_y() {
                assert_eq!(st.n.at(i, j), w.n[i]);
                assert_eq!(st.c.at(i, j), w.c[i]);
            }
        }
        let mut pert = PerturbationState::zeros(g, 0.0);
        pert.psi = ScalarField::constant(g, 0.7);
        let st = assemble_physical(&pert, &w).unwrap();
        assert!((st.c.at(100, 3) - w.c[100] * (-0.7f64).exp()).abs() < 1e-15);
        let ch = cole_hopf_forward(&st).unwrap();
        let base = cole_hopf_forward(&assemble_physical(&PerturbationState::zeros(g, 0.0), &w).unwrap()).unwrap();
        assert!((&ch.q.z - &base.q.z).max_abs() < 1e-12);
    }

    #[test]
    fn assembled_mass_vanishes_for_clamped_phi() {
        let w = wave(512);
        let g = &w.grid;
        let pert = make_initial_perturbation(g, 1e-2, 7, false).unwrap();
        let st = assemble_physical(&pert, &w).unwrap();
        let wave_n = ScalarField::from_profile(g, &w.n).unwrap();
        assert!(integrate(&(&st.n - &wave_n)).abs() < 1e-14);
    }

    #[test]
    fn initial_perturbation_properties() {
        let g = make_grid(25.0, 512, 0.5, 16, 1.0).unwrap();
        let zero = make_initial_perturbation(&g, 0.0, 1, true).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
        let p = make_initial_perturbation(&g, 1e-4, 42, true).unwrap();
        assert!((energy_m(&p).unwrap() / 1e-4 - 1.0).abs() < 1e-10);
        for f in [&p.phi.z, &p.phi.y, &p.psi] {
            assert!(mean_in_y(f).iter().all(|m| m.abs() < 1e-14));
        }
        let again = make_initial_perturbation(&g, 1e-4, 42, true).unwrap();
        assert_eq!(p.psi.values(), again.psi.values());
        let other = make_initial_perturbation(&g, 1e-4, 43, true).unwrap();
        assert_ne!(p.psi.values(), other.psi.values());
        // clamped ends
        for f in [&p.phi.z, &p.phi.y] {
            assert!(f.row(0).iter().chain(f.row(g.n_z() - 1)).all(|v| *v == 0.0));
        }
    }

    #[test]
    fn assembled_q_curl_shrinks_under_refinement() {
        let mut prev = None;
        for &n_z in &[256, 512, 1024] {
            let w = wave(n_z);
            let pert = make_initial_perturbation(&w.grid, 1e-2, 3, false).unwrap();
            let st = assemble_physical(&pert, &w).unwrap();
            let c = curl(&cole_hopf_forward(&st).unwrap().q).max_abs();
            if let Some(p) = prev {
                assert!(c < p / 3.0, "{p} -> {c}");
            }
            prev = Some(c);
        }
    }
}
