//! Weighted Sobolev norms, the energy ledger and decay-rate fits.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::grid::{
    ddy, ddy_n, ddz, divergence, integrate, integrate_weighted, ScalarField, VectorField,
};
use crate::transforms::{ColeHopfState, PerturbationState};
use crate::waves::WaveProfile;

pub const MAX_SOBOLEV_ORDER: usize = 4;

/// Column names of the ledger CSV.
pub const LEDGER_HEADER: &str =
    "t,H3w_phi,H3_psi,H2w_grad_psi,M_inst,M_sup,D_phi,D_psi,D_psi4,Q,mass,C0_running";

fn square_integral(f: &ScalarField, weighted: bool) -> f64 {
    let sq = f.map(|v| v * v);
    if weighted {
        integrate_weighted(&sq)
    } else {
        integrate(&sq)
    }
}

fn check_order(k: usize) -> Result<()> {
    if k > MAX_SOBOLEV_ORDER {
        return Err(Error::param(format!(
            "Sobolev order {k} exceeds {MAX_SOBOLEV_ORDER}"
        )));
    }
    Ok(())
}

/// `sum_{i+j<=k} int |d_z^i d_y^j f|^2 (w)`. The `y`-derivatives are taken
/// spectrally first, then the `z`-derivatives by repeated central differences.
pub fn sobolev_norm(f: &ScalarField, k: usize, weighted: bool) -> Result<f64> {
    check_order(k)?;
    let mut total = 0.0;
    for j in 0..=k {
        let mut d = ddy_n(f, j as u32);
        total += square_integral(&d, weighted);
        for _ in 0..k - j {
            d = ddz(&d);
            total += square_integral(&d, weighted);
        }
    }
    Ok(total)
}

/// Sum of the component norms.
pub fn sobolev_norm_vector(v: &VectorField, k: usize, weighted: bool) -> Result<f64> {
    Ok(sobolev_norm(&v.z, k, weighted)? + sobolev_norm(&v.y, k, weighted)?)
}

/// `|grad f|^2_{H^k}` = `|f_z|^2_{H^k} + |f_y|^2_{H^k}`.
pub fn gradient_norm(f: &ScalarField, k: usize, weighted: bool) -> Result<f64> {
    Ok(sobolev_norm(&ddz(f), k, weighted)? + sobolev_norm(&ddy(f), k, weighted)?)
}

fn binomial(m: usize, i: usize) -> f64 {
    (0..i).fold(1.0, |acc, r| acc * (m - r) as f64 / (r + 1) as f64)
}

/// `|grad^m f|^2 (w)`: the full derivative tensor of order `m`, each mixed
/// partial counted with its multiplicity.
pub fn tensor_norm(f: &ScalarField, m: usize, weighted: bool) -> Result<f64> {
    check_order(m)?;
    let mut total = 0.0;
    for j in 0..=m {
        let mut d = ddy_n(f, j as u32);
        for _ in 0..m - j {
            d = ddz(&d);
        }
        total += binomial(m, j) * square_integral(&d, weighted);
    }
    Ok(total)
}

/// `ln` of `sum_f int f^2`, robust to values far below the floating-point
/// range of their squares. `-inf` for identically zero input.
pub fn ln_square_integral(fields: &[&ScalarField]) -> f64 {
    let scale = fields.iter().fold(0.0f64, |m, f| m.max(f.max_abs()));
    if scale == 0.0 {
        return f64::NEG_INFINITY;
    }
    let total: f64 = fields
        .iter()
        .map(|f| integrate(&f.map(|v| (v / scale) * (v / scale))))
        .sum();
    2.0 * scale.ln() + total.ln()
}

/// `|n_y|^2 + |q_y|^2`.
pub fn transverse_energy(state: &ColeHopfState) -> f64 {
    let parts = transverse_parts(state);
    parts.iter().map(|f| square_integral(f, false)).sum()
}

/// `ln(|n_y|^2 + |q_y|^2)`, without underflow.
pub fn ln_transverse_energy(state: &ColeHopfState) -> f64 {
    let parts = transverse_parts(state);
    ln_square_integral(&[&parts[0], &parts[1], &parts[2]])
}

fn transverse_parts(state: &ColeHopfState) -> [ScalarField; 3] {
    [ddy(&state.n), ddy(&state.q.z), ddy(&state.q.y)]
}

/// Instantaneous functionals of one state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LedgerSample {
    pub t: f64,
    pub h3w_phi: f64,
    pub h3_psi: f64,
    pub h2w_grad_psi: f64,
    /// `|grad phi|^2_{H^3_w}`, the integrand of `D_phi`.
    pub h3w_grad_phi: f64,
    /// `|grad^4 psi|^2_{H^0_w}`; `eps` times it is the integrand of `D_psi4`.
    pub grad4_psi_w: f64,
    pub q: f64,
    pub ln_q: f64,
    pub mass: f64,
}

/// Functionals of a perturbation state. `Q` is evaluated on
/// `(N + div phi, P + grad psi)`, i.e. `|d_y div phi|^2 + |grad psi_y|^2`.
pub fn ledger_row(state: &PerturbationState, profile: &WaveProfile) -> Result<LedgerSample> {
    if !crate::grid::same_grid(state.grid(), &profile.grid) {
        return Err(Error::GridMismatch);
    }
    let psi = &state.psi;
    let div = divergence(&state.phi);
    let grad_phi_h3w = gradient_norm(&state.phi.z, 3, true)? + gradient_norm(&state.phi.y, 3, true)?;
    let grad4 = if state.eps > 0.0 {
        tensor_norm(psi, 4, true)?
    } else {
        0.0
    };
    let psi_y = ddy(psi);
    let parts = [ddy(&div), ddz(&psi_y), ddy(&psi_y)];
    let ln_q = ln_square_integral(&[&parts[0], &parts[1], &parts[2]]);
    Ok(LedgerSample {
        t: state.t,
        h3w_phi: sobolev_norm_vector(&state.phi, 3, true)?,
        h3_psi: sobolev_norm(psi, 3, false)?,
        h2w_grad_psi: gradient_norm(psi, 2, true)?,
        h3w_grad_phi: grad_phi_h3w,
        grad4_psi_w: grad4,
        q: ln_q.exp(),
        ln_q,
        mass: integrate(&div),
    })
}

/// Functionals of a Cole-Hopf state; the perturbation columns are zero.
pub fn ledger_row_nq(state: &ColeHopfState, profile: &WaveProfile) -> Result<LedgerSample> {
    let g = state.n.grid();
    if !crate::grid::same_grid(g, &profile.grid) {
        return Err(Error::GridMismatch);
    }
    let wave_n = ScalarField::from_profile(g, &profile.n)?;
    let ln_q = ln_transverse_energy(state);
    Ok(LedgerSample {
        t: state.t,
        q: ln_q.exp(),
        ln_q,
        mass: integrate(&(&state.n - &wave_n)),
        ..LedgerSample::default()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyRow {
    pub t: f64,
    pub h3w_phi: f64,
    pub h3_psi: f64,
    pub h2w_grad_psi: f64,
    /// `||grad phi||^2_{H^3_w}`, the integrand of `D_phi`; not written to CSV.
    pub h3w_grad_phi: f64,
    pub m_inst: f64,
    pub m_sup: f64,
    pub d_phi: f64,
    pub d_psi: f64,
    pub d_psi4: f64,
    pub q: f64,
    /// `ln Q`, meaningful below the range where `q` underflows.
    pub ln_q: f64,
    pub mass: f64,
    pub c0_running: f64,
}

/// Time series of the energy functionals with the running supremum and the
/// dissipation integrals (trapezoid over recorded rows).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnergyLedger {
    pub eps: f64,
    pub rows: Vec<EnergyRow>,
    last: Option<LedgerSample>,
}

impl EnergyLedger {
    pub fn new(eps: f64) -> Self {
        EnergyLedger {
            eps,
            rows: Vec::new(),
            last: None,
        }
    }

    /// Initial energy `M(0)`.
    pub fn m0(&self) -> f64 {
        self.rows.first().map_or(0.0, |r| r.m_inst)
    }

    pub fn last(&self) -> Option<&EnergyRow> {
        self.rows.last()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn push(&mut self, s: LedgerSample) {
        let m_inst = s.h3w_phi + s.h3_psi + s.h2w_grad_psi;
        let mut row = EnergyRow {
            t: s.t,
            h3w_phi: s.h3w_phi,
            h3_psi: s.h3_psi,
            h2w_grad_psi: s.h2w_grad_psi,
            h3w_grad_phi: s.h3w_grad_phi,
            m_inst,
            m_sup: m_inst,
            q: s.q,
            ln_q: s.ln_q,
            mass: s.mass,
            ..EnergyRow::default()
        };
        if let (Some(prev), Some(p)) = (self.rows.last(), self.last.as_ref()) {
            let half_dt = 0.5 * (s.t - p.t);
            row.m_sup = prev.m_sup.max(m_inst);
            row.d_phi = prev.d_phi + half_dt * (p.h3w_grad_phi + s.h3w_grad_phi);
            row.d_psi = prev.d_psi + half_dt * (p.h2w_grad_psi + s.h2w_grad_psi);
            row.d_psi4 = prev.d_psi4 + half_dt * self.eps * (p.grad4_psi_w + s.grad4_psi_w);
        }
        let m0 = self.rows.first().map_or(m_inst, |r| r.m_inst);
        row.c0_running = if m0 > 0.0 {
            (row.m_sup + row.d_phi + row.d_psi + row.d_psi4) / m0
        } else {
            0.0
        };
        self.rows.push(row);
        self.last = Some(s);
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{LEDGER_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.t,
                r.h3w_phi,
                r.h3_psi,
                r.h2w_grad_psi,
                r.m_inst,
                r.m_sup,
                r.d_phi,
                r.d_psi,
                r.d_psi4,
                r.q,
                r.mass,
                r.c0_running
            )?;
        }
        Ok(())
    }

    /// `t,Q,ln_Q` for the planarity runs.
    pub fn write_planarity_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,Q,ln_Q")?;
        for r in &self.rows {
            writeln!(out, "{:.16e},{:.16e},{:.16e}", r.t, r.q, r.ln_q)?;
        }
        Ok(())
    }
}

/// `(M_sup + D_phi + D_psi + D_psi4) / M_0` at the last row.
pub fn empirical_c0(ledger: &EnergyLedger) -> Result<f64> {
    let m0 = ledger.m0();
    let last = ledger
        .last()
        .ok_or_else(|| Error::param("empty ledger"))?;
    if !(m0 > 0.0) {
        return Err(Error::param("C0 is undefined for M0 = 0"));
    }
    Ok((last.m_sup + last.d_phi + last.d_psi + last.d_psi4) / m0)
}

/// Least-squares line `y = slope x + intercept`; returns
/// `(slope, intercept, r_squared)` with `r_squared = 0` for constant data.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Fit(format!(
            "need at least two paired samples, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::Fit("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        0.0
    } else {
        let ss_res: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| {
                let e = y - (slope * x + intercept);
                e * e
            })
            .sum();
        1.0 - ss_res / syy
    };
    Ok((slope, intercept, r2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// `c` in `values ~ e^{-c t}`.
    pub rate: f64,
    pub r_squared: f64,
    pub samples: usize,
}

const MIN_FIT_SAMPLES: usize = 10;

/// Log-linear least squares of `values` over `window = (t_lo, t_hi)`.
pub fn fit_exponential_decay(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    let mut logs = Vec::with_capacity(values.len());
    for (t, v) in times.iter().zip(values) {
        if *t >= window.0 && *t <= window.1 && !(*v > 0.0) {
            return Err(Error::Fit(format!("non-positive value {v} at t = {t}")));
        }
        logs.push(v.ln());
    }
    fit_exponential_decay_log(times, &logs, window)
}

/// As [`fit_exponential_decay`] with `ln(values)` supplied directly.
pub fn fit_exponential_decay_log(
    times: &[f64],
    ln_values: &[f64],
    window: (f64, f64),
) -> Result<DecayFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(ln_values)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, v)| (*t, *v))
        .unzip();
    if xs.len() < MIN_FIT_SAMPLES {
        return Err(Error::Fit(format!(
            "{} samples in [{}, {}], need {MIN_FIT_SAMPLES}",
            xs.len(),
            window.0,
            window.1
        )));
    }
    if let Some(bad) = ys.iter().find(|v| !v.is_finite()) {
        return Err(Error::Fit(format!("non-finite log value {bad}")));
    }
    let (slope, _, r2) = fit_line(&xs, &ys)?;
    Ok(DecayFit {
        rate: -slope,
        r_squared: r2,
        samples: xs.len(),
    })
}
