//! Fourier-in-`y` representation used by the time steppers.
//!
//! A [`ModalField`] holds the complex coefficients `c_k(z)` for the resolved
//! non-negative modes `k = 0 .. n_y/2 - 1` of a real field
//! `f(z, y) = sum_k c_k(z) e^{i k k1 y}` (negative modes are conjugates).
//! Products are evaluated as truncated convolutions, so a mode never picks up
//! round-off from the products of other modes it does not interact with.

use std::sync::Arc;

use rustfft::num_complex::Complex64;

use crate::grid::{Grid, ScalarField};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ModalField {
    pub n_z: usize,
    pub n_modes: usize,
    /// Mode-major: `data[k * n_z + i]`.
    pub data: Vec<Complex64>,
}

impl ModalField {
    pub fn zeros(n_z: usize, n_modes: usize) -> Self {
        ModalField {
            n_z,
            n_modes,
            data: vec![Complex64::new(0.0, 0.0); n_z * n_modes],
        }
    }

    pub fn like(other: &ModalField) -> Self {
        Self::zeros(other.n_z, other.n_modes)
    }

    pub fn mode(&self, k: usize) -> &[Complex64] {
        &self.data[k * self.n_z..(k + 1) * self.n_z]
    }

    pub fn mode_mut(&mut self, k: usize) -> &mut [Complex64] {
        let n = self.n_z;
        &mut self.data[k * n..(k + 1) * n]
    }

    pub fn from_physical(f: &ScalarField) -> Self {
        let g = f.grid();
        let (n_z, n_y, n_modes) = (g.n_z(), g.n_y(), g.n_modes());
        let spec = g.forward_rows(f.values());
        let scale = 1.0 / n_y as f64;
        let mut out = Self::zeros(n_z, n_modes);
        for i in 0..n_z {
            for k in 0..n_modes {
                out.data[k * n_z + i] = spec[i * n_y + k] * scale;
            }
            out.data[i].im = 0.0;
        }
        out
    }

    pub fn to_physical(&self, grid: &Arc<Grid>) -> ScalarField {
        let (n_z, n_y) = (grid.n_z(), grid.n_y());
        debug_assert_eq!(n_z, self.n_z);
        let mut spec = vec![Complex64::new(0.0, 0.0); n_z * n_y];
        let scale = n_y as f64;
        for i in 0..n_z {
            let row = &mut spec[i * n_y..(i + 1) * n_y];
            row[0] = Complex64::new(self.data[i].re * scale, 0.0);
            for k in 1..self.n_modes {
                let c = self.data[k * n_z + i] * scale;
                row[k] = c;
                row[n_y - k] = c.conj();
            }
        }
        ScalarField::from_values(grid, grid.inverse_rows(spec)).expect("sizes match")
    }

    pub fn axpy(&mut self, a: f64, x: &ModalField) {
        for (d, s) in self.data.iter_mut().zip(&x.data) {
            *d += s * a;
        }
    }

    pub fn scaled(&self, a: f64) -> ModalField {
        ModalField {
            n_z: self.n_z,
            n_modes: self.n_modes,
            data: self.data.iter().map(|c| c * a).collect(),
        }
    }

    pub fn add(&self, other: &ModalField) -> ModalField {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    /// Multiplies by a `y`-independent coefficient `a(z)`.
    pub fn mul_planar(&self, a: &[f64]) -> ModalField {
        let mut out = self.clone();
        for k in 0..self.n_modes {
            for (c, &ai) in out.mode_mut(k).iter_mut().zip(a) {
                *c *= ai;
            }
        }
        out
    }

    /// `d/dz`, central inside, one-sided second order at the ends.
    pub fn dz(&self, dz: f64) -> ModalField {
        let n = self.n_z;
        let h2 = 2.0 * dz;
        let mut out = Self::like(self);
        for k in 0..self.n_modes {
            let f = self.mode(k);
            let o = out.mode_mut(k);
            o[0] = (f[0] * -3.0 + f[1] * 4.0 - f[2]) / h2;
            for i in 1..n - 1 {
                o[i] = (f[i + 1] - f[i - 1]) / h2;
            }
            o[n - 1] = (f[n - 1] * 3.0 - f[n - 2] * 4.0 + f[n - 3]) / h2;
        }
        out
    }

    /// Forward difference `(f_{i+1} - f_i)/dz`: upwind for transport toward
    /// decreasing `z`. The last node falls back to the backward difference.
    pub fn dz_forward(&self, dz: f64) -> ModalField {
        let n = self.n_z;
        let mut out = Self::like(self);
        for k in 0..self.n_modes {
            let f = self.mode(k);
            let o = out.mode_mut(k);
            for i in 0..n - 1 {
                o[i] = (f[i + 1] - f[i]) / dz;
            }
            o[n - 1] = (f[n - 1] - f[n - 2]) / dz;
        }
        out
    }

    /// `d/dy`: multiplies mode `k` by `i k k1`.
    pub fn dy(&self, k1: f64) -> ModalField {
        let mut out = self.clone();
        for k in 0..self.n_modes {
            let f = Complex64::new(0.0, k as f64 * k1);
            for c in out.mode_mut(k) {
                *c *= f;
            }
        }
        out
    }

    /// Truncated convolution: the product of two real fields restricted to
    /// the resolved band.
    pub fn product(&self, other: &ModalField) -> ModalField {
        let n = self.n_z;
        let km = self.n_modes as isize;
        let mut out = Self::like(self);
        let get = |f: &ModalField, m: isize, i: usize| -> Complex64 {
            if m >= 0 {
                f.data[m as usize * n + i]
            } else {
                f.data[(-m) as usize * n + i].conj()
            }
        };
        for k in 0..km {
            let lo = (k - (km - 1)).max(-(km - 1));
            let hi = (km - 1).min(k + km - 1);
            let o = &mut out.data[k as usize * n..(k as usize + 1) * n];
            for m in lo..=hi {
                let r = k - m;
                for (i, oi) in o.iter_mut().enumerate() {
                    *oi += get(self, m, i) * get(other, r, i);
                }
            }
        }
        for c in out.mode_mut(0) {
            c.im = 0.0;
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, c| m.max(c.norm()))
    }
}

/// Precomputed Thomas factorization of
/// `(a + dt c (2/dz^2 + k^2) + dt sigma_i) u_i - dt c/dz^2 (u_{i-1} + u_{i+1})`
/// per mode, with Dirichlet rows at both ends.
#[derive(Debug, Clone)]
pub(crate) struct HelmholtzSolver {
    n_z: usize,
    off: f64,
    /// Per mode: modified super-diagonal and inverse pivots.
    cprime: Vec<Vec<f64>>,
    inv_pivot: Vec<Vec<f64>>,
}

impl HelmholtzSolver {
    pub fn new(n_z: usize, n_modes: usize, dz: f64, k1: f64, a: f64, dt_c: f64, damping: &[f64]) -> Self {
        let off = -dt_c / (dz * dz);
        let mut cprime = Vec::with_capacity(n_modes);
        let mut inv_pivot = Vec::with_capacity(n_modes);
        for k in 0..n_modes {
            let kk = k as f64 * k1;
            let diag_base = a + dt_c * (2.0 / (dz * dz) + kk * kk);
            // rows: 0 and n-1 are identity rows
            let mut cp = vec![0.0; n_z];
            let mut ip = vec![0.0; n_z];
            ip[0] = 1.0;
            for i in 1..n_z - 1 {
                let diag = diag_base + damping.get(i).copied().unwrap_or(0.0);
                let denom = diag - off * cp[i - 1];
                ip[i] = 1.0 / denom;
                cp[i] = off / denom;
            }
            ip[n_z - 1] = 1.0;
            cprime.push(cp);
            inv_pivot.push(ip);
        }
        HelmholtzSolver {
            n_z,
            off,
            cprime,
            inv_pivot,
        }
    }

    /// Solves in place; the end values of each mode of `rhs` are taken as
    /// the Dirichlet data.
    pub fn solve(&self, rhs: &mut ModalField) {
        let n = self.n_z;
        for k in 0..rhs.n_modes {
            let cp = &self.cprime[k];
            let ip = &self.inv_pivot[k];
            let d = rhs.mode_mut(k);
            // forward sweep; row 0 is the identity so d[0] is final
            for i in 1..n - 1 {
                d[i] = (d[i] - d[i - 1] * self.off) * ip[i];
            }
            // row n-1 is the identity as well
            for i in (1..n - 1).rev() {
                d[i] -= d[i + 1] * cp[i];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, ScalarField};
    use std::f64::consts::PI;

    #[test]
    fn physical_round_trip() {
        let g = make_grid(3.0, 32, 0.5, 8, 1.0).unwrap();
        let k = 2.0 * PI / 0.5;
        let f = ScalarField::from_fn(&g, |z, y| z.cos() + (-z * z).exp() * (k * y).sin() + 0.3 * (3.0 * k * y).cos());
        let back = ModalField::from_physical(&f).to_physical(&g);
        assert!((&f - &back).max_abs() < 1e-14);
    }

    #[test]
    fn product_matches_pointwise_for_band_limited() {
        let g = make_grid(3.0, 24, 1.0, 16, 1.0).unwrap();
        let k = g.k1();
        let a = ScalarField::from_fn(&g, |z, y| 1.0 + z * (k * y).cos());
        let b = ScalarField::from_fn(&g, |z, y| z.sin() + (2.0 * k * y).sin());
        let prod = ModalField::from_physical(&a)
            .product(&ModalField::from_physical(&b))
            .to_physical(&g);
        let exact = &a * &b;
        assert!((&prod - &exact).max_abs() < 1e-13);
    }

    #[test]
    fn helmholtz_solve_matches_operator() {
        let g = make_grid(2.0, 40, 1.0, 8, 1.0).unwrap();
        let (dz, k1, dt) = (g.dz(), g.k1(), 0.1);
        let n = g.n_z();
        let solver = HelmholtzSolver::new(n, 4, dz, k1, 1.5, dt * 0.7, &[]);
        let mut u = ModalField::zeros(n, 4);
        for k in 0..4 {
            for i in 0..n {
                u.mode_mut(k)[i] = Complex64::new((i as f64 * 0.3 + k as f64).sin(), (i as f64 * 0.1).cos());
            }
        }
        // apply operator
        let mut rhs = u.clone();
        for k in 0..4 {
            let kk = k as f64 * k1;
            let m = u.mode(k);
            let r = rhs.mode_mut(k);
            for i in 1..n - 1 {
                let lap = (m[i + 1] - m[i] * 2.0 + m[i - 1]) / (dz * dz) - m[i] * kk * kk;
                r[i] = m[i] * 1.5 - lap * (dt * 0.7);
            }
        }
        solver.solve(&mut rhs);
        let err = rhs.data.iter().zip(&u.data).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
        assert!(err < 1e-12, "err = {err}");
    }
}
