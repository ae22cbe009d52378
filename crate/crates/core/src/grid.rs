//! Truncated strip `[-L_z, L_z] x [0, lambda)` with a uniform finite-difference
//! axis in `z` and a periodic Fourier axis in `y`.
//!
//! Fields are stored row-major over `(z_i, y_j)`: index `i * n_y + j`.
//! `z`-derivatives are second-order central differences (one-sided
//! second-order at the two ends), `y`-derivatives are spectral.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Smallest admissible number of `z` nodes.
pub const MIN_NZ: usize = 16;
/// Smallest admissible number of `y` nodes.
pub const MIN_NY: usize = 4;

pub struct Grid {
    l_z: f64,
    n_z: usize,
    lambda: f64,
    n_y: usize,
    s: f64,
    dz: f64,
    dy: f64,
    z: Vec<f64>,
    y: Vec<f64>,
    weight: Vec<f64>,
    quad_z: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("l_z", &self.l_z)
            .field("n_z", &self.n_z)
            .field("lambda", &self.lambda)
            .field("n_y", &self.n_y)
            .field("s", &self.s)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.l_z == other.l_z
            && self.n_z == other.n_z
            && self.lambda == other.lambda
            && self.n_y == other.n_y
            && self.s == other.s
    }
}

/// Builds a grid; see [`Grid::new`].
pub fn make_grid(l_z: f64, n_z: usize, lambda: f64, n_y: usize, s: f64) -> Result<Arc<Grid>> {
    Grid::new(l_z, n_z, lambda, n_y, s)
}

impl Grid {
    /// `s` only enters through the weight `w(z) = 1 + e^{s z}`.
    pub fn new(l_z: f64, n_z: usize, lambda: f64, n_y: usize, s: f64) -> Result<Arc<Grid>> {
        let mut problems = Vec::new();
        if !(l_z.is_finite() && l_z > 0.0) {
            problems.push(format!("L_z must be positive, got {l_z}"));
        }
        if n_z < MIN_NZ {
            problems.push(format!("n_z must be at least {MIN_NZ}, got {n_z}"));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            problems.push(format!("lambda must be positive, got {lambda}"));
        }
        if n_y < MIN_NY || !n_y.is_multiple_of(2) {
            problems.push(format!("n_y must be even and at least {MIN_NY}, got {n_y}"));
        }
        if !s.is_finite() {
            problems.push(format!("weight speed s must be finite, got {s}"));
        }
        if !problems.is_empty() {
            return Err(Error::InvalidGrid(problems.join("; ")));
        }

        let dz = 2.0 * l_z / (n_z - 1) as f64;
        let dy = lambda / n_y as f64;
        let z: Vec<f64> = (0..n_z).map(|i| -l_z + i as f64 * dz).collect();
        let y: Vec<f64> = (0..n_y).map(|j| j as f64 * dy).collect();
        let weight = z.iter().map(|&zi| 1.0 + (s * zi).exp()).collect();
        let mut quad_z = vec![dz; n_z];
        quad_z[0] = 0.5 * dz;
        quad_z[n_z - 1] = 0.5 * dz;

        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n_y);
        let ifft = planner.plan_fft_inverse(n_y);

        Ok(Arc::new(Grid {
            l_z,
            n_z,
            lambda,
            n_y,
            s,
            dz,
            dy,
            z,
            y,
            weight,
            quad_z,
            fft,
            ifft,
        }))
    }

    pub fn l_z(&self) -> f64 {
        self.l_z
    }
    pub fn n_z(&self) -> usize {
        self.n_z
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn n_y(&self) -> usize {
        self.n_y
    }
    pub fn s(&self) -> f64 {
        self.s
    }
    pub fn dz(&self) -> f64 {
        self.dz
    }
    pub fn dy(&self) -> f64 {
        self.dy
    }
    pub fn z(&self) -> &[f64] {
        &self.z
    }
    pub fn y(&self) -> &[f64] {
        &self.y
    }
    /// `w(z_i) = 1 + e^{s z_i}`.
    pub fn weight(&self) -> &[f64] {
        &self.weight
    }
    /// Trapezoid weights along `z`.
    pub fn quad_z(&self) -> &[f64] {
        &self.quad_z
    }
    pub fn len(&self) -> usize {
        self.n_z * self.n_y
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    /// Fundamental transverse wavenumber `2 pi / lambda`.
    pub fn k1(&self) -> f64 {
        2.0 * PI / self.lambda
    }
    /// Number of resolved non-negative Fourier modes (Nyquist excluded).
    pub fn n_modes(&self) -> usize {
        self.n_y / 2
    }

    /// Signed FFT index -> wavenumber; the Nyquist bin maps to `None`.
    fn fft_wavenumber(&self, m: usize) -> Option<f64> {
        let n = self.n_y;
        if 2 * m == n {
            None
        } else if 2 * m < n {
            Some(m as f64 * self.k1())
        } else {
            Some((m as f64 - n as f64) * self.k1())
        }
    }

    /// Unnormalized forward DFT of every `y`-row.
    pub(crate) fn forward_rows(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.process(&mut buf);
        buf
    }

    /// Inverse of [`Grid::forward_rows`], including the `1/n_y` scaling.
    pub(crate) fn inverse_rows(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.ifft.process(&mut spec);
        let scale = 1.0 / self.n_y as f64;
        spec.into_iter().map(|c| c.re * scale).collect()
    }

    /// Applies the symbol `sym(k)` row by row in Fourier space. `nyquist`
    /// is the multiplier used for the unresolved Nyquist bin.
    pub(crate) fn apply_y_symbol(
        &self,
        values: &[f64],
        sym: impl Fn(f64) -> Complex64,
        nyquist: Complex64,
    ) -> Vec<f64> {
        let mut spec = self.forward_rows(values);
        let factors: Vec<Complex64> = (0..self.n_y)
            .map(|m| self.fft_wavenumber(m).map_or(nyquist, &sym))
            .collect();
        for row in spec.chunks_mut(self.n_y) {
            for (c, f) in row.iter_mut().zip(&factors) {
                *c *= f;
            }
        }
        self.inverse_rows(spec)
    }
}

pub fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: vec![c; grid.len()],
        }
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for &z in grid.z() {
            for &y in grid.y() {
                values.push(f(z, y));
            }
        }
        ScalarField {
            grid: grid.clone(),
            values,
        }
    }

    /// A `y`-independent field from samples over the `z` axis.
    pub fn from_profile(grid: &Arc<Grid>, profile: &[f64]) -> Result<Self> {
        if profile.len() != grid.n_z() {
            return Err(Error::GridMismatch);
        }
        let values = profile
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v, grid.n_y()))
            .collect();
        Ok(ScalarField {
            grid: grid.clone(),
            values,
        })
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(ScalarField {
            grid: grid.clone(),
            values,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n_y() + j]
    }
    pub fn row(&self, i: usize) -> &[f64] {
        let n_y = self.grid.n_y();
        &self.values[i * n_y..(i + 1) * n_y]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        if !same_grid(&self.grid, &other.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(ScalarField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Translates the field by `shift` nodes in the periodic direction.
    pub fn roll_y(&self, shift: usize) -> ScalarField {
        let n_y = self.grid.n_y();
        let mut values = vec![0.0; self.values.len()];
        for (src, dst) in self.values.chunks(n_y).zip(values.chunks_mut(n_y)) {
            for j in 0..n_y {
                dst[(j + shift) % n_y] = src[j];
            }
        }
        ScalarField {
            grid: self.grid.clone(),
            values,
        }
    }

    /// CSV snapshot: header `z,y,value`, row-major, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "z,y,value")?;
        let g = &self.grid;
        for (i, &z) in g.z().iter().enumerate() {
            for (j, &y) in g.y().iter().enumerate() {
                writeln!(out, "{:.16e},{:.16e},{:.16e}", z, y, self.at(i, j))?;
            }
        }
        Ok(())
    }
}

fn binary(a: &ScalarField, b: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
    assert!(same_grid(&a.grid, &b.grid), "fields live on different grids");
    ScalarField {
        grid: a.grid.clone(),
        values: a.values.iter().zip(&b.values).map(|(&x, &y)| f(x, y)).collect(),
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        binary(self, rhs, |a, b| a + b)
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        binary(self, rhs, |a, b| a - b)
    }
}

/// Pointwise product.
impl Mul for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: &ScalarField) -> ScalarField {
        binary(self, rhs, |a, b| a * b)
    }
}

impl Mul<f64> for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: f64) -> ScalarField {
        self.map(|v| v * rhs)
    }
}

impl Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        self.map(|v| -v)
    }
}

#[derive(Debug, Clone)]
pub struct VectorField {
    pub z: ScalarField,
    pub y: ScalarField,
}

impl VectorField {
    pub fn new(z: ScalarField, y: ScalarField) -> Result<Self> {
        if !same_grid(z.grid(), y.grid()) {
            return Err(Error::GridMismatch);
        }
        Ok(VectorField { z, y })
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        VectorField {
            z: ScalarField::zeros(grid),
            y: ScalarField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.z.grid()
    }

    pub fn scale(&self, a: f64) -> VectorField {
        VectorField {
            z: &self.z * a,
            y: &self.y * a,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.z.max_abs().max(self.y.max_abs())
    }

    pub fn is_finite(&self) -> bool {
        self.z.is_finite() && self.y.is_finite()
    }
}

/// First derivative of a 1-D sample array: central differences inside,
/// one-sided second-order stencils at both ends.
pub fn ddz_1d(f: &[f64], dz: f64) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 3);
    let mut out = vec![0.0; n];
    let h2 = 2.0 * dz;
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / h2;
    for i in 1..n - 1 {
        out[i] = (f[i + 1] - f[i - 1]) / h2;
    }
    out[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / h2;
    out
}

/// Second derivative of a 1-D sample array: 3-point stencil inside,
/// one-sided second-order 4-point stencils at both ends.
pub fn dzz_1d(f: &[f64], dz: f64) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 4);
    let mut out = vec![0.0; n];
    let h = dz * dz;
    out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h;
    for i in 1..n - 1 {
        out[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / h;
    }
    out[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / h;
    out
}

/// Applies a 1-D `z` operator to every column `j` of the field.
fn map_columns(f: &ScalarField, op: impl Fn(&[f64], f64) -> Vec<f64>) -> ScalarField {
    let g = f.grid();
    let (n_z, n_y) = (g.n_z(), g.n_y());
    let mut out = vec![0.0; g.len()];
    let mut col = vec![0.0; n_z];
    for j in 0..n_y {
        for (i, c) in col.iter_mut().enumerate() {
            *c = f.values[i * n_y + j];
        }
        let d = op(&col, g.dz());
        for i in 0..n_z {
            out[i * n_y + j] = d[i];
        }
    }
    ScalarField {
        grid: g.clone(),
        values: out,
    }
}

pub fn ddz(f: &ScalarField) -> ScalarField {
    map_columns(f, ddz_1d)
}

/// Second `z`-derivative (3-point inside).
pub fn dzz(f: &ScalarField) -> ScalarField {
    map_columns(f, dzz_1d)
}

/// Spectral `y`-derivative; the Nyquist bin is dropped.
pub fn ddy(f: &ScalarField) -> ScalarField {
    let g = f.grid();
    let values = g.apply_y_symbol(&f.values, |k| Complex64::new(0.0, k), Complex64::new(0.0, 0.0));
    ScalarField {
        grid: g.clone(),
        values,
    }
}

/// `j`-th spectral `y`-derivative, computed with a single transform.
pub fn ddy_n(f: &ScalarField, order: u32) -> ScalarField {
    if order == 0 {
        return f.clone();
    }
    let g = f.grid();
    let nyq = if order.is_multiple_of(2) {
        let kn = g.n_y() as f64 / 2.0 * g.k1();
        Complex64::new(if order.is_multiple_of(4) { 1.0 } else { -1.0 } * kn.powi(order as i32), 0.0)
    } else {
        Complex64::new(0.0, 0.0)
    };
    let values = g.apply_y_symbol(&f.values, |k| Complex64::new(0.0, k).powu(order), nyq);
    ScalarField {
        grid: g.clone(),
        values,
    }
}

/// Spectral second `y`-derivative (exact on the sampled Nyquist cosine too).
pub fn ddyy(f: &ScalarField) -> ScalarField {
    ddy_n(f, 2)
}

pub fn laplacian(f: &ScalarField) -> ScalarField {
    &dzz(f) + &ddyy(f)
}

pub fn divergence(v: &VectorField) -> ScalarField {
    &ddz(&v.z) + &ddy(&v.y)
}

pub fn gradient(f: &ScalarField) -> VectorField {
    VectorField {
        z: ddz(f),
        y: ddy(f),
    }
}

fn quadrature(f: &ScalarField, weighted: bool) -> f64 {
    let g = f.grid();
    let mut total = 0.0;
    for i in 0..g.n_z() {
        let row_sum: f64 = f.row(i).iter().sum();
        let w = if weighted { g.weight()[i] } else { 1.0 };
        total += g.quad_z()[i] * w * row_sum;
    }
    total * g.dy()
}

/// Trapezoid in `z` times the periodic rectangle rule in `y`.
pub fn integrate(f: &ScalarField) -> f64 {
    quadrature(f, false)
}

/// As [`integrate`] with the weight `w(z)` inserted.
pub fn integrate_weighted(f: &ScalarField) -> f64 {
    quadrature(f, true)
}

/// Per-`z` average over the period.
pub fn mean_in_y(f: &ScalarField) -> Vec<f64> {
    let n_y = f.grid().n_y() as f64;
    (0..f.grid().n_z())
        .map(|i| f.row(i).iter().sum::<f64>() / n_y)
        .collect()
}

pub fn remove_mean_in_y(f: &ScalarField) -> ScalarField {
    let means = mean_in_y(f);
    let n_y = f.grid().n_y();
    let mut values = f.values.clone();
    for (row, m) in values.chunks_mut(n_y).zip(&means) {
        for v in row {
            *v -= m;
        }
    }
    ScalarField {
        grid: f.grid.clone(),
        values,
    }
}

/// Projects every row onto the resolved band (drops the Nyquist bin).
pub fn band_limit(f: &ScalarField) -> ScalarField {
    let g = f.grid();
    let values = g.apply_y_symbol(&f.values, |_| Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    ScalarField {
        grid: g.clone(),
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn nodes_and_weight() {
        let g = make_grid(20.0, 16, 1.0, 4, 1.0).unwrap();
        assert_eq!(g.y(), &[0.0, 0.25, 0.5, 0.75]);
        assert!(close(g.z()[0], -20.0, 1e-12));
        assert!(close(g.z()[15], 20.0, 1e-12));
        for (z, w) in g.z().iter().zip(g.weight()) {
            assert_eq!(*w, 1.0 + z.exp());
        }
    }

    #[test]
    fn five_point_axis() {
        // n_z = 5 is below the evolution minimum; the spacing rule is what matters.
        let dz = 2.0 * 20.0 / 4.0;
        let z: Vec<f64> = (0..5).map(|i| -20.0 + i as f64 * dz).collect();
        assert_eq!(z, vec![-20.0, -10.0, 0.0, 10.0, 20.0]);
    }

    #[test]
    fn weight_values() {
        let g = make_grid(2.0, 17, 1.0, 4, 1.0).unwrap();
        // z = 0 is node 8
        assert_eq!(g.weight()[8], 2.0);
        let w = 1.0 + (1.0f64 * 3f64.ln()).exp();
        assert!(close(w, 4.0, 1e-14));
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(make_grid(10.0, 32, 1.0, 5, 1.0).is_err());
        assert!(make_grid(10.0, 8, 1.0, 8, 1.0).is_err());
        assert!(make_grid(0.0, 32, 1.0, 8, 1.0).is_err());
        assert!(make_grid(10.0, 32, -1.0, 8, 1.0).is_err());
        assert!(make_grid(10.0, 32, 1.0, 2, 1.0).is_err());
    }

    #[test]
    fn ddy_of_first_mode() {
        let lam = 0.7;
        let g = make_grid(5.0, 16, lam, 8, 1.0).unwrap();
        let k = 2.0 * PI / lam;
        let f = ScalarField::from_fn(&g, |_, y| (k * y).sin());
        let d = ddy(&f);
        let exact = ScalarField::from_fn(&g, |_, y| k * (k * y).cos());
        assert!((&d - &exact).max_abs() < 1e-12);
    }

    #[test]
    fn ddz_exact_for_linear() {
        let g = make_grid(3.0, 20, 1.0, 4, 1.0).unwrap();
        let f = ScalarField::from_fn(&g, |z, _| z);
        let d = ddz(&f);
        assert!(d.values().iter().all(|&v| close(v, 1.0, 1e-12)));
        let q = ScalarField::from_fn(&g, |z, _| z * z);
        let dq = dzz(&q);
        assert!(dq.values().iter().all(|&v| close(v, 2.0, 1e-10)));
    }

    #[test]
    fn integrals() {
        let g = make_grid(10.0, 64, 0.5, 8, 1.0).unwrap();
        let one = ScalarField::constant(&g, 1.0);
        assert!(close(integrate(&one), 10.0, 1e-12));
        let k = g.k1();
        let s = ScalarField::from_fn(&g, |_, y| (k * y).sin());
        assert!(integrate(&s).abs() < 1e-14);
    }

    #[test]
    fn weighted_integral_closed_form() {
        let (l, s, lam) = (2.0, 1.0, 1.0);
        let g = make_grid(l, 2048, lam, 4, s).unwrap();
        let f = ScalarField::from_fn(&g, |z, _| (-s * z).exp());
        // int (e^{-sz} + 1) dz dy
        let exact = lam * ((s * l).exp() - (-s * l).exp()) / s + lam * 2.0 * l;
        let rel = (integrate_weighted(&f) - exact).abs() / exact;
        assert!(rel < 1e-6, "rel = {rel}");
    }

    #[test]
    fn mean_and_projector() {
        let g = make_grid(4.0, 32, 0.5, 8, 1.0).unwrap();
        let c = ScalarField::constant(&g, 3.0);
        assert!(mean_in_y(&c).iter().all(|&m| close(m, 3.0, 1e-15)));
        assert!(remove_mean_in_y(&c).max_abs() < 1e-15);

        let k = g.k1();
        let f = ScalarField::from_fn(&g, |z, y| z.sin() + (k * y).sin());
        for (m, z) in mean_in_y(&f).iter().zip(g.z()) {
            assert!(close(*m, z.sin(), 1e-14));
        }
        let once = remove_mean_in_y(&f);
        let twice = remove_mean_in_y(&once);
        assert!((&once - &twice).max_abs() < 1e-15);
        assert!((&ddy(&once) - &ddy(&f)).max_abs() < 1e-12);
    }

    #[test]
    fn roll_preserves_integral() {
        let g = make_grid(4.0, 32, 0.5, 8, 1.0).unwrap();
        let k = g.k1();
        let f = ScalarField::from_fn(&g, |z, y| (-z * z).exp() * (1.0 + (k * y).cos()));
        assert!(close(integrate(&f), integrate(&f.roll_y(3)), 1e-13));
    }

    #[test]
    fn csv_header_and_rows() {
        let g = make_grid(1.0, 16, 1.0, 4, 1.0).unwrap();
        let f = ScalarField::constant(&g, 0.1);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("z,y,value"));
        let first = lines.next().unwrap();
        assert_eq!(first, "-1.0000000000000000e0,0.0000000000000000e0,1.0000000000000001e-1");
        assert_eq!(text.lines().count(), 1 + 64);
    }
}
