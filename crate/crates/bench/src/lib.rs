//! Shared fixtures for the kernel benchmarks.

use ksstrip_core::transforms::make_initial_perturbation;
use ksstrip_core::{build_wave, make_grid, PerturbationState, WaveParams, WaveProfile};

/// Wave on `[-25, 25] x [0, 0.5)` with `n_z` by 16 nodes.
pub fn wave(eps: f64, n_z: usize) -> WaveProfile {
    let p = WaveParams::new(eps, 1.0, 1.0).expect("valid parameters");
    let g = make_grid(25.0, n_z, 0.5, 16, p.s()).expect("valid grid");
    build_wave(&p, &g, 1e-10).expect("wave converges")
}

/// Seeded small perturbation matching `w`.
pub fn perturbation(w: &WaveProfile) -> PerturbationState {
    make_initial_perturbation(&w.grid, 1e-4, 7, w.eps() > 0.0)
        .expect("valid amplitude")
        .with_eps(w.eps())
}
