//! Traveling waves of a singular Keller-Segel model on a strip, their
//! Cole-Hopf and perturbation representations, time integration and energy
//! diagnostics.

// `!(x > 0.0)` deliberately rejects NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod energy;
pub mod error;
pub mod evolve;
pub mod grid;
pub(crate) mod ode;
pub(crate) mod spectral;
pub mod transforms;
pub mod waves;

pub use energy::{EnergyLedger, EnergyRow, LedgerSample};
pub use error::{Error, Result};
pub use evolve::{
    run, InitialState, IntegratorConfig, PsiTransport, Scheme, Frame, System, TrajectoryRecord,
};
pub use grid::{make_grid, Grid, ScalarField, VectorField};
pub use transforms::{ColeHopfState, PerturbationState, PhysicalState};
pub use waves::{build_wave, WaveParams, WaveProfile};
