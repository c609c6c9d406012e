//! Planar VTOL (PVTOL) control toolkit.
//!
//! The crate covers the normalized PVTOL plant and its flat-output
//! transformation ([`model`]), a quadratic control Lyapunov function with a
//! Kronecker-structured weight matrix ([`clf`]), two controllers built on the
//! resulting normal form ([`control`]), a fixed-step closed-loop simulator
//! ([`sim`]) and the nominal / Monte-Carlo studies built on top of it
//! ([`experiments`]). CSV writers for every emitted table live in [`output`].

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clf;
pub mod control;
mod error;
pub mod experiments;
pub mod model;
pub mod output;
pub mod sim;

pub use error::{Error, Result};

pub use clf::{ClfEvaluation, ClfMatrix, DefiniteCertificate, GainSweep, LinearPair};
pub use control::{ControlCommand, ControllerKind, FblGains, SetPoint, SontagParams};
pub use experiments::{MonteCarloConfig, MonteCarloReport, RunSummary, Scenario};
pub use model::{
    CompensatorState, DimensionalParams, NormalFormState, PlantInput, PlantParams, PlantState,
};
pub use sim::{AugmentedState, RunStatus, SimConfig, SimRecord, SimRun};

/// 8-vector in normal-form coordinates.
pub type Vector8 = nalgebra::SVector<f64, 8>;
/// 8×8 matrix acting on normal-form coordinates.
pub type Matrix8 = nalgebra::SMatrix<f64, 8, 8>;
/// 8×2 input matrix of the normal form.
pub type Matrix8x2 = nalgebra::SMatrix<f64, 8, 2>;
