//! Ground states, semiclassical propagation and barycenter diagnostics for the
//! generalized Choquard equation
//!
//! ```text
//! i ε ∂ψ/∂t = -(ε²/2) Δψ + V(x) ψ - ε^{γ(2p-1)-α} (I_θ * |ψ|^p) |ψ|^{p-2} ψ
//! ```
//!
//! on a periodic box standing in for `R^N`.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod config;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod ground_state;
pub mod params;
pub mod potential;
pub mod propagator;
pub mod riesz;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use field::{AxisMap, FieldKind, GridSpec, ScalarField};

pub use params::{ModelParams, ScalingReport, ValidationResult, Violation};

pub use ground_state::{EnergyFunctional, FlowOptions, GroundState, SeedProfile};
pub use potential::{CertReport, PotentialKind, PotentialSpec};
pub use riesz::{RieszMode, RieszOperator};
pub use propagator::{AdmissibilityReport, EvolveOptions, PropagatorState};
pub use dynamics::{ClassicalTrajectory, DiagOptions, SweepConfig, SweepReport, TrajectorySample};
