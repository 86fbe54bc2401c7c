//! Simulation engine for a two-mode nonlinear quantum battery that doubles as a
//! phase sensor, plus the one-axis-twisting spin battery used as a scaling reference.

pub mod cli;
pub mod error;
pub mod fockspace;
pub mod metrics;
pub mod model;
pub mod operator;
pub mod propagate;
pub mod simplex;
pub mod protocol;
pub mod spinoat;
pub mod squeezeopt;

pub use error::{Error, Result};
pub use fockspace::{Basis, ChargeSector, TwoModeSpace};
pub use model::BatteryModelParams;
pub use operator::OperatorMatrix;
pub use propagate::QState;

/// Crate version, embedded in every emitted file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
