//! State-inclusive logistic lifting (SILL) dictionaries for data-driven
//! Koopman generator identification.
//!
//! - [`dictionary`]: conjunctive logistics, lifting, Jacobians, orthant order, join completion.
//! - [`regression`]: least-squares generator/operator fits, prediction, closure residuals.
//! - [`closure`]: product-approximation decay, the Lie-derivative approximation chain and its bounds.
//! - [`stats`]: density of `X(Y − Z)`, quadrature and Monte Carlo moments of random logistics.
//! - [`bench`]: benchmark fields, exact snapshots, RK4, polynomial non-closure.
//! - [`experiments`]: the command implementations behind the `sill` binary.

pub mod bench;
pub mod closure;
pub mod dictionary;
pub mod error;
pub mod experiments;
pub mod io;
pub mod numeric;
pub mod regression;
pub mod stats;

pub use closure::{ClosureReport, DecayFit, GridSpec, SpannedField};
pub use dictionary::{ConjLogistic, OrderCheckResult, ScalarLogisticParams, SillDictionary};
pub use error::{Result, SillError};
pub use regression::{KoopmanModel, Mode, SnapshotSet};
