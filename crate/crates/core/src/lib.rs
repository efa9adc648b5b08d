//! Sparse signal sequence estimation with slowly changing support.
//!
//! The estimators track a sparse vector that follows a random walk on a
//! support that only grows: Kalman filtered compressed sensing (KF-CS),
//! least squares compressed sensing (LS-CS), Gauss-Dantzig on each
//! observation alone, and Kalman / least squares baselines that know the
//! support.

pub mod bounds;
pub mod config;
pub mod dantzig;
pub mod error;
pub mod filters;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod rng;

pub use error::{Error, Result};
pub use filters::{FilterState, StepReport, Thresholds};
pub use model::{MeasurementModel, NoiseKind, SupportSchedule, SystemModel, TrueState};
pub use numerics::{IndexSet, Mat};
pub use config::{Algorithm, ExperimentConfig};
pub use harness::{run_experiment, summarize, MseTrace, SummaryRow};
