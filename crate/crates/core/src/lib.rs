//! Adaptive three- and four-stage generalized likelihood ratio tests for
//! exponential families: threshold calibration, exact and simulated
//! operating characteristics, comparator designs and efficiency
//! diagnostics.
//!
//! The central object is [`design::Design`], whose [`step`](design::Design::step)
//! function turns a stage's sufficient statistics into a decision. All
//! other modules — calibration, the OC engines, the conductor service —
//! go through that one function.

pub mod calibration;
pub mod comparators;
pub mod design;
pub mod error;
pub mod evaluation;
pub mod expfam;
pub mod numerics;
pub mod rng;
pub mod schema;

pub use design::{Action, Decision, Design, DesignSpec, Rule, Thresholds, TrialState};
pub use error::{Error, Result};
pub use expfam::{ExponentialFamily, Model, Param, SufficientStat};
