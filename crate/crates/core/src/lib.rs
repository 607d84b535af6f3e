//! Optimal control of mechanical systems with symmetry.
//!
//! The crate solves fixed-horizon optimal control problems for second-order
//! systems, computes trim primitives and velocity steady states, and measures
//! how closely optimal solutions track a velocity steady state (the velocity
//! turnpike) as the horizon grows.

pub mod analytic_lq;
pub mod domain;
pub mod error;
pub mod models;
pub mod nlp;
pub mod symmetry;
pub mod transcription;
pub mod turnpike;

pub use domain::{BoxBounds, Scenario, StageCost, State, Trajectory};
pub use error::{Error, Result};
pub use models::{Model, ModelKind};
