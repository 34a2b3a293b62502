//! Feasibility checking and motion generation for groups of nonholonomic
//! vehicles under equality and inequality coordination constraints.
//!
//! The pipeline stacks per-vehicle kinematic codistributions with the
//! equality constraint rows, parameterizes every admissible composite
//! velocity as a particular solution plus a null-space combination, and
//! picks the null-space weights so that active inequality constraints do
//! not increase. [`sim`] integrates the result over time.

pub mod analytic;
pub mod constraints;
pub mod error;
pub mod feasibility;
pub mod matlite;
mod qp;
pub mod sim;
pub mod vehicles;

pub use constraints::{ActiveRow, ActiveSet, EdgeConstraint, Side, TimeFunction};
pub use error::{Error, Result};
pub use feasibility::{FeasibilityReport, MotionFamily, MotionSelection, Status, Strategy};
pub use matlite::Mat;
pub use vehicles::{CompositeState, VehicleKind};
