use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("steering angle {phi} rad is at or beyond the tan singularity")]
    SingularSteering { phi: f64 },

    #[error("velocity is not in the vehicle's admissible distribution (residual {residual:e})")]
    NotInDistribution { residual: f64 },

    #[error("degenerate geometry: vehicles {i} and {j} (0-based) coincide")]
    DegenerateGeometry { i: usize, j: usize },

    #[error("constraint {kind} is not {expected}")]
    WrongVariant {
        kind: &'static str,
        expected: &'static str,
    },

    #[error("closed-form solution is singular (denominator {denominator:e})")]
    SingularDirection { denominator: f64 },

    #[error("equality projection did not converge after {iterations} iterations (residual {residual:e})")]
    ProjectionDiverged { iterations: usize, residual: f64 },

    #[error("state dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
