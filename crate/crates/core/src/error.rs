use thiserror::Error;

use crate::forward::EquilibriumSolution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid skeleton configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid threading pattern: {0}")]
    InvalidPattern(String),

    #[error("offset exceeds rib half-length: |{offset}| > {half_length}")]
    OffsetOutsideRib { offset: f64, half_length: f64 },

    #[error("expected {expected} bending angles, got {actual}")]
    AngleCount { expected: usize, actual: usize },

    #[error("bending angle {0} rad is outside (-pi, pi]")]
    AngleOutOfRange(f64),

    #[error("ambiguous inversion on segment {segment}: centered threading bends either way")]
    AmbiguousInversion { segment: usize },

    #[error("infeasible target: {target} mm is below the shortest achievable string length {min_length} mm")]
    InfeasibleTarget { target: f64, min_length: f64 },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("did not converge after {iterations} iterations")]
    DidNotConverge {
        iterations: usize,
        best: Box<EquilibriumSolution>,
    },

    #[error("no valid threading path")]
    NoValidPath,

    #[error("all {0} candidate patterns failed to converge")]
    AllCandidatesFailed(usize),

    #[error("rib count mismatch: expected {expected}, got {actual}")]
    RibCountMismatch { expected: usize, actual: usize },

    #[error("trace and solution counts differ: {traces} traces, {solutions} solutions")]
    StepCountMismatch { traces: usize, solutions: usize },

    #[error("degenerate marker trace: origin and axis markers coincide")]
    DegenerateMarkers,

    #[error("malformed document: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable code, used by the service layer.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "invalid_config",
            Error::InvalidPattern(_) => "invalid_pattern",
            Error::OffsetOutsideRib { .. } => "offset_outside_rib",
            Error::AngleCount { .. } => "angle_count",
            Error::AngleOutOfRange(_) => "angle_out_of_range",
            Error::AmbiguousInversion { .. } => "ambiguous_inversion",
            Error::InfeasibleTarget { .. } => "infeasible_target",
            Error::InvalidProblem(_) => "invalid_problem",
            Error::DidNotConverge { .. } => "did_not_converge",
            Error::NoValidPath => "no_valid_path",
            Error::AllCandidatesFailed(_) => "all_candidates_failed",
            Error::RibCountMismatch { .. } => "rib_count_mismatch",
            Error::StepCountMismatch { .. } => "step_count_mismatch",
            Error::DegenerateMarkers => "degenerate_markers",
            Error::Format(_) => "malformed_document",
            Error::Json(_) => "malformed_json",
            Error::Csv(_) => "malformed_csv",
            Error::Io(_) => "io",
        }
    }
}
