//! Quasi-static modeling and threading design for single-string,
//! cable-driven soft modules.
//!
//! * [`skeleton`]: rib/spine geometry and the string length of a threading.
//! * [`forward`]: equilibrium shape for a pattern and a total string length.
//! * [`inverse`]: threading search for a target bend-angle sequence.
//! * [`evaluation`]: marker-trace alignment and RMSE against simulation.
//! * [`io`]: versioned JSON documents.

// Guards written as `!(x > 0.0)` reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evaluation;
pub mod forward;
pub mod inverse;
pub mod io;
pub mod skeleton;

pub use error::{Error, Result};
pub use evaluation::{align_trace, rmse_against_simulation, MarkerTrace, RmseReport};
pub use forward::{
    length_to_angle, minimum_string_length, preferred_bend_sign, solve_equilibrium,
    sweep_contraction, sweep_contraction_each, EquilibriumProblem, EquilibriumSolution, Sweep,
    SweepStep, SweepStop,
};
pub use inverse::{
    backtrack_paths, design, design_with_alternates, enumerate_segment_candidates, DesignQuery,
    DesignResult, RankedDesign, SegmentCandidate,
};
pub use skeleton::{
    forward_kinematics, original_string_length, segment_string_length, total_string_length,
    AngleUnits, ModuleState, Point2, Pose, SegmentGeometry, SkeletonConfig, ThreadingPattern,
};
