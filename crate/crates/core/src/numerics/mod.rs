//! Deterministic scalar and least-squares numerics used by the smile modules.

mod lsq;
mod maximize;
mod root;

pub use lsq::{least_squares_bounded, LsqOptions, LsqReport, Termination};
pub use maximize::{maximize_scalar, maximize_scalar_multi};
pub use root::{
    expand_bracket, expand_bracket_with_step, find_root, Bracket, Direction, MAX_EXPANSIONS, MAX_ROOT_ITERATIONS,
};
