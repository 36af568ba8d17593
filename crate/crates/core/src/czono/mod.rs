//! Extended constrained zonotopes.
//!
//! A set `{ G xi + c : A xi = b, |xi_j| <= h_j }` where a half-width may be
//! unbounded. All operations are pure and exact; the only place a set is
//! over-approximated is [`IntervalBox`] extraction via [`ConstrainedZonotope::interval_hull`].

mod interval;
mod json;
pub mod lp;
mod zonotope;

pub use interval::IntervalBox;
pub use lp::{lp_solve, LpError, LpStatus, Sense, Simplex, LP_TOL};
pub use zonotope::{ConstrainedZonotope, HalfWidth, HullWitness};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CzError {
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("coordinate {coord} has one-sided infinite interval [{lo}, {hi}]")]
    OneSidedInfinite { coord: usize, lo: f64, hi: f64 },
    #[error("coordinate {coord} has invalid interval [{lo}, {hi}]")]
    InvalidInterval { coord: usize, lo: f64, hi: f64 },
    #[error("generator {index} has invalid half-width {value}")]
    InvalidHalfWidth { index: usize, value: f64 },
    #[error("set is empty")]
    EmptySet,
    #[error("coordinate index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("duplicate coordinate index {0}")]
    DuplicateIndex(usize),
    #[error("cartesian product of an empty list")]
    EmptyProduct,
    #[error(transparent)]
    Lp(#[from] LpError),
}
