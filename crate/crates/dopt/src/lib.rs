//! Exact solver for integer D-optimal experimental design.
//!
//! The problem: choose integer repetition counts `x` with `eᵀx = s` and
//! `l ≤ x ≤ u` maximizing `ldet(AᵀDiag(x)A)`, the log-determinant of the
//! Fisher information matrix of the selected experiments. The solver is a
//! branch-and-bound over two convex relaxations — the natural continuous
//! relaxation and a spectral Γ bound that is exact at 0/1 points — with
//! dual-certificate variable-bound tightening and fast exchange local
//! searches driven by rank-one determinant updates.
//!
//! The `fusion` module carries the related data-fusion bounds (augmenting a
//! known information matrix with budgeted rows) and their comparison suite.

pub mod bnb;
pub mod error;
pub mod fusion;
pub mod heuristics;
pub mod line_search;
pub mod linalg;
pub mod model;
pub mod relax;
pub mod relax_gamma;
pub mod relax_natural;

pub use error::{Error, Result};
pub use linalg::LogDet;
pub use model::{Instance, Kind, Solution};
