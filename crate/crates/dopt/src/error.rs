use thiserror::Error;

/// Errors produced by instance handling, linear algebra kernels, relaxation
/// solvers, and the branch-and-bound driver.
#[derive(Debug, Error)]
pub enum Error {
    /// A matrix that must be symmetric is not (beyond tolerance).
    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    /// Rank-one inverse update with a (near-)zero denominator.
    #[error("singular rank-one update (denominator {0:.3e})")]
    SingularUpdate(f64),

    /// A matrix that must have full column rank does not.
    #[error("rank-deficient matrix: {0}")]
    RankDeficient(String),

    /// A point or polytope violates the problem constraints.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// No positive-definite feasible point exists for a subproblem; its
    /// objective is unbounded below and the node can be discarded.
    #[error("subproblem has no feasible point with positive-definite information matrix")]
    NodePruneSingular,

    /// The primal point handed to a dual-certificate construction is singular.
    #[error("singular primal point: {0}")]
    SingularPrimal(String),

    /// An update direction lost rank and the move cannot be scored.
    #[error("update direction dropped rank: {0}")]
    RankDrop(String),

    /// Enumeration would exceed the brute-force size guard.
    #[error("instance too large for enumeration: {0}")]
    TooLarge(String),

    /// Malformed instance file.
    #[error("parse error at line {line}: {msg}")]
    ParseError { line: usize, msg: String },

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
