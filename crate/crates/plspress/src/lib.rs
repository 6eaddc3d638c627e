//! Two-block partial least squares regression with an analytic PRESS
//! statistic.
//!
//! The crate fits the two-block PLS latent-factor model (`X = TPᵀ + E_x`,
//! `Y = SQᵀ + E_y` with an inner relation `S = TD + H`), computes the
//! leave-one-out prediction error analytically from a single model fit via
//! rank-one Sherman–Morrison–Woodbury downdates, and provides a sparse
//! (soft-thresholded) rank-one variant, a seeded synthetic-data generator
//! and a Monte Carlo model-selection harness.
//!
//! Start with [`pls::DataBlock::center`] and [`pls::fit_pls`], then
//! [`press::press_pls`] for the analytic leave-one-out error. The `plspress`
//! binary exposes the same machinery as subcommands; see the guide under
//! `book/` for worked examples.

pub mod cli;
pub mod modelselect;
pub mod numkernel;
pub mod pls;
pub mod press;
pub mod simgen;
pub mod sparse;

use std::io;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Shapes or index ranges do not line up.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A kernel input carried a NaN or infinity.
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    /// Gram–Schmidt pivot collapsed: the named column is (numerically) a
    /// linear combination of the preceding ones.
    #[error("rank-deficient input: column {column} has pivot below 1e-12 of its norm")]
    RankDeficient { column: usize },

    /// A matrix required to be symmetric positive definite was not.
    #[error("matrix not positive definite ({0})")]
    NotPositiveDefinite(String),

    /// Rank-one downdate would cross the leverage singularity at h = 1.
    #[error("leverage singularity: h = {leverage} is too close to 1")]
    LeverageSingular { leverage: f64 },

    /// A latent factor carries (numerically) no variance.
    #[error("degenerate latent factor r = {factor}: t_r'*t_r <= 1e-12")]
    DegenerateFactor { factor: usize },

    /// Deleting the named observation makes the downdated Gram singular.
    #[error("pivotal observation {index} in {block} block: leverage {leverage} ~ 1")]
    Pivotal {
        index: usize,
        block: &'static str,
        leverage: f64,
    },

    /// Design matrix too ill-conditioned for a least-squares solve.
    #[error("singular design: smallest/largest eigenvalue ratio {ratio:.3e} below 1e-12")]
    SingularDesign { ratio: f64 },

    /// A leave-one-out refit failed for the named deletion.
    #[error("deletion fit failed for observation {index}: {source}")]
    DeletionFit {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// The penalty removed every coefficient; no model is left to use.
    #[error("fully shrunk sparse fit (nnz = 0)")]
    FullyShrunk,

    /// A user-supplied configuration value is out of range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The LAPACK backend rejected a decomposition.
    #[error("linear-algebra backend error: {0}")]
    Backend(String),

    /// A data file failed to parse; positions are 1-based.
    #[error("{path}: row {row}, column {col}: {msg}")]
    Csv {
        path: String,
        row: usize,
        col: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(doctest)]
mod booktests {
    //! Runs every fenced Rust block in the guide as a doctest so the book
    //! cannot drift from the library.
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/two-block-model.md")]
    mod two_block_model {}
    #[doc = include_str!("../../../book/src/press.md")]
    mod press {}
    #[doc = include_str!("../../../book/src/subspace-stability.md")]
    mod subspace_stability {}
    #[doc = include_str!("../../../book/src/sparse-pls.md")]
    mod sparse_pls {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/model-selection.md")]
    mod model_selection {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
