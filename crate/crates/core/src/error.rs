use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad classification used to pick the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Usage => 2,
            ErrorClass::Data => 3,
            ErrorClass::Numerical => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("columns are not orthonormal (max deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },

    #[error("kronecker product of {rows}x{cols} exceeds the element budget of {budget}")]
    KronBudget {
        rows: usize,
        cols: usize,
        budget: usize,
    },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("eigenvalue iteration did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("degenerate design: X has rank 0")]
    DegenerateDesign,

    #[error("no fitted variation: sigma_fit is identically zero")]
    NoFittedVariation,

    #[error("no residual degrees of freedom (n - 1 - r(X) = {0})")]
    NoResidualDof(i64),

    #[error("singular profile block: {0} is not positive definite")]
    SingularProfileBlock(&'static str),

    #[error("{subsets} subsets exceed the exhaustive cap of {cap}; use sequential selection")]
    SubsetCapExceeded { subsets: u128, cap: u128 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{0}: file contains no data rows")]
    EmptyFile(PathBuf),

    #[error("usage: {0}")]
    Usage(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Usage(_) | Error::InvalidArgument(_) | Error::SubsetCapExceeded { .. } => {
                ErrorClass::Usage
            }
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::EmptyFile(_)
            | Error::Dimension(_)
            | Error::NonFinite { .. }
            | Error::NotSymmetric { .. }
            | Error::DegenerateDesign
            | Error::NoFittedVariation
            | Error::NoResidualDof(_) => ErrorClass::Data,
            Error::NotOrthonormal { .. }
            | Error::KronBudget { .. }
            | Error::NotPositiveDefinite(_)
            | Error::NoConvergence { .. }
            | Error::SingularProfileBlock(_) => ErrorClass::Numerical,
        }
    }

    /// Stable short identifier, used in machine-readable error lines.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::NonFinite { .. } => "non_finite",
            Error::NotSymmetric { .. } => "not_symmetric",
            Error::NotOrthonormal { .. } => "not_orthonormal",
            Error::KronBudget { .. } => "kron_budget",
            Error::NotPositiveDefinite(_) => "not_positive_definite",
            Error::NoConvergence { .. } => "no_convergence",
            Error::DegenerateDesign => "degenerate_design",
            Error::NoFittedVariation => "no_fitted_variation",
            Error::NoResidualDof(_) => "no_residual_dof",
            Error::SingularProfileBlock(_) => "singular_profile_block",
            Error::SubsetCapExceeded { .. } => "subset_cap_exceeded",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::EmptyFile(_) => "empty_file",
            Error::Usage(_) => "usage",
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.class().exit_code()
    }
}
