use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("non-finite eigenvalue{}", cell_suffix(*.cell))]
    NonFiniteEigen { cell: Option<usize> },
    #[error("matrix is not symmetric positive definite{}", cell_suffix(*.cell))]
    NotPositiveDefinite { cell: Option<usize> },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("Carleson packing violated at cube {cube}: sum {sum} > 2|Q| = {bound}")]
    Packing { cube: String, sum: f64, bound: f64 },
    #[error("cube {cube} has |E_Q|/|Q| = {ratio} < 1/2")]
    NotSparse { cube: String, ratio: f64 },
    #[error("cubes {first} and {second} overlap")]
    Overlap { first: String, second: String },
    #[error("degenerate weight: {0}")]
    Degenerate(String),
    #[error("{what} did not converge (residual {residual:e})")]
    NoConvergence { what: &'static str, residual: f64 },
    #[error("Young function class violation: {0}")]
    YoungClass(String),
    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
}

fn cell_suffix(cell: Option<usize>) -> String {
    match cell {
        Some(c) => alloc::format!(" in cell {c}"),
        None => String::new(),
    }
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
