use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter lies outside its admissible domain.
    #[error("invalid parameter `{name}`: {reason}")]
    Domain { name: &'static str, reason: String },

    /// The coupling factor is zero, so the static decoupling matrix is singular.
    #[error("static decoupling matrix is singular (epsilon = 0)")]
    SingularCoupling,

    /// |f̂| fell below the inversion floor of the dynamic decoupling matrix.
    #[error("dynamic decoupling matrix is singular: |fhat| = {fhat:e} below floor {floor:e}")]
    SingularThrust { fhat: f64, floor: f64 },

    #[error("matrix is not symmetric: max |M - M^T| = {0:e}")]
    Asymmetric(f64),

    #[error("CLF weight matrix is not positive definite (pivot {index} = {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("Routh array hit a zero pivot in row {0}; stability is inconclusive")]
    RouthInconclusive(usize),

    #[error("state left the finite region")]
    Diverged,

    #[error("empty record sequence")]
    EmptyRecords,

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
