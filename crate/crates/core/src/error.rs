use crate::sinr::StreamId;

/// Errors produced anywhere in the design and simulation pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is not Hermitian (relative asymmetry {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not positive definite (min/max eigenvalue ratio {0:.3e})")]
    NotPositiveDefinite(f64),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid system dimensions: {0}")]
    InvalidDims(String),
    #[error("decorrelator for stream {0} is zero")]
    ZeroDecorrelator(StreamId),
    #[error("negative SINR {0}")]
    NegativeSinr(f64),
    #[error("worst-case SINR denominator {value:.3e} is not positive for stream {stream}")]
    NonPositiveDenominator { stream: StreamId, value: f64 },
    #[error("interference-plus-noise matrix F for stream {0} is not positive definite")]
    FNotPositiveDefinite(StreamId),
    #[error("stream {stream}: {source}")]
    Stream {
        stream: StreamId,
        #[source]
        source: Box<Error>,
    },
    #[error("target SINR must be positive, got {0}")]
    InvalidGamma(f64),
    #[error("SINR target is infeasible")]
    Infeasible,
    #[error("SDP solver hit the iteration cap")]
    MaxIter,
    #[error("gram block is zero (trace {0:.3e})")]
    ZeroBlock(f64),
    #[error("minimum worst-case SINR {0:.3e} is not positive")]
    NonPositiveSinr(f64),
    #[error("scheme not feasible: {0}")]
    NotFeasible(String),
    #[error("channel block ({0},{1}) is singular")]
    SingularChannel(usize, usize),
    #[error("interference covariance is singular")]
    SingularCovariance,
    #[error("config error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn at(self, stream: StreamId) -> Error {
        Error::Stream {
            stream,
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
