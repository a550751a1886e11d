use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The joint covariance of the two observations could not be factorized.
    #[error("singular joint covariance (min eigenvalue {min_eig:e}, max eigenvalue {max_eig:e})")]
    SingularCovariance { min_eig: f64, max_eig: f64 },

    #[error("cannot project a zero precoder onto the power sphere")]
    ZeroPrecoder,

    #[error("rejection sampling exhausted {0} attempts without a feasible layout")]
    SamplingExhausted(usize),

    #[error("layout does not fit the region: {0}")]
    LayoutDoesNotFit(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }
}
