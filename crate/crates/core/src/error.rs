use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error in {func}: {detail}")]
    Domain { func: &'static str, detail: String },

    #[error("invalid channel configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "threshold too extreme for truncated inverse transform (mu = {mu}, gamma_th = {gamma_th})"
    )]
    ThresholdTooExtreme { mu: f64, gamma_th: f64 },

    #[error("rejection sampler stalled after {trials} trials (M_ell = {m_ell})")]
    RejectionStalled { trials: u64, m_ell: f64 },

    #[error("rejection bound violated: log f/(M_ell g) = {log_ratio:e} > 0 (mu = {mu}, n = {n}, gamma_th = {gamma_th})")]
    BoundViolation {
        log_ratio: f64,
        mu: f64,
        n: usize,
        gamma_th: f64,
    },

    #[error("rejection constant {0} is below 1")]
    InvalidBound(f64),

    #[error("PIS requires blockwise-identical means (block starting at {start})")]
    UnequalBlockMeans { start: usize },

    #[error("CE requires identical means for all branches")]
    CeNonIdenticalMeans,

    #[error("CE elite set empty at iteration {0}")]
    CeEliteEmpty(usize),

    #[error("CE failed to reach target threshold after {0} iterations")]
    CeNoConvergence(usize),

    #[error("degenerate estimate, RE undefined")]
    DegenerateEstimate,

    #[error("invalid experiment spec: {0}")]
    Spec(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(func: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            func,
            detail: detail.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
