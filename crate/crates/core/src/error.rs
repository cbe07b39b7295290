use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("kernel series did not converge within {cap} terms")]
    KernelNonConvergence { cap: usize },

    #[error("mode {mode} is not resolved on {n_x} nodes (need at least 8 points per wavelength)")]
    Resolution { mode: usize, n_x: usize },

    #[error("inadmissible decay rate-mode pair: recursion denominator d_{j} = {re:.3e}{im:+.3e}i")]
    Inadmissible { j: usize, re: f64, im: f64 },

    #[error("invalid decay rate: {0}")]
    InvalidRate(String),

    #[error("singular linear system (pivot magnitude {pivot:.3e} at row {row})")]
    Singular { row: usize, pivot: f64 },

    #[error("Picard iteration did not converge in {iters} sweeps (last max|du| = {residual:.3e})")]
    PicardNonConvergence { iters: usize, residual: f64 },

    #[error("at time step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("decay-rate window error: {0}")]
    Window(String),

    #[error("overflow in transform evaluation at k = {0}")]
    Range(String),

    #[error("contour denominator vanishes at k = {0}")]
    ContourSingularity(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("cross-check failed: discrepancy {discrepancy:.3e} exceeds tolerance {tolerance:.3e}")]
    CrosscheckFailed { discrepancy: f64, tolerance: f64 },

    #[error("self-test failed: {0}")]
    SelfTest(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Machine-readable code used as the prefix of CLI error lines.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Config(_) | Error::InvalidParams(_) | Error::InvalidRate(_) => "E_CONFIG",
            Error::Inadmissible { .. } => "E_INADMISSIBLE",
            Error::PicardNonConvergence { .. } | Error::Singular { .. } => "E_SOLVER",
            Error::AtStep { source, .. } => source.code(),
            Error::CrosscheckFailed { .. } => "E_CROSSCHECK",
            Error::Io(_) => "E_IO",
            Error::SelfTest(_) => "E_SELFTEST",
            _ => "E_NUMERIC",
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self.code() {
            "E_CONFIG" => 2,
            "E_INADMISSIBLE" => 3,
            "E_SOLVER" => 4,
            "E_CROSSCHECK" => 5,
            _ => 1,
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Error {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }
}
