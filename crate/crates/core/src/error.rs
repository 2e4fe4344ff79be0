use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("H(x, y) needs 0 < x, y < 1, got x = {x}, y = {y}")]
    Domain { x: f64, y: f64 },

    #[error("non-finite log-likelihood increment {0}")]
    NonFiniteIncrement(f64),

    #[error("statistic {total} has not left (-{lower}, {upper}); no overshoot defined")]
    NotExited { total: f64, lower: f64, upper: f64 },

    #[error("message from sensor {sensor} arrived after the fusion center decided")]
    AlreadyDecided { sensor: usize },

    #[error("batch mixes emit steps {first} and {other}")]
    MixedBatch { first: u64, other: u64 },

    #[error("message from sensor {sensor} but the fusion center knows only {k} sensors")]
    UnknownSensor { sensor: usize, k: usize },

    #[error("estimated {what} = {value} is degenerate with n_mc = {n_mc}; increase n_mc")]
    DegenerateProbability { what: &'static str, value: f64, n_mc: u64 },

    #[error("local cycle did not leave the interval within {0} steps")]
    CycleHorizon(u64),

    #[error(
        "threshold search cannot bracket the {which} target {target}: \
         error bound {upper} at the envelope {envelope}; increase n_mc"
    )]
    Bracket { which: &'static str, target: f64, upper: f64, envelope: f64 },

    #[error("{what} needs at least {needed} Monte Carlo trials, got {got}")]
    TooFewTrials { what: &'static str, needed: u64, got: u64 },

    #[error("calibration failed at {context}: {cause}")]
    Calibration { context: String, cause: Box<Error> },

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Calibration-type failures: the Monte Carlo budget cannot certify the targets.
    pub fn is_calibration_failure(&self) -> bool {
        matches!(
            self,
            Error::Calibration { .. } | Error::Bracket { .. } | Error::DegenerateProbability { .. } | Error::TooFewTrials { .. }
        )
    }

    pub(crate) fn in_context(self, context: impl Into<String>) -> Self {
        if self.is_calibration_failure() {
            Error::Calibration { context: context.into(), cause: Box::new(self) }
        } else {
            self
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
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
