use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("dimension {0} is not supported (expected 1 or 2)")]
    UnsupportedDimension(usize),
    #[error("nodes per axis must be odd and at least 3, got {0}")]
    BadNodeCount(usize),
    #[error("number of time steps must be positive")]
    BadStepCount,
    #[error("half-width must be positive and finite, got {0}")]
    BadHalfWidth(f64),
    #[error("time horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("field shape does not match the grid")]
    ShapeMismatch,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("density must be nonnegative, got {0}")]
    NegativeDensity(f64),
    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

impl ProblemError {
    pub(crate) fn invalid(key: &str, reason: impl Into<String>) -> Self {
        Self::InvalidParameter {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParabolicError {
    #[error("singular tridiagonal system at time level {step}")]
    Singular { step: usize },
    #[error(
        "backward heat solution lost positivity at time level {step} (value {value:e}); reduce dt"
    )]
    PositivityViolation { step: usize, value: f64 },
    #[error("Fokker-Planck density went negative at time level {step} (value {value:e})")]
    SchemeViolation { step: usize, value: f64 },
    #[error("terminal value must be strictly positive")]
    NonPositiveTerminal,
    #[error("initial density must be nonnegative")]
    NegativeInitialDensity,
    #[error("input field shape does not match the grid")]
    ShapeMismatch,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("heat-kernel norm is not finite (analytic exponent {analytic_exponent})")]
    NonIntegrable { analytic_exponent: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HopfColeError {
    #[error("inverse Hopf-Cole needs w > 0, found {value:e} at time level {step}, node {node}")]
    NonPositive {
        step: usize,
        node: usize,
        value: f64,
    },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("schema error in key(s) {}: {}", .keys.join(", "), .messages.join("; "))]
    Schema {
        keys: Vec<String>,
        messages: Vec<String>,
    },
}

impl ConfigError {
    pub fn keys(&self) -> &[String] {
        match self {
            Self::Schema { keys, .. } => keys,
            _ => &[],
        }
    }
}

/// Errors surfaced by the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Parabolic(#[from] ParabolicError),
    #[error("i/o error on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
