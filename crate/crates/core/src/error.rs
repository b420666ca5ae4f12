use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read scenario file")]
    Io(#[from] std::io::Error),

    #[error("malformed scenario file")]
    Parse(#[from] serde_json::Error),

    /// A configuration value violates a model invariant.
    #[error("invalid configuration: {0}")]
    Validation(String),

    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "{integral} did not converge: best estimate {estimate:e}, \
         error estimate {error_estimate:e} after {evaluations} evaluations"
    )]
    NoConvergence {
        integral: String,
        estimate: f64,
        error_estimate: f64,
        evaluations: usize,
    },

    #[error("root bracket violated: f(lo) = {f_lo:e}, f(hi) = {f_hi:e}")]
    BracketViolation { f_lo: f64, f_hi: f64 },

    #[error("coverage target {0} is unreachable")]
    UnreachableTarget(f64),

    #[error("method {method} cannot be used here: {reason}")]
    MethodMismatch {
        method: &'static str,
        reason: String,
    },

    #[error("tier index {index} out of range for a {tiers}-tier scenario")]
    TierIndex { index: usize, tiers: usize },

    #[error("network realization contains no base station")]
    EmptyNetwork,

    /// A computed quantity broke a sanity check (non-finite value, monotonicity).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// Attaches a name to a quadrature failure so callers can tell which
    /// integral gave up. Other variants pass through unchanged.
    pub fn named(self, name: impl Into<String>) -> Self {
        match self {
            Error::NoConvergence {
                integral,
                estimate,
                error_estimate,
                evaluations,
            } => Error::NoConvergence {
                integral: format!("{} ({integral})", name.into()),
                estimate,
                error_estimate,
                evaluations,
            },
            other => other,
        }
    }

    /// True for failures caused by bad input files or parameters.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Io(_)
                | Error::Parse(_)
                | Error::Validation(_)
                | Error::MethodMismatch { .. }
                | Error::TierIndex { .. }
        )
    }

    /// True for failures of the numerical machinery itself.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::BracketViolation { .. }
                | Error::Numerical(_)
                | Error::UnreachableTarget(_)
        )
    }
}
