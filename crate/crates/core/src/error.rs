use thiserror::Error;

/// Errors produced by the planning library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A constructor or operation received a value outside its domain.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A numerical routine produced a non-finite or otherwise unusable value.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("dynamic-programming table needs {required} bytes, budget is {budget} bytes; try a cohort size of at least {suggested_c0}")]
    MemoryBudget {
        required: u64,
        budget: u64,
        suggested_c0: u64,
    },

    #[error("x* lies beyond the search bracket: f(x)/x is still increasing at {hi} (g({lo_probe}) = {g_lo}, g({hi}) = {g_hi})")]
    BeyondBracket {
        lo_probe: f64,
        hi: f64,
        g_lo: f64,
        g_hi: f64,
    },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("production analysis does not belong to this production function: f(x*) = {expected}, re-evaluated {actual}")]
    AnalysisMismatch { expected: f64, actual: f64 },

    #[error("minimax risk is infinite: test {index} has no units")]
    InfiniteRisk { index: usize },

    #[error("alpha {target} is not attainable; attainable range is [{lo}, {hi}]")]
    Unattainable { target: f64, lo: f64, hi: f64 },

    #[error("program `{program}`: {source}")]
    Program {
        program: String,
        #[source]
        source: Box<Error>,
    },

    #[error("record input: {0}")]
    Input(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Numerical(_) | Error::BeyondBracket { .. } => true,
            Error::Program { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub(crate) fn check_finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::invalid(name, format!("must be finite, got {value}")))
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::invalid(name, format!("must be positive and finite, got {value}")))
    }
}
