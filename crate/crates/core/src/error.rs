use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A caller broke a documented precondition (dimensions, index ranges, symmetry).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A factorization met a (numerically) singular or indefinite matrix.
    #[error("singular matrix in {context} (lambda_min estimate {lambda_min:e})")]
    Singular { context: &'static str, lambda_min: f64 },

    /// The simplex iteration budget ran out before optimality was certified.
    #[error("no convergence after {iterations} iterations (duality gap {gap:e})")]
    Convergence {
        iterations: usize,
        gap: f64,
        best: Vec<f64>,
    },

    #[error("linear program is infeasible: {0}")]
    Infeasible(String),

    /// Exhaustive enumeration would exceed the configured work budget.
    #[error("enumeration budget exceeded: {work:e} > {budget:e}")]
    Budget { work: f64, budget: f64 },

    /// A closed-form quantity is undefined for the supplied arguments.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// More than 5% of Monte Carlo trials hit a filter error.
    #[error("{aborted} of {total} trials aborted; first: {first}")]
    TooManyAborts {
        aborted: usize,
        total: usize,
        first: String,
    },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
