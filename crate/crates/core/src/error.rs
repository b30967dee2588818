use thiserror::Error;

/// Errors surfaced by solvers, geometry kernels and problem builders.
#[derive(Debug, Error)]
pub enum Error {
    /// A point lies outside the domain of an operation (set membership,
    /// entropy boundary, nonnegativity of duals, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A (composite, geometry) pairing has no supported prox kernel. Raised
    /// at problem construction, never mid-run.
    #[error("unsupported capability: {0}")]
    Capability(String),

    /// Invalid configuration or invariant breach in user-supplied data.
    #[error("configuration error: {0}")]
    Config(String),

    /// Stepsize schedule cannot be formed or violates its integrity
    /// conditions (for example a nonpositive effective curvature margin).
    #[error("schedule error: {0}")]
    Schedule(String),

    /// A precondition of an operation does not hold (infeasible start,
    /// missing strict feasibility, ...).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Brute-force grid would exceed the evaluation guard.
    #[error("grid too large: {points} points exceeds guard {guard}")]
    GridTooLarge { points: u128, guard: u128 },

    /// No grid point satisfies the constraints within the slack.
    #[error("grid has no feasible point within slack {slack}")]
    EmptyFeasible { slack: f64 },

    /// An iterative search (for example the dual-bound doubling search)
    /// exhausted its budget.
    #[error("search failure: {0}")]
    SearchFailure(String),

    /// A sub-operation failed inside an iterative run; carries the
    /// iteration index where the run aborted.
    #[error("solver aborted at iteration {iteration}: {source}")]
    Aborted {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_iteration(self, iteration: usize) -> Error {
        Error::Aborted {
            iteration,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
