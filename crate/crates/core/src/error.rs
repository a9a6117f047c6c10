use thiserror::Error;

/// Errors shared by all solver and oracle entry points.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Parameter invariants failed; the report lists every violation.
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    /// An operation was called with the wrong number of content providers.
    #[error("operation requires n = {expected}, got n = {got}")]
    WrongPlayerCount { expected: usize, got: usize },

    /// A demand passed into a utility evaluation was negative.
    #[error("negative demand input: d[{index}] = {value}")]
    NegativeDemand { index: usize, value: f64 },

    /// The Nash product is undefined for nonpositive utilities.
    #[error(
        "objective undefined: utilities must be strictly positive (u_isp = {u_isp}, u_cp = {u_cp})"
    )]
    ObjectiveUndefined { u_isp: f64, u_cp: f64 },

    /// Ex-post sharing needs a strictly positive joint surplus.
    #[error("no bargaining surplus: ps + pc + pa = {surplus}")]
    NoBargainingSurplus { surplus: f64 },

    /// A structural hypothesis the solver needs does not hold.
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    /// With beta = 0 the ex-post game separates into independent
    /// single-CP problems; use the single-CP solver per content.
    #[error("beta = 0: the game separates, solve each content with the single-CP ex-post solver")]
    SeparableCase,

    /// A linear system that should be regular came out singular.
    #[error("singular linear system: {0}")]
    SingularSystem(&'static str),

    /// The starting point lies outside the feasible price region.
    #[error("starting point outside the constraint region (constraint {constraint} violated by {violation})")]
    OutsideRegion { constraint: usize, violation: f64 },

    /// No feasible subinterval for the one-dimensional bargaining search.
    #[error("empty feasible bracket: no side payment keeps both utilities positive")]
    EmptyBracket,

    /// Grid specification invariants failed.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// The requested regime is not handled by this oracle operation.
    #[error("unsupported regime for this operation: {0}")]
    UnsupportedRegime(String),

    /// The metric needs an existing baseline equilibrium.
    #[error("baseline equilibrium does not exist or has nonpositive utilities")]
    MissingBaseline,
}

pub type Result<T> = std::result::Result<T, Error>;
