use thiserror::Error;

/// Errors raised by the analysis, planning and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The swarm or distribution is malformed (wrong lengths, bad capacities).
    #[error("configuration error: {0}")]
    Config(String),

    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Common data covers the whole file, leaving nothing to distribute.
    #[error("degenerate file: common data {common} >= file size {file}")]
    DegenerateFile { common: f64, file: f64 },

    /// Common data exceeds the total amount held by peers.
    #[error("inconsistent distribution: common data {common} exceeds peer-held data {held}")]
    InconsistentDistribution { common: f64, held: f64 },

    /// A plan construction produced a negative split. Indicates a regime
    /// classification bug rather than bad input.
    #[error("internal inconsistency: {0}")]
    Internal(String),

    /// A nested schedule failed at a given (1-based) tier.
    #[error("tier {tier}: {message}")]
    Stage { tier: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
