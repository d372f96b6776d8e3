use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of a cost or rate function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A domain type invariant was violated while constructing a value.
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    /// No difficulty vector admits a feasible weight vector.
    #[error("no feasible mechanism among {examined} candidates; nearest candidate {witness}")]
    NoFeasibleMechanism { examined: u64, witness: String },

    #[error("exhaustive search over {count} candidates exceeds the limit of {limit}")]
    SearchTooLarge { count: u128, limit: u128 },

    /// A structural property expected of every optimal mechanism did not hold.
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }
}
