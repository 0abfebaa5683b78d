use thiserror::Error;

/// Errors surfaced by parameter validation, formula domains and the
/// simulation/verification harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A named parameter violates its constraint. The message is meant to be
    /// printed as-is by the command line front end.
    #[error("invalid parameter: {name} must satisfy {constraint} (got {value})")]
    InvalidParameter {
        name: &'static str,
        constraint: &'static str,
        value: f64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("regime error: {0}")]
    Regime(String),

    #[error("no stop price configured for this trade")]
    StopDisabled,

    #[error("resource limit: {requested} path points exceed the budget of {budget}; use the streaming batch instead")]
    Resource { requested: u128, budget: u128 },

    #[error("empirical CDF needs at least one sample")]
    EmptySamples,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check(
    ok: bool,
    name: &'static str,
    constraint: &'static str,
    value: f64,
) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            constraint,
            value,
        })
    }
}
