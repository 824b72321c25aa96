use thiserror::Error;

/// Errors raised by the model, integrators and simulation harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A model or run parameter violates its stated constraint.
    #[error("invalid parameter `{name}` = {value}: must satisfy {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    /// An operation was evaluated outside its domain.
    #[error("{op}: argument {value} outside domain {domain}")]
    Domain {
        op: &'static str,
        value: f64,
        domain: &'static str,
    },

    /// The adaptive integrator could not continue.
    #[error("integrator fault at t = {t}: {reason}")]
    Integrator { t: f64, reason: String },

    /// A simulated state became NaN or infinite.
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },

    /// A sweep or path configuration is inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require(
    ok: bool,
    name: &'static str,
    value: f64,
    constraint: &'static str,
) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            constraint,
        })
    }
}
