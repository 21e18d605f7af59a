use std::fmt;

use thiserror::Error;

/// A single failed admissibility check, named by the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl Violation {
    pub(crate) fn new(field: &'static str, message: impl Into<String>) -> Self {
        Self {
            field,
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn join(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {}", join(.0))]
    Validation(Vec<Violation>),

    #[error("{what} must be nonnegative (got {value})")]
    NegativeTime { what: &'static str, value: f64 },

    #[error("survival probability is zero at t = {t}: density mass exhausted")]
    SurvivalExhausted { t: f64 },

    #[error("operation requires {expected} utility")]
    UtilityKind { expected: &'static str },

    #[error("wealth must be strictly positive (got {x})")]
    NonPositiveWealth { x: f64 },

    #[error("after-default volatility vanishes at theta = {theta}")]
    ZeroVolatility { theta: f64 },

    #[error("value multiplier must be positive (got y = {y})")]
    NonPositiveMultiplier { y: f64 },

    #[error("default weight k^p is not finite (got {value})")]
    NonFiniteWeight { value: f64 },

    #[error("value multiplier became nonpositive at t = {t} (Y = {y})")]
    NonPositiveValue { t: f64, y: f64 },

    #[error("policy iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("no admissible root of the first-order condition at t = {t}")]
    NoAdmissibleRoot { t: f64 },

    #[error("inadmissible strategy: jump factor 1 - pi*gamma = {factor} at t = {t}")]
    Inadmissible { t: f64, factor: f64 },

    #[error("default time sampling failed for u = {u}")]
    SamplingFailed { u: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
