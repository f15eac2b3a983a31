use thiserror::Error;

/// Errors produced by the amplifier model, detector model and estimators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScaError {
    #[error("beamsplitter amplitudes t = {t}, r = {r} are not unitary (t^2 + r^2 must be 1)")]
    NonUnitary { t: f64, r: f64 },

    #[error("mixture must contain at least one component")]
    EmptyMixture,

    #[error("mixture weight {0} is negative or not finite")]
    InvalidWeight(f64),

    #[error("mixture weights sum to {0}, expected 1")]
    NotNormalized(f64),

    #[error("{name} = {value} is not a probability in [0, 1]")]
    InvalidProbability { name: &'static str, value: f64 },

    #[error("mean photon number {0} is negative or not finite")]
    NegativePhotonNumber(f64),

    #[error("state index {index} out of range for a set of {n_states} states")]
    IndexOutOfRange { index: usize, n_states: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("no branch is ever heralded for input {input_index}")]
    NeverHeralded { input_index: usize },

    #[error("epsilon {epsilon} exceeds the single-click probability {limit} (P(1,0) would be negative)")]
    InvalidEpsilon { epsilon: f64, limit: f64 },

    #[error("insufficient signal ({0}): too few expected or observed clicks to estimate from")]
    InsufficientSignal(f64),
}

pub type Result<T> = std::result::Result<T, ScaError>;

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(ScaError::InvalidProbability { name, value })
    }
}
