use rug::{Float, Rational};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid privacy parameters: {0}")]
    InvalidParams(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cannot parse {0:?} as a decimal number")]
    Parse(String),

    /// `delta_g` is below `1 - prod(1 - delta_i)`; no finite `epsilon_g` exists.
    #[error("delta_g = {delta_g} is below the feasibility threshold {}", nearest(threshold))]
    InfeasibleDelta { delta_g: f64, threshold: Rational },

    #[error("k = {k} exceeds the enumeration limit of {limit}")]
    EnumerationTooLarge { k: usize, limit: usize },

    #[error("method requires identical parameters for every mechanism")]
    NotHomogeneous,

    #[error("discretized instance is too large: {0}")]
    TooLarge(String),
}

impl Error {
    pub(crate) fn infeasible(delta_g: &Rational, threshold: &Rational) -> Self {
        Error::InfeasibleDelta {
            delta_g: nearest(delta_g),
            threshold: threshold.clone(),
        }
    }
}

fn nearest(r: &Rational) -> f64 {
    Float::with_val(53, r).to_f64()
}
