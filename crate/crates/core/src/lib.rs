//! Privacy-budget accounting for composed `(epsilon, delta)`-differentially
//! private mechanisms.
//!
//! * [`composition`]: basic and advanced closed forms, the optimal bound for
//!   identical mechanisms, and the exact optimal bound for heterogeneous
//!   mechanisms by subset enumeration.
//! * [`approx`]: polynomial-time approximation of the optimal bound that is
//!   always an upper bound, built on a weighted knapsack-counting program.
//! * [`oracle`]: the four-outcome worst-case mechanism and a brute-force
//!   evaluation of the composed privacy curve over its product distribution.
//! * [`numerics`]: precision configuration and stable scalar primitives.

pub mod approx;
pub mod composition;
pub mod error;
pub mod numerics;
pub mod oracle;
pub mod params;

pub use approx::{
    approx_optimal_epsilon, approx_optimal_epsilon_with, discretize, feasibility_check, knapsack_sum,
    knapsack_sum_float, ApproxOptions, ApproxResult, Arithmetic, Discretization,
};
pub use composition::{
    advanced_compose, basic_compose, exact_delta_of_epsilon, exact_optimal_epsilon, homogeneous_delta_of_epsilon,
    homogeneous_optimal_epsilon, Bracket, GuaranteeResult, Method, DEFAULT_ENUMERATION_LIMIT,
};
pub use error::{Error, Result};
pub use numerics::{PrecisionConfig, RoundingMode};
pub use oracle::{enumerate_delta, rr_pmf, rr_sample, rr_samples, RrDistribution, DEFAULT_RR_ENUMERATION_LIMIT};
pub use params::{parse_decimal, CompositionInstance, PrivacyParams};

pub use rug;
