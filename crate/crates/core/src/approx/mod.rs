//! Polynomial-time upper approximation of the optimal composition.
//!
//! Every `eps_i` is rounded up to a multiple `a_i` of `eps_0 = ln(1 + beta)`,
//! the least feasible level `a*` of the rounded instance is found by binary
//! search, and `eps* = a* y` is returned with `y >= eps_0` rational. For
//! `beta = eta / (k (1 + mean eps) + 1)` the output satisfies
//! `OptComp(delta_g) <= eps* <= OptComp(e^{-eta/2} delta_g) + eta`.

mod discretize;
mod feasibility;
mod knapsack;

use rug::float::Round;
use rug::{Float, Rational};

use crate::composition::{screen_delta_target, Bracket, GuaranteeResult, Method};
use crate::error::Result;
use crate::numerics::PrecisionConfig;
use crate::params::CompositionInstance;

pub use discretize::{discretize, Discretization};
pub use feasibility::{Arithmetic, Certify, FeasibilityOracle, OracleSettings};
pub use knapsack::{
    knapsack_sum, knapsack_sum_float, DirectedArithmetic, ExactArithmetic, KnapsackArithmetic, KnapsackTable,
};

/// Default bound on the knapsack row length, about 200 MB per row at 128 bits.
pub const DEFAULT_MAX_CAPACITY: u64 = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ApproxOptions {
    pub arithmetic: Arithmetic,
    pub max_capacity: u64,
    /// Also run a second search on levels rounded down, certifying a lower
    /// end for the reported bracket.
    pub lower_bound: bool,
}

impl Default for ApproxOptions {
    fn default() -> Self {
        ApproxOptions {
            arithmetic: Arithmetic::Directed,
            max_capacity: DEFAULT_MAX_CAPACITY,
            lower_bound: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxResult {
    /// `a* y`, rounded up.
    pub epsilon_star: Float,
    /// `a* y` exactly.
    pub epsilon_star_exact: Rational,
    pub a_star: u64,
    pub discretization: Discretization,
    pub delta_g: Rational,
    /// `e^{-eta/2} delta_g`, the target on the far side of the guarantee.
    pub delta_g_shifted: Float,
    pub eta: Rational,
    /// Certified lower bound on the optimum, when computed.
    pub lower: Option<Float>,
    pub vacuous: bool,
    pub precision: PrecisionConfig,
}

impl ApproxResult {
    pub fn guarantee(&self) -> GuaranteeResult {
        let mut result = GuaranteeResult::new(
            self.epsilon_star.clone(),
            self.precision.float(&self.delta_g),
            Method::ApproxOptimal,
            &self.precision,
        );
        let lower = self.lower.clone().unwrap_or_else(|| self.precision.zero());
        result.bracket = Some(Bracket {
            lower,
            upper: self.epsilon_star.clone(),
        });
        result.vacuous = self.vacuous;
        result
    }
}

fn settings(cfg: &PrecisionConfig, options: &ApproxOptions) -> OracleSettings {
    OracleSettings {
        arithmetic: options.arithmetic,
        prec: cfg.precision_bits,
        max_capacity: options.max_capacity,
    }
}

fn deltas(instance: &CompositionInstance) -> Vec<Rational> {
    instance.deltas().cloned().collect()
}

/// Whether the discretized instance is `(a_star eps_0, delta_g)`-DP. A `true`
/// answer in directed arithmetic is never a false positive.
pub fn feasibility_check(
    discretization: &Discretization,
    deltas: &[Rational],
    delta_g: &Rational,
    a_star: u64,
    cfg: &PrecisionConfig,
    arithmetic: Arithmetic,
) -> Result<bool> {
    let options = ApproxOptions {
        arithmetic,
        max_capacity: u64::MAX,
        lower_bound: false,
    };
    let oracle = FeasibilityOracle::new(
        discretization.base(),
        discretization.levels(),
        deltas,
        delta_g,
        &settings(cfg, &options),
        Certify::Feasible,
    )?;
    oracle.is_feasible(a_star)
}

/// Approximate optimal `epsilon_g` for target `delta_g` with accuracy `eta`.
pub fn approx_optimal_epsilon(
    instance: &CompositionInstance,
    delta_g: &Rational,
    eta: &Rational,
    cfg: &PrecisionConfig,
) -> Result<ApproxResult> {
    approx_optimal_epsilon_with(instance, delta_g, eta, cfg, &ApproxOptions::default())
}

pub fn approx_optimal_epsilon_with(
    instance: &CompositionInstance,
    delta_g: &Rational,
    eta: &Rational,
    cfg: &PrecisionConfig,
    options: &ApproxOptions,
) -> Result<ApproxResult> {
    let discretization = discretize(instance, eta)?;
    let prec = cfg.precision_bits;
    let shifted = {
        let half_eta = Float::with_val(prec, eta) / 2u32;
        Float::with_val(prec, -half_eta).exp() * Float::with_val(prec, delta_g)
    };
    let mut result = ApproxResult {
        epsilon_star: cfg.zero(),
        epsilon_star_exact: Rational::new(),
        a_star: 0,
        discretization,
        delta_g: delta_g.clone(),
        delta_g_shifted: shifted,
        eta: eta.clone(),
        lower: None,
        vacuous: false,
        precision: *cfg,
    };
    if screen_delta_target(delta_g)? {
        result.vacuous = true;
        result.lower = Some(cfg.zero());
        return Ok(result);
    }
    instance.check_feasible(delta_g)?;

    let deltas = deltas(instance);
    let oracle_settings = settings(cfg, options);
    let grid = &result.discretization;
    let upper = FeasibilityOracle::new(
        grid.base(),
        grid.levels(),
        &deltas,
        delta_g,
        &oracle_settings,
        Certify::Feasible,
    )?;
    let (a_star, _) = upper.least_feasible()?;
    drop(upper);
    result.a_star = a_star;
    result.epsilon_star_exact = Rational::from(grid.epsilon0_upper() * a_star);
    result.epsilon_star = Float::with_val_round(prec, &result.epsilon_star_exact, Round::Up).0;

    if options.lower_bound {
        let levels = grid.lower_levels(instance)?;
        let lower = FeasibilityOracle::new(
            grid.base(),
            &levels,
            &deltas,
            delta_g,
            &oracle_settings,
            Certify::Infeasible,
        )?;
        let bound = match lower.least_feasible()? {
            (_, Some(rejected)) => {
                // the rounded-down instance is not (rejected eps_0, delta_g)-DP
                let eps0 = grid.epsilon0(prec, Round::Down);
                Float::with_val_round(prec, &eps0 * rejected, Round::Down).0
            }
            (_, None) => cfg.zero(),
        };
        result.lower = Some(bound);
    }
    Ok(result)
}
