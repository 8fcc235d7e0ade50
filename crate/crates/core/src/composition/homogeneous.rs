use rug::{Float, Integer, Rational};

use super::{bisect_least, screen_delta_target, screen_epsilon_target, Bracket, GuaranteeResult, Method};
use crate::error::{Error, Result};
use crate::numerics::{one_minus, rational_pow, softplus, PrecisionConfig};
use crate::params::PrivacyParams;

/// `delta_g` as a function of `epsilon_g` for `k` copies of one mechanism,
/// using the binomial form of the optimal bound.
///
/// The binomial weights `C(k,l) e^{l eps} / (1+e^eps)^k` are evaluated in the
/// log domain once; each query is then a suffix-sum lookup.
#[derive(Debug, Clone)]
pub struct HomogeneousCurve {
    k: usize,
    epsilon: Rational,
    threshold: Rational,
    survival: Float,
    /// `sum_{j >= l} C(k,j) e^{j eps} / (1+e^eps)^k`, indexed by `l`, length `k + 2`.
    upper_tail: Vec<Float>,
    /// `sum_{j >= l} C(k,j) e^{(k-j) eps} / (1+e^eps)^k`.
    lower_tail: Vec<Float>,
    cfg: PrecisionConfig,
}

impl HomogeneousCurve {
    pub fn new(params: &PrivacyParams, k: usize, cfg: &PrecisionConfig) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be positive".into()));
        }
        let prec = cfg.precision_bits;
        let survival_exact = rational_pow(&one_minus(params.delta()), k as u32);
        let threshold = one_minus(&survival_exact);
        let survival = cfg.float(&survival_exact);

        let mut upper_tail = vec![Float::new(prec); k + 2];
        let mut lower_tail = vec![Float::new(prec); k + 2];
        if *params.epsilon() != 0 {
            let eps = cfg.float(params.epsilon());
            let log_norm = Float::with_val(prec, softplus(&eps) * k as u64);
            for j in (0..=k).rev() {
                let log_binom = Float::with_val(prec, &crate::numerics::binomial(k as u64, j as u64)?).ln();
                let log_u = Float::with_val(prec, &eps * j as u64) + &log_binom - &log_norm;
                let log_v = Float::with_val(prec, &eps * (k - j) as u64) + &log_binom - &log_norm;
                let (u, v) = (log_u.exp(), log_v.exp());
                upper_tail[j] = Float::with_val(prec, &upper_tail[j + 1] + &u);
                lower_tail[j] = Float::with_val(prec, &lower_tail[j + 1] + &v);
            }
        }
        Ok(HomogeneousCurve {
            k,
            epsilon: params.epsilon().clone(),
            threshold,
            survival,
            upper_tail,
            lower_tail,
            cfg: *cfg,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `1 - (1 - delta)^k`.
    pub fn threshold(&self) -> &Rational {
        &self.threshold
    }

    /// First summation index `ceil((eps_g + k eps) / (2 eps))`, or `None`
    /// when the sum is empty.
    fn first_index(&self, epsilon_g: &Float) -> Option<usize> {
        let eps_g = epsilon_g.to_rational()?;
        let num = eps_g + Rational::from(&self.epsilon * self.k as u64);
        let den = Rational::from(&self.epsilon * 2u32);
        let start = (num / den).ceil();
        let start = Integer::from(start.numer()).to_usize()?;
        (start <= self.k).then_some(start)
    }

    pub fn delta_at(&self, epsilon_g: &Float) -> Float {
        let prec = self.cfg.precision_bits;
        let mut delta = self.cfg.float(&self.threshold);
        if self.epsilon == 0 {
            // every max{1 - e^eps_g, 0} term vanishes
            return delta;
        }
        let Some(l0) = self.first_index(epsilon_g) else {
            return delta;
        };
        let scale = Float::with_val(prec, epsilon_g.exp_ref());
        let mut sum = Float::with_val(prec, &self.lower_tail[l0] * &scale);
        sum = Float::with_val(prec, &self.upper_tail[l0] - &sum);
        if sum.is_sign_negative() {
            sum = Float::new(prec);
        }
        delta += Float::with_val(prec, &self.survival * &sum);
        delta
    }
}

/// Least `delta_g` such that `k` copies of `params` are `(epsilon_g, delta_g)`-DP.
pub fn homogeneous_delta_of_epsilon(
    params: &PrivacyParams,
    k: usize,
    epsilon_g: &Float,
    cfg: &PrecisionConfig,
) -> Result<Float> {
    screen_epsilon_target(epsilon_g)?;
    Ok(HomogeneousCurve::new(params, k, cfg)?.delta_at(epsilon_g))
}

/// Least `epsilon_g` such that `k` copies of `params` are `(epsilon_g, delta_g)`-DP,
/// bisected over `[0, k eps]` to `2^-target_bits`.
pub fn homogeneous_optimal_epsilon(
    params: &PrivacyParams,
    k: usize,
    delta_g: &Rational,
    cfg: &PrecisionConfig,
) -> Result<GuaranteeResult> {
    if screen_delta_target(delta_g)? {
        return Ok(GuaranteeResult::vacuous(delta_g, Method::HomogeneousOptimal, cfg));
    }
    let curve = HomogeneousCurve::new(params, k, cfg)?;
    if *delta_g < *curve.threshold() {
        return Err(Error::infeasible(delta_g, curve.threshold()));
    }
    let eps_sum = cfg.float(Rational::from(params.epsilon() * k as u64));
    let bracket = if delta_g == curve.threshold() {
        Bracket::point(eps_sum)
    } else {
        bisect_least(cfg.zero(), eps_sum, &cfg.target_width(), |x| {
            curve.delta_at(x) <= *delta_g
        })
    };
    let mut result = GuaranteeResult::new(
        bracket.upper.clone(),
        cfg.float(delta_g),
        Method::HomogeneousOptimal,
        cfg,
    );
    result.bracket = Some(bracket);
    Ok(result)
}
