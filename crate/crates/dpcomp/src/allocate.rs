//! Splitting a global `(epsilon_g, delta_g)` budget across statistics in
//! proportion to user-chosen weights.
//!
//! Statistic `j` receives `epsilon_j = s w_j`; the scale `s` is the largest
//! one, to the configured target precision, whose composition under the
//! requested method stays within `epsilon_g` at `delta_g`. Each `epsilon_j`
//! is truncated to a short decimal before it is checked, so the strings in
//! the response are exactly the values that were verified.

use std::time::Instant;

use dpcomp_core::rug::{Float, Integer, Rational};
use dpcomp_core::{CompositionInstance, Method, PrecisionConfig, PrivacyParams};
use serde::{Deserialize, Serialize};

use crate::api::{
    elapsed_ms, parse_field, rational_string, solve, GuaranteeOut, Limits, MethodChoice, Settings, Solved, TargetValue,
    Tuning,
};
use crate::error::ApiError;

/// Significant digits kept in each allocated epsilon.
pub const ALLOCATION_DIGITS: u32 = 16;

/// Bound on the doubling phase of the scale search.
const MAX_DOUBLINGS: usize = 64;

fn zero_string() -> String {
    "0".into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatisticInput {
    pub name: String,
    pub weight: String,
    #[serde(default = "zero_string")]
    pub delta: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalBudget {
    pub epsilon_g: String,
    pub delta_g: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationRequest {
    pub statistics: Vec<StatisticInput>,
    pub global: GlobalBudget,
    #[serde(default)]
    pub method: MethodChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_prime: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision_bits: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub name: String,
    pub weight: String,
    pub epsilon: String,
    pub delta: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResponse {
    pub statistics: Vec<Allocation>,
    pub scale: String,
    /// Guarantee of the returned allocation, recomposed under `realized.method`.
    pub realized: GuaranteeOut,
    pub requested: GlobalBudget,
    pub requested_method: MethodChoice,
    pub precision: PrecisionConfig,
    pub runtime_ms: f64,
}

/// `r` rounded toward zero to `digits` significant decimal digits.
pub fn truncate_significant(r: &Rational, digits: u32) -> Rational {
    if *r <= 0 {
        return Rational::new();
    }
    let pow10 = |e: i64| -> Rational {
        let p = Integer::from(Integer::u_pow_u(10, e.unsigned_abs() as u32));
        if e >= 0 {
            Rational::from(p)
        } else {
            Rational::from((Integer::from(1), p))
        }
    };
    // 10^e <= r < 10^{e+1}
    let mut e = Float::with_val(64, r).log10().floor().to_f64() as i64;
    while pow10(e) > *r {
        e -= 1;
    }
    while pow10(e + 1) <= *r {
        e += 1;
    }
    let shift = i64::from(digits) - 1 - e;
    let scaled = r * pow10(shift);
    let kept = scaled.trunc();
    kept * pow10(-shift)
}

struct Problem {
    names: Vec<String>,
    weights: Vec<Rational>,
    deltas: Vec<Rational>,
    epsilon_g: Rational,
    delta_g: Rational,
    method: Method,
    tuning: Tuning,
    cfg: PrecisionConfig,
    limits: Limits,
}

struct Candidate {
    scale: Rational,
    epsilons: Vec<Rational>,
    solved: Solved,
}

impl Problem {
    fn epsilons_at(&self, scale: &Rational) -> Vec<Rational> {
        self.weights
            .iter()
            .map(|w| truncate_significant(&Rational::from(w * scale), ALLOCATION_DIGITS))
            .collect()
    }

    fn instance(&self, epsilons: &[Rational]) -> Result<CompositionInstance, ApiError> {
        let params = epsilons
            .iter()
            .zip(&self.deltas)
            .map(|(e, d)| PrivacyParams::new(e.clone(), d.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CompositionInstance::new(params)?)
    }

    /// The allocation at `scale`, if it fits within the budget.
    fn try_scale(&self, scale: &Rational) -> Result<Option<Candidate>, ApiError> {
        let epsilons = self.epsilons_at(scale);
        let instance = self.instance(&epsilons)?;
        let target = TargetValue::DeltaG(self.delta_g.clone());
        let solved = solve(&instance, &target, self.method, &self.tuning, &self.cfg, &self.limits)?;
        // a few ulps of slack, so that a budget met exactly (pure DP at the
        // sum) is not lost to rounding the sum into a float
        let allowance = Rational::from(&self.epsilon_g >> (self.cfg.precision_bits - 4));
        let fits = solved.guarantee.epsilon_g <= Rational::from(&self.epsilon_g + &allowance);
        Ok(fits.then(|| Candidate {
            scale: scale.clone(),
            epsilons,
            solved,
        }))
    }

    fn search(&self) -> Result<Candidate, ApiError> {
        let total: Rational = self.weights.iter().fold(Rational::new(), |acc, w| acc + w);
        // summing never undercuts the optimum, so this scale is usually feasible
        let start = Rational::from(&self.epsilon_g / &total);
        let mut best = self.try_scale(&start)?;
        let mut hi = start;
        if best.is_some() {
            let mut doublings = 0;
            loop {
                hi *= 2u32;
                match self.try_scale(&hi)? {
                    Some(c) => best = Some(c),
                    None => break,
                }
                doublings += 1;
                if doublings == MAX_DOUBLINGS {
                    return Err(ApiError::BadRequest(
                        "the budget does not bound the scale; raise the weights or lower delta_g".into(),
                    ));
                }
            }
        }
        let tolerance = Rational::from((1, 1)) >> self.cfg.target_bits;
        // without a feasible scale the gap never closes in relative terms
        for _ in 0..4 * self.cfg.target_bits + 64 {
            let lo = best.as_ref().map(|c| c.scale.clone()).unwrap_or_default();
            let gap = Rational::from(&hi - &lo);
            if gap <= Rational::from(&hi * &tolerance) {
                break;
            }
            let mid = (lo + &hi) / 2u32;
            match self.try_scale(&mid)? {
                Some(c) => best = Some(c),
                None => hi = mid,
            }
        }
        best.ok_or_else(|| {
            ApiError::ZeroBudget(format!(
                "no positive allocation fits within epsilon_g = {} under {}",
                rational_string(&self.epsilon_g),
                self.method
            ))
        })
    }
}

/// Largest proportional allocation that composes to within the global budget.
pub fn allocate_budget(req: &AllocationRequest, settings: &Settings) -> Result<AllocationResponse, ApiError> {
    let start = Instant::now();
    let cfg = settings.precision_for(req.precision_bits)?;
    if req.statistics.is_empty() {
        return Err(ApiError::BadRequest("at least one statistic is required".into()));
    }
    let mut weights = Vec::with_capacity(req.statistics.len());
    let mut deltas = Vec::with_capacity(req.statistics.len());
    for stat in &req.statistics {
        let w = parse_field("weight", &stat.weight)?;
        if w <= 0 {
            return Err(ApiError::BadRequest(format!(
                "weight of {:?} must be positive",
                stat.name
            )));
        }
        weights.push(w);
        deltas.push(parse_field("delta", &stat.delta)?);
    }
    let epsilon_g = parse_field("epsilon_g", &req.global.epsilon_g)?;
    let delta_g = parse_field("delta_g", &req.global.delta_g)?;
    if epsilon_g < 0 || delta_g < 0 {
        return Err(ApiError::BadRequest(
            "epsilon_g and delta_g must be non-negative".into(),
        ));
    }
    if delta_g >= 1 {
        return Err(ApiError::BadRequest("delta_g >= 1 places no limit on epsilon".into()));
    }
    let problem = Problem {
        names: req.statistics.iter().map(|s| s.name.clone()).collect(),
        weights,
        deltas,
        epsilon_g,
        delta_g,
        method: req.method.resolve(req.statistics.len(), &settings.limits),
        tuning: Tuning::parse(req.eta.as_deref(), req.delta_prime.as_deref())?,
        cfg,
        limits: settings.limits,
    };
    // report an unreachable delta_g before a zero budget
    let zeros = vec![Rational::new(); problem.weights.len()];
    problem.instance(&zeros)?.check_feasible(&problem.delta_g)?;
    if problem.epsilon_g == 0 {
        return Err(ApiError::ZeroBudget("epsilon_g = 0 forces every epsilon to 0".into()));
    }

    let found = problem.search()?;
    let statistics = problem
        .names
        .iter()
        .zip(&req.statistics)
        .zip(found.epsilons.iter().zip(&problem.deltas))
        .map(|((name, input), (eps, delta))| Allocation {
            name: name.clone(),
            weight: input.weight.clone(),
            epsilon: rational_string(eps),
            delta: rational_string(delta),
        })
        .collect();
    Ok(AllocationResponse {
        statistics,
        scale: rational_string(&found.scale),
        realized: GuaranteeOut::new(&found.solved),
        requested: req.global.clone(),
        requested_method: req.method,
        precision: cfg,
        runtime_ms: elapsed_ms(start),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    #[test]
    fn truncation() {
        assert_eq!(truncate_significant(&q(1, 3), 3), q(333, 1000));
        assert_eq!(truncate_significant(&q(2, 3), 1), q(6, 10));
        assert_eq!(truncate_significant(&q(1000, 1), 2), q(1000, 1));
        assert_eq!(truncate_significant(&q(1999, 1), 2), q(1900, 1));
        assert_eq!(truncate_significant(&q(1, 100), 5), q(1, 100));
        assert_eq!(truncate_significant(&q(0, 1), 5), q(0, 1));
        let third = q(1, 3);
        assert!(truncate_significant(&third, 16) <= third);
    }
}
