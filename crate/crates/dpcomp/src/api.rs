//! Request and response types shared by the CLI and the HTTP service, and
//! the single code path that turns a request into a guarantee.
//!
//! Every epsilon and delta travels as a decimal string and is parsed to an
//! exact rational before any arithmetic happens.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use dpcomp_core::composition::{
    advanced_compose, advanced_delta_of_epsilon, basic_compose, basic_delta_of_epsilon, homogeneous_delta_of_epsilon,
};
use dpcomp_core::rug::{Float, Rational};
use dpcomp_core::{
    approx_optimal_epsilon_with, exact_delta_of_epsilon, exact_optimal_epsilon, homogeneous_optimal_epsilon,
    parse_decimal, ApproxOptions, ApproxResult, Bracket, CompositionInstance, GuaranteeResult, Method, PrecisionConfig,
    PrivacyParams, DEFAULT_ENUMERATION_LIMIT, DEFAULT_RR_ENUMERATION_LIMIT,
};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

/// Significant digits of every decimal in a JSON response.
pub const RESPONSE_DIGITS: usize = 20;

/// Size limits that decide which requests are refused as too large.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Largest `k` for exact-optimal, and the `auto` switch point.
    pub enum_limit: usize,
    /// Largest `k` for the `4^k` enumeration oracle.
    pub rr_enum_limit: usize,
    /// Largest `k` accepted by approx-optimal.
    pub max_k_approx: usize,
    /// Largest knapsack row approx-optimal may allocate.
    pub max_capacity: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            enum_limit: DEFAULT_ENUMERATION_LIMIT,
            rr_enum_limit: DEFAULT_RR_ENUMERATION_LIMIT,
            max_k_approx: 10_000,
            max_capacity: dpcomp_core::approx::DEFAULT_MAX_CAPACITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Settings {
    pub precision: PrecisionConfig,
    pub limits: Limits,
}

impl Settings {
    /// Precision for one request, honoring a per-request override.
    pub fn precision_for(&self, precision_bits: Option<u32>) -> Result<PrecisionConfig, ApiError> {
        match precision_bits {
            None => Ok(self.precision),
            Some(bits) => PrecisionConfig::new(bits, self.precision.target_bits, self.precision.rounding_mode)
                .map_err(ApiError::from),
        }
    }
}

/// A method name as requested; `auto` is resolved against the limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum MethodChoice {
    #[default]
    Auto,
    Fixed(Method),
}

impl MethodChoice {
    pub fn resolve(self, k: usize, limits: &Limits) -> Method {
        match self {
            MethodChoice::Fixed(m) => m,
            MethodChoice::Auto if k <= limits.enum_limit => Method::ExactOptimal,
            MethodChoice::Auto => Method::ApproxOptimal,
        }
    }

    /// Parses a comma-separated list such as `basic,advanced,auto`.
    pub fn parse_list(s: &str) -> Result<Vec<MethodChoice>, ApiError> {
        let list: Vec<MethodChoice> = s
            .split(',')
            .map(str::trim)
            .filter(|m| !m.is_empty())
            .map(str::parse)
            .collect::<Result<_, _>>()?;
        if list.is_empty() {
            return Err(ApiError::BadRequest("at least one method is required".into()));
        }
        Ok(list)
    }
}

impl fmt::Display for MethodChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodChoice::Auto => f.write_str("auto"),
            MethodChoice::Fixed(m) => m.fmt(f),
        }
    }
}

impl FromStr for MethodChoice {
    type Err = ApiError;

    fn from_str(s: &str) -> Result<Self, ApiError> {
        if s == "auto" {
            return Ok(MethodChoice::Auto);
        }
        s.parse().map(MethodChoice::Fixed).map_err(ApiError::from)
    }
}

impl Serialize for MethodChoice {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MethodChoice {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamInput {
    pub epsilon: String,
    pub delta: String,
}

/// Direction of a compose request: the fixed side of the guarantee.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Target {
    /// Find the least `epsilon_g` for this `delta_g`.
    DeltaG(String),
    /// Find the least `delta_g` for this `epsilon_g`.
    EpsilonG(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComposeRequest {
    pub params: Vec<ParamInput>,
    pub target: Target,
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
pub struct BracketOut {
    pub lower: String,
    pub upper: String,
}

/// Grid details of an approx-optimal answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApproxDetails {
    pub eta: String,
    pub beta: String,
    pub a_star: u64,
    pub a_total: u64,
    /// `e^{-eta/2} delta_g`; the answer is within `eta` of the optimum there.
    pub delta_g_shifted: String,
}

/// The numeric part of an answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuaranteeOut {
    pub epsilon_g: String,
    pub delta_g: String,
    pub method: Method,
    pub bracket: BracketOut,
    pub vacuous: bool,
    pub heterogeneous_sum: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approx: Option<ApproxDetails>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComposeResponse {
    #[serde(flatten)]
    pub guarantee: GuaranteeOut,
    pub requested_method: MethodChoice,
    pub precision: PrecisionConfig,
    pub runtime_ms: f64,
}

/// Parsed target of a composition.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetValue {
    DeltaG(Rational),
    EpsilonG(Rational),
}

impl TargetValue {
    pub fn parse(target: &Target) -> Result<Self, ApiError> {
        Ok(match target {
            Target::DeltaG(s) => TargetValue::DeltaG(parse_field("delta_g", s)?),
            Target::EpsilonG(s) => TargetValue::EpsilonG(parse_field("epsilon_g", s)?),
        })
    }
}

/// Method-specific inputs beyond the instance and the target.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tuning {
    pub eta: Option<Rational>,
    pub delta_prime: Option<Rational>,
}

impl Tuning {
    pub fn parse(eta: Option<&str>, delta_prime: Option<&str>) -> Result<Self, ApiError> {
        Ok(Tuning {
            eta: eta.map(|s| parse_field("eta", s)).transpose()?,
            delta_prime: delta_prime.map(|s| parse_field("delta_prime", s)).transpose()?,
        })
    }
}

/// A guarantee together with the approximation record that produced it.
#[derive(Debug, Clone)]
pub struct Solved {
    pub guarantee: GuaranteeResult,
    pub approx: Option<ApproxResult>,
}

pub(crate) fn parse_field(name: &str, s: &str) -> Result<Rational, ApiError> {
    parse_decimal(s).map_err(|_| ApiError::BadRequest(format!("{name}: cannot parse {s:?} as a decimal")))
}

pub fn build_instance(params: &[ParamInput]) -> Result<CompositionInstance, ApiError> {
    let params = params
        .iter()
        .map(|p| {
            PrivacyParams::new(parse_field("epsilon", &p.epsilon)?, parse_field("delta", &p.delta)?)
                .map_err(ApiError::from)
        })
        .collect::<Result<Vec<_>, _>>()?;
    CompositionInstance::new(params).map_err(ApiError::from)
}

fn homogeneous(instance: &CompositionInstance) -> Result<&PrivacyParams, ApiError> {
    instance
        .as_homogeneous()
        .ok_or_else(|| ApiError::from(dpcomp_core::Error::NotHomogeneous))
}

/// `delta'` for advanced composition at target `delta_g`: the given value,
/// or half of the slack `delta_g - k delta`.
fn advanced_slack(
    params: &PrivacyParams,
    k: usize,
    delta_g: &Rational,
    given: Option<&Rational>,
) -> Result<Rational, ApiError> {
    let used = Rational::from(params.delta() * k as u64);
    let slack = Rational::from(delta_g - &used);
    if slack <= 0 {
        return Err(ApiError::Infeasible {
            message: "advanced composition needs delta_g above k delta".into(),
            threshold: rational_string(&used),
        });
    }
    match given {
        Some(dp) if *dp > slack => Err(ApiError::BadRequest(format!(
            "delta_prime = {} exceeds delta_g - k delta = {}",
            rational_string(dp),
            rational_string(&slack)
        ))),
        Some(dp) => Ok(dp.clone()),
        None => Ok(slack / 2u32),
    }
}

fn require_eta(tuning: &Tuning) -> Result<&Rational, ApiError> {
    tuning
        .eta
        .as_ref()
        .ok_or_else(|| ApiError::BadRequest("approx-optimal requires eta".into()))
}

/// Computes the guarantee for `instance` in the direction given by `target`.
pub fn solve(
    instance: &CompositionInstance,
    target: &TargetValue,
    method: Method,
    tuning: &Tuning,
    cfg: &PrecisionConfig,
    limits: &Limits,
) -> Result<Solved, ApiError> {
    let k = instance.len();
    let plain = |guarantee| {
        Ok(Solved {
            guarantee,
            approx: None,
        })
    };
    match target {
        TargetValue::DeltaG(delta_g) => match method {
            Method::Basic => {
                let r = basic_compose(instance, cfg);
                let needed = instance.deltas().fold(Rational::new(), |acc, d| acc + d);
                if needed > *delta_g && *delta_g < 1 {
                    return Err(ApiError::Infeasible {
                        message: "basic composition needs delta_g at least the sum of the deltas".into(),
                        threshold: rational_string(&needed),
                    });
                }
                plain(r)
            }
            Method::Advanced => {
                let params = homogeneous(instance)?;
                if *delta_g >= 1 {
                    return plain(GuaranteeResult::vacuous(delta_g, Method::Advanced, cfg));
                }
                let dp = advanced_slack(params, k, delta_g, tuning.delta_prime.as_ref())?;
                plain(advanced_compose(params, k, &dp, cfg)?)
            }
            Method::HomogeneousOptimal => {
                let params = homogeneous(instance)?;
                plain(homogeneous_optimal_epsilon(params, k, delta_g, cfg)?)
            }
            Method::ExactOptimal => plain(exact_optimal_epsilon(instance, delta_g, limits.enum_limit, cfg)?),
            Method::ApproxOptimal => {
                let eta = require_eta(tuning)?;
                if k > limits.max_k_approx {
                    return Err(ApiError::TooLarge(format!(
                        "k = {k} exceeds the approx-optimal limit of {}",
                        limits.max_k_approx
                    )));
                }
                let options = ApproxOptions {
                    max_capacity: limits.max_capacity,
                    ..ApproxOptions::default()
                };
                let r = approx_optimal_epsilon_with(instance, delta_g, eta, cfg, &options)?;
                Ok(Solved {
                    guarantee: r.guarantee(),
                    approx: Some(r),
                })
            }
        },
        TargetValue::EpsilonG(eps_g) => {
            let eps_g = cfg.float(eps_g);
            match method {
                Method::Basic => plain(basic_delta_of_epsilon(instance, &eps_g, cfg)?),
                Method::Advanced => plain(advanced_delta_of_epsilon(homogeneous(instance)?, k, &eps_g, cfg)?),
                Method::HomogeneousOptimal => {
                    let delta = homogeneous_delta_of_epsilon(homogeneous(instance)?, k, &eps_g, cfg)?;
                    plain(delta_guarantee(eps_g, delta, method, cfg))
                }
                Method::ExactOptimal => {
                    let delta = exact_delta_of_epsilon(instance, &eps_g, limits.enum_limit, cfg)?;
                    plain(delta_guarantee(eps_g, delta, method, cfg))
                }
                Method::ApproxOptimal => Err(ApiError::BadRequest(
                    "approx-optimal answers delta_g targets only; use exact-optimal or \
                     homogeneous-optimal for an epsilon_g target"
                        .into(),
                )),
            }
        }
    }
}

fn delta_guarantee(eps_g: Float, delta: Float, method: Method, cfg: &PrecisionConfig) -> GuaranteeResult {
    let vacuous = delta >= 1;
    let mut r = GuaranteeResult::new(eps_g, delta, method, cfg);
    r.vacuous = vacuous;
    r
}

impl GuaranteeOut {
    pub fn new(solved: &Solved) -> Self {
        let g = &solved.guarantee;
        let bracket = g.bracket.clone().unwrap_or_else(|| Bracket::point(g.epsilon_g.clone()));
        GuaranteeOut {
            epsilon_g: decimal_string(&g.epsilon_g),
            delta_g: decimal_string(&g.delta_g),
            method: g.method,
            bracket: BracketOut {
                lower: decimal_string(&bracket.lower),
                upper: decimal_string(&bracket.upper),
            },
            vacuous: g.vacuous,
            heterogeneous_sum: g.heterogeneous_sum,
            approx: solved.approx.as_ref().map(|r| ApproxDetails {
                eta: rational_string(&r.eta),
                beta: rational_string(r.discretization.beta()),
                a_star: r.a_star,
                a_total: r.discretization.a_total(),
                delta_g_shifted: decimal_string(&r.delta_g_shifted),
            }),
        }
    }
}

/// Answers a compose request. The CLI and the service both call this.
pub fn compose(req: &ComposeRequest, settings: &Settings) -> Result<ComposeResponse, ApiError> {
    let start = Instant::now();
    let cfg = settings.precision_for(req.precision_bits)?;
    let instance = build_instance(&req.params)?;
    let target = TargetValue::parse(&req.target)?;
    let tuning = Tuning::parse(req.eta.as_deref(), req.delta_prime.as_deref())?;
    let method = req.method.resolve(instance.len(), &settings.limits);
    let solved = solve(&instance, &target, method, &tuning, &cfg, &settings.limits)?;
    Ok(ComposeResponse {
        guarantee: GuaranteeOut::new(&solved),
        requested_method: req.method,
        precision: cfg,
        runtime_ms: elapsed_ms(start),
    })
}

pub(crate) fn elapsed_ms(start: Instant) -> f64 {
    (start.elapsed().as_secs_f64() * 1e6).round() / 1e3
}

/// Renders `x` with at most [`RESPONSE_DIGITS`] significant digits,
/// trailing zeros removed.
pub fn decimal_string(x: &Float) -> String {
    render(x, RESPONSE_DIGITS, true)
}

/// Renders `x` with exactly `digits` significant digits.
pub fn significant_string(x: &Float, digits: usize) -> String {
    render(x, digits, false)
}

pub fn rational_string(r: &Rational) -> String {
    decimal_string(&Float::with_val(256, r))
}

fn render(x: &Float, digits: usize, trim: bool) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x.is_sign_negative() { "-inf" } else { "inf" }.into();
    }
    if x.is_zero() {
        return "0".into();
    }
    let (negative, mut mantissa, exp) = x.to_sign_string_exp(10, Some(digits));
    // value = 0.mantissa * 10^exp
    let exp = exp.unwrap_or(0);
    if trim {
        let kept = mantissa.trim_end_matches('0').len().max(1);
        mantissa.truncate(kept);
    }
    let n = mantissa.len() as i32;
    let body = if !(-6..=21).contains(&exp) {
        let (head, tail) = mantissa.split_at(1);
        if tail.is_empty() {
            format!("{head}e{}", exp - 1)
        } else {
            format!("{head}.{tail}e{}", exp - 1)
        }
    } else if exp <= 0 {
        format!("0.{}{mantissa}", "0".repeat(exp.unsigned_abs() as usize))
    } else if exp >= n {
        format!("{mantissa}{}", "0".repeat((exp - n) as usize))
    } else {
        let (int, frac) = mantissa.split_at(exp as usize);
        format!("{int}.{frac}")
    };
    if negative {
        format!("-{body}")
    } else {
        body
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(x: f64) -> Float {
        Float::with_val(128, x)
    }

    #[test]
    fn rendering() {
        assert_eq!(decimal_string(&f(0.25)), "0.25");
        assert_eq!(decimal_string(&f(3.0)), "3");
        assert_eq!(decimal_string(&f(1200.0)), "1200");
        assert_eq!(decimal_string(&f(-0.5)), "-0.5");
        assert_eq!(decimal_string(&f(1e-9)), "1.0000000000000000623e-9");
        assert_eq!(rational_string(&Rational::from((1, 1_000_000_000))), "1e-9");
        assert_eq!(rational_string(&Rational::from((19, 100))), "0.19");
        assert_eq!(significant_string(&f(3.5), 12), "3.50000000000");
        assert_eq!(significant_string(&f(0.0123), 4), "0.01230");
        assert_eq!(decimal_string(&Float::new(64)), "0");
    }

    #[test]
    fn rendered_values_parse_back() {
        for x in [1.0986122886681098, 123456.789, 7.5e-5, 2.0f64.powi(-25), 3.0e30] {
            let s = decimal_string(&f(x));
            let back = parse_decimal(&s).unwrap();
            let exact = Rational::from_f64(x).unwrap();
            let err = Rational::from(&back - &exact).abs();
            assert!(err <= exact.abs() * Rational::from((1, 10u64.pow(19))), "{s}");
        }
    }

    #[test]
    fn method_choice_round_trip() {
        for s in [
            "auto",
            "basic",
            "advanced",
            "homogeneous-optimal",
            "exact-optimal",
            "approx-optimal",
        ] {
            assert_eq!(s.parse::<MethodChoice>().unwrap().to_string(), s);
        }
        assert!("optimal".parse::<MethodChoice>().is_err());
        let limits = Limits::default();
        assert_eq!(MethodChoice::Auto.resolve(25, &limits), Method::ExactOptimal);
        assert_eq!(MethodChoice::Auto.resolve(26, &limits), Method::ApproxOptimal);
    }
}
