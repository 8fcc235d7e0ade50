//! Per-mechanism privacy parameters and composition instances.

use std::fmt;
use std::str::FromStr;

use rug::{Integer, Rational};

use crate::error::{Error, Result};
use crate::numerics::{one_minus, survival_product};

/// One mechanism's `(epsilon, delta)` guarantee, held as exact rationals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PrivacyParams {
    epsilon: Rational,
    delta: Rational,
}

impl PrivacyParams {
    pub fn new(epsilon: Rational, delta: Rational) -> Result<Self> {
        if epsilon < 0 {
            return Err(Error::InvalidParams(format!(
                "epsilon must be non-negative, got {}",
                epsilon.to_f64()
            )));
        }
        if !(0..1).contains(&delta) {
            return Err(Error::InvalidParams(format!(
                "delta must lie in [0, 1), got {}",
                delta.to_f64()
            )));
        }
        Ok(PrivacyParams { epsilon, delta })
    }

    pub fn parse(epsilon: &str, delta: &str) -> Result<Self> {
        Self::new(parse_decimal(epsilon)?, parse_decimal(delta)?)
    }

    /// Exact conversion of the binary64 values.
    pub fn from_f64(epsilon: f64, delta: f64) -> Result<Self> {
        let to_rational =
            |x: f64| Rational::from_f64(x).ok_or_else(|| Error::InvalidParams(format!("{x} is not finite")));
        Self::new(to_rational(epsilon)?, to_rational(delta)?)
    }

    pub fn epsilon(&self) -> &Rational {
        &self.epsilon
    }

    pub fn delta(&self) -> &Rational {
        &self.delta
    }
}

impl fmt::Display for PrivacyParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.epsilon.to_f64(), self.delta.to_f64())
    }
}

/// Ordered list of mechanisms with cached aggregates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompositionInstance {
    params: Vec<PrivacyParams>,
    eps_sum: Rational,
    delta_survival: Rational,
    eps_mean: Rational,
}

impl CompositionInstance {
    pub fn new(params: Vec<PrivacyParams>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::InvalidParams("at least one mechanism is required".into()));
        }
        let eps_sum = params.iter().fold(Rational::new(), |acc, p| acc + &p.epsilon);
        let delta_survival = survival_product(params.iter().map(|p| &p.delta));
        let eps_mean = Rational::from(&eps_sum / params.len() as u64);
        Ok(CompositionInstance {
            params,
            eps_sum,
            delta_survival,
            eps_mean,
        })
    }

    /// `k` copies of the same mechanism.
    pub fn homogeneous(params: PrivacyParams, k: usize) -> Result<Self> {
        Self::new(vec![params; k])
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn params(&self) -> &[PrivacyParams] {
        &self.params
    }

    pub fn epsilons(&self) -> impl Iterator<Item = &Rational> + '_ {
        self.params.iter().map(|p| &p.epsilon)
    }

    pub fn deltas(&self) -> impl Iterator<Item = &Rational> + '_ {
        self.params.iter().map(|p| &p.delta)
    }

    pub fn eps_sum(&self) -> &Rational {
        &self.eps_sum
    }

    /// `prod (1 - delta_i)`.
    pub fn delta_survival(&self) -> &Rational {
        &self.delta_survival
    }

    pub fn eps_mean(&self) -> &Rational {
        &self.eps_mean
    }

    /// Smallest `delta_g` for which some finite `epsilon_g` exists.
    pub fn feasibility_threshold(&self) -> Rational {
        one_minus(&self.delta_survival)
    }

    pub fn check_feasible(&self, delta_g: &Rational) -> Result<()> {
        let threshold = self.feasibility_threshold();
        if *delta_g < threshold {
            return Err(Error::infeasible(delta_g, &threshold));
        }
        Ok(())
    }

    /// The shared parameters when every mechanism is identical.
    pub fn as_homogeneous(&self) -> Option<&PrivacyParams> {
        let first = &self.params[0];
        self.params.iter().all(|p| p == first).then_some(first)
    }
}

impl FromStr for PrivacyParams {
    type Err = Error;

    /// `"epsilon,delta"`.
    fn from_str(s: &str) -> Result<Self> {
        let (eps, delta) = s.split_once(',').ok_or_else(|| Error::Parse(s.to_string()))?;
        Self::parse(eps.trim(), delta.trim())
    }
}

/// Parses a decimal literal (`0.25`, `-3`, `1e-9`, `2.5E+3`) or a fraction
/// (`1/3`) into an exact rational.
pub fn parse_decimal(input: &str) -> Result<Rational> {
    let s = input.trim();
    let err = || Error::Parse(input.to_string());
    if s.is_empty() {
        return Err(err());
    }
    if let Some((num, den)) = s.split_once('/') {
        let num = parse_decimal(num)?;
        let den = parse_decimal(den)?;
        if den == 0 {
            return Err(err());
        }
        return Ok(num / den);
    }
    let (negative, body) = match s.as_bytes()[0] {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(pos) => {
            let exp: i64 = body[pos + 1..].parse().map_err(|_| err())?;
            (&body[..pos], exp)
        }
        None => (body, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(err());
    }
    let digits: Integer = format!("{int_part}{frac_part}").parse().map_err(|_| err())?;
    let scale = exponent - frac_part.len() as i64;
    if scale.unsigned_abs() > 100_000 {
        return Err(err());
    }
    let ten_pow = Integer::from(Integer::u_pow_u(10, scale.unsigned_abs() as u32));
    let mut value = if scale >= 0 {
        Rational::from(digits * ten_pow)
    } else {
        Rational::from((digits, ten_pow))
    };
    if negative {
        value = -value;
    }
    Ok(value)
}

/// Parses a comma-separated list of decimals.
pub fn parse_decimal_list(input: &str) -> Result<Vec<Rational>> {
    input
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse_decimal)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!(parse_decimal("0.25").unwrap(), q(1, 4));
        assert_eq!(parse_decimal("-3").unwrap(), q(-3, 1));
        assert_eq!(parse_decimal("1e-9").unwrap(), q(1, 1_000_000_000));
        assert_eq!(parse_decimal("2.5E+3").unwrap(), q(2500, 1));
        assert_eq!(parse_decimal(".5").unwrap(), q(1, 2));
        assert_eq!(parse_decimal("5.").unwrap(), q(5, 1));
        assert_eq!(parse_decimal("1/3").unwrap(), q(1, 3));
        assert_eq!(parse_decimal(" 0.005 ").unwrap(), q(1, 200));
        for bad in ["", ".", "abc", "1e", "0x10", "1/0", "--1", "1.2.3"] {
            assert!(parse_decimal(bad).is_err(), "{bad:?} should be rejected");
        }
    }

    #[test]
    fn params_validation() {
        assert!(PrivacyParams::parse("0.1", "0").is_ok());
        assert!(PrivacyParams::parse("-0.1", "0").is_err());
        assert!(PrivacyParams::parse("0.1", "1").is_err());
        assert!(PrivacyParams::parse("0.1", "-0.001").is_err());
        let p: PrivacyParams = "0.5, 0.01".parse().unwrap();
        assert_eq!(p.epsilon(), &q(1, 2));
    }

    #[test]
    fn instance_aggregates() {
        let inst = CompositionInstance::new(vec![
            PrivacyParams::parse("0.1", "0").unwrap(),
            PrivacyParams::parse("0.2", "0.01").unwrap(),
            PrivacyParams::parse("0.3", "0.02").unwrap(),
        ])
        .unwrap();
        assert_eq!(inst.eps_sum(), &q(3, 5));
        assert_eq!(inst.delta_survival(), &(q(99, 100) * q(98, 100)));
        assert_eq!(Rational::from(inst.eps_mean() * 3u32), *inst.eps_sum());
        assert!(inst.as_homogeneous().is_none());
        assert!(CompositionInstance::new(vec![]).is_err());
    }

    #[test]
    fn survival_is_one_iff_pure() {
        let pure = CompositionInstance::homogeneous(PrivacyParams::parse("1", "0").unwrap(), 4).unwrap();
        assert_eq!(pure.delta_survival(), &Rational::from(1));
        assert_eq!(pure.feasibility_threshold(), 0);
        let approx = CompositionInstance::homogeneous(PrivacyParams::parse("1", "1e-6").unwrap(), 4).unwrap();
        assert!(approx.delta_survival() < &Rational::from(1));
        assert!(approx.delta_survival() > &Rational::new());
    }
}
