use rug::{Float, Rational};

use super::{screen_epsilon_target, GuaranteeResult, Method};
use crate::error::{Error, Result};
use crate::numerics::PrecisionConfig;
use crate::params::{CompositionInstance, PrivacyParams};

/// `(sum eps_i, sum delta_i)`. For identical mechanisms this is `(k eps, k delta)`;
/// otherwise the result is flagged as the heterogeneous extension.
pub fn basic_compose(instance: &CompositionInstance, cfg: &PrecisionConfig) -> GuaranteeResult {
    let delta_sum = instance.deltas().fold(Rational::new(), |acc, d| acc + d);
    let mut result = GuaranteeResult::new(cfg.float(instance.eps_sum()), cfg.float(&delta_sum), Method::Basic, cfg);
    result.vacuous = delta_sum >= 1;
    result.heterogeneous_sum = instance.as_homogeneous().is_none();
    result
}

/// `delta_g` certified by basic composition at `epsilon_g`: `sum delta_i`
/// once `epsilon_g >= sum eps_i`, otherwise nothing (`1`, vacuous).
pub fn basic_delta_of_epsilon(
    instance: &CompositionInstance,
    epsilon_g: &Float,
    cfg: &PrecisionConfig,
) -> Result<GuaranteeResult> {
    screen_epsilon_target(epsilon_g)?;
    let mut result = basic_compose(instance, cfg);
    result.epsilon_g = cfg.float(epsilon_g);
    if *epsilon_g < *instance.eps_sum() {
        result.delta_g = cfg.float(1);
        result.vacuous = true;
    }
    Ok(result)
}

fn advanced_slope(params: &PrivacyParams, k: usize, cfg: &PrecisionConfig) -> Float {
    // k eps (e^eps - 1)
    let prec = cfg.precision_bits;
    let eps = cfg.float(params.epsilon());
    let growth = Float::with_val(prec, eps.exp_m1_ref());
    Float::with_val(prec, &eps * &growth) * k as u64
}

/// Advanced composition of `k` copies of `(eps, delta)` with slack `delta_prime`:
/// `eps_g = sqrt(2k ln(1/delta')) eps + k eps (e^eps - 1)`, `delta_g = k delta + delta'`.
pub fn advanced_compose(
    params: &PrivacyParams,
    k: usize,
    delta_prime: &Rational,
    cfg: &PrecisionConfig,
) -> Result<GuaranteeResult> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if *delta_prime <= 0 || *delta_prime >= 1 {
        return Err(Error::InvalidArgument(format!(
            "delta_prime must lie in (0, 1), got {}",
            delta_prime.to_f64()
        )));
    }
    let prec = cfg.precision_bits;
    let eps = cfg.float(params.epsilon());
    let log_inv = -Float::with_val(prec, delta_prime).ln();
    let radius = Float::with_val(prec, log_inv * (2 * k as u64)).sqrt();
    let epsilon_g = Float::with_val(prec, &radius * &eps) + advanced_slope(params, k, cfg);

    let delta_g = Rational::from(params.delta() * k as u64) + delta_prime;
    let basic = Rational::from(params.epsilon() * k as u64);
    let mut result = GuaranteeResult::new(epsilon_g, cfg.float(&delta_g), Method::Advanced, cfg);
    result.vacuous = result.epsilon_g > basic || delta_g >= 1;
    Ok(result)
}

/// Smallest `delta_g = k delta + delta'` for which advanced composition
/// certifies `epsilon_g`, solving the closed form for `delta'`.
pub fn advanced_delta_of_epsilon(
    params: &PrivacyParams,
    k: usize,
    epsilon_g: &Float,
    cfg: &PrecisionConfig,
) -> Result<GuaranteeResult> {
    screen_epsilon_target(epsilon_g)?;
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let prec = cfg.precision_bits;
    let base = Rational::from(params.delta() * k as u64);
    let mut result = GuaranteeResult::new(cfg.float(epsilon_g), cfg.float(&base), Method::Advanced, cfg);
    if *params.epsilon() == 0 {
        // delta' can be taken arbitrarily small
        result.vacuous = base >= 1;
        return Ok(result);
    }
    let eps = cfg.float(params.epsilon());
    let headroom = Float::with_val(prec, epsilon_g - advanced_slope(params, k, cfg));
    if headroom <= 0 {
        result.delta_g = cfg.float(1);
        result.vacuous = true;
        return Ok(result);
    }
    let r = headroom / eps;
    let exponent = -(Float::with_val(prec, r.square_ref()) / (2 * k as u64));
    let delta_prime = exponent.exp();
    result.delta_g = Float::with_val(prec, &result.delta_g + &delta_prime);
    result.vacuous = result.delta_g >= 1;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> PrecisionConfig {
        PrecisionConfig::default()
    }

    fn p(eps: &str, delta: &str) -> PrivacyParams {
        PrivacyParams::parse(eps, delta).unwrap()
    }

    #[test]
    fn basic_sums() {
        let inst = CompositionInstance::homogeneous(p("0.1", "0.001"), 3).unwrap();
        let r = basic_compose(&inst, &cfg());
        assert!((r.epsilon_g.to_f64() - 0.3).abs() < 1e-15);
        assert!((r.delta_g.to_f64() - 0.003).abs() < 1e-18);
        assert!(!r.heterogeneous_sum && !r.vacuous);

        let single = CompositionInstance::new(vec![p("0.5", "0")]).unwrap();
        let r = basic_compose(&single, &cfg());
        assert_eq!(r.epsilon_g.to_f64(), 0.5);
        assert_eq!(r.delta_g.to_f64(), 0.0);

        let het = CompositionInstance::new(vec![p("0.1", "0"), p("0.2", "0.01"), p("0.3", "0.02")]).unwrap();
        let r = basic_compose(&het, &cfg());
        assert!((r.epsilon_g.to_f64() - 0.6).abs() < 1e-15);
        assert!((r.delta_g.to_f64() - 0.03).abs() < 1e-17);
        assert!(r.heterogeneous_sum);
    }

    #[test]
    fn basic_flags_vacuous_delta() {
        let inst = CompositionInstance::homogeneous(p("0.1", "0.5"), 2).unwrap();
        assert!(basic_compose(&inst, &cfg()).vacuous);
    }

    #[test]
    fn advanced_values() {
        let zero = advanced_compose(&p("0", "0"), 50, &Rational::from((1, 1 << 20)), &cfg()).unwrap();
        assert!(zero.epsilon_g.is_zero());

        let r = advanced_compose(&p("0.1", "0"), 100, &Rational::from((1, 1 << 20)), &cfg()).unwrap();
        let expected = (200.0 * 20.0 * 2f64.ln()).sqrt() * 0.1 + 10.0 * 0.1f64.exp_m1();
        assert!((r.epsilon_g.to_f64() - expected).abs() < 1e-12);
        assert!((r.epsilon_g.to_f64() - 6.317).abs() < 1e-3);
        assert!(!r.vacuous);

        // k = 1 is always worse than the mechanism itself
        let worse = advanced_compose(&p("0.1", "0"), 1, &Rational::from((1, 1000)), &cfg()).unwrap();
        assert!(worse.vacuous);
    }

    #[test]
    fn advanced_rejects_bad_slack() {
        assert!(advanced_compose(&p("0.1", "0"), 3, &Rational::new(), &cfg()).is_err());
        assert!(advanced_compose(&p("0.1", "0"), 3, &Rational::from(-1), &cfg()).is_err());
    }

    #[test]
    fn advanced_inverse_round_trips() {
        let params = p("0.05", "0.0001");
        let dp = Rational::from((1, 1_000_000));
        let fwd = advanced_compose(&params, 200, &dp, &cfg()).unwrap();
        let back = advanced_delta_of_epsilon(&params, 200, &fwd.epsilon_g, &cfg()).unwrap();
        let expected = 200.0 * 0.0001 + 1e-6;
        assert!((back.delta_g.to_f64() - expected).abs() < 1e-15);
    }
}
