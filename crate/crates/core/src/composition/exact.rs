//! Exact optimal composition by summing over all `2^k` subsets.
//!
//! `delta_g(eps_g) = 1 - P + P / prod(1+e^eps_i) * sum_S max{e^{eps(S)} - e^{eps_g} e^{eps(S^c)}, 0}`
//! with `P = prod(1 - delta_i)`.

use rug::{Assign, Float, Rational};

use super::{bisect_least, screen_delta_target, screen_epsilon_target, Bracket, GuaranteeResult, Method};
use crate::error::{Error, Result};
use crate::numerics::{softplus, PrecisionConfig};
use crate::params::CompositionInstance;

pub const DEFAULT_ENUMERATION_LIMIT: usize = 25;

fn check_limit(instance: &CompositionInstance, limit: usize) -> Result<()> {
    if instance.len() > limit || instance.len() >= usize::BITS as usize - 1 {
        return Err(Error::EnumerationTooLarge {
            k: instance.len(),
            limit,
        });
    }
    Ok(())
}

/// `-sum softplus(eps_i) = -ln prod(1 + e^eps_i)`.
fn log_normalizer(eps: &[Float], prec: u32) -> Float {
    eps.iter().fold(Float::new(prec), |acc, e| acc - softplus(e))
}

fn finish_delta(instance: &CompositionInstance, sum: &Float, cfg: &PrecisionConfig) -> Float {
    let prec = cfg.precision_bits;
    let mut delta = cfg.float(instance.feasibility_threshold());
    let survival = cfg.float(instance.delta_survival());
    delta += Float::with_val(prec, &survival * sum);
    delta
}

/// Least `delta_g` at `epsilon_g`, walking all subsets in Gray-code order.
///
/// Each step moves one mechanism in or out of the subset and updates the two
/// running products `e^{eps(S)} / Z` and `e^{eps(S^c)} / Z` by one factor.
pub fn exact_delta_of_epsilon(
    instance: &CompositionInstance,
    epsilon_g: &Float,
    limit: usize,
    cfg: &PrecisionConfig,
) -> Result<Float> {
    screen_epsilon_target(epsilon_g)?;
    check_limit(instance, limit)?;
    let prec = cfg.precision_bits;
    let k = instance.len();
    let eps: Vec<Float> = instance.epsilons().map(|e| cfg.float(e)).collect();
    let grow: Vec<Float> = eps.iter().map(|e| Float::with_val(prec, e.exp_ref())).collect();
    let shrink: Vec<Float> = eps
        .iter()
        .map(|e| Float::with_val(prec, (-e.clone()).exp_ref()))
        .collect();

    let log_z = log_normalizer(&eps, prec);
    let total = cfg.float(instance.eps_sum());
    // S = {} : inside = e^0 / Z, outside = e^T / Z
    let mut inside = Float::with_val(prec, log_z.exp_ref());
    let mut outside = Float::with_val(prec, &total + &log_z).exp();
    let scale = Float::with_val(prec, epsilon_g.exp_ref());

    let mut member = vec![false; k];
    let mut sum = Float::new(prec);
    let mut bound = Float::new(prec);
    let mut gap = Float::new(prec);
    let mut accumulate = |inside: &Float, outside: &Float| {
        bound.assign(&scale * outside);
        if *inside > bound {
            gap.assign(inside - &bound);
            sum += &gap;
        }
    };
    accumulate(&inside, &outside);
    for step in 1u64..(1u64 << k) {
        let i = step.trailing_zeros() as usize;
        if member[i] {
            inside *= &shrink[i];
            outside *= &grow[i];
        } else {
            inside *= &grow[i];
            outside *= &shrink[i];
        }
        member[i] = !member[i];
        accumulate(&inside, &outside);
    }
    Ok(finish_delta(instance, &sum, cfg))
}

/// Subset sums of the two halves of an instance, sorted so that the subset
/// sum over all `2^k` subsets can be evaluated at any `eps_g` with one
/// binary search per left-half subset.
///
/// A subset `S = A u B` contributes iff `eps(A) + eps(B) > (eps_g + T) / 2`;
/// the threshold test is done on exact rational sums.
#[derive(Debug, Clone)]
pub struct SplitSubsetSums {
    total: Rational,
    left: Vec<HalfEntry>,
    /// Right-half subsets sorted by `sum`, with suffix sums of `e^{sum}` and `e^{-sum}`.
    right_sums: Vec<Rational>,
    right_grow_tail: Vec<Float>,
    right_shrink_tail: Vec<Float>,
    cfg: PrecisionConfig,
}

#[derive(Debug, Clone)]
struct HalfEntry {
    sum: Rational,
    /// `e^{sum} / Z`
    inside: Float,
    /// `e^{T - sum} / Z`
    outside: Float,
}

/// All `2^n` subset sums of `eps` with products of `e^{eps_i}` and `e^{-eps_i}`.
fn half_table(eps: &[Rational], cfg: &PrecisionConfig) -> Vec<(Rational, Float, Float)> {
    let prec = cfg.precision_bits;
    let grow: Vec<Float> = eps.iter().map(|e| cfg.float(e).exp()).collect();
    let shrink: Vec<Float> = eps.iter().map(|e| (-cfg.float(e)).exp()).collect();
    let mut table = Vec::with_capacity(1 << eps.len());
    table.push((Rational::new(), Float::with_val(prec, 1), Float::with_val(prec, 1)));
    for (i, e) in eps.iter().enumerate() {
        for j in 0..table.len() {
            let (s, g, h) = &table[j];
            let entry = (
                Rational::from(s + e),
                Float::with_val(prec, g * &grow[i]),
                Float::with_val(prec, h * &shrink[i]),
            );
            table.push(entry);
        }
    }
    table
}

impl SplitSubsetSums {
    pub fn new(instance: &CompositionInstance, limit: usize, cfg: &PrecisionConfig) -> Result<Self> {
        check_limit(instance, limit)?;
        let prec = cfg.precision_bits;
        let eps: Vec<Rational> = instance.epsilons().cloned().collect();
        let (left_eps, right_eps) = eps.split_at(eps.len() / 2);

        let eps_f: Vec<Float> = eps.iter().map(|e| cfg.float(e)).collect();
        let log_z = log_normalizer(&eps_f, prec);
        let total = instance.eps_sum().clone();
        let inv_z = Float::with_val(prec, log_z.exp_ref());
        let outside_base = Float::with_val(prec, cfg.float(&total) + &log_z).exp();

        let left = half_table(left_eps, cfg)
            .into_iter()
            .map(|(sum, grow, shrink)| HalfEntry {
                sum,
                inside: Float::with_val(prec, &grow * &inv_z),
                outside: Float::with_val(prec, &shrink * &outside_base),
            })
            .collect();

        let mut right = half_table(right_eps, cfg);
        right.sort_by(|a, b| a.0.cmp(&b.0));
        let n = right.len();
        let mut right_grow_tail = vec![Float::new(prec); n + 1];
        let mut right_shrink_tail = vec![Float::new(prec); n + 1];
        for j in (0..n).rev() {
            right_grow_tail[j] = Float::with_val(prec, &right_grow_tail[j + 1] + &right[j].1);
            right_shrink_tail[j] = Float::with_val(prec, &right_shrink_tail[j + 1] + &right[j].2);
        }
        let right_sums = right.into_iter().map(|(s, _, _)| s).collect();
        Ok(SplitSubsetSums {
            total,
            left,
            right_sums,
            right_grow_tail,
            right_shrink_tail,
            cfg: *cfg,
        })
    }

    /// `sum_S max{e^{eps(S)} - e^{eps_g} e^{eps(S^c)}, 0} / prod(1 + e^eps_i)`.
    pub fn normalized_sum(&self, epsilon_g: &Float) -> Float {
        let prec = self.cfg.precision_bits;
        let Some(eps_g) = epsilon_g.to_rational() else {
            return Float::new(prec);
        };
        let half_threshold = (eps_g + &self.total) / 2u32;
        let scale = Float::with_val(prec, epsilon_g.exp_ref());
        let mut sum = Float::new(prec);
        let mut need = Rational::new();
        let mut pos = Float::new(prec);
        let mut neg = Float::new(prec);
        for entry in &self.left {
            need.assign(&half_threshold - &entry.sum);
            let j = self.right_sums.partition_point(|s| *s <= need);
            if j == self.right_sums.len() {
                continue;
            }
            pos.assign(&entry.inside * &self.right_grow_tail[j]);
            neg.assign(&entry.outside * &self.right_shrink_tail[j]);
            neg *= &scale;
            if pos > neg {
                pos -= &neg;
                sum += &pos;
            }
        }
        sum
    }

    pub fn delta_at(&self, instance: &CompositionInstance, epsilon_g: &Float) -> Float {
        finish_delta(instance, &self.normalized_sum(epsilon_g), &self.cfg)
    }
}

/// Least `epsilon_g` with `delta_g(epsilon_g) <= delta_g`, bisected over
/// `[0, sum eps_i]` to `2^-target_bits`.
pub fn exact_optimal_epsilon(
    instance: &CompositionInstance,
    delta_g: &Rational,
    limit: usize,
    cfg: &PrecisionConfig,
) -> Result<GuaranteeResult> {
    check_limit(instance, limit)?;
    if screen_delta_target(delta_g)? {
        return Ok(GuaranteeResult::vacuous(delta_g, Method::ExactOptimal, cfg));
    }
    instance.check_feasible(delta_g)?;
    let eps_sum = cfg.float(instance.eps_sum());
    let bracket = if *delta_g == instance.feasibility_threshold() {
        Bracket::point(eps_sum)
    } else {
        let sums = SplitSubsetSums::new(instance, limit, cfg)?;
        bisect_least(cfg.zero(), eps_sum, &cfg.target_width(), |x| {
            sums.delta_at(instance, x) <= *delta_g
        })
    };
    let mut result = GuaranteeResult::new(bracket.upper.clone(), cfg.float(delta_g), Method::ExactOptimal, cfg);
    result.bracket = Some(bracket);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::PrivacyParams;

    fn cfg() -> PrecisionConfig {
        PrecisionConfig::default()
    }

    fn ln(x: u32) -> Rational {
        Float::with_val(256, x).ln().to_rational().unwrap()
    }

    fn ln2_ln3() -> CompositionInstance {
        CompositionInstance::new(vec![
            PrivacyParams::new(ln(2), Rational::new()).unwrap(),
            PrivacyParams::new(ln(3), Rational::new()).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn two_mechanism_example() {
        // only S = {1,2} contributes: (6 - 3 * 1) / 12
        let inst = ln2_ln3();
        let eps_g = cfg().float(&ln(3));
        let gray = exact_delta_of_epsilon(&inst, &eps_g, 25, &cfg()).unwrap();
        assert!((gray.to_f64() - 0.25).abs() < 1e-30);
        let split = SplitSubsetSums::new(&inst, 25, &cfg()).unwrap().delta_at(&inst, &eps_g);
        assert!((split.to_f64() - 0.25).abs() < 1e-30);

        let r = exact_optimal_epsilon(&inst, &Rational::from((1, 4)), 25, &cfg()).unwrap();
        assert!((r.epsilon_g.to_f64() - 3f64.ln()).abs() < 1e-14);
        let b = r.bracket.unwrap();
        assert!(b.width() < cfg().target_width());
    }

    #[test]
    fn beyond_sum_only_delta_mass_remains() {
        let inst = CompositionInstance::new(vec![
            PrivacyParams::parse("0.3", "0.01").unwrap(),
            PrivacyParams::parse("0.5", "0.02").unwrap(),
            PrivacyParams::parse("0.1", "0").unwrap(),
        ])
        .unwrap();
        let eps_g = Float::with_val(128, 0.9);
        let d = exact_delta_of_epsilon(&inst, &eps_g, 25, &cfg()).unwrap();
        assert!((d.to_f64() - (1.0 - 0.99 * 0.98)).abs() < 1e-15);
    }

    #[test]
    fn pure_dp_zero_delta_forces_sum() {
        let inst = CompositionInstance::new(vec![
            PrivacyParams::parse("0.3", "0").unwrap(),
            PrivacyParams::parse("1.2", "0").unwrap(),
        ])
        .unwrap();
        let r = exact_optimal_epsilon(&inst, &Rational::new(), 25, &cfg()).unwrap();
        assert_eq!(r.epsilon_g, cfg().float(Rational::from((3, 2))));
    }

    #[test]
    fn single_mechanism() {
        let inst = CompositionInstance::new(vec![PrivacyParams::parse("0.8", "0.1").unwrap()]).unwrap();
        let r = exact_optimal_epsilon(&inst, &Rational::from((1, 10)), 25, &cfg()).unwrap();
        assert!((r.epsilon_g.to_f64() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn enumeration_limit_enforced() {
        let inst = CompositionInstance::homogeneous(PrivacyParams::parse("0.1", "0").unwrap(), 8).unwrap();
        let err = exact_delta_of_epsilon(&inst, &Float::new(128), 7, &cfg()).unwrap_err();
        assert_eq!(err, Error::EnumerationTooLarge { k: 8, limit: 7 });
        assert!(exact_optimal_epsilon(&inst, &Rational::from((1, 10)), 7, &cfg()).is_err());
    }

    #[test]
    fn infeasible_delta_reports_threshold() {
        let inst = CompositionInstance::homogeneous(PrivacyParams::parse("0.1", "0.1").unwrap(), 2).unwrap();
        match exact_optimal_epsilon(&inst, &Rational::from((1, 10)), 25, &cfg()) {
            Err(Error::InfeasibleDelta { threshold, .. }) => {
                assert_eq!(threshold, Rational::from((19, 100)));
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn gray_and_split_agree() {
        let inst = CompositionInstance::new(
            ["0.05", "0.4", "1.1", "0.7", "0.25", "0.9", "0.33"]
                .iter()
                .zip(["0", "0.001", "0", "0.01", "0", "0.002", "0"])
                .map(|(e, d)| PrivacyParams::parse(e, d).unwrap())
                .collect(),
        )
        .unwrap();
        let split = SplitSubsetSums::new(&inst, 25, &cfg()).unwrap();
        for i in 0..40 {
            let eps_g = Float::with_val(128, i as f64 * 0.1);
            let a = exact_delta_of_epsilon(&inst, &eps_g, 25, &cfg()).unwrap();
            let b = split.delta_at(&inst, &eps_g);
            let diff = Float::with_val(128, &a - &b).abs();
            assert!(diff <= Float::with_val(128, &a * 1e-30), "eps_g = {i}/10");
        }
    }
}
