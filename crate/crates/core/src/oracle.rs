//! The four-outcome mechanism that is worst case for composition, and a
//! brute-force evaluation of the composed privacy curve over its `4^k`
//! product outcomes.
//!
//! For input bit `b` and `alpha = 1 - delta`:
//!
//! | outcome | `b = 0`                    | `b = 1`                    |
//! |---------|----------------------------|----------------------------|
//! | 0       | `delta`                    | `0`                        |
//! | 1       | `alpha e^eps / (1 + e^eps)`| `alpha / (1 + e^eps)`      |
//! | 2       | `alpha / (1 + e^eps)`      | `alpha e^eps / (1 + e^eps)`|
//! | 3       | `0`                        | `delta`                    |

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rug::{Assign, Float};

use crate::composition::screen_epsilon_target;
use crate::error::{Error, Result};
use crate::numerics::PrecisionConfig;
use crate::params::{CompositionInstance, PrivacyParams};

pub const DEFAULT_RR_ENUMERATION_LIMIT: usize = 10;

/// Output distributions of the mechanism on inputs 0 and 1.
#[derive(Debug, Clone, PartialEq)]
pub struct RrDistribution {
    pub params: PrivacyParams,
    pub pmf0: [Float; 4],
    pub pmf1: [Float; 4],
}

impl RrDistribution {
    pub fn new(params: &PrivacyParams, cfg: &PrecisionConfig) -> Self {
        let prec = cfg.precision_bits;
        let eps = cfg.float(params.epsilon());
        let delta = cfg.float(params.delta());
        let alpha = Float::with_val(prec, 1 - &delta);
        // e^eps / (1 + e^eps) = 1 / (1 + e^-eps)
        let neg = Float::with_val(prec, -&eps);
        let high_share = Float::with_val(prec, neg.exp_ref()) + 1u32;
        let high_share = high_share.recip();
        let low_share = Float::with_val(prec, 1 - &high_share);
        let high = Float::with_val(prec, &alpha * &high_share);
        let low = Float::with_val(prec, &alpha * &low_share);
        let zero = Float::new(prec);
        RrDistribution {
            params: params.clone(),
            pmf0: [delta.clone(), high.clone(), low.clone(), zero.clone()],
            pmf1: [zero, low, high, delta],
        }
    }

    pub fn pmf(&self, bit: bool) -> &[Float; 4] {
        if bit {
            &self.pmf1
        } else {
            &self.pmf0
        }
    }

    /// Draw one outcome for input `bit` from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, bit: bool, rng: &mut R) -> u8 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (outcome, p) in self.pmf(bit).iter().enumerate() {
            acc += p.to_f64();
            if u < acc {
                return outcome as u8;
            }
        }
        // u landed in the rounding gap at the top; take the last outcome with mass
        self.pmf(bit).iter().rposition(|p| !p.is_zero()).unwrap_or(3) as u8
    }
}

/// Row of the mechanism's distribution for input `bit`.
pub fn rr_pmf(bit: bool, params: &PrivacyParams, cfg: &PrecisionConfig) -> [Float; 4] {
    let dist = RrDistribution::new(params, cfg);
    if bit {
        dist.pmf1
    } else {
        dist.pmf0
    }
}

/// Outcome number `draw` of the stream seeded by `seed`. The stream is
/// ChaCha20, which is counter based, so any draw can be addressed directly.
pub fn rr_sample(bit: bool, params: &PrivacyParams, seed: u64, draw: u64) -> u8 {
    let dist = RrDistribution::new(params, &PrecisionConfig::default());
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    // one f64 consumes two 32-bit words
    rng.set_word_pos(u128::from(draw) * 2);
    dist.sample(bit, &mut rng)
}

/// Draws `0..count` of the stream seeded by `seed`; element `i` equals
/// `rr_sample(bit, params, seed, i)`.
pub fn rr_samples(bit: bool, params: &PrivacyParams, seed: u64, count: usize) -> Vec<u8> {
    let dist = RrDistribution::new(params, &PrecisionConfig::default());
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..count).map(|_| dist.sample(bit, &mut rng)).collect()
}

/// `sum_x max{P0(x) - e^{eps_g} P1(x), 0}` over all `4^k` outcomes of the
/// product mechanism.
pub fn enumerate_delta(
    instance: &CompositionInstance,
    epsilon_g: &Float,
    limit: usize,
    cfg: &PrecisionConfig,
) -> Result<Float> {
    screen_epsilon_target(epsilon_g)?;
    let k = instance.len();
    if k > limit || k > 31 {
        return Err(Error::EnumerationTooLarge { k, limit });
    }
    let prec = cfg.precision_bits;
    let dists: Vec<RrDistribution> = instance.params().iter().map(|p| RrDistribution::new(p, cfg)).collect();
    let scale = Float::with_val(prec, epsilon_g.exp_ref());

    // prefix products over the first i digits, odometer on the last digit
    let mut digits = vec![0usize; k];
    let mut p0 = vec![Float::with_val(prec, 1); k + 1];
    let mut p1 = vec![Float::with_val(prec, 1); k + 1];
    let refill = |from: usize, digits: &[usize], p0: &mut [Float], p1: &mut [Float]| {
        for i in from..k {
            let (head, tail) = p0.split_at_mut(i + 1);
            tail[0].assign(&head[i] * &dists[i].pmf0[digits[i]]);
            let (head, tail) = p1.split_at_mut(i + 1);
            tail[0].assign(&head[i] * &dists[i].pmf1[digits[i]]);
        }
    };
    refill(0, &digits, &mut p0, &mut p1);

    let mut sum = Float::new(prec);
    let mut bound = Float::new(prec);
    loop {
        bound.assign(&scale * &p1[k]);
        if p0[k] > bound {
            sum += &p0[k];
            sum -= &bound;
        }
        let Some(j) = digits.iter().rposition(|d| *d < 3) else {
            break;
        };
        digits[j] += 1;
        for d in &mut digits[j + 1..] {
            *d = 0;
        }
        refill(j, &digits, &mut p0, &mut p1);
    }
    Ok(sum)
}
