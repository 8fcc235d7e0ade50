//! Precision-controlled scalar primitives.
//!
//! Every composition routine works on [`rug::Float`] values whose mantissa
//! width comes from a [`PrecisionConfig`]. The exponent range of MPFR floats is
//! wide enough that products of thousands of `e^eps` factors neither overflow
//! nor underflow, so linear-domain accumulation is safe wherever the
//! summands are non-negative. Log-domain values use `-inf` for an exact zero.

use std::cmp::Ordering;

use rug::float::Round;
use rug::ops::{Pow, PowAssignRound};
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Guard bits required between the working precision and the target precision.
pub const GUARD_BITS: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundingMode {
    Nearest,
    TowardPlusInfinity,
    TowardMinusInfinity,
}

impl RoundingMode {
    pub fn to_round(self) -> Round {
        match self {
            RoundingMode::Nearest => Round::Nearest,
            RoundingMode::TowardPlusInfinity => Round::Up,
            RoundingMode::TowardMinusInfinity => Round::Down,
        }
    }
}

/// Working precision (`precision_bits`) and requested output precision
/// (`target_bits`, the number of correct bits after the binary point that
/// searches refine to).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrecisionConfig {
    pub precision_bits: u32,
    pub target_bits: u32,
    pub rounding_mode: RoundingMode,
}

impl Default for PrecisionConfig {
    fn default() -> Self {
        PrecisionConfig {
            precision_bits: 128,
            target_bits: 53,
            rounding_mode: RoundingMode::Nearest,
        }
    }
}

impl PrecisionConfig {
    pub fn new(precision_bits: u32, target_bits: u32, rounding_mode: RoundingMode) -> Result<Self> {
        let config = PrecisionConfig {
            precision_bits,
            target_bits,
            rounding_mode,
        };
        config.validate()?;
        Ok(config)
    }

    /// Default target precision with a custom working precision.
    pub fn with_precision_bits(precision_bits: u32) -> Result<Self> {
        Self::new(precision_bits, Self::default().target_bits, RoundingMode::Nearest)
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_bits < 1 {
            return Err(Error::InvalidArgument("target_bits must be at least 1".into()));
        }
        if u64::from(self.precision_bits) < u64::from(self.target_bits) + u64::from(GUARD_BITS) {
            return Err(Error::InvalidArgument(format!(
                "precision_bits = {} must be at least target_bits + {GUARD_BITS} = {}",
                self.precision_bits,
                u64::from(self.target_bits) + u64::from(GUARD_BITS)
            )));
        }
        if self.precision_bits > rug::float::prec_max() {
            return Err(Error::InvalidArgument("precision_bits exceeds the MPFR maximum".into()));
        }
        Ok(())
    }

    pub fn round(&self) -> Round {
        self.rounding_mode.to_round()
    }

    pub fn zero(&self) -> Float {
        Float::new(self.precision_bits)
    }

    /// `value` rounded to the working precision with the configured mode.
    pub fn float<T>(&self, value: T) -> Float
    where
        Float: rug::Assign<T> + rug::ops::AssignRound<T, Round = Round, Ordering = Ordering>,
    {
        Float::with_val_round(self.precision_bits, value, self.round()).0
    }

    /// `2^-target_bits`, the width at which bisections stop.
    pub fn target_width(&self) -> Float {
        Float::with_val(self.precision_bits, 1) >> self.target_bits
    }
}

/// `ln(1 + e^x)`, evaluated as `x + ln(1 + e^-x)` for positive `x`.
pub fn softplus(x: &Float) -> Float {
    let prec = x.prec();
    if x.is_infinite() {
        return if x.is_sign_positive() {
            x.clone()
        } else {
            Float::new(prec)
        };
    }
    if x.is_sign_positive() && !x.is_zero() {
        let tail = Float::with_val(prec, -x).exp().ln_1p();
        Float::with_val(prec, x + tail)
    } else {
        Float::with_val(prec, x.exp_ref()).ln_1p()
    }
}

/// `ln(e^a - e^b)` for `a >= b`; `-inf` when `a == b`.
pub fn log_diff_exp(a: &Float, b: &Float) -> Result<Float> {
    let prec = a.prec().max(b.prec());
    if a.is_nan() || b.is_nan() {
        return Err(Error::InvalidArgument("log_diff_exp of NaN".into()));
    }
    if a < b {
        return Err(Error::InvalidArgument(
            "log_diff_exp requires a >= b; clamp the difference to zero first".into(),
        ));
    }
    if b.is_infinite() && b.is_sign_negative() {
        return Ok(Float::with_val(prec, a));
    }
    if a == b {
        return Ok(Float::with_val(prec, rug::float::Special::NegInfinity));
    }
    // a + ln(1 - e^(b - a)) = a + ln(-expm1(b - a)), with guard bits so the
    // result is rounded once
    let work = prec + GUARD_BITS;
    let gap = Float::with_val(work, b - a);
    let one_minus = -gap.exp_m1();
    Ok(Float::with_val(prec, a + one_minus.ln()))
}

/// `ln(e^a + e^b)`, with `-inf` as the additive identity.
pub fn log_sum_exp(a: &Float, b: &Float) -> Float {
    let prec = a.prec().max(b.prec());
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo.is_infinite() && lo.is_sign_negative() {
        return Float::with_val(prec, hi);
    }
    let gap = Float::with_val(prec, lo - hi);
    Float::with_val(prec, hi + gap.exp().ln_1p())
}

/// Rational over-approximation `y` of `ln(1 + beta)` with
/// `ln(1 + beta) <= y <= beta` and `y - ln(1 + beta) <= tolerance`.
///
/// Uses partial sums of `beta - beta^2/2 + beta^3/3 - ...` that stop after a
/// positive term, which bound the logarithm from above. The remainder after
/// `n` terms is at most `beta^(n+1)/(n+1)`.
pub fn ln1p_taylor(beta: &Rational, tolerance: &Rational) -> Result<Rational> {
    if *beta <= 0 || *beta >= 1 {
        return Err(Error::InvalidArgument(format!(
            "ln1p_taylor needs 0 < beta < 1, got {}",
            beta.to_f64()
        )));
    }
    if *tolerance <= 0 {
        return Err(Error::InvalidArgument("ln1p_taylor tolerance must be positive".into()));
    }
    let mut sum = Rational::new();
    let mut power = beta.clone();
    let mut n: u32 = 1;
    loop {
        let term = Rational::from(&power / n);
        if n % 2 == 1 {
            sum += term;
        } else {
            sum -= term;
        }
        power *= beta;
        if n % 2 == 1 {
            let remainder = Rational::from(&power / (n + 1));
            if remainder <= *tolerance {
                return Ok(sum);
            }
        }
        n += 1;
    }
}

/// Exact binomial coefficient `C(k, l)`.
pub fn binomial(k: u64, l: u64) -> Result<Integer> {
    if l > k {
        return Err(Error::InvalidArgument(format!("binomial({k}, {l}) has l > k")));
    }
    let l = l.min(k - l);
    let mut acc = Integer::from(1);
    for i in 0..l {
        acc *= k - i;
        acc.div_exact_mut(&Integer::from(i + 1));
    }
    Ok(acc)
}

/// `e^r` for a rational exponent, correctly rounded in direction `round`.
pub fn exp_rational(r: &Rational, prec: u32, round: Round) -> Float {
    // exp is increasing, so rounding the argument the same way keeps the bound.
    let (mut x, _) = Float::with_val_round(prec, r, round);
    x.exp_round(round);
    x
}

/// `base^exp` for a positive rational base, rounded in direction `round`.
pub fn pow_rational(base: &Rational, exp: u64, prec: u32, round: Round) -> Float {
    let (mut x, _) = Float::with_val_round(prec, base, round);
    x.pow_assign_round(&Integer::from(exp), round);
    x
}

/// `1 - r` for rational `r`.
pub fn one_minus(r: &Rational) -> Rational {
    Rational::from(1 - r)
}

/// `2^-bits` as an exact rational.
pub fn dyadic(bits: u32) -> Rational {
    Rational::from((1, Integer::from(1) << bits))
}

/// Exact rational product `prod (1 - d_i)`.
pub fn survival_product<'a>(deltas: impl IntoIterator<Item = &'a Rational>) -> Rational {
    deltas.into_iter().fold(Rational::from(1), |acc, d| acc * one_minus(d))
}

/// `base^n` as an exact rational.
pub fn rational_pow(base: &Rational, n: u32) -> Rational {
    Rational::from(base.pow(n))
}
