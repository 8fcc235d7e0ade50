//! Closed-form and exact composition bounds.

mod closed_form;
mod exact;
mod homogeneous;

use std::fmt;
use std::str::FromStr;

use rug::{Float, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::PrecisionConfig;

pub use closed_form::{advanced_compose, advanced_delta_of_epsilon, basic_compose, basic_delta_of_epsilon};
pub use exact::{exact_delta_of_epsilon, exact_optimal_epsilon, SplitSubsetSums, DEFAULT_ENUMERATION_LIMIT};
pub use homogeneous::{homogeneous_delta_of_epsilon, homogeneous_optimal_epsilon, HomogeneousCurve};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Basic,
    Advanced,
    HomogeneousOptimal,
    ExactOptimal,
    ApproxOptimal,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Basic,
        Method::Advanced,
        Method::HomogeneousOptimal,
        Method::ExactOptimal,
        Method::ApproxOptimal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Basic => "basic",
            Method::Advanced => "advanced",
            Method::HomogeneousOptimal => "homogeneous-optimal",
            Method::ExactOptimal => "exact-optimal",
            Method::ApproxOptimal => "approx-optimal",
        }
    }

    /// Whether the method computes the optimal composition (possibly
    /// approximately, from above).
    pub fn is_optimal(self) -> bool {
        matches!(
            self,
            Method::HomogeneousOptimal | Method::ExactOptimal | Method::ApproxOptimal
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}")))
    }
}

/// Closed interval known to contain the quantity being searched for.
#[derive(Debug, Clone, PartialEq)]
pub struct Bracket {
    pub lower: Float,
    pub upper: Float,
}

impl Bracket {
    pub fn point(x: Float) -> Self {
        Bracket {
            lower: x.clone(),
            upper: x,
        }
    }

    pub fn width(&self) -> Float {
        Float::with_val(self.upper.prec(), &self.upper - &self.lower)
    }
}

/// A computed `(epsilon_g, delta_g)` guarantee.
#[derive(Debug, Clone, PartialEq)]
pub struct GuaranteeResult {
    pub epsilon_g: Float,
    pub delta_g: Float,
    pub method: Method,
    pub bracket: Option<Bracket>,
    pub precision: PrecisionConfig,
    /// The guarantee says nothing (`delta_g >= 1`, or a closed form that is
    /// worse than summing).
    pub vacuous: bool,
    /// Basic composition applied to mechanisms with differing parameters.
    pub heterogeneous_sum: bool,
}

impl GuaranteeResult {
    pub fn new(epsilon_g: Float, delta_g: Float, method: Method, cfg: &PrecisionConfig) -> Self {
        GuaranteeResult {
            epsilon_g,
            delta_g,
            method,
            bracket: None,
            precision: *cfg,
            vacuous: false,
            heterogeneous_sum: false,
        }
    }

    /// `epsilon_g = 0` reported for a requested `delta_g >= 1`.
    pub fn vacuous(delta_g: &Rational, method: Method, cfg: &PrecisionConfig) -> Self {
        let zero = cfg.zero();
        let mut result = GuaranteeResult::new(zero.clone(), cfg.float(delta_g), method, cfg);
        result.bracket = Some(Bracket::point(zero));
        result.vacuous = true;
        result
    }
}

/// Rejects negative targets; `Ok(true)` means the request is vacuous.
pub(crate) fn screen_delta_target(delta_g: &Rational) -> Result<bool> {
    if *delta_g < 0 {
        return Err(Error::InvalidArgument(format!(
            "delta_g must be non-negative, got {}",
            delta_g.to_f64()
        )));
    }
    Ok(*delta_g >= 1)
}

pub(crate) fn screen_epsilon_target(epsilon_g: &Float) -> Result<()> {
    if epsilon_g.is_nan() || *epsilon_g < 0 {
        return Err(Error::InvalidArgument("epsilon_g must be a non-negative number".into()));
    }
    Ok(())
}

/// Least point of `[lo, hi]` where a monotone predicate (false below, true
/// above) holds, to interval width `width`. `feasible(hi)` must be true.
pub(crate) fn bisect_least(lo: Float, hi: Float, width: &Float, mut feasible: impl FnMut(&Float) -> bool) -> Bracket {
    if feasible(&lo) {
        return Bracket::point(lo);
    }
    let (mut lo, mut hi) = (lo, hi);
    let prec = hi.prec();
    let mut mid = Float::new(prec);
    loop {
        let gap = Float::with_val(prec, &hi - &lo);
        if gap < *width {
            break;
        }
        rug::Assign::assign(&mut mid, &lo + &hi);
        mid >>= 1;
        if mid <= lo || mid >= hi {
            // interval already one ulp wide
            break;
        }
        if feasible(&mid) {
            std::mem::swap(&mut hi, &mut mid);
        } else {
            std::mem::swap(&mut lo, &mut mid);
        }
    }
    Bracket { lower: lo, upper: hi }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
            assert_eq!(m.to_string(), m.as_str());
        }
        assert!("auto".parse::<Method>().is_err());
    }

    #[test]
    fn bisect_finds_threshold() {
        let width = Float::with_val(128, 1) >> 60u32;
        let target = Float::with_val(128, 0.3);
        let b = bisect_least(Float::with_val(128, 0), Float::with_val(128, 1), &width, |x| {
            *x >= target
        });
        assert!(b.lower < target && b.upper >= target);
        assert!(b.width() < width);
    }
}
