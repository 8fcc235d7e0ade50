//! Decides whether the discretized instance is `(a* eps_0, delta_g)`-DP.
//!
//! With `B = floor((sum a_i - a*) / 2)` and base `b = e^{eps_0}`, the instance
//! is feasible at level `a*` iff
//!
//! `[b^{sum a} F(B; b^{-a_i}) - b^{a*} F(B; b^{a_i})] / prod(1 + b^{a_i}) <= 1 - (1 - delta_g) / prod(1 - delta_i)`.
//!
//! Both knapsack rows are filled once up to the capacity for `a* = 0`, so
//! every level is then decided by two lookups.

use rug::float::Round;
use rug::ops::{DivAssignRound, MulAssignRound, SubAssignRound};
use rug::{Float, Rational};

use super::knapsack::{DirectedArithmetic, ExactArithmetic, KnapsackTable};
use crate::error::{Error, Result};
use crate::numerics::{one_minus, pow_rational, rational_pow};

/// Arithmetic backend for the feasibility test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Arithmetic {
    /// Exact rationals; bit lengths grow with `sum a_i`.
    Exact,
    /// Floats at the working precision with outward rounding.
    #[default]
    Directed,
}

/// Which verdict the directed arithmetic certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Certify {
    /// `true` answers are never wrong: the level is feasible.
    Feasible,
    /// `false` answers are never wrong: the level is infeasible.
    Infeasible,
}

impl Certify {
    /// Rounding for quantities added to the left side, and for those subtracted.
    fn rounding(self) -> (Round, Round) {
        match self {
            Certify::Feasible => (Round::Up, Round::Down),
            Certify::Infeasible => (Round::Down, Round::Up),
        }
    }
}

#[derive(Debug, Clone)]
enum Tables {
    Exact {
        shrink: KnapsackTable<Rational>,
        grow: KnapsackTable<Rational>,
        top: Rational,
        denom: Rational,
        rhs: Rational,
    },
    Directed {
        shrink: KnapsackTable<Float>,
        grow: KnapsackTable<Float>,
        top: Float,
        denom: Float,
        rhs: Float,
        prec: u32,
        lead: Round,
        trail: Round,
    },
}

/// Backend settings shared by every oracle built for one search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleSettings {
    pub arithmetic: Arithmetic,
    pub prec: u32,
    /// Largest knapsack capacity (row length) that will be allocated.
    pub max_capacity: u64,
}

/// Feasibility of every level `a*` for one set of integer levels.
#[derive(Debug, Clone)]
pub struct FeasibilityOracle {
    base: Rational,
    a_total: u64,
    tables: Tables,
}

/// `1 - (1 - delta_g) / prod(1 - delta_i)`, after checking it is non-negative.
fn right_side(deltas: &[Rational], delta_g: &Rational) -> Result<Rational> {
    let survival = deltas.iter().fold(Rational::from(1), |acc, d| acc * one_minus(d));
    let threshold = one_minus(&survival);
    if *delta_g < threshold {
        return Err(Error::infeasible(delta_g, &threshold));
    }
    Ok(one_minus(&(one_minus(delta_g) / survival)))
}

impl FeasibilityOracle {
    pub fn new(
        base: &Rational,
        levels: &[u64],
        deltas: &[Rational],
        delta_g: &Rational,
        settings: &OracleSettings,
        certify: Certify,
    ) -> Result<Self> {
        let OracleSettings {
            arithmetic,
            prec,
            max_capacity,
        } = *settings;
        if levels.len() != deltas.len() {
            return Err(Error::InvalidArgument("levels and deltas differ in length".into()));
        }
        if *base <= 1 {
            return Err(Error::InvalidArgument("grid base must exceed 1".into()));
        }
        let rhs = right_side(deltas, delta_g)?;
        let a_total = levels
            .iter()
            .try_fold(0u64, |acc, a| acc.checked_add(*a))
            .ok_or_else(|| Error::TooLarge("sum of levels overflows".into()))?;
        let capacity = a_total / 2;
        if capacity > max_capacity {
            return Err(Error::TooLarge(format!(
                "knapsack capacity {capacity} exceeds the limit {max_capacity}"
            )));
        }
        let tables = match arithmetic {
            Arithmetic::Exact => {
                let exp_u32 =
                    |a: u64| u32::try_from(a).map_err(|_| Error::TooLarge(format!("level {a} for exact arithmetic")));
                let inv = Rational::from(base.recip_ref());
                let mut shrink_w = Vec::with_capacity(levels.len());
                let mut grow_w = Vec::with_capacity(levels.len());
                let mut denom = Rational::from(1);
                for a in levels {
                    let e = exp_u32(*a)?;
                    let g = rational_pow(base, e);
                    denom *= Rational::from(&g + 1u32);
                    grow_w.push(g);
                    shrink_w.push(rational_pow(&inv, e));
                }
                let (shrink, grow) = KnapsackTable::build_pair(
                    (&ExactArithmetic, &shrink_w[..]),
                    (&ExactArithmetic, &grow_w[..]),
                    levels,
                    capacity,
                )?;
                Tables::Exact {
                    shrink,
                    grow,
                    top: rational_pow(base, exp_u32(a_total)?),
                    denom,
                    rhs,
                }
            }
            Arithmetic::Directed => {
                let (lead, trail) = certify.rounding();
                let inv = Rational::from(base.recip_ref());
                let shrink_w: Vec<Float> = levels.iter().map(|a| pow_rational(&inv, *a, prec, lead)).collect();
                let grow_w: Vec<Float> = levels.iter().map(|a| pow_rational(base, *a, prec, trail)).collect();
                let mut denom = Float::with_val(prec, 1);
                for a in levels {
                    // b^a + 1 with the rounding that makes the quotient move in the lead direction
                    let (factor, _) = Float::with_val_round(prec, pow_rational(base, *a, prec, trail) + 1u32, trail);
                    denom.mul_assign_round(&factor, trail);
                }
                let (shrink, grow) = KnapsackTable::build_pair(
                    (&DirectedArithmetic { prec, round: lead }, &shrink_w[..]),
                    (&DirectedArithmetic { prec, round: trail }, &grow_w[..]),
                    levels,
                    capacity,
                )?;
                let (rhs, _) = Float::with_val_round(prec, &rhs, trail);
                Tables::Directed {
                    shrink,
                    grow,
                    top: pow_rational(base, a_total, prec, lead),
                    denom,
                    rhs,
                    prec,
                    lead,
                    trail,
                }
            }
        };
        Ok(FeasibilityOracle {
            base: base.clone(),
            a_total,
            tables,
        })
    }

    pub fn a_total(&self) -> u64 {
        self.a_total
    }

    /// Whether the discretized instance is `(a_star eps_0, delta_g)`-DP.
    pub fn is_feasible(&self, a_star: u64) -> Result<bool> {
        if a_star >= self.a_total {
            // no subset can contribute
            return Ok(true);
        }
        let capacity = (self.a_total - a_star) / 2;
        match &self.tables {
            Tables::Exact {
                shrink,
                grow,
                top,
                denom,
                rhs,
            } => {
                let e = u32::try_from(a_star).map_err(|_| Error::TooLarge(format!("level {a_star}")))?;
                let lead = Rational::from(top * &shrink.row()[capacity as usize]);
                let trail = rational_pow(&self.base, e) * &grow.row()[capacity as usize];
                let lhs = (lead - trail) / denom;
                Ok(lhs <= *rhs)
            }
            Tables::Directed {
                shrink,
                grow,
                top,
                denom,
                rhs,
                prec,
                lead,
                trail,
            } => {
                let (mut num, _) = Float::with_val_round(*prec, top * &shrink.row()[capacity as usize], *lead);
                let mut sub = pow_rational(&self.base, a_star, *prec, *trail);
                sub.mul_assign_round(&grow.row()[capacity as usize], *trail);
                num.sub_assign_round(&sub, *lead);
                if num <= 0 {
                    return Ok(true);
                }
                num.div_assign_round(denom, *lead);
                Ok(num <= *rhs)
            }
        }
    }

    /// Least level the oracle accepts, by binary search over `[0, sum a_i]`,
    /// together with the greatest level it rejected (if any).
    pub fn least_feasible(&self) -> Result<(u64, Option<u64>)> {
        if self.is_feasible(0)? {
            return Ok((0, None));
        }
        let (mut lo, mut hi) = (0u64, self.a_total);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.is_feasible(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok((hi, Some(lo)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(arithmetic: Arithmetic, prec: u32, max_capacity: u64) -> OracleSettings {
        OracleSettings {
            arithmetic,
            prec,
            max_capacity,
        }
    }

    fn oracle(levels: &[u64], delta_g: Rational, arithmetic: Arithmetic) -> FeasibilityOracle {
        let deltas = vec![Rational::new(); levels.len()];
        FeasibilityOracle::new(
            &Rational::from(2),
            levels,
            &deltas,
            &delta_g,
            &settings(arithmetic, 128, 1 << 20),
            Certify::Feasible,
        )
        .unwrap()
    }

    #[test]
    fn ln2_ln4_example() {
        for arithmetic in [Arithmetic::Exact, Arithmetic::Directed] {
            let o = oracle(&[1, 2], Rational::new(), arithmetic);
            assert!(o.is_feasible(3).unwrap());
            assert!(!o.is_feasible(2).unwrap());
            // S = [k] contributes (8 - 4) / 15
            let o = oracle(&[1, 2], Rational::from((41, 150)), arithmetic);
            assert!(o.is_feasible(2).unwrap());
            let o = oracle(&[1, 2], Rational::from((39, 150)), arithmetic);
            assert!(!o.is_feasible(2).unwrap());
        }
        // an exact tie is feasible, but outward rounding cannot certify it
        let tie = Rational::from((4, 15));
        assert!(oracle(&[1, 2], tie.clone(), Arithmetic::Exact).is_feasible(2).unwrap());
        assert!(!oracle(&[1, 2], tie, Arithmetic::Directed).is_feasible(2).unwrap());
    }

    #[test]
    fn top_level_always_feasible() {
        let o = oracle(&[3, 5, 7], Rational::new(), Arithmetic::Directed);
        assert!(o.is_feasible(15).unwrap());
        assert!(o.is_feasible(40).unwrap());
        assert_eq!(o.least_feasible().unwrap(), (15, Some(14)));
    }

    #[test]
    fn rejects_infeasible_target() {
        let err = FeasibilityOracle::new(
            &Rational::from(2),
            &[1],
            &[Rational::from((1, 10))],
            &Rational::from((1, 20)),
            &settings(Arithmetic::Exact, 128, 100),
            Certify::Feasible,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InfeasibleDelta { .. }));
    }

    #[test]
    fn capacity_limit() {
        let deltas = vec![Rational::new(); 2];
        let err = FeasibilityOracle::new(
            &Rational::from(2),
            &[300, 300],
            &deltas,
            &Rational::new(),
            &settings(Arithmetic::Directed, 64, 100),
            Certify::Feasible,
        )
        .unwrap_err();
        assert!(matches!(err, Error::TooLarge(_)));
    }

    #[test]
    fn directed_modes_bracket_exact() {
        let base = Rational::from((21, 20));
        let levels = [3, 8, 5, 13, 1, 9];
        let deltas: Vec<Rational> = [0, 1, 0, 2, 0, 0].iter().map(|d| Rational::from((*d, 1000))).collect();
        let delta_g = Rational::from((1, 100));
        let build = |arithmetic, certify| {
            FeasibilityOracle::new(
                &base,
                &levels,
                &deltas,
                &delta_g,
                &settings(arithmetic, 128, 1000),
                certify,
            )
            .unwrap()
        };
        let exact = build(Arithmetic::Exact, Certify::Feasible);
        let sure = build(Arithmetic::Directed, Certify::Feasible);
        let maybe = build(Arithmetic::Directed, Certify::Infeasible);
        let mut last = false;
        for a in 0..=40 {
            let e = exact.is_feasible(a).unwrap();
            assert!(!sure.is_feasible(a).unwrap() || e);
            assert!(maybe.is_feasible(a).unwrap() || !e);
            assert!(e || !last, "feasibility must be monotone");
            last = e;
        }
        assert_eq!(exact.least_feasible().unwrap().0, sure.least_feasible().unwrap().0);
    }
}
