use rug::float::Round;
use rug::{Float, Integer, Rational};

use crate::error::{Error, Result};
use crate::numerics::ln1p_taylor;
use crate::params::CompositionInstance;

/// Grid `eps_0 = ln(1 + beta)` with `e^{eps_0} = 1 + beta` rational, and
/// integer levels `a_i` with `a_i eps_0 >= eps_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretization {
    eta: Rational,
    beta: Rational,
    base: Rational,
    /// Rational `y` with `ln(1 + beta) <= y <= beta`, tight enough that
    /// `a_total * (y - eps_0) <= beta - eps_0`.
    epsilon0_upper: Rational,
    levels: Vec<u64>,
    a_total: u64,
}

fn ceil_u64(r: Rational) -> Result<u64> {
    let c = r.ceil();
    Integer::from(c.numer())
        .to_u64()
        .ok_or_else(|| Error::TooLarge(format!("discretized level {}", c.to_f64())))
}

fn floor_u64(r: Rational) -> Result<u64> {
    let f = r.floor();
    Integer::from(f.numer())
        .to_u64()
        .ok_or_else(|| Error::TooLarge(format!("discretized level {}", f.to_f64())))
}

/// Upper bound on `ln(1 + beta)` close enough that `n` multiples of it stay
/// within `beta - ln(1 + beta)` of `n eps_0`.
fn epsilon0_upper(beta: &Rational, a_total: u64) -> Result<Rational> {
    if *beta < 1 {
        // beta - ln(1+beta) >= beta^2/2 - beta^3/3 >= beta^2/6
        let slack = Rational::from(beta.square_ref()) / (6u64 * a_total.max(1));
        return ln1p_taylor(beta, &slack);
    }
    let base = Rational::from(beta + 1u32);
    let (mut y, _) = Float::with_val_round(256, &base, Round::Up);
    y.ln_round(Round::Up);
    y.to_rational()
        .ok_or_else(|| Error::InvalidArgument("grid spacing is not finite".into()))
}

impl Discretization {
    /// Grid with a caller-chosen `beta > 0` and levels; no accuracy parameter
    /// is attached (`eta = 0`).
    pub fn with_grid(beta: Rational, levels: Vec<u64>) -> Result<Self> {
        if beta <= 0 {
            return Err(Error::InvalidArgument("beta must be positive".into()));
        }
        let a_total = levels
            .iter()
            .try_fold(0u64, |acc, a| acc.checked_add(*a))
            .ok_or_else(|| Error::TooLarge("sum of levels overflows".into()))?;
        let epsilon0_upper = epsilon0_upper(&beta, a_total)?;
        Ok(Discretization {
            eta: Rational::new(),
            base: Rational::from(&beta + 1u32),
            beta,
            epsilon0_upper,
            levels,
            a_total,
        })
    }

    pub fn eta(&self) -> &Rational {
        &self.eta
    }

    pub fn beta(&self) -> &Rational {
        &self.beta
    }

    /// `1 + beta = e^{eps_0}`.
    pub fn base(&self) -> &Rational {
        &self.base
    }

    pub fn epsilon0_upper(&self) -> &Rational {
        &self.epsilon0_upper
    }

    /// `eps_0 = ln(1 + beta)` rounded in direction `round`.
    pub fn epsilon0(&self, prec: u32, round: Round) -> Float {
        let (mut x, _) = Float::with_val_round(prec, &self.base, round);
        x.ln_round(round);
        x
    }

    pub fn levels(&self) -> &[u64] {
        &self.levels
    }

    pub fn a_total(&self) -> u64 {
        self.a_total
    }

    /// Levels `floor(eps_i / y)` on the same grid, with `y` the upper bound on
    /// `eps_0`; each level times `eps_0` is at most `eps_i`.
    pub fn lower_levels(&self, instance: &CompositionInstance) -> Result<Vec<u64>> {
        instance
            .epsilons()
            .map(|e| floor_u64(Rational::from(e / &self.epsilon0_upper)))
            .collect()
    }
}

/// `beta = eta / (k (1 + mean eps) + 1)`, `a_i = ceil(eps_i (1/beta + 1))`.
pub fn discretize(instance: &CompositionInstance, eta: &Rational) -> Result<Discretization> {
    if *eta <= 0 || *eta >= 1 {
        return Err(Error::InvalidArgument(format!(
            "eta must lie in (0, 1), got {}",
            eta.to_f64()
        )));
    }
    let k = instance.len() as u64;
    let denom = Rational::from(instance.eps_mean() + 1u32) * k + 1u32;
    let beta = eta / denom;
    let scale = Rational::from(beta.recip_ref()) + 1u32;
    let levels = instance
        .epsilons()
        .map(|e| ceil_u64(Rational::from(e * &scale)))
        .collect::<Result<Vec<_>>>()?;
    let mut grid = Discretization::with_grid(beta, levels)?;
    grid.eta = eta.clone();
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::PrivacyParams;

    fn inst(eps: &[&str]) -> CompositionInstance {
        CompositionInstance::new(eps.iter().map(|e| PrivacyParams::parse(e, "0").unwrap()).collect()).unwrap()
    }

    #[test]
    fn single_mechanism_levels() {
        let d = discretize(&inst(&["0.1"]), &Rational::from((1, 10))).unwrap();
        assert_eq!(*d.beta(), Rational::from((1, 21)));
        assert_eq!(d.levels(), &[3]);
        assert_eq!(d.a_total(), 3);
        assert_eq!(*d.base(), Rational::from((22, 21)));
    }

    #[test]
    fn zero_epsilons_give_zero_levels() {
        let d = discretize(&inst(&["0", "0", "0"]), &Rational::from((1, 2))).unwrap();
        assert_eq!(d.levels(), &[0, 0, 0]);
        assert_eq!(d.a_total(), 0);
    }

    #[test]
    fn rejects_eta_out_of_range() {
        let i = inst(&["0.1"]);
        assert!(discretize(&i, &Rational::new()).is_err());
        assert!(discretize(&i, &Rational::from(1)).is_err());
    }

    #[test]
    fn grid_invariants() {
        let i = inst(&["0.05", "1.3", "0.7", "0", "2"]);
        for eta in [(3, 10), (1, 10), (1, 50)] {
            let d = discretize(&i, &Rational::from(eta)).unwrap();
            let eps0_lo = d.epsilon0(256, Round::Down);
            let eps0_hi = d.epsilon0(256, Round::Up);
            let beta = Float::with_val(256, d.beta());
            assert!(Float::with_val(256, &beta / 2u32) <= eps0_lo && eps0_hi <= beta);
            assert!(*d.epsilon0_upper() >= eps0_lo.to_rational().unwrap());
            assert!(d.epsilon0_upper() <= d.beta());
            for (a, e) in d.levels().iter().zip(i.epsilons()) {
                let grid = Float::with_val(256, &eps0_lo * *a);
                assert!(grid >= *e);
                let slack = Rational::from(e + 1u32) * d.beta() + e;
                assert!(Float::with_val(256, &eps0_hi * *a) <= slack);
            }
            let n = d.a_total();
            let over = Rational::from(d.epsilon0_upper() * n);
            let allowed = Float::with_val(256, &eps0_hi * n) + &beta - &eps0_hi;
            assert!(over <= allowed.to_rational().unwrap());
            for (b, e) in d.lower_levels(&i).unwrap().iter().zip(i.epsilons()) {
                assert!(Float::with_val(256, &eps0_hi * *b) <= *e);
            }
        }
    }
}
