//! Weighted subset-sum counting under a capacity constraint.
//!
//! `F(r, s) = sum over S in [r] with sum_{i in S} a_i <= s of prod_{i in S} w_i`,
//! filled by `F(r, s) = F(r-1, s) + w_r F(r-1, s - a_r)` with `F(0, s) = 1`.
//! Only one row is kept; it is updated in place from high `s` to low.

use rug::float::Round;
use rug::ops::{AddAssignRound, MulAssignRound};
use rug::{Float, Rational};

use crate::error::{Error, Result};

/// Scalar arithmetic used by the table: exact rationals or floats with one
/// fixed rounding direction.
pub trait KnapsackArithmetic {
    type Value: Clone;

    fn one(&self) -> Self::Value;
    /// `acc += w * x`
    fn add_product(&self, acc: &mut Self::Value, w: &Self::Value, x: &Self::Value);
    /// `acc *= 1 + w`, used when `a_r = 0`.
    fn scale_one_plus(&self, acc: &mut Self::Value, w: &Self::Value);
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExactArithmetic;

impl KnapsackArithmetic for ExactArithmetic {
    type Value = Rational;

    fn one(&self) -> Rational {
        Rational::from(1)
    }

    fn add_product(&self, acc: &mut Rational, w: &Rational, x: &Rational) {
        *acc += Rational::from(w * x);
    }

    fn scale_one_plus(&self, acc: &mut Rational, w: &Rational) {
        *acc *= Rational::from(w + 1u32);
    }
}

/// Every operation rounds in `round`, so with non-negative weights the whole
/// table is a one-sided bound on the exact values.
#[derive(Debug, Clone, Copy)]
pub struct DirectedArithmetic {
    pub prec: u32,
    pub round: Round,
}

impl KnapsackArithmetic for DirectedArithmetic {
    type Value = Float;

    fn one(&self) -> Float {
        Float::with_val(self.prec, 1)
    }

    fn add_product(&self, acc: &mut Float, w: &Float, x: &Float) {
        acc.add_assign_round(w * x, self.round);
    }

    fn scale_one_plus(&self, acc: &mut Float, w: &Float) {
        let (factor, _) = Float::with_val_round(self.prec, w + 1u32, self.round);
        acc.mul_assign_round(&factor, self.round);
    }
}

/// Last row `F(k, s)` for `s = 0..=capacity`.
#[derive(Debug, Clone)]
pub struct KnapsackTable<V> {
    row: Vec<V>,
}

fn check_shape<V>(a: &[u64], w: &[V], capacity: u64) -> Result<usize> {
    if a.len() != w.len() {
        return Err(Error::InvalidArgument(format!(
            "{} levels but {} weights",
            a.len(),
            w.len()
        )));
    }
    usize::try_from(capacity)
        .ok()
        .filter(|c| *c < usize::MAX)
        .ok_or_else(|| Error::TooLarge(format!("capacity {capacity}")))
}

fn update_row<A: KnapsackArithmetic>(arith: &A, row: &mut [A::Value], level: u64, w: &A::Value) {
    if level == 0 {
        for cell in row.iter_mut() {
            arith.scale_one_plus(cell, w);
        }
        return;
    }
    let Ok(level) = usize::try_from(level) else {
        return;
    };
    if level >= row.len() {
        return;
    }
    for s in (level..row.len()).rev() {
        let (low, high) = row.split_at_mut(s);
        arith.add_product(&mut high[0], w, &low[s - level]);
    }
}

impl<V: Clone> KnapsackTable<V> {
    pub fn build<A>(arith: &A, a: &[u64], capacity: u64, w: &[V]) -> Result<Self>
    where
        A: KnapsackArithmetic<Value = V>,
    {
        let cap = check_shape(a, w, capacity)?;
        let mut row = vec![arith.one(); cap + 1];
        for (level, weight) in a.iter().zip(w) {
            update_row(arith, &mut row, *level, weight);
        }
        Ok(KnapsackTable { row })
    }

    /// Two tables over the same levels and capacity, filled in one pass.
    pub fn build_pair<A>(first: (&A, &[V]), second: (&A, &[V]), a: &[u64], capacity: u64) -> Result<(Self, Self)>
    where
        A: KnapsackArithmetic<Value = V>,
    {
        let cap = check_shape(a, first.1, capacity)?;
        check_shape(a, second.1, capacity)?;
        let mut row1 = vec![first.0.one(); cap + 1];
        let mut row2 = vec![second.0.one(); cap + 1];
        for (i, level) in a.iter().enumerate() {
            update_row(first.0, &mut row1, *level, &first.1[i]);
            update_row(second.0, &mut row2, *level, &second.1[i]);
        }
        Ok((KnapsackTable { row: row1 }, KnapsackTable { row: row2 }))
    }

    pub fn capacity(&self) -> u64 {
        self.row.len() as u64 - 1
    }

    /// `F(k, s)`, or `None` past the capacity.
    pub fn get(&self, s: u64) -> Option<&V> {
        usize::try_from(s).ok().and_then(|s| self.row.get(s))
    }

    pub fn row(&self) -> &[V] {
        &self.row
    }
}

/// `F(k, B)` in exact rational arithmetic.
pub fn knapsack_sum(a: &[u64], capacity: u64, w: &[Rational]) -> Result<Rational> {
    let mut table = KnapsackTable::build(&ExactArithmetic, a, capacity, w)?;
    Ok(table.row.pop().expect("row is never empty"))
}

/// `F(k, B)` in floating point, every operation rounded in `round`.
pub fn knapsack_sum_float(a: &[u64], capacity: u64, w: &[Float], prec: u32, round: Round) -> Result<Float> {
    let mut table = KnapsackTable::build(&DirectedArithmetic { prec, round }, a, capacity, w)?;
    Ok(table.row.pop().expect("row is never empty"))
}
