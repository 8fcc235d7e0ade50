use dpcomp_core::approx::{Arithmetic, Certify, FeasibilityOracle, OracleSettings};
use dpcomp_core::numerics::{binomial, ln1p_taylor, log_diff_exp, softplus};
use dpcomp_core::rug::{Float, Rational};
use dpcomp_core::{
    approx_optimal_epsilon, basic_compose, discretize, enumerate_delta, exact_delta_of_epsilon, exact_optimal_epsilon,
    knapsack_sum, CompositionInstance, PrecisionConfig, PrivacyParams,
};
use proptest::prelude::*;

fn cfg() -> PrecisionConfig {
    PrecisionConfig::default()
}

fn params() -> impl Strategy<Value = PrivacyParams> {
    (0u32..=15_000, prop_oneof![Just(0u32), 0u32..=5_000])
        .prop_map(|(e, d)| PrivacyParams::new(Rational::from((e, 10_000)), Rational::from((d, 100_000))).unwrap())
}

fn instance(max_k: usize) -> impl Strategy<Value = CompositionInstance> {
    prop::collection::vec(params(), 1..=max_k).prop_map(|p| CompositionInstance::new(p).unwrap())
}

/// Instance together with a feasible `delta_g` above its threshold.
fn instance_and_target(max_k: usize) -> impl Strategy<Value = (CompositionInstance, Rational)> {
    (instance(max_k), 0u32..=200_000).prop_map(|(inst, gap)| {
        let delta_g = inst.feasibility_threshold() + Rational::from((gap, 1_000_000));
        (inst, delta_g)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softplus_is_increasing(a in -50.0f64..50.0, b in -50.0f64..50.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(softplus(&Float::with_val(128, lo)) <= softplus(&Float::with_val(128, hi)));
    }

    #[test]
    fn log_diff_exp_telescopes(c in -20.0f64..20.0, d1 in 0.0f64..5.0, d2 in 0.0f64..5.0) {
        let c = Float::with_val(128, c);
        let b = Float::with_val(128, &c + d2);
        let a = Float::with_val(128, &b + d1);
        let logs = [log_diff_exp(&a, &b).unwrap(), log_diff_exp(&b, &c).unwrap(), log_diff_exp(&a, &c).unwrap()];
        // a log rounded to 128 bits is off by up to |v| 2^-128 in absolute
        // terms, which exp turns into the same relative error
        let conditioning = logs.iter().map(|v| v.to_f64().abs()).fold(1.0, f64::max);
        let [ab, bc, ac] = logs.map(|v| Float::with_val(256, v.exp_ref()));
        let lhs = Float::with_val(256, &ab + &bc);
        if !ac.is_zero() {
            let rel = Float::with_val(256, &lhs - &ac).abs() / &ac;
            let bound = (Float::with_val(256, 4) >> 127u32) * conditioning;
            prop_assert!(rel <= bound, "rel {} > {}", rel.to_f64(), bound.to_f64());
        }
    }

    #[test]
    fn ln1p_taylor_brackets_log(num in 1u32..1000, den in 1001u32..100_000) {
        let beta = Rational::from((num, den));
        let y = ln1p_taylor(&beta, &Rational::from((1, 1u64 << 40))).unwrap();
        let log = Float::with_val(256, Rational::from(&beta + 1u32)).ln();
        prop_assert!(y >= log.to_rational().unwrap());
        prop_assert!(y <= beta);
    }

    #[test]
    fn pascal_identity(k in 1u64..=64, l in 1u64..=64) {
        prop_assume!(l <= k);
        let lhs = binomial(k, l).unwrap();
        let rhs = binomial(k - 1, l - 1).unwrap() + binomial(k - 1, l).unwrap_or_default();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn knapsack_matches_enumeration(
        items in prop::collection::vec((0u64..8, 1u32..30, 1u32..10), 0..=10),
        capacity in 0u64..40,
    ) {
        let a: Vec<u64> = items.iter().map(|x| x.0).collect();
        let w: Vec<Rational> = items.iter().map(|x| Rational::from((x.1, x.2))).collect();
        let mut brute = Rational::new();
        for mask in 0u32..(1 << a.len()) {
            let mut size = 0;
            let mut prod = Rational::from(1);
            for i in 0..a.len() {
                if mask >> i & 1 == 1 {
                    size += a[i];
                    prod *= &w[i];
                }
            }
            if size <= capacity {
                brute += prod;
            }
        }
        prop_assert_eq!(knapsack_sum(&a, capacity, &w).unwrap(), brute);
    }

    #[test]
    fn oracle_matches_subset_formula(inst in instance(4), u in 0.0f64..=1.0) {
        let eps_g = Float::with_val(128, inst.eps_sum().to_f64() * u);
        let a = exact_delta_of_epsilon(&inst, &eps_g, 25, &cfg()).unwrap();
        let b = enumerate_delta(&inst, &eps_g, 10, &cfg()).unwrap();
        let scale = a.to_f64().max(1e-12);
        prop_assert!((a.to_f64() - b.to_f64()).abs() <= 1e-9 * scale);
    }

    #[test]
    fn optimum_round_trips((inst, delta_g) in instance_and_target(7)) {
        let r = exact_optimal_epsilon(&inst, &delta_g, 25, &cfg()).unwrap();
        let back = exact_delta_of_epsilon(&inst, &r.epsilon_g, 25, &cfg()).unwrap();
        prop_assert!(back <= delta_g);
        let b = r.bracket.unwrap();
        prop_assert!(b.lower <= r.epsilon_g && r.epsilon_g <= b.upper);
        prop_assert!(r.epsilon_g <= *inst.eps_sum());
        prop_assert!(r.epsilon_g <= basic_compose(&inst, &cfg()).epsilon_g);
        if !b.lower.is_zero() || b.upper != 0 {
            // just below the answer the target must be missed
            if b.lower < b.upper {
                let miss = exact_delta_of_epsilon(&inst, &b.lower, 25, &cfg()).unwrap();
                prop_assert!(miss > delta_g);
            }
        }
    }

    #[test]
    fn approx_never_undercuts_exact((inst, delta_g) in instance_and_target(6), eta_pick in 0usize..3) {
        let eta = [Rational::from((3, 10)), Rational::from((1, 10)), Rational::from((1, 20))][eta_pick].clone();
        let approx = approx_optimal_epsilon(&inst, &delta_g, &eta, &cfg()).unwrap();
        let exact = exact_optimal_epsilon(&inst, &delta_g, 25, &cfg()).unwrap();
        let b = exact.bracket.unwrap();
        prop_assert!(approx.epsilon_star >= b.lower);
        let lower = approx.lower.unwrap();
        prop_assert!(lower <= b.upper);
        let bound = Float::with_val(128, inst.eps_sum()) + Float::with_val(128, &eta);
        prop_assert!(approx.epsilon_star <= bound);
    }

    #[test]
    fn feasibility_is_monotone((inst, delta_g) in instance_and_target(6)) {
        let d = discretize(&inst, &Rational::from((3, 10))).unwrap();
        let deltas: Vec<Rational> = inst.deltas().cloned().collect();
        let settings = OracleSettings { arithmetic: Arithmetic::Directed, prec: 128, max_capacity: 1 << 20 };
        let oracle = FeasibilityOracle::new(d.base(), d.levels(), &deltas, &delta_g, &settings, Certify::Feasible).unwrap();
        let mut seen = false;
        for a in 0..=d.a_total() {
            let f = oracle.is_feasible(a).unwrap();
            prop_assert!(f || !seen);
            seen |= f;
        }
        prop_assert!(seen);
    }

    #[test]
    fn output_within_one_grid_step((inst, delta_g) in instance_and_target(8), eta_pick in 0usize..3) {
        let eta = [Rational::from((3, 10)), Rational::from((1, 10)), Rational::from((1, 50))][eta_pick].clone();
        let r = approx_optimal_epsilon(&inst, &delta_g, &eta, &cfg()).unwrap();
        let eps0 = r.discretization.epsilon0(256, dpcomp_core::rug::float::Round::Nearest);
        let low = Float::with_val(256, &eps0 * r.a_star);
        let slack = Float::with_val(256, r.discretization.beta()) - &eps0;
        prop_assert!(r.epsilon_star >= low);
        prop_assert!(Float::with_val(256, &r.epsilon_star - &low) <= slack);
    }
}
