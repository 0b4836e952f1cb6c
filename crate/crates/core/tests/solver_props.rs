mod common;

use common::{gradient, instance, quadratic, random_moments, scale};
use proptest::prelude::*;
use semistatic_hedge::fourier::MomentData;
use semistatic_hedge::solver::*;

fn cross_terms(m: &MomentData, new: usize) -> (MomentData, Vec<f64>, f64, f64) {
    let keep: Vec<usize> = (0..m.n()).filter(|&i| i != new).collect();
    let sub = m.subset(&keep);
    let k: Vec<f64> = keep.iter().map(|&i| m.c[new][i]).collect();
    (sub, k, m.b[new], m.c[new][new])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reported_eps2_matches_hedging_error(m in instance(12)) {
        let s = solve_unconstrained(&m);
        prop_assert!((hedging_error(&s.v, &m) - s.eps2).abs() <= 1e-12 * m.a.max(s.eps2));
        prop_assert!((quadratic(&m, &s.v).max(0.0) - s.eps2).abs() <= 1e-9 * scale(&m));
        let c = solve_constrained(&m, &Constraints::NonNegative).unwrap();
        prop_assert!((hedging_error(&c.v, &m) - c.eps2).abs() <= 1e-12 * m.a.max(c.eps2));
    }

    #[test]
    fn unconstrained_solution_is_stationary(m in instance(12)) {
        let s = solve_unconstrained(&m);
        if m.rcond() > 1e-8 {
            let g = gradient(&m, &s.v);
            prop_assert!(g.iter().all(|x| x.abs() <= 1e-8 * scale(&m)), "{g:?}");
        }
    }

    #[test]
    fn superset_never_worse(m in instance(12), drop in any::<prop::sample::Index>()) {
        prop_assume!(m.n() >= 2);
        let j = drop.index(m.n());
        let keep: Vec<usize> = (0..m.n()).filter(|&i| i != j).collect();
        let full = solve_unconstrained(&m);
        let sub = solve_unconstrained(&m.subset(&keep));
        prop_assert!(full.eps2 <= sub.eps2 + 1e-10 * m.a);
        let full = solve_constrained(&m, &Constraints::NonNegative).unwrap();
        let sub = solve_constrained(&m.subset(&keep), &Constraints::NonNegative).unwrap();
        prop_assert!(full.eps2 <= sub.eps2 + 1e-10 * m.a);
    }

    #[test]
    fn pinv_agrees_when_well_conditioned(m in instance(10)) {
        prop_assume!(m.rcond() > 1e-8);
        let a = solve_unconstrained(&m);
        let b = solve_pinv(&m);
        let vmax = a.v.iter().fold(1.0f64, |s, x| s.max(x.abs()));
        for (x, y) in a.v.iter().zip(&b.v) {
            prop_assert!((x - y).abs() <= 1e-8 * vmax);
        }
    }

    #[test]
    fn nonneg_qp_kkt(m in instance(12)) {
        let s = solve_constrained(&m, &Constraints::NonNegative).unwrap();
        let g = gradient(&m, &s.v);
        let tol = 1e-8 * scale(&m);
        for (vi, gi) in s.v.iter().zip(&g) {
            prop_assert!(*vi >= -1e-12);
            if *vi > 0.0 {
                prop_assert!(gi.abs() <= tol, "active gradient {gi}");
            } else {
                prop_assert!(*gi >= -tol, "negative multiplier {gi}");
            }
        }
        prop_assert!(s.kkt_residual <= tol);
        let u = solve_unconstrained(&m);
        prop_assert!(s.eps2 >= u.eps2 - 1e-10 * m.a);
    }

    #[test]
    fn general_constraints_kkt(m in instance(8), seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = m.n();
        let rows: Vec<Vec<f64>> = (0..rng.gen_range(1..=n)).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let s = solve_constrained(&m, &Constraints::General(rows.clone())).unwrap();
        for p in &rows {
            let pv: f64 = p.iter().zip(&s.v).map(|(a, b)| a * b).sum();
            prop_assert!(pv >= -1e-10);
        }
        prop_assert!(s.kkt_residual <= 1e-8 * scale(&m));
        // no feasible point along a small step toward the unconstrained optimum improves
        let u = solve_unconstrained(&m);
        for t in [1e-3, 1e-2, 0.1] {
            let w: Vec<f64> = s.v.iter().zip(&u.v).map(|(a, b)| a + t * (b - a)).collect();
            let feasible = rows.iter().all(|p| p.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() >= 0.0);
            if feasible {
                prop_assert!(quadratic(&m, &w) >= s.eps2 - 1e-9 * scale(&m));
            }
        }
    }

    #[test]
    fn identity_rows_match_nonneg(m in instance(8)) {
        let n = m.n();
        let eye: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
        let a = solve_constrained(&m, &Constraints::NonNegative).unwrap();
        let b = solve_constrained(&m, &Constraints::General(eye)).unwrap();
        prop_assert!((a.eps2 - b.eps2).abs() <= 1e-10 * scale(&m));
    }

    #[test]
    fn rhc_matches_direct_resolve(m in instance(12), new in any::<prop::sample::Index>()) {
        prop_assume!(m.n() >= 2);
        let j = new.index(m.n());
        let (sub, k, cov0, var) = cross_terms(&m, j);
        let rhc = relative_hedge_contribution(&sub, &k, cov0, var).unwrap();
        prop_assert!((0.0..=1.0).contains(&rhc));
        let before = solve_unconstrained(&sub).eps2;
        let after = solve_unconstrained(&m).eps2;
        prop_assume!(before > 1e-6 * m.a);
        let direct = (before - after) / before;
        prop_assert!((rhc - direct).abs() <= 1e-10, "rhc {rhc} direct {direct}");
    }

    #[test]
    fn uncorrelated_asset_contributes_nothing(m in instance(8)) {
        let k = vec![0.0; m.n()];
        prop_assert_eq!(relative_hedge_contribution(&m, &k, 0.0, 1.0).unwrap(), 0.0);
    }
}

#[test]
fn swap_strike_moves_capital_only() {
    let m = random_moments(5, 7, 0.3);
    let mut shifted = m.clone();
    shifted.swap_k = Some(m.k_star - 0.01);
    let a = solve_unconstrained(&m);
    let b = solve_unconstrained(&shifted);
    assert_eq!(a.v, b.v);
    assert_eq!(a.eps2, b.eps2);
    assert_eq!(a.c, 0.0);
    assert!((b.c - 0.01).abs() < 1e-15);
}

#[test]
fn rhc_on_larger_random_subsets() {
    for seed in 0..20 {
        let m = random_moments(6, seed, 0.5);
        let (sub, k, cov0, var) = cross_terms(&m, 5);
        let rhc = relative_hedge_contribution(&sub, &k, cov0, var).unwrap();
        let before = solve_unconstrained(&sub).eps2;
        let after = solve_unconstrained(&m).eps2;
        assert!((rhc - (before - after) / before).abs() <= 1e-10, "seed {seed}");
    }
}
