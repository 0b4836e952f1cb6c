mod common;

use common::{gradient, instance, quadratic, random_moments, scale};
use proptest::prelude::*;
use semistatic_hedge::fourier::MomentData;
use semistatic_hedge::selection::*;
use semistatic_hedge::solver::{hedging_error, solve_constrained, solve_unconstrained, Constraints};

fn exact(m: &MomentData, d: usize, nonneg: bool) -> (Selection, Selection) {
    let lb = leaps_and_bounds(m, d, nonneg, LeapsOptions::default()).unwrap();
    let bf = brute_force(m, d, nonneg, DEFAULT_BUDGET).unwrap();
    (lb, bf)
}

/// Independent subgradient check of `min A - 2v'B + v'Cv + lambda |v|_1`.
fn lasso_stationarity(m: &MomentData, v: &[f64], lambda: f64, nonneg: bool) -> f64 {
    let g = gradient(m, v);
    let mut worst: f64 = 0.0;
    for (vi, gi) in v.iter().zip(&g) {
        let r = if *vi != 0.0 {
            if nonneg && *vi < 0.0 {
                f64::INFINITY
            } else {
                (gi + lambda * vi.signum()).abs()
            }
        } else if nonneg {
            (-gi - lambda).max(0.0)
        } else {
            (gi.abs() - lambda).max(0.0)
        };
        worst = worst.max(r);
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn leaps_and_bounds_equals_brute_force(m in instance(12), nonneg in any::<bool>()) {
        for d in 0..=m.n() {
            let (lb, bf) = exact(&m, d, nonneg);
            prop_assert!(lb.certified);
            prop_assert_eq!(&lb.support, &bf.support, "d={}", d);
            prop_assert_eq!(lb.solution.eps2.to_bits(), bf.solution.eps2.to_bits(), "d={}", d);
        }
    }

    #[test]
    fn exact_error_is_monotone_and_greedy_is_worse(m in instance(12), nonneg in any::<bool>()) {
        let n = m.n();
        let path = exact_path(&m, n, nonneg, ExactMethod::LeapsAndBounds(LeapsOptions::default()));
        let fwd = greedy_forward(&m, n, nonneg).unwrap();
        let bwd = greedy_backward(&m, nonneg).unwrap();
        let tol = 1e-12 * m.a;
        for d in 0..=n {
            let e = path.entry(d).unwrap();
            prop_assert!(e.note.is_none());
            prop_assert!(e.support.len() <= d);
            if d > 0 {
                prop_assert!(e.eps2 <= path.entry(d - 1).unwrap().eps2 + tol, "d={}", d);
            }
            for g in [&fwd, &bwd] {
                prop_assert!(g.entry(d).unwrap().eps2 >= e.eps2 - tol, "{} d={}", g.method, d);
            }
        }
        for g in [&fwd, &bwd] {
            prop_assert!((g.entry(0).unwrap().eps2 - path.entry(0).unwrap().eps2).abs() <= tol);
            prop_assert!((g.entry(n).unwrap().eps2 - path.entry(n).unwrap().eps2).abs() <= 1e-10 * m.a);
        }
    }

    #[test]
    fn reported_errors_are_reproducible(m in instance(10), nonneg in any::<bool>()) {
        let n = m.n();
        let paths = [
            exact_path(&m, n, nonneg, ExactMethod::BruteForce(DEFAULT_BUDGET)),
            greedy_forward(&m, n, nonneg).unwrap(),
            greedy_backward(&m, nonneg).unwrap(),
        ];
        for p in &paths {
            for e in &p.entries {
                prop_assert!((hedging_error(&e.v, &m) - e.eps2).abs() <= 1e-12 * m.a.max(e.eps2));
                if nonneg {
                    prop_assert!(e.v.iter().all(|&x| x >= -1e-12));
                }
            }
        }
    }

    #[test]
    fn lasso_kkt_holds(m in instance(12), nonneg in any::<bool>(), frac in 1e-4..1.0f64) {
        let lam = frac * lambda_grid(&m, 1, 1.0, nonneg)[0];
        prop_assume!(lam > 0.0);
        let r = lasso(&m, lam, nonneg, None, LassoOptions::default());
        prop_assert!(r.converged);
        let k = lasso_stationarity(&m, &r.v, lam, nonneg);
        prop_assert!(k <= 1e-8 * scale(&m), "stationarity {k}");
        prop_assert!((lasso_kkt(&m, &r.v, lam, nonneg) - k).abs() <= 1e-12 * scale(&m));
        if nonneg {
            prop_assert!(r.v.iter().all(|&x| x >= -1e-12));
        }
    }

    #[test]
    fn lasso_path_entries_satisfy_kkt(m in instance(10), nonneg in any::<bool>()) {
        let grid = lambda_grid(&m, 30, 1e-6, nonneg);
        let path = lasso_path(&m, &grid, nonneg, LassoOptions::default()).unwrap();
        prop_assert_eq!(path.entries.len(), grid.len());
        for e in &path.entries {
            prop_assert!(e.note.is_none());
            let lam = e.lambda.unwrap();
            prop_assert!(lasso_stationarity(&m, &e.v, lam, nonneg) <= 1e-8 * scale(&m));
            prop_assert_eq!(e.d, e.support.len());
        }
    }

    #[test]
    fn large_penalty_gives_zero(m in instance(12), nonneg in any::<bool>(), mult in 1.0..10.0f64) {
        let top = 2.0 * m.b.iter().fold(0.0f64, |s, x| s.max(x.abs()));
        let r = lasso(&m, mult * top, nonneg, None, LassoOptions::default());
        prop_assert!(r.v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn small_penalty_approaches_unconstrained(m in instance(8)) {
        prop_assume!(m.rcond() > 1e-4);
        let u = solve_unconstrained(&m);
        let r = lasso(&m, 1e-9 * scale(&m), false, None, LassoOptions::default());
        prop_assert!(quadratic(&m, &r.v) - u.eps2 <= 1e-7 * scale(&m));
        let c = solve_constrained(&m, &Constraints::NonNegative).unwrap();
        let r = lasso(&m, 1e-9 * scale(&m), true, None, LassoOptions::default());
        prop_assert!(quadratic(&m, &r.v) - c.eps2 <= 1e-7 * scale(&m));
    }
}

#[test]
fn lasso_orthogonal_design_soft_thresholds() {
    let b = vec![0.9, -0.4, 0.15, -1.3];
    let c: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| (i == j) as u8 as f64).collect()).collect();
    let m = MomentData::new(3.0, b.clone(), c, 1.0).unwrap();
    let lam = 0.5;
    let r = lasso(&m, lam, false, None, LassoOptions::default());
    for (v, bi) in r.v.iter().zip(&b) {
        let expect = bi.signum() * (bi.abs() - lam / 2.0).max(0.0);
        assert!((v - expect).abs() < 1e-14, "{v} {expect}");
    }
}

#[test]
fn ties_resolve_to_smallest_support() {
    // two identical assets: both subsets of size one tie exactly
    let c = vec![vec![1.0, 0.5, 0.5], vec![0.5, 1.0, 0.5], vec![0.5, 0.5, 1.0]];
    let m = MomentData::new(2.0, vec![0.7, 0.7, 0.7], c, 1.0).unwrap();
    for d in 1..=2 {
        let (lb, bf) = exact(&m, d, false);
        assert_eq!(lb.support, (0..d).collect::<Vec<_>>());
        assert_eq!(bf.support, lb.support);
    }
    let g = greedy_forward(&m, 1, false).unwrap();
    assert_eq!(g.entry(1).unwrap().support, vec![0]);
}

#[test]
fn budget_is_enforced() {
    let m = random_moments(20, 3, 0.2);
    assert!(brute_force(&m, 10, false, 1000).is_err());
}

#[test]
fn timeout_marks_result_uncertified() {
    let m = random_moments(40, 11, 0.95);
    let s = leaps_and_bounds(&m, 20, false, LeapsOptions { timeout: Some(std::time::Duration::ZERO) }).unwrap();
    assert!(!s.certified);
    assert!(s.support.len() <= 20);
}
