//! Checks on the 21-strike grid at the stylized parameters. The moments are
//! assembled once at the default quadrature and cached under the target dir.

use std::sync::OnceLock;

use semistatic_hedge::claims::ClaimSet;
use semistatic_hedge::experiments::put_dominance;
use semistatic_hedge::fourier::{MomentCache, MomentData, QuadratureConfig};
use semistatic_hedge::heston::HestonParams;
use semistatic_hedge::mc::{realized_error, SimConfig};
use semistatic_hedge::selection::*;
use semistatic_hedge::solver::{solve_unconstrained, HedgeSolution};

fn setup() -> &'static (HestonParams, ClaimSet, MomentData) {
    static S: OnceLock<(HestonParams, ClaimSet, MomentData)> = OnceLock::new();
    S.get_or_init(|| {
        let p = HestonParams::stylized();
        let claims = ClaimSet::otm_grid(&p, 50.0, 150.0, 5.0).unwrap();
        let cache = MomentCache::new(concat!(env!("CARGO_TARGET_TMPDIR"), "/acceptance-cache"));
        let (m, _) = cache.get_or_compute(&p, &claims, &QuadratureConfig::default()).unwrap();
        (p, claims, m)
    })
}

fn exact(nonneg: bool) -> SelectionPath {
    exact_path(&setup().2, 21, nonneg, ExactMethod::LeapsAndBounds(LeapsOptions::default()))
}

fn rel(path: &SelectionPath, d: usize) -> f64 {
    path.entry(d).unwrap().rel_err
}

#[test]
fn full_grid_levels_off_near_one_point_six_percent() {
    let free = exact(false);
    let nonneg = exact(true);
    assert!((rel(&free, 21) - 0.016).abs() <= 0.003, "{}", rel(&free, 21));
    assert!((rel(&nonneg, 21) - rel(&free, 21)).abs() <= 0.003, "{} vs {}", rel(&nonneg, 21), rel(&free, 21));
    let s: HedgeSolution = solve_unconstrained(&setup().2);
    assert!((s.rel_err - rel(&free, 21)).abs() <= 1e-12);
}

#[test]
fn three_options_reach_five_point_seven_percent() {
    let e = rel(&exact(true), 3);
    assert!((e - 0.057).abs() <= 0.003, "{e}");
}

#[test]
fn six_options_reach_three_point_four_percent() {
    let e = rel(&exact(true), 6);
    assert!((e - 0.034).abs() <= 0.003, "exact d=6 rel_err {e}");
}

#[test]
fn greedy_is_within_one_point_of_exact() {
    let (_, _, m) = setup();
    let ex = exact(false);
    let greedy = greedy_forward(m, 21, false).unwrap();
    let gaps: Vec<(usize, f64)> = (0..=21).map(|d| (d, rel(&greedy, d) - rel(&ex, d))).collect();
    let worst = gaps.iter().cloned().fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
    assert!(worst.1 <= 0.01, "largest gap {:.2}pp at d={}", 100.0 * worst.1, worst.0);
}

#[test]
fn puts_outweigh_mirrored_calls() {
    let (p, claims, _) = setup();
    let path = exact(true);
    for d in [3, 6, 12] {
        let v = &path.entry(d).unwrap().v;
        assert_eq!(put_dominance(&claims.options, v, p.s0), Some(true), "d={d}");
    }
}

#[test]
fn simulated_shortfall_of_full_portfolio() {
    let (p, claims, m) = setup();
    let s = solve_unconstrained(m);
    let r = realized_error(&s.v, p, claims, &SimConfig::default()).unwrap();
    // delta-method standard error of sqrt(eps2) / k*
    let rel_se = r.se / (2.0 * r.eps2.sqrt() * m.k_star);
    eprintln!("mc eps2 {:e} +- {:e} (analytic {:e}), rel_err {} +- {}", r.eps2, r.se, s.eps2, r.rel_err, rel_se);
    assert!((r.eps2 - s.eps2).abs() <= 4.0 * r.se, "mc {} +- {} vs {}", r.eps2, r.se, s.eps2);
    assert!((r.rel_err - 0.016).abs() <= 0.003 + 4.0 * rel_se, "{} +- {}", r.rel_err, rel_se);
}
