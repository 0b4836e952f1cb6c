#![allow(dead_code)]

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semistatic_hedge::fourier::MomentData;

/// Moments of a random joint covariance of `(L0, L1..Ln)`.
///
/// `shared` mixes a common factor into every column to produce the
/// strongly correlated, badly conditioned matrices typical of option strips.
pub fn random_moments(n: usize, seed: u64, shared: f64) -> MomentData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = n + 1 + rng.gen_range(0..4);
    let common: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let g: Vec<Vec<f64>> = (0..=n)
        .map(|_| {
            let scale = rng.gen_range(0.2..2.0);
            (0..k).map(|j| scale * (shared * common[j] + (1.0 - shared) * rng.gen_range(-1.0..1.0))).collect()
        })
        .collect();
    let cov = |i: usize, j: usize| (0..k).map(|l| g[i][l] * g[j][l]).sum::<f64>();
    let a = cov(0, 0);
    let b = (1..=n).map(|i| cov(0, i)).collect();
    let c = (1..=n).map(|i| (1..=n).map(|j| cov(i, j)).collect()).collect();
    MomentData::new(a, b, c, a.sqrt()).unwrap()
}

pub fn instance(max_n: usize) -> impl Strategy<Value = MomentData> {
    (1..=max_n, any::<u64>(), prop_oneof![Just(0.0), 0.0..0.9f64]).prop_map(|(n, seed, s)| random_moments(n, seed, s))
}

pub fn quadratic(m: &MomentData, v: &[f64]) -> f64 {
    let n = m.n();
    let mut e = m.a;
    for i in 0..n {
        e -= 2.0 * v[i] * m.b[i];
        for j in 0..n {
            e += v[i] * m.c[i][j] * v[j];
        }
    }
    e
}

pub fn gradient(m: &MomentData, v: &[f64]) -> Vec<f64> {
    let n = m.n();
    (0..n).map(|i| 2.0 * ((0..n).map(|j| m.c[i][j] * v[j]).sum::<f64>() - m.b[i])).collect()
}

pub fn scale(m: &MomentData) -> f64 {
    m.a.max((0..m.n()).map(|i| m.c[i][i]).fold(0.0, f64::max))
}
