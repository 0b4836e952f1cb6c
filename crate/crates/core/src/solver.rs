//! Outer quadratic problem `min_v A - 2 v'B + v'Cv`, with optional linear
//! constraints, and the relative hedge contribution of an extra asset.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{HedgeError, Result};
use crate::fourier::MomentData;

/// Static weights and the resulting hedging error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeSolution {
    pub v: Vec<f64>,
    /// initial capital `E[H0_T] = k* - k`
    pub c: f64,
    pub eps2: f64,
    pub rel_err: f64,
    /// indices of binding constraints
    pub active_set: Vec<usize>,
    pub method: String,
    pub kkt_residual: f64,
}

impl HedgeSolution {
    pub fn from_weights(v: Vec<f64>, m: &MomentData, method: &str) -> Self {
        let eps2 = hedging_error(&v, m);
        HedgeSolution {
            rel_err: rel_err(eps2, m),
            c: initial_capital(m),
            eps2,
            v,
            active_set: vec![],
            method: method.to_string(),
            kkt_residual: 0.0,
        }
    }

    pub fn support(&self) -> Vec<usize> {
        self.v.iter().enumerate().filter(|(_, x)| **x != 0.0).map(|(i, _)| i).collect()
    }
}

pub fn initial_capital(m: &MomentData) -> f64 {
    m.k_star - m.swap_k.unwrap_or(m.k_star)
}

pub fn rel_err(eps2: f64, m: &MomentData) -> f64 {
    if m.k_star > 0.0 {
        eps2.max(0.0).sqrt() / m.k_star
    } else {
        eps2.max(0.0).sqrt()
    }
}

/// `A - 2 v'B + v'Cv`, floored at zero.
pub fn hedging_error(v: &[f64], m: &MomentData) -> f64 {
    let n = m.n();
    assert_eq!(v.len(), n, "weight vector length");
    let mut vb = 0.0;
    let mut vcv = 0.0;
    for i in 0..n {
        if v[i] == 0.0 {
            continue;
        }
        vb += v[i] * m.b[i];
        let mut row = 0.0;
        for j in 0..n {
            row += m.c[i][j] * v[j];
        }
        vcv += v[i] * row;
    }
    let e = m.a - 2.0 * vb + vcv;
    if e < -1e-10 * m.a.abs() {
        log::warn!("negative squared hedging error {e:e} floored at 0");
    }
    e.max(0.0)
}

/// Factorization of a symmetric PSD matrix: Cholesky when well conditioned,
/// spectral pseudo-inverse otherwise.
pub(crate) enum SymSolve {
    Chol(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Pinv(DMatrix<f64>),
}

pub(crate) const RCOND_SINGULAR: f64 = 1e-14;
pub(crate) const PINV_CUTOFF: f64 = 1e-12;

impl SymSolve {
    pub(crate) fn new(c: &DMatrix<f64>) -> Self {
        if c.nrows() == 0 {
            return SymSolve::Pinv(c.clone());
        }
        let eig = c.clone().symmetric_eigen();
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        if max > 0.0 && min / max > RCOND_SINGULAR {
            if let Some(ch) = c.clone().cholesky() {
                return SymSolve::Chol(ch);
            }
        }
        SymSolve::Pinv(pinv_from_eigen(&eig))
    }

    pub(crate) fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        match self {
            SymSolve::Chol(ch) => ch.solve(b),
            SymSolve::Pinv(p) => p * b,
        }
    }
}

fn pinv_from_eigen(eig: &nalgebra::SymmetricEigen<f64, nalgebra::Dyn>) -> DMatrix<f64> {
    let n = eig.eigenvalues.len();
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let cut = PINV_CUTOFF * max;
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        let l = eig.eigenvalues[k];
        if l > cut {
            let q = eig.eigenvectors.column(k);
            out += q * q.transpose() / l;
        }
    }
    out
}

fn finish(v: DVector<f64>, m: &MomentData, method: &str, active: Vec<usize>, kkt: f64) -> HedgeSolution {
    let mut s = HedgeSolution::from_weights(v.iter().cloned().collect(), m, method);
    s.active_set = active;
    s.kkt_residual = kkt;
    s
}

fn b_vec(m: &MomentData) -> DVector<f64> {
    DVector::from_vec(m.b.clone())
}

/// `v = C^{-1} B`; falls through to the pseudo-inverse when `C` is numerically singular.
pub fn solve_unconstrained(m: &MomentData) -> HedgeSolution {
    let c = m.c_matrix();
    let b = b_vec(m);
    match SymSolve::new(&c) {
        SymSolve::Chol(ch) => {
            let v = ch.solve(&b);
            let kkt = (&c * &v - &b).amax();
            finish(v, m, "unconstrained", vec![], kkt)
        }
        SymSolve::Pinv(_) => solve_pinv(m),
    }
}

/// Minimum-norm solution `v = C^+ B` with eigenvalue cutoff `1e-12 max eig`.
pub fn solve_pinv(m: &MomentData) -> HedgeSolution {
    let c = m.c_matrix();
    let b = b_vec(m);
    if m.n() == 0 {
        return finish(DVector::zeros(0), m, "pinv", vec![], 0.0);
    }
    let p = pinv_from_eigen(&c.clone().symmetric_eigen());
    let v = &p * &b;
    let kkt = (&c * &v - &b).amax();
    finish(v, m, "pinv", vec![], kkt)
}

/// Linear constraints `p_k' v >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Constraints {
    /// `v >= 0` componentwise
    NonNegative,
    /// one row `p_k` per constraint
    General(Vec<Vec<f64>>),
}

impl Constraints {
    fn rows(&self, n: usize) -> Vec<Vec<f64>> {
        match self {
            Constraints::NonNegative => (0..n)
                .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
            Constraints::General(r) => r.clone(),
        }
    }
}

/// KKT residual of `min v'Cv - 2v'B` s.t. `P v >= 0` at `(v, mu)`.
pub fn kkt_residual(c: &DMatrix<f64>, b: &DVector<f64>, rows: &[Vec<f64>], v: &DVector<f64>, mu: &[f64]) -> f64 {
    let n = b.len();
    let mut grad = 2.0 * (c * v - b);
    let mut worst: f64 = 0.0;
    for (k, p) in rows.iter().enumerate() {
        let pv: f64 = (0..n).map(|i| p[i] * v[i]).sum();
        worst = worst.max(-pv);
        worst = worst.max(-mu[k]);
        worst = worst.max((mu[k] * pv).abs());
        for i in 0..n {
            grad[i] -= mu[k] * p[i];
        }
    }
    worst.max(grad.amax())
}

/// Primal active-set method for `min A - 2v'B + v'Cv` s.t. the constraints.
pub fn solve_constrained(m: &MomentData, cons: &Constraints) -> Result<HedgeSolution> {
    match solve_constrained_once(m, cons, 0.0) {
        Err(HedgeError::MaxIterations(k)) => {
            let n = m.n().max(1);
            let tr: f64 = (0..m.n()).map(|i| m.c[i][i]).sum();
            log::warn!("active set cycled after {k} iterations, retrying with jitter");
            solve_constrained_once(m, cons, 1e-12 * tr / n as f64)
        }
        r => r,
    }
}

fn solve_constrained_once(m: &MomentData, cons: &Constraints, jitter: f64) -> Result<HedgeSolution> {
    let n = m.n();
    let mut c = m.c_matrix();
    for i in 0..n {
        c[(i, i)] += jitter;
    }
    let b = b_vec(m);
    if let Constraints::NonNegative = cons {
        let (v, _) = nnls_quadratic(&c, &b)?;
        let rows = cons.rows(n);
        let g = 2.0 * (&c * &v - &b);
        let mu: Vec<f64> = (0..n).map(|i| if v[i] == 0.0 { g[i] } else { 0.0 }).collect();
        let active: Vec<usize> = (0..n).filter(|&i| v[i] == 0.0).collect();
        let kkt = kkt_residual(&m.c_matrix(), &b, &rows, &v, &mu);
        return Ok(finish(v, m, "constrained", active, kkt));
    }
    let rows = cons.rows(n);
    if rows.iter().any(|r| r.len() != n) {
        return Err(HedgeError::Dimension("constraint row length".into()));
    }
    let ncons = rows.len();
    let dot = |p: &[f64], x: &DVector<f64>| -> f64 { (0..n).map(|i| p[i] * x[i]).sum() };
    let mut v = DVector::zeros(n);
    let mut working: Vec<usize> = vec![];
    let max_iter = 50 * (n + ncons) + 100;
    let scale = b.amax().max(c.amax()).max(1e-300);
    for _ in 0..max_iter {
        let (target, mu) = eqp(&c, &b, &rows, &working);
        let d = &target - &v;
        if d.amax() <= 1e-13 * (1.0 + v.amax()) {
            // stationary on the working set: check multipliers
            let (kmin, mmin) = working
                .iter()
                .zip(&mu)
                .map(|(&k, &x)| (k, x))
                .fold((usize::MAX, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            if working.is_empty() || mmin >= -1e-12 * scale {
                let mut full_mu = vec![0.0; ncons];
                for (&k, &x) in working.iter().zip(&mu) {
                    full_mu[k] = x.max(0.0);
                }
                let kkt = kkt_residual(&m.c_matrix(), &b, &rows, &v, &full_mu);
                let mut active = working.clone();
                active.sort_unstable();
                return Ok(finish(v, m, "constrained", active, kkt));
            }
            working.retain(|&k| k != kmin);
            continue;
        }
        let mut alpha = 1.0;
        let mut block = None;
        for (k, p) in rows.iter().enumerate() {
            if working.contains(&k) {
                continue;
            }
            let pd = dot(p, &d);
            if pd < -1e-15 * scale {
                let a = -dot(p, &v) / pd;
                if a < alpha {
                    alpha = a.max(0.0);
                    block = Some(k);
                }
            }
        }
        v += d * alpha;
        if let Some(k) = block {
            working.push(k);
        }
    }
    Err(HedgeError::MaxIterations(max_iter))
}

/// Equality-constrained minimizer on the working set and its multipliers.
fn eqp(c: &DMatrix<f64>, b: &DVector<f64>, rows: &[Vec<f64>], working: &[usize]) -> (DVector<f64>, Vec<f64>) {
    let n = b.len();
    if working.is_empty() {
        return (SymSolve::new(c).solve(b), vec![]);
    }
    let pw = DMatrix::from_fn(working.len(), n, |r, j| rows[working[r]][j]);
    // null space of the active rows from the SVD of P_W^T P_W
    let svd = (pw.transpose() * &pw).symmetric_eigen();
    let lmax = svd.eigenvalues.max().max(1e-300);
    let basis: Vec<usize> = (0..n).filter(|&k| svd.eigenvalues[k] <= 1e-12 * lmax).collect();
    let z = DMatrix::from_fn(n, basis.len(), |i, k| svd.eigenvectors[(i, basis[k])]);
    let v = if basis.is_empty() {
        DVector::zeros(n)
    } else {
        let czz = z.transpose() * c * &z;
        let zb = z.transpose() * b;
        &z * SymSolve::new(&czz).solve(&zb)
    };
    // P_W^T mu = 2 (C v - B) in the least-squares sense
    let g = 2.0 * (c * &v - b);
    let mu = pw
        .transpose()
        .svd(true, true)
        .solve(&g, 1e-12)
        .map(|x| x.iter().cloned().collect())
        .unwrap_or_else(|_| vec![0.0; working.len()]);
    (v, mu)
}

/// Lawson-Hanson active-set method for `min v'Cv - 2v'B` s.t. `v >= 0`.
pub fn nnls_quadratic(c: &DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, usize)> {
    let n = b.len();
    let mut v = DVector::zeros(n);
    let mut passive = vec![false; n];
    let scale = b.amax().max(1e-300);
    let tol = 1e-13 * scale;
    let max_iter = 30 * n + 50;
    let mut iters = 0;
    loop {
        let w = b - c * &v;
        let cand = (0..n).filter(|&j| !passive[j]).fold(None, |best: Option<usize>, j| match best {
            Some(k) if w[k] >= w[j] => Some(k),
            _ => Some(j),
        });
        let j = match cand {
            Some(j) if w[j] > tol => j,
            _ => return Ok((v, iters)),
        };
        passive[j] = true;
        loop {
            iters += 1;
            if iters > max_iter {
                return Err(HedgeError::MaxIterations(iters));
            }
            let idx: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
            let cpp = DMatrix::from_fn(idx.len(), idx.len(), |a, b2| c[(idx[a], idx[b2])]);
            let bp = DVector::from_fn(idx.len(), |a, _| b[idx[a]]);
            let zp = SymSolve::new(&cpp).solve(&bp);
            if zp.iter().all(|&x| x > 0.0) {
                v.fill(0.0);
                for (a, &i) in idx.iter().enumerate() {
                    v[i] = zp[a];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            let mut blocking = None;
            for (a, &i) in idx.iter().enumerate() {
                if zp[a] <= 0.0 {
                    let denom = v[i] - zp[a];
                    let t = if denom > 0.0 { v[i] / denom } else { 0.0 };
                    if t < alpha {
                        alpha = t;
                        blocking = Some(i);
                    }
                }
            }
            for (a, &i) in idx.iter().enumerate() {
                v[i] += alpha * (zp[a] - v[i]);
            }
            if let Some(i) = blocking {
                v[i] = 0.0;
            }
            for &i in &idx {
                if v[i] <= 0.0 {
                    v[i] = 0.0;
                    passive[i] = false;
                }
            }
            if !passive.iter().any(|&x| x) {
                break;
            }
        }
        if iters > max_iter {
            return Err(HedgeError::MaxIterations(iters));
        }
    }
}

/// Fractional reduction of the squared hedging error from adding one asset
/// with covariances `k` to the current assets, `cov0 = Cov[L_new, L0]` and
/// `var = Var[L_new]`.
pub fn relative_hedge_contribution(m: &MomentData, k: &[f64], cov0: f64, var: f64) -> Result<f64> {
    let n = m.n();
    if k.len() != n {
        return Err(HedgeError::Dimension(format!("K has {} entries, expected {n}", k.len())));
    }
    let solver = SymSolve::new(&m.c_matrix());
    rhc_with(&solver, m, k, cov0, var)
}

pub(crate) fn rhc_with(solver: &SymSolve, m: &MomentData, k: &[f64], cov0: f64, var: f64) -> Result<f64> {
    let kv = DVector::from_column_slice(k);
    let b = b_vec(m);
    let (schur, num_base, resid) = if m.n() == 0 {
        (var, cov0, m.a)
    } else {
        let x = solver.solve(&kv);
        let y = solver.solve(&b);
        (var - kv.dot(&x), cov0 - kv.dot(&y), m.a - b.dot(&y))
    };
    if schur <= 1e-12 * var.abs().max(f64::MIN_POSITIVE) {
        return Err(HedgeError::RedundantAsset(schur));
    }
    if resid <= 0.0 {
        return Ok(0.0);
    }
    Ok((num_base * num_base / (schur * resid)).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn md(a: f64, b: Vec<f64>, c: Vec<Vec<f64>>) -> MomentData {
        MomentData::new(a, b, c, 1.0).unwrap()
    }

    #[test]
    fn scalar_case() {
        let m = md(3.0, vec![2.0], vec![vec![4.0]]);
        let s = solve_unconstrained(&m);
        assert!((s.v[0] - 0.5).abs() < 1e-15);
        assert!((s.eps2 - 2.0).abs() < 1e-15);
        assert_eq!(s.c, 0.0);
    }

    #[test]
    fn zero_covariance_gives_zero_weights() {
        let m = md(3.0, vec![0.0, 0.0], vec![vec![2.0, 0.5], vec![0.5, 1.0]]);
        let s = solve_unconstrained(&m);
        assert!(s.v.iter().all(|x| x.abs() < 1e-16));
        assert_eq!(s.eps2, 3.0);
        let z = md(3.0, vec![0.0, 0.0], vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
        let s = solve_pinv(&z);
        assert_eq!(s.v, vec![0.0, 0.0]);
        assert_eq!(s.eps2, 3.0);
    }

    #[test]
    fn twins_split_weight() {
        let m = md(2.0, vec![1.0, 1.0], vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
        let s = solve_unconstrained(&m);
        assert!((s.v[0] - 0.5).abs() < 1e-12 && (s.v[1] - 0.5).abs() < 1e-12);
        assert!((s.eps2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nonneg_boundary_case() {
        let m = md(2.0, vec![-1.0], vec![vec![1.0]]);
        let s = solve_constrained(&m, &Constraints::NonNegative).unwrap();
        assert_eq!(s.v, vec![0.0]);
        assert_eq!(s.eps2, 2.0);
        assert_eq!(s.active_set, vec![0]);
        let g = solve_constrained(&m, &Constraints::General(vec![vec![1.0]])).unwrap();
        assert!(g.v[0].abs() < 1e-15);
    }

    #[test]
    fn inactive_constraints_reproduce_unconstrained() {
        let m = md(5.0, vec![1.0, 0.5], vec![vec![2.0, 0.3], vec![0.3, 1.0]]);
        let u = solve_unconstrained(&m);
        let c = solve_constrained(&m, &Constraints::NonNegative).unwrap();
        for i in 0..2 {
            assert!((u.v[i] - c.v[i]).abs() < 1e-14);
        }
        let g = solve_constrained(&m, &Constraints::General(vec![vec![1.0, 1.0]])).unwrap();
        for i in 0..2 {
            assert!((u.v[i] - g.v[i]).abs() < 1e-12);
        }
        assert!(g.active_set.is_empty());
    }

    #[test]
    fn rhc_empty_set_is_squared_correlation() {
        let m = md(4.0, vec![], vec![]);
        let r = relative_hedge_contribution(&m, &[], 1.0, 2.0).unwrap();
        assert!((r - 1.0 / 8.0).abs() < 1e-15);
        let m = md(4.0, vec![1.0], vec![vec![2.0]]);
        assert_eq!(relative_hedge_contribution(&m, &[0.0], 0.0, 1.0).unwrap(), 0.0);
        assert!(matches!(
            relative_hedge_contribution(&m, &[2.0], 1.0, 2.0),
            Err(HedgeError::RedundantAsset(_))
        ));
    }
}
