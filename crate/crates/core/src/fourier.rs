//! Covariances of the GKW residuals of the variance swap and the options:
//! `A = Var[L0_T]`, `B_i = Cov[L0_T, Li_T]`, `C_ij = Cov[Li_T, Lj_T]`.
//!
//! Time integrals use the substitution `tau = T - t = T s^2` (the integrands
//! vary fastest near maturity) followed by Gauss-Legendre in `s`. Strip
//! integrals use `u = R + iy` and conjugate symmetry.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::claims::{ClaimSet, ClaimSpec};
use crate::error::{HedgeError, Result};
use crate::heston::{char_exponents, critical_time, mean_variance, swap_rate, HestonParams, C64};
use crate::numfmt::{dec17, dec17_mat, dec17_vec};
use crate::quadrature::{
    adaptive, gauss_legendre, gauss_legendre_on, integrate_strip, StripOptions, Symmetry,
};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Accuracy settings for the moment integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Gauss-Legendre nodes of the time rule
    pub time_nodes: usize,
    /// absolute tolerance of each inner strip integral
    pub strip_tol: f64,
    /// target absolute accuracy of assembled entries
    pub entry_tol: f64,
    /// truncation of the tensor grid used for C
    pub c_y_max: f64,
    /// Gauss-Legendre order per panel of the tensor grid
    pub c_panel_order: usize,
    /// evaluation budget per strip integral
    pub max_evals: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            time_nodes: 64,
            strip_tol: 1e-10,
            entry_tol: 1e-8,
            c_y_max: 512.0,
            c_panel_order: 16,
            max_evals: 400_000,
        }
    }
}

impl QuadratureConfig {
    /// Cheaper settings for exploratory runs and tests.
    pub fn coarse() -> Self {
        QuadratureConfig { time_nodes: 32, c_y_max: 128.0, c_panel_order: 12, ..Default::default() }
    }

    fn strip_options(&self) -> StripOptions {
        StripOptions { max_evals: self.max_evals, ..Default::default() }
    }
}

/// Per-entry error estimates and work counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct QuadMeta {
    #[serde(with = "dec17")]
    pub a_err: f64,
    #[serde(with = "dec17_vec")]
    pub b_err: Vec<f64>,
    pub b_evals: Vec<usize>,
    #[serde(with = "dec17_mat")]
    pub c_err: Vec<Vec<f64>>,
    /// tensor nodes per time node, summed over strip pairs
    pub c_nodes: usize,
    pub time_nodes: usize,
    /// largest `|C_ij - C_ji| / max|C|` before symmetrization
    #[serde(with = "dec17")]
    pub c_asymmetry: f64,
}

/// `A`, `B`, `C` plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentData {
    #[serde(with = "dec17")]
    pub a: f64,
    #[serde(with = "dec17_vec")]
    pub b: Vec<f64>,
    #[serde(with = "dec17_mat")]
    pub c: Vec<Vec<f64>>,
    #[serde(with = "dec17")]
    pub k_star: f64,
    /// strike of the swap contract; `None` means `k*`
    #[serde(default)]
    pub swap_k: Option<f64>,
    #[serde(default)]
    pub claims: Vec<ClaimSpec>,
    #[serde(default)]
    pub quad_meta: QuadMeta,
    #[serde(default)]
    pub params_hash: String,
}

impl MomentData {
    /// Bare moment data, e.g. for synthetic instances; `k_star` scales `rel_err`.
    pub fn new(a: f64, b: Vec<f64>, c: Vec<Vec<f64>>, k_star: f64) -> Result<Self> {
        let n = b.len();
        if c.len() != n || c.iter().any(|r| r.len() != n) {
            return Err(HedgeError::Dimension(format!("B has {n} entries, C is not {n}x{n}")));
        }
        Ok(MomentData { a, b, c, k_star, swap_k: None, claims: vec![], quad_meta: QuadMeta::default(), params_hash: String::new() })
    }

    pub fn n(&self) -> usize {
        self.b.len()
    }

    pub fn c_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| self.c[i][j])
    }

    /// Restriction to the given option indices.
    pub fn subset(&self, idx: &[usize]) -> MomentData {
        MomentData {
            a: self.a,
            b: idx.iter().map(|&i| self.b[i]).collect(),
            c: idx.iter().map(|&i| idx.iter().map(|&j| self.c[i][j]).collect()).collect(),
            k_star: self.k_star,
            swap_k: self.swap_k,
            claims: if self.claims.is_empty() { vec![] } else { idx.iter().map(|&i| self.claims[i]).collect() },
            quad_meta: QuadMeta::default(),
            params_hash: self.params_hash.clone(),
        }
    }

    /// Smallest over largest eigenvalue of `C`.
    pub fn rcond(&self) -> f64 {
        let ev = self.c_matrix().symmetric_eigen().eigenvalues;
        let max = ev.iter().cloned().fold(f64::MIN, f64::max);
        let min = ev.iter().cloned().fold(f64::MAX, f64::min);
        if max <= 0.0 {
            0.0
        } else {
            min / max
        }
    }

    /// Smallest eigenvalue of `[[A, B^T], [B, C]]`.
    pub fn extended_min_eigen(&self) -> f64 {
        let n = self.n();
        let m = DMatrix::from_fn(n + 1, n + 1, |i, j| match (i, j) {
            (0, 0) => self.a,
            (0, j) => self.b[j - 1],
            (i, 0) => self.b[i - 1],
            (i, j) => self.c[i - 1][j - 1],
        });
        m.symmetric_eigen().eigenvalues.iter().cloned().fold(f64::MAX, f64::min)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Closed-form `A = s^2 (1-rho^2)/lambda^2 int_0^T (1 - e^{-lambda(T-t)})^2 E[V_t] dt`.
pub fn compute_a(p: &HestonParams) -> f64 {
    let (l, t) = (p.lambda, p.maturity);
    let e1 = -(-l * t).exp_m1();
    let e2 = -(-2.0 * l * t).exp_m1();
    let et = (-l * t).exp();
    let stationary = p.kappa * (t - 2.0 * e1 / l + e2 / (2.0 * l));
    let transient = (p.v0 - p.kappa) * (e1 / l - 2.0 * t * et + et * e1 / l);
    prefactor_a(p) * (stationary + transient)
}

fn prefactor_a(p: &HestonParams) -> f64 {
    p.sigma * p.sigma * (1.0 - p.rho * p.rho) / (p.lambda * p.lambda)
}

/// `A` by Gauss-Legendre quadrature of the same time integral.
pub fn compute_a_quadrature(p: &HestonParams, nodes: usize) -> f64 {
    let (x, w) = gauss_legendre_on(nodes, 0.0, p.maturity);
    let s: f64 = x
        .iter()
        .zip(&w)
        .map(|(&t, &w)| {
            let f = 1.0 - (-p.lambda * (p.maturity - t)).exp();
            w * f * f * mean_variance(t, p)
        })
        .sum();
    prefactor_a(p) * s
}

/// Time nodes `t = T - T s^2` and weights `2 T s ds` for `s` Gauss-Legendre on `[0,1]`.
pub fn time_rule(p: &HestonParams, n: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    x.iter()
        .zip(&w)
        .map(|(&x, &w)| {
            let s = 0.5 * (x + 1.0);
            let tau = p.maturity * s * s;
            (p.maturity - tau, 2.0 * p.maturity * s * 0.5 * w)
        })
        .collect()
}

fn check_moments(claim: &ClaimSpec, p: &HestonParams) -> Result<()> {
    let r = claim.r();
    if critical_time(2.0 * r, p) <= p.maturity {
        return Err(HedgeError::DomainViolation(format!("{}: E[exp(2R X_T)] infinite", claim.label())));
    }
    Ok(())
}

/// `psi_tau(u,0) E[H_t(u) V_t]` for the B integrand.
fn b_kernel(t: f64, tau: f64, u: C64, p: &HestonParams) -> Result<C64> {
    let c_tau = char_exponents(tau, u, ZERO, p)?;
    let inner = char_exponents(t, u, c_tau.psi, p)?;
    let full = char_exponents(p.maturity, u, ZERO, p)?;
    let ehv = (inner.dphi_dw + p.v0 * inner.dpsi_dw) * (u * p.x0() + full.phi + p.v0 * full.psi).exp();
    Ok(c_tau.psi * ehv)
}

/// Inner strip integral of the B integrand at time `t`, including `1/(2 pi)`.
pub fn b_strip(t: f64, claim: &ClaimSpec, p: &HestonParams, cfg: &QuadratureConfig, sym: Symmetry) -> Result<crate::quadrature::Integral> {
    let tau = p.maturity - t;
    let lk = claim.k().ln();
    let f = |u: C64| -> Result<C64> {
        let k = b_kernel(t, tau, u, p)?;
        Ok(k * ((1.0 - u) * lk).exp() / (u * (u - 1.0)))
    };
    let mut res = integrate_strip(f, claim.r(), cfg.strip_tol, sym, cfg.strip_options())?;
    res.value /= 2.0 * PI;
    res.abs_err /= 2.0 * PI;
    Ok(res)
}

/// Single entry `B_i` with error estimate and evaluation count.
pub fn compute_b_entry(p: &HestonParams, claim: &ClaimSpec, cfg: &QuadratureConfig) -> Result<(f64, f64, usize)> {
    check_moments(claim, p)?;
    let c0 = p.sigma * p.sigma * (1.0 - p.rho * p.rho) / p.lambda;
    let (mut val, mut err, mut evals) = (0.0, 0.0, 0);
    for (t, w) in time_rule(p, cfg.time_nodes) {
        let tau = p.maturity - t;
        let lead = c0 * -(-p.lambda * tau).exp_m1();
        let res = b_strip(t, claim, p, cfg, Symmetry::Conjugate)?;
        val += w * lead * res.value.re;
        err += w * lead * res.abs_err;
        evals += res.evals;
    }
    if err > cfg.entry_tol.max(1e-6 * val.abs()) {
        return Err(HedgeError::QuadratureFailure(format!("B[{}]: error {err:e}", claim.label())));
    }
    Ok((val, err, evals))
}

/// B vector, entries computed in parallel.
pub fn compute_b(p: &HestonParams, claims: &ClaimSet, cfg: &QuadratureConfig) -> Result<(Vec<f64>, Vec<f64>, Vec<usize>)> {
    let res: Result<Vec<_>> = claims.options.par_iter().map(|c| compute_b_entry(p, c, cfg)).collect();
    let res = res?;
    Ok((res.iter().map(|r| r.0).collect(), res.iter().map(|r| r.1).collect(), res.iter().map(|r| r.2).collect()))
}

/// Panel edges of the tensor grid on `[0, y_max]`: fine near zero, then
/// roughly geometric.
pub fn tensor_edges(y_max: f64) -> Vec<f64> {
    let mut e = vec![0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0];
    let mut base = 8.0;
    while *e.last().expect("edges") < y_max {
        for m in [1.0, 1.25, 1.5] {
            let x: f64 = base * m;
            if x <= y_max + 1e-9 && x > *e.last().expect("edges") {
                e.push(x);
            }
        }
        base *= 2.0;
        if base > y_max && *e.last().expect("edges") < y_max {
            e.push(y_max);
        }
    }
    e.retain(|&x| x < y_max);
    e.push(y_max);
    e
}

struct HalfGrid {
    y: Vec<f64>,
    w: Vec<f64>,
}

fn half_grid(cfg: &QuadratureConfig) -> HalfGrid {
    let edges = tensor_edges(cfg.c_y_max);
    let (x, w) = gauss_legendre(cfg.c_panel_order);
    let mut ys = vec![];
    let mut ws = vec![];
    for e in edges.windows(2) {
        let h = 0.5 * (e[1] - e[0]);
        let c = 0.5 * (e[1] + e[0]);
        for (xi, wi) in x.iter().zip(&w) {
            ys.push(c + h * xi);
            ws.push(h * wi);
        }
    }
    HalfGrid { y: ys, w: ws }
}

/// Options grouped by strip abscissa.
fn strip_groups(claims: &ClaimSet) -> Vec<(f64, Vec<usize>)> {
    let mut groups: Vec<(f64, Vec<usize>)> = vec![];
    for (i, c) in claims.options.iter().enumerate() {
        let r = c.r();
        match groups.iter_mut().find(|g| g.0 == r) {
            Some(g) => g.1.push(i),
            None => groups.push((r, vec![i])),
        }
    }
    groups
}

struct NodeData {
    u: Vec<C64>,
    phi: Vec<C64>,
    psi: Vec<C64>,
    /// `psi / (u (u-1))` times the quadrature weight
    factor: Vec<C64>,
    inner: Vec<bool>,
}

fn node_data(tau: f64, r: f64, y: &[f64], w: &[f64], y_half: f64, p: &HestonParams) -> Result<NodeData> {
    let mut d = NodeData { u: vec![], phi: vec![], psi: vec![], factor: vec![], inner: vec![] };
    for (&yi, &wi) in y.iter().zip(w) {
        let u = C64::new(r, yi);
        let c = char_exponents(tau, u, ZERO, p)?;
        d.u.push(u);
        d.phi.push(c.phi);
        d.psi.push(c.psi);
        d.factor.push(c.psi / (u * (u - 1.0)) * wi);
        d.inner.push(yi.abs() <= y_half);
    }
    Ok(d)
}

/// Contribution of one time node to C (full and half-range grids).
fn c_time_node(
    t: f64,
    groups: &[(f64, Vec<usize>)],
    claims: &ClaimSet,
    grid: &HalfGrid,
    cfg: &QuadratureConfig,
    p: &HestonParams,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = claims.len();
    let tau = p.maturity - t;
    let y_half = 0.5 * cfg.c_y_max;
    let full_y: Vec<f64> = grid.y.iter().rev().map(|y| -y).chain(grid.y.iter().cloned()).collect();
    let full_w: Vec<f64> = grid.w.iter().rev().chain(grid.w.iter()).cloned().collect();
    let mut out = DMatrix::zeros(n, n);
    let mut out_half = DMatrix::zeros(n, n);
    let moneyness = |r: f64, y: &[f64], idx: &[usize]| -> DMatrix<Complex64> {
        DMatrix::from_fn(idx.len(), y.len(), |a, b| {
            let k = claims.options[idx[a]].k();
            k * (C64::new(r, y[b]) * (p.s0 / k).ln()).exp()
        })
    };
    for (ga, (ra, ia)) in groups.iter().enumerate() {
        let d1 = node_data(tau, *ra, &grid.y, &grid.w, y_half, p)?;
        let e1 = moneyness(*ra, &grid.y, ia);
        for (rb, ib) in groups.iter().skip(ga) {
            let d2 = node_data(tau, *rb, &full_y, &full_w, y_half, p)?;
            let e2 = moneyness(*rb, &full_y, ib);
            let n1 = d1.u.len();
            let n2 = d2.u.len();
            let mut w = DMatrix::<Complex64>::zeros(n1, n2);
            let mut w_half = DMatrix::<Complex64>::zeros(n1, n2);
            for a in 0..n1 {
                for b in 0..n2 {
                    let big_u = d1.u[a] + d2.u[b];
                    let q = d1.psi[a] + d2.psi[b];
                    let c = char_exponents(t, big_u, q, p)?;
                    let g = (c.dphi_dw + p.v0 * c.dpsi_dw) * (d1.phi[a] + d2.phi[b] + c.phi + p.v0 * c.psi).exp();
                    let val = d1.factor[a] * d2.factor[b] * g;
                    if !(val.re.is_finite() && val.im.is_finite()) {
                        return Err(HedgeError::NonFiniteResult(format!("C integrand at u1={}, u2={}", d1.u[a], d2.u[b])));
                    }
                    w[(a, b)] = val;
                    if d1.inner[a] && d2.inner[b] {
                        w_half[(a, b)] = val;
                    }
                }
            }
            let m = &e1 * w * e2.transpose();
            let m_half = &e1 * w_half * e2.transpose();
            for (a, &i) in ia.iter().enumerate() {
                for (b, &j) in ib.iter().enumerate() {
                    out[(i, j)] += m[(a, b)].re;
                    out_half[(i, j)] += m_half[(a, b)].re;
                    if *rb != *ra {
                        out[(j, i)] += m[(a, b)].re;
                        out_half[(j, i)] += m_half[(a, b)].re;
                    }
                }
            }
        }
    }
    Ok((out, out_half))
}

/// C matrix on the shared tensor grid. Returns `(C, error estimate, asymmetry, nodes)`.
pub fn compute_c(p: &HestonParams, claims: &ClaimSet, cfg: &QuadratureConfig) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>, f64, usize)> {
    for c in &claims.options {
        check_moments(c, p)?;
    }
    let n = claims.len();
    let groups = strip_groups(claims);
    let grid = half_grid(cfg);
    let c0 = p.sigma * p.sigma * (1.0 - p.rho * p.rho) / (2.0 * PI * PI);
    let nodes = time_rule(p, cfg.time_nodes);
    let parts: Result<Vec<_>> = nodes
        .par_iter()
        .map(|&(t, _)| c_time_node(t, &groups, claims, &grid, cfg, p))
        .collect();
    let parts = parts?;
    let mut c = DMatrix::<f64>::zeros(n, n);
    let mut c_half = DMatrix::<f64>::zeros(n, n);
    for ((full, half), &(_, w)) in parts.iter().zip(&nodes) {
        c += full * (w * c0);
        c_half += half * (w * c0);
    }
    let scale = c.amax().max(f64::MIN_POSITIVE);
    let asym = (&c - c.transpose()).amax() / scale;
    let sym = (&c + c.transpose()) * 0.5;
    let err = (&sym - (&c_half + c_half.transpose()) * 0.5).abs();
    for i in 0..n {
        if sym[(i, i)] <= 0.0 {
            return Err(HedgeError::QuadratureFailure(format!("C[{i},{i}] = {} not positive", sym[(i, i)])));
        }
    }
    let n_nodes = grid.y.len() * 2 * grid.y.len() * groups.len() * (groups.len() + 1) / 2;
    let to_rows = |m: &DMatrix<f64>| (0..n).map(|i| (0..n).map(|j| m[(i, j)]).collect()).collect();
    Ok((to_rows(&sym), to_rows(&err), asym, n_nodes))
}

/// Single entry `C_ij` by nested adaptive strip integrals at each time node.
pub fn compute_c_entry(p: &HestonParams, ci: &ClaimSpec, cj: &ClaimSpec, cfg: &QuadratureConfig) -> Result<(f64, f64)> {
    check_moments(ci, p)?;
    check_moments(cj, p)?;
    let c0 = p.sigma * p.sigma * (1.0 - p.rho * p.rho) / (4.0 * PI * PI);
    let (lki, lkj) = (ci.k().ln(), cj.k().ln());
    let opts = cfg.strip_options();
    let (mut val, mut err) = (0.0, 0.0);
    for (t, w) in time_rule(p, cfg.time_nodes) {
        let tau = p.maturity - t;
        let outer = |u1: C64| -> Result<C64> {
            let c1 = char_exponents(tau, u1, ZERO, p)?;
            let f1 = c1.psi * ((1.0 - u1) * lki).exp() / (u1 * (u1 - 1.0));
            let inner = |u2: C64| -> Result<C64> {
                let c2 = char_exponents(tau, u2, ZERO, p)?;
                let f2 = c2.psi * ((1.0 - u2) * lkj).exp() / (u2 * (u2 - 1.0));
                let g = crate::heston::hhv_from_parts(t, u1 + u2, c1.phi + c2.phi, c1.psi + c2.psi, p)?;
                Ok(f2 * g)
            };
            let r = integrate_strip(inner, cj.r(), cfg.strip_tol, Symmetry::None, opts)?;
            Ok(f1 * r.value)
        };
        let r = integrate_strip(outer, ci.r(), cfg.strip_tol, Symmetry::Conjugate, opts)?;
        val += w * c0 * r.value.re;
        err += w * c0 * r.abs_err;
    }
    Ok((val, err))
}

/// Hash of everything the moment data depends on.
pub fn params_hash(p: &HestonParams, claims: &ClaimSet, cfg: &QuadratureConfig) -> String {
    #[derive(Serialize)]
    struct Key<'a> {
        params: &'a HestonParams,
        claims: &'a ClaimSet,
        quadrature: &'a QuadratureConfig,
    }
    let json = serde_json::to_string(&Key { params: p, claims, quadrature: cfg }).expect("serializable");
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Full moment data.
pub fn compute_moments(p: &HestonParams, claims: &ClaimSet, cfg: &QuadratureConfig) -> Result<MomentData> {
    claims.validate(p)?;
    let a = compute_a(p);
    let (b, b_err, b_evals) = compute_b(p, claims, cfg)?;
    let (c, c_err, c_asymmetry, c_nodes) = compute_c(p, claims, cfg)?;
    let m = MomentData {
        a,
        b,
        c,
        k_star: swap_rate(p),
        swap_k: claims.target.swap_k,
        claims: claims.options.clone(),
        quad_meta: QuadMeta {
            a_err: (a - compute_a_quadrature(p, 64)).abs(),
            b_err,
            b_evals,
            c_err,
            c_nodes,
            time_nodes: cfg.time_nodes,
            c_asymmetry,
        },
        params_hash: params_hash(p, claims, cfg),
    };
    let tr: f64 = (0..m.n()).map(|i| m.c[i][i]).sum();
    let min_ev = m.c_matrix().symmetric_eigen().eigenvalues.min();
    if min_ev < -1e-10 * tr {
        log::warn!("C has eigenvalue {min_ev:e} below -1e-10 trace");
    }
    Ok(m)
}

/// On-disk cache of moment data keyed by `params_hash`.
#[derive(Debug, Clone)]
pub struct MomentCache {
    dir: PathBuf,
}

impl MomentCache {
    pub fn new(dir: impl AsRef<Path>) -> Self {
        MomentCache { dir: dir.as_ref().to_path_buf() }
    }

    pub fn path(&self, hash: &str) -> PathBuf {
        self.dir.join(format!("{hash}.json"))
    }

    pub fn load(&self, hash: &str) -> Option<MomentData> {
        let s = std::fs::read_to_string(self.path(hash)).ok()?;
        MomentData::from_json(&s).ok().filter(|m| m.params_hash == hash)
    }

    pub fn store(&self, m: &MomentData) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.dir)?;
        let path = self.path(&m.params_hash);
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, m.to_json()?)?;
        std::fs::rename(&tmp, &path)?;
        Ok(path)
    }

    /// Load if present, otherwise compute and store. The flag reports a cache hit.
    pub fn get_or_compute(&self, p: &HestonParams, claims: &ClaimSet, cfg: &QuadratureConfig) -> Result<(MomentData, bool)> {
        let hash = params_hash(p, claims, cfg);
        if let Some(m) = self.load(&hash) {
            return Ok((m, true));
        }
        let m = compute_moments(p, claims, cfg)?;
        self.store(&m)?;
        Ok((m, false))
    }
}

/// Price of a call or put by Fourier inversion along its strip.
pub fn option_price(p: &HestonParams, claim: &ClaimSpec, tol: f64) -> Result<f64> {
    check_moments(claim, p)?;
    let lk = claim.k().ln();
    let f = |u: C64| -> Result<C64> {
        let c = char_exponents(p.maturity, u, ZERO, p)?;
        Ok((u * p.x0() + c.phi + p.v0 * c.psi + (1.0 - u) * lk).exp() / (u * (u - 1.0)))
    };
    let r = integrate_strip(f, claim.r(), tol, Symmetry::Conjugate, StripOptions::default())?;
    Ok(r.value.re / (2.0 * PI))
}

/// Absolute difference between the adaptive time integral of `A` and the closed form.
pub fn a_adaptive_check(p: &HestonParams) -> Result<f64> {
    let mut f = |t: f64| {
        let g = 1.0 - (-p.lambda * (p.maturity - t)).exp();
        Ok(C64::new(g * g * mean_variance(t, p), 0.0))
    };
    let r = adaptive(&mut f, 0.0, p.maturity, 1e-15, 100_000)?;
    Ok((prefactor_a(p) * r.value.re - compute_a(p)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn a_closed_form_matches_quadrature() {
        let p = HestonParams::stylized();
        let a = compute_a(&p);
        assert!((a - compute_a_quadrature(&p, 64)).abs() < 1e-14 * a.max(1.0));
        assert!(a_adaptive_check(&p).unwrap() < 1e-15);
        let rel = a.sqrt() / swap_rate(&p);
        assert!((rel - 0.597).abs() < 0.003, "{rel}");
    }

    #[test]
    fn a_vanishes_in_limits() {
        let p = HestonParams::stylized();
        assert_eq!(compute_a(&p.with_rho(1.0)), 0.0);
        assert_eq!(compute_a(&p.with_rho(-1.0)), 0.0);
        let short = HestonParams { maturity: 1e-6, ..p };
        assert!(compute_a(&short) < 1e-18);
    }

    #[test]
    fn time_rule_integrates_smooth_functions() {
        let p = HestonParams::stylized();
        let s: f64 = time_rule(&p, 32).iter().map(|(t, w)| w * t.cos()).sum();
        assert!((s - 1f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn tensor_edges_are_increasing() {
        let e = tensor_edges(512.0);
        assert_eq!(*e.last().unwrap(), 512.0);
        assert!(e.windows(2).all(|w| w[1] > w[0]));
        let e = tensor_edges(100.0);
        assert_eq!(*e.last().unwrap(), 100.0);
    }

    #[test]
    fn option_prices_satisfy_parity() {
        let p = HestonParams::stylized();
        for k in [80.0, 100.0, 125.0] {
            let c = option_price(&p, &ClaimSpec::call(k).with_strip(2.0), 1e-12).unwrap();
            let q = option_price(&p, &ClaimSpec::put(k).with_strip(-1.0), 1e-12).unwrap();
            assert!((c - q - (p.s0 - k)).abs() < 1e-9, "K={k}: {c} {q}");
        }
    }
}
