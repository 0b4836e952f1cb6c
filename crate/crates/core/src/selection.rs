//! Best-subset selection for the cardinality-constrained hedge.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HedgeError, Result};
use crate::fourier::MomentData;
use crate::numfmt::g12;
use crate::solver::{hedging_error, nnls_quadratic, rel_err, rhc_with, HedgeSolution, SymSolve};

pub const DEFAULT_BUDGET: u128 = 2_000_000;

/// Exact or heuristic result for one cardinality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub support: Vec<usize>,
    pub solution: HedgeSolution,
    /// false when a search was stopped by its time limit
    pub certified: bool,
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEntry {
    pub d: usize,
    pub lambda: Option<f64>,
    pub support: Vec<usize>,
    pub v: Vec<f64>,
    pub eps2: f64,
    pub rel_err: f64,
    pub wall_time: f64,
    /// set for failures, uncertified searches and non-converged LASSO runs
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionPath {
    pub method: String,
    pub entries: Vec<PathEntry>,
}

impl SelectionPath {
    pub fn new(method: &str) -> Self {
        SelectionPath { method: method.to_string(), entries: vec![] }
    }

    pub fn entry(&self, d: usize) -> Option<&PathEntry> {
        self.entries.iter().find(|e| e.d == d)
    }

    pub const CSV_HEADER: &'static str = "method,d,lambda,rel_err,support,weights";

    /// One row per entry; support as strikes and weights `;`-separated.
    pub fn csv_rows(&self, strikes: &[f64]) -> Vec<String> {
        self.entries
            .iter()
            .map(|e| {
                let support: Vec<String> = e.support.iter().map(|&i| g12(strikes[i])).collect();
                let weights: Vec<String> = e.support.iter().map(|&i| g12(e.v[i])).collect();
                format!(
                    "{},{},{},{},{},{}",
                    self.method,
                    e.d,
                    e.lambda.map(g12).unwrap_or_default(),
                    if e.note.as_deref().is_some_and(|n| n.starts_with("error")) { String::new() } else { g12(e.rel_err) },
                    support.join(";"),
                    weights.join(";")
                )
            })
            .collect()
    }
}

fn entry_from(d: usize, support: Vec<usize>, s: &HedgeSolution, start: Instant, note: Option<String>) -> PathEntry {
    PathEntry {
        d,
        lambda: None,
        support,
        v: s.v.clone(),
        eps2: s.eps2,
        rel_err: s.rel_err,
        wall_time: start.elapsed().as_secs_f64(),
        note,
    }
}

fn sub_c(m: &MomentData, s: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(s.len(), s.len(), |a, b| m.c[s[a]][s[b]])
}

fn sub_b(m: &MomentData, s: &[usize]) -> DVector<f64> {
    DVector::from_fn(s.len(), |a, _| m.b[s[a]])
}

/// Optimal hedge restricted to `support` (sorted), full-length weights.
pub fn subset_solve(m: &MomentData, support: &[usize], nonneg: bool) -> Result<HedgeSolution> {
    let mut v = vec![0.0; m.n()];
    if !support.is_empty() {
        let c = sub_c(m, support);
        let b = sub_b(m, support);
        let vs = if nonneg { nnls_quadratic(&c, &b)?.0 } else { SymSolve::new(&c).solve(&b) };
        for (a, &i) in support.iter().enumerate() {
            v[i] = vs[a];
        }
    }
    Ok(HedgeSolution::from_weights(v, m, if nonneg { "subset_nonneg" } else { "subset" }))
}

/// Unconstrained error on `support`, used as a lower bound.
fn bound_eps2(m: &MomentData, support: &[usize]) -> f64 {
    if support.is_empty() {
        return m.a;
    }
    let b = sub_b(m, support);
    let vs = SymSolve::new(&sub_c(m, support)).solve(&b);
    m.a - b.dot(&vs)
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// `(eps2, support)` ordering with lexicographic tie-break.
fn better(a: (f64, &[usize]), b: (f64, &[usize])) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Exhaustive search over all subsets of size `min(d, n)`.
pub fn brute_force(m: &MomentData, d: usize, nonneg: bool, budget: u128) -> Result<Selection> {
    let n = m.n();
    let k = d.min(n);
    let count = binomial(n, k);
    if count > budget {
        return Err(HedgeError::BudgetExceeded { needed: count, budget });
    }
    let mut flat: Vec<u16> = Vec::with_capacity(count as usize * k);
    let mut comb: Vec<usize> = (0..k).collect();
    loop {
        flat.extend(comb.iter().map(|&i| i as u16));
        // next combination in lexicographic order
        let mut i = k;
        while i > 0 && comb[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        comb[i - 1] += 1;
        for j in i..k {
            comb[j] = comb[j - 1] + 1;
        }
    }
    let eval = |s: &[u16]| -> Result<(f64, Vec<usize>)> {
        let s: Vec<usize> = s.iter().map(|&i| i as usize).collect();
        Ok((subset_solve(m, &s, nonneg)?.eps2, s))
    };
    let best = if k == 0 {
        (m.a, vec![])
    } else {
        flat.par_chunks(k)
            .map(eval)
            .try_reduce_with(|a, b| Ok(if better((b.0, &b.1), (a.0, &a.1)) { b } else { a }))
            .expect("non-empty")?
    };
    let mut solution = subset_solve(m, &best.1, nonneg)?;
    solution.method = "brute_force".into();
    Ok(Selection { support: best.1, solution, certified: true, nodes: count as usize })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeapsOptions {
    pub timeout: Option<Duration>,
}

impl Default for LeapsOptions {
    fn default() -> Self {
        LeapsOptions { timeout: Some(Duration::from_secs(600)) }
    }
}

struct Search<'a> {
    m: &'a MomentData,
    d: usize,
    nonneg: bool,
    order: Vec<usize>,
    best: (f64, Vec<usize>),
    slack: f64,
    nodes: usize,
    deadline: Option<Instant>,
    timed_out: bool,
}

impl Search<'_> {
    fn leaf(&mut self, chosen: &[usize]) -> Result<()> {
        let mut s = chosen.to_vec();
        s.sort_unstable();
        let e = subset_solve(self.m, &s, self.nonneg)?.eps2;
        if better((e, &s), (self.best.0, &self.best.1)) {
            self.best = (e, s);
        }
        Ok(())
    }

    fn visit(&mut self, chosen: &mut Vec<usize>, next: usize) -> Result<()> {
        self.nodes += 1;
        if let Some(dl) = self.deadline {
            if self.nodes % 64 == 0 && Instant::now() > dl {
                self.timed_out = true;
            }
        }
        if self.timed_out {
            return Ok(());
        }
        let remaining = self.order.len() - next;
        if chosen.len() == self.d {
            return self.leaf(chosen);
        }
        if chosen.len() + remaining < self.d {
            return Ok(());
        }
        if chosen.len() + remaining == self.d {
            let mut all = chosen.clone();
            all.extend_from_slice(&self.order[next..]);
            return self.leaf(&all);
        }
        let mut pool = chosen.clone();
        pool.extend_from_slice(&self.order[next..]);
        pool.sort_unstable();
        if bound_eps2(self.m, &pool) > self.best.0 + self.slack {
            return Ok(());
        }
        let c = self.order[next];
        chosen.push(c);
        self.visit(chosen, next + 1)?;
        chosen.pop();
        self.visit(chosen, next + 1)
    }
}

/// Branch-and-bound best subset of size `min(d, n)`.
pub fn leaps_and_bounds(m: &MomentData, d: usize, nonneg: bool, opts: LeapsOptions) -> Result<Selection> {
    let n = m.n();
    if n > 64 {
        return Err(HedgeError::Dimension(format!("n = {n} exceeds 64")));
    }
    let k = d.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let score = |i: usize| if m.c[i][i] > 0.0 { m.b[i] * m.b[i] / m.c[i][i] } else { 0.0 };
    order.sort_by(|&i, &j| score(j).total_cmp(&score(i)).then(i.cmp(&j)));
    let greedy = greedy_forward(m, k, nonneg)?;
    let start = greedy.entry(k).map(|e| e.support.clone()).unwrap_or_default();
    let start = if start.len() == k { start } else { order[..k].to_vec() };
    let mut start = start;
    start.sort_unstable();
    let e0 = subset_solve(m, &start, nonneg)?.eps2;
    let mut search = Search {
        m,
        d: k,
        nonneg,
        order,
        best: (e0, start),
        slack: 1e-8 * m.a.abs().max(f64::MIN_POSITIVE),
        nodes: 0,
        deadline: opts.timeout.map(|t| Instant::now() + t),
        timed_out: false,
    };
    search.visit(&mut Vec::with_capacity(k), 0)?;
    let support = search.best.1.clone();
    let mut solution = subset_solve(m, &support, nonneg)?;
    solution.method = "leaps_and_bounds".into();
    Ok(Selection { support, solution, certified: !search.timed_out, nodes: search.nodes })
}

fn candidate_rhc(m: &MomentData, active: &[usize], j: usize, solver: &SymSolve, sub: &MomentData) -> f64 {
    let k: Vec<f64> = active.iter().map(|&i| m.c[i][j]).collect();
    rhc_with(solver, sub, &k, m.b[j], m.c[j][j]).unwrap_or(0.0)
}

/// Forward selection adding the asset with the largest relative hedge
/// contribution (or, with `nonneg`, the smallest constrained error).
pub fn greedy_forward(m: &MomentData, d_max: usize, nonneg: bool) -> Result<SelectionPath> {
    let start = Instant::now();
    let n = m.n();
    let mut path = SelectionPath::new("greedy_forward");
    let mut active: Vec<usize> = vec![];
    let s0 = subset_solve(m, &[], nonneg)?;
    path.entries.push(entry_from(0, vec![], &s0, start, None));
    for d in 1..=d_max.min(n) {
        let inactive: Vec<usize> = (0..n).filter(|i| !active.contains(i)).collect();
        let pick = if nonneg {
            let mut best: Option<(f64, usize)> = None;
            for &j in &inactive {
                let mut s = active.clone();
                s.push(j);
                s.sort_unstable();
                let e = subset_solve(m, &s, true)?.eps2;
                if best.is_none_or(|b| e < b.0) {
                    best = Some((e, j));
                }
            }
            best.expect("inactive non-empty").1
        } else {
            let mut sorted = active.clone();
            sorted.sort_unstable();
            let sub = m.subset(&sorted);
            let solver = SymSolve::new(&sub.c_matrix());
            let mut best: Option<(f64, usize)> = None;
            for &j in &inactive {
                let r = candidate_rhc(m, &sorted, j, &solver, &sub);
                if best.is_none_or(|b| r > b.0) {
                    best = Some((r, j));
                }
            }
            best.expect("inactive non-empty").1
        };
        active.push(pick);
        let mut s = active.clone();
        s.sort_unstable();
        let sol = subset_solve(m, &s, nonneg)?;
        path.entries.push(entry_from(d, s, &sol, start, None));
    }
    Ok(path)
}

/// Backward elimination from the full set, removing the asset whose removal
/// increases the error least.
pub fn greedy_backward(m: &MomentData, nonneg: bool) -> Result<SelectionPath> {
    let start = Instant::now();
    let n = m.n();
    let mut path = SelectionPath::new("greedy_backward");
    let mut active: Vec<usize> = (0..n).collect();
    let full = subset_solve(m, &active, nonneg)?;
    path.entries.push(entry_from(n, active.clone(), &full, start, None));
    while !active.is_empty() {
        let mut best: Option<(f64, usize)> = None;
        for (pos, _) in active.iter().enumerate() {
            let mut s = active.clone();
            s.remove(pos);
            let e = subset_solve(m, &s, nonneg)?.eps2;
            if best.is_none_or(|b| e < b.0) {
                best = Some((e, pos));
            }
        }
        active.remove(best.expect("non-empty").1);
        let sol = subset_solve(m, &active, nonneg)?;
        path.entries.push(entry_from(active.len(), active.clone(), &sol, start, None));
    }
    path.entries.reverse();
    Ok(path)
}

/// Exact path over `d = 0..=d_max` with one search per cardinality.
pub fn exact_path(m: &MomentData, d_max: usize, nonneg: bool, method: ExactMethod) -> SelectionPath {
    let name = match method {
        ExactMethod::BruteForce(_) => "brute_force",
        ExactMethod::LeapsAndBounds(_) => "leaps_and_bounds",
    };
    let mut path = SelectionPath::new(name);
    for d in 0..=d_max.min(m.n()) {
        let start = Instant::now();
        let res = match method {
            ExactMethod::BruteForce(budget) => brute_force(m, d, nonneg, budget),
            ExactMethod::LeapsAndBounds(opts) => leaps_and_bounds(m, d, nonneg, opts),
        };
        let e = match res {
            Ok(sel) => {
                let note = (!sel.certified).then(|| "timeout: not certified".to_string());
                entry_from(d, sel.support.clone(), &sel.solution, start, note)
            }
            Err(e) => PathEntry {
                d,
                lambda: None,
                support: vec![],
                v: vec![0.0; m.n()],
                eps2: f64::NAN,
                rel_err: f64::NAN,
                wall_time: start.elapsed().as_secs_f64(),
                note: Some(format!("error: {e}")),
            },
        };
        path.entries.push(e);
    }
    path
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExactMethod {
    BruteForce(u128),
    LeapsAndBounds(LeapsOptions),
}

/// Outcome of one LASSO solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoResult {
    pub lambda: f64,
    pub v: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOptions {
    pub max_sweeps: usize,
    pub tol: f64,
    /// sweeps between exact solves on the current signed support
    pub polish_every: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions { max_sweeps: 200_000, tol: 1e-12, polish_every: 25 }
    }
}

/// KKT residual of `min v'Cv - 2v'B + lambda |v|_1` (with optional `v >= 0`).
pub fn lasso_kkt(m: &MomentData, v: &[f64], lambda: f64, nonneg: bool) -> f64 {
    let n = m.n();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let g: f64 = 2.0 * ((0..n).map(|j| m.c[i][j] * v[j]).sum::<f64>() - m.b[i]);
        let r = if v[i] > 0.0 {
            (g + lambda).abs()
        } else if v[i] < 0.0 {
            if nonneg { f64::INFINITY } else { (g - lambda).abs() }
        } else if nonneg {
            (-g - lambda).max(0.0)
        } else {
            (g.abs() - lambda).max(0.0)
        };
        worst = worst.max(r);
    }
    worst
}

fn soft(x: f64, t: f64, nonneg: bool) -> f64 {
    if x > t {
        x - t
    } else if x < -t && !nonneg {
        x + t
    } else {
        0.0
    }
}

/// Exact minimizer on the signed support of `v`, if it keeps the signs and
/// satisfies the KKT conditions.
fn polish(m: &MomentData, v: &[f64], lambda: f64, nonneg: bool) -> Option<Vec<f64>> {
    let s: Vec<usize> = (0..m.n()).filter(|&i| v[i] != 0.0).collect();
    if s.is_empty() {
        return None;
    }
    let c = sub_c(m, &s);
    let rhs = DVector::from_fn(s.len(), |a, _| m.b[s[a]] - 0.5 * lambda * v[s[a]].signum());
    let ch = c.cholesky()?;
    let x = ch.solve(&rhs);
    let mut out = vec![0.0; m.n()];
    for (a, &i) in s.iter().enumerate() {
        if x[a].signum() != v[i].signum() || x[a] == 0.0 {
            return None;
        }
        out[i] = x[a];
    }
    (lasso_kkt(m, &out, lambda, nonneg) <= 1e-10 * (1.0 + lambda)).then_some(out)
}

/// Cyclic coordinate descent for one penalty level.
pub fn lasso(m: &MomentData, lambda: f64, nonneg: bool, warm: Option<&[f64]>, opts: LassoOptions) -> LassoResult {
    let n = m.n();
    let mut v: Vec<f64> = warm.map(|w| w.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let mut cv: Vec<f64> = (0..n).map(|i| (0..n).map(|j| m.c[i][j] * v[j]).sum()).collect();
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut max_step: f64 = 0.0;
        for i in 0..n {
            let cii = m.c[i][i];
            if cii <= 0.0 {
                continue;
            }
            let r = m.b[i] - (cv[i] - cii * v[i]);
            let new = soft(r, 0.5 * lambda, nonneg) / cii;
            let step = new - v[i];
            if step != 0.0 {
                for j in 0..n {
                    cv[j] += m.c[j][i] * step;
                }
                v[i] = new;
                max_step = max_step.max(step.abs());
            }
        }
        if max_step < opts.tol {
            converged = true;
            break;
        }
        if sweeps % opts.polish_every == 0 {
            if let Some(p) = polish(m, &v, lambda, nonneg) {
                v = p;
                cv = (0..n).map(|i| (0..n).map(|j| m.c[i][j] * v[j]).sum()).collect();
            }
        }
    }
    let kkt = lasso_kkt(m, &v, lambda, nonneg);
    LassoResult { lambda, v, sweeps, converged, kkt_residual: kkt }
}

/// Geometric penalty grid from `2 max|B|` (where `v = 0` is optimal) down by `ratio`.
pub fn lambda_grid(m: &MomentData, count: usize, ratio: f64, nonneg: bool) -> Vec<f64> {
    let top = 2.0 * m.b.iter().map(|&b| if nonneg { b.max(0.0) } else { b.abs() }).fold(0.0, f64::max);
    if count <= 1 {
        return vec![top];
    }
    (0..count).map(|k| top * ratio.powf(k as f64 / (count - 1) as f64)).collect()
}

/// LASSO solutions along a decreasing penalty grid with warm starts.
pub fn lasso_path(m: &MomentData, lambdas: &[f64], nonneg: bool, opts: LassoOptions) -> Result<SelectionPath> {
    if lambdas.iter().any(|&l| !(l > 0.0)) {
        return Err(HedgeError::Config("LASSO penalties must be positive".into()));
    }
    let mut path = SelectionPath::new("lasso");
    let mut warm: Option<Vec<f64>> = None;
    for &lambda in lambdas {
        let start = Instant::now();
        let r = lasso(m, lambda, nonneg, warm.as_deref(), opts);
        let eps2 = hedging_error(&r.v, m);
        let support: Vec<usize> = (0..m.n()).filter(|&i| r.v[i] != 0.0).collect();
        path.entries.push(PathEntry {
            d: support.len(),
            lambda: Some(lambda),
            support,
            v: r.v.clone(),
            eps2,
            rel_err: rel_err(eps2, m),
            wall_time: start.elapsed().as_secs_f64(),
            note: (!r.converged).then(|| format!("not converged after {} sweeps", r.sweeps)),
        });
        warm = Some(r.v);
    }
    Ok(path)
}
