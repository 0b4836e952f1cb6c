//! Drivers for the command-line experiments. Each command writes its CSV or
//! JSON output under the configured directory and returns a summary.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

use crate::claims::{ClaimKind, ClaimSet, ClaimSpec};
use crate::error::{HedgeError, Result};
use crate::fourier::{compute_moments, MomentCache, MomentData, QuadratureConfig};
use crate::heston::HestonParams;
use crate::mc::{estimate_residuals, realized_error_from, MomentEstimates, RealizedError, SimConfig};
use crate::numfmt::g12;
use crate::selection::{
    exact_path, greedy_backward, greedy_forward, lambda_grid, lasso_path, ExactMethod, LassoOptions, LeapsOptions,
    SelectionPath, DEFAULT_BUDGET,
};
use crate::solver::solve_unconstrained;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    LeapsAndBounds,
    BruteForce,
    GreedyForward,
    GreedyBackward,
    Lasso,
}

impl Method {
    pub fn parse(s: &str) -> Result<Method> {
        Ok(match s.trim() {
            "leaps_and_bounds" | "lb" => Method::LeapsAndBounds,
            "brute_force" | "bf" => Method::BruteForce,
            "greedy_forward" | "greedy" | "forward" => Method::GreedyForward,
            "greedy_backward" | "backward" => Method::GreedyBackward,
            "lasso" => Method::Lasso,
            other => return Err(HedgeError::Config(format!("unknown method '{other}'"))),
        })
    }

    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        s.split(',').filter(|t| !t.trim().is_empty()).map(Method::parse).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub params: Option<PathBuf>,
    pub claims: Option<PathBuf>,
    pub methods: Vec<Method>,
    pub d_max: Option<usize>,
    pub portfolio_d: Vec<usize>,
    pub lambda_count: usize,
    pub lambda_ratio: f64,
    pub rho_grid: Vec<f64>,
    pub nonneg: bool,
    pub out: PathBuf,
    pub cache: Option<PathBuf>,
    pub quadrature: QuadratureConfig,
    pub mc: SimConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            params: None,
            claims: None,
            methods: vec![Method::LeapsAndBounds, Method::GreedyForward, Method::GreedyBackward, Method::Lasso],
            d_max: None,
            portfolio_d: vec![3, 6, 12],
            lambda_count: 100,
            lambda_ratio: 1e-6,
            rho_grid: default_rho_grid(),
            nonneg: false,
            out: PathBuf::from("out"),
            cache: None,
            quadrature: QuadratureConfig::default(),
            mc: SimConfig::default(),
        }
    }
}

/// 21 equally spaced points on `[-0.95, 0.95]`.
pub fn default_rho_grid() -> Vec<f64> {
    (0..21).map(|i| -0.95 + 0.095 * i as f64).collect()
}

/// Comma list `a,b,c` or range `start:stop:count`.
pub fn parse_rho_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || HedgeError::Config(format!("invalid rho grid '{s}'"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if n < 2 {
            return Ok(vec![a]);
        }
        return Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect());
    }
    s.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| bad())).collect()
}

/// Process exit code for an error: 2 configuration, 3 quadrature/numerics, 1 otherwise.
pub fn exit_code(e: &HedgeError) -> i32 {
    match e {
        HedgeError::Config(_)
        | HedgeError::Io(_)
        | HedgeError::InvalidParams(_)
        | HedgeError::InvalidClaim(_)
        | HedgeError::Dimension(_)
        | HedgeError::PoleError(_) => 2,
        HedgeError::QuadratureFailure(_)
        | HedgeError::NonFiniteResult(_)
        | HedgeError::BranchAmbiguity(_)
        | HedgeError::DomainViolation(_)
        | HedgeError::NoValidStrip(_)
        | HedgeError::ImaginaryResidue(_) => 3,
        _ => 1,
    }
}

pub const MC_EXIT: i32 = 4;

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path).map_err(|e| HedgeError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&s).map_err(|e| HedgeError::Config(format!("{}: {e}", path.display())))
    }

    pub fn load_params(&self) -> Result<HestonParams> {
        match &self.params {
            Some(p) => HestonParams::from_json_file(p).map_err(as_config),
            None => Ok(HestonParams::stylized()),
        }
    }

    /// Claims file, or the out-of-the-money grid 50..150 step 5.
    pub fn load_claims(&self, p: &HestonParams) -> Result<ClaimSet> {
        match &self.claims {
            Some(c) => ClaimSet::from_json_file(c, p).map_err(as_config),
            None => ClaimSet::otm_grid(p, 50.0, 150.0, 5.0),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if let Some(d) = self.d_max {
            if d > n {
                return Err(HedgeError::Config(format!("d_max {d} exceeds the {n} options")));
            }
        }
        if self.rho_grid.iter().any(|r| !(r.abs() < 1.0)) {
            return Err(HedgeError::Config("rho grid must lie in (-1, 1)".into()));
        }
        if self.lambda_count == 0 || !(self.lambda_ratio > 0.0 && self.lambda_ratio < 1.0) {
            return Err(HedgeError::Config("lambda grid needs count >= 1 and ratio in (0, 1)".into()));
        }
        Ok(())
    }

    fn out_file(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out)?;
        Ok(self.out.join(name))
    }
}

fn as_config(e: HedgeError) -> HedgeError {
    match e {
        HedgeError::Io(s) => HedgeError::Config(s),
        other => other,
    }
}

/// Moments for `(p, claims)` through the cache when one is configured.
pub fn load_moments(cfg: &ExperimentConfig, p: &HestonParams, claims: &ClaimSet) -> Result<(MomentData, bool)> {
    match &cfg.cache {
        Some(dir) => MomentCache::new(dir).get_or_compute(p, claims, &cfg.quadrature),
        None => Ok((compute_moments(p, claims, &cfg.quadrature)?, false)),
    }
}

fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(header);
    s.push('\n');
    for r in rows {
        s.push_str(r);
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbcSummary {
    pub a: f64,
    pub k_star: f64,
    pub rcond: f64,
    pub a_err: f64,
    pub max_b_err: f64,
    pub max_c_err: f64,
    pub c_asymmetry: f64,
    pub cache_hit: bool,
    pub seconds: f64,
    pub output: PathBuf,
}

pub fn cmd_abc(cfg: &ExperimentConfig) -> Result<AbcSummary> {
    let start = Instant::now();
    let p = cfg.load_params()?;
    let claims = cfg.load_claims(&p)?;
    cfg.validate(claims.len())?;
    let (m, hit) = load_moments(cfg, &p, &claims)?;
    let out = cfg.out_file("moments.json")?;
    fs::write(&out, m.to_json()?)?;
    let q = &m.quad_meta;
    Ok(AbcSummary {
        a: m.a,
        k_star: m.k_star,
        rcond: m.rcond(),
        a_err: q.a_err,
        max_b_err: q.b_err.iter().cloned().fold(0.0, f64::max),
        max_c_err: q.c_err.iter().flatten().cloned().fold(0.0, f64::max),
        c_asymmetry: q.c_asymmetry,
        cache_hit: hit,
        seconds: start.elapsed().as_secs_f64(),
        output: out,
    })
}

/// All requested selection paths over `d = 0..=d_max`.
pub fn run_methods(m: &MomentData, methods: &[Method], d_max: usize, nonneg: bool, cfg: &ExperimentConfig) -> Vec<SelectionPath> {
    methods
        .iter()
        .map(|&method| {
            let res = match method {
                Method::LeapsAndBounds => Ok(exact_path(m, d_max, nonneg, ExactMethod::LeapsAndBounds(LeapsOptions::default()))),
                Method::BruteForce => Ok(exact_path(m, d_max, nonneg, ExactMethod::BruteForce(DEFAULT_BUDGET))),
                Method::GreedyForward => greedy_forward(m, d_max, nonneg),
                Method::GreedyBackward => greedy_backward(m, nonneg).map(|mut p| {
                    p.entries.retain(|e| e.d <= d_max);
                    p
                }),
                Method::Lasso => {
                    let grid = lambda_grid(m, cfg.lambda_count, cfg.lambda_ratio, nonneg);
                    lasso_path(m, &grid, nonneg, LassoOptions::default())
                }
            };
            res.unwrap_or_else(|e| {
                let mut p = SelectionPath::new(&format!("{method:?}"));
                p.entries.push(crate::selection::PathEntry {
                    d: 0,
                    lambda: None,
                    support: vec![],
                    v: vec![0.0; m.n()],
                    eps2: f64::NAN,
                    rel_err: f64::NAN,
                    wall_time: 0.0,
                    note: Some(format!("error: {e}")),
                });
                p
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub paths: Vec<SelectionPath>,
    pub output: PathBuf,
}

impl SweepSummary {
    /// `rel_err` of `method` at cardinality `d`.
    pub fn rel_err(&self, method: &str, d: usize) -> Option<f64> {
        self.paths.iter().find(|p| p.method == method)?.entry(d).map(|e| e.rel_err)
    }
}

pub fn cmd_sweep_d(cfg: &ExperimentConfig) -> Result<SweepSummary> {
    let p = cfg.load_params()?;
    let claims = cfg.load_claims(&p)?;
    cfg.validate(claims.len())?;
    let (m, _) = load_moments(cfg, &p, &claims)?;
    let d_max = cfg.d_max.unwrap_or(m.n());
    let paths = run_methods(&m, &cfg.methods, d_max, cfg.nonneg, cfg);
    let strikes = claims.strikes();
    let rows: Vec<String> = paths.iter().flat_map(|p| p.csv_rows(&strikes)).collect();
    let out = cfg.out_file("sweep_d.csv")?;
    write_csv(&out, SelectionPath::CSV_HEADER, &rows)?;
    info!("sweep-d wrote {} rows", rows.len());
    Ok(SweepSummary { paths, output: out })
}

/// Least-squares slope of `ln v` against `ln K` over strictly positive weights.
pub fn log_log_slope(strikes: &[f64], v: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = strikes.iter().zip(v).filter(|(_, &w)| w > 0.0).map(|(&k, &w)| (k.ln(), w.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Each active put weight against the call weight at the mirrored strike
/// `2 S0 - K`, interpolated log-linearly between active calls (flat beyond
/// them). True when every put weight is larger.
pub fn put_dominance(claims: &[ClaimSpec], v: &[f64], spot: f64) -> Option<bool> {
    let mut calls: Vec<(f64, f64)> = claims
        .iter()
        .zip(v)
        .filter(|(c, &w)| c.kind == ClaimKind::Call && w > 0.0)
        .map(|(c, &w)| (c.k(), w))
        .collect();
    let puts: Vec<(f64, f64)> = claims
        .iter()
        .zip(v)
        .filter(|(c, &w)| c.kind == ClaimKind::Put && w > 0.0)
        .map(|(c, &w)| (c.k(), w))
        .collect();
    if calls.is_empty() || puts.is_empty() {
        return None;
    }
    calls.sort_by(|a, b| a.0.total_cmp(&b.0));
    let call_at = |k: f64| -> f64 {
        if k <= calls[0].0 {
            return calls[0].1;
        }
        if k >= calls[calls.len() - 1].0 {
            return calls[calls.len() - 1].1;
        }
        let i = calls.iter().position(|c| c.0 >= k).expect("bracketed");
        let (a, b) = (calls[i - 1], calls[i]);
        let f = (k.ln() - a.0.ln()) / (b.0.ln() - a.0.ln());
        (a.1.ln() * (1.0 - f) + b.1.ln() * f).exp()
    };
    Some(puts.iter().all(|&(k, w)| w > call_at(2.0 * spot - k)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioShape {
    pub method: String,
    pub d: usize,
    pub rel_err: f64,
    pub slope: Option<f64>,
    pub put_dominance: Option<bool>,
}

pub const PORTFOLIO_HEADER: &str = "method,d,strike,kind,weight,log_strike,log_abs_weight";

pub fn cmd_portfolio(cfg: &ExperimentConfig) -> Result<Vec<PortfolioShape>> {
    let p = cfg.load_params()?;
    let claims = cfg.load_claims(&p)?;
    cfg.validate(claims.len())?;
    if cfg.portfolio_d.iter().any(|&d| d > claims.len()) {
        return Err(HedgeError::Config(format!("portfolio d exceeds the {} options", claims.len())));
    }
    let (m, _) = load_moments(cfg, &p, &claims)?;
    let strikes = claims.strikes();
    let d_max = cfg.portfolio_d.iter().copied().max().unwrap_or(0);
    let paths = run_methods(&m, &cfg.methods, d_max, cfg.nonneg, cfg);
    let mut rows = vec![];
    let mut shapes = vec![];
    for path in &paths {
        for &d in &cfg.portfolio_d {
            // LASSO may hit a cardinality several times; the last (smallest penalty) is used
            let Some(e) = path.entries.iter().rev().find(|e| e.d == d && e.note.as_deref().is_none_or(|n| !n.starts_with("error"))) else {
                continue;
            };
            for &i in &e.support {
                let w = e.v[i];
                rows.push(format!(
                    "{},{},{},{},{},{},{}",
                    path.method,
                    d,
                    g12(strikes[i]),
                    claims.options[i].label(),
                    g12(w),
                    g12(strikes[i].ln()),
                    if w != 0.0 { g12(w.abs().ln()) } else { String::new() }
                ));
            }
            shapes.push(PortfolioShape {
                method: path.method.clone(),
                d,
                rel_err: e.rel_err,
                slope: log_log_slope(&strikes, &e.v),
                put_dominance: put_dominance(&claims.options, &e.v, p.s0),
            });
        }
    }
    write_csv(&cfg.out_file("portfolio.csv")?, PORTFOLIO_HEADER, &rows)?;
    Ok(shapes)
}

/// `c_d` of the least-squares fit `f(rho) = c_d sqrt(1 - rho^2)` and the
/// largest relative deviation over `|rho| <= window`.
pub fn semicircle_fit(rhos: &[f64], values: &[f64], window: f64) -> (f64, f64) {
    let s: Vec<f64> = rhos.iter().map(|r| (1.0 - r * r).sqrt()).collect();
    let c = values.iter().zip(&s).map(|(f, s)| f * s).sum::<f64>() / s.iter().map(|s| s * s).sum::<f64>();
    let dev = rhos
        .iter()
        .zip(values.iter().zip(&s))
        .filter(|(r, _)| r.abs() <= window + 1e-12)
        .map(|(_, (f, s))| (f - c * s).abs() / (c * s))
        .fold(0.0, f64::max);
    (c, dev)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoSweep {
    pub rhos: Vec<f64>,
    /// `rel_err[rho index][d]`
    pub rel_err: Vec<Vec<f64>>,
    /// `(d, c_d, max relative deviation on |rho| <= 0.9)`
    pub fits: Vec<(usize, f64, f64)>,
}

pub fn cmd_sweep_rho(cfg: &ExperimentConfig) -> Result<RhoSweep> {
    let base = cfg.load_params()?;
    let claims = cfg.load_claims(&base)?;
    cfg.validate(claims.len())?;
    let d_max = cfg.d_max.unwrap_or(claims.len());
    let mut table = vec![];
    let mut rows = vec![];
    for &rho in &cfg.rho_grid {
        let p = base.with_rho(rho);
        let cl = cfg.load_claims(&p)?;
        let (m, _) = load_moments(cfg, &p, &cl)?;
        let path = exact_path(&m, d_max, cfg.nonneg, ExactMethod::LeapsAndBounds(LeapsOptions::default()));
        let errs: Vec<f64> = (0..=d_max).map(|d| path.entry(d).map(|e| e.rel_err).unwrap_or(f64::NAN)).collect();
        for (d, e) in errs.iter().enumerate() {
            rows.push(format!("{},{},{},{}", g12(rho), d, path.method, g12(*e)));
        }
        info!("rho {rho}: d=0 {:.4}", errs[0]);
        table.push(errs);
    }
    write_csv(&cfg.out_file("sweep_rho.csv")?, "rho,d,method,rel_err", &rows)?;
    let fits: Vec<(usize, f64, f64)> = (0..=d_max)
        .map(|d| {
            let vals: Vec<f64> = table.iter().map(|r| r[d]).collect();
            let (c, dev) = semicircle_fit(&cfg.rho_grid, &vals, 0.9);
            (d, c, dev)
        })
        .collect();
    let fit_rows: Vec<String> = fits.iter().map(|(d, c, dev)| format!("{d},{},{}", g12(*c), g12(*dev))).collect();
    write_csv(&cfg.out_file("semicircle_fit.csv")?, "d,c_d,max_rel_dev", &fit_rows)?;
    Ok(RhoSweep { rhos: cfg.rho_grid.clone(), rel_err: table, fits })
}

/// Four options used for the Monte-Carlo comparison when no claims file is given.
pub fn mc_default_claims(p: &HestonParams) -> Result<ClaimSet> {
    let opts = vec![ClaimSpec::put(70.0), ClaimSpec::put(90.0), ClaimSpec::call(100.0), ClaimSpec::call(120.0)];
    ClaimSet::new(ClaimSpec::variance_swap(None), opts, p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizedCheck {
    pub label: String,
    pub v: Vec<f64>,
    pub analytic_eps2: f64,
    pub mc: RealizedError,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub config: SimConfig,
    pub strikes: Vec<f64>,
    pub analytic_a: f64,
    pub analytic_b: Vec<f64>,
    pub analytic_c: Vec<Vec<f64>>,
    pub estimates: MomentEstimates,
    pub z_a: f64,
    pub z_b: Vec<f64>,
    pub z_c: Vec<Vec<f64>>,
    pub residual_mean_z: Vec<f64>,
    pub realized: Vec<RealizedCheck>,
    pub max_abs_z: f64,
    pub threshold: f64,
    pub passed: bool,
    pub seconds: f64,
}

pub const MC_Z_THRESHOLD: f64 = 4.0;

fn z(est: f64, exact: f64, se: f64) -> f64 {
    if se > 0.0 {
        (est - exact) / se
    } else if est == exact {
        0.0
    } else {
        f64::INFINITY
    }
}

/// z-scores of Monte-Carlo estimates against analytic moments.
pub fn compare_moments(m: &MomentData, e: &MomentEstimates, cfg: &SimConfig, realized: Vec<RealizedCheck>, strikes: Vec<f64>) -> McReport {
    let n = m.n();
    let z_a = z(e.a, m.a, e.a_se);
    let z_b: Vec<f64> = (0..n).map(|i| z(e.b[i], m.b[i], e.b_se[i])).collect();
    let z_c: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| z(e.c[i][j], m.c[i][j], e.c_se[i][j])).collect()).collect();
    let residual_mean_z: Vec<f64> = e.residual_means.iter().zip(&e.residual_mean_se).map(|(a, s)| z(*a, 0.0, *s)).collect();
    let max_abs_z = std::iter::once(z_a)
        .chain(z_b.iter().copied())
        .chain(z_c.iter().flatten().copied())
        .chain(residual_mean_z.iter().copied())
        .chain(realized.iter().map(|r| r.z))
        .map(f64::abs)
        .fold(0.0, f64::max);
    McReport {
        config: cfg.clone(),
        strikes,
        analytic_a: m.a,
        analytic_b: m.b.clone(),
        analytic_c: m.c.clone(),
        estimates: e.clone(),
        z_a,
        z_b,
        z_c,
        residual_mean_z,
        realized,
        max_abs_z,
        threshold: MC_Z_THRESHOLD,
        passed: max_abs_z <= MC_Z_THRESHOLD,
        seconds: 0.0,
    }
}

/// Monte-Carlo moments and realized errors against the analytic layer.
/// `a_scale` multiplies the analytic `A` (1 for a normal run).
pub fn cmd_mc_check(cfg: &ExperimentConfig, a_scale: f64) -> Result<McReport> {
    let start = Instant::now();
    let p = cfg.load_params()?;
    let claims = match &cfg.claims {
        Some(_) => cfg.load_claims(&p)?,
        None => mc_default_claims(&p)?,
    };
    cfg.mc.validate()?;
    let (mut m, _) = load_moments(cfg, &p, &claims)?;
    m.a *= a_scale;
    let sample = estimate_residuals(&p, &claims, &cfg.mc)?;
    let est = sample.moments();
    let opt = solve_unconstrained(&m);
    let mut realized = vec![];
    for (label, v) in [("zero", vec![0.0; m.n()]), ("optimal", opt.v.clone())] {
        let r = realized_error_from(&sample, &v)?;
        let exact = crate::solver::hedging_error(&v, &m);
        realized.push(RealizedCheck { label: label.into(), z: z(r.eps2, exact, r.se), v, analytic_eps2: exact, mc: r });
    }
    let mut report = compare_moments(&m, &est, &cfg.mc, realized, claims.strikes());
    report.seconds = start.elapsed().as_secs_f64();
    fs::write(cfg.out_file("mc_check.json")?, serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}
