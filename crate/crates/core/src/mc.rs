//! Monte-Carlo oracle: full-truncation Euler paths, pathwise hedging
//! residuals and moment estimates with block-jackknife standard errors.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::claims::{choose_strip, ClaimKind, ClaimSet, ClaimSpec};
use crate::error::{HedgeError, Result};
use crate::fourier::option_price;
use crate::heston::{char_exponents, swap_rate, HestonParams, C64};
use crate::quadrature::{integrate_strip, StripOptions, Symmetry};

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    FullTruncationEuler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    /// time steps per unit of maturity
    pub n_steps: usize,
    pub seed: u64,
    #[serde(default)]
    pub scheme: Scheme,
    /// normals are drawn on a grid this many times finer and aggregated,
    /// so runs with different `n_steps` share Brownian paths
    #[serde(default = "one")]
    pub fine_factor: usize,
    #[serde(default)]
    pub residual: ResidualScheme,
}

/// How the pathwise residual `payoff - price_0 - sum theta dS` is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ResidualScheme {
    /// plain left-point gains
    LeftPoint,
    /// left-point gains minus the zero-mean second-order Ito-Taylor terms
    /// `P_xx - theta S`, `P_xV`, `P_VV` of each step
    #[default]
    SecondOrder,
}

fn one() -> usize {
    1
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_paths: 100_000,
            n_steps: 500,
            seed: 42,
            scheme: Scheme::FullTruncationEuler,
            fine_factor: 1,
            residual: ResidualScheme::SecondOrder,
        }
    }
}

impl SimConfig {
    pub fn new(n_paths: usize, n_steps: usize, seed: u64) -> Self {
        SimConfig { n_paths, n_steps, seed, ..Default::default() }
    }

    pub fn steps_for(&self, maturity: f64) -> usize {
        ((self.n_steps as f64 * maturity).round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 || self.n_steps == 0 || self.fine_factor == 0 {
            return Err(HedgeError::Config("n_paths, n_steps and fine_factor must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct PathState {
    x: f64,
    v: f64,
    rng: ChaCha8Rng,
}

impl PathState {
    fn new(p: &HestonParams, seed: u64, path: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path);
        PathState { x: p.x0(), v: p.v0, rng }
    }

    fn normals(&mut self, fine: usize) -> (f64, f64) {
        let (mut a, mut b) = (0.0, 0.0);
        for _ in 0..fine {
            a += self.rng.sample::<f64, _>(StandardNormal);
            b += self.rng.sample::<f64, _>(StandardNormal);
        }
        let s = (fine as f64).sqrt();
        (a / s, b / s)
    }

    /// One full-truncation Euler step; returns `V+` at the left point.
    fn step(&mut self, dt: f64, p: &HestonParams, fine: usize) -> f64 {
        let (z1, z2) = self.normals(fine);
        let vp = self.v.max(0.0);
        let sq = (vp * dt).sqrt();
        let zv = p.rho * z1 + (1.0 - p.rho * p.rho).sqrt() * z2;
        self.x += -0.5 * vp * dt + sq * z1;
        self.v += p.lambda * (p.kappa - vp) * dt + p.sigma * sq * zv;
        vp
    }
}

/// Simulated `(X, V)` on the time grid, row-major by path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub n_paths: usize,
}

impl PathBatch {
    pub fn x_path(&self, i: usize) -> &[f64] {
        let m = self.times.len();
        &self.x[i * m..(i + 1) * m]
    }

    pub fn v_path(&self, i: usize) -> &[f64] {
        let m = self.times.len();
        &self.v[i * m..(i + 1) * m]
    }
}

pub fn simulate_paths(p: &HestonParams, cfg: &SimConfig) -> Result<PathBatch> {
    p.validate()?;
    cfg.validate()?;
    let n = cfg.steps_for(p.maturity);
    let dt = p.maturity / n as f64;
    let m = n + 1;
    let mut x = vec![0.0; cfg.n_paths * m];
    let mut v = vec![0.0; cfg.n_paths * m];
    x.par_chunks_mut(m).zip(v.par_chunks_mut(m)).enumerate().for_each(|(i, (xs, vs))| {
        let mut s = PathState::new(p, cfg.seed, i as u64);
        xs[0] = s.x;
        vs[0] = s.v;
        for k in 1..m {
            s.step(dt, p, cfg.fine_factor);
            xs[k] = s.x;
            vs[k] = s.v;
        }
    });
    Ok(PathBatch { times: (0..m).map(|k| k as f64 * dt).collect(), x, v, n_paths: cfg.n_paths })
}

/// Hedge ratio of the variance swap, `rho sigma (1 - e^{-lambda (T-t)}) / (lambda S)`.
pub fn strategy_theta0(t: f64, s: f64, _v: f64, p: &HestonParams) -> f64 {
    let tau = (p.maturity - t).max(0.0);
    p.rho * p.sigma * (-(-p.lambda * tau).exp_m1()) / (p.lambda * s)
}

/// Hedge ratio of `exp(u X_T)`: `H_t(u) (u + rho sigma psi_{T-t}(u)) / S_t`.
pub fn strategy_theta_u(t: f64, x: f64, v: f64, u: C64, p: &HestonParams) -> Result<C64> {
    if !(0.0..=p.maturity).contains(&t) {
        return Err(HedgeError::DomainViolation(format!("t={t} outside [0, {}]", p.maturity)));
    }
    let c = char_exponents(p.maturity - t, u, ZERO, p)?;
    let h = (u * x + c.phi + v * c.psi).exp();
    Ok(h * (u + p.rho * p.sigma * c.psi) / x.exp())
}

/// Option hedge ratio by direct strip integration of `theta(u) f(u)`.
pub fn strategy_theta_option(t: f64, x: f64, v: f64, claim: &ClaimSpec, p: &HestonParams, tol: f64) -> Result<f64> {
    let lk = claim.k().ln();
    let tau = p.maturity - t;
    let f = |u: C64| -> Result<C64> {
        let c = char_exponents(tau, u, ZERO, p)?;
        Ok((u * (x - lk) + c.phi + v * c.psi).exp() * (u + p.rho * p.sigma * c.psi) / (u * (u - 1.0)))
    };
    let r = integrate_strip(f, claim.r(), tol, Symmetry::Conjugate, StripOptions::default())?;
    Ok(claim.k() / x.exp() * r.value.re / (2.0 * PI))
}

const FFT_N: usize = 16384;
const FFT_PERIOD: f64 = 32.0;
const M_WINDOW: f64 = 4.0;
const V_NODES: usize = 33;

/// Call quantities divided by `S`, tabulated on (sqrt V, log-moneyness) at one
/// time: the hedge ratio, then `P_xx - theta S`, `P_xV` and `P_VV`.
struct ThetaTable {
    s_step: f64,
    m0: f64,
    dm: f64,
    width: usize,
    quantities: Vec<Vec<f64>>,
}

struct TableBuilder {
    fft: Arc<dyn Fft<f64>>,
    r: f64,
    dy: f64,
    u: Vec<C64>,
    nq: usize,
}

impl TableBuilder {
    fn new(p: &HestonParams, second_order: bool) -> Result<Self> {
        let r = choose_strip(&ClaimSpec::call(p.s0), p)?;
        let dy = 2.0 * PI / FFT_PERIOD;
        let y0 = -(FFT_N as f64) * dy / 2.0;
        let u = (0..FFT_N).map(|j| C64::new(r, y0 + j as f64 * dy)).collect();
        let fft = FftPlanner::new().plan_fft_inverse(FFT_N);
        Ok(TableBuilder { fft, r, dy, u, nq: if second_order { 4 } else { 1 } })
    }

    fn build(&self, tau: f64, v_max: f64, p: &HestonParams) -> Result<ThetaTable> {
        let half = FFT_N / 2;
        let rs = p.rho * p.sigma;
        // coefficients for y >= 0; the rest follow by conjugation
        let parts: Vec<(C64, C64, [C64; 4])> = (half..FFT_N)
            .into_par_iter()
            .map(|j| {
                let u = self.u[j];
                let c = char_exponents(tau, u, ZERO, p)?;
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                let coef = c.phi.exp() / (u * (u - 1.0)) * (sign * self.dy / (2.0 * PI));
                let mult = [u + rs * c.psi, u * u - u - rs * c.psi, u * c.psi, c.psi * c.psi];
                Ok((coef, c.psi, mult))
            })
            .collect::<Result<_>>()?;
        let dm = FFT_PERIOD / FFT_N as f64;
        let m_lo = -FFT_PERIOD / 2.0;
        let k0 = ((-M_WINDOW - m_lo) / dm).floor() as usize;
        let k1 = (((M_WINDOW - m_lo) / dm).ceil() as usize + 1).min(FFT_N);
        let width = k1 - k0;
        let s_max = v_max.max(1e-12).sqrt() * 1.0001;
        let s_step = s_max / (V_NODES - 1) as f64;
        let rows: Vec<Vec<Vec<f64>>> = (0..V_NODES)
            .into_par_iter()
            .map(|jv| {
                let v = (jv as f64 * s_step).powi(2);
                let base: Vec<C64> = parts.iter().map(|&(coef, psi, _)| coef * (v * psi).exp()).collect();
                (0..self.nq)
                    .map(|q| {
                        let mut buf = vec![Complex64::new(0.0, 0.0); FFT_N];
                        for (i, (b, part)) in base.iter().zip(&parts).enumerate() {
                            let val = b * part.2[q];
                            buf[half + i] = val;
                            if i > 0 {
                                buf[half - i] = val.conj();
                            }
                        }
                        self.fft.process(&mut buf);
                        (k0..k1)
                            .map(|k| {
                                let m = m_lo + k as f64 * dm;
                                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                                sign * buf[k].re * ((self.r - 1.0) * m).exp()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let quantities = (0..self.nq).map(|q| rows.iter().flat_map(|r| r[q].iter().copied()).collect()).collect();
        Ok(ThetaTable { s_step, m0: m_lo + k0 as f64 * dm, dm, width, quantities })
    }
}

/// Four-point Lagrange weights at fractional offset `f` from node 1 of nodes 0..3.
fn lagrange4(f: f64) -> [f64; 4] {
    let (a, b, c, d) = (f + 1.0, f, f - 1.0, f - 2.0);
    [-b * c * d / 6.0, a * c * d / 2.0, -a * b * d / 2.0, a * b * c / 6.0]
}

fn stencil(pos: f64, len: usize) -> (usize, [f64; 4]) {
    let i = (pos.floor() as isize).clamp(1, len as isize - 3) as usize;
    (i - 1, lagrange4(pos - i as f64))
}

impl ThetaTable {
    fn v_weights(&self, v: f64) -> (usize, [f64; 4]) {
        stencil(v.max(0.0).sqrt() / self.s_step, V_NODES)
    }

    /// Tabulated quantities at log-moneyness `m`; outside the window the
    /// hedge ratio is 0 or 1 and the second-order terms vanish.
    fn eval(&self, vw: &(usize, [f64; 4]), m: f64, out: &mut [f64; 4]) {
        let pos = (m - self.m0) / self.dm;
        if pos < 1.0 || pos > (self.width - 3) as f64 {
            *out = [if pos < 1.0 { 0.0 } else { 1.0 }, 0.0, 0.0, 0.0];
            return;
        }
        let (im, wm) = stencil(pos, self.width);
        let (iv, wv) = vw;
        for (q, tab) in self.quantities.iter().enumerate() {
            let mut acc = 0.0;
            for a in 0..4 {
                let row = &tab[(iv + a) * self.width + im..][..4];
                acc += wv[a] * (wm[0] * row[0] + wm[1] * row[1] + wm[2] * row[2] + wm[3] * row[3]);
            }
            out[q] = acc;
        }
    }
}

/// Pathwise residuals `L = payoff - price_0 - sum theta dS` for the target
/// (column 0) and each option, row-major by path.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSample {
    pub n_paths: usize,
    pub n_claims: usize,
    pub residuals: Vec<f64>,
    /// discrete gains `sum theta0 dS` of the target
    pub gains0: Vec<f64>,
    pub terminal_s: Vec<f64>,
    pub integrated_variance: Vec<f64>,
    pub prices: Vec<f64>,
    pub swap_rate: f64,
}

/// Moment estimates with block-jackknife standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimates {
    pub n_paths: usize,
    pub a: f64,
    pub a_se: f64,
    pub b: Vec<f64>,
    pub b_se: Vec<f64>,
    pub c: Vec<Vec<f64>>,
    pub c_se: Vec<Vec<f64>>,
    pub residual_means: Vec<f64>,
    pub residual_mean_se: Vec<f64>,
}

pub const JACKKNIFE_BLOCKS: usize = 100;

/// Covariance estimate and delete-one-block jackknife standard error.
pub fn jackknife_cov(x: &[f64], y: &[f64], blocks: usize) -> (f64, f64) {
    let n = x.len();
    let g = blocks.clamp(2, n.max(2));
    let mut sums = vec![(0.0, 0.0, 0.0, 0usize); g];
    for b in 0..g {
        let (lo, hi) = (b * n / g, (b + 1) * n / g);
        let s = &mut sums[b];
        for i in lo..hi {
            s.0 += x[i];
            s.1 += y[i];
            s.2 += x[i] * y[i];
        }
        s.3 = hi - lo;
    }
    let tot = sums.iter().fold((0.0, 0.0, 0.0, 0usize), |a, s| (a.0 + s.0, a.1 + s.1, a.2 + s.2, a.3 + s.3));
    let cov = |sx: f64, sy: f64, sxy: f64, m: usize| {
        let m = m as f64;
        (sxy - sx * sy / m) / (m - 1.0)
    };
    let full = cov(tot.0, tot.1, tot.2, tot.3);
    let loo: Vec<f64> = sums.iter().map(|s| cov(tot.0 - s.0, tot.1 - s.1, tot.2 - s.2, tot.3 - s.3)).collect();
    let mean = loo.iter().sum::<f64>() / g as f64;
    let var = loo.iter().map(|t| (t - mean).powi(2)).sum::<f64>() * (g as f64 - 1.0) / g as f64;
    (full, var.sqrt())
}

/// Sample mean and its standard error.
pub fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

impl ResidualSample {
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_paths).map(|i| self.residuals[i * self.n_claims + j]).collect()
    }

    pub fn moments(&self) -> MomentEstimates {
        let cols: Vec<Vec<f64>> = (0..self.n_claims).map(|j| self.column(j)).collect();
        let n = self.n_claims - 1;
        let (a, a_se) = jackknife_cov(&cols[0], &cols[0], JACKKNIFE_BLOCKS);
        let bs: Vec<(f64, f64)> = (1..=n).map(|i| jackknife_cov(&cols[0], &cols[i], JACKKNIFE_BLOCKS)).collect();
        let mut c = vec![vec![0.0; n]; n];
        let mut c_se = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i..n {
                let (v, s) = jackknife_cov(&cols[i + 1], &cols[j + 1], JACKKNIFE_BLOCKS);
                c[i][j] = v;
                c[j][i] = v;
                c_se[i][j] = s;
                c_se[j][i] = s;
            }
        }
        let means: Vec<(f64, f64)> = cols.iter().map(|c| mean_se(c)).collect();
        MomentEstimates {
            n_paths: self.n_paths,
            a,
            a_se,
            b: bs.iter().map(|t| t.0).collect(),
            b_se: bs.iter().map(|t| t.1).collect(),
            c,
            c_se,
            residual_means: means.iter().map(|t| t.0).collect(),
            residual_mean_se: means.iter().map(|t| t.1).collect(),
        }
    }

    /// Per-path shortfall `L0 - v'L` of the semi-static portfolio.
    pub fn shortfall(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() + 1 != self.n_claims {
            return Err(HedgeError::Dimension(format!("{} weights for {} options", v.len(), self.n_claims - 1)));
        }
        Ok(self
            .residuals
            .chunks(self.n_claims)
            .map(|r| r[0] - v.iter().zip(&r[1..]).map(|(w, l)| w * l).sum::<f64>())
            .collect())
    }
}

/// Simulates the GKW residuals of the target and every option in `claims`.
pub fn estimate_residuals(p: &HestonParams, claims: &ClaimSet, cfg: &SimConfig) -> Result<ResidualSample> {
    p.validate()?;
    cfg.validate()?;
    if claims.target.kind != ClaimKind::VarianceSwap {
        return Err(HedgeError::InvalidClaim("MC target must be the variance swap".into()));
    }
    let opts = &claims.options;
    let nc = opts.len() + 1;
    let prices: Vec<f64> = opts.iter().map(|c| option_price(p, c, 1e-10)).collect::<Result<_>>()?;
    let k_star = swap_rate(p);
    let n = cfg.steps_for(p.maturity);
    let dt = p.maturity / n as f64;
    let log_k: Vec<f64> = opts.iter().map(|c| c.k().ln()).collect();
    let put: Vec<bool> = opts.iter().map(|c| c.kind == ClaimKind::Put).collect();
    let second = cfg.residual == ResidualScheme::SecondOrder;
    let builder = if opts.is_empty() { None } else { Some(TableBuilder::new(p, second)?) };
    let (rs, s2) = (p.rho * p.sigma, p.sigma * p.sigma);

    let mut states: Vec<PathState> = (0..cfg.n_paths).map(|i| PathState::new(p, cfg.seed, i as u64)).collect();
    let mut gains = vec![0.0; cfg.n_paths * nc];
    let mut int_var = vec![0.0; cfg.n_paths];
    for k in 0..n {
        let t = k as f64 * dt;
        let tau = p.maturity - t;
        let table = match &builder {
            Some(b) => {
                let v_max = states.iter().map(|s| s.v).fold(0.0, f64::max);
                Some(b.build(tau, v_max, p)?)
            }
            None => None,
        };
        let th0 = strategy_theta0(t, 1.0, 0.0, p);
        states
            .par_iter_mut()
            .zip(gains.par_chunks_mut(nc))
            .zip(int_var.par_iter_mut())
            .for_each(|((st, g), iv)| {
                let (x, v) = (st.x, st.v);
                let s = x.exp();
                let vp = st.step(dt, p, cfg.fine_factor);
                let (dx, dv) = (st.x - x, st.v - v);
                let ds = s * dx.exp_m1();
                *iv += vp * dt;
                g[0] += th0 / s * ds;
                let (exx, exv, evv) = (dx * dx - vp * dt, dx * dv - rs * vp * dt, dv * dv - s2 * vp * dt);
                if second {
                    g[0] -= 0.5 * th0 * exx;
                }
                if let Some(tb) = &table {
                    let vw = tb.v_weights(v);
                    let mut q = [0.0; 4];
                    for i in 0..opts.len() {
                        tb.eval(&vw, x - log_k[i], &mut q);
                        let th = if put[i] { q[0] - 1.0 } else { q[0] };
                        g[i + 1] += th * ds;
                        if second {
                            g[i + 1] += s * (0.5 * q[1] * exx + q[2] * exv + 0.5 * q[3] * evv);
                        }
                    }
                }
            });
    }
    let mut residuals = vec![0.0; cfg.n_paths * nc];
    let mut terminal_s = vec![0.0; cfg.n_paths];
    for i in 0..cfg.n_paths {
        let s = states[i].x.exp();
        terminal_s[i] = s;
        let r = &mut residuals[i * nc..(i + 1) * nc];
        let g = &gains[i * nc..(i + 1) * nc];
        r[0] = int_var[i] - k_star - g[0];
        for (j, c) in opts.iter().enumerate() {
            r[j + 1] = c.payoff(s) - prices[j] - g[j + 1];
        }
    }
    Ok(ResidualSample {
        n_paths: cfg.n_paths,
        n_claims: nc,
        residuals,
        gains0: (0..cfg.n_paths).map(|i| gains[i * nc]).collect(),
        terminal_s,
        integrated_variance: int_var,
        prices,
        swap_rate: k_star,
    })
}

/// Sample `A`, `B`, `C` from simulated residuals.
pub fn estimate_moments(p: &HestonParams, claims: &ClaimSet, cfg: &SimConfig) -> Result<MomentEstimates> {
    Ok(estimate_residuals(p, claims, cfg)?.moments())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealizedError {
    pub eps2: f64,
    pub se: f64,
    pub rel_err: f64,
}

/// Mean squared shortfall of a sample for weights `v`.
pub fn realized_error_from(sample: &ResidualSample, v: &[f64]) -> Result<RealizedError> {
    let sq: Vec<f64> = sample.shortfall(v)?.iter().map(|x| x * x).collect();
    let (eps2, se) = mean_se(&sq);
    Ok(RealizedError { eps2, se, rel_err: eps2.sqrt() / sample.swap_rate })
}

pub fn realized_error(v: &[f64], p: &HestonParams, claims: &ClaimSet, cfg: &SimConfig) -> Result<RealizedError> {
    realized_error_from(&estimate_residuals(p, claims, cfg)?, v)
}
