//! Hedging instruments: the variance swap target and European puts/calls,
//! their payoff transforms and integration strips.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HedgeError, Result};
use crate::heston::{critical_time, swap_rate, HestonParams, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimKind {
    VarianceSwap,
    Call,
    Put,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClaimSpec {
    pub kind: ClaimKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strike: Option<f64>,
    #[serde(default, alias = "strip_R", skip_serializing_if = "Option::is_none")]
    pub strip_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub swap_k: Option<f64>,
}

impl ClaimSpec {
    pub fn variance_swap(swap_k: Option<f64>) -> Self {
        ClaimSpec { kind: ClaimKind::VarianceSwap, strike: None, strip_r: None, swap_k }
    }

    pub fn call(strike: f64) -> Self {
        ClaimSpec { kind: ClaimKind::Call, strike: Some(strike), strip_r: None, swap_k: None }
    }

    pub fn put(strike: f64) -> Self {
        ClaimSpec { kind: ClaimKind::Put, strike: Some(strike), strip_r: None, swap_k: None }
    }

    pub fn with_strip(mut self, r: f64) -> Self {
        self.strip_r = Some(r);
        self
    }

    pub fn is_option(&self) -> bool {
        matches!(self.kind, ClaimKind::Call | ClaimKind::Put)
    }

    /// Strike of an option; panics on the swap.
    pub fn k(&self) -> f64 {
        self.strike.expect("option without strike")
    }

    /// Strip abscissa of an option; panics if not yet assigned.
    pub fn r(&self) -> f64 {
        self.strip_r.expect("strip not assigned")
    }

    pub fn payoff(&self, s: f64) -> f64 {
        match self.kind {
            ClaimKind::Call => (s - self.k()).max(0.0),
            ClaimKind::Put => (self.k() - s).max(0.0),
            ClaimKind::VarianceSwap => f64::NAN,
        }
    }

    pub fn label(&self) -> String {
        match self.kind {
            ClaimKind::VarianceSwap => "swap".to_string(),
            ClaimKind::Call => format!("C{}", self.k()),
            ClaimKind::Put => format!("P{}", self.k()),
        }
    }

    fn validate(&self, p: &HestonParams) -> Result<()> {
        if !self.is_option() {
            return Err(HedgeError::InvalidClaim("supplementary claims must be options".into()));
        }
        let k = self.strike.ok_or_else(|| HedgeError::InvalidClaim("option needs a strike".into()))?;
        if !(k > 0.0 && k.is_finite()) {
            return Err(HedgeError::InvalidClaim(format!("strike {k} must be positive")));
        }
        let r = self.r();
        match self.kind {
            ClaimKind::Call if r <= 1.0 => {
                return Err(HedgeError::InvalidClaim(format!("call strip R={r} must exceed 1")))
            }
            ClaimKind::Put if r >= 0.0 => {
                return Err(HedgeError::InvalidClaim(format!("put strip R={r} must be negative")))
            }
            _ => {}
        }
        if critical_time(2.0 * r, p) <= p.maturity {
            return Err(HedgeError::InvalidClaim(format!(
                "{}: E[exp(2R X_T)] infinite for R={r}",
                self.label()
            )));
        }
        Ok(())
    }
}

/// Target claim plus ordered supplementary options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimSet {
    pub target: ClaimSpec,
    #[serde(alias = "supplementary")]
    pub options: Vec<ClaimSpec>,
}

impl ClaimSet {
    /// Fill missing strips and swap strike, then validate.
    pub fn new(target: ClaimSpec, options: Vec<ClaimSpec>, p: &HestonParams) -> Result<Self> {
        let mut set = ClaimSet { target, options };
        set.prepare(p)?;
        Ok(set)
    }

    /// OTM grid: puts strictly below spot, calls at and above.
    pub fn otm_grid(p: &HestonParams, k_min: f64, k_max: f64, dk: f64) -> Result<Self> {
        let options = strike_grid(k_min, k_max, dk)
            .into_iter()
            .map(|k| if k < p.s0 { ClaimSpec::put(k) } else { ClaimSpec::call(k) })
            .collect();
        Self::new(ClaimSpec::variance_swap(None), options, p)
    }

    pub fn prepare(&mut self, p: &HestonParams) -> Result<()> {
        if self.target.kind != ClaimKind::VarianceSwap {
            return Err(HedgeError::InvalidClaim("target must be a variance swap".into()));
        }
        if self.target.swap_k.is_none() {
            self.target.swap_k = Some(swap_rate(p));
        }
        for c in self.options.iter_mut() {
            if c.strip_r.is_none() && c.is_option() {
                c.strip_r = Some(choose_strip(c, p)?);
            }
        }
        self.validate(p)
    }

    pub fn validate(&self, p: &HestonParams) -> Result<()> {
        for (i, c) in self.options.iter().enumerate() {
            c.validate(p)?;
            for d in &self.options[..i] {
                if d.kind == c.kind && d.strike == c.strike {
                    return Err(HedgeError::InvalidClaim(format!("duplicate claim {}", c.label())));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.options.len()
    }

    pub fn is_empty(&self) -> bool {
        self.options.is_empty()
    }

    pub fn strikes(&self) -> Vec<f64> {
        self.options.iter().map(|c| c.k()).collect()
    }

    pub fn subset(&self, idx: &[usize]) -> ClaimSet {
        ClaimSet { target: self.target, options: idx.iter().map(|&i| self.options[i]).collect() }
    }

    pub fn from_json_str(s: &str, p: &HestonParams) -> Result<Self> {
        let mut set: ClaimSet = serde_json::from_str(s)?;
        set.prepare(p)?;
        Ok(set)
    }

    pub fn from_json_file(path: &Path, p: &HestonParams) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| HedgeError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&s, p)
    }
}

/// Evenly spaced strikes `k_min, k_min + dk, ..., k_max`.
pub fn strike_grid(k_min: f64, k_max: f64, dk: f64) -> Vec<f64> {
    let n = ((k_max - k_min) / dk).round() as usize;
    (0..=n).map(|i| k_min + dk * i as f64).collect()
}

/// Two-sided Laplace transform `K^(1-u) / (2 pi i u (u - 1))` of a call or put payoff.
pub fn laplace_transform(u: C64, strike: f64) -> Result<C64> {
    let eps = 1e-14;
    if u.norm() < eps {
        return Err(HedgeError::PoleError(0.0));
    }
    if (u - 1.0).norm() < eps {
        return Err(HedgeError::PoleError(1.0));
    }
    Ok(((1.0 - u) * strike.ln()).exp() / (C64::new(0.0, 2.0 * PI) * u * (u - 1.0)))
}

/// Largest real `u` with `T*(u) > T`, found by bracketing and bisection.
pub fn max_call_moment(p: &HestonParams) -> f64 {
    let t = p.maturity;
    let mut lo = 1.0;
    let mut hi = 2.0;
    while critical_time(hi, p) > t {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return f64::INFINITY;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if critical_time(mid, p) > t {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * hi {
            break;
        }
    }
    lo
}

/// Default strip abscissa: `-1` for puts; for calls `min(2, 0.45 u_max)` where
/// `T*(u_max) = T`, falling back to the midpoint of `(1, u_max/2)`.
pub fn choose_strip(claim: &ClaimSpec, p: &HestonParams) -> Result<f64> {
    match claim.kind {
        ClaimKind::Put => {
            let r = -1.0;
            if critical_time(2.0 * r, p) > p.maturity {
                return Ok(r);
            }
            let u_min = 1.0 - max_call_moment(&mirror(p));
            let r = 0.45 * u_min;
            if r < 0.0 && critical_time(2.0 * r, p) > p.maturity {
                Ok(r)
            } else {
                Err(HedgeError::NoValidStrip("no R < 0 with finite put moments".into()))
            }
        }
        ClaimKind::Call => {
            let u_max = max_call_moment(p);
            let r = (0.45 * u_max).min(2.0);
            if r > 1.0 && critical_time(2.0 * r, p) > p.maturity {
                return Ok(r);
            }
            let half = 0.5 * u_max;
            if half > 1.0 {
                let r = 0.5 * (1.0 + half);
                if critical_time(2.0 * r, p) > p.maturity {
                    return Ok(r);
                }
            }
            Err(HedgeError::NoValidStrip(format!("u_max = {u_max} leaves no R > 1")))
        }
        ClaimKind::VarianceSwap => Err(HedgeError::NoValidStrip("variance swap has no strip".into())),
    }
}

/// Parameters of the share-measure model: `T*_mirror(u) = T*(1 - u)`.
fn mirror(p: &HestonParams) -> HestonParams {
    let lambda = p.lambda - p.rho * p.sigma;
    HestonParams { rho: -p.rho, lambda, kappa: p.lambda * p.kappa / lambda, ..*p }
}

/// Discretized log-contract weights `2 dK / K^2` with trapezoidal `dK`.
/// Returns `(kind, weight)` per strike, puts below `spot`, calls at or above.
pub fn neuberger_weights(strikes: &[f64], spot: f64) -> Vec<(ClaimKind, f64)> {
    let n = strikes.len();
    (0..n)
        .map(|i| {
            let dk = match (i, n) {
                (_, 1) => 0.0,
                (0, _) => 0.5 * (strikes[1] - strikes[0]),
                (i, n) if i == n - 1 => 0.5 * (strikes[n - 1] - strikes[n - 2]),
                (i, _) => 0.5 * (strikes[i + 1] - strikes[i - 1]),
            };
            let k = strikes[i];
            let kind = if k < spot { ClaimKind::Put } else { ClaimKind::Call };
            (kind, neuberger_weight(k, dk))
        })
        .collect()
}

pub fn neuberger_weight(strike: f64, dk: f64) -> f64 {
    2.0 * dk / (strike * strike)
}
