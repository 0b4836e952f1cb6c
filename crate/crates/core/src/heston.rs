//! Heston stochastic-volatility model: parameters, affine characteristic
//! exponents, moment explosion times and the conditional expectations used
//! by the Fourier engine.
//!
//! The log-price `X = log S` and variance `V` follow
//!
//! ```text
//! dX = -V/2 dt + sqrt(V) dW1
//! dV = -lambda (V - kappa) dt + sigma sqrt(V) dW2,   d<W1,W2> = rho dt
//! ```
//!
//! and `E[exp(u X_{s+t} + w V_{s+t}) | F_s] = exp(phi_t(u,w) + psi_t(u,w) V_s + u X_s)`.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{HedgeError, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Model constants. Field names match the JSON config format.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HestonParams {
    pub kappa: f64,
    pub lambda: f64,
    pub rho: f64,
    pub sigma: f64,
    pub v0: f64,
    pub s0: f64,
    pub maturity: f64,
}

impl HestonParams {
    pub fn new(
        kappa: f64,
        lambda: f64,
        rho: f64,
        sigma: f64,
        v0: f64,
        s0: f64,
        maturity: f64,
    ) -> Result<Self> {
        let p = HestonParams { kappa, lambda, rho, sigma, v0, s0, maturity };
        p.validate()?;
        Ok(p)
    }

    /// Stylized equity-index parameters (Gatheral's SPX fit), one-year horizon.
    pub fn stylized() -> Self {
        HestonParams {
            kappa: 0.0354,
            lambda: 1.3253,
            rho: -0.7165,
            sigma: 0.3877,
            v0: 0.0174,
            s0: 100.0,
            maturity: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.kappa, self.lambda, self.rho, self.sigma, self.v0, self.s0, self.maturity];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(HedgeError::InvalidParams("non-finite value".into()));
        }
        let checks = [
            (self.lambda > 0.0, "lambda must be > 0"),
            (self.sigma > 0.0, "sigma must be > 0"),
            (self.kappa > 0.0, "kappa must be > 0"),
            (self.v0 >= 0.0, "v0 must be >= 0"),
            (self.s0 > 0.0, "s0 must be > 0"),
            (self.maturity > 0.0, "maturity must be > 0"),
            (self.rho.abs() <= 1.0, "|rho| must be <= 1"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(HedgeError::InvalidParams(msg.into()));
            }
        }
        Ok(())
    }

    pub fn x0(&self) -> f64 {
        self.s0.ln()
    }

    pub fn with_rho(&self, rho: f64) -> Self {
        HestonParams { rho, ..*self }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let p: HestonParams = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| HedgeError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&s)
    }
}

/// Values of the characteristic exponents and their w-derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharExponents {
    pub phi: C64,
    pub psi: C64,
    pub dphi_dw: C64,
    pub dpsi_dw: C64,
}

/// Auxiliary quantities of the Riccati equation at a fixed `u`.
#[derive(Debug, Clone, Copy)]
pub struct Roots {
    /// `rho sigma u - lambda`
    pub chi: C64,
    pub delta: C64,
    /// principal square root of `delta`, zero on the degenerate branch
    pub sqrt_delta: C64,
    pub r_plus: C64,
    pub r_minus: C64,
    pub degenerate: bool,
}

/// `(rho sigma u - lambda)^2 - sigma^2 (u^2 - u)`.
pub fn discriminant(u: C64, p: &HestonParams) -> C64 {
    let chi = chi(u, p);
    chi * chi - p.sigma * p.sigma * (u * u - u)
}

pub fn chi(u: C64, p: &HestonParams) -> C64 {
    p.rho * p.sigma * u - p.lambda
}

/// Roots `r_pm = (-chi pm sqrt(delta)) / sigma^2` of the Riccati polynomial
/// `sigma^2/2 r^2 + chi r + (u^2-u)/2`, with `r_minus` computed without
/// cancellation.
pub fn roots(u: C64, p: &HestonParams) -> Roots {
    let s2 = p.sigma * p.sigma;
    let chi = chi(u, p);
    let uu = u * u - u;
    let delta = chi * chi - s2 * uu;
    let degenerate = delta.norm() < 1e-12 * (1.0 + chi.norm_sqr());
    let s = -chi;
    if degenerate {
        let r = s / s2;
        return Roots { chi, delta, sqrt_delta: ZERO, r_plus: r, r_minus: r, degenerate };
    }
    let d = delta.sqrt();
    let plus = s + d;
    let minus = s - d;
    let r_plus = plus / s2;
    let r_minus = if plus.norm() >= minus.norm() && plus != ZERO {
        uu / plus
    } else {
        minus / s2
    };
    Roots { chi, delta, sqrt_delta: d, r_plus, r_minus, degenerate }
}

/// The stable ratio `g = (r_minus - w) / (r_plus - w)`.
pub fn g_ratio(u: C64, w: C64, p: &HestonParams) -> C64 {
    let r = roots(u, p);
    (r.r_minus - w) / (r.r_plus - w)
}

/// `(1 - exp(-t d)) / d`, continuous at `d = 0`.
fn k1(t: f64, d: C64) -> C64 {
    let z = -t * d;
    if z.norm() < 1e-4 {
        t * (ONE + z / 2.0 + z * z / 6.0 + z * z * z / 24.0)
    } else {
        -expm1(z) / d
    }
}

fn expm1(z: C64) -> C64 {
    let (s, c) = z.im.sin_cos();
    let em = z.re.exp_m1();
    let half = (z.im / 2.0).sin();
    C64::new(em * c - 2.0 * half * half, z.re.exp() * s)
}

fn check_finite(x: C64, what: &str) -> Result<C64> {
    if x.re.is_finite() && x.im.is_finite() {
        Ok(x)
    } else {
        Err(HedgeError::NonFiniteResult(what.to_string()))
    }
}

/// Continuous branch of `log(1 + sigma^2 a k1(s) / 2)` along `s` in `[0, t]`.
///
/// If `|a| < |a + 2 sqrt(delta)/sigma^2|` the argument stays off the negative
/// real axis and the principal logarithm is the continuous one; otherwise the
/// argument is unwrapped along a refined time grid.
fn log_den(t: f64, a: C64, d: C64, s2: f64) -> Result<C64> {
    let z_at = |s: f64| ONE + 0.5 * s2 * a * k1(s, d);
    let z = z_at(t);
    if z == ZERO || !z.re.is_finite() || !z.im.is_finite() {
        return Err(HedgeError::NonFiniteResult("log denominator".into()));
    }
    let b = a + 2.0 * d / s2;
    if a.norm() < b.norm() || (z.re > 0.0 && a.norm() * t * s2 < 0.5) {
        return Ok(z.ln());
    }
    let mut m = 64usize;
    'refine: while m <= 1 << 16 {
        let mut prev = ONE;
        let mut arg = 0.0;
        for k in 1..=m {
            let zk = z_at(t * k as f64 / m as f64);
            if zk == ZERO {
                return Err(HedgeError::NonFiniteResult("log denominator hits zero".into()));
            }
            let step = (zk / prev).arg();
            if step.abs() > PI / 2.0 {
                m *= 4;
                continue 'refine;
            }
            arg += step;
            prev = zk;
        }
        return Ok(C64::new(z.norm().ln(), arg));
    }
    Err(HedgeError::BranchAmbiguity(format!("t={t}, a={a}, sqrt(delta)={d}")))
}

/// Closed-form `phi_t(u,w)`, `psi_t(u,w)` and their analytic w-derivatives.
pub fn char_exponents(t: f64, u: C64, w: C64, p: &HestonParams) -> Result<CharExponents> {
    if t == 0.0 {
        return Ok(CharExponents { phi: ZERO, psi: w, dphi_dw: ZERO, dpsi_dw: ONE });
    }
    let s2 = p.sigma * p.sigma;
    let lk = p.lambda * p.kappa;
    let r = roots(u, p);
    let d = r.sqrt_delta;
    let a = r.r_minus - w;
    let k = k1(t, d);
    let e = ONE - d * k;
    let den = 2.0 + s2 * a * k;
    if den == ZERO {
        return Err(HedgeError::NonFiniteResult(format!("psi blows up at t={t}, u={u}, w={w}")));
    }
    let psi = w + a * (a * s2 + 2.0 * d) * k / den;
    let dpsi_dw = 4.0 * e / (den * den);
    let dphi_dw = 2.0 * lk * k / den;
    let phi = lk * r.r_minus * t - (2.0 * lk / s2) * log_den(t, a, d, s2)?;
    Ok(CharExponents {
        phi: check_finite(phi, "phi")?,
        psi: check_finite(psi, "psi")?,
        dphi_dw: check_finite(dphi_dw, "dphi_dw")?,
        dpsi_dw: check_finite(dpsi_dw, "dpsi_dw")?,
    })
}

/// Largest relative deviation between the analytic w-derivatives and central
/// finite differences with step `h`.
pub fn dw_derivatives_check(t: f64, u: C64, w: C64, p: &HestonParams, h: f64) -> Result<f64> {
    let c = char_exponents(t, u, w, p)?;
    let up = char_exponents(t, u, w + h, p)?;
    let dn = char_exponents(t, u, w - h, p)?;
    let fd_phi = (up.phi - dn.phi) / (2.0 * h);
    let fd_psi = (up.psi - dn.psi) / (2.0 * h);
    let e1 = (c.dphi_dw - fd_phi).norm() / (1.0 + c.dphi_dw.norm());
    let e2 = (c.dpsi_dw - fd_psi).norm() / (1.0 + c.dpsi_dw.norm());
    Ok(e1.max(e2))
}

/// Moment explosion time `T*(u) = sup{t : E[exp(u X_t)] < inf}` for real `u`.
pub fn critical_time(u: f64, p: &HestonParams) -> f64 {
    let s2 = p.sigma * p.sigma;
    let chi = p.rho * p.sigma * u - p.lambda;
    let delta = chi * chi - s2 * (u * u - u);
    let tol = 1e-12 * (1.0 + chi * chi);
    if delta.abs() <= tol {
        return if chi <= 0.0 { f64::INFINITY } else { 2.0 / chi };
    }
    if delta > 0.0 {
        if chi < 0.0 {
            return f64::INFINITY;
        }
        let d = delta.sqrt();
        if chi == 0.0 {
            return f64::INFINITY;
        }
        // log((chi + d) / (chi - d)) / d, with chi - d > 0 when u^2 - u > 0
        let num = chi + d;
        let den = s2 * (u * u - u) / num;
        if den <= 0.0 {
            return f64::INFINITY;
        }
        return (num / den).ln() / d;
    }
    let g = (-delta).sqrt();
    let at = if chi < 0.0 { PI + (g / chi).atan() } else { (g / chi).atan() };
    let at = if chi == 0.0 { PI / 2.0 } else { at };
    2.0 * at / g
}

/// `E[V_t] = exp(-lambda t) v0 + (1 - exp(-lambda t)) kappa`.
pub fn mean_variance(t: f64, p: &HestonParams) -> f64 {
    let e = (-p.lambda * t).exp();
    e * p.v0 + (1.0 - e) * p.kappa
}

/// Fair variance swap strike `k* = E[int_0^T V_t dt]`.
pub fn swap_rate(p: &HestonParams) -> f64 {
    let t = p.maturity;
    p.kappa * t + (p.v0 - p.kappa) * (-(-p.lambda * t).exp_m1()) / p.lambda
}

/// `gamma(tau, v) = E[int_t^T V_s ds | V_t = v]` with `tau = T - t`.
pub fn expected_remaining_variance(tau: f64, v: f64, p: &HestonParams) -> f64 {
    p.kappa * tau + (v - p.kappa) * (-(-p.lambda * tau).exp_m1()) / p.lambda
}

fn check_domain(u: C64, t: f64, p: &HestonParams) -> Result<()> {
    if !(0.0..=p.maturity).contains(&t) {
        return Err(HedgeError::DomainViolation(format!("t={t} outside [0, {}]", p.maturity)));
    }
    if critical_time(u.re, p) <= p.maturity {
        return Err(HedgeError::DomainViolation(format!(
            "E[exp({} X_T)] is infinite at T={}",
            u.re, p.maturity
        )));
    }
    Ok(())
}

/// `E[H_t(u) V_t]` where `H_t(u) = E[exp(u X_T) | F_t]`.
pub fn expect_hv(t: f64, u: C64, p: &HestonParams) -> Result<C64> {
    check_domain(u, t, p)?;
    let tau = p.maturity - t;
    let w_star = char_exponents(tau, u, ZERO, p)?.psi;
    let inner = char_exponents(t, u, w_star, p)?;
    let full = char_exponents(p.maturity, u, ZERO, p)?;
    let lead = inner.dphi_dw + p.v0 * inner.dpsi_dw;
    check_finite(lead * (u * p.x0() + full.phi + p.v0 * full.psi).exp(), "E[H V]")
}

/// `E[H_t(u1) H_t(u2) V_t]`.
pub fn expect_hhv(t: f64, u1: C64, u2: C64, p: &HestonParams) -> Result<C64> {
    check_domain(u1 * 2.0, t, p)?;
    check_domain(u2 * 2.0, t, p)?;
    let tau = p.maturity - t;
    let c1 = char_exponents(tau, u1, ZERO, p)?;
    let c2 = char_exponents(tau, u2, ZERO, p)?;
    Ok(hhv_from_parts(t, u1 + u2, c1.phi + c2.phi, c1.psi + c2.psi, p)?)
}

/// `exp(phi_sum) E[exp(U X_t + q V_t) V_t]` given the summed exponents at `T - t`.
pub(crate) fn hhv_from_parts(t: f64, big_u: C64, phi_sum: C64, q: C64, p: &HestonParams) -> Result<C64> {
    let c = char_exponents(t, big_u, q, p)?;
    let lead = c.dphi_dw + p.v0 * c.dpsi_dw;
    check_finite(
        lead * (phi_sum + c.phi + p.v0 * c.psi + big_u * p.x0()).exp(),
        "E[H H V]",
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p() -> HestonParams {
        HestonParams::stylized()
    }

    #[test]
    fn discriminant_plug_in() {
        let p = p();
        assert_relative_eq!(discriminant(ZERO, &p).re, p.lambda * p.lambda, epsilon = 1e-15);
        let d1 = discriminant(ONE, &p);
        assert_relative_eq!(d1.re, (p.rho * p.sigma - p.lambda).powi(2), epsilon = 1e-15);
        // expanded polynomial in u at u = 2
        let s = p.sigma;
        let expect = p.lambda * p.lambda - 4.0 * p.rho * s * p.lambda + 4.0 * p.rho * p.rho * s * s
            - 2.0 * s * s;
        assert_relative_eq!(discriminant(C64::new(2.0, 0.0), &p).re, expect, epsilon = 1e-14);
    }

    #[test]
    fn roots_solve_riccati_polynomial() {
        let p = p();
        for u in [C64::new(0.3, 2.0), C64::new(-1.0, 7.0), C64::new(2.0, -40.0)] {
            let r = roots(u, &p);
            for x in [r.r_plus, r.r_minus] {
                let val = 0.5 * p.sigma * p.sigma * x * x + r.chi * x + 0.5 * (u * u - u);
                assert!(val.norm() < 1e-10 * (1.0 + x.norm_sqr()), "u={u}, r={x}, val={val}");
            }
        }
    }

    #[test]
    fn identity_at_time_zero() {
        let c = char_exponents(0.0, C64::new(1.5, 3.0), C64::new(0.2, -1.0), &p()).unwrap();
        assert_eq!(c.phi, ZERO);
        assert_eq!(c.psi, C64::new(0.2, -1.0));
        assert_eq!(c.dpsi_dw, ONE);
        assert_eq!(c.dphi_dw, ZERO);
    }

    #[test]
    fn trivial_moments_vanish() {
        let p = p();
        for t in [0.1, 0.5, 1.0, 3.0] {
            for u in [ZERO, ONE] {
                let c = char_exponents(t, u, ZERO, &p).unwrap();
                assert!(c.phi.norm() < 1e-14 && c.psi.norm() < 1e-14, "t={t} u={u} {c:?}");
            }
        }
    }

    /// Independent oracle: RK4 on the Riccati system dpsi = F(u, psi), dphi = lambda kappa psi.
    fn riccati_rk4(t: f64, u: C64, w: C64, p: &HestonParams, n: usize) -> (C64, C64) {
        let f = |psi: C64| {
            0.5 * p.sigma * p.sigma * psi * psi + (p.rho * p.sigma * u - p.lambda) * psi
                + 0.5 * (u * u - u)
        };
        let h = t / n as f64;
        let (mut psi, mut phi) = (w, ZERO);
        for _ in 0..n {
            let k1 = f(psi);
            let k2 = f(psi + 0.5 * h * k1);
            let k3 = f(psi + 0.5 * h * k2);
            let k4 = f(psi + h * k3);
            let l = p.lambda * p.kappa;
            phi += h * l * (psi + 2.0 * (psi + 0.5 * h * k1) + 2.0 * (psi + 0.5 * h * k2) + psi + h * k3) / 6.0;
            psi += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
        }
        (phi, psi)
    }

    #[test]
    fn closed_form_matches_ode_integration() {
        let p = p();
        let cases = [
            (1.0, C64::new(2.0, 0.0), ZERO),
            (0.5, C64::new(-1.0, 3.0), C64::new(0.1, 0.4)),
            (1.0, C64::new(2.0, 25.0), ZERO),
            (0.7, C64::new(0.5, -4.0), C64::new(-2.0, 1.0)),
        ];
        for (t, u, w) in cases {
            let c = char_exponents(t, u, w, &p).unwrap();
            let (phi, psi) = riccati_rk4(t, u, w, &p, 20000);
            assert!((c.psi - psi).norm() < 1e-9 * (1.0 + psi.norm()), "{u} {w}: {} vs {psi}", c.psi);
            assert!((c.phi - phi).norm() < 1e-9 * (1.0 + phi.norm()), "{u} {w}: {} vs {phi}", c.phi);
        }
    }

    #[test]
    fn phi_stays_continuous_for_long_horizons() {
        // large |y| and long t wind the log argument several times
        let p = p();
        let u = C64::new(2.0, 60.0);
        let mut prev = char_exponents(0.01, u, ZERO, &p).unwrap().phi;
        for k in 2..=500 {
            let t = 0.01 * k as f64;
            let cur = char_exponents(t, u, ZERO, &p).unwrap().phi;
            assert!((cur - prev).norm() < 2.0, "jump at t={t}: {prev} -> {cur}");
            prev = cur;
        }
        let (phi, _) = riccati_rk4(5.0, u, ZERO, &p, 200000);
        assert!((prev - phi).norm() < 1e-7 * (1.0 + phi.norm()));
    }

    #[test]
    fn w_derivatives_match_finite_differences() {
        let p = p();
        assert!(dw_derivatives_check(1.0, ZERO, ZERO, &p, 1e-6).unwrap() < 1e-6);
        assert!(dw_derivatives_check(1.0, C64::new(2.0, 0.0), ZERO, &p, 1e-6).unwrap() < 1e-6);
        assert!(dw_derivatives_check(0.4, C64::new(-1.0, 5.0), C64::new(0.3, -2.0), &p, 1e-6).unwrap() < 1e-6);
    }

    #[test]
    fn degenerate_branch_is_continuous() {
        // choose sigma so that delta(u) = 0 at a real u
        let mut p = p();
        p.rho = 0.0;
        // delta = lambda^2 - sigma^2 (u^2 - u) = 0 at u with u^2 - u = lambda^2 / sigma^2
        let q = p.lambda * p.lambda / (p.sigma * p.sigma);
        let u0 = 0.5 + (0.25 + q).sqrt();
        let c0 = char_exponents(0.3, C64::new(u0, 0.0), ZERO, &p).unwrap();
        let c1 = char_exponents(0.3, C64::new(u0 + 1e-6, 0.0), ZERO, &p).unwrap();
        assert!((c0.psi - c1.psi).norm() < 1e-4 * (1.0 + c0.psi.norm()));
        assert!((c0.phi - c1.phi).norm() < 1e-4 * (1.0 + c0.phi.norm()));
        let (phi, psi) = riccati_rk4(0.3, C64::new(u0, 0.0), ZERO, &p, 20000);
        assert!((c0.psi - psi).norm() < 1e-9 * (1.0 + psi.norm()));
        assert!((c0.phi - phi).norm() < 1e-9 * (1.0 + phi.norm()));
    }

    /// Oracle for T*: integrate the real Riccati ODE until psi exceeds a huge level.
    fn blow_up_time(u: f64, p: &HestonParams, horizon: f64) -> f64 {
        let f = |x: f64| 0.5 * p.sigma * p.sigma * x * x + (p.rho * p.sigma * u - p.lambda) * x + 0.5 * (u * u - u);
        let mut psi = 0.0f64;
        let mut t = 0.0;
        while t < horizon {
            // step shrinks as psi grows
            let h = (1e-4 / (1.0 + psi.abs())).min(1e-3);
            let k1 = f(psi);
            let k2 = f(psi + 0.5 * h * k1);
            let k3 = f(psi + 0.5 * h * k2);
            let k4 = f(psi + h * k3);
            psi += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
            t += h;
            if psi > 1e8 {
                return t;
            }
        }
        f64::INFINITY
    }

    #[test]
    fn critical_time_branches() {
        let p = p();
        assert_eq!(critical_time(0.0, &p), f64::INFINITY);
        assert_eq!(critical_time(1.0, &p), f64::INFINITY);
        for u in [-4.0, -2.5, 16.0, 20.0] {
            let t = critical_time(u, &p);
            assert!(t.is_finite(), "u={u}");
            let oracle = blow_up_time(u, &p, 3.0 * t);
            assert!((t - oracle).abs() < 1e-3 * t, "u={u}: {t} vs {oracle}");
        }
        // complex-root branch
        let q = HestonParams { rho: 0.5, ..p };
        let t = critical_time(6.0, &q);
        assert!((t - blow_up_time(6.0, &q, 3.0 * t)).abs() < 1e-3 * t);
        // real-root branch with chi > 0
        let r = HestonParams { rho: 0.99, sigma: 1.0, lambda: 0.3, ..p };
        let t = critical_time(1.5, &r);
        assert!(t.is_finite());
        assert!((t - blow_up_time(1.5, &r, 3.0 * t)).abs() < 1e-3 * t);
    }

    #[test]
    fn swap_rate_value() {
        let p = p();
        assert!((swap_rate(&p) - 0.025427).abs() < 5e-6);
        let q = HestonParams { v0: p.kappa, ..p };
        assert_relative_eq!(swap_rate(&q), p.kappa, epsilon = 1e-15);
        // time integral of the mean variance, Simpson rule oracle
        let n = 2000;
        let h = p.maturity / n as f64;
        let mut s = mean_variance(0.0, &p) + mean_variance(p.maturity, &p);
        for i in 1..n {
            s += mean_variance(i as f64 * h, &p) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        assert_relative_eq!(swap_rate(&p), s * h / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn expectations_collapse_at_zero() {
        let p = p();
        for t in [0.0, 0.3, 1.0] {
            let m = mean_variance(t, &p);
            assert!((expect_hv(t, ZERO, &p).unwrap() - m).norm() < 1e-14);
            assert!((expect_hhv(t, ZERO, ZERO, &p).unwrap() - m).norm() < 1e-14);
        }
        let u = C64::new(2.0, 3.0);
        let a = expect_hhv(0.4, u, ZERO, &p).unwrap();
        let b = expect_hv(0.4, u, &p).unwrap();
        assert!((a - b).norm() < 1e-12 * b.norm());
    }

    #[test]
    fn expectation_at_time_zero() {
        let p = p();
        let u = C64::new(-1.0, 2.5);
        let c = char_exponents(p.maturity, u, ZERO, &p).unwrap();
        let h0 = (u * p.x0() + c.phi + c.psi * p.v0).exp();
        assert!((expect_hv(0.0, u, &p).unwrap() - h0 * p.v0).norm() < 1e-12 * h0.norm());
    }

    #[test]
    fn domain_violation_reported() {
        let p = p();
        assert!(matches!(expect_hv(0.5, C64::new(-10.0, 0.0), &p), Err(HedgeError::DomainViolation(_))));
        assert!(matches!(expect_hv(1.5, C64::new(2.0, 0.0), &p), Err(HedgeError::DomainViolation(_))));
    }
}
