//! Quadrature rules for smooth time integrals and strip integrals along
//! `u = R + iy`.

use std::collections::BinaryHeap;
use std::cmp::Ordering;

use crate::error::{HedgeError, Result};
use crate::heston::C64;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    let c = 0.5 * (b + a);
    (x.iter().map(|t| c + h * t).collect(), w.iter().map(|v| v * h).collect())
}

// Gauss-Kronrod 7/15 abscissae and weights.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One 15-point Kronrod panel: estimate and error.
pub fn gk15<F: FnMut(f64) -> Result<C64>>(f: &mut F, a: f64, b: f64) -> Result<(C64, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx)? + f(c + dx)?;
        rk += s * WGK[j];
        if j % 2 == 1 {
            rg += s * WG[j / 2];
        }
    }
    let est = rk * h;
    let err = ((rk - rg) * h).norm();
    Ok((est, err))
}

struct Panel {
    a: f64,
    b: f64,
    est: C64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err).then(o.a.total_cmp(&self.a))
    }
}

/// Result of an adaptive integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: C64,
    pub abs_err: f64,
    pub evals: usize,
}

/// Globally adaptive Gauss-Kronrod integration on `[a, b]`.
pub fn adaptive<F: FnMut(f64) -> Result<C64>>(
    f: &mut F,
    a: f64,
    b: f64,
    tol: f64,
    max_evals: usize,
) -> Result<Integral> {
    let (est, err) = gk15(f, a, b)?;
    let mut evals = 15;
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, est, err });
    let mut total = est;
    let mut total_err = err;
    while total_err > tol {
        if evals + 30 > max_evals {
            return Err(HedgeError::QuadratureFailure(format!(
                "[{a}, {b}]: error {total_err:e} > {tol:e} after {evals} evaluations"
            )));
        }
        let p = heap.pop().expect("non-empty");
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            return Err(HedgeError::QuadratureFailure(format!("panel underflow near {m}")));
        }
        let (e1, r1) = gk15(f, p.a, m)?;
        let (e2, r2) = gk15(f, m, p.b)?;
        evals += 30;
        total += e1 + e2 - p.est;
        total_err += r1 + r2 - p.err;
        heap.push(Panel { a: p.a, b: m, est: e1, err: r1 });
        heap.push(Panel { a: m, b: p.b, est: e2, err: r2 });
        if heap.len() % 64 == 0 {
            // refresh the running sums against drift
            total = heap.iter().map(|q| q.est).sum();
            total_err = heap.iter().map(|q| q.err).sum();
        }
    }
    let value = heap.iter().map(|q| q.est).sum();
    let abs_err = heap.iter().map(|q| q.err).sum();
    Ok(Integral { value, abs_err, evals })
}

/// Symmetry of a strip integrand `g(y) = f(R + iy)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    /// `f(conj u) = conj f(u)`: the integral over the line is `2 Re int_0^inf`.
    Conjugate,
    /// No symmetry: integrate over the whole line.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripOptions {
    pub max_evals: usize,
    pub y_max: f64,
    /// width of the first panel on each half line
    pub first_panel: f64,
}

impl Default for StripOptions {
    fn default() -> Self {
        StripOptions { max_evals: 400_000, y_max: 1e7, first_panel: 1.0 }
    }
}

/// `int_{-inf}^{inf} f(R + iy) dy` on geometrically growing panels.
///
/// Panels are integrated adaptively with a share of `tol` each; the range
/// grows until both the last panel and the `|f(Y)| Y` tail bound fall below
/// a fraction of `tol`.
pub fn integrate_strip<F: FnMut(C64) -> Result<C64>>(
    mut f: F,
    r: f64,
    tol: f64,
    sym: Symmetry,
    opts: StripOptions,
) -> Result<Integral> {
    let half = |sign: f64, f: &mut F, budget: usize| -> Result<Integral> {
        let mut g = |y: f64| f(C64::new(r, sign * y));
        let mut a = 0.0;
        let mut b = opts.first_panel;
        let mut value = C64::new(0.0, 0.0);
        let mut abs_err = 0.0;
        let mut evals = 0;
        let panel_tol = tol / 16.0;
        loop {
            let res = adaptive(&mut g, a, b, panel_tol, budget.saturating_sub(evals))?;
            value += res.value;
            abs_err += res.abs_err;
            evals += res.evals;
            let tail = g(b)?.norm() * b;
            evals += 1;
            if res.value.norm() < tol / 4.0 && tail < tol / 4.0 {
                abs_err += tail;
                break;
            }
            if b >= opts.y_max {
                return Err(HedgeError::QuadratureFailure(format!(
                    "strip R={r}: tail {tail:e} above tolerance at Y={b}"
                )));
            }
            a = b;
            b *= 2.0;
        }
        Ok(Integral { value, abs_err, evals })
    };
    match sym {
        Symmetry::Conjugate => {
            let h = half(1.0, &mut f, opts.max_evals)?;
            Ok(Integral { value: C64::new(2.0 * h.value.re, 0.0), abs_err: 2.0 * h.abs_err, evals: h.evals })
        }
        Symmetry::None => {
            let up = half(1.0, &mut f, opts.max_evals)?;
            let dn = half(-1.0, &mut f, opts.max_evals - up.evals)?;
            Ok(Integral {
                value: up.value + dn.value,
                abs_err: up.abs_err + dn.abs_err,
                evals: up.evals + dn.evals,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [1, 2, 5, 16, 64] {
            let (x, w) = gauss_legendre(n);
            let sw: f64 = w.iter().sum();
            assert!((sw - 2.0).abs() < 1e-13, "n={n}");
            let deg = 2 * n - 1;
            let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((s - exact).abs() < 1e-13, "n={n}");
        }
        let (x, w) = gauss_legendre_on(20, 0.0, 3.0);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.exp()).sum();
        assert!((s - (3f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn adaptive_handles_kinks() {
        let mut f = |x: f64| Ok(C64::new((x - 0.3).abs(), x.sqrt()));
        let r = adaptive(&mut f, 0.0, 1.0, 1e-11, 100_000).unwrap();
        assert!((r.value.re - (0.045 + 0.245)).abs() < 1e-10);
        assert!((r.value.im - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn gaussian_strip_integral() {
        let f = |u: C64| Ok(C64::new((-(u.im * u.im) / 2.0).exp(), 0.0));
        let r = integrate_strip(f, 0.5, 1e-12, Symmetry::Conjugate, StripOptions::default()).unwrap();
        assert!((r.value.re - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-11);
        let r = integrate_strip(f, 0.5, 1e-12, Symmetry::None, StripOptions::default()).unwrap();
        assert!((r.value.re - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-11);
    }

    #[test]
    fn algebraic_tail_strip_integral() {
        // int dy / (1 + y^2) = pi
        let f = |u: C64| Ok(C64::new(1.0 / (1.0 + u.im * u.im), 0.0));
        let r = integrate_strip(f, 0.0, 1e-6, Symmetry::None, StripOptions::default()).unwrap();
        assert!((r.value.re - std::f64::consts::PI).abs() < 1e-6);
    }

    #[test]
    fn budget_exhaustion_is_an_error() {
        let f = |u: C64| Ok(C64::new(1.0 / (1.0 + u.im.abs()), 0.0));
        let e = integrate_strip(f, 0.0, 1e-8, Symmetry::Conjugate, StripOptions { max_evals: 5000, ..Default::default() });
        assert!(matches!(e, Err(HedgeError::QuadratureFailure(_))));
    }
}
