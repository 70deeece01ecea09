//! The Melnikov constant of the separatrix splitting, by residues and by
//! oscillatory quadrature.
//!
//! ```text
//! c1 = i * integral e^{-i omega r} g(r) dr,   g(r) = 2 delta (r^2 - 2) / (omega sqrt(Omega) (r^2 + 2)^2)
//! ```
//!
//! Closing the contour in the lower half plane around the double pole at
//! `r = -i sqrt(2)` gives `c1 = -i (2 pi delta / sqrt(Omega)) e^{-sqrt(2) omega}`.
//! The quadrature never uses that result.

use crate::error::{Error, Result};
use crate::model::Params;
use num_complex::Complex;
use std::io::Write;
use std::sync::OnceLock;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Quadrature,
    Residue,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Quadrature => "quadrature",
            Method::Residue => "residue",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MelnikovResult {
    pub c1: Complex<f64>,
    /// Always the conjugate of `c1`.
    pub c2: Complex<f64>,
    pub method: Method,
    /// Absolute error bound (zero for the closed form).
    pub error_estimate: f64,
}

impl MelnikovResult {
    fn new(c1: Complex<f64>, method: Method, error_estimate: f64) -> Self {
        Self {
            c1,
            c2: c1.conj(),
            method,
            error_estimate,
        }
    }
}

/// Closed form from the residue at the double pole.
pub fn melnikov_residue(p: &Params) -> MelnikovResult {
    let mag = 2.0 * std::f64::consts::PI * p.delta / p.big_omega.sqrt()
        * (-std::f64::consts::SQRT_2 * p.omega).exp();
    MelnikovResult::new(Complex::new(0.0, -mag), Method::Residue, 0.0)
}

/// Even amplitude `g` and its first two derivatives.
fn amplitude(p: &Params, r: f64) -> (f64, f64, f64) {
    let k = 2.0 * p.delta / (p.omega * p.big_omega.sqrt());
    let s = r * r + 2.0;
    let g = k * (r * r - 2.0) / (s * s);
    // d/dr (r^2-2)/(r^2+2)^2 = 2r(6 - r^2)/(r^2+2)^3
    let g1 = k * 2.0 * r * (6.0 - r * r) / (s * s * s);
    // d/dr 2r(6-r^2)/(r^2+2)^3 = (6r^4 - 72r^2 + 24)/(r^2+2)^4
    let r2 = r * r;
    let g2 = k * (6.0 * r2 * r2 - 72.0 * r2 + 24.0) / (s * s * s * s);
    (g, g1, g2)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on
/// the Legendre recurrence.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

fn rules() -> &'static (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    static R: OnceLock<(Vec<(f64, f64)>, Vec<(f64, f64)>)> = OnceLock::new();
    R.get_or_init(|| (gauss_legendre(10), gauss_legendre(20)))
}

/// Adaptive Gauss-Legendre integral of `f` on `[a, b]`, starting from
/// panels of length at most `h0`; each panel is accepted when the 10- and
/// 20-point rules agree to `tol * len / (b - a)`. Returns the 20-point sum
/// and the accumulated disagreement.
fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, h0: f64, tol: f64, budget: usize) -> Result<(f64, f64)> {
    let (g10, g20) = rules();
    let rule = |lo: f64, hi: f64, nodes: &[(f64, f64)]| {
        let (c, r) = ((lo + hi) / 2.0, (hi - lo) / 2.0);
        r * nodes.iter().map(|&(x, w)| w * f(c + r * x)).sum::<f64>()
    };
    let rule_abs = |lo: f64, hi: f64| {
        let (c, r) = ((lo + hi) / 2.0, (hi - lo) / 2.0);
        r * g10.iter().map(|&(x, w)| w * f(c + r * x).abs()).sum::<f64>()
    };
    let n0 = ((b - a) / h0).ceil().max(1.0) as usize;
    let mut stack: Vec<(f64, f64)> = (0..n0)
        .rev()
        .map(|i| {
            let lo = a + (b - a) * i as f64 / n0 as f64;
            let hi = a + (b - a) * (i + 1) as f64 / n0 as f64;
            (lo, hi)
        })
        .collect();
    let (mut sum, mut err, mut panels) = (0.0, 0.0, 0usize);
    while let Some((lo, hi)) = stack.pop() {
        panels += 1;
        if panels > budget {
            return Err(Error::Accuracy {
                what: "Melnikov quadrature panel budget exhausted".into(),
                target: tol,
                achieved: err,
            });
        }
        let fine = rule(lo, hi, g20);
        let diff = (fine - rule(lo, hi, g10)).abs();
        // below this the two rules differ by rounding only
        let floor = 64.0 * f64::EPSILON * rule_abs(lo, hi);
        if diff <= (tol * (hi - lo) / (b - a)).max(floor) || hi - lo < 1e-12 * (b - a) {
            sum += fine;
            err += diff;
        } else {
            let mid = (lo + hi) / 2.0;
            stack.push((mid, hi));
            stack.push((lo, mid));
        }
    }
    Ok((sum, err))
}

/// Oscillatory quadrature of the Melnikov integral to absolute tolerance
/// `tol` (at least `1e-13`).
///
/// The cosine part is `2 * integral_0^R cos(omega r) g(r) dr` by adaptive
/// Gauss-Legendre panels of half a period, plus a three-term integration by
/// parts tail whose remainder is bounded by `2 |g''(R)|/omega^3`; `R` is
/// chosen so that bound is below `tol/10`. The sine part is integrated over
/// `[-R, R]` on an asymmetric panel grid as a numerical check that it
/// vanishes.
pub fn melnikov_quadrature(p: &Params, tol: f64) -> Result<MelnikovResult> {
    if !(tol >= 1e-13) {
        return Err(Error::Domain(format!("tolerance must be at least 1e-13, got {tol}")));
    }
    let w = p.omega;
    // remainder bound 2 |g''(R)| / w^3 <= 2 * 6k/R^4 / w^3 for R > 4
    let k = 2.0 * p.delta / (w * p.big_omega.sqrt());
    let r_max = (12.0 * k / (w.powi(3) * tol / 10.0)).powf(0.25).max(8.0);
    let half = std::f64::consts::PI / w;
    let budget = 4_000_000;

    let cos_part = |r: f64| (w * r).cos() * amplitude(p, r).0;
    let (body, body_err) = adaptive(&cos_part, 0.0, r_max, half, tol / 4.0, budget)?;
    let (g, g1, g2) = amplitude(p, r_max);
    let (s, c) = (w * r_max).sin_cos();
    let tail = -s * g / w - c * g1 / (w * w) + s * g2 / w.powi(3);
    let tail_bound = g2.abs() / w.powi(3);
    let cos_int = 2.0 * (body + tail);

    let sin_part = |r: f64| (w * r).sin() * amplitude(p, r).0;
    let (sin_int, sin_err) = adaptive(&sin_part, -r_max, r_max, half * 0.731, tol / 4.0, budget)?;

    let error_estimate = 2.0 * (body_err + tail_bound) + sin_err;
    // c1 = i * integral (cos - i sin) g = sin_int + i cos_int
    Ok(MelnikovResult::new(Complex::new(sin_int, cos_int), Method::Quadrature, error_estimate))
}

/// Writes `eps,method,re_c1,im_c1,err_est` rows.
pub fn write_csv<W: Write>(mut w: W, rows: &[(f64, MelnikovResult)]) -> std::io::Result<()> {
    writeln!(w, "eps,method,re_c1,im_c1,err_est")?;
    for (eps, r) in rows {
        writeln!(
            w,
            "{eps},{},{:.17e},{:.17e},{:.3e}",
            r.method.as_str(),
            r.c1.re,
            r.c1.im,
            r.error_estimate
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedforms::predictors;
    use crate::model::make_params;

    /// Residue of `e^{-i w r} (r^2 - 2)/(r^2 + 2)^2` at `-i sqrt 2`, from a
    /// numerical derivative of `e^{-i w r} (r^2 - 2)/(r - i sqrt 2)^2`.
    fn residue_by_derivative(w: f64) -> Complex<f64> {
        let r0 = Complex::new(0.0, -2f64.sqrt());
        let phi = |r: Complex<f64>| {
            let a = Complex::new(0.0, 2f64.sqrt());
            (Complex::new(0.0, -w) * r).exp() * (r * r - 2.0) / ((r - a) * (r - a))
        };
        let h = 1e-4;
        // five-point stencil along the real direction
        let hc = Complex::new(h, 0.0);
        (-phi(r0 + hc * 2.0) + phi(r0 + hc) * 8.0 - phi(r0 - hc) * 8.0 + phi(r0 - hc * 2.0)) / (12.0 * h)
    }

    #[test]
    fn residue_matches_independent_pole_computation() {
        for eps in [0.05, 0.1, 0.2] {
            let p = make_params(eps).unwrap();
            let res = residue_by_derivative(p.omega);
            // -i w/2 e^{-sqrt2 w}
            let expect = Complex::new(0.0, -p.omega / 2.0) * (-2f64.sqrt() * p.omega).exp();
            assert!((res - expect).norm() < 1e-9 * expect.norm());
            // lower half-plane contour: integral = -2 pi i res
            let k = 2.0 * p.delta / (p.omega * p.big_omega.sqrt());
            let c1 = Complex::i() * k * Complex::new(0.0, -2.0 * std::f64::consts::PI) * res;
            let m = melnikov_residue(&p);
            assert!((c1 - m.c1).norm() < 1e-8 * m.c1.norm());
        }
    }

    #[test]
    fn residue_reference_values() {
        let m = melnikov_residue(&make_params(0.1).unwrap());
        assert!((m.c1.norm() - 1.28427e-2).abs() < 1e-6);
        assert_eq!(m.c1.re, 0.0);
        assert!((m.c1.arg() + std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert_eq!(m.c2, m.c1.conj());
        let p = make_params(0.2).unwrap();
        let m = melnikov_residue(&p);
        let expect = 2.0 * std::f64::consts::PI * 0.2f64.powf(0.75) / p.big_omega.sqrt()
            * (-2f64.sqrt() * p.omega).exp();
        assert!((m.c1.norm() - expect).abs() < 1e-15);
    }

    #[test]
    fn residue_equals_splitting_predictor() {
        for eps in [0.05, 0.07, 0.1, 0.15, 0.2, 0.5] {
            let p = make_params(eps).unwrap();
            let a = melnikov_residue(&p).c1.norm();
            let b = predictors(&p).d0;
            assert!((a - b).abs() <= 4.0 * f64::EPSILON * b, "{a} {b}");
        }
    }

    #[test]
    fn quadrature_agrees_with_residue() {
        for eps in [0.05, 0.1, 0.2] {
            let p = make_params(eps).unwrap();
            let q = melnikov_quadrature(&p, 1e-13).unwrap();
            let r = melnikov_residue(&p);
            assert!((q.c1 - r.c1).norm() / r.c1.norm() <= 1e-8, "eps {eps}: {q:?}");
            assert!(q.c1.re.abs() <= q.error_estimate, "{q:?}");
            assert!(q.error_estimate < 1e-11);
        }
    }

    #[test]
    fn amplitude_vanishes_at_sqrt_two() {
        let p = make_params(0.1).unwrap();
        assert_eq!(amplitude(&p, 2f64.sqrt()).0.abs() < 1e-16, true);
        // derivatives against finite differences
        let (r, h) = (0.7, 1e-5);
        let (_, g1, g2) = amplitude(&p, r);
        let fd1 = (amplitude(&p, r + h).0 - amplitude(&p, r - h).0) / (2.0 * h);
        let fd2 = (amplitude(&p, r + h).1 - amplitude(&p, r - h).1) / (2.0 * h);
        assert!((g1 - fd1).abs() < 1e-8 && (g2 - fd2).abs() < 1e-8);
    }

    #[test]
    fn doubling_omega_rescales_by_exponential() {
        let p = make_params(0.1).unwrap();
        let mut q = p;
        q.omega *= 2.0;
        let a = melnikov_quadrature(&p, 1e-13).unwrap().c1.norm();
        let b = melnikov_quadrature(&q, 1e-13).unwrap().c1.norm();
        let ratio = (-2f64.sqrt() * p.omega).exp();
        assert!((b / a - ratio).abs() <= 1e-7 * ratio, "{} vs {ratio}", b / a);
    }

    #[test]
    fn tolerance_floor_is_enforced() {
        let p = make_params(0.1).unwrap();
        assert!(melnikov_quadrature(&p, 1e-15).is_err());
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let r = gauss_legendre(10);
        let s: f64 = r.iter().map(|&(x, w)| w * x.powi(18)).sum();
        assert!((s - 2.0 / 19.0).abs() < 1e-14);
    }
}
