//! Closed-form objects of the uncoupled system, the first-order corrections
//! used to start shots on the perturbed invariant manifolds, and the
//! leading-order asymptotic predictors.

use crate::error::{Error, Result};
use crate::model::{coupling_f, coupling_f_prime, potential_u, Params};
use crate::real::Real;
use num_complex::Complex;

/// Above this value of `|v sqrt(kappa1)/2|` the separatrix is evaluated in
/// its asymptotic (logarithmic) form.
const LARGE_ARG: f64 = 30.0;

/// Heteroclinic `Z = 4 sqrt(kappa1 - U(X))` of the pendulum at energy
/// `kappa1 >= 0`, parameterized by the flow-time-like variable `v`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeparatrixParam<R = f64> {
    pub kappa1: R,
}

impl<R: Real> SeparatrixParam<R> {
    pub fn new(kappa1: R) -> Result<Self> {
        if !(kappa1 >= R::zero()) {
            return Err(Error::Domain(format!("kappa1 must be >= 0, got {kappa1}")));
        }
        Ok(Self { kappa1 })
    }

    /// `(X(v), Z(v))`.
    pub fn eval(&self, v: R) -> (R, R) {
        let two = R::from_f64(2.0);
        let four = R::from_f64(4.0);
        let k = self.kappa1;
        if k == R::zero() {
            let x = (v / two.sqrt()).asinh();
            let z = R::from_f64(8.0) / (v * v + two).sqrt();
            return (x, z);
        }
        let sk = k.sqrt();
        let u = v * sk / two;
        let amp = ((two + k) / k).sqrt();
        if u.abs() <= R::from_f64(LARGE_ARG) {
            let s = u.sinh();
            let x = (amp * s).asinh();
            let z = four * u.cosh() / (R::one() / (two + k) + s * s / k).sqrt();
            (x, z)
        } else {
            let w = (-two * u.abs()).exp();
            let x = u.signum() * (u.abs() + amp.ln());
            let z = four * sk * (R::one() + two * w) * (R::one() - two * k * w / (two + k));
            (x, z)
        }
    }

    pub fn x(&self, v: R) -> R {
        self.eval(v).0
    }

    pub fn z(&self, v: R) -> R {
        self.eval(v).1
    }

    /// Inverse of `v -> X(v)`.
    pub fn v_of_x(&self, x: R) -> R {
        let two = R::from_f64(2.0);
        let k = self.kappa1;
        if k == R::zero() {
            return two.sqrt() * x.sinh();
        }
        let amp = ((two + k) / k).sqrt();
        // asinh(sinh(X)/amp) loses nothing for moderate X; for large X use
        // the log form to avoid overflowing sinh
        let u = if x.abs() < R::from_f64(600.0) {
            (x.sinh() / amp).asinh()
        } else {
            x.signum() * (x.abs() - amp.ln())
        };
        two * u / k.sqrt()
    }
}

/// `(X, Z)` on the `kappa1` heteroclinic at parameter `v`.
pub fn separatrix<R: Real>(v: R, kappa1: R) -> Result<(R, R)> {
    Ok(SeparatrixParam::new(kappa1)?.eval(v))
}

/// Periodic orbit `b^2 + B^2 = 2 kappa2/omega` of the uncoupled oscillator,
/// parameterized by its phase.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorusParam<R = f64> {
    pub kappa2: R,
    pub radius: R,
}

impl<R: Real> TorusParam<R> {
    pub fn new(kappa2: R, p: &Params<R>) -> Result<Self> {
        if !(kappa2 >= R::zero()) {
            return Err(Error::Domain(format!("kappa2 must be >= 0, got {kappa2}")));
        }
        Ok(Self {
            kappa2,
            radius: (R::from_f64(2.0) * kappa2 / p.omega).sqrt(),
        })
    }

    /// `Gamma(tau) = radius e^{i tau}`.
    pub fn gamma(&self, tau: R) -> Complex<R> {
        Complex::new(self.radius * tau.cos(), self.radius * tau.sin())
    }

    /// `(b, B)` at phase `tau`.
    pub fn point(&self, tau: R) -> (R, R) {
        let g = self.gamma(tau);
        (g.im, g.re)
    }
}

pub fn torus_point<R: Real>(tau: R, kappa2: R, p: &Params<R>) -> Result<(R, R)> {
    Ok(TorusParam::new(kappa2, p)?.point(tau))
}

/// First-order correction of `Gamma` along the `kappa1` heteroclinic,
/// `Q(v) = -i (c/omega) F(X(v))` with `c` the coupling prefactor.
pub fn first_order_q<R: Real>(v: R, kappa1: R, p: &Params<R>) -> Result<Complex<R>> {
    let x = SeparatrixParam::new(kappa1)?.x(v);
    Ok(Complex::new(R::zero(), -p.coupling() / p.omega * coupling_f(x)))
}

/// First-order correction of `Z` on the 2-d manifolds,
/// `(c/omega) F'(X(v)) Re Gamma(tau)`.
pub fn first_order_zcorr<R: Real>(
    v: R,
    tau: R,
    kappa1: R,
    kappa2: R,
    p: &Params<R>,
) -> Result<R> {
    let x = SeparatrixParam::new(kappa1)?.x(v);
    let torus = TorusParam::new(kappa2, p)?;
    Ok(p.coupling() / p.omega * coupling_f_prime(x) * torus.gamma(tau).re)
}

/// Slaved (non-oscillating) part of `(b, B)` forced by the kink at `(X, Z)`.
///
/// Two terms of the adiabatic expansion of `Gamma' = i omega Gamma - c F(X)`:
/// `Gamma ~ -i c F/omega - c F'(X) X'/omega^2`. The first term is `Q`; the
/// second is what the first-order `Z` correction corresponds to through
/// energy conservation.
pub fn forced_response<R: Real>(x: R, z: R, p: &Params<R>) -> (R, R) {
    let c = p.coupling();
    let w = p.omega;
    let b = -c * coupling_f(x) / w;
    let b_mom = -c * coupling_f_prime(x) * z / (R::from_f64(8.0) * w * w);
    (b, b_mom)
}

/// Pendulum momentum on the `kappa1` level, `4 sqrt(kappa1 - U(X))`.
pub fn z_on_level<R: Real>(x: R, kappa1: R) -> R {
    R::from_f64(4.0) * (kappa1 - potential_u(x)).sqrt()
}

/// Leading-order asymptotics for the splitting distance, the tangency and
/// critical energies, and the output velocity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictorSet {
    pub eps: f64,
    /// Splitting distance at `h = 0`.
    pub d0: f64,
    /// Tangency energy of the two disk boundaries.
    pub hs: f64,
    /// Critical energy.
    pub hc: f64,
    /// Critical velocity `4 sqrt(hc)`.
    pub vc: f64,
    /// Correction factor in the output velocity law; 1 unless measured.
    pub c_eps: f64,
}

impl PredictorSet {
    /// Output velocity `sqrt(2 vc c_eps) sqrt(vi - vc)`, zero below `vc`.
    pub fn vf(&self, vi: f64) -> f64 {
        if vi <= self.vc {
            0.0
        } else {
            (2.0 * self.vc * self.c_eps).sqrt() * (vi - self.vc).sqrt()
        }
    }

    /// Normalized energy `mu` with `h = hs mu^2`.
    pub fn mu(&self, h: f64) -> f64 {
        (h / self.hs).sqrt()
    }

    /// Normalized energy with `h = hc mu^2`.
    pub fn mu_point(&self, h: f64) -> f64 {
        (h / self.hc).sqrt()
    }

    pub fn with_c_eps(mut self, c_eps: f64) -> Self {
        self.c_eps = c_eps;
        self
    }
}

pub fn predictors(p: &Params<f64>) -> PredictorSet {
    let eps = p.eps;
    let om = p.big_omega;
    let e1 = (-om * (2.0 / eps).sqrt()).exp();
    let pi = std::f64::consts::PI;
    let d0 = 2.0 * pi * p.delta / om.sqrt() * e1;
    let hs = eps * pi * pi * e1 * e1 / 2.0;
    let hc = 2.0 * pi * pi * eps * e1 * e1;
    PredictorSet {
        eps,
        d0,
        hs,
        hc,
        vc: 4.0 * hc.sqrt(),
        c_eps: 1.0,
    }
}
