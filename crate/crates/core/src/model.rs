//! The reduced kink-defect system.
//!
//! Phase space is `(X, Z, b, B)`: kink position and scaled momentum, and
//! the amplitude and conjugate momentum of the localized defect mode. In
//! rescaled time the flow is Hamiltonian for
//!
//! ```text
//! H = Z^2/16 + U(X) + (omega/2)(b^2 + B^2) + (delta/sqrt(2 Omega)) F(X) b
//! U(X) = -2 sech^2 X,   F(X) = -2 tanh X sech X
//! ```
//!
//! with `delta = eps^(3/4)`, `Omega = sqrt(1 - eps^2/4)`, `omega = Omega/sqrt(eps)`.

use crate::error::{Error, Result};
use crate::real::Real;
use num_complex::Complex;

/// Largest admissible small parameter.
pub const EPS_MAX: f64 = 0.5;

/// Parameter pack derived from the small parameter `eps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Params<R = f64> {
    pub eps: R,
    /// `eps^(3/4)`
    pub delta: R,
    /// `sqrt(1 - eps^2/4)`
    pub big_omega: R,
    /// `Omega / sqrt(eps)`, the defect-mode frequency in rescaled time.
    pub omega: R,
    /// Multiplier on `delta` in the coupling; 1 is the physical system, 0
    /// the integrable limit.
    pub coupling_scale: R,
}

impl<R: Real> Params<R> {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= EPS_MAX) {
            return Err(Error::Domain(format!(
                "eps must lie in (0, {EPS_MAX}], got {eps}"
            )));
        }
        let e = R::from_f64(eps);
        let sqrt_e = e.sqrt();
        let delta = sqrt_e * sqrt_e.sqrt();
        let big_omega = (R::one() - e * e / R::from_f64(4.0)).sqrt();
        Ok(Self {
            eps: e,
            delta,
            big_omega,
            omega: big_omega / sqrt_e,
            coupling_scale: R::one(),
        })
    }

    pub fn with_coupling_scale(mut self, scale: f64) -> Self {
        self.coupling_scale = R::from_f64(scale);
        self
    }

    /// `delta * coupling_scale / sqrt(2 Omega)`, the prefactor of `F` in the
    /// Hamiltonian.
    #[inline]
    pub fn coupling(&self) -> R {
        self.delta * self.coupling_scale / (R::from_f64(2.0) * self.big_omega).sqrt()
    }

    /// Same parameters in binary64, for reporting.
    pub fn to_f64(&self) -> Params<f64> {
        Params {
            eps: self.eps.to_f64(),
            delta: self.delta.to_f64(),
            big_omega: self.big_omega.to_f64(),
            omega: self.omega.to_f64(),
            coupling_scale: self.coupling_scale.to_f64(),
        }
    }
}

/// Convenience constructor for the binary64 parameter pack.
pub fn make_params(eps: f64) -> Result<Params<f64>> {
    Params::new(eps)
}

/// A point `(X, Z, b, B)` of the reduced phase space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseState<R = f64> {
    pub x: R,
    pub z: R,
    pub b: R,
    /// Momentum conjugate to `b` (the `B` coordinate).
    pub b_mom: R,
}

impl<R: Real> PhaseState<R> {
    pub fn new(x: R, z: R, b: R, b_mom: R) -> Self {
        Self { x, z, b, b_mom }
    }

    #[inline]
    pub fn to_array(self) -> [R; 4] {
        [self.x, self.z, self.b, self.b_mom]
    }

    #[inline]
    pub fn from_array(a: [R; 4]) -> Self {
        Self {
            x: a[0],
            z: a[1],
            b: a[2],
            b_mom: a[3],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.z.is_finite() && self.b.is_finite() && self.b_mom.is_finite()
    }

    pub fn energy(&self, p: &Params<R>) -> R {
        hamiltonian(self, p)
    }

    pub fn energy_split(&self, p: &Params<R>) -> EnergySplit<R> {
        energy_split(self, p)
    }

    /// The reversing involution `(X, Z, b, B) -> (-X, Z, -b, B)`. Combined
    /// with `t -> -t` it maps solutions to solutions.
    pub fn reflect(&self) -> Self {
        Self {
            x: -self.x,
            z: self.z,
            b: -self.b,
            b_mom: self.b_mom,
        }
    }

    pub fn to_f64(&self) -> PhaseState<f64> {
        PhaseState {
            x: self.x.to_f64(),
            z: self.z.to_f64(),
            b: self.b.to_f64(),
            b_mom: self.b_mom.to_f64(),
        }
    }
}

/// `H = h_p + h_osc + r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergySplit<R = f64> {
    /// Pendulum part `Z^2/16 + U(X)`.
    pub h_p: R,
    /// Oscillator part `(omega/2)(b^2 + B^2)`.
    pub h_osc: R,
    /// Coupling `(delta cs/sqrt(2 Omega)) F(X) b`.
    pub r: R,
}

impl<R: Real> EnergySplit<R> {
    pub fn total(&self) -> R {
        self.h_p + self.h_osc + self.r
    }
}

/// `(sech X, tanh X)` without overflow; both vanish/saturate cleanly for
/// large `|X|`.
#[inline]
pub fn sech_tanh<R: Real>(x: R) -> (R, R) {
    let one = R::one();
    let e = (-x.abs()).exp();
    let e2 = e * e;
    let d = one + e2;
    let sech = R::from_f64(2.0) * e / d;
    let t = (one - e2) / d;
    (sech, if x < R::zero() { -t } else { t })
}

/// `U(X) = -2 sech^2 X`.
#[inline]
pub fn potential_u<R: Real>(x: R) -> R {
    let (s, _) = sech_tanh(x);
    R::from_f64(-2.0) * s * s
}

/// `U'(X) = 4 sech^2 X tanh X`.
#[inline]
pub fn potential_u_prime<R: Real>(x: R) -> R {
    let (s, t) = sech_tanh(x);
    R::from_f64(4.0) * s * s * t
}

/// `U''(X) = 4 sech^2 X (sech^2 X - 2 tanh^2 X)`.
pub fn potential_u_second<R: Real>(x: R) -> R {
    let (s, t) = sech_tanh(x);
    R::from_f64(4.0) * s * s * (s * s - R::from_f64(2.0) * t * t)
}

/// `F(X) = -2 tanh X sech X`.
#[inline]
pub fn coupling_f<R: Real>(x: R) -> R {
    let (s, t) = sech_tanh(x);
    R::from_f64(-2.0) * t * s
}

/// `F'(X) = -2 sech X (1 - 2 tanh^2 X)`.
#[inline]
pub fn coupling_f_prime<R: Real>(x: R) -> R {
    let (s, t) = sech_tanh(x);
    R::from_f64(-2.0) * s * (R::one() - R::from_f64(2.0) * t * t)
}

/// `F''(X) = 2 sech X tanh X (1 + 4 sech^2 X - 2 tanh^2 X)`.
pub fn coupling_f_second<R: Real>(x: R) -> R {
    let (s, t) = sech_tanh(x);
    let two = R::from_f64(2.0);
    two * s * t * (R::one() + R::from_f64(4.0) * s * s - two * t * t)
}

pub fn energy_split<R: Real>(s: &PhaseState<R>, p: &Params<R>) -> EnergySplit<R> {
    let h_p = s.z * s.z / R::from_f64(16.0) + potential_u(s.x);
    let h_osc = p.omega * R::from_f64(0.5) * (s.b * s.b + s.b_mom * s.b_mom);
    let r = p.coupling() * coupling_f(s.x) * s.b;
    EnergySplit { h_p, h_osc, r }
}

pub fn hamiltonian<R: Real>(s: &PhaseState<R>, p: &Params<R>) -> R {
    energy_split(s, p).total()
}

/// `(X', Z', b', B')` in rescaled time.
#[inline]
pub fn vector_field<R: Real>(s: &PhaseState<R>, p: &Params<R>) -> [R; 4] {
    field_array(&s.to_array(), p.omega, p.coupling())
}

/// Hot-path form of [`vector_field`] with the coupling prefactor hoisted.
#[inline(always)]
pub(crate) fn field_array<R: Real>(y: &[R; 4], omega: R, c: R) -> [R; 4] {
    let (s, t) = sech_tanh(y[0]);
    let two = R::from_f64(2.0);
    let s2 = s * s;
    let up = R::from_f64(4.0) * s2 * t;
    let f = -two * t * s;
    let fp = -two * s * (R::one() - two * t * t);
    [
        y[1] / R::from_f64(8.0),
        -up - c * fp * y[2],
        omega * y[3],
        -omega * y[2] - c * f,
    ]
}

/// `Gamma = B + i b`, `Theta = B - i b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexOsc<R = f64> {
    pub gamma: Complex<R>,
    pub theta: Complex<R>,
}

pub fn to_complex<R: Real>(b: R, b_mom: R) -> ComplexOsc<R> {
    ComplexOsc {
        gamma: Complex::new(b_mom, b),
        theta: Complex::new(b_mom, -b),
    }
}

/// Inverse of [`to_complex`]; only `gamma` is read (`theta` is its
/// conjugate on real data).
pub fn from_complex<R: Real>(c: &ComplexOsc<R>) -> (R, R) {
    (c.gamma.im, c.gamma.re)
}
