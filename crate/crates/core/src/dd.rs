//! Double-double arithmetic: an unevaluated sum `hi + lo` of two binary64
//! values with `|lo| <= ulp(hi)/2`, giving about 106 bits of significand.
//!
//! Only what the dynamics need is provided: the four operations, `sqrt`,
//! `exp`, `ln`, `sin`, `cos`, and exact decimal parsing for tableau
//! coefficients.

use crate::real::Real;
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

#[derive(Clone, Copy, Default)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

const PI: DoubleDouble = DoubleDouble {
    hi: 3.141592653589793116e+00,
    lo: 1.224646799147353207e-16,
};
const HALF_PI: DoubleDouble = DoubleDouble {
    hi: 1.570796326794896558e+00,
    lo: 6.123233995736766036e-17,
};
const LN2: DoubleDouble = DoubleDouble {
    hi: 6.931471805599452862e-01,
    lo: 2.319046813846299558e-17,
};

impl DoubleDouble {
    pub const fn new(hi: f64, lo: f64) -> Self {
        Self { hi, lo }
    }

    #[inline]
    pub fn from_sum(a: f64, b: f64) -> Self {
        let (hi, lo) = two_sum(a, b);
        Self { hi, lo }
    }

    #[inline]
    fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p, e + self.lo * b);
        Self { hi, lo }
    }

    fn ldexp(self, k: i32) -> Self {
        let f = 2f64.powi(k);
        Self {
            hi: self.hi * f,
            lo: self.lo * f,
        }
    }

    /// Taylor series for `exp(r) - 1` with `|r|` already reduced below ~1e-3.
    fn expm1_small(r: Self) -> Self {
        let mut term = r;
        let mut sum = r;
        for k in 2..=14 {
            term = term * r / Self::from_f64(k as f64);
            sum += term;
            if term.hi.abs() < 1e-34 * sum.hi.abs().max(1e-300) {
                break;
            }
        }
        sum
    }

    /// Sine and cosine on `|x| <= pi/4` by Taylor series.
    fn sin_cos_reduced(x: Self) -> (Self, Self) {
        let x2 = x * x;
        let mut term = x;
        let mut s = x;
        for k in 1..=20 {
            term = -term * x2 / Self::from_f64(((2 * k) * (2 * k + 1)) as f64);
            s += term;
            if term.hi.abs() < 1e-34 {
                break;
            }
        }
        let mut term = Self::one();
        let mut c = Self::one();
        for k in 1..=20 {
            term = -term * x2 / Self::from_f64(((2 * k - 1) * (2 * k)) as f64);
            c += term;
            if term.hi.abs() < 1e-34 {
                break;
            }
        }
        (s, c)
    }

    fn sin_cos(self) -> (Self, Self) {
        if !self.hi.is_finite() {
            return (Self::from_f64(f64::NAN), Self::from_f64(f64::NAN));
        }
        let q = (self / HALF_PI).hi.round();
        let r = self - HALF_PI.mul_f64(q);
        let (s, c) = Self::sin_cos_reduced(r);
        match (q as i64).rem_euclid(4) {
            0 => (s, c),
            1 => (c, -s),
            2 => (-s, -c),
            _ => (-c, s),
        }
    }
}

impl fmt::Debug for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "dd({:e} + {:e})", self.hi, self.lo)
    }
}

impl fmt::Display for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.hi, f)
    }
}

impl PartialEq for DoubleDouble {
    fn eq(&self, other: &Self) -> bool {
        self.hi == other.hi && self.lo == other.lo
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            o => o,
        }
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    #[inline]
    fn add(self, b: Self) -> Self {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        Self { hi, lo }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    #[inline]
    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    #[inline]
    fn mul(self, b: Self) -> Self {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Self { hi, lo }
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    #[inline]
    fn div(self, b: Self) -> Self {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Self { hi, lo } + Self::from_f64(q3)
    }
}

macro_rules! assign_op {
    ($tr:ident, $m:ident, $op:tt) => {
        impl $tr for DoubleDouble {
            #[inline]
            fn $m(&mut self, rhs: Self) {
                *self = *self $op rhs;
            }
        }
    };
}
assign_op!(AddAssign, add_assign, +);
assign_op!(SubAssign, sub_assign, -);
assign_op!(MulAssign, mul_assign, *);
assign_op!(DivAssign, div_assign, /);

impl Real for DoubleDouble {
    const EPSILON: f64 = 4.93038065763132e-32;
    const NAME: &'static str = "dd";

    #[inline]
    fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    #[inline]
    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn from_decimal(s: &str) -> Self {
        let s = s.trim();
        let (mant, exp) = match s.find(['e', 'E']) {
            Some(i) => (&s[..i], s[i + 1..].parse::<i32>().expect("bad exponent")),
            None => (s, 0),
        };
        let (neg, mant) = match mant.strip_prefix('-') {
            Some(m) => (true, m),
            None => (false, mant.strip_prefix('+').unwrap_or(mant)),
        };
        let mut acc = Self::zero();
        let mut frac_digits = 0i32;
        let mut seen_point = false;
        let ten = Self::from_f64(10.0);
        for ch in mant.chars() {
            match ch {
                '.' => seen_point = true,
                '0'..='9' => {
                    acc = acc * ten + Self::from_f64(f64::from(ch as u8 - b'0'));
                    if seen_point {
                        frac_digits += 1;
                    }
                }
                _ => panic!("malformed decimal literal {s:?}"),
            }
        }
        let e = exp - frac_digits;
        let scaled = if e >= 0 {
            acc * ten.powi(e)
        } else {
            acc / ten.powi(-e)
        };
        if neg {
            -scaled
        } else {
            scaled
        }
    }

    #[inline]
    fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Self::from_f64(self.hi.sqrt());
        }
        let x = 1.0 / self.hi.sqrt();
        let ax = self.hi * x;
        let (p, e) = two_prod(ax, ax);
        let diff = (self - Self { hi: p, lo: e }).hi * (x * 0.5);
        Self::from_sum(ax, diff)
    }

    fn exp(self) -> Self {
        if self.hi > 709.0 {
            return Self::from_f64(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Self::zero();
        }
        let k = (self.hi / LN2.hi).round();
        let r = (self - LN2.mul_f64(k)).ldexp(-10);
        let mut e = Self::expm1_small(r);
        // (1 + e)^2 - 1 = e (2 + e), applied ten times
        for _ in 0..10 {
            e = e * (e + Self::from_f64(2.0));
        }
        (e + Self::one()).ldexp(k as i32)
    }

    fn ln(self) -> Self {
        if self.hi <= 0.0 {
            return Self::from_f64(self.hi.ln());
        }
        // one Newton step on exp(y) = x doubles the f64 seed's accuracy
        let y = Self::from_f64(self.hi.ln());
        y + self * (-y).exp() - Self::one()
    }

    fn sin(self) -> Self {
        self.sin_cos().0
    }

    fn cos(self) -> Self {
        self.sin_cos().1
    }

    #[inline]
    fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }

    fn pi() -> Self {
        PI
    }
}
