//! Traces of the invariant manifolds on the section `X = 0, H = h`.
//!
//! The unstable manifold of the parabolic point at `X = -inf` is a single
//! orbit per energy; its first crossing is the point `P^u`. The stable
//! manifold of the family of periodic orbits at `X = +inf` with oscillator
//! energy `kappa2` cuts the section in a closed curve, sampled by the phase
//! `tau` of the asymptotic oscillation. Both are initialized at `|X| = x_max`
//! from the closed forms (separatrix plus slaved oscillator response) with
//! `Z` fixed by the energy, then integrated to the section.

use crate::closedforms::{forced_response, torus_point, z_on_level};
use crate::error::{Error, Result};
use crate::integrator::{integrate_to_section, Direction, IntegratorConfig};
use crate::model::{coupling_f, potential_u, Params, PhaseState};
use crate::real::Real;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::io::Write;

/// Which manifold a section object belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Unstable,
    Stable,
}

impl Side {
    pub fn as_str(&self) -> &'static str {
        match self {
            Side::Unstable => "unstable",
            Side::Stable => "stable",
        }
    }
}

/// A point of the section, in `(b, B)` coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SectionPoint {
    pub b: f64,
    pub b_mom: f64,
    pub h: f64,
    /// Pendulum momentum at the crossing.
    pub z: f64,
    pub side: Side,
}

impl SectionPoint {
    /// `sigma(b, B) = (-b, B)`, the trace of the reversing involution.
    pub fn reflect(&self) -> Self {
        Self {
            b: -self.b,
            side: match self.side {
                Side::Unstable => Side::Stable,
                Side::Stable => Side::Unstable,
            },
            ..*self
        }
    }

    pub fn dist(&self, other: &SectionPoint) -> f64 {
        (self.b - other.b).hypot(self.b_mom - other.b_mom)
    }

    pub fn state(&self) -> PhaseState {
        PhaseState::new(0.0, self.z, self.b, self.b_mom)
    }

    /// Whether the point lies in the section disk of its energy level.
    pub fn in_disk(&self, p: &Params) -> bool {
        self.b * self.b + self.b_mom * self.b_mom <= disk_radius_sq(self.h, p)
    }
}

/// Squared radius `(4 + 2h) sqrt(eps)/Omega` of the section disk: the
/// largest oscillator amplitude compatible with `X = 0, H = h`.
pub fn disk_radius_sq(h: f64, p: &Params) -> f64 {
    (4.0 + 2.0 * h) / p.omega
}

/// One sample of a section curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurveSample {
    /// Asymptotic oscillator phase at the far end.
    pub tau: f64,
    pub b: f64,
    pub b_mom: f64,
    pub z: f64,
}

/// A closed curve on the section, sampled on a uniform `tau` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SectionCurve {
    pub samples: Vec<CurveSample>,
    pub side: Side,
    pub kappa1: f64,
    pub kappa2: f64,
}

impl SectionCurve {
    pub fn h(&self) -> f64 {
        self.kappa1 + self.kappa2
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        self.samples.iter().map(|s| [s.b, s.b_mom]).collect()
    }

    /// Mirror image under `sigma(b, B) = (-b, B)`.
    pub fn reflect(&self) -> Self {
        Self {
            samples: self
                .samples
                .iter()
                .map(|s| CurveSample { b: -s.b, ..*s })
                .collect(),
            side: match self.side {
                Side::Unstable => Side::Stable,
                Side::Stable => Side::Unstable,
            },
            ..self.clone()
        }
    }

    pub fn centroid(&self) -> [f64; 2] {
        let n = self.samples.len() as f64;
        let (sb, sm) = self
            .samples
            .iter()
            .fold((0.0, 0.0), |(a, c), s| (a + s.b, c + s.b_mom));
        [sb / n, sm / n]
    }

    /// Largest distance between consecutive samples (closing segment
    /// included).
    pub fn max_spacing(&self) -> f64 {
        let pts = self.points();
        let n = pts.len();
        (0..n)
            .map(|i| dist(pts[i], pts[(i + 1) % n]))
            .fold(0.0, f64::max)
    }

    /// Resamples the curve on `m` uniform phases by trigonometric
    /// interpolation of the samples. Requires the samples to sit on a
    /// uniform grid of `[0, 2 pi)`.
    pub fn refined(&self, m: usize) -> Self {
        let n = self.samples.len();
        let coef = fourier(&self.samples);
        let samples = (0..m)
            .map(|k| {
                let tau = 2.0 * PI * k as f64 / m as f64;
                let (b, b_mom) = eval_fourier(&coef, n, tau);
                CurveSample {
                    tau,
                    b,
                    b_mom,
                    z: f64::NAN,
                }
            })
            .collect();
        Self {
            samples,
            ..self.clone()
        }
    }

    /// Writes `tau,b,B` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "tau,b,B")?;
        for s in &self.samples {
            writeln!(w, "{:.17e},{:.17e},{:.17e}", s.tau, s.b, s.b_mom)?;
        }
        Ok(())
    }
}

/// Writes `h,side,b,B` rows.
pub fn write_points_csv<W: Write>(mut w: W, pts: &[SectionPoint]) -> std::io::Result<()> {
    writeln!(w, "h,side,b,B")?;
    for p in pts {
        writeln!(w, "{:.17e},{},{:.17e},{:.17e}", p.h, p.side.as_str(), p.b, p.b_mom)?;
    }
    Ok(())
}

/// Complex DFT coefficients `c_j`, `j = 0..n`, of `b + i B`.
fn fourier(s: &[CurveSample]) -> Vec<(f64, f64)> {
    let n = s.len();
    (0..n)
        .map(|j| {
            let mut re = 0.0;
            let mut im = 0.0;
            for (k, p) in s.iter().enumerate() {
                let a = -2.0 * PI * ((j * k) % n) as f64 / n as f64;
                let (sa, ca) = a.sin_cos();
                re += p.b * ca - p.b_mom * sa;
                im += p.b * sa + p.b_mom * ca;
            }
            (re / n as f64, im / n as f64)
        })
        .collect()
}

fn eval_fourier(c: &[(f64, f64)], n: usize, tau: f64) -> (f64, f64) {
    let mut re = 0.0;
    let mut im = 0.0;
    for (j, &(cr, ci)) in c.iter().enumerate() {
        // symmetric frequency range; the Nyquist mode becomes a cosine
        let (freq, w) = if 2 * j < n {
            (j as f64, 1.0)
        } else if 2 * j == n {
            (0.0, 0.0)
        } else {
            (j as f64 - n as f64, 1.0)
        };
        if w == 0.0 {
            let cs = (n as f64 / 2.0 * tau).cos();
            re += cr * cs;
            im += ci * cs;
            continue;
        }
        let (sa, ca) = (freq * tau).sin_cos();
        re += cr * ca - ci * sa;
        im += cr * sa + ci * ca;
    }
    (re, im)
}

/// Initial state at `X = x` on the manifold with pendulum energy `kappa1`
/// and free oscillation `(b, B)_free`; the slaved response is added and `Z`
/// is solved from `H = h`.
fn initial_state<R: Real>(x: f64, kappa1: f64, free: (f64, f64), h: f64, p: &Params<R>) -> Result<PhaseState<R>> {
    let xr = R::from_f64(x);
    let c = p.coupling();
    let two = R::from_f64(2.0);
    let hr = R::from_f64(h);
    let (bt, bmt) = (R::from_f64(free.0), R::from_f64(free.1));
    let mut z = z_on_level(xr, R::from_f64(kappa1));
    let mut state = PhaseState::new(xr, z, bt, bmt);
    for _ in 0..3 {
        let (bf, bmf) = forced_response(xr, z, p);
        let b = bt + bf;
        let bm = bmt + bmf;
        let rest = hr - potential_u(xr) - p.omega * (b * b + bm * bm) / two - c * coupling_f(xr) * b;
        if !(rest > R::zero()) {
            return Err(Error::Domain(format!(
                "no real Z at X = {x} for h = {h}, kappa1 = {kappa1}: energy surplus {rest}"
            )));
        }
        z = R::from_f64(4.0) * rest.sqrt();
        state = PhaseState::new(xr, z, b, bm);
    }
    Ok(state)
}

fn to_section<R: Real>(s: &PhaseState<R>, p: &Params<R>, cfg: &IntegratorConfig, dir: Direction) -> Result<PhaseState<R>> {
    match integrate_to_section(s, p, cfg, 0.0, dir) {
        Ok(l) => Ok(l.state),
        Err(e @ (Error::TurnedBack { .. } | Error::Timeout { .. })) => Err(Error::Shot(format!(
            "manifold orbit failed to reach X = 0 ({e}); this indicates a bug or an invalid configuration"
        ))),
        Err(e) => Err(e),
    }
}

fn check_h(h: f64) -> Result<()> {
    if !(h >= 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("energy level must be >= 0, got {h}")));
    }
    Ok(())
}

/// First crossing of the unstable manifold of the left parabolic point at
/// energy `h`.
pub fn unstable_point<R: Real>(h: f64, p: &Params<R>, cfg: &IntegratorConfig) -> Result<SectionPoint> {
    check_h(h)?;
    let s0 = initial_state(-cfg.x_max, h, (0.0, 0.0), h, p)?;
    let s = to_section(&s0, p, cfg, Direction::Forward)?;
    Ok(point(&s, h, Side::Unstable))
}

/// Initial condition used by [`unstable_point`], exposed for shooting.
pub fn unstable_initial<R: Real>(h: f64, p: &Params<R>, cfg: &IntegratorConfig) -> Result<PhaseState<R>> {
    check_h(h)?;
    initial_state(-cfg.x_max, h, (0.0, 0.0), h, p)
}

/// First (backward) crossing of the stable manifold of the right parabolic
/// point. With `via_symmetry` the reflection of [`unstable_point`] is
/// returned instead of integrating.
pub fn stable_point<R: Real>(h: f64, p: &Params<R>, cfg: &IntegratorConfig, via_symmetry: bool) -> Result<SectionPoint> {
    if via_symmetry {
        return Ok(unstable_point(h, p, cfg)?.reflect());
    }
    check_h(h)?;
    let s0 = initial_state(cfg.x_max, h, (0.0, 0.0), h, p)?;
    let s = to_section(&s0, p, cfg, Direction::Backward)?;
    Ok(point(&s, h, Side::Stable))
}

fn point<R: Real>(s: &PhaseState<R>, h: f64, side: Side) -> SectionPoint {
    let f = s.to_f64();
    SectionPoint {
        b: f.b,
        b_mom: f.b_mom,
        h,
        z: f.z,
        side,
    }
}

fn check_curve_args(kappa1: f64, kappa2: f64, n_tau: usize) -> Result<()> {
    if !(kappa1 >= 0.0 && kappa2 > 0.0 && (kappa1 + kappa2).is_finite()) {
        return Err(Error::Domain(format!(
            "curves need kappa1 >= 0 and kappa2 > 0, got ({kappa1}, {kappa2})"
        )));
    }
    if n_tau < 16 {
        return Err(Error::Domain(format!("n_tau must be at least 16, got {n_tau}")));
    }
    Ok(())
}

fn curve<R: Real>(
    kappa1: f64,
    kappa2: f64,
    p: &Params<R>,
    cfg: &IntegratorConfig,
    n_tau: usize,
    side: Side,
) -> Result<SectionCurve> {
    check_curve_args(kappa1, kappa2, n_tau)?;
    let h = kappa1 + kappa2;
    let pf = p.to_f64();
    let (x0, dir) = match side {
        Side::Stable => (cfg.x_max, Direction::Backward),
        Side::Unstable => (-cfg.x_max, Direction::Forward),
    };
    let samples: Vec<Result<CurveSample>> = (0..n_tau)
        .into_par_iter()
        .map(|k| {
            let tau = 2.0 * PI * k as f64 / n_tau as f64;
            let (bt, bmt) = torus_point(tau, kappa2, &pf)?;
            // the unstable family is the mirror image of the stable one
            let free = match side {
                Side::Stable => (bt, bmt),
                Side::Unstable => (-bt, bmt),
            };
            let s0 = initial_state(x0, kappa1, free, h, p)?;
            let s = to_section(&s0, p, cfg, dir).map_err(|e| match e {
                Error::Shot(m) => Error::Shot(format!("tau = {tau}: {m}")),
                e => e,
            })?;
            let f = s.to_f64();
            Ok(CurveSample {
                tau,
                b: f.b,
                b_mom: f.b_mom,
                z: f.z,
            })
        })
        .collect();
    Ok(SectionCurve {
        samples: samples.into_iter().collect::<Result<_>>()?,
        side,
        kappa1,
        kappa2,
    })
}

/// Trace of the stable manifold of the right periodic orbits with
/// asymptotic energies `(kappa1, kappa2)`, sampled at `n_tau` phases.
pub fn stable_curve<R: Real>(kappa1: f64, kappa2: f64, p: &Params<R>, cfg: &IntegratorConfig, n_tau: usize) -> Result<SectionCurve> {
    curve(kappa1, kappa2, p, cfg, n_tau, Side::Stable)
}

/// Trace of the unstable manifold of the left periodic orbits, computed by
/// forward integration (compare with `stable_curve(..).reflect()`).
pub fn unstable_curve<R: Real>(kappa1: f64, kappa2: f64, p: &Params<R>, cfg: &IntegratorConfig, n_tau: usize) -> Result<SectionCurve> {
    curve(kappa1, kappa2, p, cfg, n_tau, Side::Unstable)
}

/// Both first crossings at `h = 0` and their separation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Splitting {
    pub unstable: SectionPoint,
    pub stable: SectionPoint,
    /// `|P^u - P^s|`
    pub distance: f64,
    /// `|B^u - B^s|`, zero by reversibility.
    pub b_mom_mismatch: f64,
}

/// Measures the splitting at `h = 0`, computing the stable point by direct
/// backward integration.
pub fn splitting<R: Real>(p: &Params<R>, cfg: &IntegratorConfig) -> Result<Splitting> {
    let (u, s) = rayon::join(|| unstable_point(0.0, p, cfg), || stable_point(0.0, p, cfg, false));
    let (u, s) = (u?, s?);
    Ok(Splitting {
        unstable: u,
        stable: s,
        distance: u.dist(&s),
        b_mom_mismatch: (u.b_mom - s.b_mom).abs(),
    })
}

/// `|P_0^u - P_0^s|`.
pub fn splitting_distance<R: Real>(p: &Params<R>, cfg: &IntegratorConfig) -> Result<f64> {
    Ok(splitting(p, cfg)?.distance)
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Winding number of the closed polygon around `q`.
pub fn winding_number(poly: &[[f64; 2]], q: [f64; 2]) -> i32 {
    let n = poly.len();
    let mut w = 0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if a[1] <= q[1] {
            if b[1] > q[1] && cross(a, b, q) > 0.0 {
                w += 1;
            }
        } else if b[1] <= q[1] && cross(a, b, q) < 0.0 {
            w -= 1;
        }
    }
    w
}

/// Proper intersection of segments `ab` and `cd`; returns the parameters
/// along each.
fn segment_intersection(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> Option<(f64, f64)> {
    let r = [b[0] - a[0], b[1] - a[1]];
    let s = [d[0] - c[0], d[1] - c[1]];
    let den = r[0] * s[1] - r[1] * s[0];
    if den == 0.0 {
        return None;
    }
    let ac = [c[0] - a[0], c[1] - a[1]];
    let t = (ac[0] * s[1] - ac[1] * s[0]) / den;
    let u = (ac[0] * r[1] - ac[1] * r[0]) / den;
    ((0.0..1.0).contains(&t) && (0.0..1.0).contains(&u)).then_some((t, u))
}

/// Errors if two non-adjacent edges of the closed polygon cross.
pub fn check_simple(poly: &[[f64; 2]]) -> Result<()> {
    let n = poly.len();
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let hit = segment_intersection(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]);
            if hit.is_some() {
                return Err(Error::Degenerate(format!(
                    "polygon edges {i} and {j} intersect"
                )));
            }
        }
    }
    Ok(())
}

/// Distance from `q` to the quadratic through three consecutive samples,
/// minimized over the local parameter in `[-1, 1]`.
fn quad_distance(p0: [f64; 2], p1: [f64; 2], p2: [f64; 2], q: [f64; 2]) -> f64 {
    let at = |s: f64| {
        let x = p1[0] + s * (p2[0] - p0[0]) / 2.0 + s * s * (p2[0] - 2.0 * p1[0] + p0[0]) / 2.0;
        let y = p1[1] + s * (p2[1] - p0[1]) / 2.0 + s * s * (p2[1] - 2.0 * p1[1] + p0[1]) / 2.0;
        dist([x, y], q)
    };
    // coarse scan, then golden section around the best node
    let m = 16;
    let (mut best, mut best_s) = (f64::INFINITY, 0.0);
    for i in 0..=m {
        let s = -1.0 + 2.0 * i as f64 / m as f64;
        let d = at(s);
        if d < best {
            best = d;
            best_s = s;
        }
    }
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = ((best_s - 2.0 / m as f64).max(-1.0), (best_s + 2.0 / m as f64).min(1.0));
    for _ in 0..60 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if at(a) < at(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    best.min(at(0.5 * (lo + hi)))
}

/// Position of a point relative to a closed curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointCurveRelation {
    /// Distance to the curve, positive inside and negative outside.
    pub signed_distance: f64,
    pub inside: bool,
}

/// Inside/outside by winding number and distance to the curve, refined by a
/// quadratic through the nearest samples.
pub fn point_curve_relation(q: [f64; 2], c: &SectionCurve) -> Result<PointCurveRelation> {
    let pts = c.points();
    relation_to_polygon(q, &pts, true)
}

fn relation_to_polygon(q: [f64; 2], pts: &[[f64; 2]], check: bool) -> Result<PointCurveRelation> {
    let n = pts.len();
    if n < 16 {
        return Err(Error::Degenerate(format!("curve has {n} samples, need at least 16")));
    }
    if check {
        check_simple(pts)?;
    }
    let inside = winding_number(pts, q) != 0;
    let k = (0..n)
        .min_by(|&i, &j| dist(pts[i], q).total_cmp(&dist(pts[j], q)))
        .unwrap();
    let d = quad_distance(pts[(k + n - 1) % n], pts[k], pts[(k + 1) % n], q);
    Ok(PointCurveRelation {
        signed_distance: if inside { d } else { -d },
        inside,
    })
}

/// A crossing of two closed curves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurveCrossing {
    /// Fractional sample index along the first curve.
    pub s_first: f64,
    /// Fractional sample index along the second curve.
    pub s_second: f64,
    pub at: [f64; 2],
}

/// All crossings of the two closed polygons.
pub fn curve_intersections(a: &SectionCurve, b: &SectionCurve) -> Vec<CurveCrossing> {
    let pa = a.points();
    let pb = b.points();
    let (na, nb) = (pa.len(), pb.len());
    let mut out = Vec::new();
    for i in 0..na {
        let (a0, a1) = (pa[i], pa[(i + 1) % na]);
        for j in 0..nb {
            let (b0, b1) = (pb[j], pb[(j + 1) % nb]);
            if let Some((t, u)) = segment_intersection(a0, a1, b0, b1) {
                out.push(CurveCrossing {
                    s_first: i as f64 + t,
                    s_second: j as f64 + u,
                    at: [a0[0] + t * (a1[0] - a0[0]), a0[1] + t * (a1[1] - a0[1])],
                });
            }
        }
    }
    out
}

/// How deeply the first curve enters the second: the largest signed
/// distance (positive inside) of a sample of `a` relative to `b`. Positive
/// exactly when the curves cross or `a` has points inside `b`.
pub fn penetration(a: &SectionCurve, b: &SectionCurve) -> Result<f64> {
    let pb = b.points();
    check_simple(&pb)?;
    let mut best = f64::NEG_INFINITY;
    for q in a.points() {
        best = best.max(relation_to_polygon(q, &pb, false)?.signed_distance);
    }
    Ok(best)
}
