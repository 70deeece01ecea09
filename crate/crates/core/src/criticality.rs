//! Scans and root finders for the critical energy, the tangency energy, the
//! output velocity law and the exponential rate of the splitting.

use crate::closedforms::{predictors, PredictorSet};
use crate::error::{Error, Result};
use crate::integrator::{shoot, IntegratorConfig, ShotKind};
use crate::manifolds::{
    curve_intersections, penetration, point_curve_relation, splitting, stable_curve, unstable_curve,
    unstable_initial, unstable_point, PointCurveRelation, SectionCurve, SectionPoint,
};
use crate::model::Params;
use crate::real::Real;
use rayon::prelude::*;
use std::io::Write;

/// Knobs of the geometric searches.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchConfig {
    /// Phases integrated per curve.
    pub n_tau: usize,
    /// Phases after trigonometric resampling, used for all geometry.
    pub refine: usize,
    /// Stop when `(hi - lo)/mid` falls below this.
    pub rel_width: f64,
    /// Bracket doublings tried before giving up.
    pub widen: usize,
    /// Interior points checked for monotonicity of the final bracket.
    pub monotone_points: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            n_tau: 32,
            refine: 2048,
            rel_width: 1e-3,
            widen: 3,
            monotone_points: 5,
        }
    }
}

/// Least-squares line `y = intercept + slope x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitReport {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    /// Euclidean norm of the residuals.
    pub residual_norm: f64,
    pub n: usize,
}

/// Ordinary least squares; at least four points are required.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<FitReport> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::Fit(format!("{} abscissae for {} ordinates", n, y.len())));
    }
    if n < 4 {
        return Err(Error::Fit(format!("{n} points, at least 4 needed")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all abscissae coincide".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let s2 = rss / (nf - 2.0);
    Ok(FitReport {
        slope,
        intercept,
        slope_se: (s2 / sxx).sqrt(),
        intercept_se: (s2 * (1.0 / nf + mx * mx / sxx)).sqrt(),
        residual_norm: rss.sqrt(),
        n,
    })
}

/// One evaluation of a bracketed indicator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Probe {
    pub h: f64,
    /// Continuous indicator: positive on the high-energy side.
    pub value: f64,
}

/// Result of a bracketed search in `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct RootReport {
    /// Midpoint of the final bracket.
    pub h: f64,
    pub lo: f64,
    pub hi: f64,
    /// Every indicator evaluation, in order.
    pub probes: Vec<Probe>,
}

impl RootReport {
    pub fn rel_width(&self) -> f64 {
        (self.hi - self.lo) / self.h
    }
}

/// Bracketing search on a continuous indicator that is negative below the
/// root and positive above it. Regula falsi with the Illinois modification,
/// falling back to bisection when the secant point is not well inside.
fn bracketed_root<F: FnMut(f64) -> Result<f64>>(
    what: &str,
    mut f: F,
    bracket: (f64, f64),
    sc: &SearchConfig,
) -> Result<RootReport> {
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Domain(format!("invalid bracket ({lo}, {hi})")));
    }
    let mut probes = Vec::new();
    let mut eval = |h: f64, probes: &mut Vec<Probe>| -> Result<f64> {
        let v = f(h)?;
        probes.push(Probe { h, value: v });
        Ok(v)
    };
    let mut flo = eval(lo, &mut probes)?;
    let mut fhi = eval(hi, &mut probes)?;
    let mut tries = 0;
    while !(flo < 0.0 && fhi > 0.0) {
        if tries == sc.widen {
            return Err(Error::Bracketing {
                what: what.into(),
                lo,
                hi,
                ind_lo: format!("{flo:e}"),
                ind_hi: format!("{fhi:e}"),
            });
        }
        tries += 1;
        if flo >= 0.0 {
            lo /= 2.0;
            flo = eval(lo, &mut probes)?;
        }
        if fhi <= 0.0 {
            hi *= 2.0;
            fhi = eval(hi, &mut probes)?;
        }
    }
    let mut side = 0i8;
    while (hi - lo) / (0.5 * (lo + hi)) > sc.rel_width {
        let secant = (lo * fhi - hi * flo) / (fhi - flo);
        let w = hi - lo;
        let h = if secant > lo + 0.01 * w && secant < hi - 0.01 * w {
            secant
        } else {
            0.5 * (lo + hi)
        };
        let v = eval(h, &mut probes)?;
        if v > 0.0 {
            hi = h;
            fhi = v;
            if side == 1 {
                flo /= 2.0;
            }
            side = 1;
        } else {
            lo = h;
            flo = v;
            if side == -1 {
                fhi /= 2.0;
            }
            side = -1;
        }
        // a secant step that lands right next to the root leaves a lopsided
        // bracket; when the local secant puts the root within the target
        // width, probe just past it to collapse the bracket
        let mid = 0.5 * (lo + hi);
        let delta = v.abs() * (hi - lo) / (fhi - flo).abs();
        if (hi - lo) / mid > sc.rel_width && delta < 0.4 * sc.rel_width * mid {
            let off = (2.0 * delta).max(0.1 * sc.rel_width * mid);
            let g = if side == 1 { h - off } else { h + off };
            if g > lo && g < hi {
                let v = eval(g, &mut probes)?;
                if v > 0.0 {
                    hi = g;
                    fhi = v;
                } else {
                    lo = g;
                    flo = v;
                }
            }
        }
    }
    Ok(RootReport {
        h: 0.5 * (lo + hi),
        lo,
        hi,
        probes,
    })
}

/// `P^u_h` against the trace of the stable manifold with `kappa1 = 0`,
/// `kappa2 = h`.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticalProbe {
    pub h: f64,
    pub point: SectionPoint,
    pub relation: PointCurveRelation,
    pub curve: SectionCurve,
}

/// Evaluates the critical-energy indicator at `h`.
pub fn hc_probe<R: Real>(h: f64, p: &Params<R>, cfg: &IntegratorConfig, sc: &SearchConfig) -> Result<CriticalProbe> {
    let (pt, curve) = rayon::join(|| unstable_point(h, p, cfg), || stable_curve(0.0, h, p, cfg, sc.n_tau));
    let (pt, curve) = (pt?, curve?);
    let fine = curve.refined(sc.refine);
    let relation = point_curve_relation([pt.b, pt.b_mom], &fine)?;
    Ok(CriticalProbe {
        h,
        point: pt,
        relation,
        curve,
    })
}

/// Critical energy with its final bracket and a monotonicity check.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticalReport {
    pub root: RootReport,
    /// `(h, inside)` at equispaced interior points of the final bracket.
    pub monotone_check: Vec<(f64, bool)>,
}

// at larger eps the stable curve folds over itself by 4 h_c,
// so the window stays tight on the upper side
fn default_bracket(center: f64, given: Option<(f64, f64)>) -> (f64, f64) {
    given.unwrap_or((0.25 * center, 2.0 * center))
}

/// Smallest `h` at which `P^u_h` lies inside the stable-manifold curve at
/// the same energy.
pub fn find_hc<R: Real>(
    p: &Params<R>,
    cfg: &IntegratorConfig,
    sc: &SearchConfig,
    bracket: Option<(f64, f64)>,
) -> Result<CriticalReport> {
    let pred = predictors(&p.to_f64());
    let bracket = default_bracket(pred.hc, bracket);
    let root = bracketed_root(
        "critical energy (P^u inside the stable curve)",
        |h| Ok(hc_probe(h, p, cfg, sc)?.relation.signed_distance),
        bracket,
        sc,
    )?;
    let m = sc.monotone_points;
    let hs: Vec<f64> = (1..=m)
        .map(|i| root.lo + (root.hi - root.lo) * i as f64 / (m + 1) as f64)
        .collect();
    let monotone_check = hs
        .iter()
        .map(|&h| Ok((h, hc_probe(h, p, cfg, sc)?.relation.inside)))
        .collect::<Result<Vec<_>>>()?;
    let flags: Vec<bool> = monotone_check.iter().map(|c| c.1).collect();
    if flags.windows(2).any(|w| w[0] && !w[1]) {
        return Err(Error::Inconsistent(format!(
            "inside/outside indicator not monotone on [{}, {}]: {flags:?}",
            root.lo, root.hi
        )));
    }
    Ok(CriticalReport { root, monotone_check })
}

/// Both boundary curves at energy `h` (`kappa1 = 0`), resampled.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvePair {
    pub h: f64,
    pub stable: SectionCurve,
    /// Reflection of `stable`.
    pub unstable: SectionCurve,
}

impl CurvePair {
    pub fn crossings(&self) -> usize {
        curve_intersections(&self.unstable, &self.stable).len()
    }
}

/// Computes the stable curve at `h` and its mirror image, both refined.
pub fn curve_pair<R: Real>(h: f64, p: &Params<R>, cfg: &IntegratorConfig, sc: &SearchConfig) -> Result<CurvePair> {
    let stable = stable_curve(0.0, h, p, cfg, sc.n_tau)?.refined(sc.refine);
    let unstable = stable.reflect();
    Ok(CurvePair { h, stable, unstable })
}

/// Tangency energy of the two boundary curves.
#[derive(Clone, Debug, PartialEq)]
pub struct TangencyReport {
    pub root: RootReport,
    /// Crossing count of the curves at the upper end of the final bracket.
    pub crossings_at_hi: usize,
    /// Largest distance between the reflected stable curve and the directly
    /// integrated unstable curve at the root.
    pub reflection_mismatch: f64,
}

/// Smallest `h` at which the unstable and stable boundary curves meet. The
/// indicator is how far the unstable curve penetrates the stable one
/// (negative while they are disjoint); its sign agrees with the segment
/// crossing predicate.
pub fn find_hs<R: Real>(
    p: &Params<R>,
    cfg: &IntegratorConfig,
    sc: &SearchConfig,
    bracket: Option<(f64, f64)>,
) -> Result<TangencyReport> {
    let pred = predictors(&p.to_f64());
    let bracket = default_bracket(pred.hs, bracket);
    let mut pair_flags = Vec::new();
    let root = bracketed_root(
        "tangency energy (curve intersection)",
        |h| {
            let pair = curve_pair(h, p, cfg, sc)?;
            let pen = penetration(&pair.unstable, &pair.stable)?;
            pair_flags.push((pen, pair.crossings()));
            Ok(pen)
        },
        bracket,
        sc,
    )?;
    for &(pen, n) in &pair_flags {
        // a positive penetration without crossings would mean nesting
        if (pen > 0.0) != (n > 0) && pen.abs() > 1e-12 {
            return Err(Error::Inconsistent(format!(
                "penetration {pen:e} but {n} curve crossings"
            )));
        }
    }
    let crossings_at_hi = curve_pair(root.hi, p, cfg, sc)?.crossings();
    let direct = unstable_curve(0.0, root.h, p, cfg, sc.n_tau)?;
    let mirrored = stable_curve(0.0, root.h, p, cfg, sc.n_tau)?.reflect();
    let reflection_mismatch = direct
        .samples
        .iter()
        .zip(&mirrored.samples)
        .map(|(a, b)| (a.b - b.b).hypot(a.b_mom - b.b_mom))
        .fold(0.0, f64::max);
    Ok(TangencyReport {
        root,
        crossings_at_hi,
        reflection_mismatch,
    })
}

/// Crossing counts of the boundary curves at `h = hs mu^2`.
pub fn intersection_counts<R: Real>(
    p: &Params<R>,
    cfg: &IntegratorConfig,
    sc: &SearchConfig,
    mus: &[f64],
) -> Result<Vec<(f64, f64, usize)>> {
    let pred = predictors(&p.to_f64());
    mus.iter()
        .map(|&mu| {
            let h = pred.hs * mu * mu;
            Ok((mu, h, curve_pair(h, p, cfg, sc)?.crossings()))
        })
        .collect()
}

/// One shot from the unstable manifold at energy `h`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanRow {
    pub eps: f64,
    pub h: f64,
    /// `4 sqrt(h)`
    pub v_i: f64,
    pub outcome: ShotKind,
    pub kappa1: Option<f64>,
    pub kappa2: Option<f64>,
    pub v_f: Option<f64>,
    /// Output velocity predicted by the square-root law.
    pub v_f_pred: f64,
}

/// Shoots once from `W^u` at energy `h` and records the exit energies.
pub fn measure_vf<R: Real>(h: f64, p: &Params<R>, cfg: &IntegratorConfig) -> Result<ScanRow> {
    measure_vf_with(h, p, cfg, &predictors(&p.to_f64()))
}

fn measure_vf_with<R: Real>(h: f64, p: &Params<R>, cfg: &IntegratorConfig, pred: &PredictorSet) -> Result<ScanRow> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("measure_vf needs h > 0, got {h}")));
    }
    let s0 = unstable_initial(h, p, cfg)?;
    let out = shoot(&s0, p, cfg)?;
    let v_i = 4.0 * h.sqrt();
    Ok(ScanRow {
        eps: p.eps.to_f64(),
        h,
        v_i,
        outcome: out.kind,
        kappa1: out.kappa1(),
        kappa2: out.kappa2(),
        v_f: out.v_f(),
        v_f_pred: pred.vf(v_i),
    })
}

/// Escape threshold in `h` from direct shooting: bisection on whether the
/// shot from `W^u` escapes.
pub fn escape_threshold<R: Real>(p: &Params<R>, cfg: &IntegratorConfig, guess: f64, rel_width: f64) -> Result<RootReport> {
    let escapes = |h: f64| -> Result<bool> {
        let row = measure_vf(h, p, cfg)?;
        match row.outcome {
            ShotKind::Escaped => Ok(true),
            ShotKind::TurnedBack => Ok(false),
            ShotKind::Timeout => Err(Error::Accuracy {
                what: format!("shot at h = {h:e} timed out near the escape threshold"),
                target: cfg.max_time,
                achieved: cfg.max_time,
            }),
        }
    };
    let (mut lo, mut hi) = (guess * 0.9, guess * 1.1);
    let mut probes = Vec::new();
    for _ in 0..8 {
        let e = escapes(lo)?;
        probes.push(Probe { h: lo, value: if e { 1.0 } else { -1.0 } });
        if !e {
            break;
        }
        lo *= 0.5;
    }
    for _ in 0..8 {
        let e = escapes(hi)?;
        probes.push(Probe { h: hi, value: if e { 1.0 } else { -1.0 } });
        if e {
            break;
        }
        hi *= 2.0;
    }
    if probes.iter().all(|p| p.value > 0.0) || probes.iter().all(|p| p.value < 0.0) {
        return Err(Error::Bracketing {
            what: "escape threshold".into(),
            lo,
            hi,
            ind_lo: "escaped".into(),
            ind_hi: "turned back".into(),
        });
    }
    while (hi - lo) / (0.5 * (lo + hi)) > rel_width {
        let mid = 0.5 * (lo + hi);
        let e = escapes(mid)?;
        probes.push(Probe { h: mid, value: if e { 1.0 } else { -1.0 } });
        if e {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(RootReport {
        h: 0.5 * (lo + hi),
        lo,
        hi,
        probes,
    })
}

/// Fits of the output velocity law near the critical velocity.
#[derive(Clone, Debug, PartialEq)]
pub struct VfLaw {
    /// Critical velocity used as origin, `4 sqrt(h_c)` from the escape
    /// threshold.
    pub v_c: f64,
    pub threshold: RootReport,
    /// `log v_f` against `log(v_i - v_c)`.
    pub log_fit: FitReport,
    /// `v_f^2` against `v_i - v_c`.
    pub square_fit: FitReport,
    /// `square_fit.slope / (2 v_c)`.
    pub c_eps: f64,
    pub rows: Vec<ScanRow>,
}

/// Samples `v_i = v_c (1 + q)` with `q` geometric on `[1e-2, spread]` and
/// fits the square-root law. `h_c` seeds the escape-threshold bisection
/// that fixes `v_c`.
pub fn fit_vf_law<R: Real>(p: &Params<R>, cfg: &IntegratorConfig, h_c: f64, n_points: usize, spread: f64) -> Result<VfLaw> {
    if n_points < 4 {
        return Err(Error::Fit(format!("{n_points} points, at least 4 needed")));
    }
    if !(spread > 1e-2) {
        return Err(Error::Domain(format!("spread must exceed 1e-2, got {spread}")));
    }
    if p.coupling_scale.to_f64() == 0.0 {
        return Err(Error::Fit("no coupling: v_f = v_i and the law does not apply".into()));
    }
    // 1e-6 moves v_i - v_c by 5e-5 relative at the closest sample, far below
    // the fit uncertainty; tighter widths put the exit energy so close to
    // zero that turning back takes ~e^X_turn time units
    let threshold = escape_threshold(p, cfg, h_c, 1e-6)?;
    let v_c = 4.0 * threshold.h.sqrt();
    let pred = predictors(&p.to_f64());
    let qs: Vec<f64> = (0..n_points)
        .map(|k| 1e-2 * (spread / 1e-2).powf(k as f64 / (n_points - 1) as f64))
        .collect();
    let rows = qs
        .par_iter()
        .map(|q| {
            let v_i = v_c * (1.0 + q);
            measure_vf_with(v_i * v_i / 16.0, p, cfg, &pred)
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(r) = rows.iter().find(|r| r.outcome != ShotKind::Escaped) {
        return Err(Error::Inconsistent(format!(
            "shot at v_i = {:e} above v_c = {v_c:e} ended as {}",
            r.v_i, r.outcome
        )));
    }
    let dv: Vec<f64> = rows.iter().map(|r| r.v_i - v_c).collect();
    let vf: Vec<f64> = rows.iter().map(|r| r.v_f.unwrap()).collect();
    let log_fit = linear_fit(
        &dv.iter().map(|v| v.ln()).collect::<Vec<_>>(),
        &vf.iter().map(|v| v.ln()).collect::<Vec<_>>(),
    )?;
    let square_fit = linear_fit(&dv, &vf.iter().map(|v| v * v).collect::<Vec<_>>())?;
    Ok(VfLaw {
        v_c,
        threshold,
        log_fit,
        c_eps: square_fit.slope / (2.0 * v_c),
        square_fit,
        rows,
    })
}

/// Splitting measurement at one `eps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplittingRow {
    pub eps: f64,
    pub d_meas: f64,
    pub d_pred: f64,
    pub melnikov_abs: f64,
    /// `|B^u - B^s|`
    pub b_mom_mismatch: f64,
}

impl SplittingRow {
    pub fn ratio(&self) -> f64 {
        self.d_meas / self.d_pred
    }
}

pub fn measure_splitting<R: Real>(p: &Params<R>, cfg: &IntegratorConfig) -> Result<SplittingRow> {
    let pf = p.to_f64();
    let s = splitting(p, cfg)?;
    Ok(SplittingRow {
        eps: pf.eps,
        d_meas: s.distance,
        d_pred: predictors(&pf).d0,
        melnikov_abs: crate::melnikov::melnikov_residue(&pf).c1.norm(),
        b_mom_mismatch: s.b_mom_mismatch,
    })
}

/// Exponential-rate regression of the splitting over an `eps` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    /// `log d - log(2 pi eps^(3/4)/sqrt(Omega))` against `sqrt(2/eps)`.
    pub fit: FitReport,
    pub rows: Vec<SplittingRow>,
    /// Slopes with each grid point left out in turn.
    pub leave_one_out: Vec<f64>,
}

/// Measures the splitting on each grid value and regresses its logarithm.
pub fn fit_exponential_rate(eps_grid: &[f64], cfg: &IntegratorConfig) -> Result<RateReport> {
    if eps_grid.len() < 4 {
        return Err(Error::Fit(format!("{} grid values, at least 4 needed", eps_grid.len())));
    }
    let rows = eps_grid
        .par_iter()
        .map(|&eps| measure_splitting(&Params::<f64>::new(eps)?, cfg))
        .collect::<Result<Vec<_>>>()?;
    rate_from_rows(rows)
}

/// Regression on already measured rows.
pub fn rate_from_rows(rows: Vec<SplittingRow>) -> Result<RateReport> {
    let xy: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| {
            let om = (1.0 - r.eps * r.eps / 4.0).sqrt();
            let pre = 2.0 * std::f64::consts::PI * r.eps.powf(0.75) / om.sqrt();
            ((2.0 / r.eps).sqrt(), r.d_meas.ln() - pre.ln())
        })
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) = xy.iter().copied().unzip();
    let fit = linear_fit(&x, &y)?;
    let leave_one_out = if x.len() > 4 {
        (0..x.len())
            .map(|i| {
                let xs: Vec<f64> = x.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect();
                let ys: Vec<f64> = y.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect();
                linear_fit(&xs, &ys).map(|f| f.slope)
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    Ok(RateReport {
        fit,
        rows,
        leave_one_out,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.17e}")).unwrap_or_default()
}

/// Writes `eps,h,v_i,outcome,kappa1,kappa2,v_f,v_f_pred` rows; exit
/// quantities are empty for shots that did not escape.
pub fn write_vout_csv<W: Write>(mut w: W, rows: &[ScanRow]) -> std::io::Result<()> {
    writeln!(w, "eps,h,v_i,outcome,kappa1,kappa2,v_f,v_f_pred")?;
    for r in rows {
        writeln!(
            w,
            "{},{:.17e},{:.17e},{},{},{},{},{:.17e}",
            r.eps,
            r.h,
            r.v_i,
            r.outcome,
            opt(r.kappa1),
            opt(r.kappa2),
            opt(r.v_f),
            r.v_f_pred
        )?;
    }
    Ok(())
}

/// Critical and tangency energies at one `eps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticalRow {
    pub eps: f64,
    pub h_c_meas: f64,
    pub h_c_pred: f64,
    pub h_s_meas: f64,
    pub h_s_pred: f64,
}

/// Writes `eps,h_c_meas,h_c_pred,ratio,h_s_meas,h_s_pred` rows.
pub fn write_critical_csv<W: Write>(mut w: W, rows: &[CriticalRow]) -> std::io::Result<()> {
    writeln!(w, "eps,h_c_meas,h_c_pred,ratio,h_s_meas,h_s_pred")?;
    for r in rows {
        writeln!(
            w,
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            r.eps,
            r.h_c_meas,
            r.h_c_pred,
            r.h_c_meas / r.h_c_pred,
            r.h_s_meas,
            r.h_s_pred
        )?;
    }
    Ok(())
}

/// Writes `eps,d_meas,d_pred,ratio,melnikov_abs` rows.
pub fn write_splitting_csv<W: Write>(mut w: W, rows: &[SplittingRow]) -> std::io::Result<()> {
    writeln!(w, "eps,d_meas,d_pred,ratio,melnikov_abs")?;
    for r in rows {
        writeln!(
            w,
            "{},{:.17e},{:.17e},{:.17e},{:.17e}",
            r.eps,
            r.d_meas,
            r.d_pred,
            r.ratio(),
            r.melnikov_abs
        )?;
    }
    Ok(())
}
