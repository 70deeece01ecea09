//! Acceptance checks, one `criterion N: PASS|FAIL` line each.
//!
//! Run all with `cargo test --test acceptance`, or a subset by number:
//! `cargo test --test acceptance -- 1 2 3`. The geometric searches make the
//! full run take tens of minutes on one core.

use kinklab::closedforms::{predictors, torus_point, z_on_level};
use kinklab::criticality::{
    curve_pair, find_hc, find_hs, fit_vf_law, hc_probe, measure_splitting, rate_from_rows, CriticalReport,
    SearchConfig, SplittingRow, TangencyReport,
};
use kinklab::integrator::{shoot, shoot_observed, IntegratorConfig, ShotKind};
use kinklab::manifolds::{
    disk_radius_sq, stable_curve, stable_point, unstable_initial, unstable_point, SectionCurve, SectionPoint,
};
use kinklab::melnikov::{melnikov_quadrature, melnikov_residue};
use kinklab::model::{make_params, Params, PhaseState};
use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

type Res<T> = Result<T, Box<dyn std::error::Error>>;

/// Results shared between criteria.
#[derive(Default)]
struct Shared {
    hc: BTreeMap<String, CriticalReport>,
    hs: Option<TangencyReport>,
    points: Vec<(SectionPoint, Params)>,
    curves: Vec<(SectionCurve, Params)>,
}

fn note(msg: String) {
    println!("    {msg}");
}

/// Searches use the loosest admissible step cap, `omega * max_step = 1`.
fn search_cfg(p: &Params) -> IntegratorConfig {
    IntegratorConfig {
        max_step: Some(1.0 / p.omega),
        ..IntegratorConfig::default()
    }
}

fn search_sc() -> SearchConfig {
    SearchConfig {
        n_tau: 16,
        refine: 2048,
        rel_width: 1e-3,
        monotone_points: 3,
        ..SearchConfig::default()
    }
}

fn key(eps: f64) -> String {
    format!("{eps}")
}

fn criterion_1(_: &mut Shared) -> Res<bool> {
    let t0 = Instant::now();
    let p = make_params(0.1)?.with_coupling_scale(0.0);
    // nothing depends on x_max without coupling; 9 clears sqrt(2) omega + 4
    // and keeps the zero-energy traversal time (~e^x_max) short
    let cfg = IntegratorConfig::default().with_x_max(9.0);
    let h = 0.01;
    let u = unstable_point(h, &p, &cfg)?;
    let s = stable_point(h, &p, &cfg, false)?;
    let pt_err = u.b.hypot(u.b_mom).max(s.b.hypot(s.b_mom));
    let r = (2.0 * h / p.omega).sqrt();
    let curve = stable_curve(0.0, h, &p, &cfg, 16)?;
    let circ_err = curve
        .samples
        .iter()
        .map(|c| (c.b.hypot(c.b_mom) - r).abs())
        .fold(0.0, f64::max);

    // half the energy in each degree of freedom, through the defect
    let x0 = -cfg.x_max;
    let (b, bm) = torus_point(0.7, h / 2.0, &p)?;
    let s0 = PhaseState::new(x0, z_on_level(x0, h / 2.0), b, bm);
    let e0 = s0.energy_split(&p);
    let (mut dp, mut dosc) = (0.0f64, 0.0f64);
    let shot = shoot_observed(&s0, &p, &cfg, &mut |_, s| {
        let e = s.energy_split(&p);
        dp = dp.max((e.h_p - e0.h_p).abs());
        dosc = dosc.max((e.h_osc - e0.h_osc).abs());
    })?;
    let secs = t0.elapsed().as_secs_f64();
    note(format!("|P^u|, |P^s| <= {pt_err:.2e} (want 1e-10)"));
    note(format!("circle radius error {circ_err:.2e} (want 1e-9) over {} phases", curve.len()));
    note(format!(
        "shot {} over T = {:.3e}: |dH_p| {dp:.2e}, |dH_osc| {dosc:.2e} (want 1e-10)",
        shot.kind, shot.t_final
    ));
    note(format!("runtime {secs:.2} s (want < 5 s)"));
    Ok(pt_err <= 1e-10
        && circ_err <= 1e-9
        && shot.kind == ShotKind::Escaped
        && dp <= 1e-10
        && dosc <= 1e-10
        && secs < 5.0)
}

fn criterion_2(_: &mut Shared) -> Res<bool> {
    let mut ok = true;
    for eps in [0.05, 0.1, 0.2] {
        let p = make_params(eps)?;
        let t0 = Instant::now();
        let q = melnikov_quadrature(&p, 1e-13)?;
        let secs = t0.elapsed().as_secs_f64();
        let r = melnikov_residue(&p);
        let rel = (q.c1 - r.c1).norm() / r.c1.norm();
        let imag = q.c1.re.abs() <= q.error_estimate;
        note(format!(
            "eps {eps}: rel diff {rel:.2e} (want 1e-8), Re c1 {:.2e} vs err est {:.2e}, {secs:.3} s",
            q.c1.re, q.error_estimate
        ));
        ok &= rel <= 1e-8 && imag && secs < 1.0;
    }
    Ok(ok)
}

fn criterion_3(sh: &mut Shared) -> Res<bool> {
    let t0 = Instant::now();
    let cfg = IntegratorConfig::default();
    let mut rows: BTreeMap<String, SplittingRow> = BTreeMap::new();
    for eps in [0.05, 0.07, 0.08, 0.1, 0.15, 0.2] {
        let p = make_params(eps)?;
        rows.insert(key(eps), measure_splitting(&p, &cfg)?);
        sh.points.push((unstable_point(0.0, &p, &cfg)?, p));
    }
    let mut ok = true;
    for eps in [0.08, 0.1, 0.15, 0.2] {
        let r = rows[&key(eps)];
        let inside = (r.ratio() - 1.0).abs() <= 3.0 * eps;
        note(format!("eps {eps}: d/d0 = {:.6} (band 1 +- {:.2})", r.ratio(), 3.0 * eps));
        ok &= inside;
    }
    let worst_b = rows.values().map(|r| r.b_mom_mismatch).fold(0.0, f64::max);
    note(format!("max |B^u - B^s| = {worst_b:.2e} (want 1e-9)"));
    ok &= worst_b <= 1e-9;
    let grid = [0.05, 0.07, 0.1, 0.15, 0.2];
    let rate = rate_from_rows(grid.iter().map(|e| rows[&key(*e)]).collect())?;
    let omega_bar = grid.iter().map(|e| (1.0 - e * e / 4.0).sqrt()).sum::<f64>() / grid.len() as f64;
    let rel = (rate.fit.slope + omega_bar).abs() / omega_bar;
    note(format!(
        "rate slope {:.5} +- {:.1e} vs -Omega = {:.5}: off by {:.2}% (want 5%)",
        rate.fit.slope,
        rate.fit.slope_se,
        -omega_bar,
        100.0 * rel
    ));
    ok &= rel <= 0.05;
    note(format!("runtime {:.1} s", t0.elapsed().as_secs_f64()));
    Ok(ok)
}

fn criterion_4(sh: &mut Shared) -> Res<bool> {
    let sc = search_sc();
    let mut dev = Vec::new();
    let mut ok = true;
    for eps in [0.2, 0.15, 0.1, 0.07, 0.05] {
        let t0 = Instant::now();
        let p = make_params(eps)?;
        let rep = find_hc(&p, &search_cfg(&p), &sc, None)?;
        let ratio = rep.root.h / predictors(&p).hc;
        note(format!(
            "eps {eps}: h_c = {:.6e} in [{:.6e}, {:.6e}], ratio {ratio:.5}, {} probes, {:.0} s",
            rep.root.h,
            rep.root.lo,
            rep.root.hi,
            rep.root.probes.len(),
            t0.elapsed().as_secs_f64()
        ));
        if eps == 0.1 {
            ok &= (0.5..=1.5).contains(&ratio);
        }
        dev.push((eps, (ratio - 1.0).abs()));
        sh.hc.insert(key(eps), rep);
    }
    let decreasing = dev.windows(2).all(|w| w[1].1 < w[0].1);
    note(format!("|ratio - 1| along eps: {:?}", dev.iter().map(|d| format!("{:.2e}", d.1)).collect::<Vec<_>>()));
    ok &= decreasing;

    let t0 = Instant::now();
    let p = make_params(0.1)?;
    let hs = find_hs(&p, &search_cfg(&p), &sc, None)?;
    let q = sh.hc[&key(0.1)].root.h / hs.root.h;
    note(format!(
        "eps 0.1: h_s = {:.6e}, h_c/h_s = {q:.4} (want [3.4, 4.6]), {:.0} s",
        hs.root.h,
        t0.elapsed().as_secs_f64()
    ));
    ok &= (3.4..=4.6).contains(&q);
    sh.hs = Some(hs);
    Ok(ok)
}

fn criterion_5(sh: &mut Shared) -> Res<bool> {
    let t0 = Instant::now();
    let eps = 0.1;
    let p = make_params(eps)?;
    let cfg = IntegratorConfig::default();
    let seed = sh.hc.get(&key(eps)).map(|r| r.root.h).unwrap_or(predictors(&p).hc);
    let law = fit_vf_law(&p, &cfg, seed, 12, 0.2)?;
    let h_dyn = law.threshold.h;
    note(format!(
        "dynamical threshold h = {h_dyn:.8e}, geometric seed {seed:.8e} (rel diff {:.1e})",
        (h_dyn - seed).abs() / h_dyn
    ));
    let slope = law.log_fit.slope;
    note(format!("log-log slope {slope:.4} +- {:.1e} (want 0.50 +- 0.03)", law.log_fit.slope_se));
    note(format!("c_eps {:.4} (band 1 +- {:.2})", law.c_eps, 3.0 * eps));
    let escaped = law.rows.iter().all(|r| r.outcome == ShotKind::Escaped);
    let vf: Vec<f64> = law.rows.iter().map(|r| r.v_f.unwrap_or(0.0)).collect();
    let increasing = vf.windows(2).all(|w| w[1] > w[0]);
    // just below threshold nothing escapes
    let below = shoot(&unstable_initial(law.threshold.lo, &p, &cfg)?, &p, &cfg)?;
    note(format!(
        "v_f from {:.3e} (q = 1e-2) to {:.3e} (q = 0.2), increasing: {increasing}; below threshold: {}",
        vf[0],
        vf[vf.len() - 1],
        below.kind
    ));
    note(format!("runtime {:.1} s", t0.elapsed().as_secs_f64()));
    Ok((0.47..=0.53).contains(&slope)
        && (law.c_eps - 1.0).abs() <= 3.0 * eps
        && escaped
        && increasing
        && below.kind == ShotKind::TurnedBack)
}

fn criterion_6(sh: &mut Shared) -> Res<bool> {
    let t0 = Instant::now();
    let p = make_params(0.1)?;
    let cfg = search_cfg(&p);
    let sc = search_sc();
    let hs = match &sh.hs {
        Some(h) => h.clone(),
        None => find_hs(&p, &cfg, &sc, None)?,
    };
    let ratio = hs.root.h / predictors(&p).hs;
    let pair = curve_pair(2.0 * hs.root.h, &p, &cfg, &sc)?;
    let n = pair.crossings();
    note(format!(
        "h_s = {:.6e}, ratio {ratio:.5} (want [0.5, 1.5]); reflection mismatch {:.1e}",
        hs.root.h, hs.reflection_mismatch
    ));
    note(format!("{n} crossings at 2 h_s (want >= 2), {:.0} s", t0.elapsed().as_secs_f64()));
    sh.curves.push((pair.stable, p));
    Ok((0.5..=1.5).contains(&ratio) && n >= 2)
}

fn run_cli(args: &[&str], out: &Path, threads: &str) -> Res<BTreeMap<String, Vec<u8>>> {
    let o = Command::new(env!("CARGO_BIN_EXE_kinklab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("KINKLAB_THREADS", threads)
        .output()?;
    if !o.status.success() {
        return Err(format!("kinklab {args:?} failed: {}", String::from_utf8_lossy(&o.stderr)).into());
    }
    let mut files = BTreeMap::new();
    for e in std::fs::read_dir(out)? {
        let e = e?;
        files.insert(e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path())?);
    }
    Ok(files)
}

fn criterion_7(sh: &mut Shared) -> Res<bool> {
    let t0 = Instant::now();
    let mut ok = true;
    let eps = 0.1;
    let p = make_params(eps)?;
    let cfg = IntegratorConfig::default();

    // energy drift on every shot of a scan across the threshold
    let hc = sh.hc.get(&key(eps)).map(|r| r.root.h).unwrap_or(predictors(&p).hc);
    let mut worst = 0.0f64;
    for k in 0..16 {
        let h = hc * (0.5 + 0.1 * k as f64);
        let shot = shoot(&unstable_initial(h, &p, &cfg)?, &p, &cfg)?;
        worst = worst.max(shot.energy_drift / (10.0 * cfg.rtol * (1.0 + shot.t_final)));
    }
    note(format!("energy drift / (10 rtol (1 + T)) <= {worst:.3} over 16 shots"));
    ok &= worst <= 1.0;

    // X_max 12 -> 14
    let far = cfg.with_x_max(14.0);
    let mut shift = 0.0f64;
    for h in [0.0, hc] {
        let a = unstable_point(h, &p, &cfg)?;
        let b = unstable_point(h, &p, &far)?;
        shift = shift.max(a.dist(&b));
        sh.points.push((a, p));
        sh.points.push((b, p));
    }
    note(format!("|P^u(X_max 14) - P^u(X_max 12)| = {shift:.2e} (want 1e-8)"));
    ok &= shift <= 1e-8;
    if let Some(rep) = sh.hc.get(&key(eps)) {
        let sc = search_sc();
        let far_search = search_cfg(&p).with_x_max(14.0);
        let lo = hc_probe(rep.root.lo, &p, &far_search, &sc)?;
        let hi = hc_probe(rep.root.hi, &p, &far_search, &sc)?;
        // secant root of the X_max 14 indicator through the bracket ends
        let (flo, fhi) = (lo.relation.signed_distance, hi.relation.signed_distance);
        let width = rep.root.hi - rep.root.lo;
        let root14 = rep.root.lo - flo * width / (fhi - flo);
        let moved = (root14 - rep.root.h).abs();
        note(format!(
            "X_max 14 indicator at bracket ends: {flo:.2e} / {fhi:.2e}; h_c moves by {moved:.2e} (want < width {width:.2e})"
        ));
        ok &= fhi != flo && moved < width;
        sh.points.push((lo.point, p));
        sh.curves.push((lo.curve, p));
        sh.curves.push((hi.curve, p));
    } else {
        note("h_c bracket not available (criterion 4 not run); X_max check on h_c skipped".into());
        ok = false;
    }

    // disk bound on every section object produced in this run
    let mut n = 0;
    let mut bad = 0;
    for (pt, p) in &sh.points {
        n += 1;
        bad += usize::from(!pt.in_disk(p));
    }
    for (c, p) in &sh.curves {
        let r2 = disk_radius_sq(c.h(), p);
        for s in &c.samples {
            n += 1;
            bad += usize::from(s.b * s.b + s.b_mom * s.b_mom > r2);
        }
    }
    note(format!("{bad} of {n} section outputs outside the disk"));
    ok &= bad == 0 && n > 0;

    // reruns, also with a different pool size
    let dir = tempfile::tempdir()?;
    let mut same = true;
    for args in [
        &["splitting", "--eps-grid", "0.1,0.2"][..],
        &["simulate", "--eps", "0.1", "--h-grid", "2e-4,4e-4", "--stride", "10"][..],
        &["curves", "--eps", "0.2", "--h", "0.01", "--n-tau", "16", "--x-max", "9"][..],
    ] {
        // the output path is part of the echoed config, so every run uses the same one
        let out = dir.path().join("run");
        let mut runs = Vec::new();
        for threads in ["1", "1", "3"] {
            runs.push(run_cli(args, &out, threads)?);
            std::fs::remove_dir_all(&out)?;
        }
        let ident = runs[0] == runs[1] && runs[0] == runs[2];
        note(format!("{} rerun byte-identical: {ident} ({} files)", args[0], runs[0].len()));
        same &= ident;
    }
    ok &= same;
    note(format!("runtime {:.0} s", t0.elapsed().as_secs_f64()));
    Ok(ok)
}

fn main() {
    // cargo passes harness flags such as --nocapture; numbers select criteria
    let chosen: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let all: [(usize, &str, fn(&mut Shared) -> Res<bool>); 7] = [
        (1, "integrable-limit oracle", criterion_1),
        (2, "Melnikov dual evaluation", criterion_2),
        (3, "splitting distance and exponential rate", criterion_3),
        (4, "critical energy", criterion_4),
        (5, "output-velocity law", criterion_5),
        (6, "tangency energy", criterion_6),
        (7, "numerical hygiene", criterion_7),
    ];
    let mut shared = Shared::default();
    let mut failed = 0;
    for (n, name, f) in all {
        if !chosen.is_empty() && !chosen.contains(&n) {
            continue;
        }
        let t0 = Instant::now();
        let pass = match f(&mut shared) {
            Ok(p) => p,
            Err(e) => {
                note(format!("error: {e}"));
                false
            }
        };
        failed += usize::from(!pass);
        println!(
            "criterion {n}: {} {name} ({:.1} s)",
            if pass { "PASS" } else { "FAIL" },
            t0.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
