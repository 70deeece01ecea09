//! Command-line front end: argument parsing, output files and exit codes.
//!
//! Every command writes into `--out` (created if needed): one table per
//! result as `<name>.csv` (or `.json`), a `run.json` echo of the effective
//! configuration and a `plot_<command>.py` script. CSV tables start with a
//! `# config_hash=<sha256>` line. Files are written to a temporary name and
//! renamed, so an interrupted run never leaves a truncated table.

use crate::closedforms::predictors;
use crate::config::{Format, MethodChoice, Precision, RunConfig};
use crate::criticality::{
    find_hc, find_hs, fit_vf_law, measure_splitting, rate_from_rows, write_critical_csv, write_splitting_csv,
    write_vout_csv, CriticalRow, ScanRow,
};
use crate::dd::DoubleDouble;
use crate::error::{Error, Result};
use crate::integrator::{shoot_observed, ShotKind, TrajectoryRecorder};
use crate::manifolds::{
    point_curve_relation, stable_curve, stable_point, unstable_curve, unstable_initial, unstable_point,
    write_points_csv,
};
use crate::melnikov::{melnikov_quadrature, melnikov_residue, write_csv as write_melnikov_csv};
use crate::model::Params;
use crate::real::Real;
use clap::{Args, Parser, Subcommand};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(name = "kinklab", version, about = "Kink-defect reduced Hamiltonian toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Derived parameters and closed-form predictions.
    Params(Opts),
    /// Shoot from the unstable manifold at each energy and dump trajectories.
    Simulate(Opts),
    /// Splitting distance at h = 0, with a rate fit on grids of 4 or more.
    Splitting(Opts),
    /// Melnikov constant by residue and/or quadrature.
    Melnikov(Opts),
    /// Section traces of the manifolds at each energy.
    Curves(Opts),
    /// Critical and tangency energies.
    Critical(Opts),
    /// Output velocity scan above the critical energy.
    Vout(Opts),
}

impl Command {
    fn parts(&self) -> (&'static str, &Opts) {
        match self {
            Command::Params(o) => ("params", o),
            Command::Simulate(o) => ("simulate", o),
            Command::Splitting(o) => ("splitting", o),
            Command::Melnikov(o) => ("melnikov", o),
            Command::Curves(o) => ("curves", o),
            Command::Critical(o) => ("critical", o),
            Command::Vout(o) => ("vout", o),
        }
    }
}

/// Options shared by all commands. Flags override values from `--config`.
#[derive(Args, Debug, Default)]
pub struct Opts {
    /// Config file: flat `key = value` lines or a previous run.json.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub eps: Option<String>,
    /// Comma-separated, strictly increasing.
    #[arg(long)]
    pub eps_grid: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub h: Option<String>,
    #[arg(long)]
    pub h_grid: Option<String>,
    /// Pendulum energy of the manifold curves (curves command).
    #[arg(long, allow_hyphen_values = true)]
    pub kappa1: Option<String>,
    /// Multiplier on the coupling; 0 is the integrable limit.
    #[arg(long)]
    pub coupling_scale: Option<String>,
    #[arg(long)]
    pub rtol: Option<String>,
    #[arg(long)]
    pub atol: Option<String>,
    #[arg(long)]
    pub max_step: Option<String>,
    #[arg(long)]
    pub max_time: Option<String>,
    #[arg(long)]
    pub x_max: Option<String>,
    /// Phases integrated per manifold curve.
    #[arg(long)]
    pub n_tau: Option<String>,
    /// Phases after trigonometric resampling.
    #[arg(long)]
    pub refine: Option<String>,
    /// Relative bracket width of the energy searches.
    #[arg(long)]
    pub rel_width: Option<String>,
    /// Samples in the output velocity scan.
    #[arg(long)]
    pub points: Option<String>,
    /// Largest (v_i - v_c)/v_c in the output velocity scan.
    #[arg(long)]
    pub spread: Option<String>,
    /// residue, quadrature or both.
    #[arg(long)]
    pub method: Option<String>,
    /// Absolute tolerance of the Melnikov quadrature.
    #[arg(long)]
    pub tol: Option<String>,
    /// Keep every n-th step in trajectory dumps.
    #[arg(long)]
    pub stride: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    /// csv or json.
    #[arg(long)]
    pub format: Option<String>,
    /// f64 or dd (double-double).
    #[arg(long)]
    pub precision: Option<String>,
}

impl Opts {
    fn flags(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("eps", &self.eps),
            ("eps_grid", &self.eps_grid),
            ("h", &self.h),
            ("h_grid", &self.h_grid),
            ("kappa1", &self.kappa1),
            ("coupling_scale", &self.coupling_scale),
            ("rtol", &self.rtol),
            ("atol", &self.atol),
            ("max_step", &self.max_step),
            ("max_time", &self.max_time),
            ("x_max", &self.x_max),
            ("n_tau", &self.n_tau),
            ("refine", &self.refine),
            ("rel_width", &self.rel_width),
            ("points", &self.points),
            ("spread", &self.spread),
            ("method", &self.method),
            ("tol", &self.tol),
            ("stride", &self.stride),
            ("out", &self.out),
            ("format", &self.format),
            ("precision", &self.precision),
        ]
    }

    /// Effective configuration: defaults, then the file, then the flags.
    pub fn resolve(&self, command: &str) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        for (key, value) in self.flags() {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.command = Some(command.to_string());
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Process exit code for an error: 1 for usage and configuration problems,
/// 2 for numerical failures, 3 when a search could not bracket its root.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::Fit(_) => 1,
        Error::Bracketing { .. } => 3,
        _ => 2,
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn json_cell(s: &str) -> serde_json::Value {
    if s.is_empty() {
        return serde_json::Value::Null;
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => serde_json::json!(v),
        _ => serde_json::Value::String(s.to_string()),
    }
}

/// Converts a CSV table (header line first) to
/// `{"config_hash", "columns", "rows"}`.
pub fn csv_to_json(csv: &str, hash: &str) -> String {
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    let columns: Vec<&str> = lines.next().map(|h| h.split(',').collect()).unwrap_or_default();
    let rows: Vec<Vec<serde_json::Value>> = lines.map(|l| l.split(',').map(json_cell).collect()).collect();
    let doc = serde_json::json!({ "config_hash": hash, "columns": columns, "rows": rows });
    serde_json::to_string_pretty(&doc).expect("json") + "\n"
}

struct Output {
    dir: PathBuf,
    hash: String,
    format: Format,
    written: Vec<(String, String)>,
}

impl Output {
    fn new(cfg: &RunConfig) -> Result<Self> {
        std::fs::create_dir_all(&cfg.out)?;
        Ok(Self {
            dir: cfg.out.clone(),
            hash: cfg.hash(),
            format: cfg.format,
            written: Vec::new(),
        })
    }

    /// Writes a table produced by one of the library CSV writers.
    fn table<F>(&mut self, stem: &str, fill: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    {
        let mut body = Vec::new();
        fill(&mut body)?;
        let body = String::from_utf8(body).expect("writers emit utf-8");
        let (name, text) = match self.format {
            Format::Csv => (format!("{stem}.csv"), format!("# config_hash={}\n{body}", self.hash)),
            Format::Json => (format!("{stem}.json"), csv_to_json(&body, &self.hash)),
        };
        write_atomic(&self.dir.join(&name), text.as_bytes())?;
        let header = body.lines().next().unwrap_or("").to_string();
        self.written.push((name, header));
        Ok(())
    }

    fn finish(&self, cfg: &RunConfig, command: &str) -> Result<()> {
        write_atomic(&self.dir.join("run.json"), cfg.to_json().as_bytes())?;
        let csv: Vec<&(String, String)> = self.written.iter().filter(|(n, _)| n.ends_with(".csv")).collect();
        if !csv.is_empty() {
            write_atomic(
                &self.dir.join(format!("plot_{command}.py")),
                plot_script(&csv).as_bytes(),
            )?;
        }
        Ok(())
    }
}

/// A matplotlib script plotting every numeric column of each table against
/// its first column.
fn plot_script(tables: &[&(String, String)]) -> String {
    let mut s = String::from(
        "import csv\nimport matplotlib.pyplot as plt\n\n\
         def load(name):\n    with open(name) as f:\n        rows = [r for r in csv.reader(l for l in f if not l.startswith('#'))]\n    \
         return rows[0], rows[1:]\n\n\
         def num(v):\n    try:\n        return float(v)\n    except ValueError:\n        return None\n\n",
    );
    for (name, header) in tables {
        let cols: Vec<&str> = header.split(',').collect();
        s += &format!("head, rows = load({name:?})\nfig, ax = plt.subplots()\n");
        for (i, c) in cols.iter().enumerate().skip(1) {
            s += &format!(
                "pts = [(num(r[0]), num(r[{i}])) for r in rows if num(r[0]) is not None and num(r[{i}]) is not None]\n\
                 if pts:\n    ax.plot(*zip(*pts), '.-', label={c:?})\n"
            );
        }
        s += &format!(
            "ax.set_xlabel({:?})\nax.legend()\nfig.savefig({:?})\n\n",
            cols[0],
            name.replace(".csv", ".png")
        );
    }
    s
}

fn set_threads() {
    if let Some(n) = std::env::var("KINKLAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // fails only if a pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    set_threads();
    match run(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("kinklab: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(command: &Command) -> Result<()> {
    let (name, opts) = command.parts();
    let cfg = opts.resolve(name)?;
    let mut out = Output::new(&cfg)?;
    match name {
        "params" => cmd_params(&cfg, &mut out)?,
        "melnikov" => cmd_melnikov(&cfg, &mut out)?,
        "splitting" => cmd_splitting(&cfg, &mut out)?,
        "critical" => cmd_critical(&cfg, &mut out)?,
        "simulate" => dispatch(&cfg, &mut out, Kind::Simulate)?,
        "curves" => dispatch(&cfg, &mut out, Kind::Curves)?,
        "vout" => dispatch(&cfg, &mut out, Kind::Vout)?,
        _ => unreachable!("clap restricts commands"),
    }
    out.finish(&cfg, name)
}

#[derive(Clone, Copy)]
enum Kind {
    Simulate,
    Curves,
    Vout,
}

fn dispatch(cfg: &RunConfig, out: &mut Output, kind: Kind) -> Result<()> {
    match cfg.precision {
        Precision::F64 => run_generic::<f64>(cfg, out, kind),
        Precision::Dd => run_generic::<DoubleDouble>(cfg, out, kind),
    }
}

fn run_generic<R: Real>(cfg: &RunConfig, out: &mut Output, kind: Kind) -> Result<()> {
    match kind {
        Kind::Simulate => cmd_simulate::<R>(cfg, out),
        Kind::Curves => cmd_curves::<R>(cfg, out),
        Kind::Vout => cmd_vout::<R>(cfg, out),
    }
}

fn params<R: Real>(eps: f64, cfg: &RunConfig) -> Result<Params<R>> {
    Ok(Params::<R>::new(eps)?.with_coupling_scale(cfg.coupling_scale))
}

fn single_eps(cfg: &RunConfig) -> Result<f64> {
    match cfg.eps_values()?.as_slice() {
        [e] => Ok(*e),
        g => Err(Error::Config(format!("this command takes a single eps, got {} values", g.len()))),
    }
}

fn warn_x_max(cfg: &RunConfig, p: &Params) {
    if let Some(w) = cfg.integrator::<f64>().x_max_warning(p.omega) {
        eprintln!("warning: {w}");
    }
}

fn cmd_params(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let rows = cfg
        .eps_values()?
        .into_iter()
        .map(|e| params::<f64>(e, cfg))
        .collect::<Result<Vec<_>>>()?;
    for p in &rows {
        let pr = predictors(p);
        println!(
            "eps={} delta={:.6e} Omega={:.9} omega={:.9} d0={:.6e} h_s={:.6e} h_c={:.6e} v_c={:.6e}",
            p.eps, p.delta, p.big_omega, p.omega, pr.d0, pr.hs, pr.hc, pr.vc
        );
    }
    out.table("params", |w| {
        writeln!(w, "eps,delta,Omega,omega,coupling,d0,h_s,h_c,v_c")?;
        for p in &rows {
            let pr = predictors(p);
            writeln!(
                w,
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                p.eps,
                p.delta,
                p.big_omega,
                p.omega,
                p.coupling(),
                pr.d0,
                pr.hs,
                pr.hc,
                pr.vc
            )?;
        }
        Ok(())
    })
}

fn cmd_melnikov(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let mut rows = Vec::new();
    for eps in cfg.eps_values()? {
        let p = params::<f64>(eps, cfg)?;
        let res = melnikov_residue(&p);
        let quad = match cfg.method {
            MethodChoice::Residue => None,
            _ => Some(melnikov_quadrature(&p, cfg.tol)?),
        };
        if cfg.method != MethodChoice::Quadrature {
            println!("eps={eps} residue c1={:.15e}i", res.c1.im);
            rows.push((eps, res));
        }
        if let Some(q) = quad {
            let rel = (q.c1 - res.c1).norm() / res.c1.norm();
            println!(
                "eps={eps} quadrature c1={:.3e}{:+.15e}i err_est={:.2e} rel_diff={rel:.2e}",
                q.c1.re, q.c1.im, q.error_estimate
            );
            rows.push((eps, q));
        }
    }
    out.table("melnikov", |w| write_melnikov_csv(w, &rows))
}

fn cmd_splitting(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let ic = cfg.integrator::<f64>();
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for eps in cfg.eps_values()? {
        let p = params::<f64>(eps, cfg)?;
        warn_x_max(cfg, &p);
        let row = match cfg.precision {
            Precision::F64 => measure_splitting(&p, &ic)?,
            Precision::Dd => {
                let pd = params::<DoubleDouble>(eps, cfg)?;
                measure_splitting(&pd, &cfg.integrator::<DoubleDouble>())?
            }
        };
        println!(
            "eps={eps} d={:.9e} d0={:.9e} ratio={:.6} |B^u-B^s|={:.1e}",
            row.d_meas,
            row.d_pred,
            row.ratio(),
            row.b_mom_mismatch
        );
        rows.push(row);
        points.push(unstable_point(0.0, &p, &ic)?);
        points.push(stable_point(0.0, &p, &ic, false)?);
    }
    out.table("splitting", |w| write_splitting_csv(w, &rows))?;
    out.table("points", |w| write_points_csv(w, &points))?;
    if rows.len() >= 4 {
        let rate = rate_from_rows(rows)?;
        println!(
            "rate: slope={:.6} +- {:.2e} intercept={:.6}",
            rate.fit.slope, rate.fit.slope_se, rate.fit.intercept
        );
        out.table("rate", |w| {
            writeln!(w, "slope,slope_se,intercept,intercept_se,residual_norm,n")?;
            let f = rate.fit;
            writeln!(
                w,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}",
                f.slope, f.slope_se, f.intercept, f.intercept_se, f.residual_norm, f.n
            )
        })?;
    }
    Ok(())
}

fn cmd_critical(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let ic = cfg.integrator::<f64>();
    let sc = cfg.search();
    let mut rows = Vec::new();
    for eps in cfg.eps_values()? {
        let p = params::<f64>(eps, cfg)?;
        warn_x_max(cfg, &p);
        let pr = predictors(&p);
        let hc = find_hc(&p, &ic, &sc, None)?;
        let hs = find_hs(&p, &ic, &sc, None)?;
        let row = CriticalRow {
            eps,
            h_c_meas: hc.root.h,
            h_c_pred: pr.hc,
            h_s_meas: hs.root.h,
            h_s_pred: pr.hs,
        };
        println!(
            "eps={eps} h_c={:.6e} (pred {:.6e}, ratio {:.4}) h_s={:.6e} (pred {:.6e}, ratio {:.4}) h_c/h_s={:.4}",
            row.h_c_meas,
            row.h_c_pred,
            row.h_c_meas / row.h_c_pred,
            row.h_s_meas,
            row.h_s_pred,
            row.h_s_meas / row.h_s_pred,
            row.h_c_meas / row.h_s_meas
        );
        rows.push(row);
    }
    out.table("critical", |w| write_critical_csv(w, &rows))
}

fn cmd_simulate<R: Real>(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let eps = single_eps(cfg)?;
    let p = params::<R>(eps, cfg)?;
    warn_x_max(cfg, &p.to_f64());
    let ic = cfg.integrator::<R>();
    let pred = predictors(&p.to_f64());
    let mut rows = Vec::new();
    for (k, h) in cfg.h_values()?.into_iter().enumerate() {
        let s0 = unstable_initial(h, &p, &ic)?;
        let mut rec = TrajectoryRecorder::new(cfg.stride);
        let shot = shoot_observed(&s0, &p, &ic, &mut |t, s| rec.observe(t, s, &p))?;
        let v_i = 4.0 * h.sqrt();
        println!(
            "h={h:e} outcome={} t={:.6e} steps={} crossings={} v_f={} drift={:.1e}",
            shot.kind,
            shot.t_final,
            shot.steps,
            shot.crossings.len(),
            shot.v_f().map(|v| format!("{v:.9e}")).unwrap_or_else(|| "-".into()),
            shot.energy_drift
        );
        out.table(&format!("trajectory_{k}"), |w| rec.write_csv(w))?;
        rows.push(ScanRow {
            eps,
            h,
            v_i,
            outcome: shot.kind,
            kappa1: shot.kappa1(),
            kappa2: shot.kappa2(),
            v_f: shot.v_f(),
            v_f_pred: pred.vf(v_i),
        });
    }
    out.table("shots", |w| write_vout_csv(w, &rows))
}

fn cmd_curves<R: Real>(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let eps = single_eps(cfg)?;
    let p = params::<R>(eps, cfg)?;
    let pf = p.to_f64();
    warn_x_max(cfg, &pf);
    let ic = cfg.integrator::<R>();
    let mut points = Vec::new();
    for (k, h) in cfg.h_values()?.into_iter().enumerate() {
        let kappa2 = h - cfg.kappa1;
        if !(kappa2 > 0.0) {
            return Err(Error::Domain(format!("need h > kappa1, got h = {h}, kappa1 = {}", cfg.kappa1)));
        }
        let (s, u) = rayon::join(
            || stable_curve(cfg.kappa1, kappa2, &p, &ic, cfg.n_tau),
            || unstable_curve(cfg.kappa1, kappa2, &p, &ic, cfg.n_tau),
        );
        let (s, u) = (s?, u?);
        let pu = unstable_point(h, &p, &ic)?;
        let rel = point_curve_relation([pu.b, pu.b_mom], &s.refined(cfg.refine))?;
        println!(
            "h={h:e} samples={} P^u signed_distance={:.6e} inside={}",
            s.len(),
            rel.signed_distance,
            rel.inside
        );
        out.table(&format!("curve_stable_{k}"), |w| s.write_csv(w))?;
        out.table(&format!("curve_unstable_{k}"), |w| u.write_csv(w))?;
        points.push(pu);
        points.push(stable_point(h, &p, &ic, false)?);
    }
    out.table("points", |w| write_points_csv(w, &points))
}

fn cmd_vout<R: Real>(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let eps = single_eps(cfg)?;
    let p = params::<R>(eps, cfg)?;
    let pf = p.to_f64();
    warn_x_max(cfg, &pf);
    let ic = cfg.integrator::<R>();
    let seed = cfg.h.unwrap_or_else(|| predictors(&pf).hc);
    let law = fit_vf_law(&p, &ic, seed, cfg.points, cfg.spread)?;
    for r in &law.rows {
        println!(
            "v_i={:.9e} outcome={} v_f={} pred={:.9e}",
            r.v_i,
            r.outcome,
            r.v_f.map(|v| format!("{v:.9e}")).unwrap_or_else(|| "-".into()),
            r.v_f_pred
        );
    }
    // v_f must grow with v_i above threshold
    let vf: Vec<f64> = law.rows.iter().map(|r| r.v_f.unwrap_or(0.0)).collect();
    if law.rows.iter().any(|r| r.outcome != ShotKind::Escaped) || vf.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Inconsistent(format!(
            "v_f is not increasing above v_c = {:.9e}: {vf:?}",
            law.v_c
        )));
    }
    println!(
        "v_c={:.9e} log-log slope={:.4} +- {:.1e} c_eps={:.4}",
        law.v_c, law.log_fit.slope, law.log_fit.slope_se, law.c_eps
    );
    out.table("vout", |w| write_vout_csv(w, &law.rows))?;
    out.table("vout_fit", |w| {
        writeln!(w, "v_c,log_slope,log_slope_se,square_slope,c_eps")?;
        writeln!(
            w,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            law.v_c, law.log_fit.slope, law.log_fit.slope_se, law.square_fit.slope, law.c_eps
        )
    })
}
