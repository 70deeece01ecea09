//! Run configuration for the command-line front end.
//!
//! Files are either flat `key = value` lines with `#` comments or the
//! `run.json` echo written by a previous run. Unknown keys are rejected.

use crate::criticality::SearchConfig;
use crate::error::{Error, Result};
use crate::integrator::IntegratorConfig;
use crate::real::Real;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F64,
    Dd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    Residue,
    Quadrature,
    Both,
}

/// Effective settings of one run. Field order fixes the `run.json` layout
/// and therefore the config hash.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub command: Option<String>,
    pub eps: Option<f64>,
    pub eps_grid: Option<Vec<f64>>,
    pub h: Option<f64>,
    pub h_grid: Option<Vec<f64>>,
    pub kappa1: f64,
    pub coupling_scale: f64,
    /// `None` selects the default for the chosen precision.
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub max_step: Option<f64>,
    pub max_time: f64,
    pub x_max: f64,
    pub n_tau: usize,
    pub refine: usize,
    pub rel_width: f64,
    pub points: usize,
    pub spread: f64,
    pub method: MethodChoice,
    pub tol: f64,
    pub stride: usize,
    pub out: PathBuf,
    pub format: Format,
    pub precision: Precision,
}

impl Default for RunConfig {
    fn default() -> Self {
        let ic = IntegratorConfig::default();
        let sc = SearchConfig::default();
        Self {
            command: None,
            eps: None,
            eps_grid: None,
            h: None,
            h_grid: None,
            kappa1: 0.0,
            coupling_scale: 1.0,
            rtol: None,
            atol: None,
            max_step: None,
            max_time: ic.max_time,
            x_max: ic.x_max,
            n_tau: sc.n_tau,
            refine: sc.refine,
            rel_width: sc.rel_width,
            points: 12,
            spread: 0.2,
            method: MethodChoice::Both,
            tol: 1e-13,
            stride: 100,
            out: PathBuf::from("out"),
            format: Format::Csv,
            precision: Precision::F64,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

/// Comma- or whitespace-separated list of numbers.
pub fn parse_grid(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

fn parse_choice<T: for<'de> Deserialize<'de>>(key: &str, v: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(v.trim().to_lowercase()))
        .map_err(|_| Error::Config(format!("{key}: invalid value {v:?}")))
}

impl RunConfig {
    /// Applies one `key = value` assignment. Keys accept `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let k = key.trim().replace('-', "_");
        let v = value.trim();
        match k.as_str() {
            "command" => self.command = Some(v.to_string()),
            "eps" => self.eps = Some(parse_num(&k, v)?),
            "eps_grid" => self.eps_grid = Some(parse_grid(&k, v)?),
            "h" => self.h = Some(parse_num(&k, v)?),
            "h_grid" => self.h_grid = Some(parse_grid(&k, v)?),
            "kappa1" => self.kappa1 = parse_num(&k, v)?,
            "coupling_scale" => self.coupling_scale = parse_num(&k, v)?,
            "rtol" => self.rtol = Some(parse_num(&k, v)?),
            "atol" => self.atol = Some(parse_num(&k, v)?),
            "max_step" => self.max_step = Some(parse_num(&k, v)?),
            "max_time" => self.max_time = parse_num(&k, v)?,
            "x_max" => self.x_max = parse_num(&k, v)?,
            "n_tau" => self.n_tau = parse_num(&k, v)?,
            "refine" => self.refine = parse_num(&k, v)?,
            "rel_width" => self.rel_width = parse_num(&k, v)?,
            "points" => self.points = parse_num(&k, v)?,
            "spread" => self.spread = parse_num(&k, v)?,
            "method" => self.method = parse_choice(&k, v)?,
            "tol" => self.tol = parse_num(&k, v)?,
            "stride" => self.stride = parse_num(&k, v)?,
            "out" => self.out = PathBuf::from(v),
            "format" => self.format = parse_choice(&k, v)?,
            "precision" => self.precision = parse_choice(&k, v)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Parses the flat `key = value` grammar on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got {raw:?}", i + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Loads a config file: JSON if it parses as a JSON object, the flat
    /// grammar otherwise.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        if text.trim_start().starts_with('{') {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        } else {
            let mut c = Self::default();
            c.apply_text(&text)?;
            Ok(c)
        }
    }

    /// The `eps` values to run: the grid if given, else the single value.
    pub fn eps_values(&self) -> Result<Vec<f64>> {
        match (&self.eps_grid, self.eps) {
            (Some(g), _) => Ok(g.clone()),
            (None, Some(e)) => Ok(vec![e]),
            (None, None) => Err(Error::Config("one of eps or eps_grid is required".into())),
        }
    }

    pub fn h_values(&self) -> Result<Vec<f64>> {
        match (&self.h_grid, self.h) {
            (Some(g), _) => Ok(g.clone()),
            (None, Some(h)) => Ok(vec![h]),
            (None, None) => Err(Error::Config("one of h or h_grid is required".into())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, g) in [("eps_grid", &self.eps_grid), ("h_grid", &self.h_grid)] {
            if let Some(g) = g {
                if g.is_empty() {
                    return Err(Error::Config(format!("{name} is empty")));
                }
                if g.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Config(format!("{name} must be strictly increasing: {g:?}")));
                }
            }
        }
        if !(0.0..=1.0).contains(&self.coupling_scale) {
            return Err(Error::Config(format!(
                "coupling_scale must lie in [0, 1], got {}",
                self.coupling_scale
            )));
        }
        if self.n_tau < 16 || self.refine < self.n_tau {
            return Err(Error::Config(format!(
                "need n_tau >= 16 and refine >= n_tau, got {} and {}",
                self.n_tau, self.refine
            )));
        }
        if !(self.rel_width > 0.0 && self.rel_width < 1.0) {
            return Err(Error::Config(format!("rel_width must lie in (0, 1), got {}", self.rel_width)));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be positive".into()));
        }
        Ok(())
    }

    /// Integrator settings for scalar type `R`; unset tolerances follow
    /// [`IntegratorConfig::for_precision`].
    pub fn integrator<R: Real>(&self) -> IntegratorConfig {
        let base = IntegratorConfig::for_precision::<R>();
        IntegratorConfig {
            rtol: self.rtol.unwrap_or(base.rtol),
            atol: self.atol.unwrap_or(base.atol),
            max_step: self.max_step,
            max_time: self.max_time,
            x_max: self.x_max,
            ..base
        }
    }

    pub fn search(&self) -> SearchConfig {
        SearchConfig {
            n_tau: self.n_tau,
            refine: self.refine,
            rel_width: self.rel_width,
            ..SearchConfig::default()
        }
    }

    /// Canonical JSON echo of the configuration.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    /// Hex SHA-256 of [`RunConfig::to_json`].
    pub fn hash(&self) -> String {
        let d = Sha256::digest(self.to_json().as_bytes());
        d.iter().map(|b| format!("{b:02x}")).collect()
    }
}
