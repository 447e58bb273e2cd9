//! Beam geometry and run configuration.
//!
//! The configuration file is flat TOML; every value is a plain number with
//! its unit stated in the comment emitted by [`RunConfig::serialize`].

use serde::Serialize;
use toml::{Table, Value};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("malformed configuration: {0}")]
    Malformed(String),
    #[error("missing configuration key `{0}`")]
    MissingKey(String),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        reason: reason.into(),
    }
}

/// Interface position `ell0` and beam length `ell`, with `0 < ell0 < ell`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeamGeometry {
    pub ell0: f64,
    pub ell: f64,
}

impl BeamGeometry {
    pub fn new(ell0: f64, ell: f64) -> Result<Self, ConfigError> {
        if !(ell.is_finite() && ell > 0.0) {
            return Err(invalid("ell", "beam length must be positive"));
        }
        if !(ell0.is_finite() && ell0 > 0.0 && ell0 < ell) {
            return Err(invalid("ell0", "interface outside beam"));
        }
        Ok(Self { ell0, ell })
    }

    pub fn left_length(&self) -> f64 {
        self.ell0
    }

    pub fn right_length(&self) -> f64 {
        self.ell - self.ell0
    }
}

impl Default for BeamGeometry {
    fn default() -> Self {
        Self {
            ell0: 0.5,
            ell: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub geometry: BeamGeometry,
    /// Collocation nodes on `(0, ell0)` for structural checks.
    pub n_left: usize,
    /// Collocation nodes on `(ell0, ell)`.
    pub n_right: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub n_lambda: usize,
    pub eig_residual_tol: f64,
    pub solve_residual_tol: f64,
    pub oracle_tol: f64,
    pub seed: u64,
    pub t_final: f64,
    pub dt: f64,
    /// Nodes per subdomain for the resolvent scan.
    pub n_scan: usize,
    /// Nodes per subdomain for the eigenvalue cross-validation.
    pub n_spectrum: usize,
    /// Nodes per subdomain of the grid the exact inverse works on.
    pub n_oracle: usize,
    /// Nodes per subdomain for time stepping. Kept coarse so that `dt`
    /// resolves the stiffest discrete modes.
    pub n_sim: usize,
    /// Fraction of the time horizon used for the decay fit.
    pub tail_fraction: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            geometry: BeamGeometry::default(),
            n_left: 48,
            n_right: 48,
            lambda_min: 10.0,
            lambda_max: 1e4,
            n_lambda: 40,
            eig_residual_tol: 1e-8,
            solve_residual_tol: 1e-9,
            oracle_tol: 1e-6,
            seed: 20_240_601,
            t_final: 20.0,
            dt: 1e-3,
            n_scan: 256,
            n_spectrum: 64,
            n_oracle: 96,
            n_sim: 12,
            tail_fraction: 0.5,
        }
    }
}

const REQUIRED: &[&str] = &[
    "ell0",
    "ell",
    "n_left",
    "n_right",
    "lambda_min",
    "lambda_max",
    "n_lambda",
    "eig_residual_tol",
    "solve_residual_tol",
    "oracle_tol",
    "seed",
    "t_final",
    "dt",
];

const OPTIONAL: &[&str] = &["n_scan", "n_spectrum", "n_oracle", "n_sim", "tail_fraction"];

fn get_f64(t: &Table, key: &str) -> Result<f64, ConfigError> {
    match t.get(key) {
        Some(Value::Float(v)) => Ok(*v),
        Some(Value::Integer(v)) => Ok(*v as f64),
        Some(_) => Err(invalid(key, "expected a number")),
        None => Err(ConfigError::MissingKey(key.to_string())),
    }
}

fn get_count(t: &Table, key: &str) -> Result<usize, ConfigError> {
    match t.get(key) {
        Some(Value::Integer(v)) if *v >= 0 => Ok(*v as usize),
        Some(_) => Err(invalid(key, "expected a nonnegative integer")),
        None => Err(ConfigError::MissingKey(key.to_string())),
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        BeamGeometry::new(self.geometry.ell0, self.geometry.ell)?;
        for (key, n) in [
            ("n_left", self.n_left),
            ("n_right", self.n_right),
            ("n_scan", self.n_scan),
            ("n_spectrum", self.n_spectrum),
            ("n_oracle", self.n_oracle),
            ("n_sim", self.n_sim),
        ] {
            if n < 8 {
                return Err(invalid(key, "at least 8 collocation nodes required"));
            }
        }
        if !(self.lambda_min > 0.0) {
            return Err(invalid("lambda_min", "must be positive"));
        }
        if !(self.lambda_min < self.lambda_max) {
            return Err(invalid("lambda_max", "must exceed lambda_min"));
        }
        if self.n_lambda < 8 {
            return Err(invalid("n_lambda", "at least 8 scan points required"));
        }
        for (key, v) in [
            ("eig_residual_tol", self.eig_residual_tol),
            ("solve_residual_tol", self.solve_residual_tol),
            ("oracle_tol", self.oracle_tol),
        ] {
            if !(v >= 0.0) {
                return Err(invalid(key, "must be nonnegative"));
            }
        }
        if !(self.t_final > 0.0) {
            return Err(invalid("t_final", "must be positive"));
        }
        if !(self.dt > 0.0) {
            return Err(invalid("dt", "must be positive"));
        }
        if !(self.dt < self.t_final) {
            return Err(invalid("dt", "must be smaller than t_final"));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction < 1.0) {
            return Err(invalid("tail_fraction", "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Flat TOML with unit comments; [`parse_config`] inverts it exactly.
    pub fn serialize(&self) -> String {
        let g = &self.geometry;
        let mut s = String::new();
        let mut line = |k: &str, v: String, c: &str| {
            s.push_str(&format!("{k} = {v}  # {c}\n"));
        };
        line(
            "ell0",
            format!("{:e}", g.ell0),
            "interface position [length]",
        );
        line("ell", format!("{:e}", g.ell), "beam length [length]");
        line(
            "n_left",
            self.n_left.to_string(),
            "nodes on (0, ell0) [count]",
        );
        line(
            "n_right",
            self.n_right.to_string(),
            "nodes on (ell0, ell) [count]",
        );
        line(
            "lambda_min",
            format!("{:e}", self.lambda_min),
            "scan start [1/time]",
        );
        line(
            "lambda_max",
            format!("{:e}", self.lambda_max),
            "scan end [1/time]",
        );
        line("n_lambda", self.n_lambda.to_string(), "scan points [count]");
        line(
            "eig_residual_tol",
            format!("{:e}", self.eig_residual_tol),
            "eigenpair residual bound [1]",
        );
        line(
            "solve_residual_tol",
            format!("{:e}", self.solve_residual_tol),
            "relative solve residual bound [1]",
        );
        line(
            "oracle_tol",
            format!("{:e}", self.oracle_tol),
            "relative oracle agreement [1]",
        );
        line("seed", self.seed.to_string(), "random seed");
        line(
            "t_final",
            format!("{:e}", self.t_final),
            "time horizon [time]",
        );
        line("dt", format!("{:e}", self.dt), "time step [time]");
        line(
            "n_scan",
            self.n_scan.to_string(),
            "nodes per subdomain for the resolvent scan [count]",
        );
        line(
            "n_spectrum",
            self.n_spectrum.to_string(),
            "nodes per subdomain for spectra [count]",
        );
        line(
            "n_oracle",
            self.n_oracle.to_string(),
            "nodes per subdomain of the exact-inverse grid [count]",
        );
        line(
            "n_sim",
            self.n_sim.to_string(),
            "nodes per subdomain for time stepping [count]",
        );
        line(
            "tail_fraction",
            format!("{:e}", self.tail_fraction),
            "tail of the horizon used for decay fits [1]",
        );
        s
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Malformed(e.message().to_string()))?;
    for key in table.keys() {
        if !REQUIRED.contains(&key.as_str()) && !OPTIONAL.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey(key.clone()));
        }
    }
    for key in REQUIRED {
        if !table.contains_key(*key) {
            return Err(ConfigError::MissingKey(key.to_string()));
        }
    }
    let d = RunConfig::default();
    let opt_count = |key: &str, dflt: usize| {
        if table.contains_key(key) {
            get_count(&table, key)
        } else {
            Ok(dflt)
        }
    };
    let seed = match table.get("seed") {
        Some(Value::Integer(v)) if *v >= 0 => *v as u64,
        _ => return Err(invalid("seed", "expected a nonnegative integer")),
    };
    let cfg = RunConfig {
        geometry: BeamGeometry::new(get_f64(&table, "ell0")?, get_f64(&table, "ell")?)?,
        n_left: get_count(&table, "n_left")?,
        n_right: get_count(&table, "n_right")?,
        lambda_min: get_f64(&table, "lambda_min")?,
        lambda_max: get_f64(&table, "lambda_max")?,
        n_lambda: get_count(&table, "n_lambda")?,
        eig_residual_tol: get_f64(&table, "eig_residual_tol")?,
        solve_residual_tol: get_f64(&table, "solve_residual_tol")?,
        oracle_tol: get_f64(&table, "oracle_tol")?,
        seed,
        t_final: get_f64(&table, "t_final")?,
        dt: get_f64(&table, "dt")?,
        n_scan: opt_count("n_scan", d.n_scan)?,
        n_spectrum: opt_count("n_spectrum", d.n_spectrum)?,
        n_oracle: opt_count("n_oracle", d.n_oracle)?,
        n_sim: opt_count("n_sim", d.n_sim)?,
        tail_fraction: if table.contains_key("tail_fraction") {
            get_f64(&table, "tail_fraction")?
        } else {
            d.tail_fraction
        },
    };
    cfg.validate()?;
    Ok(cfg)
}
