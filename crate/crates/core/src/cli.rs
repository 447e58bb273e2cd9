//! Command-line front end. Every subcommand writes its artifacts into the
//! output directory, prints one line per check and exits with 0 when all
//! gated checks pass, 1 when one fails and 2 on usage or configuration errors.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::checks::{self, all_ok, Check, CheckError};
use crate::config::{parse_config, ConfigError, RunConfig};
use crate::discretization::assemble;
use crate::exec::Execution;
use crate::output;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "beamlab",
    version,
    about = "Spectra, resolvents and energy decay of a partially damped beam"
)]
pub struct Cli {
    /// Configuration file (flat TOML); defaults are used when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Directory receiving CSV and JSON artifacts.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads for the resolvent scan (1 runs sequentially).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Also write the dense generator, Gram and constraint matrices.
    #[arg(long, global = true)]
    pub dump_matrices: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Interface determinant, dissipation identity and constraint rank.
    Validate {
        /// Nodes per subdomain.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Eigenvalues of the discrete generator.
    Spectrum {
        /// Cross-validate against the exact characteristic determinant.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Resolvent scan along the imaginary axis with exponent fits.
    Resolvent {
        #[arg(long)]
        lambda_min: Option<f64>,
        #[arg(long)]
        lambda_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Time integration and energy decay rate.
    Simulate {
        #[arg(long)]
        t_final: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        tail_fraction: Option<f64>,
    },
    /// Discrete inverse against the closed-form inverse.
    OracleCompare {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        n_oracle: Option<usize>,
    },
    /// Everything above, plus grid-refinement checks.
    All,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate { .. } => "validate",
            Command::Spectrum { .. } => "spectrum",
            Command::Resolvent { .. } => "resolvent",
            Command::Simulate { .. } => "simulate",
            Command::OracleCompare { .. } => "oracle-compare",
            Command::All => "all",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    ReadConfig {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error("cannot write artifacts: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ReadConfig { .. } | CliError::Config(_) => EXIT_USAGE,
            _ => EXIT_FAILED,
        }
    }
}

/// Effective configuration: file (or defaults), then flag overrides.
pub fn effective_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| CliError::ReadConfig {
                path: path.clone(),
                source,
            })?;
            parse_config(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match &cli.command {
        Command::Validate { n } => {
            if let Some(n) = *n {
                cfg.n_left = n;
                cfg.n_right = n;
            }
        }
        Command::Spectrum { n, .. } => set(&mut cfg.n_spectrum, *n),
        Command::Resolvent {
            lambda_min,
            lambda_max,
            points,
            n,
        } => {
            set(&mut cfg.lambda_min, *lambda_min);
            set(&mut cfg.lambda_max, *lambda_max);
            set(&mut cfg.n_lambda, *points);
            set(&mut cfg.n_scan, *n);
        }
        Command::Simulate {
            t_final,
            dt,
            n,
            tail_fraction,
        } => {
            set(&mut cfg.t_final, *t_final);
            set(&mut cfg.dt, *dt);
            set(&mut cfg.n_sim, *n);
            set(&mut cfg.tail_fraction, *tail_fraction);
        }
        Command::OracleCompare { n, n_oracle } => {
            if let Some(n) = *n {
                cfg.n_left = n;
                cfg.n_right = n;
            }
            set(&mut cfg.n_oracle, *n_oracle);
        }
        Command::All => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn set<T: Copy>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Deterministic record of one invocation (wall times go to `timings.json`).
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub command: &'static str,
    pub config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validate: Option<checks::ValidateReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<checks::SpectrumSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolvent: Option<checks::ResolventSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulate: Option<checks::SimulateSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_compare: Option<checks::OracleSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence: Option<checks::ConvergenceSummary>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

struct Runner<'a> {
    cfg: &'a RunConfig,
    out: &'a Path,
    exec: Execution,
    timings: BTreeMap<&'static str, f64>,
    summary: RunSummary,
}

impl Runner<'_> {
    fn timed<T>(&mut self, phase: &'static str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let r = f();
        self.timings.insert(phase, t.elapsed().as_secs_f64());
        r
    }

    fn validate(&mut self) -> Result<(), CliError> {
        let cfg = self.cfg;
        let r = self.timed("validate", || checks::validate(cfg))?;
        println!(
            "validate: det(M) = {} (expected {}), dissipation residual {:e} over {} states, constraint rank {}/{}",
            r.det_m, r.det_expected, r.dissipation_max_residual, r.dissipation_states, r.constraint_rank, r.constraint_rows
        );
        self.summary.checks.extend(r.checks.iter().cloned());
        self.summary.validate = Some(r);
        Ok(())
    }

    fn spectrum(&mut self, oracle: bool) -> Result<(), CliError> {
        let cfg = self.cfg;
        let r = self.timed("spectrum", || checks::spectrum(cfg, oracle))?;
        output::write(self.out, "spectrum.csv", &output::spectrum_csv(&r.report))?;
        println!(
            "spectrum: {} eigenvalues at n = {}, {} accepted, abscissa {:e}",
            r.summary.dim, r.summary.n, r.summary.accepted, r.summary.abscissa
        );
        if oracle {
            output::write(
                self.out,
                "oracle_roots.csv",
                &output::oracle_roots_csv(&r.roots),
            )?;
            println!("spectrum: {} certified roots", r.roots.len());
        }
        self.summary.checks.extend(r.checks);
        self.summary.spectrum = Some(r.summary);
        Ok(())
    }

    fn resolvent(&mut self) -> Result<(), CliError> {
        let (cfg, exec) = (self.cfg, self.exec);
        let r = self.timed("resolvent", || checks::resolvent(cfg, exec))?;
        output::write(
            self.out,
            "resolvent.csv",
            &output::resolvent_csv(&r.samples),
        )?;
        let s = &r.summary;
        println!(
            "resolvent: {} points at n = {}, fit window [{:e}, {:e}] with {} samples, norm slope {:.4}",
            s.points, s.n, s.window[0], s.window[1], s.samples_used, s.channels["norm"].slope
        );
        println!(
            "resolvent: left-end constant range [{:.3e}, {:.3e}], growth {:.3}{}",
            s.left_end_c_min,
            s.left_end_c_max,
            s.left_end_growth,
            if s.left_end_flagged { " (flagged)" } else { "" }
        );
        self.summary.checks.extend(r.checks);
        self.summary.resolvent = Some(r.summary);
        Ok(())
    }

    fn simulate(&mut self) -> Result<(), CliError> {
        let cfg = self.cfg;
        let r = self.timed("simulate", || checks::simulate(cfg))?;
        output::write(self.out, "energy.csv", &output::energy_csv(&r.trace))?;
        let s = &r.summary;
        println!(
            "simulate: {} steps at n = {}, decay rate {:.6} vs rightmost Re {:.6}",
            s.steps, s.n, s.decay_rate, s.rightmost_re
        );
        self.summary.checks.extend(r.checks);
        self.summary.simulate = Some(r.summary);
        Ok(())
    }

    fn oracle_compare(&mut self) -> Result<(), CliError> {
        let cfg = self.cfg;
        let r = self.timed("oracle-compare", || checks::oracle_compare(cfg))?;
        let s = &r.summary;
        println!(
            "oracle-compare: {} seeded smooth right-hand sides (seed {}), n = {} vs exact inverse on n = {}: max relative error {:e}",
            s.samples, cfg.seed, s.n, s.n_oracle, s.max_error
        );
        self.summary.checks.extend(r.checks);
        self.summary.oracle_compare = Some(r.summary);
        Ok(())
    }

    fn convergence(&mut self) -> Result<(), CliError> {
        let cfg = self.cfg;
        let r = self.timed("convergence", || checks::convergence(cfg))?;
        let s = &r.summary;
        println!(
            "convergence: rightmost eigenvalue shift {:e}, inverse error ratio {:.3e}",
            s.eigenvalue_shift, s.inverse_error_ratio
        );
        self.summary.checks.extend(r.checks);
        self.summary.convergence = Some(r.summary);
        Ok(())
    }
}

/// Runs one parsed invocation and returns the exit status.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(passed) => {
            if passed {
                EXIT_OK
            } else {
                EXIT_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs the subcommand; `Ok(true)` when every gated check passed.
pub fn execute(cli: &Cli) -> Result<bool, CliError> {
    let cfg = effective_config(cli)?;
    let exec = Execution::from_threads(cli.threads);
    let mut runner = Runner {
        cfg: &cfg,
        out: &cli.out,
        exec,
        timings: BTreeMap::new(),
        summary: RunSummary {
            command: cli.command.name(),
            config: cfg.clone(),
            validate: None,
            spectrum: None,
            resolvent: None,
            simulate: None,
            oracle_compare: None,
            convergence: None,
            checks: Vec::new(),
            passed: false,
        },
    };
    fs::create_dir_all(&cli.out)?;
    if cli.dump_matrices {
        let op = assemble(cfg.geometry, cfg.n_left, cfg.n_right).map_err(CheckError::from)?;
        let mut f = std::io::BufWriter::new(fs::File::create(cli.out.join("matrices.txt"))?);
        op.dump(&mut f)?;
    }
    match &cli.command {
        Command::Validate { .. } => runner.validate()?,
        Command::Spectrum { oracle, .. } => runner.spectrum(*oracle)?,
        Command::Resolvent { .. } => runner.resolvent()?,
        Command::Simulate { .. } => runner.simulate()?,
        Command::OracleCompare { .. } => runner.oracle_compare()?,
        Command::All => {
            runner.validate()?;
            runner.oracle_compare()?;
            runner.spectrum(true)?;
            runner.resolvent()?;
            runner.simulate()?;
            runner.convergence()?;
        }
    }
    for c in &runner.summary.checks {
        let tag = match (c.passed, c.gated) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "WARN",
        };
        println!(
            "{tag} {} {}: {:e} (threshold {:e})",
            c.id, c.name, c.value, c.threshold
        );
    }
    let passed = all_ok(&runner.summary.checks);
    runner.summary.passed = passed;
    output::write(&cli.out, "summary.json", &output::json(&runner.summary))?;
    output::write(&cli.out, "timings.json", &output::json(&runner.timings))?;
    Ok(passed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("beamlab").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn overrides_apply() {
        let cli = parse(&[
            "resolvent",
            "--lambda-min",
            "5",
            "--lambda-max",
            "1e3",
            "--points",
            "12",
            "--seed",
            "7",
        ]);
        let cfg = effective_config(&cli).unwrap();
        assert_eq!(
            (cfg.lambda_min, cfg.lambda_max, cfg.n_lambda, cfg.seed),
            (5.0, 1e3, 12, 7)
        );
    }

    #[test]
    fn invalid_override_is_a_usage_error() {
        let cli = parse(&["simulate", "--dt=-1"]);
        let err = effective_config(&cli).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_USAGE);
    }

    #[test]
    fn unknown_subcommand_is_rejected() {
        assert!(Cli::try_parse_from(["beamlab", "frobnicate"]).is_err());
    }
}
