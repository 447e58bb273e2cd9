//! The acceptance computations behind every subcommand: each phase returns
//! structured results together with the pass/fail checks derived from them.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::config::{BeamGeometry, RunConfig};
use crate::discretization::{assemble, AssemblyError, CoreSpace, DiscreteOperator};
use crate::evolution::{decay_rate, propagate, stiffness_margin, EnergyTrace, EvolutionError};
use crate::exec::Execution;
use crate::inverse_oracle::{discrete_vs_exact, interface_matrix, InverseError, InverseOracle};
use crate::linalg::LinalgError;
use crate::resolvent::{fit_exponents, scan, ExponentReport, ResolventError, ResolventSample};
use crate::samples::{random_coordinates, rng, smooth_unit, SmoothState};
use crate::spectral_oracle::{CharacteristicRoot, OracleError};
use crate::spectrum::{
    cross_validate, roots_near_axis, spectrum_report, RootMatch, SpectrumReport,
};
use crate::C64;

#[derive(Debug, thiserror::Error)]
pub enum CheckError {
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Resolvent(#[from] ResolventError),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    Inverse(#[from] InverseError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Grid(#[from] crate::grid::GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<")]
    Below,
    #[serde(rename = "==")]
    Equals,
}

/// One thresholded comparison. Ungated checks are reported but never
/// affect the exit status.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub id: &'static str,
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub passed: bool,
    pub gated: bool,
}

impl Check {
    fn new(
        id: &'static str,
        name: impl Into<String>,
        value: f64,
        relation: Relation,
        threshold: f64,
    ) -> Self {
        let passed = match relation {
            Relation::AtMost => value <= threshold,
            Relation::AtLeast => value >= threshold,
            Relation::Below => value < threshold,
            Relation::Equals => value == threshold,
        };
        Self {
            id,
            name: name.into(),
            value,
            relation,
            threshold,
            passed,
            gated: true,
        }
    }

    pub fn at_most(id: &'static str, name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(id, name, value, Relation::AtMost, threshold)
    }

    pub fn at_least(id: &'static str, name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(id, name, value, Relation::AtLeast, threshold)
    }

    pub fn below(id: &'static str, name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(id, name, value, Relation::Below, threshold)
    }

    pub fn equals(id: &'static str, name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(id, name, value, Relation::Equals, threshold)
    }

    pub fn ungated(mut self) -> Self {
        self.gated = false;
        self
    }

    /// True unless this is a gated check that failed.
    pub fn ok(&self) -> bool {
        self.passed || !self.gated
    }
}

/// Verdict per check id: an id passes when all of its gated checks pass.
pub fn verdicts(checks: &[Check]) -> BTreeMap<&'static str, bool> {
    let mut out = BTreeMap::new();
    for c in checks {
        let e = out.entry(c.id).or_insert(true);
        *e &= c.ok();
    }
    out
}

pub fn all_ok(checks: &[Check]) -> bool {
    checks.iter().all(Check::ok)
}

fn cfg_op(cfg: &RunConfig, n: usize) -> Result<DiscreteOperator, CheckError> {
    Ok(assemble(cfg.geometry, n, n)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateReport {
    pub det_m: f64,
    pub det_expected: f64,
    pub dissipation_states: usize,
    pub dissipation_max_residual: f64,
    pub constraint_rank: usize,
    pub constraint_rows: usize,
    pub dim: usize,
    #[serde(skip)]
    pub checks: Vec<Check>,
}

pub const DISSIPATION_STATES: usize = 200;

/// Interface determinant, discrete dissipation identity on random states, and
/// the rank of the domain constraints.
pub fn validate(cfg: &RunConfig) -> Result<ValidateReport, CheckError> {
    let g = cfg.geometry;
    let det_m = interface_matrix(&g).determinant();
    let det_expected = 12.0 * g.ell.powi(4);
    let op = assemble(g, cfg.n_left, cfg.n_right)?;
    let mut r = rng(cfg.seed);
    let mut worst = 0.0f64;
    for _ in 0..DISSIPATION_STATES {
        let c = random_coordinates(op.dim(), &mut r);
        let re = op.inner(&op.apply(&c), &c).re;
        let d = op.core.wt_x(&op.lift_core(&c)).norm_squared();
        worst = worst.max((re + d).abs() / op.inner(&c, &c).re);
    }
    let rows = op.constraint_matrix.nrows();
    let checks = vec![
        Check::at_most(
            "A1",
            "relative error of det(M) against 12 l^4",
            (det_m - det_expected).abs() / det_expected,
            1e-10,
        ),
        Check::at_most("A2", "max |Re<Az,z> + |W_x|^2| / |z|^2", worst, 1e-8),
        Check::equals(
            "rank",
            "numerical rank of the domain constraints",
            op.constraint_rank as f64,
            rows as f64,
        ),
    ];
    Ok(ValidateReport {
        det_m,
        det_expected,
        dissipation_states: DISSIPATION_STATES,
        dissipation_max_residual: worst,
        constraint_rank: op.constraint_rank,
        constraint_rows: rows,
        dim: op.dim(),
        checks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootRecord {
    pub discrete: [f64; 2],
    pub root: Option<[f64; 2]>,
    pub distance: f64,
    pub det_abs: Option<f64>,
    pub newton_iters: Option<usize>,
    pub error: Option<String>,
}

impl From<&RootMatch> for RootRecord {
    fn from(m: &RootMatch) -> Self {
        let c = |z: C64| [z.re, z.im];
        Self {
            discrete: c(m.discrete),
            root: m.root.as_ref().ok().map(|r| c(r.zeta)),
            distance: m.distance(),
            det_abs: m.root.as_ref().ok().map(|r| r.det_abs),
            newton_iters: m.root.as_ref().ok().map(|r| r.newton_iters),
            error: m.root.as_ref().err().map(|e| e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSummary {
    pub n: usize,
    pub dim: usize,
    pub accepted: usize,
    pub abscissa: f64,
    pub conjugate_pairs: usize,
    pub real_eigenvalues: usize,
    pub conjugate_mismatch: f64,
    pub cross_validation: Vec<RootRecord>,
    pub axis_band_height: Option<f64>,
    pub roots_near_axis: Option<i64>,
}

#[derive(Debug, Clone)]
pub struct SpectrumRun {
    pub report: SpectrumReport,
    pub roots: Vec<CharacteristicRoot>,
    pub summary: SpectrumSummary,
    pub checks: Vec<Check>,
}

/// Eigenvalues that are matched against characteristic roots.
pub const CROSS_VALIDATED: usize = 6;
pub const MATCH_TOL: f64 = 1e-6;

/// Discrete spectrum at `n_spectrum`; with `oracle`, cross-validation of the
/// rightmost eigenvalues and the root count next to the imaginary axis.
pub fn spectrum(cfg: &RunConfig, oracle: bool) -> Result<SpectrumRun, CheckError> {
    let op = cfg_op(cfg, cfg.n_spectrum)?;
    let report = spectrum_report(&op, cfg.eig_residual_tol)?;
    let mut checks = vec![
        Check::below(
            "A4",
            "max Re over accepted eigenvalues",
            report.abscissa,
            0.0,
        ),
        Check::at_least(
            "A4",
            "accepted eigenvalues",
            report.accepted as f64,
            CROSS_VALIDATED as f64,
        ),
        Check::at_most(
            "spectrum",
            "conjugate pairing mismatch",
            report.conjugate_mismatch,
            1e-10,
        )
        .ungated(),
    ];
    let mut roots = Vec::new();
    let mut records = Vec::new();
    let mut band = None;
    let mut near = None;
    if oracle {
        let matches = cross_validate(&cfg.geometry, &report, CROSS_VALIDATED);
        for (k, m) in matches.iter().enumerate() {
            checks.push(Check::at_most(
                "A4",
                format!("eigenvalue {k} distance to refined root"),
                m.distance(),
                MATCH_TOL,
            ));
            if let Ok(r) = &m.root {
                checks.push(Check::below(
                    "A4",
                    format!("root {k} real part"),
                    r.zeta.re,
                    0.0,
                ));
                roots.push(r.clone());
            }
        }
        records = matches.iter().map(RootRecord::from).collect();
        let height = report
            .rightmost(CROSS_VALIDATED)
            .iter()
            .map(|z| z.im.abs())
            .fold(50.0f64, f64::max)
            * 1.5;
        let count = roots_near_axis(&cfg.geometry, height)?;
        checks.push(Check::equals(
            "A4",
            "roots with Re in [-1e-6, 1]",
            count as f64,
            0.0,
        ));
        band = Some(height);
        near = Some(count);
    }
    let summary = SpectrumSummary {
        n: cfg.n_spectrum,
        dim: op.dim(),
        accepted: report.accepted,
        abscissa: report.abscissa,
        conjugate_pairs: report.conjugate_pairs,
        real_eigenvalues: report.real_eigenvalues,
        conjugate_mismatch: report.conjugate_mismatch,
        cross_validation: records,
        axis_band_height: band,
        roots_near_axis: near,
    };
    Ok(SpectrumRun {
        report,
        roots,
        summary,
        checks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelSummary {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolventSummary {
    pub n: usize,
    pub points: usize,
    pub window: [f64; 2],
    pub samples_used: usize,
    pub unresolved: usize,
    pub channels: BTreeMap<&'static str, ChannelSummary>,
    pub scaled_norm_ratio: f64,
    pub max_diss_ratio: f64,
    pub max_solve_residual: f64,
    pub all_norms_converged: bool,
    pub left_end_c_max: f64,
    pub left_end_c_min: f64,
    pub left_end_growth: f64,
    pub left_end_flagged: bool,
}

#[derive(Debug, Clone)]
pub struct ResolventRun {
    pub samples: Vec<ResolventSample>,
    pub report: ExponentReport,
    pub summary: ResolventSummary,
    pub checks: Vec<Check>,
}

/// Resolvent scan at `n_scan` with exponent fits and the pointwise bound.
pub fn resolvent(cfg: &RunConfig, exec: Execution) -> Result<ResolventRun, CheckError> {
    let op = cfg_op(cfg, cfg.n_scan)?;
    let samples = scan(&op, cfg, exec)?;
    resolvent_from_samples(cfg, samples)
}

pub fn resolvent_from_samples(
    cfg: &RunConfig,
    samples: Vec<ResolventSample>,
) -> Result<ResolventRun, CheckError> {
    let report = fit_exponents(&samples)?;
    let mut checks = Vec::new();
    let mut channels = BTreeMap::new();
    for c in &report.channels {
        let id = if c.name == "norm" { "A5" } else { "A6" };
        checks.push(Check::at_most(
            id,
            format!("{} slope", c.name),
            c.fit.slope,
            c.rate + c.slack,
        ));
        channels.insert(
            c.name,
            ChannelSummary {
                slope: c.fit.slope,
                intercept: c.fit.intercept,
                r_squared: c.fit.r_squared,
                bound: c.rate + c.slack,
                passed: c.passed,
            },
        );
    }
    checks.push(Check::at_most(
        "A5",
        "max/min of lambda^(1/24) norm",
        report.scaled_norm_ratio,
        crate::resolvent::BOUNDEDNESS_FACTOR,
    ));
    let max_diss = samples.iter().map(|s| s.diss_ratio).fold(0.0, f64::max);
    checks.push(Check::at_most(
        "A7",
        "max |W_x|^2 / (|z| |zhat|)",
        max_diss,
        1.0 + 1e-6,
    ));
    let max_res = samples.iter().map(|s| s.solve_residual).fold(0.0, f64::max);
    checks.push(
        Check::at_most(
            "resolvent",
            "max relative solve residual",
            max_res,
            cfg.solve_residual_tol,
        )
        .ungated(),
    );
    checks.push(
        Check::at_most(
            "resolvent",
            "left-end constant growth",
            report.left_end.growth,
            crate::resolvent::BOUNDEDNESS_FACTOR,
        )
        .ungated(),
    );
    let summary = ResolventSummary {
        n: cfg.n_scan,
        points: samples.len(),
        window: [report.window.0, report.window.1],
        samples_used: report.samples_used,
        unresolved: samples.iter().filter(|s| !s.resolution_ok).count(),
        channels,
        scaled_norm_ratio: report.scaled_norm_ratio,
        max_diss_ratio: max_diss,
        max_solve_residual: max_res,
        all_norms_converged: samples.iter().all(|s| s.norm_converged),
        left_end_c_max: report.left_end.c_max,
        left_end_c_min: report.left_end.c_min,
        left_end_growth: report.left_end.growth,
        left_end_flagged: report.left_end.flagged,
    };
    Ok(ResolventRun {
        samples,
        report,
        summary,
        checks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateSummary {
    pub n: usize,
    pub dt: f64,
    pub t_final: f64,
    pub steps: usize,
    pub decay_rate: f64,
    pub rightmost_re: f64,
    pub relative_difference: f64,
    pub max_identity_residual: f64,
    pub max_relative_increase: f64,
    /// Slowest numerical decay rate among all but the rightmost pair.
    pub stiffness_margin: f64,
    pub final_energy: f64,
    /// `‖A_h z‖/‖z‖` at `t = 1` over its value at `t = 0.01`, from a state
    /// with random coordinates.
    pub smoothing_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct SimulateRun {
    pub trace: EnergyTrace,
    pub summary: SimulateSummary,
    pub checks: Vec<Check>,
}

pub const DECAY_TOL: f64 = 0.05;

/// Energy decay from a seeded smooth state at `n_sim`, compared with the
/// rightmost eigenvalue of the same discretization.
pub fn simulate(cfg: &RunConfig) -> Result<SimulateRun, CheckError> {
    let op = cfg_op(cfg, cfg.n_sim)?;
    let z0 = smooth_unit(&op, cfg.seed);
    let traj = propagate(&op, &z0, cfg.t_final, cfg.dt)?;
    let trace = traj.trace;
    let rate = decay_rate(&trace, cfg.tail_fraction)?;
    let spec = spectrum_report(&op, cfg.eig_residual_tol)?;
    let rightmost = spec.abscissa;
    let slower: Vec<C64> = spec.eigenvalues.iter().skip(2).map(|e| e.value).collect();
    let margin = stiffness_margin(&slower, cfg.dt);
    let rel = (rate - rightmost).abs() / rightmost.abs();
    let rough = {
        let c = random_coordinates(op.dim(), &mut rng(cfg.seed ^ 0x5a5a));
        let tr = propagate(&op, &c, 1.0, cfg.dt.min(0.01))?.trace;
        let at = |t: f64| {
            let k = tr
                .times
                .partition_point(|&s| s < t - 1e-12)
                .min(tr.len() - 1);
            tr.smoothing_indicator[k]
        };
        at(1.0) / at(0.01)
    };
    let summary = SimulateSummary {
        n: cfg.n_sim,
        dt: cfg.dt,
        t_final: cfg.t_final,
        steps: trace.len() - 1,
        decay_rate: rate,
        rightmost_re: rightmost,
        relative_difference: rel,
        max_identity_residual: trace.max_identity_residual(),
        max_relative_increase: trace.max_relative_increase(),
        stiffness_margin: margin,
        final_energy: trace.energy.last().copied().unwrap_or(0.0),
        smoothing_ratio: rough,
    };
    let checks = vec![
        Check::below("A8", "fitted decay rate", rate, 0.0),
        Check::at_most("A8", "relative distance to rightmost Re", rel, DECAY_TOL),
        Check::at_most(
            "A8",
            "max per-step energy identity residual",
            summary.max_identity_residual,
            1e-10,
        ),
        Check::at_most(
            "evolution",
            "max relative energy increase per step",
            summary.max_relative_increase,
            1e-12,
        )
        .ungated(),
        Check::at_most(
            "evolution",
            "smoothing indicator ratio t=1 / t=0.01",
            rough,
            1.0,
        )
        .ungated(),
        Check::at_least(
            "evolution",
            "stiffness margin over the decay rate",
            margin,
            2.0 * rightmost.abs(),
        )
        .ungated(),
    ];
    Ok(SimulateRun {
        trace,
        summary,
        checks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSummary {
    pub n: usize,
    pub n_oracle: usize,
    pub samples: usize,
    pub errors: Vec<f64>,
    pub max_error: f64,
}

#[derive(Debug, Clone)]
pub struct OracleRun {
    pub summary: OracleSummary,
    pub checks: Vec<Check>,
}

pub const ORACLE_SAMPLES: usize = 20;

/// Relative ℋ-errors of the discrete inverse at `n` for `count` seeded smooth
/// right-hand sides.
pub fn oracle_errors(
    geometry: BeamGeometry,
    n: usize,
    n_oracle: usize,
    seed: u64,
    count: usize,
) -> Result<Vec<f64>, CheckError> {
    let op = assemble(geometry, n, n)?;
    let oracle = InverseOracle::new(geometry, n_oracle)?;
    let core = CoreSpace::new(geometry, n_oracle, n_oracle)?;
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let s = SmoothState::random(geometry, &mut r);
            Ok(discrete_vs_exact(&op, &oracle, &core, &s)?)
        })
        .collect()
}

/// Discrete inverse against the closed-form inverse at `n_left` nodes.
pub fn oracle_compare(cfg: &RunConfig) -> Result<OracleRun, CheckError> {
    let n = cfg.n_left.max(cfg.n_right);
    let errors = oracle_errors(cfg.geometry, n, cfg.n_oracle, cfg.seed, ORACLE_SAMPLES)?;
    let max_error = errors.iter().copied().fold(0.0, f64::max);
    Ok(OracleRun {
        checks: vec![Check::at_most(
            "A3",
            "max relative inverse error",
            max_error,
            cfg.oracle_tol,
        )],
        summary: OracleSummary {
            n,
            n_oracle: cfg.n_oracle,
            samples: errors.len(),
            errors,
            max_error,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceSummary {
    pub rightmost_coarse: [f64; 2],
    pub rightmost_fine: [f64; 2],
    pub eigenvalue_shift: f64,
    pub inverse_error_coarse: f64,
    pub inverse_error_fine: f64,
    pub inverse_error_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceRun {
    pub summary: ConvergenceSummary,
    pub checks: Vec<Check>,
}

pub const EIG_LEVELS: (usize, usize) = (32, 64);
pub const INVERSE_LEVELS: (usize, usize) = (24, 48);

fn rightmost_upper(cfg: &RunConfig, n: usize) -> Result<C64, CheckError> {
    let rep = spectrum_report(&cfg_op(cfg, n)?, cfg.eig_residual_tol)?;
    let z = rep
        .accepted()
        .find(|e| e.value.im >= 0.0)
        .map(|e| e.value)
        .unwrap_or(C64::new(f64::NAN, f64::NAN));
    Ok(z)
}

/// Stability of the rightmost eigenvalue and decay of the inverse error
/// under grid refinement.
pub fn convergence(cfg: &RunConfig) -> Result<ConvergenceRun, CheckError> {
    let a = rightmost_upper(cfg, EIG_LEVELS.0)?;
    let b = rightmost_upper(cfg, EIG_LEVELS.1)?;
    let shift = (a - b).norm() / b.norm();
    let worst = |n| -> Result<f64, CheckError> {
        let e = oracle_errors(cfg.geometry, n, cfg.n_oracle, cfg.seed, ORACLE_SAMPLES)?;
        Ok(e.into_iter().fold(0.0, f64::max))
    };
    let (ec, ef) = (worst(INVERSE_LEVELS.0)?, worst(INVERSE_LEVELS.1)?);
    let ratio = ec / ef;
    Ok(ConvergenceRun {
        checks: vec![
            Check::below(
                "A9",
                "relative rightmost eigenvalue shift 32 -> 64",
                shift,
                1e-6,
            ),
            Check::at_least("A9", "inverse error ratio 24 -> 48", ratio, 1e2),
        ],
        summary: ConvergenceSummary {
            rightmost_coarse: [a.re, a.im],
            rightmost_fine: [b.re, b.im],
            eigenvalue_shift: shift,
            inverse_error_coarse: ec,
            inverse_error_fine: ef,
            inverse_error_ratio: ratio,
        },
    })
}
