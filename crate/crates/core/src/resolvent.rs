//! Resolvent `(iλ − A_h)⁻¹` along the imaginary axis: solves, ℋ-norms,
//! per-lemma diagnostics and decay-exponent fits.

use num_complex::Complex;

use crate::config::RunConfig;
use crate::discretization::{real_mul, DiscreteOperator, End, Trace};
use crate::exec::{self, Execution};
use crate::linalg::{fit_loglog, power_norm, LinalgError, Lu, PowerLawFit, Weight};
use crate::samples::smooth_unit;
use crate::{CMat, CVec, C64};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ResolventError {
    #[error("resolvent system at λ = {lambda} is singular: {source}")]
    Singular { lambda: f64, source: LinalgError },
    #[error("right-hand side has length {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("only {found} unflagged samples in the fit window, need {needed}")]
    InsufficientSamples { found: usize, needed: usize },
}

/// One factorization of `iλ − A_h`.
#[derive(Debug, Clone)]
pub struct Resolvent<'a> {
    pub op: &'a DiscreteOperator,
    pub lambda: f64,
    lu: Lu,
}

/// Solution of one resolvent system.
#[derive(Debug, Clone)]
pub struct Solved {
    pub z: CVec,
    /// `‖(iλ − A_h) z − ẑ‖_G / ‖ẑ‖_G`
    pub relative_residual: f64,
}

impl<'a> Resolvent<'a> {
    pub fn new(op: &'a DiscreteOperator, lambda: f64) -> Result<Self, ResolventError> {
        let m = shifted(op, lambda);
        let lu = Lu::factor(&m).map_err(|source| ResolventError::Singular { lambda, source })?;
        Ok(Self { op, lambda, lu })
    }

    pub fn solve(&self, z_hat: &CVec) -> Result<Solved, ResolventError> {
        if z_hat.len() != self.op.dim() {
            return Err(ResolventError::Dimension {
                expected: self.op.dim(),
                got: z_hat.len(),
            });
        }
        let z = self.lu.solve(z_hat);
        let r = self.residual(&z, z_hat);
        let den = self.op.inner(z_hat, z_hat).re.sqrt();
        let rel = if den > 0.0 {
            self.op.inner(&r, &r).re.sqrt() / den
        } else {
            self.op.inner(&r, &r).re.sqrt()
        };
        Ok(Solved {
            z,
            relative_residual: rel,
        })
    }

    /// `(iλ − A_h) z − ẑ`.
    pub fn residual(&self, z: &CVec, z_hat: &CVec) -> CVec {
        z * Complex::new(0.0, self.lambda) - self.op.apply(z) - z_hat
    }

    /// ℋ-operator norm of the resolvent by power iteration.
    pub fn norm(&self) -> Result<crate::linalg::NormEstimate, ResolventError> {
        let w = Weight::new(&self.op.gram)?;
        Ok(power_norm(
            &w,
            |x| self.lu.solve(x),
            |x| self.lu.solve_adjoint(x),
        ))
    }
}

fn shifted(op: &DiscreteOperator, lambda: f64) -> CMat {
    let m = op.dim();
    let mut a = op.a_reduced.map(|v| Complex::new(-v, 0.0));
    for i in 0..m {
        a[(i, i)] += Complex::new(0.0, lambda);
    }
    a
}

/// `z = (iλ − A_h)⁻¹ ẑ` with its relative residual.
pub fn solve_resolvent(
    op: &DiscreteOperator,
    lambda: f64,
    z_hat: &CVec,
) -> Result<Solved, ResolventError> {
    Resolvent::new(op, lambda)?.solve(z_hat)
}

/// `‖(iλ − A_h)⁻¹‖_ℋ`.
pub fn resolvent_norm(op: &DiscreteOperator, lambda: f64) -> Result<f64, ResolventError> {
    Ok(Resolvent::new(op, lambda)?.norm()?.value)
}

/// ℋ-norms of the residual restricted to each of the four equations
/// `iλv − V = v̂`, `iλV + v_xxxx = V̂`, `iλw − W = ŵ`, `iλW + w_xxxx − W_xx = Ŵ`
/// (blocks of the lifted discrete residual).
pub fn equation_residuals(res: &Resolvent, z: &CVec, z_hat: &CVec) -> [f64; 4] {
    let y = res.op.lift_core(&res.residual(z, z_hat));
    let lay = &res.op.core.layout;
    [&lay.alpha, &lay.beta, &lay.gamma, &lay.delta].map(|r| y.rows(r.start, r.len()).norm())
}

/// One scan point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventSample {
    pub lambda: f64,
    pub norm: f64,
    pub scaled_norm: f64,
    /// `‖W_x‖² / (‖z‖ ‖ẑ‖)`
    pub diss_ratio: f64,
    /// `‖w_xx‖² + ‖W‖²` on `(ℓ₀, ℓ)`
    pub q_ww: f64,
    /// `‖v_xx‖² + ‖V‖²` on `(0, ℓ₀)`
    pub q_vv: f64,
    pub tr_w: f64,
    pub tr_wx: f64,
    pub tr_wxx: f64,
    pub tr_wxxx: f64,
    pub tr_vxx0: f64,
    pub tr_vxxx0: f64,
    pub resolution_ok: bool,
    pub z_norm: f64,
    pub z_hat_norm: f64,
    pub norm_converged: bool,
    pub solve_residual: f64,
}

impl ResolventSample {
    /// `‖z‖² + ‖ẑ‖²`, the normalization of every lemma channel.
    pub fn energy(&self) -> f64 {
        self.z_norm.powi(2) + self.z_hat_norm.powi(2)
    }
}

fn dot(row: &[f64], y: &CVec) -> C64 {
    row.iter().zip(y.iter()).map(|(a, b)| b * *a).sum()
}

/// Diagnostics of `z = (iλ − A_h)⁻¹ ẑ` at one λ.
pub fn sample(
    op: &DiscreteOperator,
    lambda: f64,
    z_hat: &CVec,
) -> Result<ResolventSample, ResolventError> {
    let res = Resolvent::new(op, lambda)?;
    let norm = res.norm()?;
    let solved = res.solve(z_hat)?;
    let y = op.lift_core(&solved.z);
    let core = &op.core;
    let lay = &core.layout;
    let block = |r: &std::ops::Range<usize>| y.rows(r.start, r.len()).norm_squared();
    let tr = |t: Trace| dot(&core.trace(t), &y).norm_sqr();
    let z_norm = op.inner(&solved.z, &solved.z).re.sqrt();
    let z_hat_norm = op.inner(z_hat, z_hat).re.sqrt();
    let wx2 = core.wt_x(&y).norm_squared();
    Ok(ResolventSample {
        lambda,
        norm: norm.value,
        scaled_norm: lambda.abs().powf(1.0 / 24.0) * norm.value,
        diss_ratio: wx2 / (z_norm * z_hat_norm),
        q_ww: block(&lay.gamma) + block(&lay.delta),
        q_vv: block(&lay.alpha) + block(&lay.beta),
        tr_w: tr(Trace::RightVelocity(End::Interface, 0)),
        tr_wx: tr(Trace::RightVelocity(End::Interface, 1)),
        tr_wxx: tr(Trace::RightCurvature),
        tr_wxxx: tr(Trace::RightShear),
        tr_vxx0: tr(Trace::LeftCurvature(End::Outer)),
        tr_vxxx0: tr(Trace::LeftShear(End::Outer)),
        resolution_ok: op.resolves(lambda),
        z_norm,
        z_hat_norm,
        norm_converged: norm.converged,
        solve_residual: solved.relative_residual,
    })
}

/// `count` log-spaced points from `min` to `max` inclusive.
pub fn lambda_grid(min: f64, max: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![min];
    }
    let (a, b) = (min.ln(), max.ln());
    (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Seed offset of the diagnostic right-hand side, relative to the run seed.
pub const DIAGNOSTIC_SEED_OFFSET: u64 = 0x0d1a;

/// Resolvent scan over the configured λ grid, ordered by λ. All diagnostics
/// share one fixed smooth unit ẑ derived from the run seed.
pub fn scan(
    op: &DiscreteOperator,
    cfg: &RunConfig,
    exec_mode: Execution,
) -> Result<Vec<ResolventSample>, ResolventError> {
    let lambdas = lambda_grid(cfg.lambda_min, cfg.lambda_max, cfg.n_lambda);
    scan_at(op, &lambdas, cfg.seed, exec_mode)
}

pub fn scan_at(
    op: &DiscreteOperator,
    lambdas: &[f64],
    seed: u64,
    exec_mode: Execution,
) -> Result<Vec<ResolventSample>, ResolventError> {
    let z_hat = smooth_unit(op, seed.wrapping_add(DIAGNOSTIC_SEED_OFFSET));
    exec::map(exec_mode, lambdas, |&l| sample(op, l, &z_hat))
        .into_iter()
        .collect()
}

/// Fitted channel with its bound from the lemma statements.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelFit {
    pub name: &'static str,
    pub fit: PowerLawFit,
    /// The predicted exponent (negative for decay channels).
    pub rate: f64,
    pub slack: f64,
    pub passed: bool,
}

/// `|v_xx(0)| ≤ C (|λ|^{-1/2} |v_xxx(0)| + |λ|^{-3/4} (‖z‖ + ‖ẑ‖))`: implied
/// constants over the fit window.
#[derive(Debug, Clone, PartialEq)]
pub struct LeftEndCheck {
    pub c_max: f64,
    pub c_min: f64,
    /// `c_max / c_min`; flagged above 10.
    pub growth: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentReport {
    pub window: (f64, f64),
    pub samples_used: usize,
    pub channels: Vec<ChannelFit>,
    /// `max/min` of `λ^{1/24} ‖R(iλ)‖` over the window.
    pub scaled_norm_ratio: f64,
    pub left_end: LeftEndCheck,
}

impl ExponentReport {
    pub fn channel(&self, name: &str) -> Option<&ChannelFit> {
        self.channels.iter().find(|c| c.name == name)
    }
}

pub const MIN_FIT_SAMPLES: usize = 8;
pub const CHANNEL_SLACK: f64 = 0.05;
pub const NORM_SLACK: f64 = 0.01;
pub const BOUNDEDNESS_FACTOR: f64 = 10.0;

/// Name, predicted exponent and extractor for each fitted channel
/// (lemma channels are divided by `‖z‖² + ‖ẑ‖²`).
type Channel = (&'static str, f64, f64, fn(&ResolventSample) -> f64);

pub const CHANNELS: [Channel; 8] = [
    ("norm", -1.0 / 24.0, NORM_SLACK, |s| s.norm),
    ("q_wW", -2.0 / 3.0, CHANNEL_SLACK, |s| s.q_ww / s.energy()),
    ("q_vV", -1.0 / 12.0, CHANNEL_SLACK, |s| s.q_vv / s.energy()),
    ("tr_W", -1.0 / 3.0, CHANNEL_SLACK, |s| s.tr_w / s.energy()),
    ("tr_Wx", 2.0 / 3.0, CHANNEL_SLACK, |s| s.tr_wx / s.energy()),
    ("tr_wxx", -1.0 / 6.0, CHANNEL_SLACK, |s| {
        s.tr_wxx / s.energy()
    }),
    ("tr_wxxx", 5.0 / 6.0, CHANNEL_SLACK, |s| {
        s.tr_wxxx / s.energy()
    }),
    ("tr_vxxx0", 5.0 / 6.0, CHANNEL_SLACK, |s| {
        s.tr_vxxx0 / s.energy()
    }),
];

/// Slopes over the top decade `[λ_max/10, λ_max]` of the unflagged samples.
pub fn fit_exponents(samples: &[ResolventSample]) -> Result<ExponentReport, ResolventError> {
    let top = samples.iter().map(|s| s.lambda.abs()).fold(0.0, f64::max);
    let lo = top / 10.0;
    let used: Vec<&ResolventSample> = samples
        .iter()
        .filter(|s| s.resolution_ok && s.lambda.abs() >= lo * (1.0 - 1e-12))
        .collect();
    if used.len() < MIN_FIT_SAMPLES {
        return Err(ResolventError::InsufficientSamples {
            found: used.len(),
            needed: MIN_FIT_SAMPLES,
        });
    }
    let mut channels = Vec::new();
    for (name, rate, slack, get) in CHANNELS {
        let pts: Vec<(f64, f64)> = used.iter().map(|s| (s.lambda.abs(), get(s))).collect();
        let fit = fit_loglog(&pts, 0..pts.len())?;
        channels.push(ChannelFit {
            name,
            passed: fit.slope <= rate + slack,
            fit,
            rate,
            slack,
        });
    }
    let scaled: Vec<f64> = used.iter().map(|s| s.scaled_norm).collect();
    let smax = scaled.iter().copied().fold(f64::MIN, f64::max);
    let smin = scaled.iter().copied().fold(f64::MAX, f64::min);
    let cs: Vec<f64> = used
        .iter()
        .map(|s| {
            let l = s.lambda.abs();
            let rhs = l.powf(-0.5) * s.tr_vxxx0.sqrt() + l.powf(-0.75) * (s.z_norm + s.z_hat_norm);
            s.tr_vxx0.sqrt() / rhs
        })
        .collect();
    let c_max = cs.iter().copied().fold(f64::MIN, f64::max);
    let c_min = cs.iter().copied().fold(f64::MAX, f64::min);
    let growth = c_max / c_min;
    Ok(ExponentReport {
        window: (lo, top),
        samples_used: used.len(),
        channels,
        scaled_norm_ratio: smax / smin,
        left_end: LeftEndCheck {
            c_max,
            c_min,
            growth,
            flagged: !(growth <= BOUNDEDNESS_FACTOR),
        },
    })
}

/// Explicit resolvent matrix (columns are solves against the identity); used
/// by tests as an oracle for the power iteration.
pub fn resolvent_matrix(op: &DiscreteOperator, lambda: f64) -> Result<CMat, ResolventError> {
    let lu = Lu::factor(&shifted(op, lambda))
        .map_err(|source| ResolventError::Singular { lambda, source })?;
    Ok(lu.inverse())
}

/// Constrained coordinates of `(iλ − A_h)` applied to `z` (convenience for
/// residual checks).
pub fn apply_shifted(op: &DiscreteOperator, lambda: f64, z: &CVec) -> CVec {
    z * Complex::new(0.0, lambda) - real_mul(&op.a_reduced, z)
}
