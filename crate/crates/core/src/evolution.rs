//! Trapezoidal time stepping of `z' = A_h z` with per-step energy accounting.
//!
//! The scheme `(I − dt/2 A_h) z_{n+1} = (I + dt/2 A_h) z_n` satisfies
//! `E_{n+1} − E_n = −dt ‖W_x(m)‖²` with `m = (z_n + z_{n+1})/2`, so the
//! discrete dissipation identity becomes an exact, checkable per-step balance.
//!
//! The rule is A-stable but not L-stable: modes with `|λ| dt ≫ 1` are damped
//! by roughly `4|Re λ| / (|λ|² dt)` per unit time. Decay-rate studies must use
//! a resolution whose stiffest modes are still resolved by `dt`
//! (see [`stiffness_margin`]).

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::discretization::DiscreteOperator;
use crate::linalg::least_squares_line;
use crate::{CVec, RMat};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum EvolutionError {
    #[error("time step must be positive and below the horizon (dt = {dt}, t_final = {t_final})")]
    BadStep { dt: f64, t_final: f64 },
    #[error("initial state has length {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("initial state is not finite")]
    NonFiniteInitial,
    #[error("stepping matrix is singular")]
    Singular,
    #[error("state became non-finite at step {step}")]
    NonFinite { step: usize },
    #[error("decay window holds {found} usable samples, need {needed}")]
    WindowTooSmall { found: usize, needed: usize },
    #[error("tail fraction {0} is outside (0, 1)")]
    TailFraction(f64),
}

/// Energy history of one trajectory. `dissipation[k]` and `identity_residual[k]`
/// belong to the step from `times[k]` to `times[k + 1]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnergyTrace {
    pub times: Vec<f64>,
    /// `½ ‖z(t_k)‖²_G`
    pub energy: Vec<f64>,
    /// `‖W_x‖²` at the step midpoint.
    pub dissipation: Vec<f64>,
    /// `‖W_x(z(0))‖²`
    pub initial_dissipation: f64,
    /// `|E_{k+1} − E_k + dt D_k| / E_k`
    pub identity_residual: Vec<f64>,
    /// `‖A_h z(t_k)‖_G / ‖z(t_k)‖_G`
    pub smoothing_indicator: Vec<f64>,
}

impl EnergyTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_identity_residual(&self) -> f64 {
        self.identity_residual.iter().copied().fold(0.0, f64::max)
    }

    /// Largest relative energy increase over one step (negative when the
    /// energy strictly decreases).
    pub fn max_relative_increase(&self) -> f64 {
        self.energy
            .windows(2)
            .map(|w| (w[1] - w[0]) / w[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub trace: EnergyTrace,
    pub final_state: CVec,
}

/// Real, split representation: column 0 holds real parts, column 1 imaginary.
fn split(z: &CVec) -> RMat {
    DMatrix::from_fn(z.len(), 2, |i, j| if j == 0 { z[i].re } else { z[i].im })
}

fn join(x: &RMat) -> CVec {
    CVec::from_fn(x.nrows(), |i, _| Complex::new(x[(i, 0)], x[(i, 1)]))
}

/// `½ ‖x‖²_G` on the split representation.
fn half_norm2(g: &RMat, x: &RMat) -> f64 {
    0.5 * (x.transpose() * g * x).trace()
}

/// Trapezoidal integration from `z0` up to `t_final` with fixed `dt`.
pub fn propagate(
    op: &DiscreteOperator,
    z0: &CVec,
    t_final: f64,
    dt: f64,
) -> Result<Trajectory, EvolutionError> {
    propagate_matrix(op, &op.a_reduced, z0, t_final, dt)
}

/// As [`propagate`] with an explicit generator (same dimension as `op`),
/// used to test the scheme against modified operators.
pub fn propagate_matrix(
    op: &DiscreteOperator,
    a: &RMat,
    z0: &CVec,
    t_final: f64,
    dt: f64,
) -> Result<Trajectory, EvolutionError> {
    if !(dt > 0.0 && dt < t_final && t_final.is_finite()) {
        return Err(EvolutionError::BadStep { dt, t_final });
    }
    let m = op.dim();
    if z0.len() != m {
        return Err(EvolutionError::Dimension {
            expected: m,
            got: z0.len(),
        });
    }
    if z0.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(EvolutionError::NonFiniteInitial);
    }
    let eye = RMat::identity(m, m);
    let lu = (&eye - a * (0.5 * dt)).lu();
    let explicit = &eye + a * (0.5 * dt);
    let g = &op.gram;
    let core = &op.core;
    let steps = (t_final / dt).round() as usize;

    let indicator = |x: &RMat| {
        let ax = a * x;
        ((ax.transpose() * g * &ax).trace() / (x.transpose() * g * x).trace()).sqrt()
    };

    let mut x = split(z0);
    let mut e = half_norm2(g, &x);
    let mut trace = EnergyTrace {
        times: Vec::with_capacity(steps + 1),
        energy: Vec::with_capacity(steps + 1),
        dissipation: Vec::with_capacity(steps),
        initial_dissipation: core.wt_x(&op.lift_core(z0)).norm_squared(),
        identity_residual: Vec::with_capacity(steps),
        smoothing_indicator: Vec::with_capacity(steps + 1),
    };
    trace.times.push(0.0);
    trace.energy.push(e);
    trace.smoothing_indicator.push(indicator(&x));

    for step in 1..=steps {
        let next = lu
            .solve(&(&explicit * &x))
            .ok_or(EvolutionError::Singular)?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(EvolutionError::NonFinite { step });
        }
        let mid = join(&((&x + &next) * 0.5));
        let d = core.wt_x(&op.lift_core(&mid)).norm_squared();
        let e_next = half_norm2(g, &next);
        trace.dissipation.push(d);
        trace
            .identity_residual
            .push((e_next - e + dt * d).abs() / e.max(f64::MIN_POSITIVE));
        trace.times.push(step as f64 * dt);
        trace.energy.push(e_next);
        trace.smoothing_indicator.push(indicator(&next));
        x = next;
        e = e_next;
    }
    Ok(Trajectory {
        trace,
        final_state: join(&x),
    })
}

pub const MIN_DECAY_SAMPLES: usize = 10;

/// Half the least-squares slope of `log E` against `t` over the last
/// `tail_fraction` of the horizon: the estimated growth bound.
pub fn decay_rate(trace: &EnergyTrace, tail_fraction: f64) -> Result<f64, EvolutionError> {
    if !(tail_fraction > 0.0 && tail_fraction < 1.0) {
        return Err(EvolutionError::TailFraction(tail_fraction));
    }
    let t_end = trace.times.last().copied().unwrap_or(0.0);
    let t_start = t_end * (1.0 - tail_fraction);
    let pts: Vec<(f64, f64)> = trace
        .times
        .iter()
        .zip(&trace.energy)
        .filter(|(&t, &e)| t >= t_start && e > f64::MIN_POSITIVE)
        .map(|(&t, &e)| (t, e.ln()))
        .collect();
    if pts.len() < MIN_DECAY_SAMPLES {
        return Err(EvolutionError::WindowTooSmall {
            found: pts.len(),
            needed: MIN_DECAY_SAMPLES,
        });
    }
    let (slope, _, _) = least_squares_line(&pts);
    Ok(slope / 2.0)
}

/// Slowest numerical amplitude decay rate among the eigenvalues `values`
/// under trapezoidal stepping with `dt`, i.e. `min −ln|r(dt λ)| / dt` with
/// `r(μ) = (1 + μ/2)/(1 − μ/2)`. Comparing it with the slowest exact rate
/// shows whether stiff modes are artificially long-lived.
pub fn stiffness_margin(values: &[crate::C64], dt: f64) -> f64 {
    values
        .iter()
        .map(|&l| {
            let mu = l * (0.5 * dt);
            let r = (mu + 1.0) / (-mu + 1.0);
            -r.norm().ln() / dt
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::BeamGeometry;
    use crate::discretization::assemble;
    use crate::linalg::{eig_dense, to_complex};
    use crate::samples::smooth_unit;

    fn op(n: usize) -> DiscreteOperator {
        assemble(BeamGeometry::new(0.5, 1.0).unwrap(), n, n).unwrap()
    }

    #[test]
    fn synthetic_exponential_rate() {
        let times: Vec<f64> = (0..200).map(|k| k as f64 * 0.1).collect();
        let trace = EnergyTrace {
            energy: times.iter().map(|t| (-0.6 * t).exp()).collect(),
            times,
            ..Default::default()
        };
        assert!((decay_rate(&trace, 0.5).unwrap() + 0.3).abs() < 1e-12);
        assert!(decay_rate(&trace, 0.01).is_err());
    }

    #[test]
    fn eigenvector_decays_at_its_rate() {
        let o = op(12);
        let e = eig_dense(&to_complex(&o.a_reduced)).unwrap();
        let lam = e[0].value;
        let half_life = std::f64::consts::LN_2 / (2.0 * lam.re.abs());
        let dt = 0.01 / lam.norm();
        let tr = propagate(&o, &e[0].vector, half_life, dt).unwrap().trace;
        let (t, en) = (tr.times.last().unwrap(), tr.energy.last().unwrap());
        let want = tr.energy[0] * (2.0 * lam.re * t).exp();
        assert!((en - want).abs() <= 1e-3 * want, "{en} {want}");
    }

    #[test]
    fn energy_identity_and_monotonicity() {
        let o = op(16);
        let z0 = smooth_unit(&o, 3);
        let tr = propagate(&o, &z0, 0.5, 1e-3).unwrap().trace;
        assert!(tr.max_identity_residual() <= 1e-10);
        assert!(tr.max_relative_increase() <= 1e-12);
        assert_eq!(tr.len(), 501);
        // huge steps stay dissipative
        let tr = propagate(&o, &z0, 50.0, 5.0).unwrap().trace;
        assert!(tr.max_relative_increase() <= 1e-12);
    }

    #[test]
    fn conservative_stub_keeps_energy() {
        let o = op(10);
        let z0 = smooth_unit(&o, 5);
        let zero = RMat::zeros(o.dim(), o.dim());
        let tr = propagate_matrix(&o, &zero, &z0, 1.0, 0.1).unwrap().trace;
        for e in &tr.energy {
            assert!((e - tr.energy[0]).abs() <= 1e-14);
        }
    }

    #[test]
    fn halving_dt_is_second_order() {
        let o = op(12);
        let z0 = smooth_unit(&o, 11);
        let end = |dt: f64| {
            *propagate(&o, &z0, 1.0, dt)
                .unwrap()
                .trace
                .energy
                .last()
                .unwrap()
        };
        let (e1, e2, e3) = (end(0.02), end(0.01), end(0.005));
        let order = ((e1 - e2) / (e2 - e3)).abs().log2();
        assert!(order >= 1.9, "observed order {order}");
    }

    #[test]
    fn rejects_bad_input() {
        let o = op(10);
        let z = CVec::zeros(o.dim());
        assert!(matches!(
            propagate(&o, &z, 1.0, 0.0),
            Err(EvolutionError::BadStep { .. })
        ));
        assert!(matches!(
            propagate(&o, &CVec::zeros(3), 1.0, 0.1),
            Err(EvolutionError::Dimension { .. })
        ));
    }

    #[test]
    fn stiffness_margin_of_resolved_modes() {
        let l = [Complex::new(-2.0, 10.0)];
        assert!((stiffness_margin(&l, 1e-4) - 2.0).abs() < 1e-3);
        assert!(stiffness_margin(&[Complex::new(-30.0, 1e6)], 1e-3) < 1.0);
    }
}
