//! Nodal states `z = (v, V, w, W)` and the pointwise constraints that define
//! the state space and the generator domain.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::grid::SubdomainGrid;
use crate::{CVec, RMat};

/// Samples of `z = (v, V, w, W)` at the collocation nodes: `v`, `V = v_t` on the
/// left grid, `w`, `W = w_t` on the right grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub v: CVec,
    pub vt: CVec,
    pub w: CVec,
    pub wt: CVec,
}

impl StateVector {
    pub fn zeros(n_left: usize, n_right: usize) -> Self {
        Self {
            v: CVec::zeros(n_left),
            vt: CVec::zeros(n_left),
            w: CVec::zeros(n_right),
            wt: CVec::zeros(n_right),
        }
    }

    /// Samples four real functions at the grid nodes.
    pub fn sample(
        left: &SubdomainGrid,
        right: &SubdomainGrid,
        v: impl Fn(f64) -> f64,
        vt: impl Fn(f64) -> f64,
        w: impl Fn(f64) -> f64,
        wt: impl Fn(f64) -> f64,
    ) -> Self {
        let s = |g: &SubdomainGrid, f: &dyn Fn(f64) -> f64| {
            CVec::from_iterator(g.len(), g.nodes.iter().map(|&x| Complex::new(f(x), 0.0)))
        };
        Self {
            v: s(left, &v),
            vt: s(left, &vt),
            w: s(right, &w),
            wt: s(right, &wt),
        }
    }

    /// Concatenation `v | V | w | W`.
    pub fn stacked(&self) -> CVec {
        let mut out = CVec::zeros(self.v.len() * 2 + self.w.len() * 2);
        let mut at = 0;
        for part in [&self.v, &self.vt, &self.w, &self.wt] {
            out.rows_mut(at, part.len()).copy_from(part);
            at += part.len();
        }
        out
    }

    pub fn from_stacked(x: &CVec, n_left: usize, n_right: usize) -> Self {
        Self {
            v: x.rows(0, n_left).into_owned(),
            vt: x.rows(n_left, n_left).into_owned(),
            w: x.rows(2 * n_left, n_right).into_owned(),
            wt: x.rows(2 * n_left + n_right, n_right).into_owned(),
        }
    }

    pub fn scale(&self, a: Complex<f64>) -> Self {
        Self {
            v: &self.v * a,
            vt: &self.vt * a,
            w: &self.w * a,
            wt: &self.wt * a,
        }
    }
}

/// Which set of constraints to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    /// Clamped ends of `v, w` and interface continuity of value and slope.
    StateSpace,
    /// Additionally the clamped ends of `V, W` and the four transmission conditions.
    GeneratorDomain,
}

/// Constraint names in the fixed order used throughout the crate. The first six
/// define the state space; all fourteen define the generator domain.
pub const CONSTRAINT_NAMES: [&str; 14] = [
    "v(0)",
    "v_x(0)",
    "w(l)",
    "w_x(l)",
    "v(l0)-w(l0)",
    "v_x(l0)-w_x(l0)",
    "V(0)",
    "V_x(0)",
    "W(l)",
    "W_x(l)",
    "V(l0)-W(l0)",
    "V_x(l0)-W_x(l0)",
    "v_xx(l0)-w_xx(l0)",
    "v_xxx(l0)-w_xxx(l0)+W_x(l0)",
];

pub const STATE_SPACE_CONSTRAINTS: usize = 6;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
#[error(
    "state has block sizes ({got_left}, {got_right}), grid expects ({want_left}, {want_right})"
)]
pub struct DimensionMismatch {
    pub want_left: usize,
    pub want_right: usize,
    pub got_left: usize,
    pub got_right: usize,
}

/// The 14 linear functionals on the stacked nodal space `v | V | w | W`.
pub fn constraint_functionals(left: &SubdomainGrid, right: &SubdomainGrid) -> RMat {
    let (nl, nr) = (left.len(), right.len());
    let dim = 2 * nl + 2 * nr;
    let (v, vt, w, wt) = (0, nl, 2 * nl, 2 * nl + nr);
    let x0 = left.a;
    let l0 = left.b;
    let l = right.b;
    let mut c = DMatrix::<f64>::zeros(14, dim);
    let mut put = |row: usize, off: usize, vals: Vec<f64>, sign: f64| {
        for (j, val) in vals.into_iter().enumerate() {
            c[(row, off + j)] += sign * val;
        }
    };
    put(0, v, left.trace_row(0, x0), 1.0);
    put(1, v, left.trace_row(1, x0), 1.0);
    put(2, w, right.trace_row(0, l), 1.0);
    put(3, w, right.trace_row(1, l), 1.0);
    put(4, v, left.trace_row(0, l0), 1.0);
    put(4, w, right.trace_row(0, l0), -1.0);
    put(5, v, left.trace_row(1, l0), 1.0);
    put(5, w, right.trace_row(1, l0), -1.0);
    put(6, vt, left.trace_row(0, x0), 1.0);
    put(7, vt, left.trace_row(1, x0), 1.0);
    put(8, wt, right.trace_row(0, l), 1.0);
    put(9, wt, right.trace_row(1, l), 1.0);
    put(10, vt, left.trace_row(0, l0), 1.0);
    put(10, wt, right.trace_row(0, l0), -1.0);
    put(11, vt, left.trace_row(1, l0), 1.0);
    put(11, wt, right.trace_row(1, l0), -1.0);
    put(12, v, left.trace_row(2, l0), 1.0);
    put(12, w, right.trace_row(2, l0), -1.0);
    put(13, v, left.trace_row(3, l0), 1.0);
    put(13, w, right.trace_row(3, l0), -1.0);
    put(13, wt, right.trace_row(1, l0), 1.0);
    c
}

/// Absolute residual of each constraint, in [`CONSTRAINT_NAMES`] order
/// (six entries for the state space, fourteen for the generator domain).
pub fn check_domain_membership(
    z: &StateVector,
    which: Membership,
    left: &SubdomainGrid,
    right: &SubdomainGrid,
) -> Result<Vec<f64>, DimensionMismatch> {
    let ok = z.v.len() == left.len()
        && z.vt.len() == left.len()
        && z.w.len() == right.len()
        && z.wt.len() == right.len();
    if !ok {
        return Err(DimensionMismatch {
            want_left: left.len(),
            want_right: right.len(),
            got_left: z.v.len().min(z.vt.len()),
            got_right: z.w.len().min(z.wt.len()),
        });
    }
    let c = constraint_functionals(left, right);
    let x = z.stacked();
    let rows = match which {
        Membership::StateSpace => STATE_SPACE_CONSTRAINTS,
        Membership::GeneratorDomain => 14,
    };
    Ok((0..rows)
        .map(|i| {
            c.row(i)
                .iter()
                .zip(x.iter())
                .map(|(a, b)| b * *a)
                .sum::<Complex<f64>>()
                .norm()
        })
        .collect())
}

/// True when every residual is at most `tol`.
pub fn within(residuals: &[f64], tol: f64) -> bool {
    residuals.iter().all(|&r| r <= tol)
}
