//! Closed-form inverse of the generator.
//!
//! For `ẑ = (v̂, V̂, ŵ, Ŵ)` in the state space, `𝔸z = ẑ` gives `V = v̂`, `W = ŵ`,
//! `v = a₁x³ + a₂x² + p`, `w = a₃(x−ℓ)³ + a₄(x−ℓ)² + q`, where `p` and `q` are
//! fourfold integrals of `−V̂` from 0 and of `ŵ_xx − Ŵ` from ℓ, and the
//! coefficients solve the 4×4 interface system `M a = b`.

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex;

use crate::config::BeamGeometry;
use crate::discretization::{real_mul, CoreSpace, DiscreteOperator};
use crate::grid::{build_grid, GridError, SubdomainGrid};
use crate::linalg::{max_abs, to_complex, Lu};
use crate::samples::SmoothState;
use crate::state::{check_domain_membership, Membership, StateVector, CONSTRAINT_NAMES};
use crate::{CVec, RMat, C64};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum InverseError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("input has {got} samples, the oracle grid has {want}")]
    GridMismatch { want: usize, got: usize },
    #[error("input violates {name}: residual {residual:e}")]
    ConstraintViolation { name: &'static str, residual: f64 },
    #[error("interface matrix is singular")]
    SingularInterface,
    #[error("discrete generator is singular")]
    SingularDiscrete,
}

/// The interface system `M a = b` for one right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceMatrix {
    pub m: Matrix4<f64>,
    pub b_rhs: Vector4<C64>,
    pub a_coeffs: Vector4<C64>,
}

/// `M` for the given geometry; `det M = 12 ℓ⁴`.
pub fn interface_matrix(g: &BeamGeometry) -> Matrix4<f64> {
    let l0 = g.ell0;
    let h = g.ell0 - g.ell;
    Matrix4::new(
        l0.powi(3),
        l0 * l0,
        -h.powi(3),
        -h * h,
        3.0 * l0 * l0,
        2.0 * l0,
        -3.0 * h * h,
        -2.0 * h,
        6.0 * l0,
        2.0,
        -6.0 * h,
        -2.0,
        6.0,
        0.0,
        -6.0,
        0.0,
    )
}

/// Exact inverse evaluated on its own pair of Chebyshev grids.
#[derive(Debug, Clone)]
pub struct InverseOracle {
    pub geometry: BeamGeometry,
    pub left: SubdomainGrid,
    pub right: SubdomainGrid,
    int_left: RMat,
    int_right: RMat,
}

impl InverseOracle {
    pub fn new(geometry: BeamGeometry, n: usize) -> Result<Self, InverseError> {
        let left = build_grid(n, 0.0, geometry.ell0)?;
        let right = build_grid(n, geometry.ell0, geometry.ell)?;
        Ok(Self {
            int_left: left.cumulative_from_left(),
            int_right: right.cumulative_from_right(),
            geometry,
            left,
            right,
        })
    }

    fn check_len(&self, grid: &SubdomainGrid, x: &CVec) -> Result<(), InverseError> {
        if x.len() != grid.len() {
            return Err(InverseError::GridMismatch {
                want: grid.len(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `[p, p', p'', p''']` at the left nodes.
    fn p_stack(&self, v_hat: &CVec) -> [CVec; 4] {
        let p3 = -real_mul(&self.int_left, v_hat);
        let p2 = real_mul(&self.int_left, &p3);
        let p1 = real_mul(&self.int_left, &p2);
        let p0 = real_mul(&self.int_left, &p1);
        [p0, p1, p2, p3]
    }

    /// `[q, q', q'', q''']` at the right nodes.
    fn q_stack(&self, w_hat_xx: &CVec, wt_hat: &CVec) -> [CVec; 4] {
        let q3 = real_mul(&self.int_right, &(w_hat_xx - wt_hat));
        let q2 = real_mul(&self.int_right, &q3);
        let q1 = real_mul(&self.int_right, &q2);
        let q0 = real_mul(&self.int_right, &q1);
        [q0, q1, q2, q3]
    }

    /// `p(x) = −∫₀ˣ∫₀ʸ∫₀ʳ∫₀ˢ V̂` at arbitrary points of `[0, ℓ₀]`.
    pub fn quad_p(&self, v_hat: &CVec, x: &[f64]) -> Result<CVec, InverseError> {
        self.check_len(&self.left, v_hat)?;
        let [p, ..] = self.p_stack(v_hat);
        Ok(real_mul(&self.left.interp_matrix(x), &p))
    }

    /// `q(x) = ∫_ℓˣ∫_ℓʸ∫_ℓʳ∫_ℓˢ (ŵ_xx − Ŵ)` at arbitrary points of `[ℓ₀, ℓ]`.
    pub fn quad_q(&self, w_hat_xx: &CVec, wt_hat: &CVec, x: &[f64]) -> Result<CVec, InverseError> {
        self.check_len(&self.right, w_hat_xx)?;
        self.check_len(&self.right, wt_hat)?;
        let [q, ..] = self.q_stack(w_hat_xx, wt_hat);
        Ok(real_mul(&self.right.interp_matrix(x), &q))
    }

    fn check_input(&self, z_hat: &StateVector, tol: f64) -> Result<(), InverseError> {
        let r = check_domain_membership(z_hat, Membership::StateSpace, &self.left, &self.right)
            .map_err(|e| InverseError::GridMismatch {
                want: e.want_left,
                got: e.got_left,
            })?;
        let size = max_abs(&z_hat.stacked()).max(1.0);
        for (i, &res) in r.iter().enumerate() {
            if res > tol * size {
                return Err(InverseError::ConstraintViolation {
                    name: CONSTRAINT_NAMES[i],
                    residual: res,
                });
            }
        }
        Ok(())
    }

    /// Interface system for `ẑ`, solved.
    pub fn interface_system(&self, z_hat: &StateVector) -> Result<InterfaceMatrix, InverseError> {
        let (p, q) = self.pq(z_hat);
        self.solve_system(z_hat, &p, &q)
    }

    fn pq(&self, z_hat: &StateVector) -> ([CVec; 4], [CVec; 4]) {
        let w_xx = real_mul(&self.right.d2, &z_hat.w);
        (self.p_stack(&z_hat.vt), self.q_stack(&w_xx, &z_hat.wt))
    }

    fn solve_system(
        &self,
        z_hat: &StateVector,
        p: &[CVec; 4],
        q: &[CVec; 4],
    ) -> Result<InterfaceMatrix, InverseError> {
        let last = self.left.len() - 1;
        let w_hat_x: C64 = self
            .right
            .trace_row(1, self.geometry.ell0)
            .iter()
            .zip(z_hat.w.iter())
            .map(|(a, b)| b * *a)
            .sum();
        let mut b = Vector4::from_fn(|k, _| q[k][0] - p[k][last]);
        b[3] -= w_hat_x;
        let m = interface_matrix(&self.geometry);
        let lu = m.map(|v| Complex::new(v, 0.0)).lu();
        let a = lu.solve(&b).ok_or(InverseError::SingularInterface)?;
        Ok(InterfaceMatrix {
            m,
            b_rhs: b,
            a_coeffs: a,
        })
    }

    /// `𝔸⁻¹ ẑ` at the oracle nodes. `tol` bounds the state-space constraint
    /// residuals of the input, relative to its largest sample.
    pub fn exact_inverse(
        &self,
        z_hat: &StateVector,
        tol: f64,
    ) -> Result<StateVector, InverseError> {
        self.check_input(z_hat, tol)?;
        let (p, q) = self.pq(z_hat);
        let sys = self.solve_system(z_hat, &p, &q)?;
        let a = sys.a_coeffs;
        let l = self.geometry.ell;
        let v = CVec::from_iterator(
            self.left.len(),
            self.left
                .nodes
                .iter()
                .zip(p[0].iter())
                .map(|(&x, &pv)| a[0] * x.powi(3) + a[1] * x * x + pv),
        );
        let w = CVec::from_iterator(
            self.right.len(),
            self.right
                .nodes
                .iter()
                .zip(q[0].iter())
                .map(|(&x, &qv)| a[2] * (x - l).powi(3) + a[3] * (x - l).powi(2) + qv),
        );
        Ok(StateVector {
            v,
            vt: z_hat.v.clone(),
            w,
            wt: z_hat.w.clone(),
        })
    }
}

/// `‖A_h⁻¹ ẑ − 𝔸⁻¹ ẑ‖_ℋ / ‖ẑ‖_ℋ` for a smooth right-hand side, measured on the
/// oracle's core coefficients (the discrete solution is zero-padded into the
/// finer layout).
pub fn discrete_vs_exact(
    op: &DiscreteOperator,
    oracle: &InverseOracle,
    oracle_core: &CoreSpace,
    z_hat: &SmoothState,
) -> Result<f64, InverseError> {
    let fine = z_hat.sample(&oracle.left, &oracle.right);
    let exact = oracle_core.from_state(&oracle.exact_inverse(&fine, 1e-8)?);
    let c_hat = op.project(&z_hat.sample(&op.core.left, &op.core.right));
    let c = Lu::factor(&to_complex(&op.a_reduced))
        .map_err(|_| InverseError::SingularDiscrete)?
        .solve(&c_hat);
    let y = op
        .core
        .layout
        .transfer(&op.lift_core(&c), &oracle_core.layout);
    let den = oracle_core.from_state(&fine).norm();
    Ok((y - exact).norm() / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::within;

    fn geom() -> BeamGeometry {
        BeamGeometry::new(0.5, 1.0).unwrap()
    }

    fn cv(grid: &SubdomainGrid, f: impl Fn(f64) -> f64) -> CVec {
        CVec::from_iterator(
            grid.len(),
            grid.nodes.iter().map(|&x| Complex::new(f(x), 0.0)),
        )
    }

    #[test]
    fn determinant_is_twelve_ell_to_the_fourth() {
        assert!((interface_matrix(&geom()).determinant() - 12.0).abs() <= 1e-10 * 12.0);
        let g = BeamGeometry::new(0.7, 2.0).unwrap();
        assert!((interface_matrix(&g).determinant() - 192.0).abs() <= 1e-10 * 192.0);
    }

    #[test]
    fn p_of_constant_and_linear() {
        let o = InverseOracle::new(geom(), 24).unwrap();
        let xs: Vec<f64> = (0..=20).map(|k| 0.5 * k as f64 / 20.0).collect();
        let zero = o.quad_p(&cv(&o.left, |_| 0.0), &xs).unwrap();
        assert!(zero.iter().all(|v| v.norm() == 0.0));
        let p = o.quad_p(&cv(&o.left, |_| 1.0), &xs).unwrap();
        for (x, v) in xs.iter().zip(p.iter()) {
            assert!((v.re + x.powi(4) / 24.0).abs() <= 1e-11);
        }
        let p = o.quad_p(&cv(&o.left, |x| x), &xs).unwrap();
        for (x, v) in xs.iter().zip(p.iter()) {
            assert!((v.re + x.powi(5) / 120.0).abs() <= 1e-11);
        }
    }

    #[test]
    fn q_of_constants() {
        let o = InverseOracle::new(geom(), 24).unwrap();
        let xs: Vec<f64> = (0..=20).map(|k| 0.5 + 0.5 * k as f64 / 20.0).collect();
        let one = cv(&o.right, |_| 1.0);
        let zero = cv(&o.right, |_| 0.0);
        assert!(o
            .quad_q(&zero, &zero, &xs)
            .unwrap()
            .iter()
            .all(|v| v.norm() == 0.0));
        let q1 = o.quad_q(&one, &zero, &xs).unwrap();
        let q2 = o.quad_q(&zero, &one, &xs).unwrap();
        for (i, &x) in xs.iter().enumerate() {
            let want = (x - 1.0).powi(4) / 24.0;
            assert!((q1[i].re - want).abs() <= 1e-11);
            assert!((q2[i].re + want).abs() <= 1e-11);
        }
        assert!(o
            .quad_q(&cv(&o.left, |_| 0.0).rows(0, 5).into_owned(), &zero, &xs)
            .is_err());
    }

    #[test]
    fn zero_maps_to_zero() {
        let o = InverseOracle::new(geom(), 16).unwrap();
        let z = o.exact_inverse(&StateVector::zeros(16, 16), 1e-10).unwrap();
        assert_eq!(z, StateVector::zeros(16, 16));
    }

    #[test]
    fn unit_velocity_load_has_polynomial_inverse() {
        // ẑ = (0, 1, 0, 0): v = a₁x³ + a₂x² − x⁴/24, w = a₃(x−ℓ)³ + a₄(x−ℓ)²
        let g = geom();
        let o = InverseOracle::new(g, 20).unwrap();
        let mut zh = StateVector::zeros(20, 20);
        zh.vt = cv(&o.left, |_| 1.0);
        let sys = o.interface_system(&zh).unwrap();
        let a: Vec<f64> = sys.a_coeffs.iter().map(|c| c.re).collect();
        let (l0, l) = (g.ell0, g.ell);
        let h = l0 - l;
        let v = [
            a[0] * l0.powi(3) + a[1] * l0 * l0 - l0.powi(4) / 24.0,
            3.0 * a[0] * l0 * l0 + 2.0 * a[1] * l0 - l0.powi(3) / 6.0,
            6.0 * a[0] * l0 + 2.0 * a[1] - l0 * l0 / 2.0,
            6.0 * a[0] - l0,
        ];
        let w = [
            a[2] * h.powi(3) + a[3] * h * h,
            3.0 * a[2] * h * h + 2.0 * a[3] * h,
            6.0 * a[2] * h + 2.0 * a[3],
            6.0 * a[2],
        ];
        // W ≡ 0, so all four interface conditions are plain equalities
        for k in 0..4 {
            assert!((v[k] - w[k]).abs() < 1e-11, "derivative {k}");
        }
        let z = o.exact_inverse(&zh, 1e-10).unwrap();
        for (i, &x) in o.left.nodes.iter().enumerate() {
            let want = a[0] * x.powi(3) + a[1] * x * x - x.powi(4) / 24.0;
            assert!((z.v[i].re - want).abs() < 1e-12);
        }
        let r =
            check_domain_membership(&z, Membership::GeneratorDomain, &o.left, &o.right).unwrap();
        assert!(within(&r, 1e-9), "{r:?}");
        // −v'''' = 1 on the left
        let v4 = real_mul(&o.left.d4, &z.v);
        assert!(v4.iter().all(|c| (c.re + 1.0).abs() < 1e-6));
    }

    #[test]
    fn inverse_is_linear() {
        let g = geom();
        let o = InverseOracle::new(g, 24).unwrap();
        let bump = |x: f64| x * x * (1.0 - x).powi(2);
        let mk = |s: f64| {
            StateVector::sample(
                &o.left,
                &o.right,
                move |x| bump(x) * (1.0 + s * x),
                move |x| (s * x).cos(),
                move |x| bump(x) * (1.0 + s * x),
                move |x| (s + x).sin(),
            )
        };
        let (z1, z2) = (mk(0.3), mk(-1.1));
        let (al, be) = (Complex::new(0.4, -2.0), Complex::new(1.5, 0.25));
        let comb = StateVector::from_stacked(&(z1.stacked() * al + z2.stacked() * be), 24, 24);
        let lhs = o.exact_inverse(&comb, 1e-9).unwrap().stacked();
        let rhs = o.exact_inverse(&z1, 1e-9).unwrap().stacked() * al
            + o.exact_inverse(&z2, 1e-9).unwrap().stacked() * be;
        assert!(max_abs(&(&lhs - &rhs)) <= 1e-10 * max_abs(&rhs));
    }

    #[test]
    fn rejects_inputs_outside_the_state_space() {
        let o = InverseOracle::new(geom(), 16).unwrap();
        let mut z = StateVector::zeros(16, 16);
        z.v = cv(&o.left, |_| 1.0);
        assert!(matches!(
            o.exact_inverse(&z, 1e-10),
            Err(InverseError::ConstraintViolation { name: "v(0)", .. })
        ));
    }
}
