//! Two-subdomain spectral realization of the generator.
//!
//! Each subdomain carries a Chebyshev–Lobatto grid for pointwise work (traces,
//! nodal states, constraint functionals). The generator itself is assembled on
//! a Legendre *core space*: on `(0, ℓ₀)` the unknowns are the orthonormal
//! Legendre coefficients of `v_xx` (degree `n−3`) and of `V` (degree `n−1`);
//! likewise `w_xx` and `W` on `(ℓ₀, ℓ)`. The displacements are recovered by
//! double integration from the clamped ends, so `v(0) = v_x(0) = w(ℓ) = w_x(ℓ) = 0`
//! hold by construction and the ℋ-inner product is the Euclidean one.
//!
//! The remaining ten constraints of the generator domain are eliminated with
//! an orthonormal null-space basis `Q`, and the generator acts on constrained
//! coordinates `c` through its weak form, which makes the discrete dissipation
//! identity hold to roundoff.

use std::io::{self, Write};
use std::ops::Range;

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::config::{BeamGeometry, RunConfig};
use crate::grid::{build_grid, GridError, SubdomainGrid};
use crate::legendre::LegendreBasis;
use crate::linalg::{normalize_rows, numerical_rank, orthonormal_complement};
use crate::state::{constraint_functionals, StateVector};
use crate::{CVec, RMat};

/// Singular values below this fraction of the largest count as rank loss.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, thiserror::Error)]
pub enum AssemblyError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("constraint functionals are rank deficient: rank {found} of {expected}")]
    RankDeficient { found: usize, expected: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Block offsets of the stacked nodal vector `v | V | w | W`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexMap {
    pub v: Range<usize>,
    pub vt: Range<usize>,
    pub w: Range<usize>,
    pub wt: Range<usize>,
}

impl IndexMap {
    pub fn new(n_left: usize, n_right: usize) -> Self {
        let a = n_left;
        let b = 2 * n_left;
        let c = b + n_right;
        Self {
            v: 0..a,
            vt: a..b,
            w: b..c,
            wt: c..c + n_right,
        }
    }

    pub fn dim(&self) -> usize {
        self.wt.end
    }
}

/// Block offsets of core coefficients `α | β | γ | δ`
/// (`v_xx`, `V`, `w_xx`, `W` in orthonormal Legendre bases).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoreLayout {
    pub n_left: usize,
    pub n_right: usize,
    pub alpha: Range<usize>,
    pub beta: Range<usize>,
    pub gamma: Range<usize>,
    pub delta: Range<usize>,
}

impl CoreLayout {
    pub fn new(n_left: usize, n_right: usize) -> Self {
        let a = n_left - 2;
        let b = a + n_left;
        let c = b + n_right - 2;
        Self {
            n_left,
            n_right,
            alpha: 0..a,
            beta: a..b,
            gamma: b..c,
            delta: c..c + n_right,
        }
    }

    pub fn dim(&self) -> usize {
        self.delta.end
    }

    /// Zero-pads (or truncates) each block into a layout of a different size.
    pub fn transfer(&self, y: &CVec, to: &CoreLayout) -> CVec {
        let mut out = CVec::zeros(to.dim());
        for (src, dst) in [
            (&self.alpha, &to.alpha),
            (&self.beta, &to.beta),
            (&self.gamma, &to.gamma),
            (&self.delta, &to.delta),
        ] {
            let k = src.len().min(dst.len());
            out.rows_mut(dst.start, k).copy_from(&y.rows(src.start, k));
        }
        out
    }
}

/// Legendre core space on both subdomains together with its nodal lifts.
#[derive(Debug, Clone)]
pub struct CoreSpace {
    pub geometry: BeamGeometry,
    pub left: SubdomainGrid,
    pub right: SubdomainGrid,
    pub left_basis: LegendreBasis,
    pub right_basis: LegendreBasis,
    pub layout: CoreLayout,
    /// Legendre coefficient derivative matrices (n × n).
    pub deriv_left: RMat,
    pub deriv_right: RMat,
    /// Nodal samples of `v`, `v_x`, `V` from `α`, `β`.
    lift_v: RMat,
    lift_vx: RMat,
    lift_vt: RMat,
    lift_w: RMat,
    lift_wx: RMat,
    lift_wt: RMat,
    /// Nodal values -> Legendre coefficients (exact for the interpolant).
    project_left: RMat,
    project_right: RMat,
}

fn legendre_projector(grid: &SubdomainGrid, basis: &LegendreBasis) -> RMat {
    let n = grid.len();
    let (xq, wq) = basis.quadrature(n);
    let phi = basis.sample_matrix(&xq, n);
    let interp = grid.interp_matrix(&xq);
    let mut weighted = interp;
    for (i, w) in wq.iter().enumerate() {
        let mut r = weighted.row_mut(i);
        r *= *w;
    }
    phi.transpose() * weighted
}

impl CoreSpace {
    pub fn new(geometry: BeamGeometry, n_left: usize, n_right: usize) -> Result<Self, GridError> {
        let left = build_grid(n_left, 0.0, geometry.ell0)?;
        let right = build_grid(n_right, geometry.ell0, geometry.ell)?;
        let left_basis = LegendreBasis::new(0.0, geometry.ell0);
        let right_basis = LegendreBasis::new(geometry.ell0, geometry.ell);

        let phi_l = left_basis.sample_matrix(&left.nodes, n_left);
        let phi_r = right_basis.sample_matrix(&right.nodes, n_right);
        let il = left.cumulative_from_left();
        let ir = right.cumulative_from_right();
        let phi_l2 = phi_l.columns(0, n_left - 2).into_owned();
        let phi_r2 = phi_r.columns(0, n_right - 2).into_owned();
        let lift_vx = &il * &phi_l2;
        let lift_v = &il * &lift_vx;
        let lift_wx = &ir * &phi_r2;
        let lift_w = &ir * &lift_wx;

        Ok(Self {
            geometry,
            layout: CoreLayout::new(n_left, n_right),
            deriv_left: left_basis.derivative_matrix(n_left),
            deriv_right: right_basis.derivative_matrix(n_right),
            project_left: legendre_projector(&left, &left_basis),
            project_right: legendre_projector(&right, &right_basis),
            left,
            right,
            left_basis,
            right_basis,
            lift_v,
            lift_vx,
            lift_vt: phi_l,
            lift_w,
            lift_wx,
            lift_wt: phi_r,
        })
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    /// Linear functional (as a row over core coefficients) for one trace.
    pub fn trace(&self, t: Trace) -> Vec<f64> {
        let lay = &self.layout;
        let (nl, nr) = (lay.n_left, lay.n_right);
        let mut row = vec![0.0; self.dim()];
        let mut put = |range: &Range<usize>, vals: Vec<f64>| {
            for (k, v) in vals.into_iter().enumerate() {
                row[range.start + k] += v;
            }
        };
        let lb = &self.left_basis;
        let rb = &self.right_basis;
        let last_l = nl - 1;
        match t {
            Trace::LeftValue => put(
                &lay.alpha,
                self.lift_v.row(last_l).iter().copied().collect(),
            ),
            Trace::LeftSlope => put(
                &lay.alpha,
                self.lift_vx.row(last_l).iter().copied().collect(),
            ),
            Trace::LeftCurvature(at) => {
                put(&lay.alpha, lb.endpoint(at == End::Interface, 0, nl - 2))
            }
            Trace::LeftShear(at) => put(&lay.alpha, lb.endpoint(at == End::Interface, 1, nl - 2)),
            Trace::LeftVelocity(at, d) => put(&lay.beta, lb.endpoint(at == End::Interface, d, nl)),
            Trace::RightValue => put(&lay.gamma, self.lift_w.row(0).iter().copied().collect()),
            Trace::RightSlope => put(&lay.gamma, self.lift_wx.row(0).iter().copied().collect()),
            Trace::RightCurvature => put(&lay.gamma, rb.endpoint(false, 0, nr - 2)),
            Trace::RightShear => put(&lay.gamma, rb.endpoint(false, 1, nr - 2)),
            Trace::RightVelocity(at, d) => put(&lay.delta, rb.endpoint(at == End::Outer, d, nr)),
        }
        row
    }

    /// The ten constraints not built into the core space, as rows.
    pub fn constraint_rows(&self) -> RMat {
        use Trace::*;
        let n = self.dim();
        let diff =
            |a: Vec<f64>, b: Vec<f64>| a.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>();
        let rows: Vec<Vec<f64>> = vec![
            diff(self.trace(LeftValue), self.trace(RightValue)),
            diff(self.trace(LeftSlope), self.trace(RightSlope)),
            self.trace(LeftVelocity(End::Outer, 0)),
            self.trace(LeftVelocity(End::Outer, 1)),
            self.trace(RightVelocity(End::Outer, 0)),
            self.trace(RightVelocity(End::Outer, 1)),
            diff(
                self.trace(LeftVelocity(End::Interface, 0)),
                self.trace(RightVelocity(End::Interface, 0)),
            ),
            diff(
                self.trace(LeftVelocity(End::Interface, 1)),
                self.trace(RightVelocity(End::Interface, 1)),
            ),
            diff(
                self.trace(LeftCurvature(End::Interface)),
                self.trace(RightCurvature),
            ),
            {
                let mut r = diff(
                    self.trace(LeftShear(End::Interface)),
                    self.trace(RightShear),
                );
                for (a, b) in r
                    .iter_mut()
                    .zip(self.trace(RightVelocity(End::Interface, 1)))
                {
                    *a += b;
                }
                r
            },
        ];
        DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j])
    }

    /// Nodal samples of the state with core coefficients `y`.
    pub fn to_state(&self, y: &CVec) -> StateVector {
        let lay = &self.layout;
        StateVector {
            v: real_mul(
                &self.lift_v,
                &y.rows(lay.alpha.start, lay.alpha.len()).into_owned(),
            ),
            vt: real_mul(
                &self.lift_vt,
                &y.rows(lay.beta.start, lay.beta.len()).into_owned(),
            ),
            w: real_mul(
                &self.lift_w,
                &y.rows(lay.gamma.start, lay.gamma.len()).into_owned(),
            ),
            wt: real_mul(
                &self.lift_wt,
                &y.rows(lay.delta.start, lay.delta.len()).into_owned(),
            ),
        }
    }

    /// Real nodal lift matrix `E` with `stacked(to_state(y)) = E y`.
    pub fn lift_matrix(&self) -> RMat {
        let lay = &self.layout;
        let idx = IndexMap::new(lay.n_left, lay.n_right);
        let mut e = DMatrix::<f64>::zeros(idx.dim(), lay.dim());
        for (rows, cols, m) in [
            (&idx.v, &lay.alpha, &self.lift_v),
            (&idx.vt, &lay.beta, &self.lift_vt),
            (&idx.w, &lay.gamma, &self.lift_w),
            (&idx.wt, &lay.delta, &self.lift_wt),
        ] {
            e.view_mut((rows.start, cols.start), (rows.len(), cols.len()))
                .copy_from(m);
        }
        e
    }

    /// Core coefficients of a nodal state: Legendre coefficients of `v_xx`,
    /// `V`, `w_xx`, `W`. The clamped-end values of `v` and `w` are not
    /// representable and are dropped.
    pub fn from_state(&self, z: &StateVector) -> CVec {
        let lay = &self.layout;
        let mut y = CVec::zeros(lay.dim());
        let vxx = real_mul(&self.left.d2, &z.v);
        let wxx = real_mul(&self.right.d2, &z.w);
        let a = real_mul(&self.project_left, &vxx);
        let b = real_mul(&self.project_left, &z.vt);
        let c = real_mul(&self.project_right, &wxx);
        let d = real_mul(&self.project_right, &z.wt);
        y.rows_mut(lay.alpha.start, lay.alpha.len())
            .copy_from(&a.rows(0, lay.alpha.len()));
        y.rows_mut(lay.beta.start, lay.beta.len()).copy_from(&b);
        y.rows_mut(lay.gamma.start, lay.gamma.len())
            .copy_from(&c.rows(0, lay.gamma.len()));
        y.rows_mut(lay.delta.start, lay.delta.len()).copy_from(&d);
        y
    }

    /// Legendre coefficients of `W_x` from core coefficients.
    pub fn wt_x(&self, y: &CVec) -> CVec {
        let lay = &self.layout;
        real_mul(
            &self.deriv_right,
            &y.rows(lay.delta.start, lay.delta.len()).into_owned(),
        )
    }

    /// Weak-form generator on core coefficients: `φᴴ K y = ⟨𝔸z, φ⟩_ℋ` for
    /// states `z, φ` satisfying the constraints.
    pub fn weak_generator(&self) -> RMat {
        let lay = &self.layout;
        let (nl, nr) = (lay.n_left, lay.n_right);
        let dl2 = &self.deriv_left * &self.deriv_left;
        let dr2 = &self.deriv_right * &self.deriv_right;
        let l2l = dl2.rows(0, nl - 2).into_owned();
        let l2r = dr2.rows(0, nr - 2).into_owned();
        let mut k = DMatrix::<f64>::zeros(lay.dim(), lay.dim());
        put_block(&mut k, &lay.alpha, &lay.beta, &l2l);
        put_block(&mut k, &lay.beta, &lay.alpha, &(-l2l.transpose()));
        put_block(&mut k, &lay.gamma, &lay.delta, &l2r);
        put_block(&mut k, &lay.delta, &lay.gamma, &(-l2r.transpose()));
        let damp = self.deriv_right.transpose() * &self.deriv_right;
        put_block(&mut k, &lay.delta, &lay.delta, &(-damp));
        k
    }

    /// Strong-form generator on core coefficients, exact for polynomial states:
    /// `(V, −v_xxxx, W, −w_xxxx + W_xx)` re-expanded in the core bases.
    pub fn strong_generator(&self) -> RMat {
        let lay = &self.layout;
        let (nl, nr) = (lay.n_left, lay.n_right);
        let dl2 = &self.deriv_left * &self.deriv_left;
        let dr2 = &self.deriv_right * &self.deriv_right;
        let mut k = DMatrix::<f64>::zeros(lay.dim(), lay.dim());
        put_block(
            &mut k,
            &lay.alpha,
            &lay.beta,
            &dl2.rows(0, nl - 2).into_owned(),
        );
        let vxxxx = -dl2.view((0, 0), (nl - 2, nl - 2)).into_owned();
        k.view_mut((lay.beta.start, lay.alpha.start), (nl - 2, nl - 2))
            .copy_from(&vxxxx);
        put_block(
            &mut k,
            &lay.gamma,
            &lay.delta,
            &dr2.rows(0, nr - 2).into_owned(),
        );
        let wxxxx = -dr2.view((0, 0), (nr - 2, nr - 2)).into_owned();
        k.view_mut((lay.delta.start, lay.gamma.start), (nr - 2, nr - 2))
            .copy_from(&wxxxx);
        put_block(&mut k, &lay.delta, &lay.delta, &dr2);
        k
    }
}

/// Endpoint selector for traces on either subdomain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum End {
    /// `x = 0` on the left subdomain, `x = ℓ` on the right one.
    Outer,
    Interface,
}

/// Traces available as linear functionals of the core coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
/// `LeftValue`, `LeftSlope` and the `Right*` displacement traces are taken at ℓ₀;
/// the clamped ends carry no displacement information.
pub enum Trace {
    LeftValue,
    LeftSlope,
    LeftCurvature(End),
    LeftShear(End),
    /// `V` or `V_x` (second field is the derivative order).
    LeftVelocity(End, usize),
    RightValue,
    RightSlope,
    RightCurvature,
    RightShear,
    RightVelocity(End, usize),
}

fn put_block(k: &mut RMat, rows: &Range<usize>, cols: &Range<usize>, m: &RMat) {
    k.view_mut((rows.start, cols.start), (rows.len(), cols.len()))
        .copy_from(m);
}

/// Real matrix times complex vector.
pub fn real_mul(a: &RMat, x: &CVec) -> CVec {
    let re = a * x.map(|z| z.re);
    let im = a * x.map(|z| z.im);
    CVec::from_iterator(
        re.len(),
        re.iter().zip(im.iter()).map(|(&r, &i)| Complex::new(r, i)),
    )
}

/// The assembled discrete generator `A_h` and everything needed to interpret
/// its coordinates.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub core: CoreSpace,
    /// Core coefficients of the constrained basis (orthonormal columns).
    pub q: RMat,
    /// Nodal generator on the unconstrained sample space `v | V | w | W`.
    pub a_full: RMat,
    /// The 14 nodal constraint functionals.
    pub constraint_matrix: RMat,
    pub constraint_rank: usize,
    /// Nodal samples of the constrained basis states (columns).
    pub constraint_basis: RMat,
    /// Generator on constrained coordinates.
    pub a_reduced: RMat,
    /// ℋ Gram matrix of the constrained basis.
    pub gram: RMat,
    pub index_map: IndexMap,
}

/// Assembles the discrete generator for the configured geometry and node counts.
pub fn assemble_generator(cfg: &RunConfig) -> Result<DiscreteOperator, AssemblyError> {
    assemble(cfg.geometry, cfg.n_left, cfg.n_right)
}

pub fn assemble(
    geometry: BeamGeometry,
    n_left: usize,
    n_right: usize,
) -> Result<DiscreteOperator, AssemblyError> {
    let core = CoreSpace::new(geometry, n_left, n_right)?;

    let nodal = constraint_functionals(&core.left, &core.right);
    let (nodal_rank, _) = numerical_rank(&normalize_rows(&nodal), RANK_TOL);
    if nodal_rank < nodal.nrows() {
        return Err(AssemblyError::RankDeficient {
            found: nodal_rank,
            expected: nodal.nrows(),
        });
    }

    let rows = normalize_rows(&core.constraint_rows());
    let (rank, _) = numerical_rank(&rows, RANK_TOL);
    if rank < rows.nrows() {
        return Err(AssemblyError::RankDeficient {
            found: rank,
            expected: rows.nrows(),
        });
    }
    let range = rows.transpose().qr().q();
    let q = orthonormal_complement(&range);

    let k = core.weak_generator();
    let a_reduced = q.transpose() * &k * &q;
    let gram = q.transpose() * &q;
    let constraint_basis = core.lift_matrix() * &q;

    Ok(DiscreteOperator {
        a_full: nodal_generator(&core.left, &core.right),
        constraint_matrix: nodal,
        constraint_rank: nodal_rank,
        constraint_basis,
        a_reduced,
        gram,
        index_map: IndexMap::new(n_left, n_right),
        q,
        core,
    })
}

/// `(V, −v_xxxx, W, −w_xxxx + W_xx)` on stacked nodal samples.
pub fn nodal_generator(left: &SubdomainGrid, right: &SubdomainGrid) -> RMat {
    let idx = IndexMap::new(left.len(), right.len());
    let mut a = DMatrix::<f64>::zeros(idx.dim(), idx.dim());
    let eye = |n| DMatrix::<f64>::identity(n, n);
    put_block(&mut a, &idx.v, &idx.vt, &eye(left.len()));
    put_block(&mut a, &idx.vt, &idx.v, &(-&left.d4));
    put_block(&mut a, &idx.w, &idx.wt, &eye(right.len()));
    put_block(&mut a, &idx.wt, &idx.w, &(-&right.d4));
    put_block(&mut a, &idx.wt, &idx.wt, &right.d2);
    a
}

impl DiscreteOperator {
    pub fn dim(&self) -> usize {
        self.a_reduced.nrows()
    }

    pub fn geometry(&self) -> BeamGeometry {
        self.core.geometry
    }

    pub fn n_left(&self) -> usize {
        self.core.layout.n_left
    }

    pub fn n_right(&self) -> usize {
        self.core.layout.n_right
    }

    fn check(&self, c: &CVec) -> Result<(), AssemblyError> {
        if c.len() != self.dim() {
            return Err(AssemblyError::Dimension {
                expected: self.dim(),
                got: c.len(),
            });
        }
        Ok(())
    }

    /// Core coefficients of the state with constrained coordinates `c`.
    pub fn lift_core(&self, c: &CVec) -> CVec {
        real_mul(&self.q, c)
    }

    /// Nodal samples of the state with constrained coordinates `c`.
    pub fn lift(&self, c: &CVec) -> StateVector {
        self.core.to_state(&self.lift_core(c))
    }

    /// ℋ-orthogonal projection of core coefficients onto constrained coordinates.
    pub fn restrict_core(&self, y: &CVec) -> CVec {
        real_mul(&self.q.transpose(), y)
    }

    /// ℋ-orthogonal projection of a nodal state onto constrained coordinates.
    pub fn project(&self, z: &StateVector) -> CVec {
        self.restrict_core(&self.core.from_state(z))
    }

    /// `A_h c`.
    pub fn apply(&self, c: &CVec) -> CVec {
        real_mul(&self.a_reduced, c)
    }

    /// `⟨a, b⟩_G = bᴴ G a`.
    pub fn inner(&self, a: &CVec, b: &CVec) -> Complex<f64> {
        let ga = real_mul(&self.gram, a);
        b.iter().zip(ga.iter()).map(|(x, y)| x.conj() * y).sum()
    }

    /// Nodal Gram matrix `blockdiag(D2ᵀ M D2, M, D2ᵀ M D2, M)` realizing the
    /// ℋ-norm of stacked nodal samples.
    pub fn nodal_gram(&self) -> RMat {
        let (l, r) = (&self.core.left, &self.core.right);
        let ml = l.mass_matrix();
        let mr = r.mass_matrix();
        let mut g = DMatrix::<f64>::zeros(self.index_map.dim(), self.index_map.dim());
        put_block(
            &mut g,
            &self.index_map.v,
            &self.index_map.v,
            &(l.d2.transpose() * &ml * &l.d2),
        );
        put_block(&mut g, &self.index_map.vt, &self.index_map.vt, &ml);
        put_block(
            &mut g,
            &self.index_map.w,
            &self.index_map.w,
            &(r.d2.transpose() * &mr * &r.d2),
        );
        put_block(&mut g, &self.index_map.wt, &self.index_map.wt, &mr);
        g
    }

    /// True when both subdomains meet the resolution policy at `|λ|`.
    pub fn resolves(&self, lambda: f64) -> bool {
        let g = self.geometry();
        self.n_left() >= required_nodes(lambda, g.left_length())
            && self.n_right() >= required_nodes(lambda, g.right_length())
    }

    /// Dense text dump of `A_h`, `G` and the nodal constraint matrix.
    pub fn dump(&self, out: &mut impl Write) -> io::Result<()> {
        for (name, m) in [
            ("a_reduced", &self.a_reduced),
            ("gram", &self.gram),
            ("constraints", &self.constraint_matrix),
        ] {
            writeln!(out, "# {name} {} {}", m.nrows(), m.ncols())?;
            for i in 0..m.nrows() {
                let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:e}")).collect();
                writeln!(out, "{}", row.join(" "))?;
            }
        }
        Ok(())
    }
}

/// `sqrt(cᴴ G c)`.
pub fn discrete_h_norm(op: &DiscreteOperator, c: &CVec) -> Result<f64, AssemblyError> {
    op.check(c)?;
    Ok(op.inner(c, c).re.max(0.0).sqrt())
}

/// `‖W_x‖²_{L²(ℓ₀,ℓ)}` of the lifted state (exact for the discrete state).
pub fn dissipation_functional(op: &DiscreteOperator, c: &CVec) -> Result<f64, AssemblyError> {
    op.check(c)?;
    Ok(op.core.wt_x(&op.lift_core(c)).norm_squared())
}

/// Minimum nodes per subdomain so that oscillations at wavenumber `|λ|^{1/2}`
/// are resolved.
pub fn required_nodes(lambda: f64, length: f64) -> usize {
    4 * (lambda.abs().sqrt() * length / std::f64::consts::PI).ceil() as usize + 16
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eig_dense;
    use crate::linalg::to_complex;
    use crate::state::{check_domain_membership, within, Membership};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn geom() -> BeamGeometry {
        BeamGeometry::new(0.5, 1.0).unwrap()
    }

    fn random_c(n: usize, rng: &mut ChaCha8Rng) -> CVec {
        CVec::from_fn(n, |_, _| {
            Complex::new(
                StandardNormal.sample(&mut *rng),
                StandardNormal.sample(&mut *rng),
            )
        })
    }

    #[test]
    fn quartic_fourth_derivative() {
        let op = assemble(geom(), 16, 16).unwrap();
        let n = 16;
        let mut x = CVec::zeros(op.index_map.dim());
        for (i, &xi) in op.core.left.nodes.iter().enumerate() {
            x[i] = Complex::new(xi.powi(4), 0.0);
        }
        let y = real_mul(&op.a_full, &x);
        for i in 0..n {
            assert!(
                (y[n + i] - Complex::new(-24.0, 0.0)).norm() < 1e-7,
                "{}",
                y[n + i]
            );
        }
    }

    #[test]
    fn constraint_rank_is_full() {
        let op = assemble(geom(), 16, 16).unwrap();
        assert_eq!(op.constraint_matrix.nrows(), 14);
        assert_eq!(op.constraint_rank, 14);
        assert_eq!(op.dim(), 4 * 16 - 14);
    }

    #[test]
    fn basis_states_satisfy_every_constraint() {
        let op = assemble(geom(), 20, 18).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let c = random_c(op.dim(), &mut rng);
            let z = op.lift(&c);
            let r = check_domain_membership(
                &z,
                Membership::GeneratorDomain,
                &op.core.left,
                &op.core.right,
            )
            .unwrap();
            let scale = c.norm() * 1e3;
            assert!(within(&r, 1e-9 * scale), "{r:?}");
        }
    }

    #[test]
    fn gram_is_identity_and_spd() {
        let op = assemble(geom(), 24, 24).unwrap();
        let eye = DMatrix::<f64>::identity(op.dim(), op.dim());
        assert!((&op.gram - eye).amax() < 1e-12);
        assert!(op.gram.clone().cholesky().is_some());
    }

    #[test]
    fn manufactured_norm_is_exact() {
        // v = x², w = A(x-ℓ)³ + B(x-ℓ)²; V = W = 0
        let (l0, l): (f64, f64) = (0.5, 1.0);
        let h = l0 - l;
        let det = 2.0 * h.powi(4) - 3.0 * h.powi(4);
        let a = (2.0 * l0 * l0 * h - 2.0 * l0 * h * h) / det;
        let b = (2.0 * l0 * h.powi(3) - 3.0 * l0 * l0 * h * h) / det;
        let op = assemble(geom(), 16, 16).unwrap();
        let z = StateVector::sample(
            &op.core.left,
            &op.core.right,
            |x| x * x,
            |_| 0.0,
            |x| a * (x - l).powi(3) + b * (x - l).powi(2),
            |_| 0.0,
        );
        // ∫ (6A s + 2B)² ds over s ∈ [h, 0]
        let prim = |s: f64| 12.0 * a * a * s.powi(3) + 12.0 * a * b * s * s + 4.0 * b * b * s;
        let exact = 4.0 * l0 + (prim(0.0) - prim(h));
        let y = op.core.from_state(&z);
        assert!((y.norm_squared() - exact).abs() < 1e-10 * exact);
        let g = op.nodal_gram();
        let s = z.stacked();
        let nodal = real_mul(&g, &s)
            .iter()
            .zip(s.iter())
            .map(|(p, q)| p * q.conj())
            .sum::<Complex<f64>>();
        assert!((nodal.re - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn dissipation_identity_holds() {
        let op = assemble(geom(), 32, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let c = random_c(op.dim(), &mut rng);
            let lhs = op.inner(&op.apply(&c), &c).re;
            let d = dissipation_functional(&op, &c).unwrap();
            let nn = discrete_h_norm(&op, &c).unwrap().powi(2);
            assert!((lhs + d).abs() <= 1e-8 * nn, "{lhs} {d} {nn}");
        }
    }

    #[test]
    fn norm_is_homogeneous() {
        let op = assemble(geom(), 16, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = random_c(op.dim(), &mut rng);
        let alpha = Complex::new(-1.7, 0.4);
        let n1 = discrete_h_norm(&op, &(&c * alpha)).unwrap();
        let n0 = discrete_h_norm(&op, &c).unwrap();
        assert!((n1 - alpha.norm() * n0).abs() < 1e-12 * n1);
        assert_eq!(discrete_h_norm(&op, &CVec::zeros(op.dim())).unwrap(), 0.0);
        assert!(discrete_h_norm(&op, &CVec::zeros(3)).is_err());
    }

    #[test]
    fn sine_velocity_dissipation() {
        // W = sin²(π s) on the right, s = (x-ℓ₀)/L: ∫ W_x² = π²/(2L)
        let op = assemble(geom(), 24, 40).unwrap();
        let (l0, len) = (0.5, 0.5);
        let pi = std::f64::consts::PI;
        let z = StateVector::sample(
            &op.core.left,
            &op.core.right,
            |_| 0.0,
            |_| 0.0,
            |_| 0.0,
            move |x| (pi * (x - l0) / len).sin().powi(2),
        );
        let y = op.core.from_state(&z);
        let got = op.core.wt_x(&y).norm_squared();
        let want = pi * pi / (2.0 * len);
        assert!((got - want).abs() < 1e-8 * want, "{got} {want}");
        let zero = CVec::zeros(op.dim());
        assert_eq!(dissipation_functional(&op, &zero).unwrap(), 0.0);
    }

    #[test]
    fn weak_and_strong_forms_agree_on_constrained_space() {
        let op = assemble(geom(), 20, 20).unwrap();
        let strong = op.q.transpose() * op.core.strong_generator() * &op.q;
        let scale = op.a_reduced.amax();
        assert!((&strong - &op.a_reduced).amax() < 1e-9 * scale);
    }

    #[test]
    fn generator_is_real_so_spectrum_is_conjugate_closed() {
        let op = assemble(geom(), 16, 16).unwrap();
        let eig = eig_dense(&to_complex(&op.a_reduced)).unwrap();
        for e in &eig {
            let partner = eig
                .iter()
                .map(|f| (f.value - e.value.conj()).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(partner < 1e-8 * e.value.norm().max(1.0));
        }
    }

    #[test]
    fn rightmost_eigenvalue_converges() {
        let rightmost = |n| {
            let op = assemble(geom(), n, n).unwrap();
            eig_dense(&to_complex(&op.a_reduced)).unwrap()[0].value
        };
        let a = rightmost(32);
        let b = rightmost(64);
        assert!((a - b).norm() < 1e-6 * b.norm(), "{a} {b}");
    }

    #[test]
    fn resolution_policy() {
        assert_eq!(required_nodes(0.0, 0.5), 16);
        assert_eq!(required_nodes(1e4, 0.5), 4 * 16 + 16);
        let op = assemble(geom(), 80, 80).unwrap();
        assert!(op.resolves(1e4));
        assert!(!op.resolves(1.1e4));
    }

    #[test]
    fn layout_transfer_pads_blocks() {
        let a = CoreLayout::new(10, 12);
        let b = CoreLayout::new(14, 16);
        let y = CVec::from_fn(a.dim(), |i, _| Complex::new(i as f64 + 1.0, 0.0));
        let up = a.transfer(&y, &b);
        assert_eq!(up.norm(), y.norm());
        assert_eq!(b.transfer(&up, &a), y);
    }
}
