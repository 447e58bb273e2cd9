//! Exact characteristic determinant for the eigenvalues of the generator.
//!
//! An eigenpair `𝔸z = ζz` has `V = ζv`, `W = ζw` with
//!
//! ```text
//! v'''' = −ζ² v              on (0, ℓ₀)
//! w'''' − ζ w'' + ζ² w = 0    on (ℓ₀, ℓ)
//! ```
//!
//! Both equations are solved with fundamental systems normalized at the outer
//! ends (`F_j` at `x = 0`, `G_j` at `x = ℓ`, with `j`-th derivative equal to one
//! and the other three initial derivatives zero). These are entire functions
//! of `ζ`, so the determinant has no branch cuts and the argument principle
//! applies. After scaling by positive factors only, all entries stay of order
//! one for `|ζ|` up to 10⁶.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::config::BeamGeometry;
use crate::{CMat, C64};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("ζ = 0 is excluded: zero is in the resolvent set (the generator is invertible)")]
    ZeroZeta,
    #[error("seed {seed} is outside the Newton basin: |D| = {det_abs:e}, local scale {scale:e}")]
    OutsideBasin { seed: C64, det_abs: f64, scale: f64 },
    #[error("Newton iteration from {seed} did not converge in {iterations} steps")]
    Diverged { seed: C64, iterations: usize },
    #[error("rectangle boundary passes through ζ = 0")]
    BoundaryThroughOrigin,
    #[error("rectangle is degenerate")]
    DegenerateRectangle,
    #[error("boundary argument could not be resolved near {at}")]
    Unresolved { at: C64 },
    #[error("winding number {winding} is not close to an integer")]
    NonInteger { winding: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedSource {
    DiscreteEigenvalue,
    GridScan,
}

impl SeedSource {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::DiscreteEigenvalue => "discrete-eigenvalue",
            Self::GridScan => "grid-scan",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicRoot {
    pub zeta: C64,
    pub det_abs: f64,
    pub newton_iters: usize,
    pub seed_source: SeedSource,
    /// Local determinant scale at the root (median `|D|` on a small circle).
    pub scale: f64,
}

/// Axis-aligned rectangle `[re.0, re.1] × [im.0, im.1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

impl Rect {
    pub fn new(re: (f64, f64), im: (f64, f64)) -> Self {
        Self { re, im }
    }

    pub fn around(center: C64, half: f64) -> Self {
        Self::new(
            (center.re - half, center.re + half),
            (center.im - half, center.im + half),
        )
    }

    pub fn contains(&self, z: C64) -> bool {
        z.re >= self.re.0 && z.re <= self.re.1 && z.im >= self.im.0 && z.im <= self.im.1
    }

    /// Counter-clockwise corners.
    fn corners(&self) -> [C64; 4] {
        [
            Complex::new(self.re.0, self.im.0),
            Complex::new(self.re.1, self.im.0),
            Complex::new(self.re.1, self.im.1),
            Complex::new(self.re.0, self.im.1),
        ]
    }
}

/// Power series is used below this value of `|√ζ|·(subinterval length)`.
const SERIES_LIMIT: f64 = 1.5;

struct Scaled {
    /// `F_j^{(k)}(ℓ₀)` (index `[k][j]`), times `exp(−m_L)`.
    left: [[C64; 4]; 4],
    /// `G_j^{(k)}(ℓ₀)` (index `[k][j]`), times `exp(−m_R)`.
    right: [[C64; 4]; 4],
    // exponential shifts, kept for the branch-consistency test
    #[allow(dead_code)]
    m_left: f64,
    #[allow(dead_code)]
    m_right: f64,
}

fn series_left(kappa: C64, x: f64) -> [C64; 4] {
    // F_j = Σ κ^m x^{4m+j}/(4m+j)!
    let mut out = [Complex::new(0.0, 0.0); 4];
    for (j, slot) in out.iter_mut().enumerate() {
        let mut term = Complex::new(x.powi(j as i32) / factorial(j), 0.0);
        let mut sum = term;
        let mut p = j;
        for _ in 0..200 {
            let denom = ((p + 1) * (p + 2) * (p + 3) * (p + 4)) as f64;
            term = term * kappa * x.powi(4) / denom;
            p += 4;
            sum += term;
            if term.norm() <= 1e-18 * sum.norm() {
                break;
            }
        }
        *slot = sum;
    }
    out
}

fn series_right(zeta: C64, s: f64) -> [C64; 4] {
    // G_j = Σ a_n s^n / n!, a_n = δ_{nj} (n < 4), a_{n+4} = ζ a_{n+2} − ζ² a_n
    let mut out = [Complex::new(0.0, 0.0); 4];
    let z2 = zeta * zeta;
    for (j, slot) in out.iter_mut().enumerate() {
        let mut a: Vec<C64> = (0..4)
            .map(|n| Complex::new(if n == j { 1.0 } else { 0.0 }, 0.0))
            .collect();
        let mut sum = Complex::new(0.0, 0.0);
        let mut pw = 1.0; // s^n / n!
        let mut small = 0;
        for n in 0..400 {
            if n >= 4 {
                let next = zeta * a[n - 2] - z2 * a[n - 4];
                a.push(next);
            }
            let term = a[n] * pw;
            sum += term;
            pw *= s / (n + 1) as f64;
            if n > j && term.norm() <= 1e-18 * sum.norm().max(1e-300) {
                small += 1;
                if small >= 4 {
                    break;
                }
            } else {
                small = 0;
            }
        }
        *slot = sum;
    }
    out
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Scaled values of both fundamental systems and their first three
/// derivatives at the interface. Accepts ζ = 0.
fn fundamental(geometry: &BeamGeometry, zeta: C64) -> Scaled {
    let i = Complex::new(0.0, 1.0);
    let l0 = geometry.ell0;
    let lr = geometry.right_length();
    let kappa = -zeta * zeta;

    // left: roots ±β, ±iβ of r⁴ = κ
    let beta = (i * zeta).sqrt();
    let m_left = beta.re.abs().max(beta.im.abs()) * l0;
    let f = if beta.norm() * l0 <= SERIES_LIMIT {
        let e = (-m_left).exp();
        series_left(kappa, l0).map(|v| v * e)
    } else {
        let ex = |r: C64| (r * l0 - m_left).exp();
        let (e1, e2, e3, e4) = (ex(beta), ex(-beta), ex(i * beta), ex(-i * beta));
        let ch = (e1 + e2) * 0.5;
        let sh = (e1 - e2) * 0.5;
        let co = (e3 + e4) * 0.5;
        let si = (e3 - e4) / (2.0 * i);
        [
            (ch + co) * 0.5,
            (sh + si) / (2.0 * beta),
            (ch - co) / (2.0 * beta * beta),
            (sh - si) / (2.0 * beta * beta * beta),
        ]
    };
    // F_j' = F_{j-1}, F_0' = κ F_3
    let mut left = [[Complex::new(0.0, 0.0); 4]; 4];
    left[0] = f;
    for k in 1..4 {
        let p = left[k - 1];
        left[k] = [kappa * p[3], p[0], p[1], p[2]];
    }

    // right: r² = ρ₁,₂ = ζ e^{±iπ/3}
    let rho1 = zeta * Complex::from_polar(1.0, std::f64::consts::FRAC_PI_3);
    let rho2 = zeta * Complex::from_polar(1.0, -std::f64::consts::FRAC_PI_3);
    let q1 = rho1.sqrt();
    let q2 = rho2.sqrt();
    let m_right = q1.re.abs().max(q2.re.abs()) * lr;
    let s = -lr;
    let g = if q1.norm().max(q2.norm()) * lr <= SERIES_LIMIT {
        let e = (-m_right).exp();
        series_right(zeta, s).map(|v| v * e)
    } else {
        let ex = |r: C64| (r * s - m_right).exp();
        let cs = |q: C64| {
            let (p, m) = (ex(q), ex(-q));
            ((p + m) * 0.5, (p - m) / (2.0 * q))
        };
        let (c1, s1) = cs(q1);
        let (c2, s2) = cs(q2);
        let d = rho1 - rho2;
        [
            (rho1 * c2 - rho2 * c1) / d,
            (rho1 * s2 - rho2 * s1) / d,
            (c1 - c2) / d,
            (s1 - s2) / d,
        ]
    };
    // G_0' = −ζ² G_3, G_1' = G_0, G_2' = G_1 + ζ G_3, G_3' = G_2
    let mut right = [[Complex::new(0.0, 0.0); 4]; 4];
    right[0] = g;
    for k in 1..4 {
        let p = right[k - 1];
        right[k] = [kappa * p[3], p[0], p[1] + zeta * p[3], p[2]];
    }
    Scaled {
        left,
        right,
        m_left,
        m_right,
    }
}

/// Scaled 8×8 matrix without the ζ ≠ 0 guard.
fn matrix_unchecked(geometry: &BeamGeometry, zeta: C64) -> CMat {
    let sc = fundamental(geometry, zeta);
    let b = 1.0 + zeta.norm().sqrt();
    let col_pow = [0i32, 1, 2, 3];
    // columns: F0 F1 F2 F3 | G2 G3 G0 G1
    let right_order = [2usize, 3, 0, 1];
    let mut m = DMatrix::<C64>::zeros(8, 8);
    // clamped left end: F_j^{(k)}(0) = δ_jk; row scale exp(m_L) b^{-k}
    // cancels the column scale exp(−m_L) b^{j}
    m[(0, 0)] = Complex::new(1.0, 0.0);
    m[(1, 1)] = Complex::new(1.0, 0.0);
    m[(6, 6)] = Complex::new(1.0, 0.0);
    m[(7, 7)] = Complex::new(1.0, 0.0);
    for k in 0..4 {
        let row = 2 + k;
        let rs = b.powi(-(k as i32));
        for j in 0..4 {
            m[(row, j)] = sc.left[k][j] * b.powi(col_pow[j]) * rs;
        }
        for (c, &j) in right_order.iter().enumerate() {
            let mut val = -sc.right[k][j];
            if k == 3 {
                // v''' − w''' + ζ w'
                val += zeta * sc.right[1][j];
            }
            m[(row, 4 + c)] = val * b.powi(col_pow[j]) * rs;
        }
    }
    m
}

/// The scaled characteristic matrix. Rows: `v(0)`, `v'(0)`, the interface
/// conditions `v−w`, `v'−w'`, `v''−w''`, `v'''−w'''+ζw'` at ℓ₀, then `w(ℓ)`,
/// `w'(ℓ)`. Columns: `F_0..F_3` on the left, then `G_2, G_3, G_0, G_1` on the
/// right.
pub fn characteristic_matrix(geometry: &BeamGeometry, zeta: C64) -> Result<CMat, OracleError> {
    if zeta == Complex::new(0.0, 0.0) {
        return Err(OracleError::ZeroZeta);
    }
    Ok(matrix_unchecked(geometry, zeta))
}

fn det_unchecked(geometry: &BeamGeometry, zeta: C64) -> C64 {
    matrix_unchecked(geometry, zeta).determinant()
}

/// `D(ζ)`, the determinant of the scaled characteristic matrix. It vanishes
/// exactly at the eigenvalues and satisfies `D(ζ̄) = conj D(ζ)`.
pub fn characteristic_det(geometry: &BeamGeometry, zeta: C64) -> Result<C64, OracleError> {
    characteristic_matrix(geometry, zeta).map(|m| m.determinant())
}

/// Radius of the circle used for the local determinant scale.
pub fn scale_radius(zeta: C64) -> f64 {
    1e-3 * zeta.norm().max(1.0)
}

/// Median of `|D|` at 16 points on a circle of radius [`scale_radius`].
pub fn local_scale(geometry: &BeamGeometry, zeta: C64) -> f64 {
    let r = scale_radius(zeta);
    let mut vals: Vec<f64> = (0..16)
        .map(|k| {
            let p = zeta + Complex::from_polar(r, std::f64::consts::TAU * (k as f64 + 0.5) / 16.0);
            det_unchecked(geometry, p).norm()
        })
        .collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    0.5 * (vals[7] + vals[8])
}

pub const NEWTON_CAP: usize = 50;

/// Newton refinement with a central-difference derivative.
pub fn refine_root(
    geometry: &BeamGeometry,
    seed: C64,
    source: SeedSource,
) -> Result<CharacteristicRoot, OracleError> {
    let d0 = characteristic_det(geometry, seed)?;
    let scale0 = local_scale(geometry, seed);
    if d0.norm() > 1e-2 * scale0 {
        return Err(OracleError::OutsideBasin {
            seed,
            det_abs: d0.norm(),
            scale: scale0,
        });
    }
    let mut z = seed;
    let mut d = d0;
    for it in 1..=NEWTON_CAP {
        let h = 1e-6 * z.norm().max(1.0);
        let dp = (det_unchecked(geometry, z + h) - det_unchecked(geometry, z - h)) / (2.0 * h);
        let step = d / dp;
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        z -= step;
        if z == Complex::new(0.0, 0.0) {
            return Err(OracleError::ZeroZeta);
        }
        if (z - seed).norm() > 10.0 * scale_radius(seed) {
            break;
        }
        d = det_unchecked(geometry, z);
        if step.norm() <= 1e-12 * z.norm().max(1.0) {
            return Ok(CharacteristicRoot {
                zeta: z,
                det_abs: d.norm(),
                newton_iters: it,
                seed_source: source,
                scale: local_scale(geometry, z),
            });
        }
    }
    Err(OracleError::Diverged {
        seed,
        iterations: NEWTON_CAP,
    })
}

/// Number of roots (with multiplicity) inside `rect`, from the winding number of
/// `D` along its boundary. The boundary is subdivided adaptively until every
/// piece changes the argument by less than π/8.
pub fn count_roots(geometry: &BeamGeometry, rect: &Rect) -> Result<i64, OracleError> {
    if !(rect.re.0 < rect.re.1 && rect.im.0 < rect.im.1) {
        return Err(OracleError::DegenerateRectangle);
    }
    let on_boundary =
        (rect.re.0 == 0.0 || rect.re.1 == 0.0) && rect.im.0 <= 0.0 && rect.im.1 >= 0.0
            || (rect.im.0 == 0.0 || rect.im.1 == 0.0) && rect.re.0 <= 0.0 && rect.re.1 >= 0.0;
    if on_boundary {
        return Err(OracleError::BoundaryThroughOrigin);
    }
    let c = rect.corners();
    let mut total = 0.0;
    for e in 0..4 {
        let (a, b) = (c[e], c[(e + 1) % 4]);
        let reach = a.norm().max(b.norm()).max(1.0);
        let pieces = 16 + (4.0 * (b - a).norm() / reach.sqrt()).ceil() as usize;
        let pieces = pieces.min(4096);
        let mut za = a;
        let mut da = det_unchecked(geometry, za);
        for p in 1..=pieces {
            let zb = a + (b - a) * (p as f64 / pieces as f64);
            let db = det_unchecked(geometry, zb);
            total += arg_change(geometry, za, zb, da, db, 0)?;
            za = zb;
            da = db;
        }
    }
    let winding = total / std::f64::consts::TAU;
    let rounded = winding.round();
    if (winding - rounded).abs() > 0.1 {
        return Err(OracleError::NonInteger { winding });
    }
    Ok(rounded as i64)
}

fn arg_change(
    geometry: &BeamGeometry,
    za: C64,
    zb: C64,
    da: C64,
    db: C64,
    depth: usize,
) -> Result<f64, OracleError> {
    let limit = std::f64::consts::PI / 8.0;
    let zm = (za + zb) * 0.5;
    let dm = det_unchecked(geometry, zm);
    if da.norm() == 0.0 || db.norm() == 0.0 || dm.norm() == 0.0 {
        return Err(OracleError::Unresolved { at: zm });
    }
    let d1 = (dm / da).arg();
    let d2 = (db / dm).arg();
    let whole = (db / da).arg();
    if d1.abs() < limit && d2.abs() < limit && (d1 + d2 - whole).abs() < 1e-9 {
        return Ok(d1 + d2);
    }
    if depth >= 40 {
        return Err(OracleError::Unresolved { at: zm });
    }
    Ok(arg_change(geometry, za, zm, da, dm, depth + 1)?
        + arg_change(geometry, zm, zb, dm, db, depth + 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::assemble;
    use crate::linalg::{eig_dense, to_complex};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn geom() -> BeamGeometry {
        BeamGeometry::new(0.5, 1.0).unwrap()
    }

    fn c(re: f64, im: f64) -> C64 {
        Complex::new(re, im)
    }

    fn rightmost(n: usize) -> C64 {
        let op = assemble(geom(), n, n).unwrap();
        let e = eig_dense(&to_complex(&op.a_reduced)).unwrap();
        let v = e[0].value;
        if v.im >= 0.0 {
            v
        } else {
            v.conj()
        }
    }

    #[test]
    fn zero_is_refused() {
        assert_eq!(
            characteristic_matrix(&geom(), c(0.0, 0.0)).unwrap_err(),
            OracleError::ZeroZeta
        );
    }

    #[test]
    fn series_and_closed_forms_agree() {
        // at the switch point both branches must give the same function
        let g = geom();
        for &z in &[c(12.0, 0.3), c(-10.0, 10.0), c(0.2, -15.0)] {
            let sc = fundamental(&g, z);
            let kappa = -z * z;
            let e = (-sc.m_left).exp();
            let s = series_left(kappa, g.ell0);
            for (sj, fj) in s.iter().zip(&sc.left[0]) {
                assert!((sj * e - fj).norm() < 1e-12 * sj.norm().max(1e-3));
            }
        }
        for &z in &[c(30.0, 5.0), c(-50.0, 20.0), c(1.0, 60.0)] {
            let sc = fundamental(&g, z);
            let e = (-sc.m_right).exp();
            let s = series_right(z, -g.right_length());
            for (j, (sj, gj)) in s.iter().zip(&sc.right[0]).enumerate() {
                let tol = 1e-9 * sj.norm().max(1e-3);
                assert!((sj * e - gj).norm() < tol, "{z} {j}");
            }
        }
    }

    #[test]
    fn entries_stay_finite_for_large_zeta() {
        let g = geom();
        for &z in &[c(1e6, 0.0), c(0.0, 1e6), c(-7e5, 7e5), c(-1e6, 1.0)] {
            let m = characteristic_matrix(&g, z).unwrap();
            assert!(m.iter().all(|v| v.re.is_finite() && v.im.is_finite()));
            assert!(characteristic_det(&g, z).unwrap().norm().is_finite());
        }
    }

    #[test]
    fn conjugate_symmetry() {
        let g = geom();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let z = c(
                rng.random_range(-200.0..50.0),
                rng.random_range(-500.0..500.0),
            );
            let a = characteristic_det(&g, z).unwrap();
            let b = characteristic_det(&g, z.conj()).unwrap();
            assert!((a.conj() - b).norm() <= 1e-10 * a.norm().max(1e-300));
        }
    }

    #[test]
    fn imaginary_axis_is_root_free() {
        let g = geom();
        for lam in [1.0, 10.0, 100.0] {
            let z = c(0.0, lam);
            let d = characteristic_det(&g, z).unwrap().norm();
            assert!(d >= 1e-6 * local_scale(&g, z), "λ = {lam}");
        }
        let mut min = f64::INFINITY;
        for k in 0..=2000 {
            let lam = 0.5 + 49.5 * k as f64 / 2000.0;
            min = min.min(characteristic_det(&g, c(0.0, lam)).unwrap().norm());
        }
        assert!(min > 0.0);
    }

    #[test]
    fn discrete_rightmost_eigenvalue_is_a_root() {
        let g = geom();
        let seed = rightmost(64);
        let scale = local_scale(&g, seed);
        assert!(characteristic_det(&g, seed).unwrap().norm() <= 1e-3 * scale);
        let root = refine_root(&g, seed, SeedSource::DiscreteEigenvalue).unwrap();
        assert!(
            root.det_abs <= 1e-10 * root.scale,
            "{} vs {}",
            root.det_abs,
            root.scale
        );
        assert!((root.zeta - seed).norm() <= 1e-4);
        let again = refine_root(&g, root.zeta, SeedSource::GridScan).unwrap();
        assert!(again.newton_iters <= 2);
        let n = count_roots(&g, &Rect::around(root.zeta, 0.1)).unwrap();
        assert_eq!(n, 1);
    }

    #[test]
    fn far_seed_is_rejected() {
        let g = geom();
        let err = refine_root(&g, c(-1.0, 40.0), SeedSource::GridScan).unwrap_err();
        assert!(matches!(
            err,
            OracleError::OutsideBasin { .. } | OracleError::Diverged { .. }
        ));
    }

    #[test]
    fn right_half_plane_is_root_free() {
        let g = geom();
        assert_eq!(
            count_roots(&g, &Rect::new((0.1, 5.0), (-5.0, 5.0))).unwrap(),
            0
        );
    }

    #[test]
    fn counting_is_additive() {
        let g = geom();
        let whole = Rect::new((-30.0, -0.5), (10.0, 130.0));
        let lower = Rect::new((-30.0, -0.5), (10.0, 70.0));
        let upper = Rect::new((-30.0, -0.5), (70.0, 130.0));
        let n = count_roots(&g, &whole).unwrap();
        assert_eq!(
            n,
            count_roots(&g, &lower).unwrap() + count_roots(&g, &upper).unwrap()
        );
        assert_eq!(n, 3);
    }
}
