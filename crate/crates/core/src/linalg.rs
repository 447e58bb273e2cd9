//! Dense complex linear algebra: pivoted LU, weighted operator norms by power
//! iteration, a dense nonsymmetric eigensolver and log-log fitting.

use std::ops::Range;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Schur};
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{CMat, CVec, RMat, C64};

/// Pivots smaller than this multiple of the largest entry of their row declare singularity.
pub const PIVOT_THRESHOLD: f64 = 1e-14;
pub const DEFAULT_EIG_CAP: usize = 2000;
pub const POWER_TOL: f64 = 1e-8;
pub const POWER_MAX_ITERS: usize = 5000;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("numerically singular matrix: pivot {pivot:.3e} at step {step}")]
    Singular { step: usize, pivot: f64 },
    #[error("weight matrix is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("eigenproblem of dimension {dim} exceeds cap {cap}")]
    TooLarge { dim: usize, cap: usize },
    #[error("Schur iteration did not converge")]
    IterationFailure,
    #[error("log-log fit needs at least 3 points in the window, got {0}")]
    WindowTooSmall(usize),
    #[error("log-log fit requires positive data, point {0} is not")]
    NonPositive(usize),
}

/// LU factorization with partial pivoting, `P A = L U`, stored column-major.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<C64>,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &CMat) -> Result<Self, LinalgError> {
        let (rows, cols) = a.shape();
        if rows != cols {
            return Err(LinalgError::NotSquare { rows, cols });
        }
        let n = rows;
        let row_max: Vec<f64> = (0..n)
            .map(|i| a.row(i).iter().fold(0.0f64, |m, z| m.max(z.norm())))
            .collect();
        let mut lu: Vec<C64> = a.as_slice().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let col = &lu[k * n..(k + 1) * n];
            let (mut p, mut best) = (k, col[k].norm());
            for (i, z) in col.iter().enumerate().skip(k + 1) {
                let m = z.norm();
                if m > best {
                    best = m;
                    p = i;
                }
            }
            if best <= PIVOT_THRESHOLD * row_max[perm[p]] || best == 0.0 {
                return Err(LinalgError::Singular {
                    step: k,
                    pivot: best,
                });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(j * n + k, j * n + p);
                }
                perm.swap(k, p);
            }
            let (head, tail) = lu.split_at_mut((k + 1) * n);
            let colk = &mut head[k * n..];
            let inv = colk[k].inv();
            for z in &mut colk[k + 1..] {
                *z *= inv;
            }
            let lcol = &colk[k + 1..];
            for j in (k + 1)..n {
                let cj = &mut tail[(j - k - 1) * n..(j - k) * n];
                let akj = cj[k];
                if akj.re == 0.0 && akj.im == 0.0 {
                    continue;
                }
                for (x, l) in cj[k + 1..].iter_mut().zip(lcol) {
                    *x -= akj * l;
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, x: &mut [C64]) {
        let n = self.n;
        let mut y: Vec<C64> = self.perm.iter().map(|&p| x[p]).collect();
        for k in 0..n {
            let yk = y[k];
            let col = &self.lu[k * n..(k + 1) * n];
            for (yi, l) in y[k + 1..].iter_mut().zip(&col[k + 1..]) {
                *yi -= l * yk;
            }
        }
        for k in (0..n).rev() {
            let col = &self.lu[k * n..(k + 1) * n];
            y[k] /= col[k];
            let yk = y[k];
            for (yi, u) in y[..k].iter_mut().zip(&col[..k]) {
                *yi -= u * yk;
            }
        }
        x.copy_from_slice(&y);
    }

    /// Solves `Aᴴ x = b` in place.
    pub fn solve_adjoint_in_place(&self, x: &mut [C64]) {
        let n = self.n;
        let mut t = x.to_vec();
        for k in 0..n {
            let col = &self.lu[k * n..(k + 1) * n];
            let mut s = t[k];
            for (ti, u) in t[..k].iter().zip(&col[..k]) {
                s -= u.conj() * ti;
            }
            t[k] = s / col[k].conj();
        }
        for k in (0..n).rev() {
            let col = &self.lu[k * n..(k + 1) * n];
            let mut s = t[k];
            for (ti, l) in t[k + 1..].iter().zip(&col[k + 1..]) {
                s -= l.conj() * ti;
            }
            t[k] = s;
        }
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = t[i];
        }
    }

    pub fn solve(&self, b: &CVec) -> CVec {
        let mut x = b.clone();
        self.solve_in_place(x.as_mut_slice());
        x
    }

    pub fn solve_adjoint(&self, b: &CVec) -> CVec {
        let mut x = b.clone();
        self.solve_adjoint_in_place(x.as_mut_slice());
        x
    }

    /// Explicit inverse, column by column.
    pub fn inverse(&self) -> CMat {
        let n = self.n;
        let mut inv = CMat::identity(n, n);
        for j in 0..n {
            let mut col = inv.column(j).into_owned();
            self.solve_in_place(col.as_mut_slice());
            inv.set_column(j, &col);
        }
        inv
    }
}

/// Solution of `A x = b` together with its relative residual `‖Ax-b‖/‖b‖`.
#[derive(Debug, Clone)]
pub struct Solution {
    pub x: CVec,
    pub relative_residual: f64,
}

pub fn solve(a: &CMat, b: &CVec) -> Result<Solution, LinalgError> {
    if b.len() != a.nrows() {
        return Err(LinalgError::DimensionMismatch {
            expected: a.nrows(),
            got: b.len(),
        });
    }
    let lu = Lu::factor(a)?;
    let x = lu.solve(b);
    let bn = b.norm();
    let r = (a * &x - b).norm();
    Ok(Solution {
        relative_residual: if bn > 0.0 { r / bn } else { r },
        x,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Cholesky factor of an SPD weight, used to move between the weighted and the
/// Euclidean inner product.
#[derive(Debug, Clone)]
pub struct Weight {
    l: CMat,
}

impl Weight {
    pub fn new(g: &RMat) -> Result<Self, LinalgError> {
        let (r, c) = g.shape();
        if r != c {
            return Err(LinalgError::NotSquare { rows: r, cols: c });
        }
        if (g - g.transpose()).amax() > 1e-12 * g.amax().max(1.0) {
            return Err(LinalgError::NotPositiveDefinite);
        }
        let chol = Cholesky::new(g.clone()).ok_or(LinalgError::NotPositiveDefinite)?;
        Ok(Self {
            l: chol.l().map(|v| Complex::new(v, 0.0)),
        })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// `Lᵀ x`
    pub fn lift_t(&self, x: &CVec) -> CVec {
        self.l.tr_mul(x)
    }

    /// `L⁻ᵀ x`
    pub fn unlift_t(&self, x: &CVec) -> CVec {
        self.l
            .tr_solve_lower_triangular(x)
            .expect("Cholesky factor has nonzero diagonal")
    }

    /// `L x`
    pub fn lift(&self, x: &CVec) -> CVec {
        &self.l * x
    }

    /// `L⁻¹ x`
    pub fn unlift(&self, x: &CVec) -> CVec {
        self.l
            .solve_lower_triangular(x)
            .expect("Cholesky factor has nonzero diagonal")
    }
}

fn seeded_unit(dim: usize, seed: u64) -> CVec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = CVec::from_fn(dim, |_, _| {
        Complex::new(
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
        )
    });
    let n = v.norm();
    v / Complex::new(n, 0.0)
}

/// Largest singular value of a linear map on the `G`-inner-product space,
/// given its action and adjoint action (both Euclidean).
pub fn power_norm(
    weight: &Weight,
    apply: impl Fn(&CVec) -> CVec,
    apply_adjoint: impl Fn(&CVec) -> CVec,
) -> NormEstimate {
    let dim = weight.dim();
    let mut u = seeded_unit(dim, 0x5eed_0fa1);
    let mut sigma = 0.0;
    for it in 1..=POWER_MAX_ITERS {
        // T = Lᵀ R L⁻ᵀ, Tᴴ = L⁻¹ Rᴴ L
        let tu = weight.lift_t(&apply(&weight.unlift_t(&u)));
        let new_sigma = tu.norm();
        let back = weight.unlift(&apply_adjoint(&weight.lift(&tu)));
        let bn = back.norm();
        if bn == 0.0 || new_sigma == 0.0 {
            return NormEstimate {
                value: 0.0,
                iterations: it,
                converged: true,
            };
        }
        let done = (new_sigma - sigma).abs() <= POWER_TOL * new_sigma;
        sigma = new_sigma;
        u = back / Complex::new(bn, 0.0);
        if done {
            return NormEstimate {
                value: sigma,
                iterations: it,
                converged: true,
            };
        }
    }
    NormEstimate {
        value: sigma,
        iterations: POWER_MAX_ITERS,
        converged: false,
    }
}

pub fn weighted_operator_norm(r: &CMat, g: &RMat) -> Result<NormEstimate, LinalgError> {
    let (rows, cols) = r.shape();
    if rows != cols {
        return Err(LinalgError::NotSquare { rows, cols });
    }
    if g.nrows() != rows {
        return Err(LinalgError::DimensionMismatch {
            expected: rows,
            got: g.nrows(),
        });
    }
    let w = Weight::new(g)?;
    Ok(power_norm(&w, |x| r * x, |x| r.ad_mul(x)))
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: C64,
    pub vector: CVec,
    /// `‖A v − λ v‖₂ / ‖v‖₂`
    pub residual: f64,
}

pub fn eig_residual(a: &CMat, value: C64, vector: &CVec) -> f64 {
    (a * vector - vector * value).norm() / vector.norm()
}

pub fn eig_dense(a: &CMat) -> Result<Vec<EigenPair>, LinalgError> {
    eig_dense_capped(a, DEFAULT_EIG_CAP)
}

pub fn eig_dense_capped(a: &CMat, cap: usize) -> Result<Vec<EigenPair>, LinalgError> {
    let (rows, cols) = a.shape();
    if rows != cols {
        return Err(LinalgError::NotSquare { rows, cols });
    }
    if rows > cap {
        return Err(LinalgError::TooLarge { dim: rows, cap });
    }
    let n = rows;
    if n == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::<C64, Dyn>::try_new(a.clone(), f64::EPSILON, 100 * n.max(10))
        .ok_or(LinalgError::IterationFailure)?;
    let (q, t) = schur.unpack();
    let tnorm = t
        .iter()
        .fold(0.0f64, |m, z| m.max(z.norm()))
        .max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * tnorm;

    let mut pairs: Vec<EigenPair> = (0..n)
        .map(|k| {
            let lam = t[(k, k)];
            let mut y = CVec::zeros(n);
            y[k] = Complex::new(1.0, 0.0);
            for i in (0..k).rev() {
                let mut s = Complex::new(0.0, 0.0);
                for j in (i + 1)..=k {
                    s += t[(i, j)] * y[j];
                }
                let mut d = t[(i, i)] - lam;
                if d.norm() < small {
                    d = Complex::new(small, 0.0);
                }
                y[i] = -s / d;
            }
            let mut v = &q * y;
            let vn = v.norm();
            v /= Complex::new(vn, 0.0);
            let residual = eig_residual(a, lam, &v);
            EigenPair {
                value: lam,
                vector: v,
                residual,
            }
        })
        .collect();
    pairs.sort_by(|x, y| {
        y.value
            .re
            .total_cmp(&x.value.re)
            .then(x.value.im.total_cmp(&y.value.im))
    });
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: Range<usize>,
}

/// Least-squares line through `(ln x, ln y)` over `points[window]`.
pub fn fit_loglog(points: &[(f64, f64)], window: Range<usize>) -> Result<PowerLawFit, LinalgError> {
    let end = window.end.min(points.len());
    let window = window.start.min(end)..end;
    let pts = &points[window.clone()];
    if pts.len() < 3 {
        return Err(LinalgError::WindowTooSmall(pts.len()));
    }
    for (i, &(x, y)) in pts.iter().enumerate() {
        if !(x > 0.0 && y > 0.0) {
            return Err(LinalgError::NonPositive(window.start + i));
        }
    }
    let logs: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let (slope, intercept, r_squared) = least_squares_line(&logs);
    Ok(PowerLawFit {
        slope,
        intercept,
        r_squared,
        window,
    })
}

/// Ordinary least squares `y = slope·x + intercept`; returns `(slope, intercept, r²)`.
pub fn least_squares_line(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum();
    let r2 = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    (slope, intercept, r2)
}

/// Numerical rank and singular values of `c` (rows normalized beforehand by
/// the caller if needed). Singular values below `rel_tol · σ_max` do not count.
pub fn numerical_rank(c: &RMat, rel_tol: f64) -> (usize, Vec<f64>) {
    let svd = c.clone().svd(false, false);
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    let top = s.first().copied().unwrap_or(0.0);
    let rank = s.iter().filter(|&&v| v > rel_tol * top).count();
    (rank, s)
}

/// Rows scaled to unit Euclidean norm (zero rows untouched).
pub fn normalize_rows(c: &RMat) -> RMat {
    let mut out = c.clone();
    for i in 0..out.nrows() {
        let n = out.row(i).norm();
        if n > 0.0 {
            let mut r = out.row_mut(i);
            r /= n;
        }
    }
    out
}

/// Orthonormal basis (as columns) of the orthogonal complement of the column
/// span of `u`, which must have orthonormal columns.
pub fn orthonormal_complement(u: &RMat) -> RMat {
    let (n, r) = u.shape();
    let mut a = u.clone();
    let mut reflectors: Vec<DVector<f64>> = Vec::with_capacity(r);
    for k in 0..r {
        let x: DVector<f64> = a.column(k).rows(k, n - k).into_owned();
        let alpha = -x[0].signum() * x.norm();
        let mut v = x;
        v[0] -= alpha;
        let vn = v.norm();
        if vn > 0.0 {
            v /= vn;
        }
        for j in k..r {
            let mut col = a.column_mut(j);
            let mut col = col.rows_mut(k, n - k);
            let d = v.dot(&col);
            col.axpy(-2.0 * d, &v, 1.0);
        }
        reflectors.push(v);
    }
    // Q = H_0 H_1 ... H_{r-1}; complement columns are Q[:, r..]
    let mut e = DMatrix::<f64>::zeros(n, n - r);
    for j in 0..(n - r) {
        e[(r + j, j)] = 1.0;
    }
    for k in (0..r).rev() {
        let v = &reflectors[k];
        for j in 0..(n - r) {
            let mut col = e.column_mut(j);
            let mut col = col.rows_mut(k, n - k);
            let d = v.dot(&col);
            col.axpy(-2.0 * d, v, 1.0);
        }
    }
    e
}

/// Largest modulus of a complex vector (0 when empty).
pub fn max_abs(x: &CVec) -> f64 {
    x.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Dense matrix helpers for the real/complex boundary.
pub fn to_complex(a: &RMat) -> CMat {
    a.map(|v| Complex::new(v, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn c(re: f64, im: f64) -> C64 {
        Complex::new(re, im)
    }

    fn random_complex(n: usize, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMat::from_fn(n, n, |_, _| {
            c(
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            )
        })
    }

    fn random_spd(n: usize, seed: u64) -> RMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = RMat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &b * b.transpose() + RMat::identity(n, n) * 0.5
    }

    /// Full-SVD oracle: ‖R‖_G = σ_max(Lᵀ R L⁻ᵀ).
    fn svd_oracle(r: &CMat, g: &RMat) -> f64 {
        let l = to_complex(&Cholesky::new(g.clone()).unwrap().l());
        let linv_t = l.clone().try_inverse().unwrap().transpose();
        let t = l.transpose() * r * linv_t;
        t.singular_values().max()
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let a = CMat::identity(5, 5);
        let b = CVec::from_fn(5, |i, _| c(i as f64, -1.0));
        let s = solve(&a, &b).unwrap();
        assert_eq!(s.x, b);
    }

    #[test]
    fn diagonal_solve() {
        let a = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(4.0, 0.0)]);
        let b = CVec::from_vec(vec![c(2.0, 0.0), c(4.0, 0.0)]);
        let x = solve(&a, &b).unwrap().x;
        assert!((x[0] - c(1.0, 0.0)).norm() < 1e-15 && (x[1] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn random_system_recovers_solution() {
        let a = random_complex(50, 3);
        let xs = CVec::from_fn(50, |i, _| c((i as f64).sin(), (i as f64).cos()));
        let b = &a * &xs;
        let s = solve(&a, &b).unwrap();
        assert!((s.x - &xs).norm() <= 1e-9 * xs.norm());
        assert!(s.relative_residual <= 1e-10);
    }

    #[test]
    fn adjoint_solve_matches_conjugate_transpose() {
        let a = random_complex(30, 9);
        let lu = Lu::factor(&a).unwrap();
        let b = CVec::from_fn(30, |i, _| c(1.0, i as f64));
        let x = lu.solve_adjoint(&b);
        assert!((a.adjoint() * x - &b).norm() <= 1e-10 * b.norm());
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)]);
        assert!(matches!(Lu::factor(&a), Err(LinalgError::Singular { .. })));
        let b = CVec::zeros(3);
        assert!(matches!(
            solve(&a, &b),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn weighted_norm_of_identity_is_one() {
        let g = random_spd(12, 1);
        let r = CMat::identity(12, 12);
        let est = weighted_operator_norm(&r, &g).unwrap();
        assert!((est.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn weighted_norm_of_diagonal() {
        let r = CMat::from_diagonal(&CVec::from_vec(vec![c(3.0, 0.0), c(1.0, 0.0)]));
        let est = weighted_operator_norm(&r, &RMat::identity(2, 2)).unwrap();
        assert!((est.value - 3.0).abs() < 1e-8);
        assert!(est.converged);
    }

    #[test]
    fn weighted_norm_matches_svd_oracle() {
        for (n, seed) in [(10, 1u64), (40, 2), (80, 3)] {
            let r = random_complex(n, seed);
            let g = random_spd(n, seed + 100);
            let est = weighted_operator_norm(&r, &g).unwrap();
            let want = svd_oracle(&r, &g);
            assert!(
                (est.value - want).abs() <= 1e-6 * want,
                "{n}: {} vs {}",
                est.value,
                want
            );
        }
    }

    #[test]
    fn weighted_norm_equals_norm_of_weighted_adjoint() {
        let n = 25;
        let r = random_complex(n, 11);
        let g = random_spd(n, 12);
        // G-adjoint: R* = G⁻¹ Rᴴ G
        let gc = to_complex(&g);
        let ginv = to_complex(&g.clone().try_inverse().unwrap());
        let r_star = ginv * r.adjoint() * gc;
        let a = svd_oracle(&r, &g);
        let b = svd_oracle(&r_star, &g);
        assert!((a - b).abs() <= 1e-8 * a);
        let est = weighted_operator_norm(&r_star, &g).unwrap();
        assert!((est.value - a).abs() <= 1e-6 * a);
    }

    #[test]
    fn weight_rejects_indefinite() {
        let g = RMat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            Weight::new(&g),
            Err(LinalgError::NotPositiveDefinite)
        ));
    }

    #[test]
    fn eig_of_diagonal() {
        let d = CMat::from_diagonal(&CVec::from_vec(vec![
            c(-1.0, 0.0),
            c(-2.0, 3.0),
            c(-2.0, -3.0),
        ]));
        let pairs = eig_dense(&d).unwrap();
        assert_eq!(pairs.len(), 3);
        assert!((pairs[0].value - c(-1.0, 0.0)).norm() < 1e-12);
        assert!((pairs[1].value - c(-2.0, -3.0)).norm() < 1e-12);
        assert!((pairs[2].value - c(-2.0, 3.0)).norm() < 1e-12);
        assert!(pairs.iter().all(|p| p.residual <= 1e-12));
    }

    #[test]
    fn eig_of_companion_matrix() {
        // x² + 1
        let a = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let pairs = eig_dense(&a).unwrap();
        let mut ims: Vec<f64> = pairs.iter().map(|p| p.value.im).collect();
        ims.sort_by(f64::total_cmp);
        assert!((ims[0] + 1.0).abs() < 1e-12 && (ims[1] - 1.0).abs() < 1e-12);
        assert!(pairs.iter().all(|p| p.value.re.abs() < 1e-12));
    }

    #[test]
    fn eig_of_real_matrix_is_conjugation_closed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = RMat::from_fn(40, 40, |_, _| rng.random_range(-1.0..1.0));
        let pairs = eig_dense(&to_complex(&a)).unwrap();
        for p in &pairs {
            let target = p.value.conj();
            let d = pairs
                .iter()
                .map(|q| (q.value - target).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(d < 1e-10);
            assert!(p.residual < 1e-11);
        }
    }

    #[test]
    fn eig_is_similarity_invariant() {
        let a = random_complex(20, 21);
        let qr = random_complex(20, 22).qr();
        let u = qr.q();
        let b = u.adjoint() * &a * &u;
        let ea = eig_dense(&a).unwrap();
        let eb = eig_dense(&b).unwrap();
        for p in &ea {
            let d = eb
                .iter()
                .map(|q| (q.value - p.value).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(d < 1e-10);
        }
    }

    #[test]
    fn eig_respects_cap() {
        let a = CMat::identity(5, 5);
        assert!(matches!(
            eig_dense_capped(&a, 4),
            Err(LinalgError::TooLarge { .. })
        ));
    }

    #[test]
    fn exact_power_law_fit() {
        let pts: Vec<(f64, f64)> = (1..=10)
            .map(|i| {
                let x = i as f64 * 1.7;
                (x, 7.0 * x.powf(-1.0 / 3.0))
            })
            .collect();
        let fit = fit_loglog(&pts, 0..10).unwrap();
        assert!((fit.slope + 1.0 / 3.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!((fit.intercept - 7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn constant_fit_has_zero_slope() {
        let pts: Vec<(f64, f64)> = (1..=5).map(|i| (i as f64, 2.0)).collect();
        assert!(fit_loglog(&pts, 0..5).unwrap().slope.abs() < 1e-14);
    }

    #[test]
    fn perturbed_power_law_fit() {
        let pts: Vec<(f64, f64)> = (0..40)
            .map(|i| {
                let x = 10f64.powf(1.0 + 3.0 * i as f64 / 39.0);
                (x, x.powf(-0.125) * (1.0 + 0.01 * x.ln().sin()))
            })
            .collect();
        assert!((fit_loglog(&pts, 0..40).unwrap().slope + 0.125).abs() < 0.02);
    }

    #[test]
    fn fit_errors() {
        let pts = vec![(1.0, 1.0), (2.0, -1.0), (3.0, 1.0), (4.0, 2.0)];
        assert_eq!(fit_loglog(&pts, 0..2), Err(LinalgError::WindowTooSmall(2)));
        assert_eq!(fit_loglog(&pts, 0..4), Err(LinalgError::NonPositive(1)));
    }

    #[test]
    fn complement_is_orthonormal_and_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = RMat::from_fn(30, 4, |_, _| rng.random_range(-1.0..1.0));
        let u = a.svd(true, false).u.unwrap();
        let e = orthonormal_complement(&u);
        assert_eq!(e.shape(), (30, 26));
        assert!((e.transpose() * &e - RMat::identity(26, 26)).amax() < 1e-13);
        assert!((u.transpose() * &e).amax() < 1e-13);
    }
}
