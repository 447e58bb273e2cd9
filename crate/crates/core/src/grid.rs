//! Chebyshev–Lobatto collocation on a single subinterval.
//!
//! A [`SubdomainGrid`] carries the nodes, dense differentiation matrices up
//! to fourth order, Clenshaw–Curtis weights, a cumulative (spectral)
//! integration matrix and an exact mass matrix for products of two
//! interpolants.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::RMat;

/// Smallest admissible number of collocation nodes per subdomain.
pub const MIN_NODES: usize = 8;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum GridError {
    #[error("at least {MIN_NODES} collocation nodes are required, got {0}")]
    TooFewNodes(usize),
    #[error("empty interval [{0}, {1}]")]
    EmptyInterval(f64, f64),
}

#[derive(Debug, Clone)]
pub struct SubdomainGrid {
    pub a: f64,
    pub b: f64,
    /// Increasing nodes; `nodes[0] == a`, `nodes[n-1] == b`.
    pub nodes: Vec<f64>,
    pub d1: RMat,
    pub d2: RMat,
    pub d3: RMat,
    pub d4: RMat,
    pub quad_weights: Vec<f64>,
    bary: Vec<f64>,
}

/// Clenshaw–Curtis weights for the `n_intervals + 1` Chebyshev points on [-1, 1].
pub fn clenshaw_curtis_weights(n_intervals: usize) -> Vec<f64> {
    let n = n_intervals;
    let mut w = vec![0.0; n + 1];
    if n == 0 {
        w[0] = 2.0;
        return w;
    }
    let nf = n as f64;
    let mut v = vec![1.0; n.saturating_sub(1)];
    if n.is_multiple_of(2) {
        w[0] = 1.0 / (nf * nf - 1.0);
        w[n] = w[0];
        for k in 1..n / 2 {
            let kf = k as f64;
            for (i, vi) in v.iter_mut().enumerate() {
                let theta = PI * (i + 1) as f64 / nf;
                *vi -= 2.0 * (2.0 * kf * theta).cos() / (4.0 * kf * kf - 1.0);
            }
        }
        for (i, vi) in v.iter_mut().enumerate() {
            let theta = PI * (i + 1) as f64 / nf;
            *vi -= (nf * theta).cos() / (nf * nf - 1.0);
        }
    } else {
        w[0] = 1.0 / (nf * nf);
        w[n] = w[0];
        for k in 1..=(n - 1) / 2 {
            let kf = k as f64;
            for (i, vi) in v.iter_mut().enumerate() {
                let theta = PI * (i + 1) as f64 / nf;
                *vi -= 2.0 * (2.0 * kf * theta).cos() / (4.0 * kf * kf - 1.0);
            }
        }
    }
    for (i, vi) in v.iter().enumerate() {
        w[i + 1] = 2.0 * vi / nf;
    }
    w
}

/// Chebyshev–Lobatto points on [-1, 1] in increasing order.
///
/// The sine form keeps the set exactly symmetric about zero.
pub fn chebyshev_lobatto(n: usize) -> Vec<f64> {
    let big_n = (n - 1) as f64;
    (0..n)
        .map(|j| (PI * (2.0 * j as f64 - big_n) / (2.0 * big_n)).sin())
        .collect()
}

fn map_nodes(t: &[f64], a: f64, b: f64) -> Vec<f64> {
    let n = t.len();
    let mut x: Vec<f64> = t.iter().map(|&s| a + 0.5 * (b - a) * (s + 1.0)).collect();
    x[0] = a;
    x[n - 1] = b;
    x
}

fn lobatto_bary(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n - 1 {
                0.5 * s
            } else {
                s
            }
        })
        .collect()
}

/// Barycentric interpolation weights (row vector) for evaluating the
/// interpolant through `nodes` at `x`.
pub fn barycentric_row(nodes: &[f64], bary: &[f64], x: f64) -> Vec<f64> {
    let mut row = vec![0.0; nodes.len()];
    if let Some(j) = nodes.iter().position(|&xj| xj == x) {
        row[j] = 1.0;
        return row;
    }
    let mut total = 0.0;
    for (j, (&xj, &wj)) in nodes.iter().zip(bary).enumerate() {
        let t = wj / (x - xj);
        row[j] = t;
        total += t;
    }
    for r in &mut row {
        *r /= total;
    }
    row
}

pub fn build_grid(n: usize, a: f64, b: f64) -> Result<SubdomainGrid, GridError> {
    if n < MIN_NODES {
        return Err(GridError::TooFewNodes(n));
    }
    if !(a < b) {
        return Err(GridError::EmptyInterval(a, b));
    }
    let nodes = map_nodes(&chebyshev_lobatto(n), a, b);
    let bary = lobatto_bary(n);

    let mut d1 = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let v = (bary[j] / bary[i]) / (nodes[i] - nodes[j]);
                d1[(i, j)] = v;
                diag -= v;
            }
        }
        d1[(i, i)] = diag;
    }
    let d2 = &d1 * &d1;
    let d3 = &d1 * &d2;
    let d4 = &d1 * &d3;

    let half = 0.5 * (b - a);
    let quad_weights = clenshaw_curtis_weights(n - 1)
        .into_iter()
        .map(|w| w * half)
        .collect();

    Ok(SubdomainGrid {
        a,
        b,
        nodes,
        d1,
        d2,
        d3,
        d4,
        quad_weights,
        bary,
    })
}

impl SubdomainGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn interp_row(&self, x: f64) -> Vec<f64> {
        barycentric_row(&self.nodes, &self.bary, x)
    }

    /// Interpolation matrix from the grid values to arbitrary points.
    pub fn interp_matrix(&self, xs: &[f64]) -> RMat {
        let mut p = DMatrix::<f64>::zeros(xs.len(), self.len());
        for (i, &x) in xs.iter().enumerate() {
            for (j, v) in self.interp_row(x).into_iter().enumerate() {
                p[(i, j)] = v;
            }
        }
        p
    }

    pub fn diff(&self, order: usize) -> &RMat {
        match order {
            1 => &self.d1,
            2 => &self.d2,
            3 => &self.d3,
            4 => &self.d4,
            _ => panic!("differentiation order {order} not stored"),
        }
    }

    /// Row functional returning the `order`-th derivative of the interpolant
    /// at `x` (order 0 is plain interpolation).
    pub fn trace_row(&self, order: usize, x: f64) -> Vec<f64> {
        let row = self.interp_row(x);
        if order == 0 {
            return row;
        }
        let d = self.diff(order);
        let n = self.len();
        (0..n)
            .map(|j| (0..n).map(|i| row[i] * d[(i, j)]).sum())
            .collect()
    }

    /// Cumulative integration from the left endpoint: `(I f)(x_i) = ∫_a^{x_i} f`.
    pub fn cumulative_from_left(&self) -> RMat {
        let n = self.len();
        let big_n = n - 1;
        let theta: Vec<f64> = (0..n).map(|j| PI * j as f64 / big_n as f64).collect();
        // T_k(t_j) with t_j = -cos(theta_j) ordered increasingly
        let cheb = |k: usize, j: usize| -> f64 {
            let s = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
            s * (k as f64 * theta[j]).cos()
        };
        // values -> Chebyshev coefficients c_0..c_N
        let mut coef = DMatrix::<f64>::zeros(n, n);
        for k in 0..n {
            for j in 0..n {
                let end = if j == 0 || j == big_n { 0.5 } else { 1.0 };
                coef[(k, j)] = 2.0 / big_n as f64 * end * cheb(k, j);
            }
            if k == 0 || k == big_n {
                for j in 0..n {
                    coef[(k, j)] *= 0.5;
                }
            }
        }
        // coefficients -> antiderivative coefficients C_0..C_{N+1}
        let mut integ = DMatrix::<f64>::zeros(n + 1, n);
        let c = |k: usize| -> Option<usize> { (k < n).then_some(k) };
        for k in 1..=n {
            let kf = k as f64;
            if k == 1 {
                integ[(1, 0)] += 1.0;
                if let Some(i) = c(2) {
                    integ[(1, i)] -= 0.5;
                }
            } else {
                if let Some(i) = c(k - 1) {
                    integ[(k, i)] += 1.0 / (2.0 * kf);
                }
                if let Some(i) = c(k + 1) {
                    integ[(k, i)] -= 1.0 / (2.0 * kf);
                }
            }
        }
        // evaluate at nodes, subtracting the value at t = -1
        let mut eval = DMatrix::<f64>::zeros(n, n + 1);
        for j in 0..n {
            for k in 0..=n {
                let at_left = if k % 2 == 0 { 1.0 } else { -1.0 };
                eval[(j, k)] = cheb(k, j) - at_left;
            }
        }
        let half = 0.5 * self.length();
        (eval * integ * coef) * half
    }

    /// Cumulative integration from the right endpoint: `(I f)(x_i) = ∫_b^{x_i} f`.
    pub fn cumulative_from_right(&self) -> RMat {
        let left = self.cumulative_from_left();
        let n = self.len();
        let total = left.row(n - 1).into_owned();
        let mut out = left;
        for i in 0..n {
            let mut r = out.row_mut(i);
            r -= &total;
        }
        out
    }

    /// Mass matrix `M_ij = ∫ L_i L_j` of the Lagrange basis, exact because it is
    /// evaluated with an oversampled Clenshaw–Curtis rule.
    pub fn mass_matrix(&self) -> RMat {
        let n = self.len();
        let m = 2 * n - 1;
        let fine = map_nodes(&chebyshev_lobatto(m), self.a, self.b);
        let half = 0.5 * self.length();
        let w: Vec<f64> = clenshaw_curtis_weights(m - 1)
            .into_iter()
            .map(|v| v * half)
            .collect();
        let p = self.interp_matrix(&fine);
        let mut wp = p.clone();
        for (i, wi) in w.iter().enumerate() {
            let mut r = wp.row_mut(i);
            r *= *wi;
        }
        p.transpose() * wp
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn sample(g: &SubdomainGrid, f: impl Fn(f64) -> f64) -> DVector<f64> {
        DVector::from_iterator(g.len(), g.nodes.iter().map(|&x| f(x)))
    }

    #[test]
    fn rejects_small_grids() {
        assert_eq!(
            build_grid(7, 0.0, 1.0).unwrap_err(),
            GridError::TooFewNodes(7)
        );
        assert!(build_grid(8, 1.0, 1.0).is_err());
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let g = build_grid(24, 0.0, 0.5).unwrap();
        let one = DVector::from_element(24, 1.0);
        for k in 1..=4 {
            assert!((g.diff(k) * &one).amax() <= 1e-14 * g.diff(k).amax());
        }
        assert!((&g.d1 * &one).amax() <= 1e-13);
    }

    #[test]
    fn differentiates_square_exactly() {
        let g = build_grid(16, 0.0, 0.5).unwrap();
        let f = sample(&g, |x| x * x);
        let want = sample(&g, |x| 2.0 * x);
        assert!((&g.d1 * f - want).amax() <= 1e-12);
    }

    #[test]
    fn weights_sum_to_length() {
        let g = build_grid(33, 0.5, 1.0).unwrap();
        let s: f64 = g.quad_weights.iter().sum();
        assert!((s - 0.5).abs() <= 1e-13);
        assert!(g.quad_weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn clenshaw_curtis_integrates_polynomials() {
        let g = build_grid(12, 0.0, 2.0).unwrap();
        let f = sample(&g, |x| x.powi(7));
        let q: f64 = f.iter().zip(&g.quad_weights).map(|(a, b)| a * b).sum();
        assert!((q - 2f64.powi(8) / 8.0).abs() <= 1e-11);
    }

    #[test]
    fn cumulative_integration_is_exact_on_polynomials() {
        let g = build_grid(16, 0.5, 1.0).unwrap();
        let f = sample(&g, |x| 3.0 * x * x);
        let left = g.cumulative_from_left() * &f;
        let right = g.cumulative_from_right() * &f;
        for (i, &x) in g.nodes.iter().enumerate() {
            assert!((left[i] - (x.powi(3) - 0.125)).abs() < 1e-14);
            assert!((right[i] - (x.powi(3) - 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn mass_matrix_reproduces_l2_products() {
        let g = build_grid(10, 0.0, 1.0).unwrap();
        let m = g.mass_matrix();
        let f = sample(&g, |x| x.powi(9));
        let h = sample(&g, |x| 1.0 - x.powi(8));
        let got = (f.transpose() * &m * &h)[0];
        let want = 1.0 / 10.0 - 1.0 / 18.0;
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn trace_rows_match_derivatives() {
        let g = build_grid(20, 0.0, 0.5).unwrap();
        let f = sample(&g, |x| (3.0 * x).sin());
        let r3 = g.trace_row(3, 0.3);
        let val: f64 = r3.iter().zip(f.iter()).map(|(a, b)| a * b).sum();
        assert!((val + 27.0 * (0.9f64).cos()).abs() < 1e-7);
    }
}
