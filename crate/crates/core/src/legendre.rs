//! Orthonormal Legendre polynomials on an interval `[a, b]`.
//!
//! `phi_k(x) = sqrt((2k+1)/L) P_k(t)`, `t = 2(x-a)/L - 1`, so that
//! `∫_a^b phi_j phi_k = δ_jk`. Coefficient vectors in this basis carry the
//! L² norm as the plain Euclidean norm.

use nalgebra::DMatrix;

use crate::RMat;

/// Gauss–Legendre nodes and weights on [-1, 1], increasing order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_and_derivative(n: usize, t: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = t;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * t * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}

#[derive(Debug, Clone, Copy)]
pub struct LegendreBasis {
    pub a: f64,
    pub b: f64,
}

impl LegendreBasis {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    fn norm_factor(&self, k: usize) -> f64 {
        ((2 * k + 1) as f64 / self.length()).sqrt()
    }

    fn to_reference(self, x: f64) -> f64 {
        2.0 * (x - self.a) / self.length() - 1.0
    }

    /// Values `phi_0(x) .. phi_{count-1}(x)`.
    pub fn values(&self, x: f64, count: usize) -> Vec<f64> {
        let t = self.to_reference(x);
        let mut out = Vec::with_capacity(count);
        let (mut p0, mut p1) = (1.0, t);
        for k in 0..count {
            let pk = match k {
                0 => 1.0,
                1 => t,
                _ => {
                    let kf = (k - 1) as f64;
                    let p2 = ((2.0 * kf + 1.0) * t * p1 - kf * p0) / (kf + 1.0);
                    p0 = p1;
                    p1 = p2;
                    p2
                }
            };
            out.push(self.norm_factor(k) * pk);
        }
        out
    }

    /// Endpoint values and first derivatives, in closed form.
    /// `at_right` selects `b`, otherwise `a`.
    pub fn endpoint(&self, at_right: bool, derivative: usize, count: usize) -> Vec<f64> {
        let scale = 2.0 / self.length();
        (0..count)
            .map(|k| {
                let sign = |p: usize| {
                    if at_right || p.is_multiple_of(2) {
                        1.0
                    } else {
                        -1.0
                    }
                };
                let kf = k as f64;
                let raw = match derivative {
                    0 => sign(k),
                    1 => sign(k + 1) * kf * (kf + 1.0) / 2.0 * scale,
                    2 => sign(k) * (kf - 1.0) * kf * (kf + 1.0) * (kf + 2.0) / 8.0 * scale * scale,
                    _ => panic!("endpoint derivative of order {derivative} not provided"),
                };
                self.norm_factor(k) * raw
            })
            .collect()
    }

    /// Matrix `D` (count × count) with `coeffs(f') = D · coeffs(f)`.
    pub fn derivative_matrix(&self, count: usize) -> RMat {
        let mut d = DMatrix::<f64>::zeros(count, count);
        let scale = 2.0 / self.length();
        for k in 1..count {
            let mut j = k as isize - 1;
            while j >= 0 {
                let ju = j as usize;
                d[(ju, k)] =
                    self.norm_factor(k) * scale * (2 * ju + 1) as f64 / self.norm_factor(ju);
                j -= 2;
            }
        }
        d
    }

    /// Sampling matrix (points × count) with entries `phi_k(x_i)`.
    pub fn sample_matrix(&self, xs: &[f64], count: usize) -> RMat {
        let mut m = DMatrix::<f64>::zeros(xs.len(), count);
        for (i, &x) in xs.iter().enumerate() {
            for (k, v) in self.values(x, count).into_iter().enumerate() {
                m[(i, k)] = v;
            }
        }
        m
    }

    /// Gauss–Legendre rule mapped to the interval.
    pub fn quadrature(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let (t, w) = gauss_legendre(n);
        let half = 0.5 * self.length();
        (
            t.iter().map(|&s| self.a + half * (s + 1.0)).collect(),
            w.iter().map(|&v| v * half).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_high_degree() {
        let (x, w) = gauss_legendre(12);
        let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(22)).sum();
        assert!((q - 2.0 / 23.0).abs() < 1e-14);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn basis_is_orthonormal() {
        let b = LegendreBasis::new(0.5, 1.0);
        let (x, w) = b.quadrature(30);
        let s = b.sample_matrix(&x, 20);
        let mut g = s.clone();
        for (i, wi) in w.iter().enumerate() {
            let mut r = g.row_mut(i);
            r *= *wi;
        }
        let gram = s.transpose() * g;
        assert!((gram - DMatrix::<f64>::identity(20, 20)).amax() < 1e-13);
    }

    #[test]
    fn endpoint_formulas_match_derivative_matrix() {
        let b = LegendreBasis::new(0.0, 0.5);
        let n = 15;
        let d = b.derivative_matrix(n);
        for right in [false, true] {
            let v0 = b.endpoint(right, 0, n);
            let v1 = b.endpoint(right, 1, n);
            let v2 = b.endpoint(right, 2, n);
            for k in 0..n {
                let via: f64 = (0..n).map(|j| d[(j, k)] * v0[j]).sum();
                assert!((via - v1[k]).abs() <= 1e-11 * v1[k].abs().max(1.0));
                let via2: f64 = (0..n).map(|j| d[(j, k)] * v1[j]).sum();
                assert!((via2 - v2[k]).abs() <= 1e-10 * v2[k].abs().max(1.0));
            }
        }
    }
}
