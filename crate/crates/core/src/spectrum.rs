//! Discrete spectrum of `A_h` and its cross-validation against roots of the
//! exact characteristic determinant.

use crate::config::BeamGeometry;
use crate::discretization::DiscreteOperator;
use crate::linalg::{eig_dense, to_complex, LinalgError};
use crate::spectral_oracle::{
    count_roots, refine_root, CharacteristicRoot, OracleError, Rect, SeedSource,
};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenvalue {
    pub value: C64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    /// All eigenvalues, by decreasing real part.
    pub eigenvalues: Vec<Eigenvalue>,
    pub residual_tol: f64,
    /// Largest real part among eigenvalues with residual within tolerance.
    pub abscissa: f64,
    pub accepted: usize,
    pub conjugate_pairs: usize,
    pub real_eigenvalues: usize,
    /// Largest `|λ̄ − partner| / max(1, |λ|)` over the pairing.
    pub conjugate_mismatch: f64,
}

impl SpectrumReport {
    pub fn accepted(&self) -> impl Iterator<Item = &Eigenvalue> {
        self.eigenvalues
            .iter()
            .filter(|e| e.residual <= self.residual_tol)
    }

    /// The `k` rightmost accepted eigenvalues.
    pub fn rightmost(&self, k: usize) -> Vec<C64> {
        self.accepted().take(k).map(|e| e.value).collect()
    }
}

pub fn spectrum_report(
    op: &DiscreteOperator,
    residual_tol: f64,
) -> Result<SpectrumReport, LinalgError> {
    let pairs = eig_dense(&to_complex(&op.a_reduced))?;
    let eigenvalues: Vec<Eigenvalue> = pairs
        .iter()
        .map(|p| Eigenvalue {
            value: p.value,
            residual: p.residual,
        })
        .collect();
    let abscissa = eigenvalues
        .iter()
        .filter(|e| e.residual <= residual_tol)
        .map(|e| e.value.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let accepted = eigenvalues
        .iter()
        .filter(|e| e.residual <= residual_tol)
        .count();

    // greedy pairing of each upper-half eigenvalue with the closest conjugate
    let mut used = vec![false; eigenvalues.len()];
    let mut conjugate_pairs = 0;
    let mut real_eigenvalues = 0;
    let mut mismatch = 0.0f64;
    for i in 0..eigenvalues.len() {
        let z = eigenvalues[i].value;
        let scale = z.norm().max(1.0);
        if z.im.abs() <= 1e-10 * scale {
            real_eigenvalues += 1;
            used[i] = true;
            continue;
        }
        if z.im < 0.0 || used[i] {
            continue;
        }
        let best = (0..eigenvalues.len())
            .filter(|&j| !used[j] && j != i && eigenvalues[j].value.im < 0.0)
            .min_by(|&a, &b| {
                let da = (eigenvalues[a].value - z.conj()).norm();
                let db = (eigenvalues[b].value - z.conj()).norm();
                da.total_cmp(&db)
            });
        if let Some(j) = best {
            used[i] = true;
            used[j] = true;
            conjugate_pairs += 1;
            mismatch = mismatch.max((eigenvalues[j].value - z.conj()).norm() / scale);
        }
    }
    if used.iter().any(|u| !u) {
        mismatch = f64::INFINITY;
    }
    Ok(SpectrumReport {
        eigenvalues,
        residual_tol,
        abscissa,
        accepted,
        conjugate_pairs,
        real_eigenvalues,
        conjugate_mismatch: mismatch,
    })
}

/// A discrete eigenvalue and the characteristic root it refines to.
#[derive(Debug, Clone, PartialEq)]
pub struct RootMatch {
    pub discrete: C64,
    pub root: Result<CharacteristicRoot, OracleError>,
}

impl RootMatch {
    pub fn distance(&self) -> f64 {
        match &self.root {
            Ok(r) => (r.zeta - self.discrete).norm(),
            Err(_) => f64::INFINITY,
        }
    }
}

/// Refines each of the `k` rightmost accepted eigenvalues with Newton's method
/// on the characteristic determinant.
pub fn cross_validate(
    geometry: &BeamGeometry,
    report: &SpectrumReport,
    k: usize,
) -> Vec<RootMatch> {
    report
        .rightmost(k)
        .into_iter()
        .map(|z| RootMatch {
            discrete: z,
            root: refine_root(geometry, z, SeedSource::DiscreteEigenvalue),
        })
        .collect()
}

/// Real-part band `[−1e−6, 1]` used for the spectrum-free-axis check.
pub const AXIS_BAND: (f64, f64) = (-1e-6, 1.0);

/// Number of characteristic roots in `AXIS_BAND × [−height, height]`.
pub fn roots_near_axis(geometry: &BeamGeometry, height: f64) -> Result<i64, OracleError> {
    count_roots(geometry, &Rect::new(AXIS_BAND, (-height, height)))
}
