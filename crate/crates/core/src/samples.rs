//! Seeded random inputs: smooth states in the state space and random
//! constrained coordinates.
//!
//! Smooth states are built from Lorentzian bumps `d / ((x − x_j)² + d²)`. Their
//! complex poles sit at distance `d` from the beam, so Chebyshev and Legendre
//! expansions converge geometrically at a finite, known rate. That keeps
//! convergence studies meaningful: entire test functions would reach roundoff
//! on very coarse grids.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::BeamGeometry;
use crate::discretization::DiscreteOperator;
use crate::grid::SubdomainGrid;
use crate::state::StateVector;
use crate::{CVec, C64};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal_c64(rng: &mut ChaCha8Rng) -> C64 {
    Complex::new(
        StandardNormal.sample(&mut *rng),
        StandardNormal.sample(&mut *rng),
    )
}

/// Sum of complex-weighted Lorentzian bumps plus a constant.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpSum {
    pub constant: C64,
    pub centers: Vec<f64>,
    pub weights: Vec<C64>,
    pub width: f64,
}

impl BumpSum {
    pub fn random(rng: &mut ChaCha8Rng, count: usize, lo: f64, hi: f64, width: f64) -> Self {
        Self {
            constant: normal_c64(rng),
            centers: (0..count).map(|_| rng.random_range(lo..hi)).collect(),
            weights: (0..count).map(|_| normal_c64(rng) * 0.5).collect(),
            width,
        }
    }

    pub fn eval(&self, x: f64) -> C64 {
        let d = self.width;
        self.centers
            .iter()
            .zip(&self.weights)
            .fold(self.constant, |acc, (&c, &w)| {
                acc + w * (d * d / ((x - c).powi(2) + d * d))
            })
    }
}

/// A smooth element of the state space: displacement `x²(ℓ−x)² g(x)` shared by
/// both segments (so the interface continuity holds exactly) and independent
/// smooth velocities on each segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothState {
    pub geometry: BeamGeometry,
    pub displacement: BumpSum,
    pub velocity_left: BumpSum,
    pub velocity_right: BumpSum,
}

/// Pole distance relative to the shorter segment.
pub const POLE_DISTANCE: f64 = 0.25;

impl SmoothState {
    pub fn random(geometry: BeamGeometry, rng: &mut ChaCha8Rng) -> Self {
        let (l0, l) = (geometry.ell0, geometry.ell);
        let d = POLE_DISTANCE * geometry.left_length().min(geometry.right_length());
        Self {
            geometry,
            displacement: BumpSum::random(rng, 3, 0.0, l, d),
            velocity_left: BumpSum::random(rng, 2, 0.0, l0, d),
            velocity_right: BumpSum::random(rng, 2, l0, l, d),
        }
    }

    pub fn displacement_at(&self, x: f64) -> C64 {
        let l = self.geometry.ell;
        // scaled so the envelope peaks at one
        let env = 16.0 * x * x * (l - x).powi(2) / l.powi(4);
        self.displacement.eval(x) * env
    }

    /// Samples on a grid pair.
    pub fn sample(&self, left: &SubdomainGrid, right: &SubdomainGrid) -> StateVector {
        let s = |g: &SubdomainGrid, f: &dyn Fn(f64) -> C64| {
            CVec::from_iterator(g.len(), g.nodes.iter().map(|&x| f(x)))
        };
        StateVector {
            v: s(left, &|x| self.displacement_at(x)),
            vt: s(left, &|x| self.velocity_left.eval(x)),
            w: s(right, &|x| self.displacement_at(x)),
            wt: s(right, &|x| self.velocity_right.eval(x)),
        }
    }
}

/// Independent standard complex normal coordinates.
pub fn random_coordinates(dim: usize, rng: &mut ChaCha8Rng) -> CVec {
    CVec::from_fn(dim, |_, _| normal_c64(rng))
}

/// Constrained coordinates of a smooth random state, scaled to unit ℋ-norm.
pub fn smooth_unit(op: &DiscreteOperator, seed: u64) -> CVec {
    let mut r = rng(seed);
    let s = SmoothState::random(op.geometry(), &mut r);
    let c = op.project(&s.sample(&op.core.left, &op.core.right));
    let n = op.inner(&c, &c).re.sqrt();
    c / Complex::new(n, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::state::{check_domain_membership, within, Membership};

    #[test]
    fn smooth_states_lie_in_the_state_space() {
        let g = BeamGeometry::new(0.5, 1.0).unwrap();
        let left = build_grid(96, 0.0, 0.5).unwrap();
        let right = build_grid(96, 0.5, 1.0).unwrap();
        let mut r = rng(1);
        for _ in 0..5 {
            let z = SmoothState::random(g, &mut r).sample(&left, &right);
            let res = check_domain_membership(&z, Membership::StateSpace, &left, &right).unwrap();
            assert!(within(&res, 1e-9), "{res:?}");
        }
    }

    #[test]
    fn seeding_is_reproducible() {
        let g = BeamGeometry::new(0.5, 1.0).unwrap();
        let a = SmoothState::random(g, &mut rng(9));
        let b = SmoothState::random(g, &mut rng(9));
        assert_eq!(a, b);
        assert_eq!(
            random_coordinates(7, &mut rng(2)),
            random_coordinates(7, &mut rng(2))
        );
    }
}
