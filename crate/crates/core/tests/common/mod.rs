#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use vtalign::evaluation::random_path_with;
use vtalign::polytope::{path_to_matrix, CellMask, RelaxedAssignment};
use vtalign::priors::PriorConfig;
use vtalign::{FeatureMatrix, ProblemInstance};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn features(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> FeatureMatrix {
    FeatureMatrix::new(normal(rng, rows, cols)).unwrap()
}

/// A random mask that still admits some path; forbids roughly `density` of
/// the cells.
pub fn feasible_mask(rng: &mut ChaCha8Rng, j: usize, i: usize, density: f64) -> CellMask {
    loop {
        let m = CellMask::from_fn(j, i, |_, _| rng.random_bool(density));
        if m.is_feasible() {
            return m;
        }
    }
}

/// A strictly interior point: a random convex combination of `n` paths
/// mixed with the uniform matrix.
pub fn interior_point(rng: &mut ChaCha8Rng, j: usize, i: usize, n: usize) -> RelaxedAssignment {
    let mut m = DMatrix::from_element(j, i, 1.0 / j as f64) * 0.1;
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    for w in weights {
        let p = random_path_with(i, j, rng).unwrap();
        m += path_to_matrix(&p).into_matrix() * (0.9 * w / total);
    }
    RelaxedAssignment::new(m).unwrap()
}

pub fn instance(rng: &mut ChaCha8Rng, i: usize, j: usize, e: usize, d: usize, lambda: f64, priors: PriorConfig) -> ProblemInstance {
    let phi = features(rng, d, i).with_constant_row();
    let psi = features(rng, e, j);
    ProblemInstance::single(phi, psi, lambda, priors).unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
