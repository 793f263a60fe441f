//! Alignment quality and reference baselines.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{AlignError, Result};
use crate::polytope::AlignmentPath;
use crate::supervision::Annotation;

/// Mean per-row precision of a predicted alignment.
///
/// For every annotated, non-background element `j`, the row score is the
/// fraction of intervals predicted for `j` that fall inside its annotated
/// interval (0 when nothing is predicted for `j`). Rows are averaged with
/// equal weight.
pub fn jaccard_score(pred: &AlignmentPath, gt: &Annotation, background: &[usize]) -> Result<f64> {
    gt.validate(pred.j_count(), pred.i_count())?;
    let mut total = 0.0;
    let mut rows = 0usize;
    for entry in gt.entries() {
        if background.contains(&entry.text_index) || entry.start >= entry.end {
            continue;
        }
        let (mut predicted, mut inside) = (0usize, 0usize);
        for (i, &j) in pred.assignment().iter().enumerate() {
            if j == entry.text_index {
                predicted += 1;
                if (entry.start..entry.end).contains(&i) {
                    inside += 1;
                }
            }
        }
        if predicted > 0 {
            total += inside as f64 / predicted as f64;
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(AlignError::NoScorableRows);
    }
    Ok(total / rows as f64)
}

/// Uniform split: interval `i` (1-based) goes to element
/// `floor((i - 1) J / I) + 1`, so durations differ by at most one and the
/// longer ones come first.
pub fn diagonal_path(i_count: usize, j_count: usize) -> Result<AlignmentPath> {
    check_sizes(i_count, j_count)?;
    let assignment = (0..i_count).map(|i| i * j_count / i_count).collect();
    AlignmentPath::new(assignment, j_count)
}

/// Uniform sample over all assignments, seeded.
pub fn random_path(i_count: usize, j_count: usize, seed: u64) -> Result<AlignmentPath> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_path_with(i_count, j_count, &mut rng)
}

/// Uniform sample over all `C(I-1, J-1)` assignments: the `J-1` element
/// changes are placed at distinct gaps between consecutive intervals.
pub fn random_path_with<R: Rng + ?Sized>(i_count: usize, j_count: usize, rng: &mut R) -> Result<AlignmentPath> {
    check_sizes(i_count, j_count)?;
    let mut step_after = vec![false; i_count];
    for gap in sample(rng, i_count - 1, j_count - 1) {
        step_after[gap] = true;
    }
    let mut assignment = Vec::with_capacity(i_count);
    let mut j = 0;
    for i in 0..i_count {
        if i > 0 && step_after[i - 1] {
            j += 1;
        }
        assignment.push(j);
    }
    AlignmentPath::new(assignment, j_count)
}

fn check_sizes(i_count: usize, j_count: usize) -> Result<()> {
    if j_count == 0 || i_count == 0 {
        return Err(AlignError::InvalidParameter("empty alignment".into()));
    }
    if j_count > i_count {
        return Err(AlignError::Infeasible {
            stream: None,
            detail: format!("{j_count} text elements cannot be covered by {i_count} intervals"),
        });
    }
    Ok(())
}

/// Mean and standard error of a sample.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
