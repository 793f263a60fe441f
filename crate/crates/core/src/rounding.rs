//! Projection of a relaxed solution onto an integer assignment.
//!
//! Each procedure minimizes a squared distance over the assignments. Since
//! a binary `Y` has exactly one 1 per column, `Tr(Y^T A Y)` only reads the
//! diagonal of `A`, which turns every criterion into a linear form solved by
//! one oracle call.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{AlignError, Result};
use crate::matrix::FeatureMatrix;
use crate::polytope::{lmo_blocks, minimize_linear, path_to_matrix, AlignmentPath, CellMask, RelaxedAssignment};
use crate::solver::ProblemInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rounding {
    /// Closest assignment to `Y*`.
    Nearest,
    /// Closest assignment to `Y*` after mapping both through `Psi`.
    Feature,
    /// Assignment best explained by the learned model `W* Phi`.
    #[default]
    Model,
}

impl std::str::FromStr for Rounding {
    type Err = AlignError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest" => Ok(Rounding::Nearest),
            "feature" => Ok(Rounding::Feature),
            "model" => Ok(Rounding::Model),
            other => Err(AlignError::InvalidParameter(format!("unknown rounding '{other}'"))),
        }
    }
}

impl std::fmt::Display for Rounding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Rounding::Nearest => "nearest",
            Rounding::Feature => "feature",
            Rounding::Model => "model",
        })
    }
}

/// `-2 Y*`; the constant `||Y||^2 = I` is dropped.
pub fn nearest_cost(y_star: &DMatrix<f64>) -> DMatrix<f64> {
    y_star * -2.0
}

/// `G[j,i] = (Psi^T Psi)[j,j] - 2 (Psi^T Psi Y*)[j,i]`.
pub fn feature_cost(y_star: &DMatrix<f64>, psi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if psi.ncols() != y_star.nrows() {
        return Err(AlignError::shape("feature rounding", psi.ncols(), y_star.nrows()));
    }
    let gram = psi.transpose() * psi;
    let cross = &gram * y_star;
    Ok(diagonal_minus_twice(&gram, &cross))
}

/// `G[j,i] = (Psi^T Psi)[j,j] - 2 (Psi^T W Phi)[j,i]`.
pub fn model_cost(w: &DMatrix<f64>, psi: &DMatrix<f64>, phi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if w.nrows() != psi.nrows() || w.ncols() != phi.nrows() {
        return Err(AlignError::shape(
            "model rounding",
            format!("{}x{}", psi.nrows(), phi.nrows()),
            format!("{}x{}", w.nrows(), w.ncols()),
        ));
    }
    let gram = psi.transpose() * psi;
    let cross = psi.transpose() * (w * phi);
    Ok(diagonal_minus_twice(&gram, &cross))
}

fn diagonal_minus_twice(gram: &DMatrix<f64>, cross: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(cross.nrows(), cross.ncols(), |j, i| gram[(j, j)] - 2.0 * cross[(j, i)])
}

/// `||Y - Y*||_F^2`
pub fn nearest_criterion(path: &AlignmentPath, y_star: &DMatrix<f64>) -> f64 {
    (path_to_matrix(path).matrix() - y_star).norm_squared()
}

/// `||Psi (Y - Y*)||_F^2`
pub fn feature_criterion(path: &AlignmentPath, y_star: &DMatrix<f64>, psi: &DMatrix<f64>) -> f64 {
    (psi * (path_to_matrix(path).matrix() - y_star)).norm_squared()
}

/// `||Psi Y - W Phi||_F^2`
pub fn model_criterion(path: &AlignmentPath, w: &DMatrix<f64>, psi: &DMatrix<f64>, phi: &DMatrix<f64>) -> f64 {
    (psi * path_to_matrix(path).matrix() - w * phi).norm_squared()
}

pub fn round_nearest(y_star: &RelaxedAssignment, mask: Option<&CellMask>) -> Result<AlignmentPath> {
    Ok(minimize_linear(&nearest_cost(y_star.matrix()), mask)?.0)
}

pub fn round_feature(y_star: &RelaxedAssignment, psi: &FeatureMatrix, mask: Option<&CellMask>) -> Result<AlignmentPath> {
    let cost = feature_cost(y_star.matrix(), psi.as_matrix())?;
    Ok(minimize_linear(&cost, mask)?.0)
}

/// Does not look at the relaxed assignment, so it applies to unseen streams.
pub fn round_model(
    w: &FeatureMatrix,
    psi: &FeatureMatrix,
    phi: &FeatureMatrix,
    mask: Option<&CellMask>,
) -> Result<AlignmentPath> {
    if psi.cols() > phi.cols() {
        return Err(AlignError::Infeasible {
            stream: None,
            detail: format!("{} text elements cannot be covered by {} intervals", psi.cols(), phi.cols()),
        });
    }
    let cost = model_cost(w.as_matrix(), psi.as_matrix(), phi.as_matrix())?;
    Ok(minimize_linear(&cost, mask)?.0)
}

/// Rounds every stream of a solved instance, honoring its masks. Returns
/// one path per stream in instance order.
pub fn round_instance(
    rounding: Rounding,
    inst: &ProblemInstance,
    y_star: &RelaxedAssignment,
    w: &FeatureMatrix,
) -> Result<Vec<AlignmentPath>> {
    let cost = match rounding {
        Rounding::Nearest => nearest_cost(y_star.matrix()),
        Rounding::Feature => feature_cost(y_star.matrix(), inst.psi().as_matrix())?,
        Rounding::Model => model_cost(w.as_matrix(), inst.psi().as_matrix(), inst.phi().as_matrix())?,
    };
    // the feature and model costs couple streams only through off-block
    // entries, which the block oracle never reads
    Ok(lmo_blocks(&cost, inst.layout(), inst.masks())?.0)
}
