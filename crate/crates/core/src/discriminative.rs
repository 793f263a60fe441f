//! Closed-form ridge regression between the two feature streams and the
//! quadratic assignment cost it induces.
//!
//! For a fixed assignment `Y` the best linear map `W` minimizing
//! `(1/2I) ||Psi Y - W Phi||_F^2 + (lambda/2) ||W||_F^2` is available in closed
//! form, and plugging it back leaves `(1/2I) Tr(Psi Y Q Y^T Psi^T)` with
//! `Q = Id - Phi^T (Phi Phi^T + I lambda Id)^-1 Phi`.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{AlignError, Result};
use crate::matrix::{frobenius_dot, symmetrize, FeatureMatrix};
use crate::polytope::RelaxedAssignment;

/// The data-dependent `I x I` matrix `Q` with the regularization it was
/// built for.
#[derive(Debug, Clone, PartialEq)]
pub struct CostKernel {
    q: DMatrix<f64>,
    lambda: f64,
}

impl CostKernel {
    pub fn q_matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn i_total(&self) -> usize {
        self.q.nrows()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(AlignError::InvalidParameter(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    Ok(())
}

fn cholesky(m: DMatrix<f64>, what: &'static str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m).ok_or(AlignError::NotPositiveDefinite(what))
}

/// `Phi Phi^T + I lambda Id_D`
fn regularized_gram(phi: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let (d, i) = phi.shape();
    let mut a = phi * phi.transpose();
    let shift = i as f64 * lambda;
    for k in 0..d {
        a[(k, k)] += shift;
    }
    a
}

/// `Q` through the `D x D` system. Cheaper when `D <= I`.
pub fn compute_q_primal(phi: &FeatureMatrix, lambda: f64) -> Result<CostKernel> {
    check_lambda(lambda)?;
    let phi = phi.as_matrix();
    let chol = cholesky(regularized_gram(phi, lambda), "regularized feature gram")?;
    let solved = chol.solve(phi);
    let mut q = DMatrix::identity(phi.ncols(), phi.ncols()) - phi.transpose() * solved;
    symmetrize(&mut q);
    Ok(CostKernel { q, lambda })
}

/// `Q = I lambda (Phi^T Phi + I lambda Id_I)^-1` through the `I x I` system,
/// equal to the primal form by the matrix inversion lemma.
pub fn compute_q_dual(phi: &FeatureMatrix, lambda: f64) -> Result<CostKernel> {
    check_lambda(lambda)?;
    let phi = phi.as_matrix();
    let n = phi.ncols();
    let shift = n as f64 * lambda;
    let mut b = phi.transpose() * phi;
    for k in 0..n {
        b[(k, k)] += shift;
    }
    let chol = cholesky(b, "regularized interval gram")?;
    let mut q = chol.solve(&(DMatrix::identity(n, n) * shift));
    symmetrize(&mut q);
    Ok(CostKernel { q, lambda })
}

/// Builds `Q`, using whichever linear system is smaller.
pub fn compute_q(phi: &FeatureMatrix, lambda: f64) -> Result<CostKernel> {
    if phi.rows() > phi.cols() {
        compute_q_dual(phi, lambda)
    } else {
        compute_q_primal(phi, lambda)
    }
}

fn check_product_shapes(psi: &FeatureMatrix, y: &RelaxedAssignment, i_count: usize) -> Result<()> {
    if psi.cols() != y.j_count() {
        return Err(AlignError::shape("text features vs assignment", psi.cols(), y.j_count()));
    }
    if y.i_count() != i_count {
        return Err(AlignError::shape("assignment vs intervals", i_count, y.i_count()));
    }
    Ok(())
}

/// Closed-form ridge solution `W* = Psi Y Phi^T (Phi Phi^T + I lambda Id_D)^-1`.
pub fn fit_model(
    psi: &FeatureMatrix,
    y: &RelaxedAssignment,
    phi: &FeatureMatrix,
    lambda: f64,
) -> Result<FeatureMatrix> {
    check_lambda(lambda)?;
    check_product_shapes(psi, y, phi.cols())?;
    let phi_m = phi.as_matrix();
    let target = psi.as_matrix() * y.matrix();
    let rhs = &target * phi_m.transpose();
    let chol = cholesky(regularized_gram(phi_m, lambda), "regularized feature gram")?;
    // W A = B with A symmetric  <=>  A W^T = B^T
    let w = chol.solve(&rhs.transpose()).transpose();
    FeatureMatrix::new(w)
}

/// `q(Y) = (1/2I) Tr(Psi Y Q Y^T Psi^T)`.
pub fn discriminative_cost(psi: &FeatureMatrix, y: &RelaxedAssignment, kernel: &CostKernel) -> Result<f64> {
    check_product_shapes(psi, y, kernel.i_total())?;
    let p = psi.as_matrix() * y.matrix();
    let pq = &p * kernel.q_matrix();
    Ok(frobenius_dot(&pq, &p) / (2.0 * kernel.i_total() as f64))
}

/// The ridge objective `(1/2I) ||Psi Y - W Phi||_F^2 + (lambda/2) ||W||_F^2`
/// at an arbitrary `W`.
pub fn ridge_residual(
    psi: &FeatureMatrix,
    y: &RelaxedAssignment,
    phi: &FeatureMatrix,
    w: &FeatureMatrix,
    lambda: f64,
) -> Result<f64> {
    check_product_shapes(psi, y, phi.cols())?;
    if w.rows() != psi.rows() || w.cols() != phi.rows() {
        return Err(AlignError::shape(
            "model",
            format!("{}x{}", psi.rows(), phi.rows()),
            format!("{}x{}", w.rows(), w.cols()),
        ));
    }
    let residual = psi.as_matrix() * y.matrix() - w.as_matrix() * phi.as_matrix();
    let i = phi.cols() as f64;
    Ok(residual.norm_squared() / (2.0 * i) + 0.5 * lambda * w.as_matrix().norm_squared())
}
