//! Dense real matrices used for feature streams and learned maps.

use nalgebra::DMatrix;

use crate::error::{AlignError, Result};

/// A finite, non-empty dense matrix.
///
/// Holds video features (`D x I`), text features (`E x J`) and the learned
/// map `W` (`E x D`).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix(DMatrix<f64>);

impl FeatureMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(AlignError::shape(
                "feature matrix",
                "at least 1x1",
                format!("{}x{}", values.nrows(), values.ncols()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(AlignError::NonFinite("feature matrix"));
        }
        Ok(FeatureMatrix(values))
    }

    /// Builds a matrix from row-major values.
    pub fn from_row_slice(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(AlignError::shape(
                "feature matrix",
                rows * cols,
                values.len(),
            ));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, values))
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(DMatrix::zeros(rows, cols))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Appends a constant all-ones row, turning a linear map on these
    /// features into an affine one.
    pub fn with_constant_row(&self) -> FeatureMatrix {
        let (r, c) = self.0.shape();
        let mut out = self.0.clone().resize_vertically(r + 1, 1.0);
        for i in 0..c {
            out[(r, i)] = 1.0;
        }
        FeatureMatrix(out)
    }

    pub fn scaled(&self, factor: f64) -> Result<FeatureMatrix> {
        Self::new(&self.0 * factor)
    }

    /// Horizontal concatenation; all parts must share the row count.
    pub fn hconcat(parts: &[&FeatureMatrix]) -> Result<FeatureMatrix> {
        let first = parts
            .first()
            .ok_or_else(|| AlignError::InvalidParameter("nothing to concatenate".into()))?;
        let rows = first.rows();
        let cols: usize = parts.iter().map(|p| p.cols()).sum();
        let mut out = DMatrix::zeros(rows, cols);
        let mut offset = 0;
        for p in parts {
            if p.rows() != rows {
                return Err(AlignError::shape("feature concatenation", rows, p.rows()));
            }
            out.columns_mut(offset, p.cols()).copy_from(&p.0);
            offset += p.cols();
        }
        Ok(FeatureMatrix(out))
    }
}

pub(crate) fn frobenius_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for r in 0..n {
        for c in (r + 1)..n {
            let v = 0.5 * (m[(r, c)] + m[(c, r)]);
            m[(r, c)] = v;
            m[(c, r)] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(FeatureMatrix::from_row_slice(1, 2, &[1.0, f64::NAN]).is_err());
        assert!(FeatureMatrix::new(DMatrix::zeros(0, 3)).is_err());
        assert!(FeatureMatrix::from_row_slice(2, 2, &[1.0; 3]).is_err());
    }

    #[test]
    fn constant_row_is_appended() {
        let m = FeatureMatrix::from_row_slice(2, 3, &[1., 2., 3., 4., 5., 6.]).unwrap();
        let a = m.with_constant_row();
        assert_eq!(a.rows(), 3);
        assert_eq!(a.as_matrix().row(2).iter().copied().collect::<Vec<_>>(), vec![1.0; 3]);
        assert_eq!(a.as_matrix()[(1, 2)], 6.0);
    }

    #[test]
    fn hconcat_keeps_order() {
        let a = FeatureMatrix::from_row_slice(1, 2, &[1., 2.]).unwrap();
        let b = FeatureMatrix::from_row_slice(1, 1, &[3.]).unwrap();
        let c = FeatureMatrix::hconcat(&[&a, &b]).unwrap();
        assert_eq!(c.as_matrix().iter().copied().collect::<Vec<_>>(), vec![1., 2., 3.]);
        let bad = FeatureMatrix::zeros(2, 1).unwrap();
        assert!(FeatureMatrix::hconcat(&[&a, &bad]).is_err());
    }
}
