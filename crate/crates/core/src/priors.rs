//! Duration and band priors added to the discriminative cost.

use nalgebra::{DMatrix, DVector};

use crate::error::{AlignError, Result};
use crate::matrix::frobenius_dot;
use crate::polytope::{RelaxedAssignment, StreamLayout};

/// Target number of intervals per text element.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum DurationTarget {
    /// `I_n / J_n` for every element of stream `n`.
    #[default]
    Uniform,
    Scalar(f64),
    /// One target per element of the concatenated problem.
    PerElement(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorConfig {
    pub mu: DurationTarget,
    /// Duration spread. `f64::INFINITY` switches the duration prior off.
    pub sigma: f64,
    /// Weight of the out-of-band penalty.
    pub alpha: f64,
    /// Band half-width as a fraction of the normalized diagonal.
    pub beta: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            mu: DurationTarget::Uniform,
            sigma: f64::INFINITY,
            alpha: 0.0,
            beta: 1.0,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigma.is_nan() || self.sigma <= 0.0 {
            return Err(AlignError::InvalidParameter(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(AlignError::InvalidParameter(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(AlignError::InvalidParameter(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        let bad = |m: f64| !(m > 0.0 && m.is_finite());
        match &self.mu {
            DurationTarget::Scalar(m) if bad(*m) => {
                Err(AlignError::InvalidParameter(format!("mu must be > 0, got {m}")))
            }
            DurationTarget::PerElement(v) if v.iter().any(|&m| bad(m)) => {
                Err(AlignError::InvalidParameter("every mu entry must be > 0".into()))
            }
            _ => Ok(()),
        }
    }

    /// `1 / sigma^2`, zero when the prior is off.
    pub fn inv_sigma_sq(&self) -> f64 {
        1.0 / (self.sigma * self.sigma)
    }

    /// Expands `mu` to one target per element of the concatenated problem.
    pub fn duration_targets(&self, layout: &StreamLayout) -> Result<DVector<f64>> {
        let j_total = layout.j_total();
        match &self.mu {
            DurationTarget::Uniform => {
                let mut mu = DVector::zeros(j_total);
                for b in layout.blocks() {
                    let m = b.i_len as f64 / b.j_len as f64;
                    mu.rows_mut(b.j_offset, b.j_len).fill(m);
                }
                Ok(mu)
            }
            DurationTarget::Scalar(m) => Ok(DVector::from_element(j_total, *m)),
            DurationTarget::PerElement(v) => {
                if v.len() != j_total {
                    return Err(AlignError::shape("duration targets", j_total, v.len()));
                }
                Ok(DVector::from_column_slice(v))
            }
        }
    }
}

/// `(1 / 2 sigma^2) ||Y 1_I - mu||^2`.
pub fn duration_penalty(y: &RelaxedAssignment, mu: &DVector<f64>, sigma: f64) -> Result<f64> {
    let excess = duration_excess(y.matrix(), mu)?;
    Ok(0.5 * excess.norm_squared() / (sigma * sigma))
}

/// `(1 / sigma^2) (Y 1_I - mu) 1_I^T`.
pub fn duration_gradient(y: &RelaxedAssignment, mu: &DVector<f64>, sigma: f64) -> Result<DMatrix<f64>> {
    let excess = duration_excess(y.matrix(), mu)? / (sigma * sigma);
    let i_count = y.i_count();
    Ok(DMatrix::from_fn(y.j_count(), i_count, |j, _| excess[j]))
}

pub(crate) fn duration_excess(y: &DMatrix<f64>, mu: &DVector<f64>) -> Result<DVector<f64>> {
    if mu.len() != y.nrows() {
        return Err(AlignError::shape("duration targets", y.nrows(), mu.len()));
    }
    Ok(y.column_sum() - mu)
}

/// `alpha Tr(Y_c^T Y)`: the assignment mass outside the band, weighted.
/// Its gradient is the constant `alpha Y_c`.
pub fn band_penalty(y: &RelaxedAssignment, y_c: &DMatrix<f64>, alpha: f64) -> Result<f64> {
    if y_c.shape() != y.matrix().shape() {
        return Err(AlignError::shape(
            "band matrix",
            format!("{:?}", y.matrix().shape()),
            format!("{:?}", y_c.shape()),
        ));
    }
    Ok(alpha * frobenius_dot(y_c, y.matrix()))
}

/// Block-diagonal band indicator for a multi-stream layout; cells outside
/// the blocks are zero.
pub fn block_band(layout: &StreamLayout, beta: f64) -> Result<DMatrix<f64>> {
    let mut y_c = DMatrix::zeros(layout.j_total(), layout.i_total());
    for b in layout.blocks() {
        let band = crate::polytope::band_indicator(b.j_len, b.i_len, beta)?;
        y_c.view_mut((b.j_offset, b.i_offset), (b.j_len, b.i_len))
            .copy_from(band.matrix());
    }
    Ok(y_c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::{band_indicator, path_to_matrix, AlignmentPath};

    fn path(v: &[usize], j: usize) -> RelaxedAssignment {
        path_to_matrix(&AlignmentPath::new(v.to_vec(), j).unwrap())
    }

    #[test]
    fn duration_examples() {
        let y = path(&[0, 0, 1], 2);
        let exact = DVector::from_vec(vec![2.0, 1.0]);
        assert_eq!(duration_penalty(&y, &exact, 1.0).unwrap(), 0.0);
        let mu = DVector::from_element(2, 1.5);
        assert!((duration_penalty(&y, &mu, 1.0).unwrap() - 0.25).abs() < 1e-15);
        assert!(duration_penalty(&y, &mu, 1e9).unwrap() <= 1e-12);
        assert_eq!(duration_penalty(&y, &mu, f64::INFINITY).unwrap(), 0.0);
        let g = duration_gradient(&y, &mu, 1.0).unwrap();
        assert_eq!(g, DMatrix::from_row_slice(2, 3, &[0.5, 0.5, 0.5, -0.5, -0.5, -0.5]));
    }

    #[test]
    fn band_examples() {
        let inside = path(&[0, 1, 2, 3], 4);
        let band = band_indicator(4, 4, 0.0).unwrap();
        assert_eq!(band_penalty(&inside, band.matrix(), 3.0).unwrap(), 0.0);

        let wide = band_indicator(4, 6, 1.0).unwrap();
        let any = path(&[0, 0, 0, 1, 2, 3], 4);
        assert_eq!(band_penalty(&any, wide.matrix(), 5.0).unwrap(), 0.0);

        let b = band_indicator(4, 6, 0.1).unwrap();
        let three_out = path(&[0, 1, 2, 2, 3, 3], 4);
        let outside = three_out
            .matrix()
            .iter()
            .zip(b.matrix().iter())
            .filter(|(y, c)| **y == 1.0 && **c == 1.0)
            .count();
        assert_eq!(outside, 3);
        assert_eq!(band_penalty(&three_out, b.matrix(), 2.0).unwrap(), 6.0);
    }

    #[test]
    fn targets_expand_per_stream() {
        let layout = StreamLayout::new(&[(6, 3), (8, 2)]).unwrap();
        let cfg = PriorConfig::default();
        let mu = cfg.duration_targets(&layout).unwrap();
        assert_eq!(mu.as_slice(), &[2.0, 2.0, 2.0, 4.0, 4.0]);
        let cfg = PriorConfig {
            mu: DurationTarget::PerElement(vec![1.0; 4]),
            ..PriorConfig::default()
        };
        assert!(cfg.duration_targets(&layout).is_err());
    }

    #[test]
    fn validation() {
        assert!(PriorConfig::default().validate().is_ok());
        for bad in [
            PriorConfig { sigma: 0.0, ..Default::default() },
            PriorConfig { alpha: -1.0, ..Default::default() },
            PriorConfig { beta: 1.5, ..Default::default() },
            PriorConfig { mu: DurationTarget::Scalar(0.0), ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
