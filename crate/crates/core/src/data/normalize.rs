use ndarray::{Array1, Axis};

use super::FeatureMatrix;
use crate::error::{MdcrError, Result};
use crate::scalar::Scalar;

/// Per-column mean and population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnStats<F> {
    pub mean: Array1<F>,
    pub std: Array1<F>,
}

impl<F: Scalar> ColumnStats<F> {
    pub fn fit(m: &FeatureMatrix<F>) -> Self {
        let n = m.rows() as f64;
        let values = m.as_array();
        let mut mean = Array1::zeros(m.cols());
        let mut std = Array1::zeros(m.cols());
        for (j, col) in values.axis_iter(Axis(1)).enumerate() {
            let mu = col.iter().map(|v| v.as_f64()).sum::<f64>() / n;
            let var = col.iter().map(|v| (v.as_f64() - mu).powi(2)).sum::<f64>() / n;
            mean[j] = F::from_f64_lossy(mu);
            std[j] = F::from_f64_lossy(var.sqrt());
        }
        Self { mean, std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, m: &FeatureMatrix<F>) -> Result<FeatureMatrix<F>> {
        if self.mean.len() != m.cols() || self.std.len() != m.cols() {
            return Err(MdcrError::DimensionMismatch(format!(
                "normalization stats cover {} columns, matrix has {}",
                self.mean.len(),
                m.cols()
            )));
        }
        let mut out = m.as_array().clone();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (mu, sd) = (self.mean[j], self.std[j]);
            if sd > F::zero() {
                col.mapv_inplace(|v| (v - mu) / sd);
            } else {
                col.mapv_inplace(|v| v - mu);
            }
        }
        FeatureMatrix::new(out)
    }
}

/// Z-scores columns. With `stats = None` the statistics are fitted on `m`
/// (training role); otherwise they are applied unchanged (test role).
/// Zero-variance columns are only centered.
pub fn zscore<F: Scalar>(
    m: &FeatureMatrix<F>,
    stats: Option<&ColumnStats<F>>,
) -> Result<(FeatureMatrix<F>, ColumnStats<F>)> {
    let stats = match stats {
        Some(s) => s.clone(),
        None => ColumnStats::fit(m),
    };
    Ok((stats.apply(m)?, stats))
}
