use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{dense_serde, squared_norm, FactorError, MatrixInfo};
use crate::counts::StandardizationParams;

/// Principal components of a (standardized) matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub d: usize,
    /// p x d, orthonormal columns.
    #[serde(with = "dense_serde")]
    pub loadings: DMatrix<f64>,
    /// n x d, `X * loadings`.
    #[serde(with = "dense_serde")]
    pub scores: DMatrix<f64>,
    /// All min(n, p) singular values, descending.
    pub singular_values: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardization: Option<StandardizationParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub info: Option<MatrixInfo>,
}

/// Fits the top `d` right singular vectors of `x`. Each loading is signed so
/// that its largest-magnitude entry is positive.
pub fn pca_fit(x: &DMatrix<f64>, d: usize) -> Result<PcaModel, FactorError> {
    let (n, p) = x.shape();
    let k = n.min(p);
    if d == 0 || d > k {
        return Err(FactorError::InvalidDimension { d, max: k });
    }
    let svd = x.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sigma = svd.singular_values;
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));

    let mut loadings = DMatrix::zeros(p, d);
    for (c, &src) in order.iter().take(d).enumerate() {
        let mut v = v_t.row(src).transpose();
        let peak = v.amax();
        let lead = v.iter().position(|x| x.abs() >= peak * (1.0 - 1e-9)).unwrap_or(0);
        if v[lead] < 0.0 {
            v.neg_mut();
        }
        loadings.set_column(c, &v);
    }
    let singular_values: Vec<f64> = order.iter().map(|&i| sigma[i]).collect();
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    let explained_variance_ratio = singular_values
        .iter()
        .take(d)
        .map(|s| if total > 0.0 { s * s / total } else { 0.0 })
        .collect();
    Ok(PcaModel {
        d,
        scores: x * &loadings,
        loadings,
        singular_values,
        explained_variance_ratio,
        standardization: None,
        info: None,
    })
}

impl PcaModel {
    /// `X C Cᵀ`.
    pub fn reconstruct(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>, FactorError> {
        if x.ncols() != self.loadings.nrows() {
            return Err(FactorError::ShapeMismatch {
                expected: (x.nrows(), self.loadings.nrows()),
                found: x.shape(),
            });
        }
        Ok((x * &self.loadings) * self.loadings.transpose())
    }

    /// `‖X − X C Cᵀ‖²_F`.
    pub fn reconstruction_error(&self, x: &DMatrix<f64>) -> Result<f64, FactorError> {
        Ok(squared_norm(&(x - self.reconstruct(x)?)))
    }

    /// Sum of squared singular values past `d`: the optimal objective.
    pub fn discarded_variance(&self) -> f64 {
        self.singular_values.iter().skip(self.d).map(|s| s * s).sum()
    }

    pub fn cumulative_explained_variance(&self) -> Vec<f64> {
        self.explained_variance_ratio
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r;
                Some(*acc)
            })
            .collect()
    }
}
