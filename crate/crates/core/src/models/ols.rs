use nalgebra::{DMatrix, DVector};

use crate::data::{DataMatrix, LabelVector};
use crate::error::{Error, Result};

/// Designs whose smallest/largest singular value ratio falls below this are rejected.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Ordinary least squares fit with intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRegressionFit {
    /// Intercept first, then one coefficient per feature.
    pub coefficients: DVector<f64>,
    pub sse_train: f64,
}

impl LinearRegressionFit {
    pub fn intercept(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn slopes(&self) -> &[f64] {
        &self.coefficients.as_slice()[1..]
    }

    pub fn predict_values(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let slopes = self.coefficients.rows(1, self.coefficients.len() - 1);
        (x * slopes).add_scalar(self.intercept())
    }

    pub fn predict(&self, x: &DataMatrix) -> Result<DVector<f64>> {
        let values = x.complete_values()?;
        if values.ncols() + 1 != self.coefficients.len() {
            return Err(Error::ShapeMismatch(format!(
                "fit has {} slopes, matrix has {} columns",
                self.coefficients.len() - 1,
                values.ncols()
            )));
        }
        Ok(self.predict_values(values))
    }
}

/// Fit `y ~ 1 + X` on a fully observed matrix with numeric labels.
pub fn fit_ols(x: &DataMatrix, y: &LabelVector) -> Result<LinearRegressionFit> {
    let target = y
        .as_numeric()
        .ok_or_else(|| Error::LabelKindMismatch("OLS needs numeric labels".into()))?;
    fit_least_squares(x.complete_values()?, target)
}

/// Least squares on a raw design; an intercept column is prepended.
pub fn fit_least_squares(x: &DMatrix<f64>, y: &[f64]) -> Result<LinearRegressionFit> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::ShapeMismatch(format!("{n} rows but {} labels", y.len())));
    }
    if n < p + 1 {
        return Err(Error::RankDeficient(0.0));
    }
    let mut design = DMatrix::from_element(n, p + 1, 1.0);
    design.view_mut((0, 1), (n, p)).copy_from(x);
    let target = DVector::from_column_slice(y);

    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
    if ratio < RANK_TOLERANCE {
        return Err(Error::RankDeficient(ratio));
    }
    let coefficients = svd
        .solve(&target, 0.0)
        .map_err(|e| Error::NonFinite(e.to_string()))?;
    let residual = &target - &design * &coefficients;
    let sse_train = residual.norm_squared();
    if !sse_train.is_finite() {
        return Err(Error::NonFinite("OLS residuals".into()));
    }
    Ok(LinearRegressionFit {
        coefficients,
        sse_train,
    })
}

/// Sum of squared prediction errors.
pub fn sse(fit: &LinearRegressionFit, x: &DataMatrix, y: &LabelVector) -> Result<f64> {
    let target = y
        .as_numeric()
        .ok_or_else(|| Error::LabelKindMismatch("SSE needs numeric labels".into()))?;
    let pred = fit.predict(x)?;
    if pred.len() != target.len() {
        return Err(Error::ShapeMismatch("prediction/label length".into()));
    }
    Ok(pred.iter().zip(target).map(|(p, t)| (t - p).powi(2)).sum())
}

pub fn mse(fit: &LinearRegressionFit, x: &DataMatrix, y: &LabelVector) -> Result<f64> {
    let n = y.len();
    if n == 0 {
        return Err(Error::ShapeMismatch("MSE of an empty set".into()));
    }
    Ok(sse(fit, x, y)? / n as f64)
}
