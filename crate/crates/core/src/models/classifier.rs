use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, LabelVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Logistic,
    LinearSvm,
}

/// Full-batch gradient descent settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    /// `None` picks `1 / L`, the inverse Lipschitz constant of the loss gradient.
    pub learning_rate: Option<f64>,
    pub epochs: usize,
    pub l2: f64,
    /// Recorded for provenance; training starts from zero and draws no randomness.
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            learning_rate: None,
            epochs: 1000,
            l2: 1e-4,
            seed: 0,
        }
    }
}

/// Trained linear classifier. Inputs are standardized with the training
/// statistics stored here.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierFit {
    pub kind: ClassifierKind,
    pub classes: Vec<String>,
    /// One row per class; last column is the bias.
    pub weights: DMatrix<f64>,
    pub feature_means: Vec<f64>,
    pub feature_scales: Vec<f64>,
    pub config: ClassifierConfig,
    pub learning_rate: f64,
    /// Objective before every update, then after the last one.
    pub loss_trace: Vec<f64>,
}

impl ClassifierFit {
    pub fn scores(&self, x: &DataMatrix) -> Result<DMatrix<f64>> {
        let values = x.complete_values()?;
        if values.ncols() != self.feature_means.len() {
            return Err(Error::ShapeMismatch(format!(
                "classifier trained on {} features, got {}",
                self.feature_means.len(),
                values.ncols()
            )));
        }
        let design = augmented(values, &self.feature_means, &self.feature_scales);
        Ok(design * self.weights.transpose())
    }

    /// Predicted class per row; ties go to the lowest class index.
    pub fn predict(&self, x: &DataMatrix) -> Result<Vec<String>> {
        let scores = self.scores(x)?;
        Ok(scores
            .row_iter()
            .map(|row| {
                let mut best = 0;
                for k in 1..row.len() {
                    if row[k] > row[best] {
                        best = k;
                    }
                }
                self.classes[best].clone()
            })
            .collect())
    }
}

/// Fraction of rows whose predicted class equals the label.
pub fn accuracy(fit: &ClassifierFit, x: &DataMatrix, y: &LabelVector) -> Result<f64> {
    let predicted = fit.predict(x)?;
    if predicted.len() != y.len() {
        return Err(Error::ShapeMismatch("prediction/label length".into()));
    }
    if predicted.is_empty() {
        return Err(Error::ShapeMismatch("accuracy of an empty set".into()));
    }
    let correct = (0..y.len()).filter(|&i| predicted[i] == y.display(i)).count();
    Ok(correct as f64 / y.len() as f64)
}

pub fn fit_logistic(x: &DataMatrix, y: &LabelVector, cfg: &ClassifierConfig) -> Result<ClassifierFit> {
    fit_classifier(ClassifierKind::Logistic, x, y, cfg)
}

pub fn fit_linear_svm(x: &DataMatrix, y: &LabelVector, cfg: &ClassifierConfig) -> Result<ClassifierFit> {
    fit_classifier(ClassifierKind::LinearSvm, x, y, cfg)
}

pub fn fit_classifier(
    kind: ClassifierKind,
    x: &DataMatrix,
    y: &LabelVector,
    cfg: &ClassifierConfig,
) -> Result<ClassifierFit> {
    let values = x.complete_values()?;
    if values.nrows() != y.len() {
        return Err(Error::ShapeMismatch("feature rows vs labels".into()));
    }
    if cfg.epochs == 0 || !(cfg.l2 >= 0.0) {
        return Err(Error::InvalidConfig("epochs must be >= 1 and l2 >= 0".into()));
    }
    let raw: Vec<String> = (0..y.len()).map(|i| y.display(i)).collect();
    let classes = sorted_classes(&raw);
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }
    let targets: Vec<usize> = raw
        .iter()
        .map(|c| classes.iter().position(|k| k == c).expect("class listed"))
        .collect();

    let (means, scales) = standardization(values);
    let design = augmented(values, &means, &scales);
    let n = design.nrows() as f64;
    let gram_max = SymmetricEigen::new(design.transpose() * &design / n).eigenvalues.max();
    let curvature = match kind {
        ClassifierKind::Logistic => 0.5,
        ClassifierKind::LinearSvm => 2.0,
    };
    let learning_rate = cfg
        .learning_rate
        .unwrap_or_else(|| 1.0 / (curvature * gram_max + cfg.l2));
    if !(learning_rate > 0.0) || !learning_rate.is_finite() {
        return Err(Error::InvalidConfig(format!("learning rate {learning_rate}")));
    }

    let objective = match kind {
        ClassifierKind::Logistic => logistic_objective,
        ClassifierKind::LinearSvm => svm_objective,
    };
    let mut weights = DMatrix::zeros(classes.len(), design.ncols());
    let mut trace = Vec::with_capacity(cfg.epochs + 1);
    for epoch in 0..=cfg.epochs {
        let (loss, grad) = objective(&design, &targets, classes.len(), &weights, cfg.l2);
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("loss at epoch {epoch}")));
        }
        if let Some(&previous) = trace.last() {
            if loss > previous + 1e-12 * f64::max(1.0, f64::abs(previous)) {
                return Err(Error::LossIncreased {
                    epoch,
                    previous,
                    current: loss,
                });
            }
        }
        trace.push(loss);
        if epoch < cfg.epochs {
            weights -= grad * learning_rate;
        }
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite("classifier weights".into()));
    }
    Ok(ClassifierFit {
        kind,
        classes,
        weights,
        feature_means: means,
        feature_scales: scales,
        config: *cfg,
        learning_rate,
        loss_trace: trace,
    })
}

/// Mean softmax cross-entropy plus `l2/2 * ||W||^2` (bias excluded) and its
/// gradient. `design` carries a trailing column of ones.
pub fn logistic_objective(
    design: &DMatrix<f64>,
    targets: &[usize],
    n_classes: usize,
    weights: &DMatrix<f64>,
    l2: f64,
) -> (f64, DMatrix<f64>) {
    let n = design.nrows();
    let scores = design * weights.transpose();
    let mut residual = DMatrix::zeros(n, n_classes);
    let mut loss = 0.0;
    for i in 0..n {
        let row = scores.row(i);
        let max = row.max();
        let denom: f64 = row.iter().map(|s| (s - max).exp()).sum();
        let log_denom = denom.ln() + max;
        loss += log_denom - row[targets[i]];
        for k in 0..n_classes {
            residual[(i, k)] = (row[k] - log_denom).exp() - f64::from(k == targets[i]);
        }
    }
    let mut grad = residual.transpose() * design / n as f64;
    let (reg, reg_grad) = ridge(weights, l2);
    grad += reg_grad;
    (loss / n as f64 + reg, grad)
}

/// One-vs-rest squared hinge summed over classes plus the same ridge term.
pub fn svm_objective(
    design: &DMatrix<f64>,
    targets: &[usize],
    n_classes: usize,
    weights: &DMatrix<f64>,
    l2: f64,
) -> (f64, DMatrix<f64>) {
    let n = design.nrows();
    let scores = design * weights.transpose();
    let mut coef = DMatrix::zeros(n, n_classes);
    let mut loss = 0.0;
    for i in 0..n {
        for k in 0..n_classes {
            let t = if targets[i] == k { 1.0 } else { -1.0 };
            let slack = 1.0 - t * scores[(i, k)];
            if slack > 0.0 {
                loss += slack * slack;
                coef[(i, k)] = -2.0 * t * slack;
            }
        }
    }
    let mut grad = coef.transpose() * design / n as f64;
    let (reg, reg_grad) = ridge(weights, l2);
    grad += reg_grad;
    (loss / n as f64 + reg, grad)
}

fn ridge(weights: &DMatrix<f64>, l2: f64) -> (f64, DMatrix<f64>) {
    let mut g = weights * l2;
    g.column_mut(weights.ncols() - 1).fill(0.0);
    let w = weights.columns(0, weights.ncols() - 1);
    (0.5 * l2 * w.norm_squared(), g)
}

fn sorted_classes(raw: &[String]) -> Vec<String> {
    let mut classes: Vec<String> = raw.to_vec();
    classes.sort();
    classes.dedup();
    let numeric: Option<Vec<f64>> = classes.iter().map(|c| c.parse::<f64>().ok()).collect();
    if let Some(nums) = numeric {
        let mut paired: Vec<(f64, String)> = nums.into_iter().zip(classes).collect();
        paired.sort_by(|a, b| a.0.total_cmp(&b.0));
        return paired.into_iter().map(|(_, c)| c).collect();
    }
    classes
}

fn standardization(values: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = values.nrows() as f64;
    values
        .column_iter()
        .map(|col| {
            let mean = col.mean();
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
            (mean, scale)
        })
        .unzip()
}

/// Standardized design with a trailing ones column.
fn augmented(values: &DMatrix<f64>, means: &[f64], scales: &[f64]) -> DMatrix<f64> {
    let (n, p) = values.shape();
    DMatrix::from_fn(n, p + 1, |r, c| {
        if c == p {
            1.0
        } else {
            (values[(r, c)] - means[c]) / scales[c]
        }
    })
}
