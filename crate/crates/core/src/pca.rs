//! Principal component analysis on column-centered data.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, FeatureSet};
use crate::error::{Error, Result};

/// Retained variance used when no rule is given.
pub const DEFAULT_VARIANCE_THRESHOLD: f64 = 0.95;

// Slack on the cumulative ratio so that a threshold of 1.0 selects the numerical rank.
const RATIO_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankRule {
    Fixed(usize),
    VarianceThreshold(f64),
}

impl Default for RankRule {
    fn default() -> Self {
        RankRule::VarianceThreshold(DEFAULT_VARIANCE_THRESHOLD)
    }
}

/// Fitted PCA: training means, orthonormal components and their eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: DVector<f64>,
    /// `p x k`, columns sorted by descending eigenvalue.
    pub components: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    /// Trace of the sample covariance (sum of all eigenvalues).
    pub total_variance: f64,
    pub features: FeatureSet,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.ncols()
    }

    pub fn n_features(&self) -> usize {
        self.components.nrows()
    }

    /// Map component scores back to the original feature space.
    pub fn reconstruct(&self, scores: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = scores * self.components.transpose();
        for mut row in out.row_iter_mut() {
            row += self.mean.transpose();
        }
        out
    }

    /// Sum of eigenvalues not retained by the model.
    pub fn discarded_variance(&self) -> f64 {
        (self.total_variance - self.eigenvalues.iter().sum::<f64>()).max(0.0)
    }
}

/// Fit PCA on a fully observed matrix with at least two rows.
pub fn pca_fit(a: &DataMatrix, rule: RankRule) -> Result<PcaModel> {
    let values = a.complete_values()?;
    let (n, p) = values.shape();
    if n < 2 {
        return Err(Error::ShapeMismatch(format!("PCA needs at least 2 rows, got {n}")));
    }
    let mean = DVector::from_fn(p, |j, _| values.column(j).mean());
    let mut centered = values.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = (centered.transpose() * &centered) / (n as f64 - 1.0);
    let total_variance = cov.trace();
    let eig = SymmetricEigen::try_new(cov, 1e-15, 10_000)
        .ok_or_else(|| Error::NonFinite("covariance eigen-decomposition did not converge".into()))?;

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]).then(x.cmp(&y)));
    let all_values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();

    let max_k = (n - 1).min(p);
    let k = match rule {
        RankRule::Fixed(k) => {
            if k > max_k {
                return Err(Error::DegenerateRank {
                    requested: k,
                    max: max_k,
                });
            }
            k
        }
        RankRule::VarianceThreshold(tau) => {
            if !(0.0..=1.0).contains(&tau) {
                return Err(Error::InvalidConfig(format!(
                    "variance threshold must lie in [0, 1], got {tau}"
                )));
            }
            threshold_rank(&all_values, total_variance, tau).min(max_k)
        }
    };

    let mut components = DMatrix::zeros(p, k);
    for (dst, &src) in order.iter().take(k).enumerate() {
        let mut col = eig.eigenvectors.column(src).clone_owned();
        fix_sign(&mut col);
        components.set_column(dst, &col);
    }
    let eigenvalues: Vec<f64> = all_values[..k].to_vec();
    let explained_variance_ratio = eigenvalues
        .iter()
        .map(|&l| if total_variance > 0.0 { l / total_variance } else { 0.0 })
        .collect();
    Ok(PcaModel {
        mean,
        components,
        eigenvalues,
        explained_variance_ratio,
        total_variance,
        features: a.features().clone(),
    })
}

/// Smallest `k` whose cumulative explained-variance ratio reaches `tau`.
fn threshold_rank(eigenvalues: &[f64], total: f64, tau: f64) -> usize {
    if total <= 0.0 || tau <= 0.0 {
        return 0;
    }
    let mut cumulative = 0.0;
    for (i, &l) in eigenvalues.iter().enumerate() {
        cumulative += l;
        if cumulative / total >= tau - RATIO_SLACK {
            return i + 1;
        }
    }
    eigenvalues.len()
}

/// Largest-magnitude entry positive; ties go to the lowest index.
fn fix_sign(v: &mut DVector<f64>) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        v.neg_mut();
    }
}

/// Project a fully observed matrix onto the model's components using the
/// training means. Output columns are named `<tag>_pc1 .. <tag>_pck`.
pub fn pca_project(model: &PcaModel, b: &DataMatrix, tag: &str) -> Result<DataMatrix> {
    let values = b.complete_values()?;
    if b.n_cols() != model.n_features() {
        return Err(Error::ShapeMismatch(format!(
            "model expects {} features, got {}",
            model.n_features(),
            b.n_cols()
        )));
    }
    if b.features() != &model.features {
        return Err(Error::ShapeMismatch(format!(
            "model features {:?} differ from {:?}",
            model.features,
            b.features()
        )));
    }
    let mut centered = values.clone();
    for mut row in centered.row_iter_mut() {
        row -= model.mean.transpose();
    }
    let scores = centered * &model.components;
    DataMatrix::complete(scores, component_names(tag, model.n_components()))
}

pub fn component_names(tag: &str, k: usize) -> FeatureSet {
    FeatureSet::new((1..=k).map(|i| format!("{tag}_pc{i}")))
        .expect("generated component names are unique and non-empty")
}
