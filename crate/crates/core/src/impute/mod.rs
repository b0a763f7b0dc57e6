//! Imputers that fill the masked cells of a [`DataMatrix`].
//!
//! All methods are deterministic and leave observed cells untouched.

mod knn;
mod mean;
mod soft;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

pub use knn::impute_knn;
pub use mean::impute_mean;
pub use soft::impute_soft;

/// Shrinkage applied to singular values by soft-impute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lambda {
    /// Largest singular value of the mean-filled matrix divided by 50.
    Auto,
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxRank {
    Full,
    Rank(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftImputeConfig {
    pub lambda: Lambda,
    pub tol: f64,
    pub max_iter: usize,
    pub max_rank: MaxRank,
}

impl Default for SoftImputeConfig {
    fn default() -> Self {
        SoftImputeConfig {
            lambda: Lambda::Auto,
            tol: 1e-5,
            max_iter: 300,
            max_rank: MaxRank::Full,
        }
    }
}

/// Choice of imputation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ImputerConfig {
    Mean,
    Knn { k: usize },
    SoftImpute(SoftImputeConfig),
}

impl Default for ImputerConfig {
    fn default() -> Self {
        ImputerConfig::SoftImpute(SoftImputeConfig::default())
    }
}

impl ImputerConfig {
    pub fn knn() -> Self {
        ImputerConfig::Knn { k: 5 }
    }

    pub fn soft() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ImputerConfig::Mean => Ok(()),
            ImputerConfig::Knn { k: 0 } => Err(Error::InvalidConfig("knn k must be >= 1".into())),
            ImputerConfig::Knn { .. } => Ok(()),
            ImputerConfig::SoftImpute(cfg) => {
                if !(cfg.tol > 0.0) {
                    return Err(Error::InvalidConfig("soft-impute tol must be > 0".into()));
                }
                if cfg.max_iter == 0 {
                    return Err(Error::InvalidConfig("soft-impute max_iter must be >= 1".into()));
                }
                if let Lambda::Value(l) = cfg.lambda {
                    if !(l >= 0.0) || !l.is_finite() {
                        return Err(Error::InvalidConfig("soft-impute lambda must be >= 0".into()));
                    }
                }
                if cfg.max_rank == MaxRank::Rank(0) {
                    return Err(Error::InvalidConfig("soft-impute max_rank must be >= 1".into()));
                }
                Ok(())
            }
        }
    }

    pub fn method_name(&self) -> &'static str {
        match self {
            ImputerConfig::Mean => "mean",
            ImputerConfig::Knn { .. } => "knn",
            ImputerConfig::SoftImpute(_) => "soft_impute",
        }
    }
}

impl fmt::Display for ImputerConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImputerConfig::Mean => write!(f, "mean"),
            ImputerConfig::Knn { k } => write!(f, "knn(k={k})"),
            ImputerConfig::SoftImpute(c) => {
                let lambda = match c.lambda {
                    Lambda::Auto => "auto".to_string(),
                    Lambda::Value(v) => v.to_string(),
                };
                let rank = match c.max_rank {
                    MaxRank::Full => "full".to_string(),
                    MaxRank::Rank(r) => r.to_string(),
                };
                write!(
                    f,
                    "soft_impute(lambda={lambda}, tol={}, max_iter={}, max_rank={rank})",
                    c.tol, c.max_iter
                )
            }
        }
    }
}

/// Output of an imputer: a fully observed matrix plus bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputationResult {
    pub matrix: DataMatrix,
    /// Filled cells per column.
    pub cells_imputed: Vec<usize>,
    /// Soft-impute iterations run.
    pub iterations: Option<usize>,
    /// Soft-impute objective at the returned iterate.
    pub final_objective: Option<f64>,
    /// Soft-impute objective per iterate, starting with the mean fill.
    pub objective_trace: Vec<f64>,
    /// kNN cells that fell back to the column mean for lack of co-observed donors.
    pub knn_fallbacks: usize,
}

impl ImputationResult {
    pub fn total_imputed(&self) -> usize {
        self.cells_imputed.iter().sum()
    }

    fn plain(matrix: DataMatrix, cells_imputed: Vec<usize>) -> Self {
        ImputationResult {
            matrix,
            cells_imputed,
            iterations: None,
            final_objective: None,
            objective_trace: Vec::new(),
            knn_fallbacks: 0,
        }
    }
}

/// Dispatch to the configured imputer.
pub fn impute(x: &DataMatrix, cfg: &ImputerConfig) -> Result<ImputationResult> {
    cfg.validate()?;
    match cfg {
        ImputerConfig::Mean => impute_mean(x),
        ImputerConfig::Knn { k } => impute_knn(x, *k),
        ImputerConfig::SoftImpute(c) => impute_soft(x, c),
    }
}

fn missing_per_column(x: &DataMatrix) -> Vec<usize> {
    x.mask()
        .column_iter()
        .map(|c| c.iter().filter(|&&m| !m).count())
        .collect()
}

fn ensure_observed_columns(x: &DataMatrix) -> Result<()> {
    for (j, name) in x.features().iter().enumerate() {
        if x.n_rows() > 0 && x.observed_column(j).next().is_none() {
            return Err(Error::AllMissingColumn(name.to_string()));
        }
    }
    Ok(())
}

fn observed_means(x: &DataMatrix) -> Vec<f64> {
    (0..x.n_cols())
        .map(|j| {
            let (sum, count) = x
                .observed_column(j)
                .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
            if count == 0 {
                f64::NAN
            } else {
                sum / count as f64
            }
        })
        .collect()
}
