use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, Dataset, FeatureSet, LabelVector, SplitDataset};
use crate::error::{Error, Result};

/// Regression simulation: two datasets drawn from
/// `Y = b0 + b1 X1 + b2 X2 + b3 X3 + eps` with `X ~ N(mu, sigma)`.
/// The first dataset loses `X1`, the second loses `X2` and carries extra
/// measurement noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub n1: usize,
    pub n2: usize,
    pub mu: [f64; 3],
    pub sigma: [[f64; 3]; 3],
    pub beta: [f64; 4],
    pub noise_var: f64,
    /// Measurement-noise variances added to features 2 and 3 of the second dataset.
    pub d2_feature_noise: [f64; 2],
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            n1: 300,
            n2: 200,
            mu: [1.0, 2.0, 0.5],
            sigma: [[1.0, 0.5, 0.3], [0.5, 1.0, 0.4], [0.3, 0.4, 1.0]],
            beta: [1.0, 1.0, 0.5, 1.0],
            noise_var: 0.2,
            d2_feature_noise: [0.05, 0.1],
            train_fraction: 0.7,
            seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        self.cholesky().map(|_| ())?;
        if self.noise_var < 0.0 || self.d2_feature_noise.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidConfig("noise variances must be >= 0".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig("train_fraction must lie in (0, 1)".into()));
        }
        for n in [self.n1, self.n2] {
            let train = split_point(n, self.train_fraction);
            if train < 4 || n - train < 1 {
                return Err(Error::InvalidConfig(format!(
                    "{n} samples leave too few rows for a 3-parameter fit"
                )));
            }
        }
        Ok(())
    }

    fn cholesky(&self) -> Result<Matrix3<f64>> {
        let s = Matrix3::from_fn(|i, j| self.sigma[i][j]);
        if (s - s.transpose()).abs().max() > 1e-12 {
            return Err(Error::InvalidConfig("sigma must be symmetric".into()));
        }
        if (0..3).any(|i| s[(i, i)] <= 0.0) {
            return Err(Error::InvalidConfig("variances must be positive".into()));
        }
        s.cholesky()
            .map(|c| c.l())
            .ok_or_else(|| Error::InvalidConfig("sigma must be positive definite".into()))
    }
}

/// The two split datasets plus their uncorrupted 3-feature counterparts.
#[derive(Debug, Clone)]
pub struct RegressionSimData {
    pub d1: SplitDataset,
    pub d2: SplitDataset,
    pub d1_full: SplitDataset,
    pub d2_full: SplitDataset,
}

pub fn gen_regression_sim(cfg: &SimulationConfig) -> Result<RegressionSimData> {
    let mut rng = super::repeat_rng(cfg.seed, 0);
    gen_regression_sim_with_rng(cfg, &mut rng)
}

/// Draw a simulation from `rng`.
///
/// Per row: three standard normals for `X`, then one for `eps`. Rows of the
/// first dataset come first. The second dataset's measurement noise is
/// drawn afterwards, two normals per row.
pub fn gen_regression_sim_with_rng(
    cfg: &SimulationConfig,
    rng: &mut ChaCha8Rng,
) -> Result<RegressionSimData> {
    cfg.validate()?;
    let chol = cfg.cholesky()?;
    let mu = Vector3::from(cfg.mu);
    let total = cfg.n1 + cfg.n2;
    let mut x = DMatrix::zeros(total, 3);
    let mut y = Vec::with_capacity(total);
    for r in 0..total {
        let z = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        let row = mu + chol * z;
        let eps: f64 = rng.sample::<f64, _>(StandardNormal) * cfg.noise_var.sqrt();
        y.push(cfg.beta[0] + cfg.beta[1] * row[0] + cfg.beta[2] * row[1] + cfg.beta[3] * row[2] + eps);
        x.set_row(r, &row.transpose());
    }
    let clean = x.clone();
    for r in cfg.n1..total {
        let e2: f64 = rng.sample(StandardNormal);
        let e3: f64 = rng.sample(StandardNormal);
        x[(r, 1)] += e2 * cfg.d2_feature_noise[0].sqrt();
        x[(r, 2)] += e3 * cfg.d2_feature_noise[1].sqrt();
    }

    let all = FeatureSet::new(["X1", "X2", "X3"])?;
    let rows1: Vec<usize> = (0..cfg.n1).collect();
    let rows2: Vec<usize> = (cfg.n1..total).collect();
    let make = |values: &DMatrix<f64>, rows: &[usize], keep: &[&str]| -> Result<SplitDataset> {
        let full = DataMatrix::complete(values.clone(), all.clone())?;
        let sub = full.select_rows(rows).select_features(&FeatureSet::new(keep.iter().copied())?)?;
        let labels = LabelVector::numeric("Y", rows.iter().map(|&r| y[r]).collect())?;
        split(Dataset::new(sub, labels)?, cfg.train_fraction)
    };
    Ok(RegressionSimData {
        d1: make(&x, &rows1, &["X2", "X3"])?,
        d2: make(&x, &rows2, &["X1", "X3"])?,
        d1_full: make(&clean, &rows1, &["X1", "X2", "X3"])?,
        d2_full: make(&clean, &rows2, &["X1", "X2", "X3"])?,
    })
}

pub(crate) fn split_point(n: usize, fraction: f64) -> usize {
    ((n as f64) * fraction).round() as usize
}

/// Leading rows become train, the rest test.
pub(crate) fn split(d: Dataset, train_fraction: f64) -> Result<SplitDataset> {
    let cut = split_point(d.n_rows(), train_fraction);
    let train: Vec<usize> = (0..cut).collect();
    let test: Vec<usize> = (cut..d.n_rows()).collect();
    SplitDataset::new(d.select_rows(&train), d.select_rows(&test))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout() {
        let data = gen_regression_sim(&SimulationConfig::default()).unwrap();
        assert_eq!(data.d1.features().names(), ["X2", "X3"]);
        assert_eq!(data.d2.features().names(), ["X1", "X3"]);
        assert_eq!(data.d1.features().intersection(data.d2.features()).names(), ["X3"]);
        assert_eq!(data.d1.train.n_rows(), 210);
        assert_eq!(data.d1.test.n_rows(), 90);
        assert_eq!(data.d2.train.n_rows(), 140);
        assert_eq!(data.d2.test.n_rows(), 60);
    }

    #[test]
    fn noiseless_relation_is_exact() {
        let cfg = SimulationConfig {
            noise_var: 0.0,
            d2_feature_noise: [0.0, 0.0],
            seed: 3,
            ..Default::default()
        };
        let data = gen_regression_sim(&cfg).unwrap();
        for part in [&data.d1_full.train, &data.d2_full.test] {
            let y = part.y.as_numeric().unwrap();
            for r in 0..part.n_rows() {
                let x: Vec<f64> = part.x.row(r).into_iter().map(Option::unwrap).collect();
                let expect = 1.0 + x[0] + 0.5 * x[1] + x[2];
                assert!((y[r] - expect).abs() < 1e-12);
            }
        }
        // the second dataset's observed X3 equals the clean one when noise is off
        let noisy = data.d2.train.x.select_features(&FeatureSet::new(["X3"]).unwrap()).unwrap();
        let clean = data.d2_full.train.x.select_features(&FeatureSet::new(["X3"]).unwrap()).unwrap();
        assert_eq!(noisy, clean);
    }

    #[test]
    fn rejects_bad_covariance() {
        let cfg = SimulationConfig {
            sigma: [[1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SimulationConfig {
            sigma: [[1.0, 0.1, 0.0], [0.2, 1.0, 0.0], [0.0, 0.0, 1.0]],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn same_seed_same_data() {
        let cfg = SimulationConfig {
            seed: 99,
            ..Default::default()
        };
        let a = gen_regression_sim(&cfg).unwrap();
        let b = gen_regression_sim(&cfg).unwrap();
        assert_eq!(a.d1, b.d1);
        assert_eq!(a.d2, b.d2);
    }
}
