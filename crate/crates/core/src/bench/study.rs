use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mcar::apply_mcar_with_rng;
use super::sim::{gen_regression_sim_with_rng, split_point, SimulationConfig};
use super::{repeat_rng, run_repeats, MonteCarloSummary};
use crate::data::{Dataset, FeatureSet, SplitDataset};
use crate::error::{Error, Result};
use crate::impute::{impute, ImputerConfig};
use crate::merge::comimp_merge;
use crate::models::{accuracy, fit_classifier, fit_ols, mse, ClassifierConfig, ClassifierKind};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionStudyResult {
    pub summary: MonteCarloSummary,
    /// Per repeat: MSE of f1 on test1, f2 on test2, f on the merged test set,
    /// then f on the test1 and test2 slices.
    pub rows: Vec<Vec<f64>>,
}

fn labels(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
    pairs
        .iter()
        .map(|(m, p)| (m.to_string(), p.to_string()))
        .collect()
}

/// Fit f1, f2 on their own training sets and f on the merged training set,
/// then score each on the matching test data.
pub fn run_regression_study(
    cfg: &SimulationConfig,
    repeats: usize,
    imputer: &ImputerConfig,
    threads: Option<usize>,
) -> Result<RegressionStudyResult> {
    if repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be >= 1".into()));
    }
    cfg.validate()?;
    imputer.validate()?;
    let rows = run_repeats(repeats, threads, |i| {
        let mut rng = repeat_rng(cfg.seed, i as u64);
        regression_repeat(cfg, imputer, &mut rng)
    })?;
    let names = labels(&[
        ("f1", "test1"),
        ("f2", "test2"),
        ("f", "test"),
        ("f", "test1"),
        ("f", "test2"),
    ]);
    Ok(RegressionStudyResult {
        summary: MonteCarloSummary::from_rows("mse", cfg.seed, &names, &rows),
        rows,
    })
}

fn regression_repeat(
    cfg: &SimulationConfig,
    imputer: &ImputerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let data = gen_regression_sim_with_rng(cfg, rng)?;
    let (d1, d2) = (&data.d1, &data.d2);
    let f1 = fit_ols(&d1.train.x, &d1.train.y)?;
    let f2 = fit_ols(&d2.train.x, &d2.train.y)?;
    let train = comimp_merge(&[d1.train.clone(), d2.train.clone()], imputer)?;
    let test = comimp_merge(&[d1.test.clone(), d2.test.clone()], imputer)?;
    let f = fit_ols(&train.data.x, &train.data.y)?;
    let slice1 = test.component(0);
    let slice2 = test.component(1);
    Ok(vec![
        mse(&f1, &d1.test.x, &d1.test.y)?,
        mse(&f2, &d2.test.x, &d2.test.y)?,
        mse(&f, &test.data.x, &test.data.y)?,
        mse(&f, &slice1.x, &slice1.y)?,
        mse(&f, &slice2.x, &slice2.y)?,
    ])
}

/// Where corrupted cells get filled when MCAR is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingHandling {
    /// The merge imputes MCAR holes and structural holes together.
    DuringMerge,
    /// Each component is imputed on its own first; the merge then fills
    /// only the structural holes.
    SeparateThenMerge,
}

/// Classification merge experiment on one source dataset.
///
/// Per repeat the source rows are shuffled and cut into components by
/// `component_fractions` (rounded, last component takes the remainder).
/// Component `i` loses the source columns `deletions[i]`, is split into
/// train and test by `train_fraction`, and optionally gets MCAR holes in
/// both partitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeProtocol {
    pub component_fractions: Vec<f64>,
    /// Source column indices removed from each component.
    pub deletions: Vec<Vec<usize>>,
    pub train_fraction: f64,
    pub mcar_rate: f64,
    pub missing_handling: MissingHandling,
    pub classifier: ClassifierKind,
    pub classifier_config: ClassifierConfig,
    pub imputer: ImputerConfig,
    pub repeats: usize,
    pub seed: u64,
}

impl MergeProtocol {
    fn base(fractions: Vec<f64>, deletions: Vec<Vec<usize>>) -> Self {
        MergeProtocol {
            component_fractions: fractions,
            deletions,
            train_fraction: 0.5,
            mcar_rate: 0.0,
            missing_handling: MissingHandling::DuringMerge,
            classifier: ClassifierKind::Logistic,
            classifier_config: ClassifierConfig::default(),
            imputer: ImputerConfig::default(),
            repeats: 200,
            seed: 0,
        }
    }

    /// Seed data: first two columns gone from D1, last column from D2.
    pub fn seed() -> Self {
        Self::base(vec![0.7, 0.3], vec![vec![0, 1], vec![6]])
    }

    /// Seed data with the first three columns gone from D1 and the last four from D2.
    pub fn seed_failure() -> Self {
        Self::base(vec![0.7, 0.3], vec![vec![0, 1, 2], vec![3, 4, 5, 6]])
    }

    /// Wine data, first two columns gone from D1 and last two from D2, plus
    /// MCAR holes at `rate`.
    pub fn wine_imputation(rate: f64) -> Self {
        MergeProtocol {
            mcar_rate: rate,
            ..Self::base(vec![0.7, 0.3], vec![vec![0, 1], vec![11, 12]])
        }
    }

    /// Wine data cut into three equal parts: first column gone from D1,
    /// last eight from D2, fifth and sixth from D3.
    pub fn wine_three_way() -> Self {
        Self::base(
            vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            vec![vec![0], (5..13).collect(), vec![4, 5]],
        )
    }

    pub fn validate(&self, n_rows: usize, n_cols: usize) -> Result<()> {
        let k = self.component_fractions.len();
        if k < 2 {
            return Err(Error::InvalidConfig("a merge study needs at least 2 components".into()));
        }
        if self.deletions.len() != k {
            return Err(Error::InvalidConfig(format!(
                "{k} components but {} deletion lists",
                self.deletions.len()
            )));
        }
        if self.component_fractions.iter().any(|&f| f <= 0.0)
            || (self.component_fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::InvalidConfig("component fractions must be positive and sum to 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig("train_fraction must lie in (0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.mcar_rate) {
            return Err(Error::InvalidConfig("mcar_rate must lie in [0, 1)".into()));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidConfig("repeats must be >= 1".into()));
        }
        for del in &self.deletions {
            if let Some(&c) = del.iter().find(|&&c| c >= n_cols) {
                return Err(Error::InvalidConfig(format!(
                    "deletion index {c} out of range for {n_cols} columns"
                )));
            }
            let kept = (0..n_cols).filter(|c| !del.contains(c)).count();
            if kept == 0 {
                return Err(Error::InvalidConfig("a component would keep no columns".into()));
            }
        }
        for size in self.component_sizes(n_rows) {
            let train = split_point(size, self.train_fraction);
            if train < 2 || size - train < 1 {
                return Err(Error::InvalidConfig(format!(
                    "component of {size} rows is too small to split"
                )));
            }
        }
        self.imputer.validate()
    }

    fn component_sizes(&self, n: usize) -> Vec<usize> {
        let k = self.component_fractions.len();
        let mut sizes: Vec<usize> = self.component_fractions[..k - 1]
            .iter()
            .map(|&f| split_point(n, f))
            .collect();
        let used: usize = sizes.iter().sum();
        sizes.push(n.saturating_sub(used));
        sizes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergeStudyResult {
    pub summary: MonteCarloSummary,
    /// Per repeat: accuracy of each f_i on test_i, then of f on each test_i slice.
    pub rows: Vec<Vec<f64>>,
}

impl MergeStudyResult {
    /// Mean accuracy gain of the merged model over f_i on slice `i` (zero-based).
    pub fn gain(&self, i: usize) -> f64 {
        let part = format!("test{}", i + 1);
        let own = self.summary.get(&format!("f{}", i + 1), &part).map(|e| e.mean);
        let merged = self.summary.get("f", &part).map(|e| e.mean);
        merged.unwrap_or(f64::NAN) - own.unwrap_or(f64::NAN)
    }
}

pub fn run_merge_study(
    source: &Dataset,
    protocol: &MergeProtocol,
    threads: Option<usize>,
) -> Result<MergeStudyResult> {
    protocol.validate(source.n_rows(), source.features().len())?;
    let rows = run_repeats(protocol.repeats, threads, |i| {
        let mut rng = repeat_rng(protocol.seed, i as u64);
        merge_repeat(source, protocol, &mut rng)
    })?;
    let k = protocol.component_fractions.len();
    let mut names: Vec<(String, String)> = (1..=k).map(|i| (format!("f{i}"), format!("test{i}"))).collect();
    names.extend((1..=k).map(|i| ("f".to_string(), format!("test{i}"))));
    Ok(MergeStudyResult {
        summary: MonteCarloSummary::from_rows("accuracy", protocol.seed, &names, &rows),
        rows,
    })
}

/// Shuffle, cut and corrupt the source into split components.
fn make_components(
    source: &Dataset,
    protocol: &MergeProtocol,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<SplitDataset>> {
    let mut order: Vec<usize> = (0..source.n_rows()).collect();
    order.shuffle(rng);
    let names = source.features().names();
    let mut start = 0;
    let mut out = Vec::new();
    for (size, del) in protocol.component_sizes(source.n_rows()).into_iter().zip(&protocol.deletions) {
        let rows = &order[start..start + size];
        start += size;
        let dropped = FeatureSet::new(del.iter().map(|&c| names[c].as_str()))?;
        let part = source.select_rows(rows).drop_features(&dropped)?;
        let cut = split_point(size, protocol.train_fraction);
        let train_rows: Vec<usize> = (0..cut).collect();
        let test_rows: Vec<usize> = (cut..size).collect();
        let mut train = part.select_rows(&train_rows);
        let mut test = part.select_rows(&test_rows);
        if protocol.mcar_rate > 0.0 {
            train.x = apply_mcar_with_rng(&train.x, protocol.mcar_rate, rng)?;
            test.x = apply_mcar_with_rng(&test.x, protocol.mcar_rate, rng)?;
        }
        out.push(SplitDataset::new(train, test)?);
    }
    Ok(out)
}

fn filled(d: &Dataset, imputer: &ImputerConfig) -> Result<Dataset> {
    if d.x.is_complete() {
        return Ok(d.clone());
    }
    Dataset::new(impute(&d.x, imputer)?.matrix, d.y.clone())
}

fn merge_repeat(source: &Dataset, protocol: &MergeProtocol, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let comps = make_components(source, protocol, rng)?;
    let imp = &protocol.imputer;
    // component models always see separately imputed data
    let own: Vec<SplitDataset> = comps
        .iter()
        .map(|c| SplitDataset::new(filled(&c.train, imp)?, filled(&c.test, imp)?))
        .collect::<Result<_>>()?;
    let merge_inputs = match protocol.missing_handling {
        MissingHandling::DuringMerge => &comps,
        MissingHandling::SeparateThenMerge => &own,
    };
    let train = comimp_merge(&merge_inputs.iter().map(|c| c.train.clone()).collect::<Vec<_>>(), imp)?;
    let test = comimp_merge(&merge_inputs.iter().map(|c| c.test.clone()).collect::<Vec<_>>(), imp)?;
    let cc = &protocol.classifier_config;
    let f = fit_classifier(protocol.classifier, &train.data.x, &train.data.y, cc)?;

    let mut row = Vec::with_capacity(2 * own.len());
    for c in &own {
        let fi = fit_classifier(protocol.classifier, &c.train.x, &c.train.y, cc)?;
        row.push(accuracy(&fi, &c.test.x, &c.test.y)?);
    }
    for i in 0..own.len() {
        let slice = test.component(i);
        row.push(accuracy(&f, &slice.x, &slice.y)?);
    }
    Ok(row)
}
