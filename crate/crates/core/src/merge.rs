//! Vertical merging of datasets with partially overlapping features.
//!
//! [`comimp_merge`] aligns every component to the union of feature sets,
//! stacks rows and labels, and imputes the resulting holes.
//! [`pca_comimp_merge`] first replaces each dataset's exclusive features by
//! their principal components, so fewer cells need imputing.

use serde::Serialize;

use crate::data::{
    align, feature_union, vstack, vstack_labels, DataMatrix, Dataset, FeatureSet, SplitDataset,
};
use crate::error::{Error, Result};
use crate::impute::{impute, ImputerConfig};
use crate::pca::{pca_fit, pca_project, PcaModel, RankRule};

/// Provenance of one merge.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergeReport {
    pub union_features: FeatureSet,
    pub shared_features: FeatureSet,
    /// Half-open `(start, end)` row span of each component in the output.
    pub row_ranges: Vec<(usize, usize)>,
    /// Cells inserted as missing by alignment.
    pub cells_created: usize,
    /// Cells already missing in the inputs.
    pub cells_missing_in_inputs: usize,
    pub cells_imputed: usize,
    pub imputer: ImputerConfig,
    pub imputer_iterations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergedDataset {
    pub data: Dataset,
    pub report: MergeReport,
}

impl MergedDataset {
    /// Rows contributed by component `i`.
    pub fn component(&self, i: usize) -> Dataset {
        let (start, end) = self.report.row_ranges[i];
        let rows: Vec<usize> = (start..end).collect();
        self.data.select_rows(&rows)
    }
}

/// Merge two or more datasets by feature union, stacking and imputation.
pub fn comimp_merge(datasets: &[Dataset], cfg: &ImputerConfig) -> Result<MergedDataset> {
    if datasets.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "merging needs at least 2 datasets, got {}",
            datasets.len()
        )));
    }
    cfg.validate()?;
    let union = feature_union(datasets.iter().map(Dataset::features));
    let shared = datasets
        .iter()
        .skip(1)
        .fold(datasets[0].features().clone(), |acc, d| acc.intersection(d.features()));

    let aligned = datasets
        .iter()
        .map(|d| align(&d.x, &union))
        .collect::<Result<Vec<DataMatrix>>>()?;
    let stacked = vstack(&aligned.iter().collect::<Vec<_>>())?;
    let labels = vstack_labels(&datasets.iter().map(|d| &d.y).collect::<Vec<_>>())?;

    let mut row_ranges = Vec::with_capacity(datasets.len());
    let mut start = 0;
    for d in datasets {
        row_ranges.push((start, start + d.n_rows()));
        start += d.n_rows();
    }
    let cells_created: usize = datasets
        .iter()
        .map(|d| d.n_rows() * (union.len() - d.features().len()))
        .sum();
    let cells_missing_in_inputs: usize = datasets.iter().map(|d| d.x.missing_count()).sum();

    let imputed = impute(&stacked, cfg)?;
    let report = MergeReport {
        union_features: union,
        shared_features: shared,
        row_ranges,
        cells_created,
        cells_missing_in_inputs,
        cells_imputed: imputed.total_imputed(),
        imputer: *cfg,
        imputer_iterations: imputed.iterations,
    };
    Ok(MergedDataset {
        data: Dataset::new(imputed.matrix, labels)?,
        report,
    })
}

/// Output of [`pca_comimp_merge`]: merged train and test partitions plus the
/// PCA models fit on each dataset's exclusive block (if it had one).
#[derive(Debug, Clone)]
pub struct PcaMergeOutput {
    pub train: MergedDataset,
    pub test: MergedDataset,
    pub shared: FeatureSet,
    pub exclusive: [FeatureSet; 2],
    pub models: [Option<PcaModel>; 2],
}

/// Two-dataset merge with PCA reduction of the non-shared features.
///
/// PCA is fit on each training block and reused on the matching test block.
/// Imputation runs on each partition independently.
pub fn pca_comimp_merge(
    d1: &SplitDataset,
    d2: &SplitDataset,
    rule: RankRule,
    cfg: &ImputerConfig,
) -> Result<PcaMergeOutput> {
    pca_comimp_merge_tagged(d1, d2, rule, cfg, ("q1", "q2"))
}

/// [`pca_comimp_merge`] with explicit name prefixes for the reduced blocks.
pub fn pca_comimp_merge_tagged(
    d1: &SplitDataset,
    d2: &SplitDataset,
    rule: RankRule,
    cfg: &ImputerConfig,
    tags: (&str, &str),
) -> Result<PcaMergeOutput> {
    let (f1, f2) = (d1.features(), d2.features());
    let shared = f1.intersection(f2);
    let q1 = f1.difference(f2);
    let q2 = f2.difference(f1);

    let (r1, m1) = reduce(d1, &shared, &q1, rule, tags.0)?;
    let (r2, m2) = reduce(d2, &shared, &q2, rule, tags.1)?;

    let train = comimp_merge(&[r1.train, r2.train], cfg)?;
    let test = comimp_merge(&[r1.test, r2.test], cfg)?;
    Ok(PcaMergeOutput {
        train,
        test,
        shared,
        exclusive: [q1, q2],
        models: [m1, m2],
    })
}

/// Replace the exclusive block `q` of `d` by its principal components.
fn reduce(
    d: &SplitDataset,
    shared: &FeatureSet,
    q: &FeatureSet,
    rule: RankRule,
    tag: &str,
) -> Result<(SplitDataset, Option<PcaModel>)> {
    let shared_train = d.train.x.select_features(shared)?;
    let shared_test = d.test.x.select_features(shared)?;
    if q.is_empty() {
        let train = Dataset::new(shared_train, d.train.y.clone())?;
        let test = Dataset::new(shared_test, d.test.y.clone())?;
        return Ok((SplitDataset::new(train, test)?, None));
    }
    let block_train = d.train.x.select_features(q)?;
    let block_test = d.test.x.select_features(q)?;
    let model = pca_fit(&block_train, rule).map_err(|e| tag_missing(e, tag, "train"))?;
    let reduced_train = pca_project(&model, &block_train, tag)?;
    let reduced_test =
        pca_project(&model, &block_test, tag).map_err(|e| tag_missing(e, tag, "test"))?;
    let train = Dataset::new(
        DataMatrix::hstack(&[&shared_train, &reduced_train])?,
        d.train.y.clone(),
    )?;
    let test = Dataset::new(
        DataMatrix::hstack(&[&shared_test, &reduced_test])?,
        d.test.y.clone(),
    )?;
    Ok((SplitDataset::new(train, test)?, Some(model)))
}

fn tag_missing(e: Error, tag: &str, part: &str) -> Error {
    match e {
        Error::HasMissing(msg) => Error::HasMissing(format!("{tag} block ({part}): {msg}")),
        other => other,
    }
}

/// Per-stage reports of a [`sequential_merge`].
#[derive(Debug, Clone)]
pub struct SequentialMergeOutput {
    pub train: MergedDataset,
    pub test: MergedDataset,
    pub stages: Vec<PcaMergeOutput>,
    /// Row span of each input dataset in the final train partition.
    pub train_row_ranges: Vec<(usize, usize)>,
    /// Row span of each input dataset in the final test partition.
    pub test_row_ranges: Vec<(usize, usize)>,
}

impl SequentialMergeOutput {
    /// Imputed cells per stage as (train, test).
    pub fn imputed_per_stage(&self) -> Vec<(usize, usize)> {
        self.stages
            .iter()
            .map(|s| (s.train.report.cells_imputed, s.test.report.cells_imputed))
            .collect()
    }
}

/// Left fold of [`pca_comimp_merge`]: `((d1 + d2) + d3) + ...`.
///
/// The first stage uses the tags `q1`/`q2`; stage `s > 1` uses `s{s}_q1` and
/// `s{s}_q2` so reduced feature names never collide across stages.
pub fn sequential_merge(
    datasets: &[SplitDataset],
    rule: RankRule,
    cfg: &ImputerConfig,
) -> Result<SequentialMergeOutput> {
    if datasets.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "merging needs at least 2 datasets, got {}",
            datasets.len()
        )));
    }
    let mut stages: Vec<PcaMergeOutput> = Vec::with_capacity(datasets.len() - 1);
    let mut acc = datasets[0].clone();
    for (i, next) in datasets[1..].iter().enumerate() {
        let stage = i + 1;
        let (t1, t2) = if stage == 1 {
            ("q1".to_string(), "q2".to_string())
        } else {
            (format!("s{stage}_q1"), format!("s{stage}_q2"))
        };
        let out = pca_comimp_merge_tagged(&acc, next, rule, cfg, (&t1, &t2))?;
        acc = SplitDataset::new(out.train.data.clone(), out.test.data.clone())?;
        stages.push(out);
    }
    let spans = |part: fn(&SplitDataset) -> &Dataset| {
        let mut start = 0;
        datasets
            .iter()
            .map(|d| {
                let n = part(d).n_rows();
                let span = (start, start + n);
                start += n;
                span
            })
            .collect::<Vec<_>>()
    };
    let train_row_ranges = spans(|d| &d.train);
    let test_row_ranges = spans(|d| &d.test);
    let last = stages.last().expect("at least one stage").clone();
    Ok(SequentialMergeOutput {
        train: last.train,
        test: last.test,
        stages,
        train_row_ranges,
        test_row_ranges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LabelVector;
    use nalgebra::DMatrix;

    fn fs(names: &[&str]) -> FeatureSet {
        FeatureSet::new(names.iter().copied()).unwrap()
    }

    fn ds(names: &[&str], rows: &[Vec<f64>], y: &[f64]) -> Dataset {
        let rows: Vec<Vec<Option<f64>>> = rows.iter().map(|r| r.iter().map(|&v| Some(v)).collect()).collect();
        Dataset::new(
            DataMatrix::from_rows(fs(names), &rows).unwrap(),
            LabelVector::numeric("y", y.to_vec()).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn hand_filled_two_by_three() {
        let d1 = ds(&["a", "b"], &[vec![1.0, 2.0], vec![3.0, 4.0]], &[0.0, 1.0]);
        let d2 = ds(&["b", "c"], &[vec![5.0, 10.0], vec![6.0, 20.0]], &[2.0, 3.0]);
        let merged = comimp_merge(&[d1, d2], &ImputerConfig::Mean).unwrap();
        // column means: a over D1 rows = 2, c over D2 rows = 15
        let oracle = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 2.0, 15.0, 3.0, 4.0, 15.0, 2.0, 5.0, 10.0, 2.0, 6.0, 20.0],
        );
        assert_eq!(merged.data.x.values(), &oracle);
        assert_eq!(merged.report.cells_created, 4);
        assert_eq!(merged.report.cells_imputed, 4);
        assert_eq!(merged.report.row_ranges, vec![(0, 2), (2, 4)]);
        assert_eq!(merged.report.shared_features, fs(&["b"]));
        assert_eq!(merged.data.y.as_numeric().unwrap(), &[0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn identical_schemas_are_a_plain_stack() {
        let d1 = ds(&["a", "b"], &[vec![1.0, 2.0], vec![3.0, 4.0]], &[0.0, 1.0]);
        let d2 = ds(&["a", "b"], &[vec![7.0, 8.0]], &[5.0]);
        let merged = comimp_merge(&[d1.clone(), d2.clone()], &ImputerConfig::soft()).unwrap();
        let stacked = vstack(&[&d1.x, &d2.x]).unwrap();
        assert_eq!(merged.data.x, stacked);
        assert_eq!(merged.report.cells_created, 0);
        assert_eq!(merged.report.cells_imputed, 0);
    }

    #[test]
    fn needs_two_datasets() {
        let d1 = ds(&["a"], &[vec![1.0]], &[0.0]);
        assert!(matches!(
            comimp_merge(&[d1], &ImputerConfig::Mean),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn label_mismatch_propagates() {
        let d1 = ds(&["a"], &[vec![1.0]], &[0.0]);
        let d2 = Dataset::new(
            DataMatrix::from_rows(fs(&["a"]), &[vec![Some(2.0)]]).unwrap(),
            LabelVector::categorical("y", vec!["x"]),
        )
        .unwrap();
        assert!(matches!(
            comimp_merge(&[d1, d2], &ImputerConfig::Mean),
            Err(Error::LabelKindMismatch(_))
        ));
    }
}
