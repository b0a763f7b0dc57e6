use std::path::{Path, PathBuf};

use comimp::bench::check_theorem as run_theorem;
use comimp::io::{read_csv_path, write_csv_path, CsvOptions, Table};
use comimp::merge::{comimp_merge, pca_comimp_merge, MergeReport};
use comimp::pca::{pca_project, PcaModel, RankRule};
use comimp::{Dataset, Error, SplitDataset};
use serde::Serialize;

use crate::{exit, CliResult, CsvArgs, Failure, MergeArgs, PcaMergeArgs, TheoremArgs};

fn csv_options(args: &CsvArgs) -> CsvOptions {
    CsvOptions {
        label: args.label.clone(),
        na: args.na.clone(),
        id_columns: args.id_columns.clone(),
        label_kind: args.label_kind.map(Into::into),
    }
}

fn na_token(args: &CsvArgs) -> String {
    args.na.first().cloned().unwrap_or_default()
}

fn read(path: &Path, opts: &CsvOptions) -> CliResult<Table> {
    read_csv_path(path, opts).map_err(|e| {
        let text = e.to_string();
        let mut f = Failure::from(e);
        if !text.contains(&path.display().to_string()) {
            f.message = format!("{}: {text}", path.display());
        }
        f
    })
}

fn write(path: &Path, table: &Table, na: &str) -> CliResult<()> {
    write_csv_path(path, table, na).map_err(|e| Failure::new(exit::INTERNAL, e.to_string()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::new(exit::INTERNAL, e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Failure::new(exit::INTERNAL, format!("{}: {e}", path.display())))
}

/// Union of the tables' id columns with per-row values; rows from tables
/// lacking a column get `None`.
fn stack_ids(tables: &[&Table]) -> (Vec<String>, Vec<Vec<Option<String>>>) {
    let mut names: Vec<String> = Vec::new();
    for t in tables {
        for n in &t.id_names {
            if !names.contains(n) {
                names.push(n.clone());
            }
        }
    }
    let mut rows = Vec::new();
    for t in tables {
        let pos: Vec<Option<usize>> = names
            .iter()
            .map(|n| t.id_names.iter().position(|m| m == n))
            .collect();
        for r in &t.ids {
            rows.push(pos.iter().map(|p| p.and_then(|i| r[i].clone())).collect());
        }
    }
    (names, rows)
}

#[derive(Serialize)]
struct ReportFile<'a> {
    #[serde(flatten)]
    report: &'a MergeReport,
    seed: u64,
    inputs: Vec<String>,
}

fn paths(list: &[&PathBuf]) -> Vec<String> {
    list.iter().map(|p| p.display().to_string()).collect()
}

pub fn merge(args: &MergeArgs) -> CliResult<u8> {
    let opts = csv_options(&args.csv);
    let cfg = args.imputer.config()?;
    let tables = args
        .inputs
        .iter()
        .map(|p| read(p, &opts))
        .collect::<CliResult<Vec<_>>>()?;
    let datasets: Vec<Dataset> = tables.iter().map(|t| t.dataset.clone()).collect();
    let merged = comimp_merge(&datasets, &cfg)?;
    let (id_names, ids) = stack_ids(&tables.iter().collect::<Vec<_>>());
    let report = merged.report.clone();
    let table = Table::new(merged.data, id_names, ids)?;
    write(&args.output, &table, &na_token(&args.csv))?;

    let report_path = args
        .report
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.report.json", args.output.display())));
    write_json(
        &report_path,
        &ReportFile {
            report: &report,
            seed: args.seed,
            inputs: paths(&args.inputs.iter().collect::<Vec<_>>()),
        },
    )?;
    println!(
        "merged {} rows x {} features from {} files, {} cells imputed ({}) -> {}",
        table.dataset.n_rows(),
        report.union_features.len(),
        args.inputs.len(),
        report.cells_imputed,
        report.imputer,
        args.output.display()
    );
    Ok(exit::OK)
}

#[derive(Serialize)]
struct Reconstruction {
    /// Residual sum of squares of the train block over `n - 1`.
    residual_variance: f64,
    discarded_variance: f64,
    passes: bool,
}

#[derive(Serialize)]
struct BlockSummary {
    dataset: usize,
    tag: String,
    features: Vec<String>,
    components: Vec<String>,
    eigenvalues: Vec<f64>,
    explained_variance_ratio: Vec<f64>,
    total_variance: f64,
    reconstruction: Reconstruction,
}

fn block_summary(
    dataset: usize,
    tag: &str,
    model: &PcaModel,
    train: &Dataset,
) -> CliResult<BlockSummary> {
    let block = train.x.select_features(&model.features)?;
    let scores = pca_project(model, &block, tag)?;
    let rebuilt = model.reconstruct(scores.complete_values()?);
    let original = block.complete_values()?;
    let n = original.nrows();
    let residual_variance = (original - rebuilt).norm_squared() / (n as f64 - 1.0);
    let discarded_variance = model.discarded_variance();
    let passes = (residual_variance - discarded_variance).abs() <= 1e-8 * (1.0 + model.total_variance);
    Ok(BlockSummary {
        dataset,
        tag: tag.to_string(),
        features: model.features.names().to_vec(),
        components: scores.features().names().to_vec(),
        eigenvalues: model.eigenvalues.clone(),
        explained_variance_ratio: model.explained_variance_ratio.clone(),
        total_variance: model.total_variance,
        reconstruction: Reconstruction {
            residual_variance,
            discarded_variance,
            passes,
        },
    })
}

#[derive(Serialize)]
struct PcaSummary {
    shared_features: Vec<String>,
    blocks: Vec<BlockSummary>,
}

#[derive(Serialize)]
struct PcaReportFile<'a> {
    train: &'a MergeReport,
    test: &'a MergeReport,
    seed: u64,
    inputs: Vec<String>,
}

fn with_prefix(prefix: &Path, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{}{suffix}", prefix.display()))
}

pub fn pca_merge(args: &PcaMergeArgs) -> CliResult<u8> {
    let opts = csv_options(&args.csv);
    let cfg = args.imputer.config()?;
    let rule = match (args.components, args.var_explained) {
        (Some(k), _) => RankRule::Fixed(k),
        (None, Some(t)) => RankRule::VarianceThreshold(t),
        (None, None) => RankRule::VarianceThreshold(comimp::pca::DEFAULT_VARIANCE_THRESHOLD),
    };
    let files = [&args.train1, &args.test1, &args.train2, &args.test2];
    let t = files
        .iter()
        .map(|p| read(p, &opts))
        .collect::<CliResult<Vec<_>>>()?;
    let pair = |a: &Table, b: &Table, which: usize| -> CliResult<SplitDataset> {
        SplitDataset::new(a.dataset.clone(), b.dataset.clone())
            .map_err(|e| Failure::new(exit::SCHEMA, format!("dataset {which} train/test: {e}")))
    };
    let d1 = pair(&t[0], &t[1], 1)?;
    let d2 = pair(&t[2], &t[3], 2)?;
    let out = pca_comimp_merge(&d1, &d2, rule, &cfg).map_err(|e| match e {
        Error::HasMissing(m) => Failure::new(exit::PCA_MISSING, format!("PCA block has missing cells: {m}")),
        Error::DegenerateRank { .. } => Failure::usage(e.to_string()),
        other => other.into(),
    })?;

    let na = na_token(&args.csv);
    let (id_names, ids) = stack_ids(&[&t[0], &t[2]]);
    let train = Table::new(out.train.data.clone(), id_names, ids)?;
    let (id_names, ids) = stack_ids(&[&t[1], &t[3]]);
    let test = Table::new(out.test.data.clone(), id_names, ids)?;
    write(&with_prefix(&args.output_prefix, "_train.csv"), &train, &na)?;
    write(&with_prefix(&args.output_prefix, "_test.csv"), &test, &na)?;
    write_json(
        &with_prefix(&args.output_prefix, "_report.json"),
        &PcaReportFile {
            train: &out.train.report,
            test: &out.test.report,
            seed: args.seed,
            inputs: paths(&files),
        },
    )?;
    let mut blocks = Vec::new();
    for (i, (model, d)) in out.models.iter().zip([&d1, &d2]).enumerate() {
        if let Some(m) = model {
            blocks.push(block_summary(i + 1, &format!("q{}", i + 1), m, &d.train)?);
        }
    }
    write_json(
        &with_prefix(&args.output_prefix, "_pca.json"),
        &PcaSummary {
            shared_features: out.shared.names().to_vec(),
            blocks,
        },
    )?;
    println!(
        "train {} rows, test {} rows, header {}",
        train.dataset.n_rows(),
        test.dataset.n_rows(),
        train.header().join(",")
    );
    Ok(exit::OK)
}

pub fn check_theorem(args: &TheoremArgs) -> CliResult<u8> {
    if args.trials == 0 {
        return Err(Failure::usage("--trials must be at least 1"));
    }
    let r = run_theorem(
        args.trials,
        (args.n_min, args.n_max),
        (args.m_min, args.m_max),
        args.seed,
    )
    .map_err(|e| match e {
        Error::InvalidConfig(m) => Failure::usage(m),
        other => Failure::new(exit::INTERNAL, other.to_string()),
    })?;
    println!("trials: {}", r.trials);
    println!("violations: {}", r.violations);
    println!("max_violation: {}", r.max_violation);
    println!("redraws: {}", r.redraws);
    println!(
        "first_trial_sse: d1={} d2={} merged={}",
        r.first.d1, r.first.d2, r.first.merged
    );
    Ok(if r.violations == 0 { exit::OK } else { exit::VIOLATION })
}
