use std::path::{Path, PathBuf};

use clap::ValueEnum;
use comimp::bench::{
    run_merge_study, run_regression_study, threads_from_env, MergeProtocol, MissingHandling,
    MonteCarloSummary, SimulationConfig,
};
use comimp::impute::ImputerConfig;
use comimp::io::{read_csv, read_csv_path, CsvOptions};
use comimp::models::ClassifierKind;
use comimp::{Dataset, Error};
use serde::Deserialize;

use crate::{exit, BenchArgs, BenchCommand, CliResult, Failure, Method};

const WINE_CSV: &str = include_str!("../../core/data/wine.csv");

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum HandlingArg {
    DuringMerge,
    SeparateThenMerge,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum ClassifierArg {
    Logistic,
    Svm,
}

/// Study settings file (TOML). Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchFile {
    repeats: Option<usize>,
    seed: Option<u64>,
    imputer: Option<ImputerConfig>,
    simulation: Option<SimulationConfig>,
    study: Option<StudyFile>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct StudyFile {
    data: Option<PathBuf>,
    label: Option<String>,
    preset: Option<String>,
    component_fractions: Option<Vec<f64>>,
    deletions: Option<Vec<Vec<usize>>>,
    train_fraction: Option<f64>,
    mcar_rate: Option<f64>,
    missing_handling: Option<MissingHandling>,
    classifier: Option<ClassifierKind>,
    epochs: Option<usize>,
    l2: Option<f64>,
    learning_rate: Option<f64>,
}

fn load_file(path: &Path) -> CliResult<BenchFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn imputer(args: &BenchArgs, file: &BenchFile) -> ImputerConfig {
    match args.imputer {
        Some(Method::Mean) => ImputerConfig::Mean,
        Some(Method::Knn) => ImputerConfig::knn(),
        Some(Method::Soft) => ImputerConfig::default(),
        None => file.imputer.unwrap_or_default(),
    }
}

fn emit(summary: &MonteCarloSummary, output: Option<&PathBuf>) -> CliResult<()> {
    let csv = summary.to_csv();
    if let Some(path) = output {
        std::fs::write(path, &csv)
            .map_err(|e| Failure::new(exit::INTERNAL, format!("{}: {e}", path.display())))?;
    }
    print!("{csv}\n{}", summary.to_table());
    Ok(())
}

fn bench_failure(e: Error) -> Failure {
    match e {
        Error::InvalidConfig(m) => Failure::usage(m),
        other => Failure::new(exit::BENCH, other.to_string()),
    }
}

pub fn run(cmd: BenchCommand) -> CliResult<u8> {
    match cmd {
        BenchCommand::RegressionSim(args) => regression(&args),
        BenchCommand::MergeStudy(args) => study(&args, "seed"),
        BenchCommand::ImputationStudy(args) => study(&args, "wine-imputation"),
    }
}

fn regression(args: &BenchArgs) -> CliResult<u8> {
    let file = match &args.config {
        Some(p) => load_file(p)?,
        None => BenchFile::default(),
    };
    let mut cfg = file.simulation.clone().unwrap_or_default();
    cfg.seed = args.seed.or(file.seed).unwrap_or(0);
    let repeats = args.repeats.or(file.repeats).unwrap_or(500);
    if repeats == 0 {
        return Err(Failure::usage("--repeats must be at least 1"));
    }
    cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
    let imp = imputer(args, &file);
    let result = run_regression_study(&cfg, repeats, &imp, threads_from_env()).map_err(bench_failure)?;
    emit(&result.summary, args.output.as_ref())?;
    Ok(exit::OK)
}

fn preset(name: &str, rate: f64) -> CliResult<MergeProtocol> {
    Ok(match name {
        "seed" => MergeProtocol::seed(),
        "seed-failure" => MergeProtocol::seed_failure(),
        "wine-three-way" => MergeProtocol::wine_three_way(),
        "wine-imputation" => MergeProtocol::wine_imputation(rate),
        other => {
            return Err(Failure::usage(format!(
                "unknown preset `{other}` (seed, seed-failure, wine-three-way, wine-imputation)"
            )))
        }
    })
}

fn study(args: &BenchArgs, default_preset: &str) -> CliResult<u8> {
    let file = match &args.config {
        Some(p) => load_file(p)?,
        None => BenchFile::default(),
    };
    let sf = file.study.as_ref();
    let name = args
        .preset
        .clone()
        .or_else(|| sf.and_then(|s| s.preset.clone()))
        .unwrap_or_else(|| default_preset.to_string());
    let default_rate = if default_preset == "wine-imputation" { 0.8 } else { 0.0 };
    let rate = args
        .rate
        .or_else(|| sf.and_then(|s| s.mcar_rate))
        .unwrap_or(default_rate);
    let mut p = preset(&name, rate)?;
    if let Some(s) = sf {
        if let Some(v) = &s.component_fractions {
            p.component_fractions = v.clone();
        }
        if let Some(v) = &s.deletions {
            p.deletions = v.clone();
        }
        if let Some(v) = s.train_fraction {
            p.train_fraction = v;
        }
        if let Some(v) = s.missing_handling {
            p.missing_handling = v;
        }
        if let Some(v) = s.classifier {
            p.classifier = v;
        }
        if let Some(v) = s.epochs {
            p.classifier_config.epochs = v;
        }
        if let Some(v) = s.l2 {
            p.classifier_config.l2 = v;
        }
        if s.learning_rate.is_some() {
            p.classifier_config.learning_rate = s.learning_rate;
        }
    }
    p.mcar_rate = rate;
    if let Some(h) = args.handling {
        p.missing_handling = match h {
            HandlingArg::DuringMerge => MissingHandling::DuringMerge,
            HandlingArg::SeparateThenMerge => MissingHandling::SeparateThenMerge,
        };
    }
    if let Some(c) = args.classifier {
        p.classifier = match c {
            ClassifierArg::Logistic => ClassifierKind::Logistic,
            ClassifierArg::Svm => ClassifierKind::LinearSvm,
        };
    }
    p.imputer = imputer(args, &file);
    p.repeats = args.repeats.or(file.repeats).unwrap_or(200);
    p.seed = args.seed.or(file.seed).unwrap_or(0);
    p.classifier_config.seed = p.seed;

    let label = args
        .label
        .clone()
        .or_else(|| sf.and_then(|s| s.label.clone()))
        .unwrap_or_else(|| "class".to_string());
    let data = args.data.clone().or_else(|| sf.and_then(|s| s.data.clone()));
    let source = load_source(data.as_deref(), &label, &name)?;
    p.validate(source.n_rows(), source.features().len())
        .map_err(|e| Failure::usage(e.to_string()))?;
    let result = run_merge_study(&source, &p, threads_from_env()).map_err(bench_failure)?;
    emit(&result.summary, args.output.as_ref())?;
    Ok(exit::OK)
}

fn load_source(path: Option<&Path>, label: &str, preset: &str) -> CliResult<Dataset> {
    let opts = CsvOptions::new(label);
    match path {
        Some(p) => Ok(read_csv_path(p, &opts)?.dataset),
        None if preset.starts_with("wine") => Ok(read_csv(WINE_CSV.as_bytes(), &opts)?.dataset),
        None => Err(Failure::usage(format!(
            "preset `{preset}` needs --data (a CSV with a `{label}` column)"
        ))),
    }
}
