use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use comimp::impute::{ImputerConfig, Lambda, MaxRank, SoftImputeConfig};
use comimp::LabelKind;

mod bench;
mod commands;

/// Exit statuses.
pub mod exit {
    pub const OK: u8 = 0;
    pub const VIOLATION: u8 = 1;
    pub const SCHEMA: u8 = 2;
    pub const ALL_MISSING: u8 = 3;
    pub const PCA_MISSING: u8 = 4;
    pub const BENCH: u8 = 5;
    pub const USAGE: u8 = 64;
    pub const INTERNAL: u8 = 70;
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(exit::USAGE, message)
    }
}

impl From<comimp::Error> for Failure {
    fn from(e: comimp::Error) -> Self {
        use comimp::Error::*;
        let code = match &e {
            AllMissingColumn(_) => exit::ALL_MISSING,
            Parse(_) | SchemaMismatch(_) | DuplicateFeature(_) | EmptyFeatureName | UnknownTarget(_)
            | LabelKindMismatch(_) | ShapeMismatch(_) => exit::SCHEMA,
            InvalidConfig(_) => exit::USAGE,
            _ => exit::INTERNAL,
        };
        Failure::new(code, e.to_string())
    }
}

pub type CliResult<T> = Result<T, Failure>;

#[derive(Parser, Debug)]
#[command(name = "comimp", version, about = "Merge datasets with partially overlapping features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Align, stack and impute two or more CSV files.
    Merge(MergeArgs),
    /// Merge two train/test pairs after PCA-reducing their exclusive features.
    PcaMerge(PcaMergeArgs),
    /// Run a Monte Carlo study and print its summary.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Check the SSE inequality on random regression instances.
    CheckTheorem(TheoremArgs),
}

#[derive(Args, Debug, Clone)]
pub struct CsvArgs {
    /// Label column name.
    #[arg(long)]
    pub label: String,
    /// Cell text read as missing (repeatable); the first is written for missing ids.
    #[arg(long = "na", default_values_t = [String::new(), "NA".to_string()])]
    pub na: Vec<String>,
    /// Comma-separated columns carried through without imputation.
    #[arg(long, value_delimiter = ',')]
    pub id_columns: Vec<String>,
    #[arg(long, value_enum)]
    pub label_kind: Option<LabelKindArg>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum LabelKindArg {
    Numeric,
    Categorical,
}

impl From<LabelKindArg> for LabelKind {
    fn from(k: LabelKindArg) -> Self {
        match k {
            LabelKindArg::Numeric => LabelKind::Numeric,
            LabelKindArg::Categorical => LabelKind::Categorical,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Mean,
    Knn,
    Soft,
}

#[derive(Args, Debug, Clone)]
pub struct ImputerArgs {
    #[arg(long, value_enum, default_value = "soft")]
    pub imputer: Method,
    /// Neighbours for knn.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Soft-impute shrinkage: `auto` or a non-negative number.
    #[arg(long, default_value = "auto")]
    pub lambda: String,
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, default_value_t = 300)]
    pub max_iter: usize,
    /// Soft-impute rank cap: `full` or a positive integer.
    #[arg(long, default_value = "full")]
    pub max_rank: String,
}

impl ImputerArgs {
    pub fn config(&self) -> CliResult<ImputerConfig> {
        let cfg = match self.imputer {
            Method::Mean => ImputerConfig::Mean,
            Method::Knn => ImputerConfig::Knn { k: self.k },
            Method::Soft => {
                let lambda = match self.lambda.as_str() {
                    "auto" => Lambda::Auto,
                    v => Lambda::Value(
                        v.parse()
                            .map_err(|_| Failure::usage(format!("--lambda: `{v}` is not a number")))?,
                    ),
                };
                let max_rank = match self.max_rank.as_str() {
                    "full" => MaxRank::Full,
                    v => MaxRank::Rank(
                        v.parse()
                            .map_err(|_| Failure::usage(format!("--max-rank: `{v}` is not an integer")))?,
                    ),
                };
                ImputerConfig::SoftImpute(SoftImputeConfig {
                    lambda,
                    tol: self.tol,
                    max_iter: self.max_iter,
                    max_rank,
                })
            }
        };
        cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
pub struct MergeArgs {
    /// Input CSV files, merged in the given order.
    #[arg(required = true, num_args = 2..)]
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub csv: CsvArgs,
    #[command(flatten)]
    pub imputer: ImputerArgs,
    #[arg(long, short)]
    pub output: PathBuf,
    /// Report path; defaults to `<output>.report.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Recorded in the report.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("rank").args(["var_explained", "components"])))]
pub struct PcaMergeArgs {
    #[arg(long)]
    pub train1: PathBuf,
    #[arg(long)]
    pub test1: PathBuf,
    #[arg(long)]
    pub train2: PathBuf,
    #[arg(long)]
    pub test2: PathBuf,
    /// Keep the fewest components explaining this variance share (default 0.95).
    #[arg(long)]
    pub var_explained: Option<f64>,
    /// Keep exactly this many components per block.
    #[arg(long)]
    pub components: Option<usize>,
    #[command(flatten)]
    pub csv: CsvArgs,
    #[command(flatten)]
    pub imputer: ImputerArgs,
    /// Writes `<prefix>_train.csv`, `<prefix>_test.csv`, `<prefix>_report.json`, `<prefix>_pca.json`.
    #[arg(long)]
    pub output_prefix: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Subcommand, Debug)]
pub enum BenchCommand {
    /// Regression simulation with two partially overlapping datasets.
    RegressionSim(BenchArgs),
    /// Classification merge study on one source dataset.
    MergeStudy(BenchArgs),
    /// Merge study with MCAR holes in every partition.
    ImputationStudy(BenchArgs),
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML file with study settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Source CSV for merge studies (Wine presets fall back to the bundled copy).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Label column of `--data`.
    #[arg(long)]
    pub label: Option<String>,
    /// seed, seed-failure, wine-three-way or wine-imputation.
    #[arg(long)]
    pub preset: Option<String>,
    /// MCAR rate for imputation studies.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Fill MCAR holes during the merge or impute each dataset first.
    #[arg(long, value_enum)]
    pub handling: Option<bench::HandlingArg>,
    #[arg(long, value_enum)]
    pub classifier: Option<bench::ClassifierArg>,
    #[arg(long, value_enum)]
    pub imputer: Option<Method>,
    /// Also write the summary CSV here.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TheoremArgs {
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub n_min: usize,
    #[arg(long, default_value_t = 50)]
    pub n_max: usize,
    #[arg(long, default_value_t = 5)]
    pub m_min: usize,
    #[arg(long, default_value_t = 50)]
    pub m_max: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Merge(args) => commands::merge(&args),
        Command::PcaMerge(args) => commands::pca_merge(&args),
        Command::Bench(cmd) => bench::run(cmd),
        Command::CheckTheorem(args) => commands::check_theorem(&args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
