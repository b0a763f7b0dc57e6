//! Data generators, MCAR corruption, Monte Carlo studies and the SSE
//! inequality checker.
//!
//! Every study is reproducible from its configuration and a master seed.
//! Repeat `i` draws from its own ChaCha8 stream (`seed`, stream `i`), and
//! results are reduced in repeat order whatever the thread count.

mod mcar;
mod sim;
mod study;
mod theorem;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

pub use mcar::{apply_mcar, apply_mcar_with_rng, McarConfig};
pub use sim::{gen_regression_sim, gen_regression_sim_with_rng, RegressionSimData, SimulationConfig};
pub use study::{
    run_merge_study, run_regression_study, MergeProtocol, MergeStudyResult, MissingHandling,
    RegressionStudyResult,
};
pub use theorem::{
    check_theorem, draw_instance, evaluate_instance, tolerance, TheoremInstance, TheoremReport,
    TheoremSses,
};

/// Environment variable capping the worker threads of a study.
pub const THREADS_ENV: &str = "COMIMP_THREADS";

/// Thread cap from [`THREADS_ENV`], if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Generator for repeat `index` under `master_seed`.
pub fn repeat_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Run `task` for every repeat index, optionally on a capped thread pool,
/// returning results in index order or the lowest-index failure.
pub(crate) fn run_repeats<T, F>(repeats: usize, threads: Option<usize>, task: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let run = || -> Vec<Result<T>> { (0..repeats).into_par_iter().map(&task).collect() };
    let results = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };
    results
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            r.map_err(|e| Error::RepeatFailed {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Mean and variance of one metric for one model on one test partition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryEntry {
    pub model: String,
    pub partition: String,
    pub mean: f64,
    /// Unbiased sample variance across repeats (0 for a single repeat).
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub metric: String,
    pub repeats: usize,
    pub master_seed: u64,
    pub entries: Vec<SummaryEntry>,
}

impl MonteCarloSummary {
    /// Summarize per-repeat rows; column `j` of each row belongs to `labels[j]`.
    pub fn from_rows(
        metric: &str,
        master_seed: u64,
        labels: &[(String, String)],
        rows: &[Vec<f64>],
    ) -> Self {
        let n = rows.len();
        let entries = labels
            .iter()
            .enumerate()
            .map(|(j, (model, partition))| {
                let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
                let variance = if n > 1 {
                    rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (n - 1) as f64
                } else {
                    0.0
                };
                SummaryEntry {
                    model: model.clone(),
                    partition: partition.clone(),
                    mean,
                    variance,
                }
            })
            .collect();
        MonteCarloSummary {
            metric: metric.to_string(),
            repeats: n,
            master_seed,
            entries,
        }
    }

    pub fn get(&self, model: &str, partition: &str) -> Option<&SummaryEntry> {
        self.entries
            .iter()
            .find(|e| e.model == model && e.partition == partition)
    }

    /// CSV with a header row, shortest round-trip number formatting and `\n` line ends.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,partition,metric,mean,variance,repeats,seed\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                e.model, e.partition, self.metric, e.mean, e.variance, self.repeats, self.master_seed
            ));
        }
        out
    }

    /// Fixed-width table for terminals.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{} over {} repeats (seed {})\n{:<8} {:<10} {:>12} {:>12}\n",
            self.metric, self.repeats, self.master_seed, "model", "partition", "mean", "variance"
        );
        for e in &self.entries {
            out.push_str(&format!(
                "{:<8} {:<10} {:>12.6} {:>12.6}\n",
                e.model, e.partition, e.mean, e.variance
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn repeat_streams_differ_and_are_stable() {
        let a: u64 = repeat_rng(7, 0).random();
        let b: u64 = repeat_rng(7, 1).random();
        let a2: u64 = repeat_rng(7, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, a2);
    }

    #[test]
    fn run_repeats_preserves_order_and_reports_first_failure() {
        let out = run_repeats(50, Some(3), |i| Ok(i * 2)).unwrap();
        assert_eq!(out, (0..50).map(|i| i * 2).collect::<Vec<_>>());
        let err = run_repeats(10, Some(2), |i| {
            if i >= 4 {
                Err(Error::SingleClass)
            } else {
                Ok(i)
            }
        });
        assert_eq!(
            err.unwrap_err(),
            Error::RepeatFailed {
                index: 4,
                source: Box::new(Error::SingleClass)
            }
        );
    }

    #[test]
    fn summary_statistics() {
        let labels = vec![("f".to_string(), "test".to_string())];
        let rows = vec![vec![1.0], vec![2.0], vec![3.0]];
        let s = MonteCarloSummary::from_rows("mse", 1, &labels, &rows);
        assert_eq!(s.entries[0].mean, 2.0);
        assert_eq!(s.entries[0].variance, 1.0);
        assert_eq!(
            s.to_csv(),
            "model,partition,metric,mean,variance,repeats,seed\nf,test,mse,2,1,3,1\n"
        );
    }
}
