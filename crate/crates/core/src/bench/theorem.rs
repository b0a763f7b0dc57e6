use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::fit_least_squares;

/// One draw for the SSE inequality: a one-feature dataset `(u1, y)` and a
/// two-feature dataset `(v1, v2, z)`, all features centered.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoremInstance {
    pub u1: DVector<f64>,
    pub v1: DVector<f64>,
    pub v2: DVector<f64>,
    pub y: DVector<f64>,
    pub z: DVector<f64>,
}

impl TheoremInstance {
    /// Merged design: rows `(u1, 0)` over `(v1, v2)`. The missing `v2` cells
    /// get the centered mean, which is zero.
    pub fn merged_design(&self) -> DMatrix<f64> {
        let (n, m) = (self.u1.len(), self.v1.len());
        DMatrix::from_fn(n + m, 2, |r, c| match (r < n, c) {
            (true, 0) => self.u1[r],
            (true, _) => 0.0,
            (false, 0) => self.v1[r - n],
            (false, _) => self.v2[r - n],
        })
    }

    pub fn merged_labels(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.y.len() + self.z.len(),
            self.y.iter().chain(self.z.iter()).copied(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoremSses {
    pub d1: f64,
    pub d2: f64,
    pub merged: f64,
}

impl TheoremSses {
    /// Amount by which `d1 + d2` exceeds `merged`; positive means the inequality failed.
    pub fn gap(&self) -> f64 {
        self.d1 + self.d2 - self.merged
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremReport {
    pub trials: usize,
    pub violations: usize,
    /// Largest positive gap over all trials (0 when none).
    pub max_violation: f64,
    /// Rank-deficient draws that were replaced.
    pub redraws: usize,
    pub first: TheoremSses,
}

fn centered(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    let mut v = DVector::from_fn(len, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mean = v.mean();
    v.add_scalar_mut(-mean);
    v
}

/// Draw in the order u1, v1, v2, y, z.
pub fn draw_instance(rng: &mut ChaCha8Rng, n: usize, m: usize) -> TheoremInstance {
    let u1 = centered(rng, n);
    let v1 = centered(rng, m);
    let v2 = centered(rng, m);
    let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let z = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
    TheoremInstance { u1, v1, v2, y, z }
}

pub fn evaluate_instance(inst: &TheoremInstance) -> Result<TheoremSses> {
    let n = inst.u1.len();
    let u = DMatrix::from_column_slice(n, 1, inst.u1.as_slice());
    let v = DMatrix::from_columns(&[inst.v1.clone(), inst.v2.clone()]);
    let d1 = fit_least_squares(&u, inst.y.as_slice())?.sse_train;
    let d2 = fit_least_squares(&v, inst.z.as_slice())?.sse_train;
    let merged = fit_least_squares(&inst.merged_design(), inst.merged_labels().as_slice())?.sse_train;
    Ok(TheoremSses { d1, d2, merged })
}

/// Slack under which a positive gap is still treated as rounding.
pub fn tolerance(merged_sse: f64) -> f64 {
    1e-8 * (1.0 + merged_sse)
}

/// Check `SSE_D >= SSE_D1 + SSE_D2` on `trials` random instances with sizes
/// drawn uniformly from the inclusive ranges.
pub fn check_theorem(
    trials: usize,
    n_range: (usize, usize),
    m_range: (usize, usize),
    seed: u64,
) -> Result<TheoremReport> {
    check_theorem_with_threads(trials, n_range, m_range, seed, super::threads_from_env())
}

pub(crate) fn check_theorem_with_threads(
    trials: usize,
    n_range: (usize, usize),
    m_range: (usize, usize),
    seed: u64,
    threads: Option<usize>,
) -> Result<TheoremReport> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be >= 1".into()));
    }
    if n_range.0 < 3 || m_range.0 < 4 || n_range.0 > n_range.1 || m_range.0 > m_range.1 {
        return Err(Error::InvalidConfig(format!(
            "size ranges must satisfy 3 <= n, 4 <= m and lo <= hi, got n {n_range:?}, m {m_range:?}"
        )));
    }
    let outcomes = super::run_repeats(trials, threads, |i| {
        let mut rng = super::repeat_rng(seed, i as u64);
        let n = rng.random_range(n_range.0..=n_range.1);
        let m = rng.random_range(m_range.0..=m_range.1);
        let mut redraws = 0usize;
        loop {
            match evaluate_instance(&draw_instance(&mut rng, n, m)) {
                Ok(s) => return Ok((s, redraws)),
                Err(Error::RankDeficient(_)) if redraws < 100 => redraws += 1,
                Err(e) => return Err(e),
            }
        }
    })?;
    let mut report = TheoremReport {
        trials,
        violations: 0,
        max_violation: 0.0,
        redraws: 0,
        first: outcomes[0].0,
    };
    for (s, redraws) in &outcomes {
        report.redraws += redraws;
        let gap = s.gap();
        if gap > tolerance(s.merged) {
            report.violations += 1;
        }
        report.max_violation = report.max_violation.max(gap);
    }
    Ok(report)
}
