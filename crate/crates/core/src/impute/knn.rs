use nalgebra::DMatrix;

use super::{ensure_observed_columns, missing_per_column, observed_means, ImputationResult};
use crate::data::DataMatrix;
use crate::error::{Error, Result};

/// k-nearest-neighbour imputation.
///
/// Distances are Euclidean over the features observed in both rows, on
/// column-standardized values, divided by the number of such features before
/// the square root. A missing cell takes the mean of the `k` closest donors
/// that observe its column (ties go to the lower row index). When no donor
/// shares an observed feature with the row, the column mean is used and
/// counted in [`ImputationResult::knn_fallbacks`].
pub fn impute_knn(x: &DataMatrix, k: usize) -> Result<ImputationResult> {
    if k == 0 {
        return Err(Error::InvalidConfig("knn k must be >= 1".into()));
    }
    ensure_observed_columns(x)?;
    let n = x.n_rows();
    let p = x.n_cols();
    let means = observed_means(x);
    let scales: Vec<f64> = (0..p)
        .map(|j| {
            let obs: Vec<f64> = x.observed_column(j).collect();
            if obs.len() < 2 {
                return 1.0;
            }
            let var = obs.iter().map(|v| (v - means[j]).powi(2)).sum::<f64>() / (obs.len() - 1) as f64;
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let z = DMatrix::from_fn(n, p, |r, c| (x.values()[(r, c)] - means[c]) / scales[c]);

    let mut values = x.values().clone();
    let mut fallbacks = 0;
    for r in 0..n {
        let missing: Vec<usize> = (0..p).filter(|&c| !x.is_observed(r, c)).collect();
        if missing.is_empty() {
            continue;
        }
        // (distance, donor) for every other row sharing at least one observed feature
        let dists: Vec<Option<f64>> = (0..n)
            .map(|d| {
                if d == r {
                    return None;
                }
                let mut sum = 0.0;
                let mut shared = 0usize;
                for c in 0..p {
                    if x.is_observed(r, c) && x.is_observed(d, c) {
                        sum += (z[(r, c)] - z[(d, c)]).powi(2);
                        shared += 1;
                    }
                }
                (shared > 0).then(|| (sum / shared as f64).sqrt())
            })
            .collect();
        for &c in &missing {
            let mut donors: Vec<(f64, usize)> = (0..n)
                .filter(|&d| x.is_observed(d, c))
                .filter_map(|d| dists[d].map(|dist| (dist, d)))
                .collect();
            if donors.is_empty() {
                values[(r, c)] = means[c];
                fallbacks += 1;
                continue;
            }
            donors.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let take = donors.len().min(k);
            let sum: f64 = donors[..take].iter().map(|&(_, d)| x.values()[(d, c)]).sum();
            values[(r, c)] = sum / take as f64;
        }
    }
    let matrix = DataMatrix::complete(values, x.features().clone())?;
    let mut result = ImputationResult::plain(matrix, missing_per_column(x));
    result.knn_fallbacks = fallbacks;
    Ok(result)
}
