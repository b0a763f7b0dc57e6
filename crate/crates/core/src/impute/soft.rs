use nalgebra::DMatrix;

use super::{
    ensure_observed_columns, missing_per_column, observed_means, ImputationResult, Lambda, MaxRank,
    SoftImputeConfig,
};
use crate::data::DataMatrix;
use crate::error::{Error, Result};

const SVD_EPS: f64 = 1e-14;
const SVD_MAX_SWEEPS: usize = 10_000;

/// Soft-thresholded SVD completion.
///
/// Starting from the column-mean fill `Z0`, each step overlays the observed
/// cells of `x` on the current iterate and replaces it with the SVD of that
/// matrix, singular values shrunk by `lambda` (and truncated to `max_rank`).
/// Iteration stops once `||Z_new - Z||_F / ||Z||_F < tol` or after
/// `max_iter` steps. The objective
/// `0.5 * sum_observed (x - Z)^2 + lambda * ||Z||_*`
/// is recorded for every iterate in `objective_trace` (the mean fill
/// only when no rank cap applies, since it may exceed the cap).
pub fn impute_soft(x: &DataMatrix, cfg: &SoftImputeConfig) -> Result<ImputationResult> {
    super::ImputerConfig::SoftImpute(*cfg).validate()?;
    ensure_observed_columns(x)?;
    let (n, p) = (x.n_rows(), x.n_cols());
    let means = observed_means(x);
    let mut z = DMatrix::from_fn(n, p, |r, c| x.get(r, c).unwrap_or(means[c]));

    let first = svd(z.clone())?;
    let lambda = match cfg.lambda {
        Lambda::Auto => first.singular.first().copied().unwrap_or(0.0) / 50.0,
        Lambda::Value(v) => v,
    };
    let rank_cap = match cfg.max_rank {
        MaxRank::Full => n.min(p),
        MaxRank::Rank(r) => r.min(n.min(p)),
    };

    // Z0 only belongs in the trace when it satisfies the rank cap.
    let mut trace = Vec::new();
    if rank_cap >= n.min(p) {
        trace.push(objective(x, &z, first.singular.iter().sum(), lambda));
    }
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let filled = overlay(x, &z);
        let dec = svd(filled)?;
        let (next, nuclear) = dec.shrink(lambda, rank_cap);
        let denom = z.norm();
        let change = if denom > 0.0 {
            (&next - &z).norm() / denom
        } else {
            next.norm()
        };
        z = next;
        trace.push(objective(x, &z, nuclear, lambda));
        if !change.is_finite() {
            return Err(Error::NonFinite("soft-impute iterate diverged".into()));
        }
        if change < cfg.tol {
            break;
        }
    }

    let values = overlay(x, &z);
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("soft-impute produced non-finite cells".into()));
    }
    let matrix = DataMatrix::complete(values, x.features().clone())?;
    Ok(ImputationResult {
        matrix,
        cells_imputed: missing_per_column(x),
        iterations: Some(iterations),
        final_objective: trace.last().copied(),
        objective_trace: trace,
        knn_fallbacks: 0,
    })
}

fn overlay(x: &DataMatrix, z: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.n_rows(), x.n_cols(), |r, c| x.get(r, c).unwrap_or(z[(r, c)]))
}

fn objective(x: &DataMatrix, z: &DMatrix<f64>, nuclear: f64, lambda: f64) -> f64 {
    let mut fit = 0.0;
    for c in 0..x.n_cols() {
        for r in 0..x.n_rows() {
            if let Some(v) = x.get(r, c) {
                fit += (v - z[(r, c)]).powi(2);
            }
        }
    }
    0.5 * fit + lambda * nuclear
}

struct Decomposition {
    u: DMatrix<f64>,
    v_t: DMatrix<f64>,
    /// Descending.
    singular: Vec<f64>,
    order: Vec<usize>,
}

impl Decomposition {
    /// Rank-capped soft-thresholded reconstruction and its nuclear norm.
    fn shrink(&self, lambda: f64, rank_cap: usize) -> (DMatrix<f64>, f64) {
        let mut out = DMatrix::zeros(self.u.nrows(), self.v_t.ncols());
        let mut nuclear = 0.0;
        for (&idx, &s) in self.order.iter().zip(&self.singular).take(rank_cap) {
            let shrunk = s - lambda;
            if shrunk <= 0.0 {
                break;
            }
            nuclear += shrunk;
            out += self.u.column(idx) * self.v_t.row(idx) * shrunk;
        }
        (out, nuclear)
    }
}

fn svd(m: DMatrix<f64>) -> Result<Decomposition> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("soft-impute input to SVD".into()));
    }
    if m.is_empty() {
        return Ok(Decomposition {
            u: DMatrix::zeros(m.nrows(), 0),
            v_t: DMatrix::zeros(0, m.ncols()),
            singular: Vec::new(),
            order: Vec::new(),
        });
    }
    let dec = nalgebra::linalg::SVD::try_new(m, true, true, SVD_EPS, SVD_MAX_SWEEPS)
        .ok_or_else(|| Error::NonFinite("SVD did not converge".into()))?;
    let (u, v_t) = match (dec.u, dec.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::NonFinite("SVD did not return singular vectors".into())),
    };
    let mut order: Vec<usize> = (0..dec.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        dec.singular_values[b]
            .total_cmp(&dec.singular_values[a])
            .then(a.cmp(&b))
    });
    let singular = order.iter().map(|&i| dec.singular_values[i]).collect();
    Ok(Decomposition {
        u,
        v_t,
        singular,
        order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureSet;

    fn m(rows: &[Vec<Option<f64>>]) -> DataMatrix {
        let names: Vec<String> = (0..rows[0].len()).map(|i| format!("f{i}")).collect();
        DataMatrix::from_rows(FeatureSet::new(names).unwrap(), rows).unwrap()
    }

    fn assert_monotone(trace: &[f64]) {
        for w in trace.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0),
                "objective rose from {} to {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn rank_one_completion() {
        // the unique rank-1 completion of [[1,2],[2,4],[3,*]] has 6 in the hole
        let x = m(&[
            vec![Some(1.0), Some(2.0)],
            vec![Some(2.0), Some(4.0)],
            vec![Some(3.0), None],
        ]);
        let cfg = SoftImputeConfig {
            lambda: Lambda::Value(1e-6),
            tol: 1e-12,
            max_iter: 10_000,
            max_rank: MaxRank::Rank(1),
        };
        let out = impute_soft(&x, &cfg).unwrap();
        let filled = out.matrix.get(2, 1).unwrap();
        assert!((filled - 6.0).abs() < 1e-3, "got {filled}");
        assert_monotone(&out.objective_trace);
    }

    #[test]
    fn worked_example_auto_lambda_is_monotone() {
        let x = m(&[
            vec![Some(120.0), Some(80.0), None],
            vec![Some(150.0), Some(70.0), None],
            vec![Some(140.0), Some(80.0), None],
            vec![Some(135.0), Some(85.0), None],
            vec![None, Some(90.0), Some(100.0)],
            vec![None, Some(85.0), Some(150.0)],
            vec![None, Some(92.0), Some(170.0)],
        ]);
        let cfg = SoftImputeConfig::default();
        let out = impute_soft(&x, &cfg).unwrap();
        assert!(out.iterations.unwrap() <= cfg.max_iter);
        assert_eq!(out.objective_trace.len(), out.iterations.unwrap() + 1);
        assert_monotone(&out.objective_trace);
        assert_eq!(out.cells_imputed, vec![3, 0, 4]);
    }

    #[test]
    fn zero_lambda_complete_matrix_stops_after_one_step() {
        let x = m(&[
            vec![Some(1.0), Some(-2.0)],
            vec![Some(0.5), Some(4.0)],
            vec![Some(3.0), Some(1.0)],
        ]);
        let cfg = SoftImputeConfig {
            lambda: Lambda::Value(0.0),
            ..Default::default()
        };
        let out = impute_soft(&x, &cfg).unwrap();
        assert_eq!(out.iterations, Some(1));
        assert_eq!(out.matrix, x);
    }

    #[test]
    fn observed_cells_are_bit_exact() {
        let x = m(&[
            vec![Some(0.1), None, Some(0.3)],
            vec![Some(1.7), Some(2.2), None],
            vec![None, Some(-0.4), Some(9.1)],
            vec![Some(3.3), Some(1.1), Some(0.7)],
        ]);
        let out = impute_soft(&x, &SoftImputeConfig::default()).unwrap();
        for r in 0..4 {
            for c in 0..3 {
                if let Some(v) = x.get(r, c) {
                    assert_eq!(out.matrix.get(r, c).unwrap().to_bits(), v.to_bits());
                }
            }
        }
        assert_monotone(&out.objective_trace);
    }
}
