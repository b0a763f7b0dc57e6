use nalgebra::DMatrix;

use super::{ensure_observed_columns, missing_per_column, observed_means, ImputationResult};
use crate::data::DataMatrix;
use crate::error::Result;

/// Replace each missing cell with the mean of its column's observed cells.
pub fn impute_mean(x: &DataMatrix) -> Result<ImputationResult> {
    ensure_observed_columns(x)?;
    let means = observed_means(x);
    let values = DMatrix::from_fn(x.n_rows(), x.n_cols(), |r, c| {
        x.get(r, c).unwrap_or(means[c])
    });
    let matrix = DataMatrix::complete(values, x.features().clone())?;
    Ok(ImputationResult::plain(matrix, missing_per_column(x)))
}
