use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

/// Missing-completely-at-random corruption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McarConfig {
    pub rate: f64,
    pub seed: u64,
}

/// Mask each observed cell independently with probability `cfg.rate`.
pub fn apply_mcar(x: &DataMatrix, cfg: &McarConfig) -> Result<DataMatrix> {
    let mut rng = super::repeat_rng(cfg.seed, 0);
    apply_mcar_with_rng(x, cfg.rate, &mut rng)
}

/// Column by column, each observed cell is masked with probability `rate`.
/// A column whose draw would leave it with no observed cell is drawn again,
/// so columns that had an observed cell keep at least one.
pub fn apply_mcar_with_rng(x: &DataMatrix, rate: f64, rng: &mut ChaCha8Rng) -> Result<DataMatrix> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidConfig(format!("MCAR rate must lie in [0, 1), got {rate}")));
    }
    let (n, p) = (x.n_rows(), x.n_cols());
    let mut mask = x.mask().clone();
    if rate == 0.0 {
        return Ok(x.clone());
    }
    for c in 0..p {
        let observed: Vec<usize> = (0..n).filter(|&r| x.is_observed(r, c)).collect();
        if observed.is_empty() {
            continue;
        }
        loop {
            let drops: Vec<bool> = observed.iter().map(|_| rng.random_bool(rate)).collect();
            if drops.iter().any(|d| !d) {
                for (&r, &drop) in observed.iter().zip(&drops) {
                    mask[(r, c)] = !drop;
                }
                break;
            }
        }
    }
    let values: DMatrix<f64> = x.values().clone();
    DataMatrix::new(values, mask, x.features().clone())
}
