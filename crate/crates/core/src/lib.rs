//! Vertical merging of datasets whose feature sets only partially overlap.
//!
//! Each dataset is aligned to the union of all features (absent features
//! become fully missing columns), the rows are stacked, and the holes are
//! imputed. An optional PCA step compresses each dataset's exclusive
//! features before merging.
//!
//! ```
//! use comimp::data::{DataMatrix, Dataset, FeatureSet, LabelVector};
//! use comimp::impute::ImputerConfig;
//! use comimp::merge::comimp_merge;
//!
//! let a = Dataset::new(
//!     DataMatrix::from_rows(FeatureSet::new(["x", "y"])?, &[vec![Some(1.0), Some(2.0)]])?,
//!     LabelVector::numeric("t", vec![0.0])?,
//! )?;
//! let b = Dataset::new(
//!     DataMatrix::from_rows(FeatureSet::new(["y", "z"])?, &[vec![Some(4.0), Some(5.0)]])?,
//!     LabelVector::numeric("t", vec![1.0])?,
//! )?;
//! let merged = comimp_merge(&[a, b], &ImputerConfig::Mean)?;
//! assert_eq!(merged.data.features().names(), ["x", "y", "z"]);
//! assert!(merged.data.x.is_complete());
//! # Ok::<(), comimp::Error>(())
//! ```

pub mod bench;
pub mod data;
pub mod error;
pub mod impute;
pub mod io;
pub mod merge;
pub mod models;
pub mod pca;

pub use data::{DataMatrix, Dataset, FeatureSet, LabelKind, LabelVector, SplitDataset};
pub use error::{Error, Result};
pub use impute::{impute, ImputationResult, ImputerConfig, SoftImputeConfig};
pub use merge::{comimp_merge, pca_comimp_merge, sequential_merge, MergeReport, MergedDataset};
pub use pca::{pca_fit, pca_project, PcaModel, RankRule};
