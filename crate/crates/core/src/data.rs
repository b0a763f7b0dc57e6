//! Matrices with explicit missingness, ordered feature names and labels.
//!
//! Everything here is immutable after construction. The alignment transform
//! [`align`] and the stacking helpers [`vstack`] / [`vstack_labels`] are the
//! building blocks for both merge algorithms in [`crate::merge`].

use std::collections::HashMap;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered, duplicate-free list of feature names.
#[derive(Clone, Default)]
pub struct FeatureSet {
    names: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl FeatureSet {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut set = FeatureSet::default();
        for name in names {
            let name = name.into();
            if name.is_empty() {
                return Err(Error::EmptyFeatureName);
            }
            if set.lookup.contains_key(&name) {
                return Err(Error::DuplicateFeature(name));
            }
            set.push_unchecked(name);
        }
        Ok(set)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    fn push_unchecked(&mut self, name: String) {
        self.lookup.insert(name.clone(), self.names.len());
        self.names.push(name);
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.lookup.contains_key(name)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.lookup.get(name).copied()
    }

    /// Names of `self` that also appear in `other`, in `self`'s order.
    pub fn intersection(&self, other: &FeatureSet) -> FeatureSet {
        self.filtered(|n| other.contains(n))
    }

    /// Names of `self` that do not appear in `other`, in `self`'s order.
    pub fn difference(&self, other: &FeatureSet) -> FeatureSet {
        self.filtered(|n| !other.contains(n))
    }

    fn filtered(&self, keep: impl Fn(&str) -> bool) -> FeatureSet {
        let mut out = FeatureSet::default();
        for name in self.names.iter().filter(|n| keep(n)) {
            out.push_unchecked(name.clone());
        }
        out
    }
}

impl PartialEq for FeatureSet {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names
    }
}

impl Eq for FeatureSet {}

impl fmt::Debug for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.names.iter()).finish()
    }
}

impl Serialize for FeatureSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.names.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FeatureSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let names = Vec::<String>::deserialize(d)?;
        FeatureSet::new(names).map_err(serde::de::Error::custom)
    }
}

/// Union of feature sets in first-appearance order, scanning inputs in order.
pub fn feature_union<'a, I>(sets: I) -> FeatureSet
where
    I: IntoIterator<Item = &'a FeatureSet>,
{
    let mut out = FeatureSet::default();
    for set in sets {
        for name in set.names() {
            if !out.contains(name) {
                out.push_unchecked(name.clone());
            }
        }
    }
    out
}

pub fn feature_intersection(a: &FeatureSet, b: &FeatureSet) -> FeatureSet {
    a.intersection(b)
}

pub fn feature_difference(a: &FeatureSet, b: &FeatureSet) -> FeatureSet {
    a.difference(b)
}

/// Real-valued matrix with an observation mask (`true` = observed).
///
/// Masked cells hold `NaN` in `values`; no consumer reads them. Equality
/// compares features, masks and observed cells only.
#[derive(Clone)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    mask: DMatrix<bool>,
    features: FeatureSet,
}

impl PartialEq for DataMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.features == other.features
            && self.mask == other.mask
            && self
                .values
                .iter()
                .zip(other.values.iter())
                .zip(self.mask.iter())
                .all(|((a, b), &m)| !m || a == b)
    }
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>, mask: DMatrix<bool>, features: FeatureSet) -> Result<Self> {
        if values.shape() != mask.shape() {
            return Err(Error::ShapeMismatch(format!(
                "values are {:?} but mask is {:?}",
                values.shape(),
                mask.shape()
            )));
        }
        if values.ncols() != features.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} columns but {} feature names",
                values.ncols(),
                features.len()
            )));
        }
        let mut values = values;
        for (v, &m) in values.iter_mut().zip(mask.iter()) {
            if !m {
                *v = f64::NAN;
            }
        }
        Ok(DataMatrix {
            values,
            mask,
            features,
        })
    }

    /// Fully observed matrix.
    pub fn complete(values: DMatrix<f64>, features: FeatureSet) -> Result<Self> {
        let mask = DMatrix::from_element(values.nrows(), values.ncols(), true);
        Self::new(values, mask, features)
    }

    /// Build from row-major cells where `None` marks a missing value.
    pub fn from_rows(features: FeatureSet, rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let p = features.len();
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != p) {
            return Err(Error::ShapeMismatch(format!(
                "row {i} has {} cells, expected {p}",
                row.len()
            )));
        }
        let values = DMatrix::from_fn(rows.len(), p, |r, c| rows[r][c].unwrap_or(f64::NAN));
        let mask = DMatrix::from_fn(rows.len(), p, |r, c| rows[r][c].is_some());
        Self::new(values, mask, features)
    }

    /// Matrix with every cell missing.
    pub fn missing(n_rows: usize, features: FeatureSet) -> Self {
        let p = features.len();
        DataMatrix {
            values: DMatrix::from_element(n_rows, p, f64::NAN),
            mask: DMatrix::from_element(n_rows, p, false),
            features,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn features(&self) -> &FeatureSet {
        &self.features
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn mask(&self) -> &DMatrix<bool> {
        &self.mask
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.mask[(row, col)].then(|| self.values[(row, col)])
    }

    pub fn is_observed(&self, row: usize, col: usize) -> bool {
        self.mask[(row, col)]
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn missing_count(&self) -> usize {
        self.mask.len() - self.observed_count()
    }

    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    /// Values of a fully observed matrix, or `HasMissing`.
    pub fn complete_values(&self) -> Result<&DMatrix<f64>> {
        if self.is_complete() {
            Ok(&self.values)
        } else {
            Err(Error::HasMissing(format!(
                "{} of {} cells are missing",
                self.missing_count(),
                self.mask.len()
            )))
        }
    }

    /// Observed values of column `col`.
    pub fn observed_column(&self, col: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_rows()).filter_map(move |r| self.get(r, col))
    }

    pub fn row(&self, row: usize) -> Vec<Option<f64>> {
        (0..self.n_cols()).map(|c| self.get(row, c)).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> DataMatrix {
        let p = self.n_cols();
        DataMatrix {
            values: DMatrix::from_fn(rows.len(), p, |r, c| self.values[(rows[r], c)]),
            mask: DMatrix::from_fn(rows.len(), p, |r, c| self.mask[(rows[r], c)]),
            features: self.features.clone(),
        }
    }

    /// Restrict to `subset`, which must be contained in this matrix's features.
    pub fn select_features(&self, subset: &FeatureSet) -> Result<DataMatrix> {
        let cols = subset
            .iter()
            .map(|n| {
                self.features
                    .position(n)
                    .ok_or_else(|| Error::SchemaMismatch(format!("no feature `{n}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let n = self.n_rows();
        Ok(DataMatrix {
            values: DMatrix::from_fn(n, cols.len(), |r, c| self.values[(r, cols[c])]),
            mask: DMatrix::from_fn(n, cols.len(), |r, c| self.mask[(r, cols[c])]),
            features: subset.clone(),
        })
    }

    /// Same cells, new feature names (same count).
    pub fn with_features(self, features: FeatureSet) -> Result<DataMatrix> {
        DataMatrix::new(self.values, self.mask, features)
    }

    /// Column-wise concatenation of matrices with equal row counts and
    /// disjoint feature names.
    pub fn hstack(parts: &[&DataMatrix]) -> Result<DataMatrix> {
        let n = parts.first().map_or(0, |m| m.n_rows());
        if let Some(bad) = parts.iter().find(|m| m.n_rows() != n) {
            return Err(Error::ShapeMismatch(format!(
                "hstack of {} rows with {} rows",
                n,
                bad.n_rows()
            )));
        }
        let names: Vec<String> = parts
            .iter()
            .flat_map(|m| m.features.names().iter().cloned())
            .collect();
        let features = FeatureSet::new(names)?;
        let mut cols = Vec::with_capacity(features.len());
        for m in parts {
            for c in 0..m.n_cols() {
                cols.push((*m, c));
            }
        }
        Ok(DataMatrix {
            values: DMatrix::from_fn(n, cols.len(), |r, j| cols[j].0.values[(r, cols[j].1)]),
            mask: DMatrix::from_fn(n, cols.len(), |r, j| cols[j].0.mask[(r, cols[j].1)]),
            features,
        })
    }
}

impl fmt::Debug for DataMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DataMatrix {:?}", self.features)?;
        for r in 0..self.n_rows() {
            let cells: Vec<String> = self
                .row(r)
                .into_iter()
                .map(|c| c.map_or_else(|| "*".to_string(), |v| v.to_string()))
                .collect();
            writeln!(f, "  [{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Labels {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

/// Named label column; labels are never missing.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVector {
    name: String,
    labels: Labels,
}

impl LabelVector {
    pub fn numeric(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("label at row {i}")));
        }
        Ok(LabelVector {
            name: name.into(),
            labels: Labels::Numeric(values),
        })
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, values: Vec<S>) -> Self {
        LabelVector {
            name: name.into(),
            labels: Labels::Categorical(values.into_iter().map(Into::into).collect()),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> LabelKind {
        match self.labels {
            Labels::Numeric(_) => LabelKind::Numeric,
            Labels::Categorical(_) => LabelKind::Categorical,
        }
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn len(&self) -> usize {
        match &self.labels {
            Labels::Numeric(v) => v.len(),
            Labels::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_numeric(&self) -> Option<&[f64]> {
        match &self.labels {
            Labels::Numeric(v) => Some(v),
            Labels::Categorical(_) => None,
        }
    }

    pub fn as_categorical(&self) -> Option<&[String]> {
        match &self.labels {
            Labels::Categorical(v) => Some(v),
            Labels::Numeric(_) => None,
        }
    }

    /// Label of row `i` rendered as text.
    pub fn display(&self, i: usize) -> String {
        match &self.labels {
            Labels::Numeric(v) => v[i].to_string(),
            Labels::Categorical(v) => v[i].clone(),
        }
    }

    pub fn select(&self, rows: &[usize]) -> LabelVector {
        let labels = match &self.labels {
            Labels::Numeric(v) => Labels::Numeric(rows.iter().map(|&r| v[r]).collect()),
            Labels::Categorical(v) => Labels::Categorical(rows.iter().map(|&r| v[r].clone()).collect()),
        };
        LabelVector {
            name: self.name.clone(),
            labels,
        }
    }
}

/// Feature matrix plus labels with matching row count.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DataMatrix,
    pub y: LabelVector,
}

impl Dataset {
    pub fn new(x: DataMatrix, y: LabelVector) -> Result<Self> {
        if x.n_rows() != y.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} feature rows but {} labels",
                x.n_rows(),
                y.len()
            )));
        }
        Ok(Dataset { x, y })
    }

    pub fn n_rows(&self) -> usize {
        self.x.n_rows()
    }

    pub fn features(&self) -> &FeatureSet {
        self.x.features()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(rows),
            y: self.y.select(rows),
        }
    }

    /// Drop the named features, keeping the rest in order.
    pub fn drop_features(&self, names: &FeatureSet) -> Result<Dataset> {
        let keep = self.features().difference(names);
        Ok(Dataset {
            x: self.x.select_features(&keep)?,
            y: self.y.clone(),
        })
    }
}

/// A dataset arriving as a train/test pair with a shared schema.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub train: Dataset,
    pub test: Dataset,
}

impl SplitDataset {
    pub fn new(train: Dataset, test: Dataset) -> Result<Self> {
        if train.features() != test.features() {
            return Err(Error::SchemaMismatch(format!(
                "train features {:?} differ from test features {:?}",
                train.features(),
                test.features()
            )));
        }
        if train.y.kind() != test.y.kind() || train.y.name() != test.y.name() {
            return Err(Error::LabelKindMismatch(
                "train and test labels differ in kind or name".into(),
            ));
        }
        Ok(SplitDataset { train, test })
    }

    pub fn features(&self) -> &FeatureSet {
        self.train.features()
    }
}

/// Rearrange `x` into `target` order, inserting all-missing columns for
/// features `x` lacks.
pub fn align(x: &DataMatrix, target: &FeatureSet) -> Result<DataMatrix> {
    if let Some(name) = x.features().iter().find(|n| !target.contains(n)) {
        return Err(Error::UnknownTarget(name.to_string()));
    }
    let source: Vec<Option<usize>> = target.iter().map(|n| x.features().position(n)).collect();
    let n = x.n_rows();
    let values = DMatrix::from_fn(n, target.len(), |r, c| {
        source[c].map_or(f64::NAN, |s| x.values()[(r, s)])
    });
    let mask = DMatrix::from_fn(n, target.len(), |r, c| {
        source[c].is_some_and(|s| x.mask()[(r, s)])
    });
    Ok(DataMatrix {
        values,
        mask,
        features: target.clone(),
    })
}

/// Stack matrices with identical feature sets row-wise, in input order.
pub fn vstack(matrices: &[&DataMatrix]) -> Result<DataMatrix> {
    let first = matrices
        .first()
        .ok_or_else(|| Error::SchemaMismatch("nothing to stack".into()))?;
    let features = first.features().clone();
    if let Some(bad) = matrices.iter().find(|m| m.features() != &features) {
        return Err(Error::SchemaMismatch(format!(
            "cannot stack {:?} under {:?}",
            bad.features(),
            features
        )));
    }
    let total: usize = matrices.iter().map(|m| m.n_rows()).sum();
    let p = features.len();
    let mut values = DMatrix::from_element(total, p, f64::NAN);
    let mut mask = DMatrix::from_element(total, p, false);
    let mut offset = 0;
    for m in matrices {
        let n = m.n_rows();
        values.view_mut((offset, 0), (n, p)).copy_from(m.values());
        mask.view_mut((offset, 0), (n, p)).copy_from(m.mask());
        offset += n;
    }
    Ok(DataMatrix {
        values,
        mask,
        features,
    })
}

/// Concatenate label vectors sharing kind and name.
pub fn vstack_labels(labels: &[&LabelVector]) -> Result<LabelVector> {
    let first = labels
        .first()
        .ok_or_else(|| Error::LabelKindMismatch("nothing to stack".into()))?;
    for l in labels {
        if l.kind() != first.kind() {
            return Err(Error::LabelKindMismatch(format!(
                "`{}` is {:?} but `{}` is {:?}",
                first.name(),
                first.kind(),
                l.name(),
                l.kind()
            )));
        }
        if l.name() != first.name() {
            return Err(Error::LabelKindMismatch(format!(
                "label names differ: `{}` vs `{}`",
                first.name(),
                l.name()
            )));
        }
    }
    let stacked = match first.labels() {
        Labels::Numeric(_) => Labels::Numeric(
            labels
                .iter()
                .flat_map(|l| l.as_numeric().unwrap_or_default().iter().copied())
                .collect(),
        ),
        Labels::Categorical(_) => Labels::Categorical(
            labels
                .iter()
                .flat_map(|l| l.as_categorical().unwrap_or_default().iter().cloned())
                .collect(),
        ),
    };
    Ok(LabelVector {
        name: first.name().to_string(),
        labels: stacked,
    })
}
