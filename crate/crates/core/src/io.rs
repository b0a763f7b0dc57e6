//! CSV reading and writing.
//!
//! Canonical form: a header row, `,` separators, no quoting, `.` decimals,
//! `\n` line ends, numbers in shortest round-trip notation and missing cells
//! written as the first configured missing token. Files in canonical form
//! survive [`read_csv`] followed by [`write_csv`] byte for byte.

use std::io::{Read, Write};
use std::path::Path;

use crate::data::{DataMatrix, Dataset, FeatureSet, LabelKind, LabelVector, Labels};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsvOptions {
    pub label: String,
    /// Cell values read as missing; the first one is used when writing.
    pub na: Vec<String>,
    /// Columns carried through by row but kept out of the feature set.
    pub id_columns: Vec<String>,
    /// `None` reads numeric labels when every label parses as a number.
    pub label_kind: Option<LabelKind>,
}

impl CsvOptions {
    pub fn new(label: impl Into<String>) -> Self {
        CsvOptions {
            label: label.into(),
            na: vec![String::new(), "NA".to_string()],
            id_columns: Vec::new(),
            label_kind: None,
        }
    }

    pub fn na_token(&self) -> &str {
        self.na.first().map(String::as_str).unwrap_or("")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    Id(usize),
    Feature(usize),
    Label,
}

/// A dataset plus its id columns and the original column order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub dataset: Dataset,
    pub id_names: Vec<String>,
    /// One row per data row, aligned with `id_names`; `None` is a null marker.
    pub ids: Vec<Vec<Option<String>>>,
    pub layout: Vec<Column>,
}

impl Table {
    /// Table with the default layout: ids, features, then the label.
    pub fn new(dataset: Dataset, id_names: Vec<String>, ids: Vec<Vec<Option<String>>>) -> Result<Self> {
        if ids.len() != dataset.n_rows() || ids.iter().any(|r| r.len() != id_names.len()) {
            return Err(Error::ShapeMismatch("id cells do not match the dataset".into()));
        }
        let mut layout: Vec<Column> = (0..id_names.len()).map(Column::Id).collect();
        layout.extend((0..dataset.features().len()).map(Column::Feature));
        layout.push(Column::Label);
        Ok(Table {
            dataset,
            id_names,
            ids,
            layout,
        })
    }

    pub fn header(&self) -> Vec<String> {
        self.layout
            .iter()
            .map(|c| match *c {
                Column::Id(i) => self.id_names[i].clone(),
                Column::Feature(i) => self.dataset.features().names()[i].clone(),
                Column::Label => self.dataset.y.name().to_string(),
            })
            .collect()
    }
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn format_number(v: f64) -> String {
    format!("{v}")
}

pub fn read_csv_path(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Table> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    read_csv(file, opts).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        Error::SchemaMismatch(m) => Error::SchemaMismatch(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn read_csv<R: Read>(reader: R, opts: &CsvOptions) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse(format!("header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.iter().all(String::is_empty) {
        return Err(Error::Parse("missing header row".into()));
    }
    for (i, h) in header.iter().enumerate() {
        if header[..i].contains(h) {
            return Err(Error::SchemaMismatch(format!("duplicate column `{h}`")));
        }
    }
    let label_pos = header
        .iter()
        .position(|h| *h == opts.label)
        .ok_or_else(|| Error::SchemaMismatch(format!("label column `{}` not found", opts.label)))?;
    for id in &opts.id_columns {
        if id == &opts.label {
            return Err(Error::SchemaMismatch(format!("`{id}` is both label and id column")));
        }
    }

    let mut layout = Vec::with_capacity(header.len());
    let mut id_names = Vec::new();
    let mut feature_names = Vec::new();
    for (i, h) in header.iter().enumerate() {
        if i == label_pos {
            layout.push(Column::Label);
        } else if opts.id_columns.contains(h) {
            layout.push(Column::Id(id_names.len()));
            id_names.push(h.clone());
        } else {
            layout.push(Column::Feature(feature_names.len()));
            feature_names.push(h.clone());
        }
    }
    // id columns that are absent are simply not carried
    let features = FeatureSet::new(feature_names.iter().map(String::as_str))
        .map_err(|e| Error::SchemaMismatch(e.to_string()))?;

    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    let mut ids = Vec::new();
    let mut raw_labels = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let row_no = line + 2;
        let mut cells = Vec::with_capacity(feature_names.len());
        let mut id_cells = Vec::with_capacity(id_names.len());
        for (col, cell) in layout.iter().zip(rec.iter()) {
            let missing = opts.na.iter().any(|t| t == cell);
            match col {
                Column::Label => {
                    if missing {
                        return Err(Error::Parse(format!("line {row_no}: missing label")));
                    }
                    raw_labels.push(cell.to_string());
                }
                Column::Id(_) => id_cells.push((!missing).then(|| cell.to_string())),
                Column::Feature(j) => cells.push(if missing {
                    None
                } else {
                    let v: f64 = cell.trim().parse().map_err(|_| {
                        Error::Parse(format!(
                            "line {row_no}, column `{}`: `{cell}` is not a number",
                            feature_names[*j]
                        ))
                    })?;
                    if !v.is_finite() {
                        return Err(Error::NonFinite(format!("line {row_no}, column `{}`", feature_names[*j])));
                    }
                    Some(v)
                }),
            }
        }
        rows.push(cells);
        ids.push(id_cells);
    }

    let numeric: Option<Vec<f64>> = raw_labels.iter().map(|s| s.trim().parse::<f64>().ok()).collect();
    let y = match (opts.label_kind, numeric) {
        (Some(LabelKind::Categorical), _) | (None, None) => LabelVector::categorical(&opts.label, raw_labels),
        (_, Some(v)) => LabelVector::numeric(&opts.label, v)?,
        (Some(LabelKind::Numeric), None) => {
            return Err(Error::LabelKindMismatch(format!(
                "label column `{}` has non-numeric values",
                opts.label
            )))
        }
    };
    let x = if rows.is_empty() {
        DataMatrix::missing(0, features)
    } else {
        DataMatrix::from_rows(features, &rows)?
    };
    Ok(Table {
        dataset: Dataset::new(x, y)?,
        id_names,
        ids,
        layout,
    })
}

pub fn write_csv<W: Write>(writer: W, table: &Table, na_token: &str) -> Result<()> {
    let io = |e: std::io::Error| Error::Parse(format!("write: {e}"));
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "{}", table.header().join(",")).map_err(io)?;
    let d = &table.dataset;
    for r in 0..d.n_rows() {
        let cells: Vec<String> = table
            .layout
            .iter()
            .map(|c| match *c {
                Column::Id(i) => table.ids[r][i].clone().unwrap_or_else(|| na_token.to_string()),
                Column::Feature(j) => d.x.get(r, j).map(format_number).unwrap_or_else(|| na_token.to_string()),
                Column::Label => match d.y.labels() {
                    Labels::Numeric(v) => format_number(v[r]),
                    Labels::Categorical(v) => v[r].clone(),
                },
            })
            .collect();
        writeln!(w, "{}", cells.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_csv_path(path: impl AsRef<Path>, table: &Table, na_token: &str) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    write_csv(file, table, na_token)
}
