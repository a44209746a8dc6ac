//! Cell-list CSV: one row per cell, one column per variable plus a count
//! column. Levels are ordered by first appearance in the file.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use deconfound_core::{JointTable, Role, Schema, TableKind, Variable};

use crate::error::{Error, Result};

pub const DEFAULT_COUNT_COLUMN: &str = "count";

#[derive(Clone, Debug, PartialEq)]
pub struct TableFileSpec {
    pub path: PathBuf,
    /// Variable columns and their roles. Every non-count column must appear.
    pub roles: Vec<(String, Role)>,
    /// `None` reads microdata: one row per subject, no count column.
    pub count_column: Option<String>,
    /// Add up repeated cells instead of rejecting them.
    pub merge_duplicates: bool,
}

impl TableFileSpec {
    pub fn new(path: impl Into<PathBuf>, roles: Vec<(String, Role)>) -> Self {
        Self {
            path: path.into(),
            roles,
            count_column: Some(DEFAULT_COUNT_COLUMN.into()),
            merge_duplicates: false,
        }
    }

    pub fn with_count_column(mut self, name: impl Into<String>) -> Self {
        self.count_column = Some(name.into());
        self
    }

    pub fn microdata(mut self) -> Self {
        self.count_column = None;
        self
    }

    pub fn merging(mut self) -> Self {
        self.merge_duplicates = true;
        self
    }
}

pub fn load_csv(spec: &TableFileSpec) -> Result<JointTable> {
    let file = File::open(&spec.path).map_err(|source| Error::Io {
        path: spec.path.clone(),
        source,
    })?;
    read_csv(file, spec)
}

/// Same as [`load_csv`] on any reader; `spec.path` is ignored.
pub fn read_csv<R: Read>(reader: R, spec: &TableFileSpec) -> Result<JointTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();

    let mut count_idx = None;
    // (column index, name, role) in header order
    let mut columns: Vec<(usize, String, Role)> = Vec::new();
    for (i, name) in header.iter().enumerate() {
        if spec.count_column.as_deref() == Some(name) {
            if count_idx.replace(i).is_some() {
                return Err(Error::DuplicateColumn(name.into()));
            }
            continue;
        }
        match spec.roles.iter().find(|(n, _)| n == name) {
            Some((_, role)) => {
                if columns.iter().any(|(_, n, _)| n == name) {
                    return Err(Error::DuplicateColumn(name.into()));
                }
                columns.push((i, name.into(), *role));
            }
            None => return Err(Error::UnmappedColumn(name.into())),
        }
    }
    for (name, _) in &spec.roles {
        if !columns.iter().any(|(_, n, _)| n == name) {
            return Err(Error::MissingColumn(name.clone()));
        }
    }
    if let (Some(name), None) = (&spec.count_column, count_idx) {
        return Err(Error::MissingColumn(name.clone()));
    }

    let mut levels: Vec<Vec<String>> = vec![Vec::new(); columns.len()];
    let mut cells: HashMap<Vec<usize>, u64> = HashMap::new();
    let mut rows = 0usize;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let mut key = Vec::with_capacity(columns.len());
        for (k, (i, _, _)) in columns.iter().enumerate() {
            let label = &record[*i];
            let idx = match levels[k].iter().position(|l| l == label) {
                Some(idx) => idx,
                None => {
                    levels[k].push(label.to_string());
                    levels[k].len() - 1
                }
            };
            key.push(idx);
        }
        let count = match count_idx {
            Some(i) => parse_count(&record[i], line)?,
            None => 1,
        };
        rows += 1;
        match cells.get_mut(&key) {
            Some(total) if spec.merge_duplicates || count_idx.is_none() => *total += count,
            Some(_) => {
                let labels: Vec<&str> = key
                    .iter()
                    .enumerate()
                    .map(|(k, &l)| levels[k][l].as_str())
                    .collect();
                return Err(Error::DuplicateRow {
                    line,
                    cell: format!("({})", labels.join(", ")),
                });
            }
            None => {
                cells.insert(key, count);
            }
        }
    }
    if rows == 0 {
        return Err(Error::Empty);
    }

    let variables = columns
        .into_iter()
        .zip(levels)
        .map(|((_, name, role), levels)| Variable::new(name, role, levels))
        .collect::<deconfound_core::Result<Vec<_>>>()?;
    let schema = Schema::new(variables)?;
    let mut weights = vec![0.0; schema.n_cells()];
    for (key, count) in cells {
        weights[schema.cell_index(&key)] = count as f64;
    }
    Ok(JointTable::from_weights(
        schema,
        weights,
        TableKind::Counts,
    )?)
}

fn parse_count(text: &str, line: u64) -> Result<u64> {
    let bad = || Error::InvalidCount {
        line,
        value: text.into(),
    };
    if let Ok(v) = text.parse::<u64>() {
        return Ok(v);
    }
    // accept "12.0" style integers
    let v: f64 = text.parse().map_err(|_| bad())?;
    if v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v < u64::MAX as f64 {
        Ok(v as u64)
    } else {
        Err(bad())
    }
}

/// Writes every cell, zeros included, in index order so a reload sees the
/// same level order.
pub fn write_csv<W: Write>(t: &JointTable, writer: W, count_column: &str) -> Result<()> {
    let schema = t.schema();
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = schema.variables().iter().map(|v| v.name()).collect();
    header.push(count_column);
    w.write_record(&header)?;
    for (i, weight) in t.weights().iter().enumerate() {
        let levels = schema.cell_levels(i);
        let mut row: Vec<String> = levels
            .iter()
            .enumerate()
            .map(|(v, &l)| schema.variable(v).level(l).to_string())
            .collect();
        row.push(weight.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn save_csv(t: &JointTable, path: &Path, count_column: &str) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv(t, file, count_column)
}

/// Role map covering every variable of `schema`, for re-reading what
/// [`write_csv`] wrote.
pub fn roles_of(schema: &Schema) -> Vec<(String, Role)> {
    schema
        .variables()
        .iter()
        .map(|v| (v.name().to_string(), v.role()))
        .collect()
}
