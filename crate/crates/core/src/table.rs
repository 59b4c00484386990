//! Column-major feature table with optional binary labels and an optional
//! continuous regression target.
//!
//! CSV layout: a header row of feature names, then one row per example. A
//! column named `target` holds the regression target and a final column
//! named `label` holds 0/1 class labels; both are optional.

use std::collections::HashSet;
use std::io::{Read, Write};

use crate::error::TableError;

pub const LABEL_COLUMN: &str = "label";
pub const TARGET_COLUMN: &str = "target";

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    labels: Option<Vec<u8>>,
    targets: Option<Vec<f64>>,
}

impl FeatureTable {
    pub fn new(
        names: Vec<String>,
        columns: Vec<Vec<f64>>,
        labels: Option<Vec<u8>>,
        targets: Option<Vec<f64>>,
    ) -> Result<Self, TableError> {
        if names.len() != columns.len() {
            return Err(TableError::Shape(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let mut seen = HashSet::new();
        for n in &names {
            if n == LABEL_COLUMN || n == TARGET_COLUMN || !seen.insert(n.as_str()) {
                return Err(TableError::DuplicateColumn(n.clone()));
            }
        }
        let n_rows = columns
            .first()
            .map(Vec::len)
            .or(labels.as_ref().map(Vec::len))
            .or(targets.as_ref().map(Vec::len))
            .unwrap_or(0);
        if columns.iter().any(|c| c.len() != n_rows)
            || labels.as_ref().is_some_and(|l| l.len() != n_rows)
            || targets.as_ref().is_some_and(|t| t.len() != n_rows)
        {
            return Err(TableError::Shape("columns differ in length".into()));
        }
        if let Some(l) = &labels {
            if let Some((row, v)) = l.iter().enumerate().find(|(_, &v)| v > 1) {
                return Err(TableError::BadLabel {
                    row,
                    value: v.to_string(),
                });
            }
        }
        Ok(Self {
            names,
            columns,
            labels,
            targets,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.columns
            .first()
            .map(Vec::len)
            .or(self.labels.as_ref().map(Vec::len))
            .or(self.targets.as_ref().map(Vec::len))
            .unwrap_or(0)
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.columns[i]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn targets(&self) -> Option<&[f64]> {
        self.targets.as_deref()
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[r]).collect()
    }

    pub fn with_labels(mut self, labels: Option<Vec<u8>>) -> Result<Self, TableError> {
        self.labels = labels;
        FeatureTable::new(self.names, self.columns, self.labels, self.targets)
    }

    pub fn with_targets(mut self, targets: Option<Vec<f64>>) -> Result<Self, TableError> {
        self.targets = targets;
        FeatureTable::new(self.names, self.columns, self.labels, self.targets)
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureTable {
        FeatureTable {
            names: self.names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&r| c[r]).collect())
                .collect(),
            labels: self.labels.as_ref().map(|l| rows.iter().map(|&r| l[r]).collect()),
            targets: self.targets.as_ref().map(|t| rows.iter().map(|&r| t[r]).collect()),
        }
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, TableError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut seen = HashSet::new();
        for h in &header {
            if !seen.insert(h.as_str()) {
                return Err(TableError::DuplicateColumn(h.clone()));
            }
        }
        let label_col = header.iter().position(|h| h == LABEL_COLUMN);
        let target_col = header.iter().position(|h| h == TARGET_COLUMN);
        let feature_cols: Vec<usize> = (0..header.len())
            .filter(|&i| Some(i) != label_col && Some(i) != target_col)
            .collect();

        let mut columns = vec![Vec::new(); feature_cols.len()];
        let mut labels = label_col.map(|_| Vec::new());
        let mut targets = target_col.map(|_| Vec::new());
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64, TableError> {
                let s = &rec[i];
                s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| TableError::BadNumber {
                    row,
                    column: header[i].clone(),
                    value: s.to_string(),
                })
            };
            for (k, &i) in feature_cols.iter().enumerate() {
                columns[k].push(num(i)?);
            }
            if let (Some(i), Some(t)) = (target_col, targets.as_mut()) {
                t.push(num(i)?);
            }
            if let (Some(i), Some(l)) = (label_col, labels.as_mut()) {
                let v = match &rec[i] {
                    "0" | "0.0" => 0,
                    "1" | "1.0" => 1,
                    other => {
                        return Err(TableError::BadLabel {
                            row,
                            value: other.to_string(),
                        })
                    }
                };
                l.push(v);
            }
        }
        let names = feature_cols.iter().map(|&i| header[i].clone()).collect();
        FeatureTable::new(names, columns, labels, targets)
    }

    /// Writes features, then `target`, then `label`. Reals use the shortest
    /// round-trip form.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), TableError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.names.iter().map(String::as_str).collect();
        if self.targets.is_some() {
            header.push(TARGET_COLUMN);
        }
        if self.labels.is_some() {
            header.push(LABEL_COLUMN);
        }
        w.write_record(&header)?;
        let mut rec = Vec::with_capacity(header.len());
        for r in 0..self.n_rows() {
            rec.clear();
            rec.extend(self.columns.iter().map(|c| format!("{:?}", c[r])));
            if let Some(t) = &self.targets {
                rec.push(format!("{:?}", t[r]));
            }
            if let Some(l) = &self.labels {
                rec.push(l[r].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads raw multichannel samples: one named column per channel, one row per
/// sample.
pub fn read_channels_csv<R: Read>(reader: R) -> Result<Vec<(String, Vec<f64>)>, TableError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut seen = HashSet::new();
    for h in &header {
        if !seen.insert(h.as_str()) {
            return Err(TableError::DuplicateColumn(h.clone()));
        }
    }
    let mut data = vec![Vec::new(); header.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (i, s) in rec.iter().enumerate() {
            let v = s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| TableError::BadNumber {
                row,
                column: header[i].clone(),
                value: s.to_string(),
            })?;
            data[i].push(v);
        }
    }
    Ok(header.into_iter().zip(data).collect())
}
