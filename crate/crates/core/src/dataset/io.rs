use std::path::Path;

use ndarray::{Array2, Axis};

use super::{Dataset, SamplePopulation, TaskKind};
use crate::error::{Error, Result};

/// Reads a header-first, comma-separated file of finite decimal numbers.
///
/// Every column except `label_column` becomes a feature, in header order.
/// Row numbers in errors count data rows from zero.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str, task: TaskKind) -> Result<Dataset> {
    let (header, table) = read_matrix(path)?;
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingColumn(label_column.to_owned()))?;
    let keep: Vec<usize> = (0..header.len()).filter(|&i| i != label_idx).collect();
    let feature_names = keep.iter().map(|&i| header[i].clone()).collect();
    let labels = table.column(label_idx).to_vec();
    Dataset::new(table.select(Axis(1), &keep), labels, feature_names, task)
}

/// Reads the header and every numeric cell of a CSV file.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<(Vec<String>, Array2<f64>)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let mut values = Vec::new();
    let mut rows = 0;
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::DimensionMismatch {
                expected: header.len(),
                found: record.len(),
                context: "cells per csv row",
            });
        }
        for (col, cell) in record.iter().enumerate() {
            values.push(parse_cell(cell).ok_or_else(|| Error::BadCell {
                row,
                column: header[col].clone(),
                value: cell.to_owned(),
            })?);
        }
        rows += 1;
    }
    let table = Array2::from_shape_vec((rows, header.len()), values)
        .map_err(|e| Error::InvalidDataset(e.to_string()))?;
    Ok((header, table))
}

fn parse_cell(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Writes the dataset in the format [`load_csv`] reads, label last.
///
/// Numbers use Rust's shortest round-trip formatting, so reading the file
/// back yields bit-identical values.
pub fn write_csv(d: &Dataset, path: impl AsRef<Path>, label_column: &str) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = d.feature_names().iter().map(String::as_str).collect();
    header.push(label_column);
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for (row, &y) in d.features().rows().into_iter().zip(d.labels()) {
        record.clear();
        record.extend(row.iter().map(|v| v.to_string()));
        record.push(y.to_string());
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Sidecar with one `(row_index, tag)` line per sample.
pub fn write_population_csv(pop: &SamplePopulation, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["row_index", "tag"])?;
    for (i, tag) in pop.tags().iter().enumerate() {
        w.write_record([i.to_string(), tag.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
