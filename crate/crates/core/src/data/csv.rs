use std::io::BufRead;

use super::{DataError, Dataset, Sample};

/// Parses one dense comma-separated row. The value in `label_column` must be
/// one of `0`, `1`, `-1`, `+1`; the remaining columns become features in
/// order. `expected_columns` is the column count of the first row, if known.
pub fn parse_dense_csv(
    line: &str,
    label_column: usize,
    expected_columns: Option<usize>,
    line_no: usize,
) -> Result<Sample, DataError> {
    let err = |message: String| DataError::Parse { line: line_no, message };
    let cells: Vec<&str> = line.trim().split(',').map(str::trim).collect();
    if let Some(expected) = expected_columns {
        if cells.len() != expected {
            return Err(err(format!("expected {expected} columns, found {}", cells.len())));
        }
    }
    if cells.len() < 2 {
        return Err(err("need a label column and at least one feature".into()));
    }
    if label_column >= cells.len() {
        return Err(err(format!("label column {label_column} out of range")));
    }
    let mut values = Vec::with_capacity(cells.len() - 1);
    let mut label = 0.0;
    for (c, cell) in cells.iter().enumerate() {
        let v: f64 = cell
            .parse()
            .map_err(|_| err(format!("non-numeric cell {cell:?} in column {c}")))?;
        if !v.is_finite() {
            return Err(err(format!("non-finite cell {cell:?} in column {c}")));
        }
        if c == label_column {
            label = if v == 1.0 {
                1.0
            } else if v == 0.0 || v == -1.0 {
                -1.0
            } else {
                return Err(err(format!("label must be one of 0, 1, -1, +1, got {cell:?}")));
            };
        } else {
            values.push(v);
        }
    }
    Sample::from_dense(&values, label).map_err(|e| match e {
        DataError::InvalidSample(message) => err(message),
        other => other,
    })
}

pub fn read_dense_csv<R: BufRead>(
    reader: R,
    name: &str,
    label_column: usize,
) -> Result<Dataset, DataError> {
    let mut samples = Vec::new();
    let mut columns = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s = parse_dense_csv(&line, label_column, columns, i + 1)?;
        columns.get_or_insert(s.dim() + 1);
        samples.push(s);
    }
    let dim = columns.ok_or(DataError::EmptyDataset)? - 1;
    Dataset::new(name, dim, samples)
}
