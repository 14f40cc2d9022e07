use std::io::{BufRead, Write};

use super::{DataError, Dataset, Sample};

/// Parses one svmlight line: `<label> (<index>:<value>)*` with 1-based indices.
///
/// Labels `0`/`-1` map to `-1`, `1`/`+1` map to `+1`. Anything after `#` is a
/// comment. The sample dimension is `max(dim_hint, largest index)`.
pub fn parse_svmlight(line: &str, dim_hint: usize, line_no: usize) -> Result<Sample, DataError> {
    let err = |message: String| DataError::Parse { line: line_no, message };
    let body = line.split('#').next().unwrap_or("");
    let mut tokens = body.split_whitespace();
    let label_tok = tokens.next().ok_or_else(|| err("missing label".into()))?;
    let raw_label: f64 = label_tok
        .parse()
        .map_err(|_| err(format!("malformed label {label_tok:?}")))?;
    let label = if raw_label == 1.0 {
        1.0
    } else if raw_label == 0.0 || raw_label == -1.0 {
        -1.0
    } else {
        return Err(err(format!("label must be one of 0, 1, -1, +1, got {label_tok:?}")));
    };

    let mut features = Vec::new();
    let mut max_index = 0usize;
    for tok in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| err(format!("malformed feature token {tok:?}")))?;
        let idx: usize = idx
            .parse()
            .map_err(|_| err(format!("malformed feature index in {tok:?}")))?;
        if idx == 0 {
            return Err(err(format!("feature indices are 1-based, got 0 in {tok:?}")));
        }
        let val: f64 = val
            .parse()
            .map_err(|_| err(format!("malformed feature value in {tok:?}")))?;
        if !val.is_finite() {
            return Err(err(format!("non-finite feature value in {tok:?}")));
        }
        max_index = max_index.max(idx);
        features.push((idx - 1, val));
    }
    let dim = dim_hint.max(max_index).max(1);
    Sample::new(dim, label, features).map_err(|e| match e {
        DataError::InvalidSample(message) => err(message),
        other => other,
    })
}

/// Reads an svmlight file. Blank lines and comment-only lines are skipped; the
/// dataset dimension is the larger of `dim_hint` and the largest index seen.
pub fn read_svmlight<R: BufRead>(
    reader: R,
    name: &str,
    dim_hint: usize,
) -> Result<Dataset, DataError> {
    let mut samples = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        samples.push(parse_svmlight(trimmed, dim_hint, i + 1)?);
    }
    if samples.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    Dataset::widened(name, samples)
}

pub fn write_svmlight<W: Write>(mut writer: W, dataset: &Dataset) -> std::io::Result<()> {
    for s in dataset.samples() {
        writeln!(writer, "{}", s.to_svmlight())?;
    }
    writer.flush()
}
