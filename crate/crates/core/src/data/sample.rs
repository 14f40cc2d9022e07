use std::fmt::Write as _;

use super::DataError;

/// A sparse labeled feature vector.
///
/// Indices are 0-based and strictly increasing, every stored value is finite
/// and non-zero, and the label is either `-1.0` or `+1.0`. All of this is
/// enforced by the constructors, so code holding a `Sample` never has to
/// re-check it.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    indices: Vec<u32>,
    values: Vec<f64>,
    label: f64,
    dim: usize,
}

impl Sample {
    /// Builds a sample from `(index, value)` pairs in any order.
    ///
    /// Explicit zeros are dropped. Duplicate indices, out-of-range indices and
    /// non-finite values are rejected.
    pub fn new<I>(dim: usize, label: f64, features: I) -> Result<Self, DataError>
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        if dim == 0 {
            return Err(DataError::InvalidSample("dimension must be positive".into()));
        }
        let label = normalize_label(label)?;
        let mut pairs: Vec<(usize, f64)> = features.into_iter().collect();
        pairs.sort_by_key(|&(i, _)| i);
        let mut indices = Vec::with_capacity(pairs.len());
        let mut values = Vec::with_capacity(pairs.len());
        let mut last: Option<usize> = None;
        for (i, v) in pairs {
            if last == Some(i) {
                return Err(DataError::InvalidSample(format!("duplicate feature index {i}")));
            }
            last = Some(i);
            if i >= dim {
                return Err(DataError::InvalidSample(format!(
                    "feature index {i} out of range for dimension {dim}"
                )));
            }
            if !v.is_finite() {
                return Err(DataError::InvalidSample(format!(
                    "non-finite value {v} at feature index {i}"
                )));
            }
            if v != 0.0 {
                indices.push(u32::try_from(i).map_err(|_| {
                    DataError::InvalidSample(format!("feature index {i} exceeds u32"))
                })?);
                values.push(v);
            }
        }
        Ok(Self { indices, values, label, dim })
    }

    pub fn from_dense(values: &[f64], label: f64) -> Result<Self, DataError> {
        Self::new(values.len(), label, values.iter().copied().enumerate())
    }

    pub fn label(&self) -> f64 {
        self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates `(index, value)` over the support in ascending index order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().map(|&i| i as usize).zip(self.values.iter().copied())
    }

    /// Value at `index`, zero when the coordinate is not stored.
    pub fn get(&self, index: usize) -> f64 {
        match u32::try_from(index) {
            Ok(i) => self
                .indices
                .binary_search(&i)
                .map(|pos| self.values[pos])
                .unwrap_or(0.0),
            Err(_) => 0.0,
        }
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * x[i]).sum()
    }

    pub fn squared_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }

    /// Same sample with a different label.
    pub fn relabeled(&self, label: f64) -> Result<Self, DataError> {
        Ok(Self { label: normalize_label(label)?, ..self.clone() })
    }

    /// Widens the ambient dimension. Shrinking below the largest stored index
    /// is rejected.
    pub fn with_dim(mut self, dim: usize) -> Result<Self, DataError> {
        if let Some(&last) = self.indices.last() {
            if last as usize >= dim {
                return Err(DataError::InvalidSample(format!(
                    "cannot set dimension {dim}: feature index {last} is stored"
                )));
            }
        }
        if dim == 0 {
            return Err(DataError::InvalidSample("dimension must be positive".into()));
        }
        self.dim = dim;
        Ok(self)
    }

    /// Canonical svmlight line: `+1`/`-1`, then 1-based `index:value` pairs in
    /// ascending order with shortest round-trip decimals.
    pub fn to_svmlight(&self) -> String {
        let mut line = String::from(if self.label > 0.0 { "+1" } else { "-1" });
        for (i, v) in self.iter() {
            let _ = write!(line, " {}:{}", i + 1, v);
        }
        line
    }
}

fn normalize_label(label: f64) -> Result<f64, DataError> {
    if label == 1.0 {
        Ok(1.0)
    } else if label == -1.0 {
        Ok(-1.0)
    } else {
        Err(DataError::InvalidSample(format!("label must be -1 or +1, got {label}")))
    }
}

/// Number of coordinates where `a` and `b` differ by more than `tolerance`,
/// treating absent entries as zero. With `tolerance == 0` this is the exact
/// l0 distance.
pub fn l0_distance(a: &Sample, b: &Sample, tolerance: f64) -> usize {
    let differs = |x: f64, y: f64| {
        if tolerance == 0.0 {
            x != y
        } else {
            (x - y).abs() > tolerance
        }
    };
    let (ai, av) = (a.indices(), a.values());
    let (bi, bv) = (b.indices(), b.values());
    let (mut p, mut q, mut count) = (0, 0, 0);
    while p < ai.len() && q < bi.len() {
        match ai[p].cmp(&bi[q]) {
            std::cmp::Ordering::Less => {
                count += differs(av[p], 0.0) as usize;
                p += 1;
            }
            std::cmp::Ordering::Greater => {
                count += differs(0.0, bv[q]) as usize;
                q += 1;
            }
            std::cmp::Ordering::Equal => {
                count += differs(av[p], bv[q]) as usize;
                p += 1;
                q += 1;
            }
        }
    }
    count += av[p..].iter().filter(|&&v| differs(v, 0.0)).count();
    count += bv[q..].iter().filter(|&&v| differs(0.0, v)).count();
    count
}
