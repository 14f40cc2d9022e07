//! Samples, datasets, file ingestion, train/test splitting and ordered sample
//! delivery.

mod csv;
mod sample;
mod source;
mod split;
mod svmlight;

use thiserror::Error;

pub use self::csv::{parse_dense_csv, read_dense_csv};
pub use sample::{l0_distance, Sample};
pub use source::{Drawn, OrderPolicy, SampleSource};
pub use split::{split, Split, SplitSpec};
pub use svmlight::{parse_svmlight, read_svmlight, write_svmlight};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid sample: {0}")]
    InvalidSample(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("invalid source: {0}")]
    InvalidSource(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An ordered collection of samples sharing one ambient dimension.
///
/// Order is significant: it is the default sampling sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    dim: usize,
    samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, dim: usize, samples: Vec<Sample>) -> Result<Self, DataError> {
        if dim == 0 {
            return Err(DataError::InvalidSample("dimension must be positive".into()));
        }
        if let Some(s) = samples.iter().find(|s| s.dim() != dim) {
            return Err(DataError::DimMismatch { expected: dim, found: s.dim() });
        }
        Ok(Self { name: name.into(), dim, samples })
    }

    /// Builds a dataset whose dimension is the widest sample dimension; every
    /// sample is widened to match.
    pub fn widened(name: impl Into<String>, samples: Vec<Sample>) -> Result<Self, DataError> {
        let dim = samples.iter().map(Sample::dim).max().ok_or(DataError::EmptyDataset)?;
        let samples = samples
            .into_iter()
            .map(|s| s.with_dim(dim))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(name, dim, samples)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Subset in the given index order.
    pub fn select(&self, name: impl Into<String>, indices: &[usize]) -> Self {
        Self {
            name: name.into(),
            dim: self.dim,
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }

    pub fn concat(&self, other: &Dataset) -> Result<Self, DataError> {
        if other.dim != self.dim {
            return Err(DataError::DimMismatch { expected: self.dim, found: other.dim });
        }
        let mut samples = self.samples.clone();
        samples.extend_from_slice(&other.samples);
        Ok(Self { name: self.name.clone(), dim: self.dim, samples })
    }
}
