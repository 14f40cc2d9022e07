//! Dataset character indices: local similarity of a sampling sequence
//! (`C_sim`), feature means and variances, density and diversity.
//!
//! Distances between samples are l0 counts over the union of supports. By
//! default values are compared exactly; the `_tol` variants accept a
//! tolerance for ingested float data.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{l0_distance, Dataset, Sample};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("sequence is empty")]
    EmptySequence,
    #[error("range must be at least 1")]
    InvalidRange,
    #[error("batch is empty")]
    EmptyBatch,
    #[error("no batches given")]
    NoBatches,
}

/// Mean over `i` of the average l0 distance from sample `i` to the next
/// `range` samples, indices taken cyclically.
pub fn c_sim(seq: &[Sample], range: usize) -> Result<f64, MetricError> {
    c_sim_tol(seq, range, 0.0)
}

pub fn c_sim_tol(seq: &[Sample], range: usize, tolerance: f64) -> Result<f64, MetricError> {
    if seq.is_empty() {
        return Err(MetricError::EmptySequence);
    }
    if range == 0 {
        return Err(MetricError::InvalidRange);
    }
    let n = seq.len();
    let total: f64 = (0..n)
        .map(|i| {
            let window: usize = (1..=range)
                .map(|j| l0_distance(&seq[i], &seq[(i + j) % n], tolerance))
                .sum();
            window as f64 / range as f64
        })
        .sum();
    Ok(total / n as f64)
}

/// Local similarity for an asynchronous trainer whose staleness never exceeds
/// `tau_max`.
pub fn ls_async(seq: &[Sample], tau_max: usize) -> Result<f64, MetricError> {
    c_sim(seq, tau_max)
}

/// Largest `C_sim` over orderings of one batch with range = batch size.
///
/// With range and length both equal to `b`, every ordering visits each pair
/// once, so the maximum is the mean over all ordered pairs (self-pairs
/// included).
pub fn within_batch_csim(batch: &[Sample]) -> Result<f64, MetricError> {
    within_batch_csim_tol(batch, 0.0)
}

pub fn within_batch_csim_tol(batch: &[Sample], tolerance: f64) -> Result<f64, MetricError> {
    if batch.is_empty() {
        return Err(MetricError::EmptyBatch);
    }
    let b = batch.len();
    let mut total = 0usize;
    for i in 0..b {
        for k in (i + 1)..b {
            total += 2 * l0_distance(&batch[i], &batch[k], tolerance);
        }
    }
    Ok(total as f64 / (b * b) as f64)
}

/// Local similarity for a synchronous trainer: the largest within-batch
/// `C_sim` over the batches it consumes.
pub fn ls_sync<B: AsRef<[Sample]>>(batches: &[B]) -> Result<f64, MetricError> {
    if batches.is_empty() {
        return Err(MetricError::NoBatches);
    }
    batches
        .iter()
        .map(|b| within_batch_csim(b.as_ref()))
        .try_fold(f64::NEG_INFINITY, |acc, v| v.map(|v| acc.max(v)))
}

/// `ls_sync` over consecutive chunks of `seq`; a short tail forms its own batch.
pub fn ls_sync_of_sequence(seq: &[Sample], batch_size: usize) -> Result<f64, MetricError> {
    if batch_size == 0 {
        return Err(MetricError::InvalidRange);
    }
    let batches: Vec<&[Sample]> = seq.chunks(batch_size).collect();
    ls_sync(&batches)
}

/// Per-feature population mean and variance (divisor `n`); absent entries
/// count as zero.
pub fn feature_stats(ds: &Dataset) -> (Vec<f64>, Vec<f64>) {
    let dim = ds.dim();
    let n = ds.len();
    if n == 0 {
        return (vec![0.0; dim], vec![0.0; dim]);
    }
    let nf = n as f64;
    let mut sums = vec![0.0; dim];
    let mut counts = vec![0usize; dim];
    for s in ds.samples() {
        for (k, v) in s.iter() {
            sums[k] += v;
            counts[k] += 1;
        }
    }
    let means: Vec<f64> = sums.iter().map(|s| s / nf).collect();
    let mut sq = vec![0.0; dim];
    for s in ds.samples() {
        for (k, v) in s.iter() {
            let d = v - means[k];
            sq[k] += d * d;
        }
    }
    let variances = (0..dim)
        .map(|k| (sq[k] + (n - counts[k]) as f64 * means[k] * means[k]) / nf)
        .collect();
    (means, variances)
}

/// Stored entries over `n * dim`.
pub fn density(ds: &Dataset) -> f64 {
    if ds.is_empty() {
        return 0.0;
    }
    let stored: usize = ds.samples().iter().map(Sample::nnz).sum();
    stored as f64 / (ds.len() as f64 * ds.dim() as f64)
}

fn sample_hash(s: &Sample) -> u64 {
    let mut h = DefaultHasher::new();
    s.label().to_bits().hash(&mut h);
    s.indices().hash(&mut h);
    for v in s.values() {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Number of distinct `(features, label)` pairs under exact equality. Hash
/// buckets are confirmed with full comparison, so collisions never merge
/// different samples.
pub fn diversity(ds: &Dataset) -> usize {
    let mut buckets: HashMap<u64, Vec<usize>> = HashMap::new();
    let mut distinct = 0;
    for (i, s) in ds.samples().iter().enumerate() {
        let bucket = buckets.entry(sample_hash(s)).or_default();
        if !bucket.iter().any(|&j| ds.samples()[j] == *s) {
            bucket.push(i);
            distinct += 1;
        }
    }
    distinct
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterReport {
    pub n: usize,
    pub dim: usize,
    pub density: f64,
    pub sparsity: f64,
    pub mean_feature_variance: f64,
    pub diversity: usize,
    pub ls_async: Option<f64>,
    pub ls_sync: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub feature_means: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub feature_variances: Option<Vec<f64>>,
}

impl CharacterReport {
    /// Computes every index for `ds` in its stored order. The local
    /// similarity fields are filled only when their parameter is given;
    /// per-feature arrays are kept only when `full` is set.
    pub fn compute(
        ds: &Dataset,
        tau_max: Option<usize>,
        batch_size: Option<usize>,
        full: bool,
    ) -> Result<Self, MetricError> {
        if ds.is_empty() {
            return Err(MetricError::EmptySequence);
        }
        let (means, variances) = feature_stats(ds);
        let mean_feature_variance = variances.iter().sum::<f64>() / ds.dim() as f64;
        let density = density(ds);
        Ok(Self {
            n: ds.len(),
            dim: ds.dim(),
            density,
            sparsity: 1.0 - density,
            mean_feature_variance,
            diversity: diversity(ds),
            ls_async: tau_max.map(|t| ls_async(ds.samples(), t)).transpose()?,
            ls_sync: batch_size.map(|b| ls_sync_of_sequence(ds.samples(), b)).transpose()?,
            feature_means: full.then_some(means),
            feature_variances: full.then_some(variances),
        })
    }
}
