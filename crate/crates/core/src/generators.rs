//! Seeded generators for the simulated datasets: ruler-labeled uniform
//! datasets, local-similarity mutation streams and diversity-controlled
//! replications of an existing dataset.
//!
//! Every random draw goes through a ChaCha stream keyed by `(seed, t)`, so
//! sample `t` can be regenerated without replaying a cursor.

use std::sync::{Arc, Mutex};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, Dataset, Sample};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Keyed sub-generator: independent stream `stream` of the ChaCha generator
/// seeded by `seed`.
pub(crate) fn keyed_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The labeling vector `(-1, 2, -3, 4, ...)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RulerSpec {
    pub dim: usize,
}

impl RulerSpec {
    /// Entry `k` (0-based) of the ruler: `(-1)^(k+1) * (k+1)`.
    pub fn entry(k: usize) -> f64 {
        let magnitude = (k + 1) as f64;
        if k.is_multiple_of(2) {
            -magnitude
        } else {
            magnitude
        }
    }
}

/// `sign(xi . ruler)` with `sign(0) = +1`.
pub fn ruler_label(xi: &Sample, ruler: RulerSpec) -> Result<f64, GenError> {
    if xi.dim() != ruler.dim {
        return Err(DataError::DimMismatch { expected: ruler.dim, found: xi.dim() }.into());
    }
    Ok(ruler_sign(xi.iter()))
}

fn ruler_sign(features: impl Iterator<Item = (usize, f64)>) -> f64 {
    let dot: f64 = features.map(|(k, v)| v * RulerSpec::entry(k)).sum();
    if dot < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn check_range(low: f64, high: f64) -> Result<(), GenError> {
    if !(low.is_finite() && high.is_finite() && low < high) {
        return Err(GenError::InvalidSpec(format!("value range [{low}, {high}) is empty")));
    }
    Ok(())
}

fn support_size(dim: usize, density: f64) -> Result<usize, GenError> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(GenError::InvalidSpec(format!("density must be in (0, 1], got {density}")));
    }
    if density * (dim as f64) < 1.0 {
        return Err(GenError::InvalidSpec(format!(
            "density {density} x dim {dim} < 1 leaves samples empty"
        )));
    }
    Ok(((density * dim as f64).round() as usize).clamp(1, dim))
}

fn uniform_sample(
    rng: &mut ChaCha8Rng,
    dim: usize,
    support: usize,
    (low, high): (f64, f64),
) -> Result<Sample, GenError> {
    let mut features: Vec<(usize, f64)> = if support == dim {
        (0..dim).map(|k| (k, rng.gen_range(low..high))).collect()
    } else {
        let mut picked = index::sample(rng, dim, support).into_vec();
        picked.sort_unstable();
        picked.into_iter().map(|k| (k, rng.gen_range(low..high))).collect()
    };
    features.retain(|&(_, v)| v != 0.0);
    let label = ruler_sign(features.iter().copied());
    Ok(Sample::new(dim, label, features)?)
}

/// `n` samples, each with `round(density * dim)` support indices chosen
/// uniformly without replacement, values i.i.d. uniform over
/// `[low, high)`, and ruler labels. Sample `i` uses keyed stream `i`.
pub fn gen_uniform_dataset(
    dim: usize,
    n: usize,
    value_range: (f64, f64),
    density: f64,
    seed: u64,
) -> Result<Dataset, GenError> {
    if n == 0 {
        return Err(GenError::InvalidSpec("sample count must be positive".into()));
    }
    if dim == 0 {
        return Err(GenError::InvalidSpec("dimension must be positive".into()));
    }
    check_range(value_range.0, value_range.1)?;
    let support = support_size(dim, density)?;
    let samples = (0..n)
        .map(|i| uniform_sample(&mut keyed_rng(seed, i as u64), dim, support, value_range))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset::new(format!("uniform-d{dim}-s{seed}"), dim, samples)?)
}

/// Parameters of a local-similarity mutation stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamSpec {
    pub dim: usize,
    pub value_range: (f64, f64),
    pub density: f64,
    pub mutation_fraction: f64,
    pub seed: u64,
}

impl StreamSpec {
    pub fn validate(&self) -> Result<(), GenError> {
        if self.dim == 0 {
            return Err(GenError::InvalidSpec("dimension must be positive".into()));
        }
        check_range(self.value_range.0, self.value_range.1)?;
        support_size(self.dim, self.density)?;
        if !(0.0..=1.0).contains(&self.mutation_fraction) {
            return Err(GenError::InvalidSpec(format!(
                "mutation_fraction must be in [0, 1], got {}",
                self.mutation_fraction
            )));
        }
        Ok(())
    }

    pub fn is_dense(&self) -> bool {
        self.density >= 1.0
    }

    /// Number of coordinates redrawn per step: `ceil(mutation_fraction * dim)`.
    pub fn mutated_per_step(&self) -> usize {
        ((self.mutation_fraction * self.dim as f64).ceil() as usize).min(self.dim)
    }
}

/// Next element of a mutation stream.
///
/// Redraws `ceil(mutation_fraction * dim)` distinct coordinates chosen from all
/// `dim` features, then (sparse variant) zeroes coordinates chosen uniformly
/// among the resulting support until it is back to `support_target`.
/// The label is recomputed with the ruler.
pub fn ls_stream_next(
    prev: &Sample,
    spec: &StreamSpec,
    t: u64,
    support_target: usize,
) -> Result<Sample, GenError> {
    if prev.dim() != spec.dim {
        return Err(DataError::DimMismatch { expected: spec.dim, found: prev.dim() }.into());
    }
    let mut rng = keyed_rng(spec.seed, t);
    let (low, high) = spec.value_range;
    let mut dense = prev.to_dense();
    let k = spec.mutated_per_step();
    if k == spec.dim {
        for v in dense.iter_mut() {
            *v = rng.gen_range(low..high);
        }
    } else {
        for i in index::sample(&mut rng, spec.dim, k).into_iter() {
            dense[i] = rng.gen_range(low..high);
        }
    }
    if !spec.is_dense() {
        let support: Vec<usize> = (0..spec.dim).filter(|&i| dense[i] != 0.0).collect();
        if support.len() > support_target {
            let excess = support.len() - support_target;
            for p in index::sample(&mut rng, support.len(), excess).into_iter() {
                dense[support[p]] = 0.0;
            }
        }
    }
    let label = ruler_sign(dense.iter().copied().enumerate());
    Ok(Sample::new(spec.dim, label, dense.into_iter().enumerate())?)
}

/// First element of a stream: a seeded uniform pick from `origin` when given,
/// otherwise a single generated uniform sample.
pub fn first_sample(
    spec: &StreamSpec,
    origin: Option<&Dataset>,
    seed: u64,
) -> Result<Sample, GenError> {
    spec.validate()?;
    match origin {
        Some(ds) => {
            if ds.is_empty() {
                return Err(DataError::EmptyDataset.into());
            }
            if ds.dim() != spec.dim {
                return Err(DataError::DimMismatch { expected: spec.dim, found: ds.dim() }.into());
            }
            let i = keyed_rng(seed, 0).gen_range(0..ds.len());
            Ok(ds.samples()[i].clone())
        }
        None => {
            let ds = gen_uniform_dataset(spec.dim, 1, spec.value_range, spec.density, seed)?;
            Ok(ds.samples()[0].clone())
        }
    }
}

/// An infinite, deterministic mutation stream. Element `t` is a pure function
/// of `(spec, first, t)`; generated elements are memoized so sequential and
/// slightly out-of-order access stay cheap.
#[derive(Debug)]
pub struct LsStream {
    spec: StreamSpec,
    support_target: usize,
    cache: Mutex<Vec<Arc<Sample>>>,
}

impl LsStream {
    pub fn new(spec: StreamSpec, first: Sample) -> Result<Self, GenError> {
        spec.validate()?;
        if first.dim() != spec.dim {
            return Err(DataError::DimMismatch { expected: spec.dim, found: first.dim() }.into());
        }
        Ok(Self {
            spec,
            support_target: first.nnz(),
            cache: Mutex::new(vec![Arc::new(first)]),
        })
    }

    pub fn spec(&self) -> &StreamSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn support_target(&self) -> usize {
        self.support_target
    }

    pub fn sample(&self, t: u64) -> Arc<Sample> {
        let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        while cache.len() as u64 <= t {
            let next_t = cache.len() as u64;
            let prev = cache.last().expect("stream cache holds the first sample");
            // prev conforms to spec by construction, so this cannot fail
            let next = ls_stream_next(prev, &self.spec, next_t, self.support_target)
                .expect("stream sample conforms to its spec");
            cache.push(Arc::new(next));
        }
        Arc::clone(&cache[t as usize])
    }

    /// The first `n` elements as a finite dataset.
    pub fn prefix(&self, n: usize) -> Dataset {
        let samples = (0..n as u64).map(|t| (*self.sample(t)).clone()).collect();
        Dataset::new(format!("ls-stream-s{}", self.spec.seed), self.spec.dim, samples)
            .expect("stream samples share the stream dimension")
    }
}

impl Clone for LsStream {
    fn clone(&self) -> Self {
        let cache = self.cache.lock().unwrap_or_else(|e| e.into_inner()).clone();
        Self { spec: self.spec, support_target: self.support_target, cache: Mutex::new(cache) }
    }
}

/// Test data for a stream experiment: i.i.d. samples with the stream's
/// feature distribution and density, not mutation-chained.
pub fn stream_test_set(spec: &StreamSpec, n: usize, seed: u64) -> Result<Dataset, GenError> {
    spec.validate()?;
    Ok(gen_uniform_dataset(spec.dim, n, spec.value_range, spec.density, seed)?
        .renamed(format!("ls-stream-test-s{seed}")))
}

/// Cuts `ds` into `parts` contiguous chunks of `len / parts` samples (the
/// remainder goes to the last chunk) and concatenates the chunks listed in
/// `pattern`.
pub fn diversity_replicate(ds: &Dataset, parts: usize, pattern: &[usize]) -> Result<Dataset, GenError> {
    if parts == 0 {
        return Err(GenError::InvalidSpec("parts must be at least 1".into()));
    }
    if pattern.is_empty() {
        return Err(GenError::InvalidSpec("pattern must not be empty".into()));
    }
    if let Some(&bad) = pattern.iter().find(|&&p| p >= parts) {
        return Err(GenError::InvalidSpec(format!("pattern entry {bad} not in [0, {parts})")));
    }
    if ds.len() < parts {
        return Err(GenError::InvalidSpec(format!(
            "cannot cut {} samples into {parts} parts",
            ds.len()
        )));
    }
    let chunk = ds.len() / parts;
    let bounds = |p: usize| {
        let start = p * chunk;
        let end = if p + 1 == parts { ds.len() } else { start + chunk };
        start..end
    };
    let order: Vec<usize> = pattern.iter().flat_map(|&p| bounds(p)).collect();
    let suffix: String = pattern.iter().map(|p| p.to_string()).collect::<Vec<_>>().join("");
    Ok(ds.select(format!("{}.rep{parts}x{suffix}", ds.name()), &order))
}
