//! Fixtures shared by the integration tests.
//!
//! The sparse text-like dataset is a generated stand-in with the catalog
//! shape of real-sim (72,309 samples, 20,958 features, values in (0, 1),
//! about 52 non-zeros per row). The dense one mimics HIGGS: 28 features
//! uniform over (-4, 3).
#![allow(dead_code)]

use std::sync::Arc;

use scalesgd::algorithms::{Algorithm, EvalSets, RunConfig};
use scalesgd::data::{split, Dataset, OrderPolicy, SampleSource, SplitSpec};
use scalesgd::generators::gen_uniform_dataset;
use scalesgd::objective::ObjectiveSpec;

pub const SPARSE_DIM: usize = 20_958;
pub const SPARSE_N: usize = 72_309;
pub const SPARSE_DENSITY: f64 = 0.0025;
pub const DENSE_DIM: usize = 28;
pub const DENSE_RANGE: (f64, f64) = (-4.0, 3.0);

#[derive(Clone)]
pub struct Fixture {
    pub train: Arc<Dataset>,
    pub test: Arc<Dataset>,
}

impl Fixture {
    pub fn from_dataset(ds: &Dataset, seed: u64) -> Self {
        let parts = split(ds, &SplitSpec { train_fraction: 0.7, test_fraction: 0.2, seed }).unwrap();
        Self { train: Arc::new(parts.train), test: Arc::new(parts.test) }
    }

    pub fn source(&self, seed: u64) -> SampleSource {
        SampleSource::finite(self.train.clone(), OrderPolicy::Shuffled { seed }).unwrap()
    }

    pub fn eval(&self) -> EvalSets {
        EvalSets::new(self.train.clone(), self.test.clone()).unwrap()
    }
}

pub fn sparse_dataset(n: usize, seed: u64) -> Dataset {
    gen_uniform_dataset(SPARSE_DIM, n, (0.0, 1.0), SPARSE_DENSITY, seed).unwrap()
}

pub fn sparse_fixture(seed: u64) -> Fixture {
    Fixture::from_dataset(&sparse_dataset(SPARSE_N, seed), seed)
}

pub fn dense_dataset(n: usize, seed: u64) -> Dataset {
    gen_uniform_dataset(DENSE_DIM, n, DENSE_RANGE, 1.0, seed).unwrap()
}

pub fn dense_fixture(n: usize, seed: u64) -> Fixture {
    Fixture::from_dataset(&dense_dataset(n, seed), seed)
}

/// The sparse stand-in carries little signal per feature; the default
/// regularization would swamp it, so it trains with a weaker one and a
/// step size scaled for rows of squared norm about 17.
pub fn sparse_objective() -> ObjectiveSpec {
    ObjectiveSpec { lambda: 1e-4 }
}

pub fn sparse_config(algorithm: Algorithm, workers: usize, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::new(algorithm, workers);
    cfg.gamma = 0.05;
    cfg.seed = seed;
    cfg
}

/// Default step size and regularization.
pub fn dense_objective() -> ObjectiveSpec {
    ObjectiveSpec { lambda: 0.01 }
}

pub fn dense_config(algorithm: Algorithm, workers: usize, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::new(algorithm, workers);
    cfg.gamma = 0.1;
    cfg.seed = seed;
    cfg
}
