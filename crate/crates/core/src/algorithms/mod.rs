//! Deterministic simulators of the parallel trainers under the perfect
//! computer assumption: time is counted in server iterations, and every
//! run is single-threaded and replayable from its config.
//!
//! Sample-draw indexing is shared across worker counts so that two runs with
//! the same seed consume the same draw sequence:
//!
//! | trainer    | draw index for server step `j`                         |
//! |------------|--------------------------------------------------------|
//! | seq_sgd    | `j`                                                    |
//! | minibatch  | `j * b + w` for worker `w < b`                         |
//! | hogwild    | `k * wb + i` for the gradient applied at step `k`      |
//! | ecd_psgd   | `j * m + i` for worker `i < m`                         |
//! | dadm       | `(j * m + w) * lb + i` for worker `w`, local item `i`  |

mod dadm;
mod ecd;
mod sgd;
mod trace;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, Dataset, SampleSource};
use crate::objective::{ObjectiveError, ObjectiveSpec};

pub use dadm::{dadm_local_solve, local_dual_objective, DadmSimulator, LocalSolve};
pub use ecd::{mixing_matrix, run_ecd_psgd, stochastic_quantize, EcdSimulator};
pub use sgd::{run_hogwild, run_minibatch, run_seq_sgd, simulate_hogwild, HogwildOutcome};
pub use trace::{TimeModel, Trace, TraceRow, TRACE_HEADER};

pub use dadm::run_dadm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    SeqSgd,
    Hogwild,
    Minibatch,
    Dadm,
    EcdPsgd,
}

impl Algorithm {
    pub fn time_model(self) -> TimeModel {
        match self {
            Algorithm::Hogwild => TimeModel::Asynchronous,
            _ => TimeModel::Synchronous,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DelayModel {
    /// Workers submit in a fixed cycle; staleness is `min(k, m - 1)`.
    #[default]
    RoundRobin,
    /// Staleness drawn uniformly from `0..=tau_max` per server step.
    Uniform { tau_max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    #[default]
    Ring,
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Compression {
    #[default]
    Identity,
    StochasticQuantize { bits: u32 },
}

/// Which loss the epsilon target is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TargetSet {
    #[default]
    Test,
    Train,
}

fn default_workers() -> usize {
    1
}
fn default_gamma() -> f64 {
    0.1
}
fn default_one() -> usize {
    1
}
fn default_eval_every() -> u64 {
    10
}
fn default_passes() -> usize {
    5
}
fn default_max_iters() -> u64 {
    1000
}

/// Full parameterization of one training run. The regularization strength
/// lives in [`ObjectiveSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Mini-batch size; must equal `workers` when given (one gradient per worker).
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default = "default_one")]
    pub local_batch_size: usize,
    #[serde(default = "default_one")]
    pub worker_minibatch: usize,
    #[serde(default)]
    pub delay_model: DelayModel,
    #[serde(default)]
    pub topology: Topology,
    #[serde(default)]
    pub compression: Compression,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_iters")]
    pub max_server_iters: u64,
    #[serde(default = "default_eval_every")]
    pub eval_every: u64,
    #[serde(default)]
    pub epsilon_target: Option<f64>,
    #[serde(default)]
    pub target_on: TargetSet,
    /// Coordinate sweeps of the local dual solve.
    #[serde(default = "default_passes")]
    pub dadm_passes: usize,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, workers: usize) -> Self {
        Self {
            algorithm,
            workers,
            gamma: default_gamma(),
            batch_size: None,
            local_batch_size: 1,
            worker_minibatch: 1,
            delay_model: DelayModel::RoundRobin,
            topology: Topology::Ring,
            compression: Compression::Identity,
            seed: 0,
            max_server_iters: default_max_iters(),
            eval_every: default_eval_every(),
            epsilon_target: None,
            target_on: TargetSet::Test,
            dadm_passes: default_passes(),
        }
    }

    /// Same config with a different worker count (and matching batch size).
    pub fn with_workers(&self, workers: usize) -> Self {
        let mut cfg = self.clone();
        cfg.workers = workers;
        if cfg.batch_size.is_some() {
            cfg.batch_size = Some(workers);
        }
        cfg
    }

    pub fn effective_batch_size(&self) -> usize {
        self.batch_size.unwrap_or(self.workers)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::InvalidConfig(msg));
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return bad(format!("gamma must be finite and non-negative, got {}", self.gamma));
        }
        if self.eval_every == 0 {
            return bad("eval_every must be at least 1".into());
        }
        if self.local_batch_size == 0 || self.worker_minibatch == 0 {
            return bad("batch sizes must be at least 1".into());
        }
        if self.algorithm == Algorithm::Minibatch {
            if let Some(b) = self.batch_size {
                if b != self.workers {
                    return bad(format!("minibatch needs batch_size == workers, got {b} vs {}", self.workers));
                }
            }
        }
        if let DelayModel::Uniform { tau_max } = self.delay_model {
            if tau_max == 0 && self.workers > 1 {
                return bad("uniform delay needs tau_max >= 1 with several workers".into());
            }
        }
        if let Compression::StochasticQuantize { bits } = self.compression {
            if !(1..=32).contains(&bits) {
                return bad(format!("quantization bits must be in 1..=32, got {bits}"));
            }
        }
        if let Some(eps) = self.epsilon_target {
            if !eps.is_finite() {
                return bad("epsilon_target must be finite".into());
            }
        }
        Ok(())
    }
}

/// Datasets a run is evaluated on.
#[derive(Debug, Clone)]
pub struct EvalSets {
    pub train: Arc<Dataset>,
    pub test: Arc<Dataset>,
}

impl EvalSets {
    pub fn new(train: Arc<Dataset>, test: Arc<Dataset>) -> Result<Self, TrainError> {
        if train.is_empty() || test.is_empty() {
            return Err(TrainError::Data(DataError::EmptyDataset));
        }
        if train.dim() != test.dim() {
            return Err(TrainError::Data(DataError::DimMismatch {
                expected: train.dim(),
                found: test.dim(),
            }));
        }
        Ok(Self { train, test })
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid run config: {0}")]
    InvalidConfig(String),
    #[error("iterate became non-finite after server step {last_finite_step}")]
    Diverged { last_finite_step: u64, partial: Trace },
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

/// Runs the configured trainer.
pub fn run(
    src: &SampleSource,
    eval: &EvalSets,
    cfg: &RunConfig,
    obj: &ObjectiveSpec,
) -> Result<Trace, TrainError> {
    match cfg.algorithm {
        Algorithm::SeqSgd => run_seq_sgd(src, eval, cfg, obj),
        Algorithm::Hogwild => run_hogwild(src, eval, cfg, obj),
        Algorithm::Minibatch => run_minibatch(src, eval, cfg, obj),
        Algorithm::Dadm => run_dadm(src, eval, cfg, obj),
        Algorithm::EcdPsgd => run_ecd_psgd(src, eval, cfg, obj),
    }
}

pub(crate) fn check_dims(src: &SampleSource, eval: &EvalSets) -> Result<(), TrainError> {
    if src.dim() != eval.train.dim() {
        return Err(TrainError::Data(DataError::DimMismatch {
            expected: src.dim(),
            found: eval.train.dim(),
        }));
    }
    Ok(())
}
