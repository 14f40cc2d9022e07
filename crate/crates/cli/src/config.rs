//! Experiment configuration document.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use scalesgd::algorithms::RunConfig;
use scalesgd::data::SplitSpec;
use scalesgd::generators::StreamSpec;
use scalesgd::harness::{SweepConfig, SweepMode, DEFAULT_THETA};
use scalesgd::objective::ObjectiveSpec;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub dataset: Option<DatasetConfig>,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub objective: ObjectiveSpec,
    #[serde(default)]
    pub run: Option<RunConfig>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// Exactly one of `path` or `generator`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: FileFormat,
    /// Label column for dense CSV input.
    #[serde(default)]
    pub label_column: usize,
    /// Minimum dimension for svmlight input.
    #[serde(default)]
    pub dim: usize,
    #[serde(default)]
    pub generator: Option<GeneratorSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileFormat {
    #[default]
    Svmlight,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum GeneratorSpec {
    Uniform {
        dim: usize,
        n: usize,
        value_range: (f64, f64),
        density: f64,
        seed: u64,
    },
    /// Mutation stream. Training uses the stream itself; `draws` elements form
    /// the train evaluation set and exported file, `test_size` i.i.d. samples
    /// the test set.
    Stream {
        spec: StreamSpec,
        #[serde(default = "default_draws")]
        draws: usize,
        #[serde(default = "default_test_size")]
        test_size: usize,
        /// Optional dataset file whose seeded pick starts the stream.
        #[serde(default)]
        origin: Option<PathBuf>,
    },
    /// Chunk replication of a dataset file.
    Replicate { base: PathBuf, parts: usize, pattern: Vec<usize> },
}

fn default_draws() -> usize {
    20_000
}

fn default_test_size() -> usize {
    5_000
}

/// Sweep parameters. With `fixture_metrics` set the per-worker metrics are
/// taken as given and no training runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub worker_counts: Vec<usize>,
    pub mode: SweepMode,
    #[serde(default)]
    pub fixed_iter: Option<u64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default)]
    pub fixture_metrics: Option<Vec<f64>>,
}

fn default_theta() -> f64 {
    DEFAULT_THETA
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    #[serde(default)]
    pub tau_max: Option<usize>,
    #[serde(default)]
    pub batch_size: Option<usize>,
    /// Include per-feature means and variances.
    #[serde(default)]
    pub full: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Gen,
    Metrics,
    Train,
    Sweep,
}

fn bad<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config(msg.into()))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn sweep_config(&self) -> Result<SweepConfig, CliError> {
        let (Some(run), Some(s)) = (&self.run, &self.sweep) else {
            return bad("sweep needs both `run` and `sweep` sections");
        };
        Ok(SweepConfig {
            base: run.clone(),
            worker_counts: s.worker_counts.clone(),
            mode: s.mode,
            fixed_iter: s.fixed_iter,
            epsilon: s.epsilon,
            theta: s.theta,
        })
    }

    /// Checks everything that can be checked without touching input files.
    pub fn validate(&self, cmd: Command) -> Result<(), CliError> {
        let fixture = self.sweep.as_ref().and_then(|s| s.fixture_metrics.as_ref());
        let needs_data = !(cmd == Command::Sweep && fixture.is_some());
        match (&self.dataset, needs_data) {
            (Some(d), _) => d.validate()?,
            (None, true) => return bad("missing `dataset` section"),
            (None, false) => {}
        }
        self.split.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if !(self.objective.lambda.is_finite() && self.objective.lambda >= 0.0) {
            return bad(format!("objective.lambda must be a non-negative number, got {}", self.objective.lambda));
        }
        if let Some(b) = self.metrics.batch_size {
            if b == 0 {
                return bad("metrics.batch_size must be positive");
            }
        }
        match cmd {
            Command::Gen => {
                if self.dataset.as_ref().is_some_and(|d| d.generator.is_none()) {
                    return bad("gen needs `dataset.generator`");
                }
            }
            Command::Metrics => {}
            Command::Train => {
                let Some(run) = &self.run else { return bad("train needs a `run` section") };
                run.validate().map_err(|e| CliError::Config(e.to_string()))?;
            }
            Command::Sweep => match fixture {
                Some(metrics) => {
                    let s = self.sweep.as_ref().expect("fixture implies sweep");
                    if metrics.len() != s.worker_counts.len() {
                        return bad("fixture_metrics must have one entry per worker count");
                    }
                    if metrics.iter().any(|v| !v.is_finite()) {
                        return bad("fixture_metrics must be finite");
                    }
                    if s.worker_counts.is_empty() || s.worker_counts.windows(2).any(|w| w[0] >= w[1]) {
                        return bad("worker_counts must be non-empty and strictly increasing");
                    }
                    if !(s.theta.is_finite() && s.theta >= 0.0) {
                        return bad("theta must be a non-negative number");
                    }
                }
                None => self.sweep_config()?.validate().map_err(|e| CliError::Config(e.to_string()))?,
            },
        }
        Ok(())
    }
}

impl DatasetConfig {
    fn validate(&self) -> Result<(), CliError> {
        match (&self.path, &self.generator) {
            (Some(_), None) => Ok(()),
            (None, Some(g)) => g.validate(),
            _ => bad("dataset needs exactly one of `path` or `generator`"),
        }
    }
}

impl GeneratorSpec {
    fn validate(&self) -> Result<(), CliError> {
        let gen = |e: scalesgd::generators::GenError| CliError::Config(e.to_string());
        match self {
            GeneratorSpec::Uniform { dim, n, value_range, density, seed } => {
                if *n == 0 {
                    return bad("generator.n must be positive");
                }
                let probe = StreamSpec {
                    dim: *dim,
                    value_range: *value_range,
                    density: *density,
                    mutation_fraction: 0.0,
                    seed: *seed,
                };
                probe.validate().map_err(gen)
            }
            GeneratorSpec::Stream { spec, draws, test_size, .. } => {
                if *draws == 0 || *test_size == 0 {
                    return bad("generator.draws and generator.test_size must be positive");
                }
                spec.validate().map_err(gen)
            }
            GeneratorSpec::Replicate { parts, pattern, .. } => {
                if *parts == 0 || pattern.is_empty() {
                    return bad("replicate needs parts >= 1 and a non-empty pattern");
                }
                if let Some(p) = pattern.iter().find(|&&p| p >= *parts) {
                    return bad(format!("pattern entry {p} not in [0, {parts})"));
                }
                Ok(())
            }
        }
    }
}
