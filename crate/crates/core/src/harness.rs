//! Worker-count sweeps, gain growth under the asynchronous (cost) and
//! synchronous (fixed-iteration loss) definitions, and upper-bound detection.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algorithms::{self, EvalSets, RunConfig, TimeModel, Trace, TrainError};
use crate::data::SampleSource;
use crate::objective::ObjectiveSpec;

pub const GAIN_GROWTH_HEADER: &str = "m,metric,gain_growth";
pub const DEFAULT_THETA: f64 = 1e-3;
/// Default target: this factor times the best test logloss of the one-worker run.
pub const DEFAULT_EPSILON_FACTOR: f64 = 1.05;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid sweep config: {0}")]
    InvalidConfig(String),
    #[error("target logloss {epsilon} not reached within the run (m = {workers})")]
    TargetNotReached { workers: usize, epsilon: f64 },
    #[error("no gain growths to inspect")]
    EmptyGrowths,
    #[error("run with m = {workers} failed: {source}")]
    Run {
        workers: usize,
        #[source]
        source: TrainError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    AsyncCost,
    SyncGain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Situation {
    NegativeGrowth,
    GrowthBelowTheta,
    NotReached,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperBoundReport {
    pub bound_low: Option<usize>,
    pub bound_high: Option<usize>,
    pub situation: Situation,
}

impl UpperBoundReport {
    pub fn not_reached() -> Self {
        Self { bound_low: None, bound_high: None, situation: Situation::NotReached }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainGrowthRow {
    pub m: usize,
    pub metric: f64,
    /// Growth to the next worker count; absent on the last row.
    pub gain_growth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainGrowthTable {
    pub rows: Vec<GainGrowthRow>,
}

impl GainGrowthTable {
    pub fn new(worker_counts: &[usize], metrics: &[f64], growths: &[f64]) -> Self {
        let rows = worker_counts
            .iter()
            .zip(metrics)
            .enumerate()
            .map(|(i, (&m, &metric))| GainGrowthRow { m, metric, gain_growth: growths.get(i).copied() })
            .collect();
        Self { rows }
    }

    pub fn growths(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.gain_growth).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(GAIN_GROWTH_HEADER);
        out.push('\n');
        for r in &self.rows {
            match r.gain_growth {
                Some(g) => writeln!(out, "{},{},{}", r.m, r.metric, g),
                None => writeln!(out, "{},{},", r.m, r.metric),
            }
            .expect("writing to a String");
        }
        out
    }
}

/// Iterations per worker needed to reach `epsilon` on the test set.
pub fn cost_to_epsilon(trace: &Trace, epsilon: f64) -> Result<u64, HarnessError> {
    let row = trace.rows.iter().find(|r| r.test_logloss <= epsilon).ok_or(HarnessError::TargetNotReached {
        workers: trace.workers,
        epsilon,
    })?;
    Ok(match trace.time_model {
        TimeModel::Asynchronous => row.server_iter.div_ceil(trace.workers as u64),
        TimeModel::Synchronous => row.server_iter,
    })
}

/// `cost(m_i) - cost(m_{i+1})`.
pub fn gain_growth_async(costs: &[f64]) -> Vec<f64> {
    costs.windows(2).map(|w| w[0] - w[1]).collect()
}

/// `loss(m_i) - loss(m_{i+1})` for losses at a common server iteration.
pub fn gain_growth_sync(losses: &[f64]) -> Vec<f64> {
    losses.windows(2).map(|w| w[0] - w[1]).collect()
}

/// Test logloss at the last evaluation at or before `fixed_iter`.
pub fn loss_at_iter(trace: &Trace, fixed_iter: u64) -> Option<f64> {
    trace.row_at_or_before(fixed_iter).map(|r| r.test_logloss)
}

/// Finds the first adjacent pair of worker counts where scaling stops
/// paying: a negative growth in async mode, a growth below `theta` in sync
/// mode (a negative growth is reported as such in either mode).
pub fn detect_upper_bound(
    worker_counts: &[usize],
    growths: &[f64],
    mode: SweepMode,
    theta: f64,
) -> Result<UpperBoundReport, HarnessError> {
    if growths.is_empty() {
        return Err(HarnessError::EmptyGrowths);
    }
    if growths.len() + 1 != worker_counts.len() {
        return Err(HarnessError::InvalidConfig(format!(
            "{} growths for {} worker counts",
            growths.len(),
            worker_counts.len()
        )));
    }
    for (i, &g) in growths.iter().enumerate() {
        let situation = match mode {
            SweepMode::AsyncCost if g < 0.0 => Some(Situation::NegativeGrowth),
            SweepMode::SyncGain if g < 0.0 => Some(Situation::NegativeGrowth),
            SweepMode::SyncGain if g < theta => Some(Situation::GrowthBelowTheta),
            _ => None,
        };
        if let Some(situation) = situation {
            return Ok(UpperBoundReport {
                bound_low: Some(worker_counts[i]),
                bound_high: Some(worker_counts[i + 1]),
                situation,
            });
        }
    }
    Ok(UpperBoundReport::not_reached())
}

fn default_theta() -> f64 {
    DEFAULT_THETA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: RunConfig,
    pub worker_counts: Vec<usize>,
    pub mode: SweepMode,
    /// Server iteration at which losses are compared (sync mode).
    #[serde(default)]
    pub fixed_iter: Option<u64>,
    /// Target logloss (async mode); defaults to a multiple of the one-worker best.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default = "default_theta")]
    pub theta: f64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidConfig(m.to_string()));
        if self.worker_counts.is_empty() {
            return bad("worker_counts is empty");
        }
        if self.worker_counts.contains(&0) {
            return bad("worker counts must be positive");
        }
        if self.worker_counts.windows(2).any(|w| w[0] >= w[1]) {
            return bad("worker_counts must be strictly increasing");
        }
        if !(self.theta.is_finite() && self.theta >= 0.0) {
            return bad("theta must be a non-negative number");
        }
        if self.mode == SweepMode::SyncGain && self.fixed_iter.is_none() {
            return bad("sync_gain mode needs fixed_iter");
        }
        self.base.validate().map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
        for &m in &self.worker_counts {
            self.base.with_workers(m).validate().map_err(|e| HarnessError::InvalidConfig(format!("m = {m}: {e}")))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub traces: Vec<(usize, Trace)>,
    pub table: GainGrowthTable,
    pub report: UpperBoundReport,
    /// Target used in async mode.
    pub epsilon: Option<f64>,
}

impl SweepOutcome {
    /// Writes `m<k>.csv` per worker count, `gain_growth.csv` and `upper_bound.json`.
    pub fn write_to(&self, dir: &Path) -> Result<(), HarnessError> {
        fs::create_dir_all(dir)?;
        for (m, trace) in &self.traces {
            fs::write(dir.join(format!("m{m}.csv")), trace.to_csv())?;
        }
        fs::write(dir.join("gain_growth.csv"), self.table.to_csv())?;
        fs::write(dir.join("upper_bound.json"), self.report.to_json())?;
        Ok(())
    }
}

fn run_one(src: &SampleSource, eval: &EvalSets, cfg: &RunConfig, obj: &ObjectiveSpec) -> Result<Trace, HarnessError> {
    algorithms::run(src, eval, cfg, obj).map_err(|source| HarnessError::Run { workers: cfg.workers, source })
}

/// Best test logloss of the one-worker run times [`DEFAULT_EPSILON_FACTOR`].
pub fn default_epsilon(src: &SampleSource, eval: &EvalSets, base: &RunConfig, obj: &ObjectiveSpec) -> Result<f64, HarnessError> {
    let mut cfg = base.with_workers(1);
    cfg.epsilon_target = None;
    let trace = run_one(src, eval, &cfg, obj)?;
    let best = trace.best_test_logloss().expect("a trace has at least its initial row");
    Ok(DEFAULT_EPSILON_FACTOR * best)
}

/// Runs every worker count on the same source and draw sequence, `jobs`
/// runs at a time. Results are ordered by worker count.
pub fn run_sweep(
    src: &SampleSource,
    eval: &EvalSets,
    obj: &ObjectiveSpec,
    cfg: &SweepConfig,
    jobs: usize,
) -> Result<SweepOutcome, HarnessError> {
    cfg.validate()?;
    let epsilon = match (cfg.mode, cfg.epsilon) {
        (SweepMode::AsyncCost, Some(e)) => Some(e),
        (SweepMode::AsyncCost, None) => Some(default_epsilon(src, eval, &cfg.base, obj)?),
        (SweepMode::SyncGain, _) => None,
    };
    let configs: Vec<RunConfig> = cfg
        .worker_counts
        .iter()
        .map(|&m| {
            let mut c = cfg.base.with_workers(m);
            match cfg.mode {
                SweepMode::AsyncCost => c.epsilon_target = epsilon,
                SweepMode::SyncGain => {
                    c.epsilon_target = None;
                    c.max_server_iters = cfg.fixed_iter.expect("validated");
                }
            }
            c
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::InvalidConfig(format!("thread pool: {e}")))?;
    let traces: Vec<Trace> =
        pool.install(|| configs.par_iter().map(|c| run_one(src, eval, c, obj)).collect::<Result<_, _>>())?;

    let metrics: Vec<f64> = match cfg.mode {
        SweepMode::AsyncCost => {
            let eps = epsilon.expect("async mode has a target");
            traces.iter().map(|t| cost_to_epsilon(t, eps).map(|c| c as f64)).collect::<Result<_, _>>()?
        }
        SweepMode::SyncGain => {
            let at = cfg.fixed_iter.expect("validated");
            traces.iter().map(|t| loss_at_iter(t, at).expect("initial row precedes any fixed iteration")).collect()
        }
    };
    let growths = match cfg.mode {
        SweepMode::AsyncCost => gain_growth_async(&metrics),
        SweepMode::SyncGain => gain_growth_sync(&metrics),
    };
    let report = if growths.is_empty() {
        UpperBoundReport::not_reached()
    } else {
        detect_upper_bound(&cfg.worker_counts, &growths, cfg.mode, cfg.theta)?
    };
    Ok(SweepOutcome {
        traces: cfg.worker_counts.iter().copied().zip(traces).collect(),
        table: GainGrowthTable::new(&cfg.worker_counts, &metrics, &growths),
        report,
        epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::TraceRow;

    fn trace(tm: TimeModel, m: usize, points: &[(u64, f64)]) -> Trace {
        let mut t = Trace::new(tm, m);
        for &(it, loss) in points {
            t.rows.push(TraceRow {
                server_iter: it,
                worker_iters: tm.worker_iters(it, m),
                pca_time: tm.pca_time(it, m),
                train_logloss: loss,
                test_logloss: loss,
            });
        }
        t
    }

    #[test]
    fn cost_examples() {
        let t8 = trace(TimeModel::Asynchronous, 8, &[(0, 0.7), (6242, 0.3)]);
        assert_eq!(cost_to_epsilon(&t8, 0.3).unwrap(), 781);
        let t9 = trace(TimeModel::Asynchronous, 9, &[(0, 0.7), (6497, 0.3)]);
        assert_eq!(cost_to_epsilon(&t9, 0.3).unwrap(), 722);
        let t1 = trace(TimeModel::Asynchronous, 1, &[(0, 0.7), (500, 0.3)]);
        assert_eq!(cost_to_epsilon(&t1, 0.31).unwrap(), 500);
        let sync = trace(TimeModel::Synchronous, 4, &[(0, 0.7), (40, 0.3)]);
        assert_eq!(cost_to_epsilon(&sync, 0.3).unwrap(), 40);
        assert!(matches!(cost_to_epsilon(&sync, 0.1), Err(HarnessError::TargetNotReached { .. })));
    }

    #[test]
    fn growth_examples() {
        assert_eq!(gain_growth_async(&[781.0, 722.0]), vec![59.0]);
        assert_eq!(gain_growth_async(&[5.0, 5.0]), vec![0.0]);
        assert_eq!(gain_growth_async(&[321.0, 356.0]), vec![-35.0]);
        let g = gain_growth_sync(&[4.7525, 4.5871]);
        assert!((g[0] - 0.1654).abs() < 1e-12);
        assert_eq!(gain_growth_sync(&[0.4, 0.4]), vec![0.0]);
    }

    #[test]
    fn upper_bound_examples() {
        let ms = [2, 4, 8, 16];
        let hog = gain_growth_async(&[376.0, 321.0, 356.0, 412.0]);
        let r = detect_upper_bound(&ms, &hog, SweepMode::AsyncCost, DEFAULT_THETA).unwrap();
        assert_eq!((r.bound_low, r.bound_high, r.situation), (Some(4), Some(8), Situation::NegativeGrowth));
        let r = detect_upper_bound(&[1, 2, 3], &[3.0, 1.0], SweepMode::SyncGain, 0.0).unwrap();
        assert_eq!(r, UpperBoundReport::not_reached());
        assert!(matches!(detect_upper_bound(&[1], &[], SweepMode::AsyncCost, 0.0), Err(HarnessError::EmptyGrowths)));
        let r = detect_upper_bound(&[1, 2, 3], &[0.01, 0.0005], SweepMode::SyncGain, 1e-3).unwrap();
        assert_eq!(r.situation, Situation::GrowthBelowTheta);
        assert_eq!((r.bound_low, r.bound_high), (Some(2), Some(3)));
    }

    #[test]
    fn table_and_report_formats() {
        let table = GainGrowthTable::new(&[2, 4], &[781.0, 722.0], &[59.0]);
        assert_eq!(table.to_csv(), "m,metric,gain_growth\n2,781,59\n4,722,\n");
        let json = UpperBoundReport { bound_low: Some(4), bound_high: Some(8), situation: Situation::NegativeGrowth }.to_json();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["bound_low"], 4);
        assert_eq!(v["situation"], "negative_growth");
        let open: serde_json::Value = serde_json::from_str(&UpperBoundReport::not_reached().to_json()).unwrap();
        assert!(open["bound_high"].is_null());
    }

    #[test]
    fn sweep_config_validation() {
        let base = RunConfig::new(crate::algorithms::Algorithm::Hogwild, 1);
        let mut cfg = SweepConfig { base, worker_counts: vec![1, 2, 2], mode: SweepMode::AsyncCost, fixed_iter: None, epsilon: None, theta: 1e-3 };
        assert!(cfg.validate().is_err());
        cfg.worker_counts = vec![1, 2, 4];
        assert!(cfg.validate().is_ok());
        cfg.mode = SweepMode::SyncGain;
        assert!(cfg.validate().is_err());
    }
}
