use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{EvalSets, RunConfig, TargetSet, TrainError};
use crate::data::DataError;
use crate::objective::dataset_logloss;

pub const TRACE_HEADER: &str = "server_iter,worker_iters,pca_time,train_logloss,test_logloss";

/// How server iterations map to wall-clock time under the perfect computer
/// assumption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeModel {
    /// One server iteration per unit of time.
    Synchronous,
    /// `m` server iterations per unit of time.
    Asynchronous,
}

impl TimeModel {
    pub fn pca_time(self, server_iter: u64, workers: usize) -> f64 {
        match self {
            TimeModel::Synchronous => server_iter as f64,
            TimeModel::Asynchronous => server_iter as f64 / workers as f64,
        }
    }

    pub fn worker_iters(self, server_iter: u64, workers: usize) -> u64 {
        match self {
            TimeModel::Synchronous => server_iter,
            TimeModel::Asynchronous => server_iter.div_ceil(workers as u64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub server_iter: u64,
    pub worker_iters: u64,
    pub pca_time: f64,
    pub train_logloss: f64,
    pub test_logloss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub time_model: TimeModel,
    pub workers: usize,
    pub rows: Vec<TraceRow>,
    /// Set when the run stopped early on its epsilon target.
    pub reached_target: bool,
}

impl Trace {
    pub fn new(time_model: TimeModel, workers: usize) -> Self {
        Self { time_model, workers, rows: Vec::new(), reached_target: false }
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn best_test_logloss(&self) -> Option<f64> {
        self.rows.iter().map(|r| r.test_logloss).reduce(f64::min)
    }

    /// Row recorded at exactly `server_iter`, if any.
    pub fn row_at(&self, server_iter: u64) -> Option<&TraceRow> {
        self.rows.iter().find(|r| r.server_iter == server_iter)
    }

    /// Last row at or before `server_iter`.
    pub fn row_at_or_before(&self, server_iter: u64) -> Option<&TraceRow> {
        self.rows.iter().rev().find(|r| r.server_iter <= server_iter)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.server_iter, r.worker_iters, r.pca_time, r.train_logloss, r.test_logloss
            );
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }

    /// Parses the rows of a trace CSV. Time model and worker count are not
    /// stored in the file and must be supplied.
    pub fn read_csv<R: BufRead>(r: R, time_model: TimeModel, workers: usize) -> Result<Self, DataError> {
        let mut trace = Trace::new(time_model, workers);
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let line_no = i + 1;
            if i == 0 {
                if line.trim() != TRACE_HEADER {
                    return Err(DataError::Parse { line: 1, message: format!("unexpected header `{line}`") });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(DataError::Parse { line: line_no, message: format!("expected 5 fields, got {}", fields.len()) });
            }
            let int = |s: &str| {
                s.parse::<u64>().map_err(|e| DataError::Parse { line: line_no, message: format!("`{s}`: {e}") })
            };
            let float = |s: &str| {
                s.parse::<f64>().map_err(|e| DataError::Parse { line: line_no, message: format!("`{s}`: {e}") })
            };
            trace.rows.push(TraceRow {
                server_iter: int(fields[0])?,
                worker_iters: int(fields[1])?,
                pca_time: float(fields[2])?,
                train_logloss: float(fields[3])?,
                test_logloss: float(fields[4])?,
            });
        }
        Ok(trace)
    }
}

/// Evaluation cadence and early stopping shared by every trainer.
pub(crate) struct Recorder<'a> {
    eval: &'a EvalSets,
    every: u64,
    max: u64,
    target: Option<(f64, TargetSet)>,
    trace: Trace,
}

impl<'a> Recorder<'a> {
    pub(crate) fn new(eval: &'a EvalSets, cfg: &RunConfig) -> Self {
        Self {
            eval,
            every: cfg.eval_every,
            max: cfg.max_server_iters,
            target: cfg.epsilon_target.map(|e| (e, cfg.target_on)),
            trace: Trace::new(cfg.algorithm.time_model(), cfg.workers),
        }
    }

    /// Records a row if `iter` is on the evaluation grid. Returns `Ok(true)`
    /// when the target has been reached.
    pub(crate) fn observe(&mut self, iter: u64, x: &[f64]) -> Result<bool, TrainError> {
        if !iter.is_multiple_of(self.every) && iter != self.max {
            return Ok(false);
        }
        let train = dataset_logloss(x, &self.eval.train)?;
        let test = dataset_logloss(x, &self.eval.test)?;
        if !(train.is_finite() && test.is_finite()) {
            return Err(self.diverged(iter.saturating_sub(1)));
        }
        let (tm, m) = (self.trace.time_model, self.trace.workers);
        self.trace.rows.push(TraceRow {
            server_iter: iter,
            worker_iters: tm.worker_iters(iter, m),
            pca_time: tm.pca_time(iter, m),
            train_logloss: train,
            test_logloss: test,
        });
        let reached = match self.target {
            Some((eps, TargetSet::Test)) => test <= eps,
            Some((eps, TargetSet::Train)) => train <= eps,
            None => false,
        };
        self.trace.reached_target |= reached;
        Ok(reached)
    }

    pub(crate) fn diverged(&mut self, last_finite_step: u64) -> TrainError {
        TrainError::Diverged { last_finite_step, partial: std::mem::replace(&mut self.trace, Trace::new(TimeModel::Synchronous, 1)) }
    }

    pub(crate) fn finish(self) -> Trace {
        self.trace
    }
}
