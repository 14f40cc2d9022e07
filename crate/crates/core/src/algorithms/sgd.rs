//! Primal SGD family: sequential SGD, synchronous mini-batch and the
//! Hogwild! discrete-event simulation. All three apply the same dense update
//! so that their degenerate configurations coincide bit for bit.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use super::trace::Recorder;
use super::{check_dims, Algorithm, DelayModel, EvalSets, RunConfig, Trace, TrainError};
use crate::data::{Sample, SampleSource};
use crate::generators::keyed_rng;
use crate::objective::{loss_coefficient, ObjectiveSpec};

/// Domain tag mixed into the seed of the staleness draws.
const DELAY_DOMAIN: u64 = 0x6465_6c61_7973;

/// Dense gradient accumulator reused across steps.
pub(crate) struct GradBuf {
    g: Vec<f64>,
}

impl GradBuf {
    pub(crate) fn new(dim: usize) -> Self {
        Self { g: vec![0.0; dim] }
    }

    pub(crate) fn add(&mut self, s: &Sample, coef: f64) {
        for (k, v) in s.iter() {
            self.g[k] += coef * v;
        }
    }

    /// `x <- x - gamma * (g / count + lambda * x)` on every coordinate, then
    /// clears the buffer. Returns false if any coordinate became non-finite.
    pub(crate) fn apply(&mut self, x: &mut [f64], count: usize, gamma: f64, lambda: f64) -> bool {
        let c = count as f64;
        let mut finite = true;
        for (xk, gk) in x.iter_mut().zip(self.g.iter_mut()) {
            *xk = *xk - gamma * (*gk / c + lambda * *xk);
            *gk = 0.0;
            finite &= xk.is_finite();
        }
        finite
    }
}

/// Loss-part gradient coefficient of `s` at `x`.
pub(crate) fn coefficient(s: &Sample, x: &[f64]) -> f64 {
    loss_coefficient(s.label(), s.label() * s.dot(x))
}

fn expect(cfg: &RunConfig, algorithm: Algorithm) -> Result<(), TrainError> {
    cfg.validate()?;
    if cfg.algorithm != algorithm {
        return Err(TrainError::InvalidConfig(format!("config is for {:?}, not {algorithm:?}", cfg.algorithm)));
    }
    Ok(())
}

pub fn run_seq_sgd(src: &SampleSource, eval: &EvalSets, cfg: &RunConfig, obj: &ObjectiveSpec) -> Result<Trace, TrainError> {
    expect(cfg, Algorithm::SeqSgd)?;
    if cfg.workers != 1 {
        return Err(TrainError::InvalidConfig("seq_sgd runs with one worker".into()));
    }
    check_dims(src, eval)?;
    let mut x = vec![0.0; src.dim()];
    let mut g = GradBuf::new(src.dim());
    let mut rec = Recorder::new(eval, cfg);
    if rec.observe(0, &x)? {
        return Ok(rec.finish());
    }
    for j in 0..cfg.max_server_iters {
        let s = src.draw(j);
        g.add(&s, coefficient(&s, &x));
        if !g.apply(&mut x, 1, cfg.gamma, obj.lambda) {
            return Err(rec.diverged(j));
        }
        if rec.observe(j + 1, &x)? {
            break;
        }
    }
    Ok(rec.finish())
}

/// Synchronous mini-batch SGD with one sample per worker per server step.
pub fn run_minibatch(src: &SampleSource, eval: &EvalSets, cfg: &RunConfig, obj: &ObjectiveSpec) -> Result<Trace, TrainError> {
    expect(cfg, Algorithm::Minibatch)?;
    check_dims(src, eval)?;
    let b = cfg.effective_batch_size();
    let mut x = vec![0.0; src.dim()];
    let mut g = GradBuf::new(src.dim());
    let mut rec = Recorder::new(eval, cfg);
    if rec.observe(0, &x)? {
        return Ok(rec.finish());
    }
    for j in 0..cfg.max_server_iters {
        for w in 0..b as u64 {
            let s = src.draw(j * b as u64 + w);
            g.add(&s, coefficient(&s, &x));
        }
        if !g.apply(&mut x, b, cfg.gamma, obj.lambda) {
            return Err(rec.diverged(j));
        }
        if rec.observe(j + 1, &x)? {
            break;
        }
    }
    Ok(rec.finish())
}

/// A gradient computed against a stale read, waiting for its apply step.
struct PendingGradient {
    coefs: Vec<f64>,
    read_step: u64,
    worker: usize,
}

#[derive(Debug, Clone)]
pub struct HogwildOutcome {
    pub trace: Trace,
    pub max_staleness: usize,
    /// `staleness_counts[tau]` is the number of applied gradients with that staleness.
    pub staleness_counts: Vec<u64>,
    /// Applied gradients per worker.
    pub worker_counts: Vec<u64>,
}

fn staleness_bound(cfg: &RunConfig) -> usize {
    match cfg.delay_model {
        DelayModel::RoundRobin => cfg.workers - 1,
        DelayModel::Uniform { tau_max } => tau_max,
    }
}

fn staleness(cfg: &RunConfig, k: u64) -> u64 {
    let raw = match cfg.delay_model {
        DelayModel::RoundRobin => (cfg.workers - 1) as u64,
        DelayModel::Uniform { tau_max } => keyed_rng(cfg.seed ^ DELAY_DOMAIN, k).gen_range(0..=tau_max as u64),
    };
    raw.min(k)
}

pub fn run_hogwild(src: &SampleSource, eval: &EvalSets, cfg: &RunConfig, obj: &ObjectiveSpec) -> Result<Trace, TrainError> {
    simulate_hogwild(src, eval, cfg, obj).map(|o| o.trace)
}

/// Lock-free asynchronous SGD. The gradient applied at server step `k` was
/// computed from the model as it stood after step `k - tau(k)`, on draws
/// `k * wb .. (k + 1) * wb` averaged (`wb` = `worker_minibatch`).
pub fn simulate_hogwild(
    src: &SampleSource,
    eval: &EvalSets,
    cfg: &RunConfig,
    obj: &ObjectiveSpec,
) -> Result<HogwildOutcome, TrainError> {
    expect(cfg, Algorithm::Hogwild)?;
    check_dims(src, eval)?;
    let m = cfg.workers;
    let wb = cfg.worker_minibatch as u64;
    let bound = staleness_bound(cfg) as u64;
    let max = cfg.max_server_iters;

    let mut x = vec![0.0; src.dim()];
    let mut g = GradBuf::new(src.dim());
    let mut rec = Recorder::new(eval, cfg);
    let mut stale_counts = vec![0u64; bound as usize + 1];
    let mut worker_counts = vec![0u64; m];
    let mut by_read: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    let mut pending: HashMap<u64, PendingGradient> = HashMap::new();
    let schedule = |k: u64, by_read: &mut BTreeMap<u64, Vec<u64>>| {
        by_read.entry(k - staleness(cfg, k)).or_default().push(k);
    };
    for k in 0..=bound.min(max.saturating_sub(1)) {
        schedule(k, &mut by_read);
    }

    let finish = |rec: Recorder, stale_counts: Vec<u64>, worker_counts: Vec<u64>| {
        let max_staleness = stale_counts.iter().rposition(|&c| c > 0).unwrap_or(0);
        HogwildOutcome { trace: rec.finish(), max_staleness, staleness_counts: stale_counts, worker_counts }
    };

    if rec.observe(0, &x)? {
        return Ok(finish(rec, stale_counts, worker_counts));
    }
    for r in 0..max {
        if r > 0 && r + bound < max {
            schedule(r + bound, &mut by_read);
        }
        // Every worker whose gradient is read now sees the model after r steps.
        for k in by_read.remove(&r).unwrap_or_default() {
            let coefs = (0..wb)
                .map(|i| {
                    let s = src.draw(k * wb + i);
                    coefficient(&s, &x)
                })
                .collect();
            pending.insert(k, PendingGradient { coefs, read_step: r, worker: (k % m as u64) as usize });
        }
        let grad = pending.remove(&r).expect("gradient for step r was read at or before r");
        for (i, &c) in grad.coefs.iter().enumerate() {
            let s = src.draw(r * wb + i as u64);
            g.add(&s, c);
        }
        let tau = (r - grad.read_step) as usize;
        debug_assert!(tau as u64 <= bound);
        stale_counts[tau] += 1;
        worker_counts[grad.worker] += 1;
        if !g.apply(&mut x, wb as usize, cfg.gamma, obj.lambda) {
            return Err(rec.diverged(r));
        }
        if rec.observe(r + 1, &x)? {
            break;
        }
    }
    Ok(finish(rec, stale_counts, worker_counts))
}
