//! Distributed dual coordinate ascent for the logistic objective. Each
//! worker maximizes a local quadratic model of the dual over its own block
//! of coordinates; the server adds the blocks and averages the primal image.
//! The local quadratic term is scaled by the local block size `n / m`, which
//! makes the additive combination safe.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::trace::Recorder;
use super::{check_dims, Algorithm, EvalSets, RunConfig, Trace, TrainError};
use crate::data::{Dataset, Sample, SampleSource};
use crate::objective::{dual_objective, duality_gap, logistic_conjugate, DualState, ObjectiveError, ObjectiveSpec, EPS_ALPHA};

/// Output of a local solve over a block `Q` of dual coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSolve {
    pub delta_alpha: Vec<f64>,
    /// `(1 / (lambda n_local)) sum_i y_i delta_alpha_i xi_i`, sorted by coordinate.
    pub delta_v: Vec<(usize, f64)>,
}

/// Objective maximized by [`dadm_local_solve`]:
/// `sum_i -L*(-(alpha_i + d_i)) - (lambda n_local / 2) |v + dv(d)|^2`.
pub fn local_dual_objective(
    samples: &[&Sample],
    alpha: &[f64],
    delta_alpha: &[f64],
    v: &[f64],
    lambda: f64,
    n_local: f64,
) -> Result<f64, ObjectiveError> {
    let scale = 1.0 / (lambda * n_local);
    let mut u = v.to_vec();
    let mut conj = 0.0;
    for ((s, a), d) in samples.iter().zip(alpha).zip(delta_alpha) {
        conj -= logistic_conjugate(a + d)?;
        for (k, x) in s.iter() {
            u[k] += scale * s.label() * d * x;
        }
    }
    Ok(conj - 0.5 * lambda * n_local * u.iter().map(|x| x * x).sum::<f64>())
}

/// Maximizes `-(a+d) ln(a+d) - (1-a-d) ln(1-a-d) - c d - (h/2) d^2` over `d`
/// with `a + d` kept in `[EPS_ALPHA, 1 - EPS_ALPHA]`.
fn coordinate_step(a: f64, c: f64, h: f64) -> f64 {
    let f = |d: f64| -((a + d) / (1.0 - a - d)).ln() - c - h * d;
    let df = |d: f64| -1.0 / ((a + d) * (1.0 - a - d)) - h;
    let (mut lo, mut hi) = (EPS_ALPHA - a, 1.0 - EPS_ALPHA - a);
    if f(lo) <= 0.0 {
        return lo;
    }
    if f(hi) >= 0.0 {
        return hi;
    }
    let mut d = 0.0f64.clamp(lo, hi);
    for _ in 0..200 {
        let fd = f(d);
        if fd == 0.0 {
            return d;
        }
        if fd > 0.0 {
            lo = d;
        } else {
            hi = d;
        }
        let newton = d - fd / df(d);
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - d).abs() <= 1e-15 * d.abs().max(1e-300) || hi - lo <= f64::EPSILON * (lo.abs() + hi.abs()) {
            return next;
        }
        d = next;
    }
    d
}

/// Cyclic exact coordinate maximization of [`local_dual_objective`] over
/// `passes` sweeps, starting from `delta_alpha = 0`.
pub fn dadm_local_solve(
    samples: &[&Sample],
    alpha: &[f64],
    v: &[f64],
    lambda: f64,
    n_local: f64,
    passes: usize,
) -> LocalSolve {
    let scale = 1.0 / (lambda * n_local);
    let mut delta_alpha = vec![0.0; samples.len()];
    let mut dv: BTreeMap<usize, f64> = BTreeMap::new();
    for _ in 0..passes {
        for (i, s) in samples.iter().enumerate() {
            let a = alpha[i] + delta_alpha[i];
            let margin: f64 = s.iter().map(|(k, x)| x * (v[k] + dv.get(&k).copied().unwrap_or(0.0))).sum();
            let d = coordinate_step(a, s.label() * margin, s.squared_norm() * scale);
            delta_alpha[i] += d;
            for (k, x) in s.iter() {
                *dv.entry(k).or_insert(0.0) += scale * s.label() * d * x;
            }
        }
    }
    LocalSolve { delta_alpha, delta_v: dv.into_iter().collect() }
}

/// Replayable DADM state over a finite source.
pub struct DadmSimulator {
    src: SampleSource,
    dataset: Arc<Dataset>,
    dual: DualState,
    workers: usize,
    local_batch: usize,
    passes: usize,
    t: u64,
}

impl DadmSimulator {
    pub fn new(src: &SampleSource, cfg: &RunConfig, obj: &ObjectiveSpec) -> Result<Self, TrainError> {
        cfg.validate()?;
        let SampleSource::Finite { dataset, .. } = src else {
            return Err(TrainError::Unsupported("dadm needs a finite dataset".into()));
        };
        if cfg.workers * cfg.local_batch_size > dataset.len() {
            return Err(TrainError::InvalidConfig(format!(
                "workers * local_batch_size = {} exceeds the {} samples",
                cfg.workers * cfg.local_batch_size,
                dataset.len()
            )));
        }
        if obj.lambda.is_nan() || obj.lambda <= 0.0 {
            return Err(TrainError::InvalidConfig("dadm needs lambda > 0".into()));
        }
        let dual = DualState::new(dataset, obj.lambda, 0.0)?;
        Ok(Self {
            src: src.clone(),
            dataset: dataset.clone(),
            dual,
            workers: cfg.workers,
            local_batch: cfg.local_batch_size,
            passes: cfg.dadm_passes,
            t: 0,
        })
    }

    pub fn dual_state(&self) -> &DualState {
        &self.dual
    }

    pub fn primal(&self) -> &[f64] {
        self.dual.v()
    }

    pub fn dual_objective(&self) -> Result<f64, ObjectiveError> {
        dual_objective(&self.dual)
    }

    pub fn duality_gap(&self) -> Result<f64, ObjectiveError> {
        duality_gap(&self.dual, &self.dataset)
    }

    pub fn step(&mut self) -> bool {
        let (m, lb) = (self.workers as u64, self.local_batch as u64);
        let n_local = self.dataset.len() as f64 / m as f64;
        let samples = self.dataset.samples();
        let mut alpha_updates = Vec::with_capacity((m * lb) as usize);
        let mut dv_sum: BTreeMap<usize, f64> = BTreeMap::new();
        for w in 0..m {
            let positions: Vec<usize> = (0..lb)
                .map(|i| self.src.position((self.t * m + w) * lb + i).expect("finite source"))
                .collect();
            let block: Vec<&Sample> = positions.iter().map(|&p| &samples[p]).collect();
            let alpha: Vec<f64> = positions.iter().map(|&p| self.dual.alpha()[p]).collect();
            let sol = dadm_local_solve(&block, &alpha, self.dual.v(), self.dual.lambda(), n_local, self.passes);
            alpha_updates.extend(positions.into_iter().zip(sol.delta_alpha));
            for (k, d) in sol.delta_v {
                *dv_sum.entry(k).or_insert(0.0) += d;
            }
        }
        for (p, d) in alpha_updates {
            self.dual.add_alpha(p, d);
        }
        let dv: Vec<(usize, f64)> = dv_sum.into_iter().map(|(k, d)| (k, d / m as f64)).collect();
        self.dual.add_to_v(&dv);
        self.t += 1;
        dv.iter().all(|(k, _)| self.dual.v()[*k].is_finite())
    }
}

pub fn run_dadm(src: &SampleSource, eval: &EvalSets, cfg: &RunConfig, obj: &ObjectiveSpec) -> Result<Trace, TrainError> {
    if cfg.algorithm != Algorithm::Dadm {
        return Err(TrainError::InvalidConfig(format!("config is for {:?}, not Dadm", cfg.algorithm)));
    }
    check_dims(src, eval)?;
    let mut sim = DadmSimulator::new(src, cfg, obj)?;
    let mut rec = Recorder::new(eval, cfg);
    if rec.observe(0, sim.primal())? {
        return Ok(rec.finish());
    }
    for j in 0..cfg.max_server_iters {
        if !sim.step() {
            return Err(rec.diverged(j));
        }
        if rec.observe(j + 1, sim.primal())? {
            break;
        }
    }
    Ok(rec.finish())
}
