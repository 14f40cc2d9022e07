//! Decentralized SGD with extrapolation-compressed gossip. Each worker keeps
//! its model `x_i` and the error `e_i = y_i - x_i` of the compressed
//! estimate `y_i` its neighbours see. With identity compression the error
//! stays exactly zero.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::sgd::coefficient;
use super::trace::Recorder;
use super::{check_dims, Algorithm, Compression, EvalSets, RunConfig, Topology, Trace, TrainError};
use crate::data::SampleSource;
use crate::generators::keyed_rng;
use crate::objective::ObjectiveSpec;

const QUANT_DOMAIN: u64 = 0x0071_7561_6e74;

/// Doubly stochastic gossip matrix for `m` workers.
pub fn mixing_matrix(m: usize, topology: Topology) -> Vec<Vec<f64>> {
    let mut w = vec![vec![0.0; m]; m];
    match (topology, m) {
        (_, 0) => {}
        (_, 1) => w[0][0] = 1.0,
        (Topology::Complete, _) | (Topology::Ring, 2) => {
            for row in &mut w {
                row.fill(1.0 / m as f64);
            }
        }
        (Topology::Ring, _) => {
            for (i, row) in w.iter_mut().enumerate() {
                for j in [(i + m - 1) % m, i, (i + 1) % m] {
                    row[j] = 1.0 / 3.0;
                }
            }
        }
    }
    w
}

/// Unbiased stochastic rounding onto `2^bits - 1` levels of `max |z|`.
pub fn stochastic_quantize(z: &[f64], bits: u32, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let levels = ((1u64 << bits) - 1) as f64;
    let scale = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return z.to_vec();
    }
    z.iter()
        .map(|&v| {
            let u = v.abs() / scale * levels;
            let lo = u.floor();
            let q = if rng.gen::<f64>() < u - lo { lo + 1.0 } else { lo };
            v.signum() * q * scale / levels
        })
        .collect()
}

/// Replayable ECD-PSGD state.
pub struct EcdSimulator {
    neighbours: Vec<Vec<(usize, f64)>>,
    x: Vec<Vec<f64>>,
    e: Vec<Vec<f64>>,
    next: Vec<Vec<f64>>,
    grad: Vec<f64>,
    t: u64,
    gamma: f64,
    lambda: f64,
    compression: Compression,
    seed: u64,
}

impl EcdSimulator {
    pub fn new(dim: usize, cfg: &RunConfig, obj: &ObjectiveSpec) -> Self {
        Self::with_models(vec![vec![0.0; dim]; cfg.workers], cfg, obj)
    }

    /// Starts from explicit (possibly disagreeing) worker models.
    pub fn with_models(x: Vec<Vec<f64>>, cfg: &RunConfig, obj: &ObjectiveSpec) -> Self {
        let m = x.len();
        let dim = x.first().map_or(0, Vec::len);
        let neighbours = mixing_matrix(m, cfg.topology)
            .into_iter()
            .map(|row| row.into_iter().enumerate().filter(|(_, w)| *w != 0.0).collect())
            .collect();
        Self {
            neighbours,
            e: vec![vec![0.0; dim]; m],
            next: vec![vec![0.0; dim]; m],
            x,
            grad: vec![0.0; dim],
            t: 0,
            gamma: cfg.gamma,
            lambda: obj.lambda,
            compression: cfg.compression,
            seed: cfg.seed,
        }
    }

    pub fn models(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn mean_model(&self) -> Vec<f64> {
        let m = self.x.len() as f64;
        let mut mean = self.x[0].clone();
        for xi in &self.x[1..] {
            for (a, b) in mean.iter_mut().zip(xi) {
                *a += b;
            }
        }
        for a in &mut mean {
            *a /= m;
        }
        mean
    }

    /// `(1/m) sum_i |x_i - mean|^2`.
    pub fn consensus_distance(&self) -> f64 {
        let mean = self.mean_model();
        let total: f64 = self
            .x
            .iter()
            .map(|xi| xi.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .sum();
        total / self.x.len() as f64
    }

    /// One synchronous round. With `src = None` no gradient is taken, which
    /// isolates the gossip dynamics.
    pub fn step(&mut self, src: Option<&SampleSource>) -> bool {
        let m = self.x.len();
        let j = self.t;
        let t = (j + 1) as f64;
        let mut finite = true;
        for i in 0..m {
            if let Some(src) = src {
                let s = src.draw(j * m as u64 + i as u64);
                let c = coefficient(&s, &self.x[i]);
                for (k, v) in s.iter() {
                    self.grad[k] += c * v;
                }
            }
            let out = &mut self.next[i];
            let xi = &self.x[i];
            for k in 0..out.len() {
                let mut h = 0.0;
                for (n, &(nb, w)) in self.neighbours[i].iter().enumerate() {
                    let y = self.x[nb][k] + self.e[nb][k];
                    h = if n == 0 { w * y } else { h + w * y };
                }
                out[k] = h - self.gamma * (self.grad[k] / 1.0 + self.lambda * xi[k]);
                self.grad[k] = 0.0;
                finite &= out[k].is_finite();
            }
        }
        if let Compression::StochasticQuantize { bits } = self.compression {
            for i in 0..m {
                let z: Vec<f64> = self.x[i]
                    .iter()
                    .zip(&self.next[i])
                    .map(|(a, b)| (1.0 - t / 2.0) * a + (t / 2.0) * b)
                    .collect();
                let mut rng = keyed_rng(self.seed ^ QUANT_DOMAIN, j * m as u64 + i as u64);
                let c = stochastic_quantize(&z, bits, &mut rng);
                for ((e, cz), zz) in self.e[i].iter_mut().zip(&c).zip(&z) {
                    *e = (1.0 - 2.0 / t) * *e + (2.0 / t) * (cz - zz);
                }
            }
        }
        std::mem::swap(&mut self.x, &mut self.next);
        self.t += 1;
        finite
    }
}

pub fn run_ecd_psgd(src: &SampleSource, eval: &EvalSets, cfg: &RunConfig, obj: &ObjectiveSpec) -> Result<Trace, TrainError> {
    cfg.validate()?;
    if cfg.algorithm != Algorithm::EcdPsgd {
        return Err(TrainError::InvalidConfig(format!("config is for {:?}, not EcdPsgd", cfg.algorithm)));
    }
    check_dims(src, eval)?;
    let mut sim = EcdSimulator::new(src.dim(), cfg, obj);
    let mut rec = Recorder::new(eval, cfg);
    if rec.observe(0, &sim.mean_model())? {
        return Ok(rec.finish());
    }
    for j in 0..cfg.max_server_iters {
        if !sim.step(Some(src)) {
            return Err(rec.diverged(j));
        }
        let iter = j + 1;
        if (iter % cfg.eval_every == 0 || iter == cfg.max_server_iters) && rec.observe(iter, &sim.mean_model())? {
            break;
        }
    }
    Ok(rec.finish())
}
