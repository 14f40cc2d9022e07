//! L2-regularized logistic regression: per-sample loss and subgradient,
//! dataset logloss, and the dual quantities used by the dual-averaging
//! trainer.
//!
//! Per-sample objective: `log(1 + exp(-y * xi.x)) + lambda/2 * |x|^2`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Dataset, Sample};

/// Lower/upper clamp for dual variables: they live in `[EPS_ALPHA, 1 - EPS_ALPHA]`.
pub const EPS_ALPHA: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ObjectiveError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dual variable {0} outside (0, 1)")]
    DualOutOfRange(f64),
    #[error("dual state inconsistent: {0}")]
    DualInvariant(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub lambda: f64,
}

impl Default for ObjectiveSpec {
    fn default() -> Self {
        Self { lambda: 0.01 }
    }
}

/// Dense model with an iteration counter.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub x: Vec<f64>,
    pub step: u64,
}

impl ModelState {
    pub fn zeros(dim: usize) -> Self {
        Self { x: vec![0.0; dim], step: 0 }
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite())
    }
}

/// `log(1 + exp(-t))` without overflow for large `|t|`.
pub fn logistic_loss(t: f64) -> f64 {
    if t >= 0.0 {
        (-t).exp().ln_1p()
    } else {
        -t + t.exp().ln_1p()
    }
}

/// Standard logistic sigmoid, evaluated on the side that does not overflow.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn squared_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn point_loss(x: &[f64], s: &Sample, lambda: f64) -> f64 {
    logistic_loss(s.label() * s.dot(x)) + 0.5 * lambda * squared_norm(x)
}

/// Subgradient of [`point_loss`] split into a sparse part `coef * xi` and a
/// dense part `lambda * x`, so trainers can fold the dense part into a
/// uniform rescale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Subgradient {
    pub coef: f64,
    pub lambda: f64,
}

impl Subgradient {
    pub fn to_dense(&self, x: &[f64], s: &Sample) -> Vec<f64> {
        let mut g: Vec<f64> = x.iter().map(|v| self.lambda * v).collect();
        for (k, v) in s.iter() {
            g[k] += self.coef * v;
        }
        g
    }
}

/// Loss-part coefficient of the subgradient at margin `t = y * xi.x`.
pub fn loss_coefficient(label: f64, margin: f64) -> f64 {
    -label * sigmoid(-margin)
}

pub fn point_subgradient(x: &[f64], s: &Sample, lambda: f64) -> Subgradient {
    let margin = s.label() * s.dot(x);
    Subgradient { coef: loss_coefficient(s.label(), margin), lambda }
}

/// Mean unregularized logloss of `x` over `ds`.
pub fn dataset_logloss(x: &[f64], ds: &Dataset) -> Result<f64, ObjectiveError> {
    if ds.is_empty() {
        return Err(ObjectiveError::EmptyDataset);
    }
    if x.len() != ds.dim() {
        return Err(ObjectiveError::DimMismatch { expected: ds.dim(), found: x.len() });
    }
    let total: f64 = ds.samples().iter().map(|s| logistic_loss(s.label() * s.dot(x))).sum();
    Ok(total / ds.len() as f64)
}

/// Regularized empirical risk `(1/n) sum loss + lambda/2 |x|^2`.
pub fn primal_objective(x: &[f64], ds: &Dataset, lambda: f64) -> Result<f64, ObjectiveError> {
    Ok(dataset_logloss(x, ds)? + 0.5 * lambda * squared_norm(x))
}

fn clamp_alpha(a: f64) -> Result<f64, ObjectiveError> {
    if !(0.0..=1.0).contains(&a) {
        return Err(ObjectiveError::DualOutOfRange(a));
    }
    Ok(a.clamp(EPS_ALPHA, 1.0 - EPS_ALPHA))
}

/// Conjugate of the logistic loss at `-a`: `a ln a + (1 - a) ln(1 - a)`.
pub fn logistic_conjugate(a: f64) -> Result<f64, ObjectiveError> {
    let a = clamp_alpha(a)?;
    Ok(a * a.ln() + (1.0 - a) * (1.0 - a).ln())
}

/// Dual variables with the primal image `v = (1 / (lambda n)) sum_i alpha_i y_i xi_i`.
/// Because the regularizer is `1/2 |x|^2`, the primal iterate is `v` itself.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    alpha: Vec<f64>,
    v: Vec<f64>,
    lambda: f64,
}

impl DualState {
    /// Every `alpha_i` set to `init` (clamped into `[EPS_ALPHA, 1 - EPS_ALPHA]`)
    /// with a consistent `v`.
    pub fn new(ds: &Dataset, lambda: f64, init: f64) -> Result<Self, ObjectiveError> {
        if ds.is_empty() {
            return Err(ObjectiveError::EmptyDataset);
        }
        let a = clamp_alpha(init)?;
        let alpha = vec![a; ds.len()];
        let v = primal_image(&alpha, ds, lambda);
        Ok(Self { alpha, v, lambda })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Adds `delta` to `alpha[i]`, clamped to the open interval. The caller
    /// is responsible for the matching change to `v`.
    pub(crate) fn add_alpha(&mut self, i: usize, delta: f64) {
        self.alpha[i] = (self.alpha[i] + delta).clamp(EPS_ALPHA, 1.0 - EPS_ALPHA);
    }

    pub(crate) fn add_to_v(&mut self, dv: &[(usize, f64)]) {
        for &(k, d) in dv {
            self.v[k] += d;
        }
    }

    /// Recomputes `v` from `alpha`.
    pub fn recomputed_v(&self, ds: &Dataset) -> Vec<f64> {
        primal_image(&self.alpha, ds, self.lambda)
    }

    pub fn check(&self, ds: &Dataset, tolerance: f64) -> Result<(), ObjectiveError> {
        if self.alpha.len() != ds.len() || self.v.len() != ds.dim() {
            return Err(ObjectiveError::DualInvariant("shape does not match dataset".into()));
        }
        if let Some(&a) = self.alpha.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return Err(ObjectiveError::DualOutOfRange(a));
        }
        let fresh = self.recomputed_v(ds);
        let scale = fresh.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let drift = fresh.iter().zip(&self.v).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if drift > tolerance * scale {
            return Err(ObjectiveError::DualInvariant(format!("v drifted by {drift:e}")));
        }
        Ok(())
    }
}

fn primal_image(alpha: &[f64], ds: &Dataset, lambda: f64) -> Vec<f64> {
    let mut v = vec![0.0; ds.dim()];
    let scale = 1.0 / (lambda * ds.len() as f64);
    for (a, s) in alpha.iter().zip(ds.samples()) {
        let w = scale * a * s.label();
        for (k, x) in s.iter() {
            v[k] += w * x;
        }
    }
    v
}

/// `(1/n) sum -L*(-alpha_i) - lambda/2 |v|^2`.
pub fn dual_objective(dual: &DualState) -> Result<f64, ObjectiveError> {
    let n = dual.alpha.len() as f64;
    let mut conj = 0.0;
    for &a in &dual.alpha {
        conj -= logistic_conjugate(a)?;
    }
    Ok(conj / n - 0.5 * dual.lambda * squared_norm(&dual.v))
}

/// Primal objective at `x = v` minus the dual objective. Non-negative up to
/// rounding by weak duality.
pub fn duality_gap(dual: &DualState, ds: &Dataset) -> Result<f64, ObjectiveError> {
    dual.check(ds, 1e-8)?;
    Ok(primal_objective(&dual.v, ds, dual.lambda)? - dual_objective(dual)?)
}
