//! Training objectives for the boosted ensemble: squared error, softmax
//! cross-entropy, and multi-class focal loss.
//!
//! Classification losses are differentiated with respect to the logits
//! `z` of `p = softmax(z)`. For the focal loss
//!
//! ```text
//! L = -(1 - p_t)^g * ln(p_t),            u = p_t, g = focal gamma
//! ```
//!
//! writing `B(u) = g*u*(1-u)^(g-1)*ln(u) - (1-u)^g`, the chain rule gives
//!
//! ```text
//! dL/dz_k   = B(u) * (d_tk - p_k)
//! d2L/dz_k2 = B'(u) * u * (d_tk - p_k)^2 - B(u) * p_k * (1 - p_k)
//! B'(u)     = g*(1-u)^(g-2)*ln(u)*((1-u) - (g-1)*u) + 2*g*(1-u)^(g-1)
//! ```
//!
//! where `d_tk` is the Kronecker delta against the true class. At `g = 0`
//! this collapses to the cross-entropy pair `(p_k - d_tk, p_k*(1-p_k))`,
//! which we compute directly on that path so the reduction is exact.
//! Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before any
//! logarithm so gradients stay bounded.

use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lower clamp applied to probabilities before taking logs.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    SquaredError,
    SoftmaxCe,
    Focal,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("probability component {index} is {value} after clamping; must lie in (0,1)")]
    DegenerateProbability { index: usize, value: f64 },
}

/// Loss, gradient, and diagonal hessian of one classification example,
/// all with respect to the logits.
#[derive(Debug, Clone, PartialEq)]
pub struct PointGrad {
    pub loss: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<f64>,
}

/// In-place stable softmax.
pub fn softmax(logits: &mut [f64]) {
    let max = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut sum = 0.0;
    for z in logits.iter_mut() {
        *z = Float::exp(*z - max);
        sum += *z;
    }
    for z in logits.iter_mut() {
        *z /= sum;
    }
}

fn clamp_prob(p: f64) -> f64 {
    p.max(PROB_CLAMP).min(1.0 - PROB_CLAMP)
}

/// Cross-entropy gradient/hessian for one example, written into `g`/`h`.
pub(crate) fn ce_grad_hess(p: &[f64], truth: usize, g: &mut [f64], h: &mut [f64]) {
    for k in 0..p.len() {
        let delta = if k == truth { 1.0 } else { 0.0 };
        g[k] = p[k] - delta;
        h[k] = p[k] * (1.0 - p[k]);
    }
}

/// Focal gradient/hessian for one example, written into `g`/`h`.
pub(crate) fn focal_grad_hess(p: &[f64], truth: usize, gamma: f64, g: &mut [f64], h: &mut [f64]) {
    if gamma == 0.0 {
        ce_grad_hess(p, truth, g, h);
        return;
    }
    let u = clamp_prob(p[truth]);
    let v = 1.0 - u;
    let ln_u = Float::ln(u);
    let b = gamma * u * Float::powf(v, gamma - 1.0) * ln_u - Float::powf(v, gamma);
    let b_prime = gamma * Float::powf(v, gamma - 2.0) * ln_u * (v - (gamma - 1.0) * u)
        + 2.0 * gamma * Float::powf(v, gamma - 1.0);
    for k in 0..p.len() {
        let delta = if k == truth { 1.0 } else { 0.0 };
        let d = delta - p[k];
        g[k] = b * d;
        h[k] = b_prime * u * d * d - b * p[k] * (1.0 - p[k]);
    }
}

fn focal_loss(p_truth: f64, gamma: f64) -> f64 {
    let u = clamp_prob(p_truth);
    Float::powf(1.0 - u, gamma) * -Float::ln(u)
}

/// Loss, gradient, and hessian of the focal objective at probability
/// vector `p` with true class `truth`. `focal_gamma = 0` is exactly
/// cross-entropy. Components below [`PROB_CLAMP`] are clamped up;
/// anything still outside `(0, 1)` is rejected.
pub fn focal_loss_grad(
    p: &[f64],
    truth: usize,
    focal_gamma: f64,
) -> Result<PointGrad, LossError> {
    let mut clamped: Vec<f64> = Vec::with_capacity(p.len());
    for (index, &raw) in p.iter().enumerate() {
        // f64::max would swallow a NaN here, so keep it for the range test.
        let value = if raw.is_nan() { raw } else { raw.max(PROB_CLAMP) };
        if !(value > 0.0 && value < 1.0) {
            return Err(LossError::DegenerateProbability { index, value });
        }
        clamped.push(value);
    }
    let mut gradient = alloc::vec![0.0; p.len()];
    let mut hessian = alloc::vec![0.0; p.len()];
    focal_grad_hess(&clamped, truth, focal_gamma, &mut gradient, &mut hessian);
    Ok(PointGrad { loss: focal_loss(clamped[truth], focal_gamma), gradient, hessian })
}
