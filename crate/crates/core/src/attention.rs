//! Parameter-free self-attention over spatial positions.
//!
//! Features are normalized per channel, compared position against
//! position, and each row is softmaxed over the *other* positions after
//! dividing by a temperature. The diagonal carries no mass.

use crate::error::{Error, Result};
use crate::tensor::{moments, FeatureMap, DEFAULT_EPSILON};

/// Default softmax temperature.
pub const DEFAULT_TAU: f64 = 100.0;

/// Row-stochastic `N×N` map over the `N = H·W` positions, zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    size: usize,
    data: Vec<f32>,
}

impl AttentionMap {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.size..(i + 1) * self.size]
    }

    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.data[i * self.size + j]
    }
}

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "tau must be positive and finite, got {tau}"
        )));
    }
    Ok(())
}

/// Attention probabilities in `f64`, row-major `N×N`.
pub(crate) fn attention_probs(f: &FeatureMap, tau: f64, epsilon: f32) -> Result<Vec<f64>> {
    check_tau(tau)?;
    let n = f.spatial_len();
    if n < 2 {
        return Err(Error::dim(format!(
            "attention needs at least 2 positions, got {}x{}",
            f.height(),
            f.width()
        )));
    }
    let c = f.channels();
    let mut normed = vec![0.0f64; c * n];
    for ch in 0..c {
        let values = f.channel(ch);
        let (mean, var) = moments(values);
        let std = (var + epsilon as f64).sqrt();
        if std == 0.0 {
            return Err(Error::DegenerateChannel { channel: ch });
        }
        for (o, &v) in normed[ch * n..(ch + 1) * n].iter_mut().zip(values) {
            *o = (v as f64 - mean) / std;
        }
    }

    // similarity = normedᵀ · normed
    let mut sim = vec![0.0f64; n * n];
    // SAFETY: normed is c x n row-major; as the left operand we read it
    // transposed (n x c with row stride 1, column stride n). sim is n x n.
    unsafe {
        matrixmultiply::dgemm(
            n,
            c,
            n,
            1.0,
            normed.as_ptr(),
            1,
            n as isize,
            normed.as_ptr(),
            n as isize,
            1,
            0.0,
            sim.as_mut_ptr(),
            n as isize,
            1,
        );
    }

    for (i, row) in sim.chunks_exact_mut(n).enumerate() {
        let peak = row
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &s)| s / tau)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (j, s) in row.iter_mut().enumerate() {
            *s = if j == i { 0.0 } else { (*s / tau - peak).exp() };
            total += *s;
        }
        for s in row.iter_mut() {
            *s /= total;
        }
    }
    Ok(sim)
}

/// Attention map of `f` at temperature `tau`, normalizing with the default epsilon.
pub fn attention_map(f: &FeatureMap, tau: f64) -> Result<AttentionMap> {
    attention_map_with_epsilon(f, tau, DEFAULT_EPSILON)
}

pub fn attention_map_with_epsilon(f: &FeatureMap, tau: f64, epsilon: f32) -> Result<AttentionMap> {
    let probs = attention_probs(f, tau, epsilon)?;
    Ok(AttentionMap {
        size: f.spatial_len(),
        data: probs.into_iter().map(|p| p as f32).collect(),
    })
}
