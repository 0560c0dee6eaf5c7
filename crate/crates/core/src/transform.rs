//! Global statistics alignment followed by a patch-wise local statistics swap.

use crate::error::{Error, Result};
use crate::matching::{match_patches, MatchAssignment, Matcher};
use crate::patch::{extract_patches, recombine_patches};
use crate::tensor::{channel_moments, check_epsilon, moments, FeatureMap, DEFAULT_EPSILON};

/// Default patch size for the local swap.
pub const DEFAULT_PATCH_SIZE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TssatConfig {
    pub patch_size: usize,
    /// Stride between content patches. Equal to `patch_size` tiles the map.
    pub content_stride: usize,
    /// Stride between candidate style patches.
    pub style_stride: usize,
    pub epsilon: f32,
    pub matcher: Matcher,
}

impl Default for TssatConfig {
    fn default() -> Self {
        Self::with_patch_size(DEFAULT_PATCH_SIZE)
    }
}

impl TssatConfig {
    /// Defaults with patch size `k` and content stride `k`.
    pub fn with_patch_size(k: usize) -> Self {
        Self {
            patch_size: k,
            content_stride: k,
            style_stride: 1,
            epsilon: DEFAULT_EPSILON,
            matcher: Matcher::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 || self.content_stride == 0 || self.style_stride == 0 {
            return Err(Error::InvalidArgument(format!(
                "patch size and strides must be >= 1 (k={}, content stride={}, style stride={})",
                self.patch_size, self.content_stride, self.style_stride
            )));
        }
        check_epsilon(self.epsilon)
    }
}

/// Affine map taking (mean, std) of `from` to those of `to`. A zero source
/// deviation collapses the input to the target mean.
fn affine(from: (f64, f64), to: (f64, f64)) -> (f64, f64) {
    let scale = if from.1 > 0.0 { to.1 / from.1 } else { 0.0 };
    (scale, to.0 - scale * from.0)
}

fn apply_affine(v: f32, scale: f64, shift: f64) -> f32 {
    (v as f64 * scale + shift) as f32
}

/// Replaces each content channel's mean and deviation with the style
/// channel's. Spatial sizes may differ.
pub fn gsa(content: &FeatureMap, style: &FeatureMap, epsilon: f32) -> Result<FeatureMap> {
    check_epsilon(epsilon)?;
    if content.channels() != style.channels() {
        return Err(Error::dim(format!(
            "content has {} channels, style has {}",
            content.channels(),
            style.channels()
        )));
    }
    let from = channel_moments(content, epsilon);
    let to = channel_moments(style, epsilon);
    let coeffs: Vec<_> = from.iter().zip(&to).map(|(&f, &t)| affine(f, t)).collect();
    content.map_channels(|c, v| apply_affine(v, coeffs[c].0, coeffs[c].1))
}

fn swap_into(content: &[f32], style: &[f32], channels: usize, epsilon: f32, out: &mut [f32]) {
    let n = content.len() / channels;
    for ch in 0..channels {
        let span = ch * n..(ch + 1) * n;
        let (cm, cv) = moments(&content[span.clone()]);
        let (sm, sv) = moments(&style[span.clone()]);
        let eps = epsilon as f64;
        let (scale, shift) = affine((cm, (cv + eps).sqrt()), (sm, (sv + eps).sqrt()));
        for (o, &v) in out[span.clone()].iter_mut().zip(&content[span]) {
            *o = apply_affine(v, scale, shift);
        }
    }
}

/// Gives a flattened `C×k×k` content patch the per-channel mean and
/// deviation of the style patch.
pub fn swap_patch_stats(
    content: &[f32],
    style: &[f32],
    channels: usize,
    epsilon: f32,
) -> Result<Vec<f32>> {
    check_epsilon(epsilon)?;
    if channels == 0 || content.len() != style.len() || !content.len().is_multiple_of(channels) {
        return Err(Error::dim(format!(
            "cannot swap statistics between patches of {} and {} values over {channels} channels",
            content.len(),
            style.len()
        )));
    }
    let mut out = vec![0.0; content.len()];
    swap_into(content, style, channels, epsilon, &mut out);
    Ok(out)
}

/// Local statistics swap; also returns the patch assignment it used.
pub fn lss_matched(
    features: &FeatureMap,
    style: &FeatureMap,
    cfg: &TssatConfig,
) -> Result<(FeatureMap, MatchAssignment)> {
    cfg.validate()?;
    if features.channels() != style.channels() {
        return Err(Error::dim(format!(
            "content has {} channels, style has {}",
            features.channels(),
            style.channels()
        )));
    }
    let content_patches = extract_patches(features, cfg.patch_size, cfg.content_stride)
        .map_err(|e| context(e, "content"))?;
    let style_patches = extract_patches(style, cfg.patch_size, cfg.style_stride)
        .map_err(|e| context(e, "style"))?;
    let assignment = match_patches(&content_patches, &style_patches, cfg.matcher)?;

    let d = content_patches.patch_len();
    let channels = features.channels();
    let mut swapped = vec![0.0f32; content_patches.len() * d];
    let mut cbuf = vec![0.0f32; d];
    let mut sbuf = vec![0.0f32; d];
    for (i, out) in swapped.chunks_exact_mut(d).enumerate() {
        content_patches.copy_patch(i, &mut cbuf);
        style_patches.copy_patch(assignment.assignment[i], &mut sbuf);
        swap_into(&cbuf, &sbuf, channels, cfg.epsilon, out);
    }
    let swapped = content_patches.with_values(swapped)?;
    Ok((recombine_patches(&swapped, features)?, assignment))
}

/// Local statistics swap of `features` against `style`.
pub fn lss(features: &FeatureMap, style: &FeatureMap, cfg: &TssatConfig) -> Result<FeatureMap> {
    lss_matched(features, style, cfg).map(|(f, _)| f)
}

/// Global alignment, then local swap against the same style map.
pub fn tssat(
    content: &FeatureMap,
    style: &FeatureMap,
    cfg: &TssatConfig,
) -> Result<(FeatureMap, MatchAssignment)> {
    cfg.validate()?;
    let global = gsa(content, style, cfg.epsilon)?;
    lss_matched(&global, style, cfg)
}

fn context(e: Error, which: &str) -> Error {
    match e {
        Error::Dimension(msg) => Error::Dimension(format!("{which}: {msg}")),
        other => other,
    }
}
