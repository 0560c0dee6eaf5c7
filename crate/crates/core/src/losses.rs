//! Forward evaluation of the five training losses and their weighted sum.
//!
//! Every `‖·‖₂` is the Euclidean norm of the flattened difference, with no
//! averaging over elements, so magnitudes grow with tensor size.
//! Statistics here use no epsilon.

use serde::{Deserialize, Serialize};

use crate::attention::{attention_probs, check_tau, DEFAULT_TAU};
use crate::error::{Error, Result};
use crate::layers::{LayerFeatures, VggLayer};
use crate::matching::match_patches;
use crate::patch::extract_patches;
use crate::tensor::{moments, FeatureMap, DEFAULT_EPSILON};
use crate::transform::TssatConfig;

/// Balancing weights. Serialized under the `lambda*` names.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    #[serde(rename = "lambda1")]
    pub content: f64,
    #[serde(rename = "lambda2")]
    pub attention: f64,
    #[serde(rename = "lambda3")]
    pub style: f64,
    #[serde(rename = "lambda4")]
    pub patch_style: f64,
    #[serde(rename = "lambda5")]
    pub identity: f64,
    /// Weight of the pixel terms inside the identity loss.
    #[serde(rename = "lambda_id1")]
    pub identity_pixel: f64,
    /// Weight of the feature terms inside the identity loss.
    #[serde(rename = "lambda_id2")]
    pub identity_feature: f64,
    /// Attention softmax temperature.
    pub tau: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            content: 5.0,
            attention: 50_000.0,
            style: 6.0,
            patch_style: 0.5,
            identity: 1.0,
            identity_pixel: 50.0,
            identity_feature: 1.0,
            tau: DEFAULT_TAU,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("lambda1", self.content),
            ("lambda2", self.attention),
            ("lambda3", self.style),
            ("lambda4", self.patch_style),
            ("lambda5", self.identity),
            ("lambda_id1", self.identity_pixel),
            ("lambda_id2", self.identity_feature),
        ];
        for (name, w) in named {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be finite and non-negative, got {w}"
                )));
            }
        }
        check_tau(self.tau)
    }
}

/// Unweighted loss values.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossComponents {
    pub content: f64,
    pub attention: f64,
    pub style: f64,
    pub patch_style: f64,
    pub identity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossReport {
    pub l_c: f64,
    pub l_ac: f64,
    pub l_s: f64,
    pub l_ps: f64,
    pub l_identity: f64,
    pub total: f64,
    pub weights: LossWeights,
}

fn shape_check(a: &FeatureMap, b: &FeatureMap, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::dim(format!(
            "{what}: shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

fn euclid(diffs: impl Iterator<Item = f64>) -> f64 {
    diffs.map(|d| d * d).sum::<f64>().sqrt()
}

/// `‖a − b‖₂` over all elements.
pub fn l2_distance(a: &FeatureMap, b: &FeatureMap) -> Result<f64> {
    shape_check(a, b, "l2 distance")?;
    Ok(euclid(
        a.data()
            .iter()
            .zip(b.data())
            .map(|(&x, &y)| x as f64 - y as f64),
    ))
}

fn layer_pair<'a>(
    a: &'a LayerFeatures,
    b: &'a LayerFeatures,
    layer: VggLayer,
) -> Result<(&'a FeatureMap, &'a FeatureMap)> {
    Ok((a.require(layer)?, b.require(layer)?))
}

/// Sum over `layers` of the feature distance between content and stylized.
pub fn content_loss(
    content: &LayerFeatures,
    stylized: &LayerFeatures,
    layers: &[VggLayer],
) -> Result<f64> {
    layers.iter().try_fold(0.0, |acc, &layer| {
        let (a, b) = layer_pair(content, stylized, layer)?;
        l2_distance(a, b)
            .map(|d| acc + d)
            .map_err(|e| prefix(e, layer))
    })
}

/// Sum over `layers` of the Frobenius distance between attention maps.
pub fn attention_content_loss(
    content: &LayerFeatures,
    stylized: &LayerFeatures,
    tau: f64,
    layers: &[VggLayer],
) -> Result<f64> {
    check_tau(tau)?;
    layers.iter().try_fold(0.0, |acc, &layer| {
        let (a, b) = layer_pair(content, stylized, layer)?;
        shape_check(a, b, layer.name())?;
        let pa = attention_probs(a, tau, DEFAULT_EPSILON)?;
        let pb = attention_probs(b, tau, DEFAULT_EPSILON)?;
        Ok(acc + euclid(pa.iter().zip(&pb).map(|(x, y)| x - y)))
    })
}

fn stats_gap(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mean_gap = euclid(a.iter().zip(b).map(|(x, y)| x.0 - y.0));
    let std_gap = euclid(a.iter().zip(b).map(|(x, y)| x.1.sqrt() - y.1.sqrt()));
    mean_gap + std_gap
}

fn map_moments(f: &FeatureMap) -> Vec<(f64, f64)> {
    (0..f.channels()).map(|c| moments(f.channel(c))).collect()
}

fn patch_moments(patch: &[f32], channels: usize) -> Vec<(f64, f64)> {
    patch
        .chunks_exact(patch.len() / channels)
        .map(moments)
        .collect()
}

/// Sum over `layers` of `‖μ_s − μ_cs‖₂ + ‖σ_s − σ_cs‖₂` on channel vectors.
pub fn style_loss(
    style: &LayerFeatures,
    stylized: &LayerFeatures,
    layers: &[VggLayer],
) -> Result<f64> {
    layers.iter().try_fold(0.0, |acc, &layer| {
        let (s, cs) = layer_pair(style, stylized, layer)?;
        if s.channels() != cs.channels() {
            return Err(Error::dim(format!(
                "{layer}: {} style channels vs {} stylized channels",
                s.channels(),
                cs.channels()
            )));
        }
        Ok(acc + stats_gap(&map_moments(s), &map_moments(cs)))
    })
}

/// Statistics distance between each stylized patch and its nearest style patch.
pub fn patch_style_loss(
    stylized: &FeatureMap,
    style: &FeatureMap,
    cfg: &TssatConfig,
) -> Result<f64> {
    cfg.validate()?;
    if stylized.channels() != style.channels() {
        return Err(Error::dim(format!(
            "{} stylized channels vs {} style channels",
            stylized.channels(),
            style.channels()
        )));
    }
    let ours = extract_patches(stylized, cfg.patch_size, cfg.content_stride)?;
    let theirs = extract_patches(style, cfg.patch_size, cfg.style_stride)?;
    let matched = match_patches(&ours, &theirs, cfg.matcher)?;
    let c = stylized.channels();
    let mut a = vec![0.0f32; ours.patch_len()];
    let mut b = vec![0.0f32; ours.patch_len()];
    let mut total = 0.0;
    for (i, &j) in matched.assignment.iter().enumerate() {
        ours.copy_patch(i, &mut a);
        theirs.copy_patch(j, &mut b);
        total += stats_gap(&patch_moments(&a, c), &patch_moments(&b, c));
    }
    Ok(total)
}

/// Inputs to the identity loss: both images, their same-image
/// reconstructions, and the features of all four.
#[derive(Debug, Clone, Copy)]
pub struct IdentityInputs<'a> {
    pub content_image: &'a FeatureMap,
    pub content_recon: &'a FeatureMap,
    pub style_image: &'a FeatureMap,
    pub style_recon: &'a FeatureMap,
    pub content_features: &'a LayerFeatures,
    pub content_recon_features: &'a LayerFeatures,
    pub style_features: &'a LayerFeatures,
    pub style_recon_features: &'a LayerFeatures,
}

/// Pixel and feature reconstruction penalty over `layers`.
pub fn identity_loss(
    inputs: &IdentityInputs<'_>,
    weights: &LossWeights,
    layers: &[VggLayer],
) -> Result<f64> {
    let pixel = l2_distance(inputs.content_image, inputs.content_recon)?
        + l2_distance(inputs.style_image, inputs.style_recon)?;
    let feature = content_loss(
        inputs.content_features,
        inputs.content_recon_features,
        layers,
    )? + content_loss(inputs.style_features, inputs.style_recon_features, layers)?;
    Ok(weights.identity_pixel * pixel + weights.identity_feature * feature)
}

/// Weighted total of the five components.
pub fn total_loss(components: &LossComponents, weights: &LossWeights) -> Result<LossReport> {
    weights.validate()?;
    let c = components;
    let named = [
        ("l_c", c.content),
        ("l_ac", c.attention),
        ("l_s", c.style),
        ("l_ps", c.patch_style),
        ("l_identity", c.identity),
    ];
    for (name, v) in named {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "loss component {name} must be finite and non-negative, got {v}"
            )));
        }
    }
    let w = weights;
    let total = w.content * c.content
        + w.attention * c.attention
        + w.style * c.style
        + w.patch_style * c.patch_style
        + w.identity * c.identity;
    Ok(LossReport {
        l_c: c.content,
        l_ac: c.attention,
        l_s: c.style,
        l_ps: c.patch_style,
        l_identity: c.identity,
        total,
        weights: *weights,
    })
}

fn prefix(e: Error, layer: VggLayer) -> Error {
    match e {
        Error::Dimension(m) => Error::Dimension(format!("{layer}: {m}")),
        other => other,
    }
}
