//! Named VGG-19 activation layers and per-image feature lists.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tensor::FeatureMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VggLayer {
    Relu1_1,
    Relu2_1,
    Relu3_1,
    Relu4_1,
    Relu5_1,
}

impl VggLayer {
    /// All layers in canonical order.
    pub const ALL: [VggLayer; 5] = [
        VggLayer::Relu1_1,
        VggLayer::Relu2_1,
        VggLayer::Relu3_1,
        VggLayer::Relu4_1,
        VggLayer::Relu5_1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VggLayer::Relu1_1 => "relu1_1",
            VggLayer::Relu2_1 => "relu2_1",
            VggLayer::Relu3_1 => "relu3_1",
            VggLayer::Relu4_1 => "relu4_1",
            VggLayer::Relu5_1 => "relu5_1",
        }
    }
}

impl fmt::Display for VggLayer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VggLayer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VggLayer::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown layer name {s:?}")))
    }
}

/// Layers compared by the content and attention losses.
pub const CONTENT_LAYERS: [VggLayer; 2] = [VggLayer::Relu4_1, VggLayer::Relu5_1];

/// Layers compared by the style and identity losses.
pub const STYLE_LAYERS: [VggLayer; 5] = VggLayer::ALL;

/// One image's feature maps, kept in canonical layer order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LayerFeatures {
    entries: Vec<(VggLayer, FeatureMap)>,
}

impl LayerFeatures {
    /// Fails on a repeated layer. Input order does not matter.
    pub fn new(entries: impl IntoIterator<Item = (VggLayer, FeatureMap)>) -> Result<Self> {
        let mut entries: Vec<_> = entries.into_iter().collect();
        entries.sort_by_key(|(l, _)| *l);
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidArgument(format!(
                "duplicate layer {}",
                w[0].0
            )));
        }
        Ok(Self { entries })
    }

    pub fn get(&self, layer: VggLayer) -> Option<&FeatureMap> {
        self.entries
            .iter()
            .find(|(l, _)| *l == layer)
            .map(|(_, f)| f)
    }

    pub fn require(&self, layer: VggLayer) -> Result<&FeatureMap> {
        self.get(layer)
            .ok_or_else(|| Error::MissingLayer(layer.name().to_string()))
    }

    pub fn layers(&self) -> impl Iterator<Item = VggLayer> + '_ {
        self.entries.iter().map(|(l, _)| *l)
    }

    pub fn iter(&self) -> impl Iterator<Item = (VggLayer, &FeatureMap)> {
        self.entries.iter().map(|(l, f)| (*l, f))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
