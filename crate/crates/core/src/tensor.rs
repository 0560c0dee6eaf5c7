//! Dense `C×H×W` feature maps and per-channel statistics.
//!
//! Storage is `f32`, channel-major then row then column. Reductions
//! accumulate in `f64` and round once on output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Stabilizer added to the variance before taking the square root.
pub const DEFAULT_EPSILON: f32 = 1e-5;

/// A single image's activations at one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    /// Wraps `data` as a `channels×height×width` map.
    ///
    /// Fails on a zero extent, a length mismatch or any NaN/Inf value.
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::dim(format!(
                "feature map extents must be positive, got {channels}x{height}x{width}"
            )));
        }
        let expected = channels
            .checked_mul(height)
            .and_then(|n| n.checked_mul(width))
            .ok_or_else(|| Error::dim("feature map size overflows usize"))?;
        if data.len() != expected {
            return Err(Error::dim(format!(
                "data length {} does not match {channels}x{height}x{width} = {expected}",
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Result<Self> {
        Self::new(
            channels,
            height,
            width,
            vec![0.0; channels * height * width],
        )
    }

    /// Builds a map by evaluating `f(channel, row, col)` at every position.
    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self::new(channels, height, width, data)
    }

    /// Standard-normal map from a seeded ChaCha8 stream. Deterministic across platforms.
    pub fn random_normal(channels: usize, height: usize, width: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = channels * height * width;
        let data = (0..n)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect::<Vec<f32>>();
        Self::new(channels, height, width, data)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `[channels, height, width]`.
    pub fn shape(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }

    pub fn spatial_len(&self) -> usize {
        self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.spatial_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// Applies `f(channel, value)` elementwise. The result is re-validated.
    pub fn map_channels(&self, mut f: impl FnMut(usize, f32) -> f32) -> Result<Self> {
        let n = self.spatial_len();
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(i, &v)| f(i / n, v))
            .collect();
        Self::new(self.channels, self.height, self.width, data)
    }

    pub(crate) fn from_parts_unchecked(shape: [usize; 3], data: Vec<f32>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self {
            channels: shape[0],
            height: shape[1],
            width: shape[2],
            data,
        }
    }
}

/// Per-channel mean and standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

/// Two-pass mean and population variance of `values`, accumulated in `f64`.
pub(crate) fn moments(values: &[f32]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = values
        .iter()
        .map(|&v| {
            let d = v as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    (mean, var)
}

/// Mean and `sqrt(var + epsilon)` for every channel, as `f64` pairs.
pub(crate) fn channel_moments(f: &FeatureMap, epsilon: f32) -> Vec<(f64, f64)> {
    (0..f.channels())
        .map(|c| {
            let (mean, var) = moments(f.channel(c));
            (mean, (var + epsilon as f64).sqrt())
        })
        .collect()
}

pub(crate) fn check_epsilon(epsilon: f32) -> Result<()> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be finite and non-negative, got {epsilon}"
        )));
    }
    Ok(())
}

/// Population mean and `sqrt(variance + epsilon)` per channel.
pub fn channel_stats(f: &FeatureMap, epsilon: f32) -> Result<ChannelStats> {
    check_epsilon(epsilon)?;
    let (mean, std) = channel_moments(f, epsilon)
        .into_iter()
        .map(|(m, s)| (m as f32, s as f32))
        .unzip();
    Ok(ChannelStats { mean, std })
}

/// Shifts every channel to zero mean and scales it to unit deviation.
///
/// A channel with zero variance is an error when `epsilon` is 0.
pub fn mvn_normalize(f: &FeatureMap, epsilon: f32) -> Result<FeatureMap> {
    check_epsilon(epsilon)?;
    let stats = channel_moments(f, epsilon);
    if let Some(channel) = stats.iter().position(|&(_, s)| s == 0.0) {
        return Err(Error::DegenerateChannel { channel });
    }
    f.map_channels(|c, v| {
        let (mean, std) = stats[c];
        ((v as f64 - mean) / std) as f32
    })
}
