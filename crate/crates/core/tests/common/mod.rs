//! Brute-force reference implementations for the integration tests.
//!
//! Everything here is written from the definitions with plain loops and f64
//! accumulation, and shares no code with the engine beyond the container
//! types.
#![allow(dead_code, clippy::needless_range_loop)]

use tssat::{FeatureMap, LayerFeatures, MatchAssignment, PatchSet, TssatConfig, VggLayer};

pub fn ramp_seed(base: u64, i: usize) -> u64 {
    base.wrapping_mul(1_000_003).wrapping_add(i as u64)
}

/// Per-channel population mean and standard deviation, epsilon 0.
pub fn naive_stats(f: &FeatureMap) -> (Vec<f64>, Vec<f64>) {
    let (c, h, w) = (f.channels(), f.height(), f.width());
    let mut means = Vec::with_capacity(c);
    let mut stds = Vec::with_capacity(c);
    for ch in 0..c {
        let mut sum = 0.0f64;
        for y in 0..h {
            for x in 0..w {
                sum += f.get(ch, y, x) as f64;
            }
        }
        let mean = sum / (h * w) as f64;
        let mut sq = 0.0f64;
        for y in 0..h {
            for x in 0..w {
                let d = f.get(ch, y, x) as f64 - mean;
                sq += d * d;
            }
        }
        means.push(mean);
        stds.push((sq / (h * w) as f64).sqrt());
    }
    (means, stds)
}

/// Mean and population standard deviation of a slice.
pub fn slice_stats(v: &[f32]) -> (f64, f64) {
    let n = v.len() as f64;
    let mut sum = 0.0;
    for &x in v {
        sum += x as f64;
    }
    let mean = sum / n;
    let mut sq = 0.0;
    for &x in v {
        sq += (x as f64 - mean) * (x as f64 - mean);
    }
    (mean, (sq / n).sqrt())
}

/// Flattened `C×k×k` patches on the valid raster grid.
pub fn loop_patches(f: &FeatureMap, k: usize, stride: usize) -> Vec<Vec<f32>> {
    let mut out = Vec::new();
    let mut y = 0;
    while y + k <= f.height() {
        let mut x = 0;
        while x + k <= f.width() {
            let mut p = Vec::with_capacity(f.channels() * k * k);
            for c in 0..f.channels() {
                for dy in 0..k {
                    for dx in 0..k {
                        p.push(f.get(c, y + dy, x + dx));
                    }
                }
            }
            out.push(p);
            x += stride;
        }
        y += stride;
    }
    out
}

/// Argmax of `dot(c, s) / |s|` with first-index ties and zero-norm style
/// patches excluded. Returns assignments and cosine scores.
pub fn naive_match_vecs(content: &[Vec<f32>], style: &[Vec<f32>]) -> (Vec<usize>, Vec<f64>) {
    let style_norms: Vec<f64> = style
        .iter()
        .map(|s| s.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt())
        .collect();
    let mut assignment = Vec::with_capacity(content.len());
    let mut scores = Vec::with_capacity(content.len());
    for c in content {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (j, s) in style.iter().enumerate() {
            if style_norms[j] == 0.0 {
                continue;
            }
            let mut dot = 0.0f64;
            for t in 0..c.len() {
                dot += c[t] as f64 * s[t] as f64;
            }
            let score = dot / style_norms[j];
            if score > best_score {
                best_score = score;
                best = j;
            }
        }
        let cn = c.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt();
        let cos = if cn == 0.0 || best_score == f64::NEG_INFINITY {
            0.0
        } else {
            best_score / cn
        };
        assignment.push(best);
        scores.push(cos);
    }
    (assignment, scores)
}

pub fn naive_match(content: &PatchSet<'_>, style: &PatchSet<'_>) -> MatchAssignment {
    let c: Vec<_> = (0..content.len()).map(|i| content.patch(i)).collect();
    let s: Vec<_> = (0..style.len()).map(|j| style.patch(j)).collect();
    let (assignment, scores) = naive_match_vecs(&c, &s);
    MatchAssignment {
        style_count: s.len(),
        assignment,
        score: scores.into_iter().map(|v| v as f32).collect(),
    }
}

/// Row-stochastic attention with the diagonal masked, via an explicit
/// max pass followed by an exponential-sum pass.
pub fn naive_attention(f: &FeatureMap, tau: f64, eps: f64) -> Vec<f64> {
    let (c, h, w) = (f.channels(), f.height(), f.width());
    let n = h * w;
    let (means, stds) = naive_stats(f);
    let mut normed = vec![vec![0.0f64; n]; c];
    for ch in 0..c {
        let sigma = (stds[ch] * stds[ch] + eps).sqrt();
        for y in 0..h {
            for x in 0..w {
                normed[ch][y * w + x] = (f.get(ch, y, x) as f64 - means[ch]) / sigma;
            }
        }
    }
    let mut out = vec![0.0f64; n * n];
    for i in 0..n {
        let mut logits = vec![f64::NEG_INFINITY; n];
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut s = 0.0;
            for row in &normed {
                s += row[i] * row[j];
            }
            logits[j] = s / tau;
        }
        let mut max = f64::NEG_INFINITY;
        for &l in &logits {
            if l > max {
                max = l;
            }
        }
        let mut total = 0.0;
        for j in 0..n {
            if j != i {
                total += (logits[j] - max).exp();
            }
        }
        for j in 0..n {
            if j != i {
                out[i * n + j] = (logits[j] - max).exp() / total;
            }
        }
    }
    out
}

fn euclid_maps(a: &FeatureMap, b: &FeatureMap) -> f64 {
    let mut sq = 0.0;
    for (x, y) in a.data().iter().zip(b.data()) {
        let d = *x as f64 - *y as f64;
        sq += d * d;
    }
    sq.sqrt()
}

fn get(f: &LayerFeatures, l: VggLayer) -> &FeatureMap {
    f.get(l).expect("layer present")
}

pub fn oracle_content_loss(a: &LayerFeatures, b: &LayerFeatures, layers: &[VggLayer]) -> f64 {
    layers
        .iter()
        .map(|&l| euclid_maps(get(a, l), get(b, l)))
        .sum()
}

pub fn oracle_attention_loss(
    a: &LayerFeatures,
    b: &LayerFeatures,
    tau: f64,
    layers: &[VggLayer],
) -> f64 {
    let mut total = 0.0;
    for &l in layers {
        let pa = naive_attention(get(a, l), tau, 1e-5);
        let pb = naive_attention(get(b, l), tau, 1e-5);
        let mut sq = 0.0;
        for (x, y) in pa.iter().zip(&pb) {
            sq += (x - y) * (x - y);
        }
        total += sq.sqrt();
    }
    total
}

fn gap(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut dm = 0.0;
    let mut ds = 0.0;
    for (x, y) in a.iter().zip(b) {
        dm += (x.0 - y.0) * (x.0 - y.0);
        ds += (x.1 - y.1) * (x.1 - y.1);
    }
    dm.sqrt() + ds.sqrt()
}

pub fn oracle_style_loss(s: &LayerFeatures, cs: &LayerFeatures, layers: &[VggLayer]) -> f64 {
    let mut total = 0.0;
    for &l in layers {
        let (ms, ss) = naive_stats(get(s, l));
        let (mc, sc) = naive_stats(get(cs, l));
        let a: Vec<_> = ms.into_iter().zip(ss).collect();
        let b: Vec<_> = mc.into_iter().zip(sc).collect();
        total += gap(&a, &b);
    }
    total
}

pub fn oracle_patch_style_loss(
    stylized: &FeatureMap,
    style: &FeatureMap,
    cfg: &TssatConfig,
) -> f64 {
    let k = cfg.patch_size;
    let ours = loop_patches(stylized, k, cfg.content_stride);
    let theirs = loop_patches(style, k, cfg.style_stride);
    let (assignment, _) = naive_match_vecs(&ours, &theirs);
    let per = k * k;
    let mut total = 0.0;
    for (i, &j) in assignment.iter().enumerate() {
        let a: Vec<_> = ours[i].chunks(per).map(slice_stats).collect();
        let b: Vec<_> = theirs[j].chunks(per).map(slice_stats).collect();
        total += gap(&a, &b);
    }
    total
}

#[allow(clippy::too_many_arguments)]
pub fn oracle_identity_loss(
    ic: &FeatureMap,
    icc: &FeatureMap,
    is: &FeatureMap,
    iss: &FeatureMap,
    fc: &LayerFeatures,
    fcc: &LayerFeatures,
    fs: &LayerFeatures,
    fss: &LayerFeatures,
    lambda_id1: f64,
    lambda_id2: f64,
    layers: &[VggLayer],
) -> f64 {
    let pixel = euclid_maps(ic, icc) + euclid_maps(is, iss);
    let feature = oracle_content_loss(fc, fcc, layers) + oracle_content_loss(fs, fss, layers);
    lambda_id1 * pixel + lambda_id2 * feature
}

pub fn rel_err(actual: f64, expected: f64) -> f64 {
    (actual - expected).abs() / expected.abs().max(f64::MIN_POSITIVE)
}

pub fn max_abs_diff(a: &[f32], b: &[f32]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 - y as f64).abs())
        .fold(0.0, f64::max)
}

/// Applies `a[c]·x + b[c]` channel-wise.
pub fn channel_affine(f: &FeatureMap, a: &[f32], b: &[f32]) -> FeatureMap {
    f.map_channels(|c, v| a[c] * v + b[c]).unwrap()
}

/// Random maps for every canonical layer with the given spatial sizes.
pub fn random_bundle(channels: &[usize], sizes: &[(usize, usize)], seed: u64) -> LayerFeatures {
    LayerFeatures::new(VggLayer::ALL.iter().enumerate().map(|(i, &l)| {
        let (h, w) = sizes[i];
        (
            l,
            FeatureMap::random_normal(channels[i], h, w, ramp_seed(seed, i)).unwrap(),
        )
    }))
    .unwrap()
}
