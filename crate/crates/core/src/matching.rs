//! Nearest style patch for every content patch.
//!
//! Similarity is the inner product of the raw content patch with the
//! L2-normalized style patch; for a fixed content patch this orders style
//! patches exactly like cosine similarity. Ties go to the smallest style
//! index. A zero-norm style patch scores `-inf`.
//!
//! Both matchers make their final decision with the same `f64` scoring
//! routine, so they agree exactly. The GEMM matcher only uses its `f32`
//! product to discard candidates that provably cannot win.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patch::PatchSet;

/// Depth of each partial `f32` product. Bounds the rounding error of a
/// single partial sum independently of how the GEMM kernel orders it.
const GEMM_DEPTH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Matcher {
    /// Double loop over all content/style pairs.
    Naive,
    /// One blocked matrix product of content patches against the style bank.
    #[default]
    Gemm,
}

impl fmt::Display for Matcher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Matcher::Naive => "naive",
            Matcher::Gemm => "gemm",
        })
    }
}

impl FromStr for Matcher {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(Matcher::Naive),
            "gemm" => Ok(Matcher::Gemm),
            other => Err(Error::InvalidArgument(format!(
                "unknown matcher {other:?} (expected naive or gemm)"
            ))),
        }
    }
}

/// For each content patch, the chosen style patch and their cosine similarity.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchAssignment {
    pub style_count: usize,
    pub assignment: Vec<usize>,
    pub score: Vec<f32>,
}

impl MatchAssignment {
    pub fn content_count(&self) -> usize {
        self.assignment.len()
    }
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

fn norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}

fn normalized_score(dot: f64, style_norm: f64) -> f64 {
    if style_norm > 0.0 {
        dot / style_norm
    } else {
        f64::NEG_INFINITY
    }
}

fn cosine(dot: f64, content_norm: f64, style_norm: f64) -> f32 {
    if content_norm > 0.0 && style_norm > 0.0 {
        (dot / (content_norm * style_norm)).clamp(-1.0, 1.0) as f32
    } else {
        0.0
    }
}

fn check_compatible(content: &PatchSet<'_>, style: &PatchSet<'_>) -> Result<()> {
    if style.is_empty() {
        return Err(Error::EmptyPatchSet);
    }
    if content.channels() != style.channels() || content.patch_size() != style.patch_size() {
        return Err(Error::dim(format!(
            "content patches are {}x{}x{}, style patches are {}x{}x{}",
            content.channels(),
            content.patch_size(),
            content.patch_size(),
            style.channels(),
            style.patch_size(),
            style.patch_size()
        )));
    }
    Ok(())
}

/// Assigns every content patch its best style patch.
pub fn match_patches(
    content: &PatchSet<'_>,
    style: &PatchSet<'_>,
    matcher: Matcher,
) -> Result<MatchAssignment> {
    check_compatible(content, style)?;
    match matcher {
        Matcher::Naive => Ok(match_naive(content, style)),
        Matcher::Gemm => Ok(match_gemm(content, style)),
    }
}

/// Picks the first maximal `(index, score)` from `candidates`, which must be
/// in increasing index order.
fn first_max(candidates: impl Iterator<Item = (usize, f64)>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    let mut seen = false;
    for (j, s) in candidates {
        if !seen || s > best.1 {
            best = (j, s);
            seen = true;
        }
    }
    best
}

fn match_naive(content: &PatchSet<'_>, style: &PatchSet<'_>) -> MatchAssignment {
    let style_norms = style.norms();
    let styles = style.to_matrix();
    let d = style.patch_len();
    let mut cbuf = vec![0.0f32; d];
    let mut assignment = Vec::with_capacity(content.len());
    let mut score = Vec::with_capacity(content.len());
    for i in 0..content.len() {
        content.copy_patch(i, &mut cbuf);
        let (j, _) = first_max(
            styles
                .chunks_exact(d)
                .enumerate()
                .map(|(j, s)| (j, normalized_score(dot(&cbuf, s), style_norms[j]))),
        );
        let s = &styles[j * d..(j + 1) * d];
        assignment.push(j);
        score.push(cosine(dot(&cbuf, s), norm(&cbuf), style_norms[j]));
    }
    MatchAssignment {
        style_count: style.len(),
        assignment,
        score,
    }
}

fn match_gemm(content: &PatchSet<'_>, style: &PatchSet<'_>) -> MatchAssignment {
    let d = content.patch_len();
    let (ng, ns) = (content.len(), style.len());
    let style_norms = style.norms();
    let lhs = content.to_matrix();

    // Partial products of depth <= GEMM_DEPTH, summed in f64.
    let mut acc = vec![0.0f64; ng * ns];
    let mut partial = vec![0.0f32; ng * ns];
    let mut bank = vec![0.0f32; GEMM_DEPTH.min(d) * ns];
    let mut offset = 0;
    while offset < d {
        let depth = GEMM_DEPTH.min(d - offset);
        style.fill_transposed(offset, depth, &mut bank);
        // SAFETY: lhs is ng x d row-major and we read columns
        // [offset, offset + depth); bank is depth x ns row-major; partial is
        // ng x ns row-major. All pointers are valid for the given strides.
        unsafe {
            matrixmultiply::sgemm(
                ng,
                depth,
                ns,
                1.0,
                lhs.as_ptr().add(offset),
                d as isize,
                1,
                bank.as_ptr(),
                ns as isize,
                1,
                0.0,
                partial.as_mut_ptr(),
                ns as isize,
                1,
            );
        }
        for (a, &p) in acc.iter_mut().zip(&partial) {
            *a += p as f64;
        }
        offset += depth;
    }

    // |partial error| <= gamma(depth + 1) * sum |c_t f_t| <= that * |c| |f|, per
    // partial product; the partials partition the sum so one factor covers all.
    let unit = f32::EPSILON as f64 / 2.0;
    let depth = GEMM_DEPTH.min(d) as f64 + 2.0;
    let gamma = depth * unit / (1.0 - depth * unit);
    let slack = 1.0e-10;

    let mut cbuf = vec![0.0f32; d];
    let mut sbuf = vec![0.0f32; d];
    let mut assignment = Vec::with_capacity(ng);
    let mut score = Vec::with_capacity(ng);
    for i in 0..ng {
        let row = &acc[i * ns..(i + 1) * ns];
        let cpatch = &lhs[i * d..(i + 1) * d];
        let cnorm = norm(cpatch);
        let approx = |j: usize| normalized_score(row[j], style_norms[j]);
        let top = (0..ns).map(approx).fold(f64::NEG_INFINITY, f64::max);
        let bound = (gamma * 1.01 + slack) * cnorm + 1e-30;
        let threshold = top - 2.0 * bound;
        cbuf.copy_from_slice(cpatch);
        let (j, _) = first_max((0..ns).filter(|&j| approx(j) >= threshold).map(|j| {
            style.copy_patch(j, &mut sbuf);
            (j, normalized_score(dot(&cbuf, &sbuf), style_norms[j]))
        }));
        style.copy_patch(j, &mut sbuf);
        assignment.push(j);
        score.push(cosine(dot(&cbuf, &sbuf), cnorm, style_norms[j]));
    }
    MatchAssignment {
        style_count: ns,
        assignment,
        score,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patch::extract_patches;
    use crate::tensor::FeatureMap;

    fn single_patches(c: usize, values: Vec<f32>) -> PatchSet<'static> {
        let n = values.len() / c;
        PatchSet::from_parts([c, 1, 1], 1, 1, vec![0], vec![0; n], values).unwrap()
    }

    // Content [1, 0] against style [2, 0] and [0, 3], as 2-channel 1x1 patches.
    #[test]
    fn orthogonal_alternatives() {
        let content = single_patches(2, vec![1.0, 0.0]);
        let style = single_patches(2, vec![2.0, 0.0, 0.0, 3.0]);
        for m in [Matcher::Naive, Matcher::Gemm] {
            let a = match_patches(&content, &style, m).unwrap();
            assert_eq!(a.assignment, vec![0]);
            assert_eq!(a.score, vec![1.0]);
        }
    }

    #[test]
    fn self_match_on_distinct_patches() {
        let f = FeatureMap::random_normal(3, 6, 6, 2).unwrap();
        let p = extract_patches(&f, 2, 1).unwrap();
        for m in [Matcher::Naive, Matcher::Gemm] {
            let a = match_patches(&p, &p, m).unwrap();
            assert_eq!(a.assignment, (0..p.len()).collect::<Vec<_>>());
            assert!(a.score.iter().all(|&s| (s - 1.0).abs() < 1e-6));
        }
    }

    #[test]
    fn ties_pick_first_index() {
        let content = single_patches(2, vec![1.0, 1.0]);
        let style = single_patches(2, vec![0.0, 1.0, 1.0, 2.0, 1.0, 2.0, 2.0, 4.0]);
        for m in [Matcher::Naive, Matcher::Gemm] {
            assert_eq!(
                match_patches(&content, &style, m).unwrap().assignment,
                vec![1]
            );
        }
    }

    #[test]
    fn zero_norm_patches() {
        // zero content: every style patch scores 0, first wins
        let content = single_patches(2, vec![0.0, 0.0]);
        let style = single_patches(2, vec![1.0, 0.0, 0.0, 1.0]);
        // zero style patches never win against a finite score
        let content2 = single_patches(2, vec![-1.0, -1.0]);
        let style2 = single_patches(2, vec![0.0, 0.0, 1.0, 1.0]);
        for m in [Matcher::Naive, Matcher::Gemm] {
            let a = match_patches(&content, &style, m).unwrap();
            assert_eq!(a.assignment, vec![0]);
            assert_eq!(a.score, vec![0.0]);
            let b = match_patches(&content2, &style2, m).unwrap();
            assert_eq!(b.assignment, vec![1]);
            assert!((b.score[0] + 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn empty_style_and_mismatch() {
        let content = single_patches(2, vec![1.0, 0.0]);
        let empty = PatchSet::from_parts([2, 1, 1], 1, 1, vec![0], vec![], vec![]).unwrap();
        assert!(matches!(
            match_patches(&content, &empty, Matcher::Gemm),
            Err(Error::EmptyPatchSet)
        ));
        let other = single_patches(3, vec![1.0, 0.0, 0.0]);
        assert!(matches!(
            match_patches(&content, &other, Matcher::Naive),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn deep_patches_agree() {
        // depth > GEMM_DEPTH exercises the partial-product path
        let c = FeatureMap::random_normal(40, 8, 8, 21).unwrap();
        let s = FeatureMap::random_normal(40, 9, 9, 22).unwrap();
        let cp = extract_patches(&c, 3, 3).unwrap();
        let sp = extract_patches(&s, 3, 1).unwrap();
        let a = match_patches(&cp, &sp, Matcher::Naive).unwrap();
        let b = match_patches(&cp, &sp, Matcher::Gemm).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn matcher_parses() {
        assert_eq!("naive".parse::<Matcher>().unwrap(), Matcher::Naive);
        assert_eq!("gemm".parse::<Matcher>().unwrap(), Matcher::Gemm);
        assert!("fft".parse::<Matcher>().is_err());
        assert_eq!(Matcher::default().to_string(), "gemm");
    }
}
