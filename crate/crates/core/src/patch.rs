//! `k×k` spatial patches spanning all channels.
//!
//! A patch is stored flattened as `C×k×k` (channel, row, column). Patch
//! origins always form a raster grid: `rows × cols`, row-major.

use crate::error::{Error, Result};
use crate::tensor::FeatureMap;

#[derive(Debug, Clone)]
enum Values<'a> {
    /// Patches are windows into the source map.
    View(&'a FeatureMap),
    /// Patches are stored back to back, `patch_len` values each.
    Owned(Vec<f32>),
}

/// An ordered set of equally sized patches taken from a `C×H×W` map.
#[derive(Debug, Clone)]
pub struct PatchSet<'a> {
    source_shape: [usize; 3],
    size: usize,
    stride: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    values: Values<'a>,
}

impl<'a> PatchSet<'a> {
    /// Builds a patch set with explicit values.
    ///
    /// `rows` and `cols` give the top-left origins of the raster grid;
    /// `values` holds `rows.len() * cols.len()` patches of `C×k×k` each.
    pub fn from_parts(
        source_shape: [usize; 3],
        size: usize,
        stride: usize,
        rows: Vec<usize>,
        cols: Vec<usize>,
        values: Vec<f32>,
    ) -> Result<PatchSet<'static>> {
        let [c, h, w] = source_shape;
        if size == 0 || stride == 0 || c == 0 {
            return Err(Error::InvalidArgument(
                "patch size, stride and channel count must be positive".into(),
            ));
        }
        if rows.iter().any(|&r| r + size > h) || cols.iter().any(|&x| x + size > w) {
            return Err(Error::dim(format!(
                "patch origin does not fit a {size}x{size} window inside {h}x{w}"
            )));
        }
        let expected = rows.len() * cols.len() * c * size * size;
        if values.len() != expected {
            return Err(Error::dim(format!(
                "expected {expected} patch values, got {}",
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(PatchSet {
            source_shape,
            size,
            stride,
            rows,
            cols,
            values: Values::Owned(values),
        })
    }

    /// Same geometry, new values (`len() * patch_len()` of them).
    pub fn with_values(&self, values: Vec<f32>) -> Result<PatchSet<'static>> {
        PatchSet::from_parts(
            self.source_shape,
            self.size,
            self.stride,
            self.rows.clone(),
            self.cols.clone(),
            values,
        )
    }

    pub fn len(&self) -> usize {
        self.rows.len() * self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn patch_size(&self) -> usize {
        self.size
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn channels(&self) -> usize {
        self.source_shape[0]
    }

    pub fn source_shape(&self) -> [usize; 3] {
        self.source_shape
    }

    /// Number of values in one flattened patch, `C·k²`.
    pub fn patch_len(&self) -> usize {
        self.channels() * self.size * self.size
    }

    /// Top-left `(row, col)` of patch `i`.
    pub fn origin(&self, i: usize) -> (usize, usize) {
        let n = self.cols.len();
        (self.rows[i / n], self.cols[i % n])
    }

    pub fn origins(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .flat_map(move |&r| self.cols.iter().map(move |&c| (r, c)))
    }

    /// Copies patch `i` into `out` (length `patch_len()`).
    pub fn copy_patch(&self, i: usize, out: &mut [f32]) {
        let d = self.patch_len();
        match &self.values {
            Values::Owned(v) => out.copy_from_slice(&v[i * d..(i + 1) * d]),
            Values::View(map) => {
                let (oy, ox) = self.origin(i);
                let k = self.size;
                let [c, h, w] = self.source_shape;
                let src = map.data();
                for ch in 0..c {
                    for dy in 0..k {
                        let start = (ch * h + oy + dy) * w + ox;
                        let dst = (ch * k + dy) * k;
                        out[dst..dst + k].copy_from_slice(&src[start..start + k]);
                    }
                }
            }
        }
    }

    pub fn patch(&self, i: usize) -> Vec<f32> {
        let mut out = vec![0.0; self.patch_len()];
        self.copy_patch(i, &mut out);
        out
    }

    /// All patches back to back, `len() × patch_len()` row-major.
    pub fn to_matrix(&self) -> Vec<f32> {
        if let Values::Owned(v) = &self.values {
            return v.clone();
        }
        let d = self.patch_len();
        let mut out = vec![0.0; self.len() * d];
        for (i, chunk) in out.chunks_exact_mut(d).enumerate() {
            self.copy_patch(i, chunk);
        }
        out
    }

    /// Writes the transposed slab `[offset, offset + depth)` of flattened
    /// patch coordinates: `out[t * len() + j] = patch_j[offset + t]`.
    pub(crate) fn fill_transposed(&self, offset: usize, depth: usize, out: &mut [f32]) {
        let n = self.len();
        debug_assert!(out.len() >= depth * n);
        let k = self.size;
        match &self.values {
            Values::Owned(v) => {
                let d = self.patch_len();
                for t in 0..depth {
                    let row = &mut out[t * n..(t + 1) * n];
                    for (j, slot) in row.iter_mut().enumerate() {
                        *slot = v[j * d + offset + t];
                    }
                }
            }
            Values::View(map) => {
                let [_, h, w] = self.source_shape;
                let src = map.data();
                let ncols = self.cols.len();
                let dense_cols = self.cols.windows(2).all(|p| p[1] == p[0] + 1);
                for t in 0..depth {
                    let flat = offset + t;
                    let (ch, dy, dx) = (flat / (k * k), (flat / k) % k, flat % k);
                    let row = &mut out[t * n..(t + 1) * n];
                    for (ri, &oy) in self.rows.iter().enumerate() {
                        let line = &src[(ch * h + oy + dy) * w..(ch * h + oy + dy + 1) * w];
                        let dst = &mut row[ri * ncols..(ri + 1) * ncols];
                        if dense_cols {
                            let x0 = self.cols[0] + dx;
                            dst.copy_from_slice(&line[x0..x0 + ncols]);
                        } else {
                            for (slot, &ox) in dst.iter_mut().zip(&self.cols) {
                                *slot = line[ox + dx];
                            }
                        }
                    }
                }
            }
        }
    }

    /// Euclidean norm of every patch, accumulated in `f64`.
    ///
    /// A patch of exact zeros has norm exactly 0.
    pub fn norms(&self) -> Vec<f64> {
        match &self.values {
            Values::Owned(v) => v
                .chunks_exact(self.patch_len())
                .map(|p| {
                    p.iter()
                        .map(|&x| (x as f64) * (x as f64))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect(),
            Values::View(map) => self.view_norms(map),
        }
    }

    // Separable window sums of squares: horizontal then vertical, per channel.
    fn view_norms(&self, map: &FeatureMap) -> Vec<f64> {
        let [c, h, w] = self.source_shape;
        let k = self.size;
        let ncols = self.cols.len();
        let mut sq = vec![0.0f64; self.len()];
        let mut horiz = vec![0.0f64; h * ncols];
        for ch in 0..c {
            let plane = map.channel(ch);
            for y in 0..h {
                let line = &plane[y * w..(y + 1) * w];
                for (ci, &ox) in self.cols.iter().enumerate() {
                    horiz[y * ncols + ci] = line[ox..ox + k]
                        .iter()
                        .map(|&x| (x as f64) * (x as f64))
                        .sum();
                }
            }
            for (ri, &oy) in self.rows.iter().enumerate() {
                for ci in 0..ncols {
                    let mut s = 0.0;
                    for dy in 0..k {
                        s += horiz[(oy + dy) * ncols + ci];
                    }
                    sq[ri * ncols + ci] += s;
                }
            }
        }
        sq.into_iter().map(f64::sqrt).collect()
    }
}

/// Extracts every `k×k` window whose origin lies on the `stride` grid and
/// fits entirely inside the map. No padding.
pub fn extract_patches(f: &FeatureMap, k: usize, stride: usize) -> Result<PatchSet<'_>> {
    if k == 0 || stride == 0 {
        return Err(Error::InvalidArgument(format!(
            "patch size and stride must be positive, got k={k}, stride={stride}"
        )));
    }
    let [_, h, w] = f.shape();
    if k > h || k > w {
        return Err(Error::dim(format!(
            "patch size {k} exceeds spatial extent {h}x{w}"
        )));
    }
    let rows = (0..=h - k).step_by(stride).collect();
    let cols = (0..=w - k).step_by(stride).collect();
    Ok(PatchSet {
        source_shape: f.shape(),
        size: k,
        stride,
        rows,
        cols,
        values: Values::View(f),
    })
}

/// Writes the patches back to their origins.
///
/// Positions covered by several patches get the mean of the overlapping
/// values; positions covered by none keep the `background` value.
pub fn recombine_patches(patches: &PatchSet<'_>, background: &FeatureMap) -> Result<FeatureMap> {
    if patches.is_empty() {
        return Err(Error::EmptyPatchSet);
    }
    if background.shape() != patches.source_shape {
        return Err(Error::dim(format!(
            "background shape {:?} differs from patch source shape {:?}",
            background.shape(),
            patches.source_shape
        )));
    }
    let [c, h, w] = patches.source_shape;
    let k = patches.size;
    let mut sum = vec![0.0f64; c * h * w];
    let mut count = vec![0u32; h * w];
    let mut buf = vec![0.0f32; patches.patch_len()];
    for (i, (oy, ox)) in patches.origins().enumerate() {
        patches.copy_patch(i, &mut buf);
        for dy in 0..k {
            for dx in 0..k {
                count[(oy + dy) * w + ox + dx] += 1;
            }
        }
        for ch in 0..c {
            for dy in 0..k {
                let base = (ch * h + oy + dy) * w + ox;
                let src = &buf[(ch * k + dy) * k..(ch * k + dy + 1) * k];
                for (acc, &v) in sum[base..base + k].iter_mut().zip(src) {
                    *acc += v as f64;
                }
            }
        }
    }
    let data = background
        .data()
        .iter()
        .enumerate()
        .map(|(idx, &bg)| match count[idx % (h * w)] {
            0 => bg,
            n => (sum[idx] / n as f64) as f32,
        })
        .collect();
    Ok(FeatureMap::from_parts_unchecked([c, h, w], data))
}
