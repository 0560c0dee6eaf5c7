//! Wall-clock timing of the full transform across patch sizes.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::tensor::FeatureMap;
use crate::transform::{tssat, TssatConfig};

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub patch_size: usize,
    /// One entry per timed repeat; the warm-up run is not included.
    pub timings: Vec<Duration>,
    /// Hash of the output bits of the first timed run.
    pub digest: u64,
    /// Whether every repeat produced bit-identical output.
    pub deterministic: bool,
}

impl BenchRow {
    pub fn median(&self) -> Duration {
        median(&self.timings)
    }

    pub fn min(&self) -> Duration {
        self.timings.iter().copied().min().unwrap_or_default()
    }

    pub fn max(&self) -> Duration {
        self.timings.iter().copied().max().unwrap_or_default()
    }
}

pub fn median(samples: &[Duration]) -> Duration {
    let mut s = samples.to_vec();
    s.sort();
    match s.len() {
        0 => Duration::ZERO,
        n if n % 2 == 1 => s[n / 2],
        n => (s[n / 2 - 1] + s[n / 2]) / 2,
    }
}

fn digest(f: &FeatureMap) -> u64 {
    let mut h = DefaultHasher::new();
    f.shape().hash(&mut h);
    for v in f.data() {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Times `tssat` for each patch size in `sizes`, `repeat` times each after
/// one untimed warm-up. `base` supplies everything except the patch size;
/// `content_stride` of `None` means "equal to the patch size".
pub fn run(
    content: &FeatureMap,
    style: &FeatureMap,
    base: &TssatConfig,
    content_stride: Option<usize>,
    sizes: &[usize],
    repeat: usize,
) -> Result<Vec<BenchRow>> {
    if repeat == 0 {
        return Err(Error::InvalidArgument("repeat count must be >= 1".into()));
    }
    if sizes.is_empty() {
        return Err(Error::InvalidArgument("no patch sizes given".into()));
    }
    sizes
        .iter()
        .map(|&k| {
            let cfg = TssatConfig {
                patch_size: k,
                content_stride: content_stride.unwrap_or(k),
                ..*base
            };
            let (warm, _) = tssat(content, style, &cfg)?;
            let expected = digest(&warm);
            let mut timings = Vec::with_capacity(repeat);
            let mut deterministic = true;
            for _ in 0..repeat {
                let start = Instant::now();
                let (out, _) = tssat(content, style, &cfg)?;
                timings.push(start.elapsed());
                deterministic &= digest(&out) == expected;
            }
            Ok(BenchRow {
                patch_size: k,
                timings,
                digest: expected,
                deterministic,
            })
        })
        .collect()
}

/// Tab-separated table with a header line.
pub fn format_table(rows: &[BenchRow]) -> String {
    let mut out = String::from("k\tmedian_seconds\tmin\tmax\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{:.6}\t{:.6}\t{:.6}\n",
            r.patch_size,
            r.median().as_secs_f64(),
            r.min().as_secs_f64(),
            r.max().as_secs_f64()
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even() {
        let ms = |v: &[u64]| {
            v.iter()
                .map(|&x| Duration::from_millis(x))
                .collect::<Vec<_>>()
        };
        assert_eq!(median(&ms(&[5, 1, 3])), Duration::from_millis(3));
        assert_eq!(median(&ms(&[4, 1, 3, 2])), Duration::from_micros(2500));
        assert_eq!(median(&[]), Duration::ZERO);
    }

    #[test]
    fn single_repeat_table() {
        let c = FeatureMap::random_normal(4, 12, 12, 1).unwrap();
        let s = FeatureMap::random_normal(4, 12, 12, 2).unwrap();
        let rows = run(&c, &s, &TssatConfig::default(), None, &[3, 5], 1).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.timings.len() == 1 && r.deterministic));
        let table = format_table(&rows);
        let lines: Vec<_> = table.lines().collect();
        assert_eq!(lines[0], "k\tmedian_seconds\tmin\tmax");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("3\t"));
        assert_eq!(lines[2].split('\t').count(), 4);
        assert!(run(&c, &s, &TssatConfig::default(), None, &[3], 0).is_err());
    }
}
