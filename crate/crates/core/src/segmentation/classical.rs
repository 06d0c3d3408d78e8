//! Normalized-difference water index with Otsu thresholding.

use serde::{Deserialize, Serialize};

use super::SegmentationError;
use crate::raster::{ImageRaster, ProbabilityMap};

pub const HISTOGRAM_BINS: usize = 256;

/// `(a - b) / (a + b)` per pixel, rescaled from `[-1, 1]` to `[0, 1]`.
/// Pixels with `a + b = 0` map to 0.5.
pub fn water_index(
    img: &ImageRaster,
    band_a: usize,
    band_b: usize,
) -> Result<ProbabilityMap, SegmentationError> {
    for band in [band_a, band_b] {
        if band >= img.color_channels() {
            return Err(SegmentationError::BadChannel {
                channel: band,
                available: img.color_channels(),
            });
        }
    }
    let (w, h) = (img.width(), img.height());
    let mut values = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let a = img.get_unit(y, x, band_a) as f64;
            let b = img.get_unit(y, x, band_b) as f64;
            let s = a + b;
            let v = if s == 0.0 {
                0.5
            } else {
                (((a - b) / s + 1.0) * 0.5).clamp(0.0, 1.0)
            };
            values.push(v as f32);
        }
    }
    Ok(ProbabilityMap::new(w, h, values)?)
}

/// Histogram bin of a probability: `min(floor(p * 256), 255)`.
pub fn bin_of(p: f32) -> usize {
    ((p * HISTOGRAM_BINS as f32) as usize).min(HISTOGRAM_BINS - 1)
}

pub fn histogram(pm: &ProbabilityMap) -> [u64; HISTOGRAM_BINS] {
    let mut hist = [0u64; HISTOGRAM_BINS];
    for &p in pm.values() {
        hist[bin_of(p)] += 1;
    }
    hist
}

/// Between-class variance `w0 * w1 * (mu0 - mu1)^2` for the split
/// `{bins < t}` vs `{bins >= t}`, from class counts and bin-index sums.
/// Zero when either class is empty.
pub fn between_class_variance(n0: u64, s0: u64, n1: u64, s1: u64) -> f64 {
    if n0 == 0 || n1 == 0 {
        return 0.0;
    }
    let n = (n0 + n1) as f64;
    let w0 = n0 as f64 / n;
    let w1 = n1 as f64 / n;
    let mu0 = s0 as f64 / n0 as f64;
    let mu1 = s1 as f64 / n1 as f64;
    w0 * w1 * (mu0 - mu1) * (mu0 - mu1)
}

/// Otsu's split point `t* in 1..=255`: the class boundary maximising
/// between-class variance, smallest `t` on ties.
pub fn otsu_threshold(hist: &[u64; HISTOGRAM_BINS]) -> Result<usize, SegmentationError> {
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return Err(SegmentationError::EmptyHistogram);
    }
    let total_sum: u64 = hist.iter().enumerate().map(|(i, c)| i as u64 * c).sum();
    let (mut n0, mut s0) = (0u64, 0u64);
    let mut best_t = 1;
    let mut best = f64::NEG_INFINITY;
    for t in 1..HISTOGRAM_BINS {
        n0 += hist[t - 1];
        s0 += (t as u64 - 1) * hist[t - 1];
        let var = between_class_variance(n0, s0, total - n0, total_sum - s0);
        if var > best {
            best = var;
            best_t = t;
        }
    }
    Ok(best_t)
}

/// Classical baseline: water index followed by an Otsu cut.
///
/// The index map is remapped piecewise-linearly so that the Otsu cut value
/// lands exactly on 0.5; binarizing the output at 0.5 reproduces the Otsu
/// segmentation and other thresholds still order pixels by index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassicalIndex {
    pub band_a: usize,
    pub band_b: usize,
}

impl Default for ClassicalIndex {
    /// `(G, R)` for true-colour input, where no SWIR band exists.
    fn default() -> Self {
        ClassicalIndex { band_a: 1, band_b: 0 }
    }
}

impl ClassicalIndex {
    pub fn predict(&self, img: &ImageRaster) -> Result<ProbabilityMap, SegmentationError> {
        let index = water_index(img, self.band_a, self.band_b)?;
        let cut = otsu_threshold(&histogram(&index))? as f32 / HISTOGRAM_BINS as f32;
        Ok(recenter(&index, cut))
    }
}

const JUST_BELOW_HALF: f32 = 0.499_999_97;

/// Map `[0, cut) -> [0, 0.5)` and `[cut, 1] -> [0.5, 1]`, both linearly.
pub fn recenter(pm: &ProbabilityMap, cut: f32) -> ProbabilityMap {
    debug_assert!(cut > 0.0 && cut < 1.0);
    let cut64 = cut as f64;
    let values = pm
        .values()
        .iter()
        .map(|&p| {
            if p < cut {
                ((0.5 * p as f64 / cut64) as f32).min(JUST_BELOW_HALF)
            } else {
                ((0.5 + 0.5 * (p as f64 - cut64) / (1.0 - cut64)) as f32).clamp(0.5, 1.0)
            }
        })
        .collect();
    ProbabilityMap::new(pm.width(), pm.height(), values).expect("remap stays in [0, 1]")
}
