use super::SegmentationError;
use crate::raster::{BinaryMask, ImageRaster, ProbabilityMap};

pub const DEFAULT_OVERLAY_COLOR: [u8; 3] = [255, 0, 0];
pub const DEFAULT_OVERLAY_ALPHA: f64 = 0.5;

/// Pixel is positive iff `p >= threshold`.
pub fn binarize(pm: &ProbabilityMap, threshold: f32) -> Result<BinaryMask, SegmentationError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(SegmentationError::InvalidThreshold(threshold));
    }
    let bits = pm.values().iter().map(|&p| p >= threshold).collect();
    Ok(BinaryMask::new(pm.width(), pm.height(), bits)?)
}

/// Blend `color` into masked pixels: `round((1 - alpha) * pixel + alpha * color)`.
/// Output is 8-bit RGB; unmasked pixels keep their (8-bit) value.
pub fn overlay(
    img: &ImageRaster,
    mask: &BinaryMask,
    color: [u8; 3],
    alpha: f64,
) -> Result<ImageRaster, SegmentationError> {
    if img.width() != mask.width() || img.height() != mask.height() {
        return Err(SegmentationError::ShapeMismatch(format!(
            "image {}x{} vs mask {}x{}",
            img.width(),
            img.height(),
            mask.width(),
            mask.height()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(SegmentationError::ShapeMismatch(format!("alpha {alpha} outside [0, 1]")));
    }
    let src = img.to_u8();
    let raw = src.as_u8().expect("8-bit copy");
    let c = src.channels();
    let grey = src.color_channels() < 3;
    let mut out = Vec::with_capacity(img.width() * img.height() * 3);
    for (p, &hit) in mask.bits().iter().enumerate() {
        let px = &raw[p * c..p * c + c];
        let rgb = if grey { [px[0]; 3] } else { [px[0], px[1], px[2]] };
        for k in 0..3 {
            let v = if hit {
                ((1.0 - alpha) * rgb[k] as f64 + alpha * color[k] as f64).round() as u8
            } else {
                rgb[k]
            };
            out.push(v);
        }
    }
    Ok(ImageRaster::from_u8(img.width(), img.height(), 3, out)?)
}
