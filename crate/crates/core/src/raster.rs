//! Pixel grids for the three pipeline stages: the scene raster, the per-pixel
//! water probability, and the thresholded mask.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("pixel buffer has {actual} samples, expected {expected} ({width}x{height}x{channels})")]
    BadLength {
        width: usize,
        height: usize,
        channels: usize,
        expected: usize,
        actual: usize,
    },
    #[error("raster dimensions must be non-zero, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("unsupported channel count {0} (expected 1 to 4)")]
    BadChannels(usize),
    #[error("normalized sample {0} outside [0, 1]")]
    SampleOutOfRange(f32),
    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f32),
    #[error("raster is already normalized")]
    AlreadyNormalized,
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("png decode failed: {0}")]
    Decode(#[from] image::ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Sample storage for an [`ImageRaster`]: raw 8-bit or normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Samples {
    U8(Vec<u8>),
    Normalized(Vec<f32>),
}

impl Samples {
    pub fn len(&self) -> usize {
        match self {
            Samples::U8(v) => v.len(),
            Samples::Normalized(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Row-major, channel-interleaved image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRaster {
    width: usize,
    height: usize,
    channels: usize,
    samples: Samples,
}

fn check_dims(width: usize, height: usize, channels: usize, len: usize) -> Result<(), RasterError> {
    if width == 0 || height == 0 {
        return Err(RasterError::EmptyDimensions { width, height });
    }
    if !(1..=4).contains(&channels) {
        return Err(RasterError::BadChannels(channels));
    }
    let expected = width * height * channels;
    if len != expected {
        return Err(RasterError::BadLength {
            width,
            height,
            channels,
            expected,
            actual: len,
        });
    }
    Ok(())
}

impl ImageRaster {
    pub fn from_u8(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<u8>,
    ) -> Result<Self, RasterError> {
        check_dims(width, height, channels, data.len())?;
        Ok(ImageRaster {
            width,
            height,
            channels,
            samples: Samples::U8(data),
        })
    }

    pub fn from_normalized(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f32>,
    ) -> Result<Self, RasterError> {
        check_dims(width, height, channels, data.len())?;
        if let Some(&bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(RasterError::SampleOutOfRange(bad));
        }
        Ok(ImageRaster {
            width,
            height,
            channels,
            samples: Samples::Normalized(data),
        })
    }

    /// Constant-colour RGB raster.
    pub fn filled_rgb(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self, RasterError> {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        ImageRaster::from_u8(width, height, 3, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> &Samples {
        &self.samples
    }

    pub fn is_normalized(&self) -> bool {
        matches!(self.samples, Samples::Normalized(_))
    }

    /// Sample at `(row, col, channel)` as a value in `[0, 1]`.
    pub fn get_unit(&self, row: usize, col: usize, ch: usize) -> f32 {
        let i = (row * self.width + col) * self.channels + ch;
        match &self.samples {
            Samples::U8(v) => v[i] as f32 / 255.0,
            Samples::Normalized(v) => v[i],
        }
    }

    /// 8-bit copy; normalized samples are scaled by 255 and rounded.
    pub fn to_u8(&self) -> ImageRaster {
        match &self.samples {
            Samples::U8(_) => self.clone(),
            Samples::Normalized(v) => ImageRaster {
                width: self.width,
                height: self.height,
                channels: self.channels,
                samples: Samples::U8(v.iter().map(|&s| (s * 255.0).round() as u8).collect()),
            },
        }
    }

    /// Borrow the 8-bit buffer, if this raster holds one.
    pub fn as_u8(&self) -> Option<&[u8]> {
        match &self.samples {
            Samples::U8(v) => Some(v),
            Samples::Normalized(_) => None,
        }
    }

    /// Number of colour (non-alpha) channels.
    pub fn color_channels(&self) -> usize {
        match self.channels {
            2 => 1,
            4 => 3,
            c => c,
        }
    }
}

/// Nearest-neighbour resample. Output pixel `(i, j)` copies source pixel
/// `(floor(i * src_h / dst_h), floor(j * src_w / dst_w))`.
pub fn nearest_resize(src: &ImageRaster, target_w: usize, target_h: usize) -> ImageRaster {
    assert!(target_w >= 1 && target_h >= 1, "target dimensions must be >= 1");
    let c = src.channels;
    let row_of = |i: usize| i * src.height / target_h;
    let col_of = |j: usize| j * src.width / target_w;
    fn gather<T: Copy>(
        v: &[T],
        src_w: usize,
        c: usize,
        tw: usize,
        th: usize,
        row_of: impl Fn(usize) -> usize,
        col_of: impl Fn(usize) -> usize,
    ) -> Vec<T> {
        let mut out = Vec::with_capacity(tw * th * c);
        for i in 0..th {
            let sr = row_of(i);
            for j in 0..tw {
                let base = (sr * src_w + col_of(j)) * c;
                out.extend_from_slice(&v[base..base + c]);
            }
        }
        out
    }
    let samples = match &src.samples {
        Samples::U8(v) => Samples::U8(gather(v, src.width, c, target_w, target_h, row_of, col_of)),
        Samples::Normalized(v) => {
            Samples::Normalized(gather(v, src.width, c, target_w, target_h, row_of, col_of))
        }
    };
    ImageRaster {
        width: target_w,
        height: target_h,
        channels: c,
        samples,
    }
}

/// Scale 8-bit samples to `[0, 1]` by dividing by 255.
pub fn normalize(src: &ImageRaster) -> Result<ImageRaster, RasterError> {
    match &src.samples {
        Samples::U8(v) => Ok(ImageRaster {
            width: src.width,
            height: src.height,
            channels: src.channels,
            samples: Samples::Normalized(v.iter().map(|&s| s as f32 / 255.0).collect()),
        }),
        Samples::Normalized(_) => Err(RasterError::AlreadyNormalized),
    }
}

/// Per-pixel water likelihood in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    width: usize,
    height: usize,
    values: Vec<f32>,
}

impl ProbabilityMap {
    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self, RasterError> {
        check_dims(width, height, 1, values.len())?;
        if let Some(&bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(RasterError::ProbabilityOutOfRange(bad));
        }
        Ok(ProbabilityMap {
            width,
            height,
            values,
        })
    }

    pub fn constant(width: usize, height: usize, p: f32) -> Result<Self, RasterError> {
        ProbabilityMap::new(width, height, vec![p; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.width + col]
    }
}

/// Thresholded map; `true` marks water/flood.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, RasterError> {
        check_dims(width, height, 1, bits.len())?;
        Ok(BinaryMask {
            width,
            height,
            bits,
        })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Result<Self, RasterError> {
        BinaryMask::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn count_positive(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Share of positive pixels.
    pub fn positive_fraction(&self) -> f64 {
        self.count_positive() as f64 / self.bits.len() as f64
    }

    /// `true` when every positive pixel of `self` is also positive in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.bits.len() == other.bits.len()
            && self.bits.iter().zip(&other.bits).all(|(a, b)| !a || *b)
    }

    /// Nearest-neighbour resample using the same index rule as [`nearest_resize`].
    pub fn resized(&self, target_w: usize, target_h: usize) -> BinaryMask {
        let mut bits = Vec::with_capacity(target_w * target_h);
        for i in 0..target_h {
            let sr = i * self.height / target_h;
            for j in 0..target_w {
                bits.push(self.bits[sr * self.width + j * self.width / target_w]);
            }
        }
        BinaryMask {
            width: target_w,
            height: target_h,
            bits,
        }
    }

    /// Grey raster with 255 for positive pixels and 0 elsewhere.
    pub fn to_raster(&self) -> ImageRaster {
        ImageRaster {
            width: self.width,
            height: self.height,
            channels: 1,
            samples: Samples::U8(self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect()),
        }
    }

    /// Mask positive wherever any colour channel of `raster` is non-zero.
    pub fn from_raster_nonzero(raster: &ImageRaster) -> BinaryMask {
        let c = raster.channels();
        let cc = raster.color_channels();
        let n = raster.width() * raster.height();
        let bits = match raster.samples() {
            Samples::U8(v) => (0..n).map(|p| v[p * c..p * c + cc].iter().any(|s| *s > 0)).collect(),
            Samples::Normalized(v) => {
                (0..n).map(|p| v[p * c..p * c + cc].iter().any(|s| *s > 0.0)).collect()
            }
        };
        BinaryMask {
            width: raster.width(),
            height: raster.height(),
            bits,
        }
    }
}

/// Decode PNG bytes into an 8-bit raster. 16-bit images are reduced to 8 bits.
pub fn decode_png(bytes: &[u8]) -> Result<ImageRaster, RasterError> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?;
    from_dynamic(img)
}

pub fn read_png(path: &Path) -> Result<ImageRaster, RasterError> {
    let bytes = std::fs::read(path)?;
    decode_png(&bytes)
}

fn from_dynamic(img: DynamicImage) -> Result<ImageRaster, RasterError> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (channels, data) = match img {
        DynamicImage::ImageLuma8(b) => (1, b.into_raw()),
        DynamicImage::ImageLumaA8(b) => (2, b.into_raw()),
        DynamicImage::ImageRgb8(b) => (3, b.into_raw()),
        DynamicImage::ImageRgba8(b) => (4, b.into_raw()),
        other => match other.color().channel_count() {
            1 => (1, other.to_luma8().into_raw()),
            2 => (2, other.to_luma_alpha8().into_raw()),
            3 => (3, other.to_rgb8().into_raw()),
            _ => (4, other.to_rgba8().into_raw()),
        },
    };
    ImageRaster::from_u8(w, h, channels, data)
}

/// Encode as an 8-bit PNG; normalized rasters are converted with [`ImageRaster::to_u8`].
pub fn encode_png(raster: &ImageRaster) -> Result<Vec<u8>, RasterError> {
    let r = raster.to_u8();
    let data = r.as_u8().expect("to_u8 yields 8-bit samples").to_vec();
    let (w, h) = (r.width as u32, r.height as u32);
    let img = match r.channels {
        1 => DynamicImage::ImageLuma8(ImageBuffer::from_raw(w, h, data).expect("length checked")),
        2 => DynamicImage::ImageLumaA8(ImageBuffer::from_raw(w, h, data).expect("length checked")),
        3 => DynamicImage::ImageRgb8(ImageBuffer::from_raw(w, h, data).expect("length checked")),
        _ => DynamicImage::ImageRgba8(ImageBuffer::from_raw(w, h, data).expect("length checked")),
    };
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

pub fn write_png(raster: &ImageRaster, path: &Path) -> Result<(), RasterError> {
    std::fs::write(path, encode_png(raster)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(w: usize, h: usize, c: usize) -> ImageRaster {
        let data = (0..w * h * c).map(|i| (i % 256) as u8).collect();
        ImageRaster::from_u8(w, h, c, data).unwrap()
    }

    #[test]
    fn same_size_resize_is_identity() {
        let r = ramp(7, 5, 3);
        assert_eq!(nearest_resize(&r, 7, 5), r);
    }

    #[test]
    fn two_by_two_to_one_picks_origin() {
        let r = ImageRaster::from_u8(2, 2, 1, vec![9, 1, 2, 3]).unwrap();
        let out = nearest_resize(&r, 1, 1);
        assert_eq!(out.as_u8().unwrap(), &[9]);
    }

    #[test]
    fn four_by_four_downsample_matches_index_oracle() {
        let src: Vec<u8> = (0..16).map(|i| i * 10).collect();
        let r = ImageRaster::from_u8(4, 4, 1, src.clone()).unwrap();
        let out = nearest_resize(&r, 2, 2);
        // source rows/cols {0, 2} by enumeration of floor(i * 4 / 2)
        assert_eq!(out.as_u8().unwrap(), &[src[0], src[2], src[8], src[10]]);
    }

    #[test]
    fn normalize_values() {
        let r = ImageRaster::from_u8(3, 1, 1, vec![0, 128, 255]).unwrap();
        let n = normalize(&r).unwrap();
        let Samples::Normalized(v) = n.samples() else {
            panic!("expected normalized samples")
        };
        assert_eq!(v[0], 0.0);
        assert!((v[1] - 0.50196).abs() < 1e-5);
        assert_eq!(v[2], 1.0);
        assert!(matches!(normalize(&n), Err(RasterError::AlreadyNormalized)));
    }

    #[test]
    fn constructors_validate() {
        assert!(ImageRaster::from_u8(2, 2, 3, vec![0; 11]).is_err());
        assert!(ImageRaster::from_u8(0, 2, 3, vec![]).is_err());
        assert!(ImageRaster::from_u8(1, 1, 5, vec![0; 5]).is_err());
        assert!(ImageRaster::from_normalized(1, 1, 1, vec![1.5]).is_err());
        assert!(ProbabilityMap::new(1, 1, vec![-0.1]).is_err());
        assert!(ProbabilityMap::new(1, 1, vec![f32::NAN]).is_err());
    }

    #[test]
    fn png_round_trip_is_bit_exact() {
        for c in 1..=4 {
            let r = ramp(9, 4, c);
            let back = decode_png(&encode_png(&r).unwrap()).unwrap();
            assert_eq!(back, r);
        }
    }

    #[test]
    fn garbage_png_rejected() {
        assert!(matches!(decode_png(b"not a png"), Err(RasterError::Decode(_))));
    }

    #[test]
    fn mask_from_nonzero_ignores_alpha() {
        let r = ImageRaster::from_u8(2, 1, 2, vec![0, 255, 3, 0]).unwrap();
        let m = BinaryMask::from_raster_nonzero(&r);
        assert_eq!(m.bits(), &[false, true]);
    }

    proptest! {
        #[test]
        fn resize_round_trip_when_dims_divide(w in 1usize..6, h in 1usize..6, kx in 1usize..4, ky in 1usize..4, c in 1usize..4) {
            let r = ramp(w, h, c);
            let up = nearest_resize(&r, w * kx, h * ky);
            prop_assert_eq!(nearest_resize(&up, w, h), r);
        }

        #[test]
        fn resize_idempotent_on_equal_dims(w in 1usize..10, h in 1usize..10) {
            let r = ramp(w, h, 3);
            prop_assert_eq!(nearest_resize(&r, w, h), r.clone());
        }

        #[test]
        fn normalize_preserves_order(a in 0u8..=255, b in 0u8..=255) {
            let r = ImageRaster::from_u8(2, 1, 1, vec![a, b]).unwrap();
            let n = normalize(&r).unwrap();
            let Samples::Normalized(v) = n.samples() else { unreachable!() };
            if a <= b { prop_assert!(v[0] <= v[1]); }
        }
    }
}
