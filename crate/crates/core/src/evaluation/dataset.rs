use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::raster::{nearest_resize, normalize, read_png, BinaryMask, ImageRaster};

/// Paired image/mask directories. Files are matched by stem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub image_dir: PathBuf,
    pub mask_dir: PathBuf,
    /// Square side length every sample is resized to.
    pub resize: usize,
}

impl DatasetSpec {
    /// `<root>/images` and `<root>/masks`.
    pub fn from_root(root: &Path, resize: usize) -> Self {
        DatasetSpec {
            image_dir: root.join("images"),
            mask_dir: root.join("masks"),
            resize,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub stem: String,
    /// Normalized, `resize x resize`.
    pub image: ImageRaster,
    pub mask: BinaryMask,
}

fn png_stems(dir: &Path) -> Result<Vec<String>, EvalError> {
    let mut stems = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| EvalError::Io(dir.to_owned(), e))? {
        let path = entry.map_err(|e| EvalError::Io(dir.to_owned(), e))?.path();
        if path.extension().and_then(|e| e.to_str()) == Some("png") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                stems.push(stem.to_owned());
            }
        }
    }
    stems.sort();
    Ok(stems)
}

fn decode(path: &Path) -> Result<ImageRaster, EvalError> {
    read_png(path).map_err(|e| EvalError::Decode(path.to_owned(), e.to_string()))
}

/// Images are nearest-resized and normalized; masks are nearest-resized and
/// positive wherever the stored value is non-zero. Ordered by stem.
pub fn load_dataset(spec: &DatasetSpec) -> Result<Vec<Sample>, EvalError> {
    if spec.resize == 0 {
        return Err(EvalError::EmptyInput("resize must be >= 1".into()));
    }
    let stems = png_stems(&spec.image_dir)?;
    for stem in &stems {
        if !spec.mask_dir.join(format!("{stem}.png")).is_file() {
            return Err(EvalError::MissingMask(stem.clone()));
        }
    }
    stems
        .par_iter()
        .map(|stem| {
            let img = decode(&spec.image_dir.join(format!("{stem}.png")))?;
            let mask_raster = decode(&spec.mask_dir.join(format!("{stem}.png")))?;
            let img = normalize(&nearest_resize(&img, spec.resize, spec.resize))
                .expect("decoded PNGs are 8-bit");
            let mask = BinaryMask::from_raster_nonzero(&mask_raster).resized(spec.resize, spec.resize);
            Ok(Sample {
                stem: stem.clone(),
                image: img,
                mask,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::write_png;

    fn dirs() -> (tempfile::TempDir, DatasetSpec) {
        let d = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(d.path().join("images")).unwrap();
        std::fs::create_dir_all(d.path().join("masks")).unwrap();
        let spec = DatasetSpec::from_root(d.path(), 128);
        (d, spec)
    }

    #[test]
    fn empty_dirs() {
        let (_d, spec) = dirs();
        assert!(load_dataset(&spec).unwrap().is_empty());
    }

    #[test]
    fn resized_pair() {
        let (_d, spec) = dirs();
        let img = ImageRaster::filled_rgb(256, 256, [1, 2, 3]).unwrap();
        write_png(&img, &spec.image_dir.join("a.png")).unwrap();
        write_png(&BinaryMask::filled(256, 256, true).unwrap().to_raster(), &spec.mask_dir.join("a.png")).unwrap();
        let s = load_dataset(&spec).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].image.width(), s[0].image.height()), (128, 128));
        assert!(s[0].image.is_normalized());
        assert_eq!((s[0].mask.width(), s[0].mask.height()), (128, 128));
    }

    #[test]
    fn mask_positive_where_nonzero() {
        let (_d, mut spec) = dirs();
        spec.resize = 4;
        let values = vec![0u8, 1, 255, 0, 1, 0, 0, 255, 0, 0, 0, 0, 255, 255, 1, 0];
        write_png(&ImageRaster::filled_rgb(4, 4, [9, 9, 9]).unwrap(), &spec.image_dir.join("m.png")).unwrap();
        write_png(&ImageRaster::from_u8(4, 4, 1, values.clone()).unwrap(), &spec.mask_dir.join("m.png")).unwrap();
        let s = load_dataset(&spec).unwrap();
        let want: Vec<bool> = values.iter().map(|v| *v > 0).collect();
        assert_eq!(s[0].mask.bits(), &want[..]);
    }

    #[test]
    fn missing_mask_and_bad_png() {
        let (_d, spec) = dirs();
        write_png(&ImageRaster::filled_rgb(2, 2, [0, 0, 0]).unwrap(), &spec.image_dir.join("x.png")).unwrap();
        assert!(matches!(load_dataset(&spec), Err(EvalError::MissingMask(s)) if s == "x"));
        std::fs::write(spec.mask_dir.join("x.png"), b"junk").unwrap();
        assert!(matches!(load_dataset(&spec), Err(EvalError::Decode(..))));
        let gone = DatasetSpec::from_root(Path::new("/nonexistent/dataset"), 8);
        assert!(matches!(load_dataset(&gone), Err(EvalError::Io(..))));
    }
}
