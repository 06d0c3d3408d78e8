//! Deterministic synthetic fixtures: a labelled water/land dataset, a
//! gazetteer, a scene store, weight archives and interface queries, all
//! derived from one seed so runs are reproducible byte for byte.

use std::path::{Path, PathBuf};

use chrono::{TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::imagery::{FixtureStore, ImageryError};
use crate::location::{bundled_cases, Gazetteer};
use crate::raster::{write_png, BinaryMask, ImageRaster, RasterError};
use crate::segmentation::{UNetConfig, WeightError};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("{0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Imagery(#[from] ImageryError),
    #[error(transparent)]
    Weights(#[from] WeightError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SynthOptions {
    pub seed: u64,
    pub dataset_size: usize,
    pub dataset_px: usize,
    pub scene_width: usize,
    pub scene_height: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            seed: DEFAULT_SEED,
            dataset_size: 8,
            dataset_px: 128,
            scene_width: 320,
            scene_height: 288,
        }
    }
}

/// Where [`generate`] puts each artifact under its root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FixtureLayout {
    pub root: PathBuf,
}

impl FixtureLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        FixtureLayout { root: root.into() }
    }
    pub fn dataset(&self) -> PathBuf {
        self.root.join("dataset")
    }
    pub fn gazetteer(&self) -> PathBuf {
        self.root.join("gazetteer.jsonl")
    }
    pub fn tiles(&self) -> PathBuf {
        self.root.join("tiles")
    }
    pub fn images(&self) -> PathBuf {
        self.root.join("images")
    }
    pub fn zero_weights(&self) -> PathBuf {
        self.root.join("weights").join("unet_zero.flwt")
    }
    pub fn random_weights(&self) -> PathBuf {
        self.root.join("weights").join("unet_random.flwt")
    }
    pub fn interface_cases(&self) -> PathBuf {
        self.root.join("interface_cases.jsonl")
    }
}

const WATER: [i32; 3] = [40, 110, 150];
const LAND: [i32; 3] = [150, 115, 80];
const NOISE: i32 = 15;

/// Land with one to four elliptical water bodies; the mask marks water.
pub fn water_scene(rng: &mut ChaCha8Rng, width: usize, height: usize) -> Result<(ImageRaster, BinaryMask), RasterError> {
    let blobs: Vec<(f64, f64, f64, f64)> = (0..rng.random_range(1..=4))
        .map(|_| {
            (
                rng.random_range(0.0..width as f64),
                rng.random_range(0.0..height as f64),
                rng.random_range(0.08..0.3) * width as f64,
                rng.random_range(0.08..0.3) * height as f64,
            )
        })
        .collect();
    let mut data = Vec::with_capacity(width * height * 3);
    let mut bits = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let water = blobs.iter().any(|&(cx, cy, rx, ry)| {
                let (dx, dy) = ((x as f64 - cx) / rx, (y as f64 - cy) / ry);
                dx * dx + dy * dy <= 1.0
            });
            let base = if water { WATER } else { LAND };
            for b in base {
                data.push((b + rng.random_range(-NOISE..=NOISE)).clamp(0, 255) as u8);
            }
            bits.push(water);
        }
    }
    Ok((ImageRaster::from_u8(width, height, 3, data)?, BinaryMask::new(width, height, bits)?))
}

fn write_text(path: &Path, text: &str) -> Result<(), SynthError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| SynthError::Io(dir.to_owned(), e))?;
    }
    std::fs::write(path, text).map_err(|e| SynthError::Io(path.to_owned(), e))
}

fn make_dir(path: &Path) -> Result<(), SynthError> {
    std::fs::create_dir_all(path).map_err(|e| SynthError::Io(path.to_owned(), e))
}

/// Write every fixture under `layout.root`. Existing files are overwritten.
pub fn generate(layout: &FixtureLayout, opts: &SynthOptions) -> Result<(), SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let ds = layout.dataset();
    make_dir(&ds.join("images"))?;
    make_dir(&ds.join("masks"))?;
    for i in 0..opts.dataset_size {
        let (img, mask) = water_scene(&mut rng, opts.dataset_px, opts.dataset_px)?;
        write_png(&img, &ds.join("images").join(format!("sample_{i:03}.png")))?;
        write_png(&mask.to_raster(), &ds.join("masks").join(format!("sample_{i:03}.png")))?;
    }

    let gazetteer = Gazetteer::bundled();
    write_text(&layout.gazetteer(), &gazetteer.to_jsonl())?;

    let tiles = FixtureStore::new(layout.tiles());
    let older = Utc.with_ymd_and_hms(2023, 11, 2, 5, 0, 0).unwrap();
    let newer = Utc.with_ymd_and_hms(2023, 12, 4, 5, 0, 0).unwrap();
    for entry in gazetteer.entries() {
        for at in [older, newer] {
            let (scene, _) = water_scene(&mut rng, opts.scene_width, opts.scene_height)?;
            tiles.insert(&entry.point, at, &scene)?;
        }
    }
    make_dir(&layout.images())?;

    let cfg = UNetConfig::default();
    make_dir(layout.zero_weights().parent().expect("weights dir"))?;
    cfg.zero_weights().save(&layout.zero_weights())?;
    cfg.random_weights(opts.seed).save(&layout.random_weights())?;

    let mut cases = String::new();
    for c in bundled_cases() {
        cases.push_str(&serde_json::to_string(&c).expect("case serializes"));
        cases.push('\n');
    }
    write_text(&layout.interface_cases(), &cases)?;
    Ok(())
}
