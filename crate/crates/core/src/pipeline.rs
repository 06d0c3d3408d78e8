//! The fetch, preprocess, segment, overlay and persist chain shared by the
//! HTTP service and the command-line tool.

use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::geo::{bbox_around, BoundingBox, GeoError, GeoPoint};
use crate::imagery::{fetch_latest, process_scene, ImageStore, ImageStoreRecord, ImageryError, SceneMeta, TileBackend};
use crate::raster::{normalize, BinaryMask, ImageRaster, RasterError};
use crate::segmentation::{
    binarize, overlay, ClassicalIndex, EngineKind, SegmentationEngine, SegmentationError, UNetConfig, WeightArchive,
    DEFAULT_OVERLAY_ALPHA, DEFAULT_OVERLAY_COLOR,
};

pub const DEFAULT_IMAGE_SIZE: usize = 256;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Imagery(#[from] ImageryError),
    #[error(transparent)]
    Segmentation(#[from] SegmentationError),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Build an engine. UNet engines need a weight archive; the architecture is
/// inferred from the archive's tensor shapes.
pub fn load_engine(kind: EngineKind, weights: Option<&Path>) -> Result<SegmentationEngine, SegmentationError> {
    match kind {
        EngineKind::Classical => Ok(SegmentationEngine::classical("classical", ClassicalIndex::default())),
        EngineKind::Unet => {
            let path = weights.ok_or_else(|| {
                SegmentationError::WeightMismatch("the unet engine needs a weight file".into())
            })?;
            let archive = WeightArchive::load(path)?;
            let config = UNetConfig::infer(&archive)?;
            SegmentationEngine::unet("unet", config, &archive)
        }
    }
}

/// Mask and overlay for an already preprocessed 8-bit scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmented {
    pub mask: BinaryMask,
    pub overlay: ImageRaster,
    /// Positive pixels over total pixels of `mask`.
    pub flood_fraction: f64,
}

pub fn segment_image(
    engine: &SegmentationEngine,
    scene: &ImageRaster,
    threshold: f32,
) -> Result<Segmented, PipelineError> {
    let input = if scene.is_normalized() {
        scene.clone()
    } else {
        normalize(scene)?
    };
    let pm = engine.predict(&input)?;
    let mask = binarize(&pm, threshold)?;
    let overlay = overlay(scene, &mask, DEFAULT_OVERLAY_COLOR, DEFAULT_OVERLAY_ALPHA)?;
    Ok(Segmented {
        flood_fraction: mask.positive_fraction(),
        mask,
        overlay,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Download {
    pub bbox: BoundingBox,
    pub scene: SceneMeta,
    pub image: ImageStoreRecord,
}

#[derive(Debug, Clone, Serialize)]
pub struct Segmentation {
    pub bbox: BoundingBox,
    pub scene: SceneMeta,
    pub image: ImageStoreRecord,
    pub overlay: ImageStoreRecord,
    pub flood_fraction: f64,
}

/// Immutable after construction; safe to share across request handlers.
#[derive(Clone)]
pub struct Pipeline {
    tiles: Arc<dyn TileBackend>,
    store: ImageStore,
    engine: Arc<SegmentationEngine>,
    half_extent: f64,
    image_size: usize,
}

impl Pipeline {
    pub fn new(
        tiles: Arc<dyn TileBackend>,
        store: ImageStore,
        engine: Arc<SegmentationEngine>,
        half_extent: f64,
        image_size: usize,
    ) -> Self {
        Pipeline {
            tiles,
            store,
            engine,
            half_extent,
            image_size,
        }
    }

    pub fn engine(&self) -> &SegmentationEngine {
        &self.engine
    }

    pub fn store(&self) -> &ImageStore {
        &self.store
    }

    /// Latest scene around `point`, center-cropped and resized to
    /// `image_size`.
    pub fn scene(&self, point: GeoPoint) -> Result<(BoundingBox, SceneMeta, ImageRaster), PipelineError> {
        let bbox = bbox_around(point, self.half_extent)?;
        let (raw, meta) = fetch_latest(&bbox, self.tiles.as_ref())?;
        let img = process_scene(&raw, self.image_size)?;
        Ok((bbox, meta, img))
    }

    pub fn download(&self, point: GeoPoint) -> Result<Download, PipelineError> {
        let (bbox, scene, img) = self.scene(point)?;
        let image = self.store.persist(&img)?;
        Ok(Download { bbox, scene, image })
    }

    pub fn segment(&self, point: GeoPoint, threshold: f32) -> Result<Segmentation, PipelineError> {
        let (bbox, scene, img) = self.scene(point)?;
        let seg = segment_image(&self.engine, &img, threshold)?;
        let image = self.store.persist(&img)?;
        let overlay = self.store.persist(&seg.overlay)?;
        Ok(Segmentation {
            bbox,
            scene,
            image,
            overlay,
            flood_fraction: seg.flood_fraction,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagery::FixtureStore;
    use crate::raster::read_png;
    use chrono::{TimeZone, Utc};

    fn chennai() -> GeoPoint {
        GeoPoint::new(13.0827, 80.2707).unwrap()
    }

    fn setup(engine: SegmentationEngine) -> (tempfile::TempDir, Pipeline) {
        let d = tempfile::tempdir().unwrap();
        let tiles = FixtureStore::new(d.path().join("tiles"));
        let data = (0..40 * 30 * 3).map(|i| (i % 256) as u8).collect();
        let scene = ImageRaster::from_u8(40, 30, 3, data).unwrap();
        tiles
            .insert(&chennai(), Utc.with_ymd_and_hms(2023, 12, 4, 5, 0, 0).unwrap(), &scene)
            .unwrap();
        let store = ImageStore::new(d.path().join("images"), "http://h/images");
        let p = Pipeline::new(Arc::new(tiles), store, Arc::new(engine), 0.05, 32);
        (d, p)
    }

    fn zero_unet() -> SegmentationEngine {
        let cfg = UNetConfig {
            levels: 2,
            base_channels: 2,
            in_channels: 3,
            out_channels: 1,
        };
        SegmentationEngine::unet("z", cfg, &cfg.zero_weights()).unwrap()
    }

    #[test]
    fn zero_engine_thresholds() {
        let (_d, p) = setup(zero_unet());
        assert_eq!(p.segment(chennai(), 0.5).unwrap().flood_fraction, 1.0);
        assert_eq!(p.segment(chennai(), 0.7).unwrap().flood_fraction, 0.0);
    }

    #[test]
    fn segment_persists_decodable_pngs() {
        let (_d, p) = setup(SegmentationEngine::classical("c", ClassicalIndex::default()));
        let s = p.segment(chennai(), 0.5).unwrap();
        let img = read_png(&s.image.file_path).unwrap();
        let ov = read_png(&s.overlay.file_path).unwrap();
        assert_eq!((img.width(), img.height(), img.channels()), (32, 32, 3));
        assert_eq!((ov.width(), ov.height()), (32, 32));
        let again = segment_image(p.engine(), &img, 0.5).unwrap();
        assert_eq!(again.flood_fraction, s.flood_fraction);
        assert_eq!(again.overlay, ov);
    }

    #[test]
    fn uncovered_point() {
        let (_d, p) = setup(zero_unet());
        let far = GeoPoint::new(-33.9, 18.4).unwrap();
        assert!(matches!(
            p.download(far),
            Err(PipelineError::Imagery(ImageryError::NoSceneAvailable(_)))
        ));
    }

    #[test]
    fn engine_loading() {
        assert!(load_engine(EngineKind::Unet, None).is_err());
        let d = tempfile::tempdir().unwrap();
        let path = d.path().join("w.flwt");
        UNetConfig::default().zero_weights().save(&path).unwrap();
        let e = load_engine(EngineKind::Unet, Some(&path)).unwrap();
        assert_eq!(e.as_unet().unwrap().config(), &UNetConfig::default());
        assert_eq!(load_engine(EngineKind::Classical, None).unwrap().kind(), EngineKind::Classical);
    }
}
