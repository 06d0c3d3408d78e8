//! Scene retrieval for a bounding box, preprocessing to a square RGB tile,
//! and persistence behind a public URL.

mod fixture;
mod sentinel;
mod store;

use chrono::{DateTime, Utc};
use serde::Serialize;
use thiserror::Error;

use crate::geo::BoundingBox;
use crate::raster::{nearest_resize, ImageRaster, RasterError};

pub use fixture::FixtureStore;
pub use sentinel::SentinelHubClient;
pub use store::{is_store_name, ImageStore, ImageStoreRecord};

#[derive(Debug, Error)]
pub enum ImageryError {
    #[error("no scene available for bbox {0:?}")]
    NoSceneAvailable([f64; 4]),
    #[error("tile service error: {0}")]
    ServiceError(String),
    #[error("scene timestamp {0} is in the future")]
    FutureTimestamp(DateTime<Utc>),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SceneMeta {
    acquired_at: DateTime<Utc>,
    source_id: String,
}

impl SceneMeta {
    pub fn new(acquired_at: DateTime<Utc>, source_id: &str) -> Result<Self, ImageryError> {
        if acquired_at > Utc::now() {
            return Err(ImageryError::FutureTimestamp(acquired_at));
        }
        Ok(SceneMeta {
            acquired_at,
            source_id: source_id.to_owned(),
        })
    }

    pub fn acquired_at(&self) -> DateTime<Utc> {
        self.acquired_at
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }
}

/// A source of scenes. Implementations must tolerate concurrent callers.
pub trait TileBackend: Send + Sync {
    /// Every scene available for the bbox, in any order.
    fn list_scenes(&self, bbox: &BoundingBox) -> Result<Vec<SceneMeta>, ImageryError>;
    fn load_scene(&self, bbox: &BoundingBox, scene: &SceneMeta) -> Result<ImageRaster, ImageryError>;
}

/// Newest scene for the bbox. Equal timestamps are broken by the larger
/// source id so the choice is deterministic.
pub fn fetch_latest(
    bbox: &BoundingBox,
    backend: &dyn TileBackend,
) -> Result<(ImageRaster, SceneMeta), ImageryError> {
    let latest = backend
        .list_scenes(bbox)?
        .into_iter()
        .max_by(|a, b| {
            a.acquired_at
                .cmp(&b.acquired_at)
                .then_with(|| a.source_id.cmp(&b.source_id))
        })
        .ok_or(ImageryError::NoSceneAvailable(bbox.as_array()))?;
    let img = backend.load_scene(bbox, &latest)?;
    tracing::debug!(scene = %latest.source_id, at = %latest.acquired_at, "fetched scene");
    Ok((img, latest))
}

/// Center-crop to a square, nearest-resize to `target x target`, and emit
/// 8-bit RGB (alpha and any further bands are dropped).
pub fn process_scene(raw: &ImageRaster, target: usize) -> Result<ImageRaster, ImageryError> {
    if raw.channels() < 3 {
        return Err(ImageryError::InvalidInput(format!(
            "scene has {} channels, need at least 3",
            raw.channels()
        )));
    }
    if target == 0 {
        return Err(ImageryError::InvalidInput("target size must be >= 1".into()));
    }
    let side = raw.width().min(raw.height());
    let x0 = (raw.width() - side) / 2;
    let y0 = (raw.height() - side) / 2;
    let u8s = raw.to_u8();
    let src = u8s.as_u8().expect("converted to u8");
    let c = raw.channels();
    let mut rgb = Vec::with_capacity(side * side * 3);
    for y in y0..y0 + side {
        for x in x0..x0 + side {
            let base = (y * raw.width() + x) * c;
            rgb.extend_from_slice(&src[base..base + 3]);
        }
    }
    let cropped = ImageRaster::from_u8(side, side, 3, rgb)?;
    Ok(nearest_resize(&cropped, target, target))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{bbox_around, GeoPoint};
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn pattern(w: usize, h: usize, c: usize) -> ImageRaster {
        let data = (0..w * h * c).map(|i| (i * 7 % 251) as u8).collect();
        ImageRaster::from_u8(w, h, c, data).unwrap()
    }

    #[test]
    fn identity_when_already_square() {
        let img = pattern(256, 256, 3);
        assert_eq!(process_scene(&img, 256).unwrap(), img);
    }

    #[test]
    fn wide_scene_spot_pixels() {
        let img = pattern(300, 200, 3);
        let out = process_scene(&img, 256).unwrap();
        assert_eq!((out.width(), out.height(), out.channels()), (256, 256, 3));
        let (src, dst) = (img.as_u8().unwrap(), out.as_u8().unwrap());
        for &(i, j) in &[(0, 0), (255, 255), (17, 200), (128, 3), (99, 99)] {
            let (sy, sx) = (i * 200 / 256, 50 + j * 200 / 256);
            for ch in 0..3 {
                assert_eq!(dst[(i * 256 + j) * 3 + ch], src[(sy * 300 + sx) * 3 + ch], "({i},{j},{ch})");
            }
        }
    }

    #[test]
    fn single_pixel_broadcasts() {
        let img = ImageRaster::from_u8(1, 1, 4, vec![10, 20, 30, 255]).unwrap();
        let out = process_scene(&img, 256).unwrap();
        assert_eq!(out, ImageRaster::filled_rgb(256, 256, [10, 20, 30]).unwrap());
    }

    #[test]
    fn too_few_channels() {
        let img = ImageRaster::from_u8(2, 2, 2, vec![0; 8]).unwrap();
        assert!(matches!(process_scene(&img, 4), Err(ImageryError::InvalidInput(_))));
    }

    #[test]
    fn future_scene_rejected() {
        let t = Utc::now() + chrono::Duration::days(1);
        assert!(matches!(SceneMeta::new(t, "x"), Err(ImageryError::FutureTimestamp(_))));
        let t = Utc.with_ymd_and_hms(2023, 12, 1, 5, 0, 0).unwrap();
        assert_eq!(SceneMeta::new(t, "x").unwrap().acquired_at(), t);
    }

    struct Listed(Vec<SceneMeta>);

    impl TileBackend for Listed {
        fn list_scenes(&self, _: &BoundingBox) -> Result<Vec<SceneMeta>, ImageryError> {
            Ok(self.0.clone())
        }
        fn load_scene(&self, _: &BoundingBox, s: &SceneMeta) -> Result<ImageRaster, ImageryError> {
            let v = (s.acquired_at.timestamp() % 256) as u8;
            Ok(ImageRaster::filled_rgb(1, 1, [v, v, v])?)
        }
    }

    fn bbox() -> BoundingBox {
        bbox_around(GeoPoint::new(13.0827, 80.2707).unwrap(), 0.05).unwrap()
    }

    #[test]
    fn empty_listing_is_no_scene() {
        assert!(matches!(
            fetch_latest(&bbox(), &Listed(vec![])),
            Err(ImageryError::NoSceneAvailable(_))
        ));
    }

    proptest! {
        #[test]
        fn latest_matches_sort_oracle(secs in prop::collection::vec(0i64..1_600_000_000, 1..12)) {
            let scenes: Vec<SceneMeta> = secs
                .iter()
                .enumerate()
                .map(|(i, s)| SceneMeta::new(Utc.timestamp_opt(*s, 0).unwrap(), &format!("s{i:02}")).unwrap())
                .collect();
            let (_, got) = fetch_latest(&bbox(), &Listed(scenes.clone())).unwrap();
            let mut sorted = scenes.clone();
            sorted.sort_by_key(|s| (s.acquired_at(), s.source_id().to_owned()));
            prop_assert_eq!(&got, sorted.last().unwrap());
            prop_assert!(scenes.iter().all(|s| s.acquired_at() <= got.acquired_at()));
        }

        #[test]
        fn output_is_always_target_square_rgb(w in 1usize..40, h in 1usize..40, c in 3usize..5, t in 1usize..50) {
            let out = process_scene(&pattern(w, h, c), t).unwrap();
            prop_assert_eq!((out.width(), out.height(), out.channels()), (t, t, 3));
            prop_assert!(out.as_u8().is_some());
        }
    }
}
