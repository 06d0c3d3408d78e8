use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};

use super::{ImageryError, SceneMeta, TileBackend};
use crate::geo::{grid_cell_id, BoundingBox, GeoPoint};
use crate::raster::{read_png, write_png, ImageRaster};

/// Directory-backed scenes: `<root>/<cell_id>/<rfc3339>.png`, where the
/// cell is the 0.1 degree grid cell holding the bbox center.
#[derive(Debug, Clone)]
pub struct FixtureStore {
    root: PathBuf,
}

impl FixtureStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        FixtureStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Write a scene for the cell containing `at_point`.
    pub fn insert(
        &self,
        at_point: &GeoPoint,
        acquired_at: DateTime<Utc>,
        img: &ImageRaster,
    ) -> Result<PathBuf, ImageryError> {
        let dir = self.root.join(grid_cell_id(at_point));
        std::fs::create_dir_all(&dir).map_err(|e| ImageryError::Io(dir.display().to_string(), e))?;
        let path = dir.join(format!(
            "{}.png",
            acquired_at.to_rfc3339_opts(SecondsFormat::Secs, true)
        ));
        write_png(img, &path)?;
        Ok(path)
    }
}

impl TileBackend for FixtureStore {
    fn list_scenes(&self, bbox: &BoundingBox) -> Result<Vec<SceneMeta>, ImageryError> {
        let cell = grid_cell_id(&bbox.center());
        let dir = self.root.join(&cell);
        if !dir.is_dir() {
            return Ok(Vec::new());
        }
        let mut scenes = Vec::new();
        let entries = std::fs::read_dir(&dir).map_err(|e| ImageryError::Io(dir.display().to_string(), e))?;
        for entry in entries {
            let path = entry
                .map_err(|e| ImageryError::Io(dir.display().to_string(), e))?
                .path();
            if path.extension().and_then(|e| e.to_str()) != Some("png") {
                continue;
            }
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let parsed = DateTime::parse_from_rfc3339(stem)
                .map_err(|e| e.to_string())
                .and_then(|t| SceneMeta::new(t.with_timezone(&Utc), &format!("{cell}/{stem}")).map_err(|e| e.to_string()));
            match parsed {
                Ok(meta) => scenes.push(meta),
                Err(e) => tracing::warn!(path = %path.display(), "skipping fixture scene: {e}"),
            }
        }
        Ok(scenes)
    }

    fn load_scene(&self, _bbox: &BoundingBox, scene: &SceneMeta) -> Result<ImageRaster, ImageryError> {
        let path = self.root.join(format!("{}.png", scene.source_id()));
        Ok(read_png(&path)?)
    }
}
