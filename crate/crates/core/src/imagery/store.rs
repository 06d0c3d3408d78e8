use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::Serialize;

use super::ImageryError;
use crate::raster::{encode_png, ImageRaster};

const NAME_ATTEMPTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageStoreRecord {
    pub file_path: PathBuf,
    pub url: String,
    pub stored_at: DateTime<Utc>,
}

/// Directory of persisted PNGs served under `base_url`.
#[derive(Debug, Clone)]
pub struct ImageStore {
    dir: PathBuf,
    base_url: String,
}

/// True for names produced by [`ImageStore::persist`]:
/// `sat_<digits>_<6 lowercase hex>.png`.
pub fn is_store_name(name: &str) -> bool {
    let Some(rest) = name.strip_prefix("sat_").and_then(|r| r.strip_suffix(".png")) else {
        return false;
    };
    let Some((secs, suffix)) = rest.split_once('_') else {
        return false;
    };
    !secs.is_empty()
        && secs.bytes().all(|b| b.is_ascii_digit())
        && suffix.len() == 6
        && suffix.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

impl ImageStore {
    pub fn new(dir: impl Into<PathBuf>, base_url: &str) -> Self {
        ImageStore {
            dir: dir.into(),
            base_url: base_url.trim_end_matches('/').to_owned(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Write `img` as `sat_<unix_seconds>_<6 hex>.png`. Never overwrites an
    /// existing file; a name collision draws a new suffix.
    pub fn persist(&self, img: &ImageRaster) -> Result<ImageStoreRecord, ImageryError> {
        let io = |e| ImageryError::Io(self.dir.display().to_string(), e);
        std::fs::create_dir_all(&self.dir).map_err(io)?;
        let bytes = encode_png(img)?;
        let stored_at = Utc::now();
        for _ in 0..NAME_ATTEMPTS {
            let name = format!(
                "sat_{}_{:06x}.png",
                stored_at.timestamp(),
                rand::random::<u32>() & 0xff_ffff
            );
            let path = self.dir.join(&name);
            let mut file = match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(f) => f,
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(io(e)),
            };
            file.write_all(&bytes).map_err(io)?;
            tracing::info!(
                width = img.width(),
                height = img.height(),
                path = %path.display(),
                "stored image"
            );
            return Ok(ImageStoreRecord {
                url: format!("{}/{name}", self.base_url),
                file_path: path,
                stored_at,
            });
        }
        Err(ImageryError::Io(
            self.dir.display().to_string(),
            std::io::Error::new(std::io::ErrorKind::AlreadyExists, "no free file name"),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::read_png;

    #[test]
    fn round_trip_and_url() {
        let d = tempfile::tempdir().unwrap();
        let store = ImageStore::new(d.path().join("out"), "http://h/images/");
        let data: Vec<u8> = (0..5 * 3 * 3).map(|i| (i * 13) as u8).collect();
        let img = ImageRaster::from_u8(5, 3, 3, data).unwrap();
        let rec = store.persist(&img).unwrap();
        assert_eq!(read_png(&rec.file_path).unwrap(), img);
        let name = rec.file_path.file_name().unwrap().to_str().unwrap();
        assert!(is_store_name(name), "{name}");
        assert_eq!(rec.url, format!("http://h/images/{name}"));
    }

    #[test]
    fn rapid_persists_are_distinct() {
        let d = tempfile::tempdir().unwrap();
        let store = ImageStore::new(d.path(), "http://h/images");
        let img = ImageRaster::filled_rgb(1, 1, [1, 2, 3]).unwrap();
        let names: std::collections::HashSet<_> =
            (0..50).map(|_| store.persist(&img).unwrap().file_path).collect();
        assert_eq!(names.len(), 50);
        assert_eq!(std::fs::read_dir(d.path()).unwrap().count(), 50);
    }

    #[test]
    fn store_name_pattern() {
        assert!(is_store_name("sat_1700000000_0a9f3c.png"));
        for bad in [
            "sat_1700000000_0A9F3C.png",
            "sat__0a9f3c.png",
            "sat_17x_0a9f3c.png",
            "sat_1_0a9f3.png",
            "../sat_1_0a9f3c.png",
            "sat_1_0a9f3c.png.bak",
            "other.png",
        ] {
            assert!(!is_store_name(bad), "{bad}");
        }
    }
}
