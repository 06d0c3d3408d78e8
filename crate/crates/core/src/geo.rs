//! Geographic coordinates and request extents.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("latitude {0} outside [-90, 90]")]
    LatitudeOutOfRange(f64),
    #[error("longitude {0} outside [-180, 180]")]
    LongitudeOutOfRange(f64),
    #[error("bounding box is empty or inverted: [{min_lon}, {min_lat}, {max_lon}, {max_lat}]")]
    InvertedBox {
        min_lon: f64,
        min_lat: f64,
        max_lon: f64,
        max_lat: f64,
    },
    #[error("half extent must be positive and finite, got {0}")]
    BadHalfExtent(f64),
    #[error("box around lon {lon} with half extent {half_extent} crosses the antimeridian")]
    AntimeridianCrossing { lon: f64, half_extent: f64 },
}

/// A WGS84 position in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoint", into = "RawPoint")]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPoint {
    lat: f64,
    lon: f64,
}

impl TryFrom<RawPoint> for GeoPoint {
    type Error = GeoError;

    fn try_from(raw: RawPoint) -> Result<Self, Self::Error> {
        GeoPoint::new(raw.lat, raw.lon)
    }
}

impl From<GeoPoint> for RawPoint {
    fn from(p: GeoPoint) -> Self {
        RawPoint {
            lat: p.lat,
            lon: p.lon,
        }
    }
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::LatitudeOutOfRange(lat));
        }
        if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
            return Err(GeoError::LongitudeOutOfRange(lon));
        }
        Ok(GeoPoint { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

/// Axis-aligned lon/lat rectangle. Never crosses the antimeridian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundingBox {
    min_lon: f64,
    min_lat: f64,
    max_lon: f64,
    max_lat: f64,
}

impl BoundingBox {
    pub fn new(min_lon: f64, min_lat: f64, max_lon: f64, max_lat: f64) -> Result<Self, GeoError> {
        for lat in [min_lat, max_lat] {
            if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
                return Err(GeoError::LatitudeOutOfRange(lat));
            }
        }
        for lon in [min_lon, max_lon] {
            if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
                return Err(GeoError::LongitudeOutOfRange(lon));
            }
        }
        if min_lon >= max_lon || min_lat >= max_lat {
            return Err(GeoError::InvertedBox {
                min_lon,
                min_lat,
                max_lon,
                max_lat,
            });
        }
        Ok(BoundingBox {
            min_lon,
            min_lat,
            max_lon,
            max_lat,
        })
    }

    pub fn min_lon(&self) -> f64 {
        self.min_lon
    }

    pub fn min_lat(&self) -> f64 {
        self.min_lat
    }

    pub fn max_lon(&self) -> f64 {
        self.max_lon
    }

    pub fn max_lat(&self) -> f64 {
        self.max_lat
    }

    /// `[min_lon, min_lat, max_lon, max_lat]`
    pub fn as_array(&self) -> [f64; 4] {
        [self.min_lon, self.min_lat, self.max_lon, self.max_lat]
    }

    pub fn center(&self) -> GeoPoint {
        GeoPoint {
            lat: 0.5 * (self.min_lat + self.max_lat),
            lon: 0.5 * (self.min_lon + self.max_lon),
        }
    }

    pub fn contains(&self, p: &GeoPoint) -> bool {
        (self.min_lat..=self.max_lat).contains(&p.lat)
            && (self.min_lon..=self.max_lon).contains(&p.lon)
    }
}

/// Square box of `center ± half_extent` degrees. Latitude is clamped to the
/// poles; longitude overflow is rejected.
pub fn bbox_around(center: GeoPoint, half_extent: f64) -> Result<BoundingBox, GeoError> {
    if !half_extent.is_finite() || half_extent <= 0.0 {
        return Err(GeoError::BadHalfExtent(half_extent));
    }
    let min_lon = center.lon - half_extent;
    let max_lon = center.lon + half_extent;
    if min_lon < -180.0 || max_lon > 180.0 {
        return Err(GeoError::AntimeridianCrossing {
            lon: center.lon,
            half_extent,
        });
    }
    let min_lat = (center.lat - half_extent).max(-90.0);
    let max_lat = (center.lat + half_extent).min(90.0);
    BoundingBox::new(min_lon, min_lat, max_lon, max_lat)
}

/// Identifier of the 0.1° grid cell containing `p`, e.g. `130_802` for
/// Chennai. Used to key the on-disk scene store.
pub fn grid_cell_id(p: &GeoPoint) -> String {
    // The epsilon keeps values like 13.1 from landing in cell 130 through
    // binary rounding of 131.0 - ulp.
    let idx = |v: f64| (v * 10.0 + 1e-9).floor() as i64;
    format!("{}_{}", idx(p.lat), idx(p.lon))
}
