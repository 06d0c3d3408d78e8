use std::sync::OnceLock;
use std::time::Duration;

use chrono::{DateTime, NaiveDate, NaiveTime, Utc};
use serde::Deserialize;

use super::{ImageryError, SceneMeta, TileBackend};
use crate::geo::BoundingBox;
use crate::raster::{decode_png, ImageRaster};

const DEFAULT_LAYER: &str = "TRUE-COLOR";
const DEFAULT_LOOKBACK_DAYS: i64 = 30;
const DEFAULT_REQUEST_PX: usize = 512;

#[derive(Deserialize)]
struct FeatureCollection {
    features: Vec<Feature>,
}

#[derive(Deserialize)]
struct Feature {
    properties: Properties,
}

#[derive(Deserialize)]
struct Properties {
    date: String,
    #[serde(default)]
    time: Option<String>,
}

/// Sentinel-2 scenes through a Sentinel Hub OGC instance: WFS to list
/// acquisitions, WMS to render true color.
pub struct SentinelHubClient {
    base_url: String,
    instance_id: String,
    layer: String,
    lookback_days: i64,
    request_px: usize,
    http: OnceLock<reqwest::blocking::Client>,
}

impl SentinelHubClient {
    pub fn new(base_url: &str, instance_id: &str) -> Self {
        SentinelHubClient {
            base_url: base_url.trim_end_matches('/').to_owned(),
            instance_id: instance_id.to_owned(),
            layer: DEFAULT_LAYER.to_owned(),
            lookback_days: DEFAULT_LOOKBACK_DAYS,
            request_px: DEFAULT_REQUEST_PX,
            http: OnceLock::new(),
        }
    }

    pub fn with_layer(mut self, layer: &str) -> Self {
        self.layer = layer.to_owned();
        self
    }

    pub fn with_lookback_days(mut self, days: i64) -> Self {
        self.lookback_days = days;
        self
    }

    fn http(&self) -> &reqwest::blocking::Client {
        self.http.get_or_init(|| {
            reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(60))
                .build()
                .expect("http client")
        })
    }

    fn get(&self, url: reqwest::Url) -> Result<reqwest::blocking::Response, ImageryError> {
        let resp = self
            .http()
            .get(url)
            .send()
            .map_err(|e| ImageryError::ServiceError(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(ImageryError::ServiceError(format!("status {}", resp.status())));
        }
        Ok(resp)
    }

    fn url(&self, service: &str, params: &[(&str, String)]) -> Result<reqwest::Url, ImageryError> {
        reqwest::Url::parse_with_params(
            &format!("{}/ogc/{service}/{}", self.base_url, self.instance_id),
            params,
        )
        .map_err(|e| ImageryError::ServiceError(e.to_string()))
    }
}

fn parse_acquisition(p: &Properties) -> Result<DateTime<Utc>, String> {
    let date = NaiveDate::parse_from_str(&p.date, "%Y-%m-%d").map_err(|e| format!("date {:?}: {e}", p.date))?;
    let time = match &p.time {
        Some(t) => NaiveTime::parse_from_str(t, "%H:%M:%S").map_err(|e| format!("time {t:?}: {e}"))?,
        None => NaiveTime::MIN,
    };
    Ok(date.and_time(time).and_utc())
}

impl TileBackend for SentinelHubClient {
    fn list_scenes(&self, bbox: &BoundingBox) -> Result<Vec<SceneMeta>, ImageryError> {
        let now = Utc::now();
        let from = now - chrono::Duration::days(self.lookback_days);
        // WFS 2.0 with EPSG:4326 takes lat,lon axis order
        let url = self.url(
            "wfs",
            &[
                ("SERVICE", "WFS".into()),
                ("VERSION", "2.0.0".into()),
                ("REQUEST", "GetFeature".into()),
                ("TYPENAMES", "DSS2".into()),
                ("SRSNAME", "EPSG:4326".into()),
                (
                    "BBOX",
                    format!("{},{},{},{}", bbox.min_lat(), bbox.min_lon(), bbox.max_lat(), bbox.max_lon()),
                ),
                ("TIME", format!("{}/{}", from.format("%Y-%m-%d"), now.format("%Y-%m-%d"))),
                ("OUTPUTFORMAT", "application/json".into()),
                ("MAXFEATURECOUNT", "100".into()),
            ],
        )?;
        let fc: FeatureCollection = self
            .get(url)?
            .json()
            .map_err(|e| ImageryError::ServiceError(format!("bad feature listing: {e}")))?;
        let mut scenes = Vec::new();
        for f in &fc.features {
            let meta = parse_acquisition(&f.properties)
                .and_then(|t| SceneMeta::new(t, &f.properties.date).map_err(|e| e.to_string()));
            match meta {
                Ok(meta) => scenes.push(meta),
                Err(e) => tracing::warn!("skipping scene: {e}"),
            }
        }
        Ok(scenes)
    }

    fn load_scene(&self, bbox: &BoundingBox, scene: &SceneMeta) -> Result<ImageRaster, ImageryError> {
        let day = scene.acquired_at().format("%Y-%m-%d").to_string();
        let px = self.request_px.to_string();
        let url = self.url(
            "wms",
            &[
                ("SERVICE", "WMS".into()),
                ("VERSION", "1.1.1".into()),
                ("REQUEST", "GetMap".into()),
                ("LAYERS", self.layer.clone()),
                ("SRS", "EPSG:4326".into()),
                (
                    "BBOX",
                    format!("{},{},{},{}", bbox.min_lon(), bbox.min_lat(), bbox.max_lon(), bbox.max_lat()),
                ),
                ("WIDTH", px.clone()),
                ("HEIGHT", px),
                ("FORMAT", "image/png".into()),
                ("TIME", format!("{day}/{day}")),
            ],
        )?;
        let bytes = self
            .get(url)?
            .bytes()
            .map_err(|e| ImageryError::ServiceError(e.to_string()))?;
        decode_png(&bytes).map_err(|e| ImageryError::ServiceError(format!("bad image payload: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{bbox_around, GeoPoint};
    use crate::imagery::fetch_latest;
    use crate::raster::encode_png;
    use crate::testutil::{serve, Canned};

    fn bbox() -> BoundingBox {
        bbox_around(GeoPoint::new(13.0827, 80.2707).unwrap(), 0.05).unwrap()
    }

    #[test]
    fn lists_then_renders_newest() {
        let listing = r#"{"type":"FeatureCollection","features":[
            {"properties":{"date":"2023-11-02","time":"05:06:07"}},
            {"properties":{"date":"2023-12-04","time":"05:01:00"}},
            {"properties":{"date":"not a date"}}
        ]}"#;
        let png = encode_png(&ImageRaster::filled_rgb(4, 4, [9, 8, 7]).unwrap()).unwrap();
        let (base, rx) = serve(vec![
            Canned::json("200 OK", listing),
            Canned {
                status: "200 OK",
                content_type: "image/png",
                body: png,
            },
        ]);
        let client = SentinelHubClient::new(&base, "inst-1");
        let (img, meta) = fetch_latest(&bbox(), &client).unwrap();
        assert_eq!(meta.acquired_at().to_rfc3339(), "2023-12-04T05:01:00+00:00");
        assert_eq!(img, ImageRaster::filled_rgb(4, 4, [9, 8, 7]).unwrap());
        let wfs = rx.recv().unwrap();
        assert!(wfs.starts_with("GET /ogc/wfs/inst-1?SERVICE=WFS"), "{wfs}");
        assert!(wfs.contains("TYPENAMES=DSS2"), "{wfs}");
        let wms = rx.recv().unwrap();
        assert!(wms.starts_with("GET /ogc/wms/inst-1?SERVICE=WMS"), "{wms}");
        assert!(wms.contains("TIME=2023-12-04%2F2023-12-04"), "{wms}");
        assert!(wms.contains("SRS=EPSG%3A4326&BBOX=80.22"), "{wms}");
    }

    #[test]
    fn empty_listing_and_errors() {
        let (base, _rx) = serve(vec![Canned::json("200 OK", r#"{"features":[]}"#)]);
        assert!(matches!(
            fetch_latest(&bbox(), &SentinelHubClient::new(&base, "i")),
            Err(ImageryError::NoSceneAvailable(_))
        ));
        let (base, _rx) = serve(vec![Canned::json("401 Unauthorized", "{}")]);
        assert!(matches!(
            fetch_latest(&bbox(), &SentinelHubClient::new(&base, "i")),
            Err(ImageryError::ServiceError(_))
        ));
        assert!(matches!(
            fetch_latest(&bbox(), &SentinelHubClient::new("http://127.0.0.1:9", "i")),
            Err(ImageryError::ServiceError(_))
        ));
    }
}
