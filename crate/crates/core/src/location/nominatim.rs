use std::sync::OnceLock;
use std::time::Duration;

use serde::Deserialize;

use super::{Geocoder, LocationError};
use crate::geo::GeoPoint;

const USER_AGENT: &str = concat!("floodlense/", env!("CARGO_PKG_VERSION"));

#[derive(Deserialize)]
struct Place {
    lat: String,
    lon: String,
}

/// Client for a Nominatim-compatible `/search` endpoint.
pub struct NominatimClient {
    base_url: String,
    http: OnceLock<reqwest::blocking::Client>,
}

impl NominatimClient {
    pub fn new(base_url: &str) -> Self {
        NominatimClient {
            base_url: base_url.trim_end_matches('/').to_owned(),
            http: OnceLock::new(),
        }
    }

    fn http(&self) -> &reqwest::blocking::Client {
        self.http.get_or_init(|| {
            reqwest::blocking::Client::builder()
                .user_agent(USER_AGENT)
                .timeout(Duration::from_secs(15))
                .build()
                .expect("http client")
        })
    }
}

impl Geocoder for NominatimClient {
    fn geocode(&self, name: &str) -> Result<GeoPoint, LocationError> {
        let url = reqwest::Url::parse_with_params(
            &format!("{}/search", self.base_url),
            &[("q", name), ("format", "json")],
        )
        .map_err(|e| LocationError::ServiceError(e.to_string()))?;
        let resp = self
            .http()
            .get(url)
            .send()
            .map_err(|e| LocationError::ServiceError(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(LocationError::ServiceError(format!("status {}", resp.status())));
        }
        let places: Vec<Place> = resp
            .json()
            .map_err(|e| LocationError::ServiceError(format!("bad response body: {e}")))?;
        let first = places
            .first()
            .ok_or_else(|| LocationError::NotFound(name.to_owned()))?;
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| LocationError::ServiceError(format!("bad coordinate {s:?}")))
        };
        GeoPoint::new(parse(&first.lat)?, parse(&first.lon)?)
            .map_err(|e| LocationError::ServiceError(e.to_string()))
    }
}
