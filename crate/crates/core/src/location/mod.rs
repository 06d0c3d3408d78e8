//! Place-name extraction from free text and geocoding to coordinates.
//!
//! Both steps sit behind traits so request handlers can swap between the
//! offline gazetteer backends and the HTTP clients.

mod gazetteer;
mod interface;
mod llm;
mod nominatim;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::GeoPoint;

pub use gazetteer::{Gazetteer, GazetteerEntry, GazetteerExtractor, GazetteerGeocoder};
pub use interface::{
    bundled_cases, evaluate_interface, CaseOutcome, Expected, InterfaceCase, InterfaceReport,
};
pub use llm::{ChatClient, LlmExtractor, OpenAiChatClient, SYSTEM_PROMPT};
pub use nominatim::NominatimClient;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LocationError {
    #[error("no location found in query")]
    NoLocationFound,
    #[error("extraction backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("location not found: {0}")]
    NotFound(String),
    #[error("geocoding service error: {0}")]
    ServiceError(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("gazetteer: {0}")]
    Gazetteer(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractionMethod {
    Llm,
    Gazetteer,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocationCandidate {
    name: String,
    confidence: f64,
    method: ExtractionMethod,
}

impl LocationCandidate {
    pub fn new(name: &str, confidence: f64, method: ExtractionMethod) -> Result<Self, LocationError> {
        let name = name.trim();
        if name.is_empty() {
            return Err(LocationError::InvalidInput("candidate name is empty".into()));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(LocationError::InvalidInput(format!("confidence {confidence} outside [0, 1]")));
        }
        Ok(LocationCandidate {
            name: name.to_owned(),
            confidence,
            method,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    pub fn method(&self) -> ExtractionMethod {
        self.method
    }
}

pub trait LocationExtractor: Send + Sync {
    fn extract(&self, text: &str) -> Result<LocationCandidate, LocationError>;
}

pub trait Geocoder: Send + Sync {
    /// Coordinates of the first (highest-ranked) match.
    fn geocode(&self, name: &str) -> Result<GeoPoint, LocationError>;
}

pub fn extract_location(
    text: &str,
    extractor: &dyn LocationExtractor,
) -> Result<LocationCandidate, LocationError> {
    if text.trim().is_empty() {
        return Err(LocationError::InvalidInput("query text is empty".into()));
    }
    extractor.extract(text)
}

pub fn geocode(name: &str, client: &dyn Geocoder) -> Result<GeoPoint, LocationError> {
    if name.trim().is_empty() {
        return Err(LocationError::InvalidInput("location name is empty".into()));
    }
    client.geocode(name.trim())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn candidate_invariants() {
        assert!(LocationCandidate::new("", 0.5, ExtractionMethod::Llm).is_err());
        assert!(LocationCandidate::new("  ", 0.5, ExtractionMethod::Llm).is_err());
        assert!(LocationCandidate::new("x", 1.5, ExtractionMethod::Llm).is_err());
        assert!(LocationCandidate::new("x", f64::NAN, ExtractionMethod::Llm).is_err());
        let c = LocationCandidate::new(" Pune ", 0.25, ExtractionMethod::Gazetteer).unwrap();
        assert_eq!(c.name(), "Pune");
    }

    #[test]
    fn empty_inputs_rejected() {
        let g = Gazetteer::bundled();
        let ex = GazetteerExtractor::new(g.clone());
        assert!(matches!(extract_location("   ", &ex), Err(LocationError::InvalidInput(_))));
        let geo = GazetteerGeocoder::new(g);
        assert!(matches!(geocode("", &geo), Err(LocationError::InvalidInput(_))));
    }

    #[test]
    fn method_serializes_lowercase() {
        assert_eq!(serde_json::to_string(&ExtractionMethod::Llm).unwrap(), "\"llm\"");
        assert_eq!(serde_json::to_string(&ExtractionMethod::Gazetteer).unwrap(), "\"gazetteer\"");
    }
}
