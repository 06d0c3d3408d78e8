use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{extract_location, geocode, Geocoder, LocationError, LocationExtractor};
use crate::geo::GeoPoint;

/// What a query should produce: a named place, or no place at all.
/// Serialized as the name, or `null` for an expected failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Option<String>", into = "Option<String>")]
pub enum Expected {
    Location(String),
    Failure,
}

impl From<Option<String>> for Expected {
    fn from(v: Option<String>) -> Self {
        v.map_or(Expected::Failure, Expected::Location)
    }
}

impl From<Expected> for Option<String> {
    fn from(e: Expected) -> Self {
        match e {
            Expected::Location(n) => Some(n),
            Expected::Failure => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfaceCase {
    pub query: String,
    pub expected: Expected,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseOutcome {
    pub query: String,
    pub expected: Expected,
    pub extracted: Option<String>,
    pub coordinates: Option<GeoPoint>,
    pub extraction_correct: bool,
    pub error: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterfaceReport {
    pub extraction_accuracy: f64,
    /// Zero when no extraction succeeded.
    pub geocoding_success_rate: f64,
    pub error_rate: f64,
    pub outcomes: Vec<CaseOutcome>,
}

fn run_case(case: &InterfaceCase, extractor: &dyn LocationExtractor, client: &dyn Geocoder) -> CaseOutcome {
    let extracted = extract_location(&case.query, extractor).ok().map(|c| c.name().to_owned());
    let coordinates = extracted.as_deref().and_then(|n| geocode(n, client).ok());
    let (extraction_correct, error) = match &case.expected {
        Expected::Location(want) => {
            let right_name = extracted.as_deref().is_some_and(|n| n.eq_ignore_ascii_case(want));
            (right_name, !(right_name && coordinates.is_some()))
        }
        Expected::Failure => (extracted.is_none(), coordinates.is_some()),
    };
    CaseOutcome {
        query: case.query.clone(),
        expected: case.expected.clone(),
        extracted,
        coordinates,
        extraction_correct,
        error,
    }
}

/// Run each case through extraction and geocoding and count:
/// - extraction is correct when the extracted name equals the expected one
///   (case-insensitive), or when a failure was expected and extraction failed;
/// - geocoding success rate is geocoded / successful extractions;
/// - a case with an expected location is an error unless it extracted the
///   right name and geocoded it; an expected failure is an error only if it
///   produced coordinates.
pub fn evaluate_interface(
    cases: &[InterfaceCase],
    extractor: &dyn LocationExtractor,
    client: &dyn Geocoder,
) -> Result<InterfaceReport, LocationError> {
    if cases.is_empty() {
        return Err(LocationError::InvalidInput("no interface cases".into()));
    }
    let outcomes: Vec<CaseOutcome> = cases
        .par_iter()
        .map(|c| run_case(c, extractor, client))
        .collect();
    let total = outcomes.len() as f64;
    let count = |f: fn(&CaseOutcome) -> bool| outcomes.iter().filter(|o| f(o)).count();
    let extracted = count(|o| o.extracted.is_some());
    let geocoded = count(|o| o.coordinates.is_some());
    Ok(InterfaceReport {
        extraction_accuracy: count(|o| o.extraction_correct) as f64 / total,
        geocoding_success_rate: if extracted == 0 {
            0.0
        } else {
            geocoded as f64 / extracted as f64
        },
        error_rate: count(|o| o.error) as f64 / total,
        outcomes,
    })
}

const BUNDLED_CASES: [(&str, Option<&str>); 20] = [
    ("What is the Flood Situation in Chhheennai", Some("Chennai")),
    ("Tsunami alerts for the coast of Japan", Some("Japan")),
    ("Weather forecast for Mount Everest", Some("Mount Everest")),
    ("Flood risk near Atlantis", Some("Atlantis")),
    ("Show me flooding in Mumbai", Some("Mumbai")),
    ("Is Bombay under water", Some("Mumbai")),
    ("Current water levels in Kolkata", Some("Kolkata")),
    ("Monsoon flooding across Kerala", Some("Kerala")),
    ("River overflow in Assam", Some("Assam")),
    ("Flood situation in Jakarta today", Some("Jakarta")),
    ("Typhoon damage around Manila", Some("Manila")),
    ("Latest satellite image of Bangkok", Some("Bangkok")),
    ("Hurricane flooding in Houston", Some("Houston")),
    ("Storm surge in New Orleans", Some("New Orleans")),
    ("Flooded streets in new york city", Some("New York")),
    ("Flood map for Brisbane", Some("Brisbane")),
    ("hello there", None),
    ("Flooding near Delta Junction", Some("Delta Junction")),
    ("Flash floods in Londn", Some("London")),
    ("Is it raining in Gotham City", None),
];

/// Twenty labelled queries exercising clean names, misspellings, aliases,
/// multi-word places, fictional places and queries without a place.
pub fn bundled_cases() -> Vec<InterfaceCase> {
    BUNDLED_CASES
        .iter()
        .map(|(q, e)| InterfaceCase {
            query: q.to_string(),
            expected: e.map(str::to_owned).into(),
        })
        .collect()
}
