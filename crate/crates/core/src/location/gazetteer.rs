use std::collections::HashSet;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{ExtractionMethod, Geocoder, LocationCandidate, LocationError, LocationExtractor};
use crate::geo::GeoPoint;

/// Shortest phrase, in characters, that the fuzzy matcher will consider.
const MIN_PHRASE_CHARS: usize = 3;
/// Confidence assigned to the capitalized-word fallback.
const FALLBACK_CONFIDENCE: f64 = 0.5;
const LOCATIVE_WORDS: [&str; 6] = ["in", "near", "at", "of", "for", "around"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazetteerEntry {
    #[serde(rename = "name")]
    pub canonical_name: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    #[serde(flatten)]
    pub point: GeoPoint,
}

/// Immutable list of named places. Cheap to clone.
#[derive(Debug, Clone)]
pub struct Gazetteer {
    entries: Arc<Vec<GazetteerEntry>>,
    // (normalized phrase, entry index); names and aliases alike
    keys: Arc<Vec<(String, usize)>>,
    max_words: usize,
}

const BUNDLED: [(&str, &[&str], f64, f64); 19] = [
    ("Chennai", &["Madras"], 13.0827, 80.2707),
    ("Mumbai", &["Bombay"], 19.0760, 72.8777),
    ("Kolkata", &["Calcutta"], 22.5726, 88.3639),
    ("Delhi", &["New Delhi"], 28.6139, 77.2090),
    ("Kerala", &[], 10.8505, 76.2711),
    ("Assam", &[], 26.2006, 92.9376),
    ("Jakarta", &[], -6.2088, 106.8456),
    ("Manila", &[], 14.5995, 120.9842),
    ("Bangkok", &[], 13.7563, 100.5018),
    ("Japan", &[], 36.2048, 138.2529),
    ("Tokyo", &[], 35.6762, 139.6503),
    ("Houston", &[], 29.7604, -95.3698),
    ("New Orleans", &[], 29.9511, -90.0715),
    ("New York", &["NYC"], 40.7128, -74.0060),
    ("Florida", &[], 27.6648, -81.5158),
    ("London", &[], 51.5072, -0.1276),
    ("Mount Everest", &["Everest"], 27.9881, 86.9250),
    ("Brisbane", &[], -27.4698, 153.0251),
    ("Pakistan", &[], 30.3753, 69.3451),
];

pub(crate) fn tokens(text: &str) -> Vec<&str> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).collect()
}

fn normalize(text: &str) -> String {
    tokens(text).iter().map(|t| t.to_lowercase()).collect::<Vec<_>>().join(" ")
}

impl Gazetteer {
    pub fn new(entries: Vec<GazetteerEntry>) -> Result<Self, LocationError> {
        let mut seen = HashSet::new();
        let mut keys = Vec::new();
        for (i, e) in entries.iter().enumerate() {
            let canon = normalize(&e.canonical_name);
            if canon.is_empty() {
                return Err(LocationError::Gazetteer(format!("entry {i} has an empty name")));
            }
            if !seen.insert(canon.clone()) {
                return Err(LocationError::Gazetteer(format!(
                    "duplicate name {:?}",
                    e.canonical_name
                )));
            }
            keys.push((canon, i));
            for alias in &e.aliases {
                let a = normalize(alias);
                if !a.is_empty() {
                    keys.push((a, i));
                }
            }
        }
        let max_words = keys.iter().map(|(k, _)| k.split(' ').count()).max().unwrap_or(1);
        Ok(Gazetteer {
            entries: Arc::new(entries),
            keys: Arc::new(keys),
            max_words,
        })
    }

    /// The small built-in place list used by fixtures and offline runs.
    pub fn bundled() -> Self {
        let entries = BUNDLED
            .iter()
            .map(|(name, aliases, lat, lon)| GazetteerEntry {
                canonical_name: name.to_string(),
                aliases: aliases.iter().map(|a| a.to_string()).collect(),
                point: GeoPoint::new(*lat, *lon).expect("bundled coordinates are valid"),
            })
            .collect();
        Gazetteer::new(entries).expect("bundled names are unique")
    }

    pub fn entries(&self) -> &[GazetteerEntry] {
        &self.entries
    }

    /// Parse JSON lines: `{"name", "aliases", "lat", "lon"}` per line.
    /// Blank lines are skipped.
    pub fn from_jsonl(text: &str) -> Result<Self, LocationError> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e: GazetteerEntry = serde_json::from_str(line)
                .map_err(|e| LocationError::Gazetteer(format!("line {}: {e}", n + 1)))?;
            entries.push(e);
        }
        Gazetteer::new(entries)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in self.entries.iter() {
            out.push_str(&serde_json::to_string(e).expect("entry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self, LocationError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LocationError::Gazetteer(format!("{}: {e}", path.display())))?;
        Self::from_jsonl(&text)
    }

    /// Case-insensitive exact match on the canonical name or an alias.
    pub fn lookup(&self, name: &str) -> Option<&GazetteerEntry> {
        let key = normalize(name);
        self.keys
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, i)| &self.entries[*i])
    }
}

struct Match {
    entry: usize,
    confidence: f64,
    chars: usize,
}

/// Offline extractor. Every run of up to `max_words` consecutive tokens is
/// compared with each gazetteer name and alias by Levenshtein distance `d`;
/// a phrase of `n` characters matches when `d <= ceil(n / 3)`, with
/// confidence `1 - d / max(n, len(name))`. The best match wins (confidence,
/// then phrase length, then position). With no match, a capitalized word run
/// after a locative preposition ("near Atlantis") is returned at confidence
/// 0.5 so unknown places still reach the geocoder.
#[derive(Debug, Clone)]
pub struct GazetteerExtractor {
    gazetteer: Gazetteer,
}

impl GazetteerExtractor {
    pub fn new(gazetteer: Gazetteer) -> Self {
        GazetteerExtractor { gazetteer }
    }

    fn best_match(&self, words: &[&str]) -> Option<Match> {
        let lowered: Vec<String> = words.iter().map(|w| w.to_lowercase()).collect();
        let mut best: Option<Match> = None;
        for start in 0..lowered.len() {
            for len in 1..=self.gazetteer.max_words.min(lowered.len() - start) {
                let phrase = lowered[start..start + len].join(" ");
                let chars = phrase.chars().count();
                if chars < MIN_PHRASE_CHARS {
                    continue;
                }
                let limit = chars.div_ceil(3);
                for (key, entry) in self.gazetteer.keys.iter() {
                    let d = strsim::levenshtein(&phrase, key);
                    if d > limit {
                        continue;
                    }
                    let longest = chars.max(key.chars().count());
                    let confidence = 1.0 - d as f64 / longest as f64;
                    let better = match &best {
                        None => true,
                        Some(b) => {
                            confidence > b.confidence
                                || (confidence == b.confidence && chars > b.chars)
                        }
                    };
                    if better {
                        best = Some(Match {
                            entry: *entry,
                            confidence,
                            chars,
                        });
                    }
                }
            }
        }
        best
    }
}

fn capitalized(word: &str) -> bool {
    word.chars().next().is_some_and(char::is_uppercase)
}

fn locative_fallback(words: &[&str]) -> Option<String> {
    let i = (0..words.len().saturating_sub(1)).find(|&i| {
        LOCATIVE_WORDS.contains(&words[i].to_lowercase().as_str()) && capitalized(words[i + 1])
    })?;
    let run: Vec<&str> = words[i + 1..].iter().take_while(|w| capitalized(w)).copied().collect();
    Some(run.join(" "))
}

impl LocationExtractor for GazetteerExtractor {
    fn extract(&self, text: &str) -> Result<LocationCandidate, LocationError> {
        let words = tokens(text);
        if let Some(m) = self.best_match(&words) {
            let name = &self.gazetteer.entries[m.entry].canonical_name;
            return LocationCandidate::new(name, m.confidence, ExtractionMethod::Gazetteer);
        }
        match locative_fallback(&words) {
            Some(name) => LocationCandidate::new(&name, FALLBACK_CONFIDENCE, ExtractionMethod::Gazetteer),
            None => Err(LocationError::NoLocationFound),
        }
    }
}

/// Exact lookup in a gazetteer; unknown names are `NotFound`.
#[derive(Debug, Clone)]
pub struct GazetteerGeocoder {
    gazetteer: Gazetteer,
}

impl GazetteerGeocoder {
    pub fn new(gazetteer: Gazetteer) -> Self {
        GazetteerGeocoder { gazetteer }
    }
}

impl Geocoder for GazetteerGeocoder {
    fn geocode(&self, name: &str) -> Result<GeoPoint, LocationError> {
        self.gazetteer
            .lookup(name)
            .map(|e| e.point)
            .ok_or_else(|| LocationError::NotFound(name.to_owned()))
    }
}
