//! HTTP front end for the flood pipeline.
//!
//! Routes:
//! - `GET /download_image?lat&lon` -> `{"image_url"}`
//! - `GET /segment?lat&lon&threshold` -> `{"image_url", "overlay_url", "flood_fraction"}`
//! - `POST /query {"text"}` -> [`QueryResult`]
//! - `GET /images/{name}` -> stored PNG

pub mod config;
mod error;

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use floodlense_core::imagery::{is_store_name, FixtureStore, ImageStore, SentinelHubClient, TileBackend};
use floodlense_core::location::{
    extract_location, geocode, Gazetteer, GazetteerExtractor, GazetteerGeocoder, Geocoder, LlmExtractor,
    LocationError, LocationExtractor, NominatimClient, OpenAiChatClient,
};
use floodlense_core::pipeline::{load_engine, Pipeline};
use floodlense_core::segmentation::SegmentationError;
use floodlense_core::GeoPoint;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tower_http::cors::{AllowOrigin, CorsLayer};

pub use config::{BackendMode, ConfigError, ServiceConfig};
pub use error::ApiError;

#[derive(Debug, Error)]
pub enum StartupError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Location(#[from] LocationError),
    #[error(transparent)]
    Engine(#[from] SegmentationError),
    #[error("cannot bind port {0}: {1}")]
    Bind(u16, #[source] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownloadResponse {
    pub image_url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentResponse {
    pub image_url: String,
    pub overlay_url: String,
    pub flood_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub location_name: String,
    pub lat: f64,
    pub lon: f64,
    pub image_url: String,
    pub overlay_url: String,
    pub flood_fraction: f64,
    pub message: String,
}

/// Everything a handler needs; cheap to clone, immutable after startup.
#[derive(Clone)]
pub struct AppState {
    pub config: Arc<ServiceConfig>,
    pub pipeline: Pipeline,
    pub extractor: Arc<dyn LocationExtractor>,
    pub geocoder: Arc<dyn Geocoder>,
}

impl AppState {
    pub fn from_config(config: ServiceConfig) -> Result<Self, StartupError> {
        config.validate()?;
        let engine = load_engine(config.engine, config.weight_path.as_deref())?;
        let store = ImageStore::new(&config.image_dir, &config.base_url());
        let (tiles, extractor, geocoder): (Arc<dyn TileBackend>, Arc<dyn LocationExtractor>, Arc<dyn Geocoder>) =
            match config.backend_mode {
                BackendMode::Fixture => {
                    let gazetteer = Gazetteer::load(&config.gazetteer_path)?;
                    (
                        Arc::new(FixtureStore::new(&config.tile_store)),
                        Arc::new(GazetteerExtractor::new(gazetteer.clone())),
                        Arc::new(GazetteerGeocoder::new(gazetteer)),
                    )
                }
                BackendMode::Live => {
                    let sh_key = config.sentinel_instance_id.as_deref().unwrap_or_default();
                    let llm_key = config.llm_api_key.as_deref().unwrap_or_default();
                    (
                        Arc::new(SentinelHubClient::new(&config.sentinel_url, sh_key)),
                        Arc::new(LlmExtractor::new(OpenAiChatClient::new(
                            &config.llm_url,
                            llm_key,
                            &config.llm_model,
                        ))),
                        Arc::new(NominatimClient::new(&config.nominatim_url)),
                    )
                }
            };
        let pipeline = Pipeline::new(
            tiles,
            store,
            Arc::new(engine),
            config.half_extent_deg,
            config.image_size,
        );
        Ok(AppState {
            config: Arc::new(config),
            pipeline,
            extractor,
            geocoder,
        })
    }
}

pub fn router(state: AppState) -> Router {
    let origin = match &state.config.cors_origin {
        Some(o) => HeaderValue::from_str(o)
            .map(AllowOrigin::exact)
            .unwrap_or_else(|_| AllowOrigin::any()),
        None => AllowOrigin::any(),
    };
    let cors = CorsLayer::new()
        .allow_origin(origin)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    Router::new()
        .route("/download_image", get(download_image))
        .route("/segment", get(segment))
        .route("/query", post(query))
        .route("/images/{name}", get(image))
        .layer(cors)
        .with_state(state)
}

/// Bind `0.0.0.0:<port>` and serve until the process is stopped.
pub async fn serve(state: AppState) -> Result<(), StartupError> {
    let port = state.config.port;
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port))
        .await
        .map_err(|e| StartupError::Bind(port, e))?;
    tracing::info!(port, "listening");
    axum::serve(listener, router(state))
        .await
        .map_err(|e| StartupError::Bind(port, e))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

fn parse_f64(q: &HashMap<String, String>, key: &str) -> Result<Option<f64>, ApiError> {
    q.get(key)
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| ApiError::bad_request(format!("{key}={v:?} is not a number")))
        })
        .transpose()
}

fn point_param(q: &HashMap<String, String>, default: GeoPoint) -> Result<GeoPoint, ApiError> {
    let lat = parse_f64(q, "lat")?.unwrap_or(default.lat());
    let lon = parse_f64(q, "lon")?.unwrap_or(default.lon());
    GeoPoint::new(lat, lon).map_err(|e| ApiError::bad_request(e.to_string()))
}

fn threshold_param(q: &HashMap<String, String>, default: f32) -> Result<f32, ApiError> {
    match parse_f64(q, "threshold")? {
        None => Ok(default),
        Some(t) if t > 0.0 && t < 1.0 => Ok(t as f32),
        Some(t) => Err(ApiError::bad_request(format!("threshold {t} outside (0, 1)"))),
    }
}

async fn download_image(
    State(s): State<AppState>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Json<DownloadResponse>, ApiError> {
    let point = point_param(&q, s.config.default_point)?;
    let started = Instant::now();
    let d = blocking(move || Ok(s.pipeline.download(point)?)).await?;
    tracing::info!(
        lat = point.lat(),
        lon = point.lon(),
        bbox = ?d.bbox.as_array(),
        scene = d.scene.source_id(),
        ms = started.elapsed().as_millis() as u64,
        "download_image"
    );
    Ok(Json(DownloadResponse { image_url: d.image.url }))
}

async fn segment(
    State(s): State<AppState>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Json<SegmentResponse>, ApiError> {
    let point = point_param(&q, s.config.default_point)?;
    let threshold = threshold_param(&q, s.config.default_threshold)?;
    let started = Instant::now();
    let r = blocking(move || Ok(s.pipeline.segment(point, threshold)?)).await?;
    tracing::info!(
        lat = point.lat(),
        lon = point.lon(),
        threshold,
        bbox = ?r.bbox.as_array(),
        flood_fraction = r.flood_fraction,
        ms = started.elapsed().as_millis() as u64,
        "segment"
    );
    Ok(Json(SegmentResponse {
        image_url: r.image.url,
        overlay_url: r.overlay.url,
        flood_fraction: r.flood_fraction,
    }))
}

fn query_text(body: &[u8]) -> Result<String, ApiError> {
    let v: serde_json::Value =
        serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed JSON body: {e}")))?;
    match v.get("text").and_then(|t| t.as_str()) {
        Some(t) if !t.trim().is_empty() => Ok(t.to_owned()),
        _ => Err(ApiError::bad_request("body must be {\"text\": <non-empty string>}")),
    }
}

async fn query(State(s): State<AppState>, body: Bytes) -> Result<Json<QueryResult>, ApiError> {
    let text = query_text(&body)?;
    let started = Instant::now();
    let threshold = s.config.default_threshold;
    let logged_text = text.clone();
    let (name, point, r) = blocking(move || {
        let candidate = extract_location(&text, s.extractor.as_ref())?;
        let point = geocode(candidate.name(), s.geocoder.as_ref())?;
        let r = s.pipeline.segment(point, threshold)?;
        Ok((candidate.name().to_owned(), point, r))
    })
    .await?;
    tracing::info!(
        query = %logged_text,
        location = %name,
        bbox = ?r.bbox.as_array(),
        flood_fraction = r.flood_fraction,
        ms = started.elapsed().as_millis() as u64,
        "query"
    );
    let message = format!(
        "Water covers {:.1}% of the latest scene of {name} ({}).",
        r.flood_fraction * 100.0,
        r.scene.acquired_at().format("%Y-%m-%d")
    );
    Ok(Json(QueryResult {
        location_name: name,
        lat: point.lat(),
        lon: point.lon(),
        image_url: r.image.url,
        overlay_url: r.overlay.url,
        flood_fraction: r.flood_fraction,
        message,
    }))
}

async fn image(State(s): State<AppState>, Path(name): Path<String>) -> Result<Response, ApiError> {
    if !is_store_name(&name) {
        return Err(ApiError::bad_request(format!("invalid image name {name:?}")));
    }
    let path = s.pipeline.store().dir().join(&name);
    match tokio::fs::read(&path).await {
        Ok(bytes) => Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(ApiError::new(StatusCode::NOT_FOUND, format!("no image {name}")))
        }
        Err(e) => Err(ApiError::internal(e.to_string())),
    }
}
