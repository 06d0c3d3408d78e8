use std::path::Path;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use floodlense_core::raster::decode_png;
use floodlense_core::segmentation::EngineKind;
use floodlense_core::synth::{generate, FixtureLayout, SynthOptions};
use floodlense_service::{router, AppState, QueryResult, SegmentResponse, ServiceConfig};
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

const BASE: &str = "http://localhost/images";

fn fixtures(root: &Path) -> FixtureLayout {
    let layout = FixtureLayout::new(root);
    let opts = SynthOptions {
        dataset_size: 1,
        dataset_px: 16,
        scene_width: 80,
        scene_height: 72,
        ..SynthOptions::default()
    };
    generate(&layout, &opts).unwrap();
    layout
}

fn app(layout: &FixtureLayout, weights: &Path) -> Router {
    let cfg = ServiceConfig {
        image_dir: layout.images(),
        base_url: Some(BASE.into()),
        gazetteer_path: layout.gazetteer(),
        tile_store: layout.tiles(),
        engine: EngineKind::Unet,
        weight_path: Some(weights.to_owned()),
        image_size: 64,
        ..ServiceConfig::default()
    };
    router(AppState::from_config(cfg).unwrap())
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, body)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Vec<u8>) {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post_query(app: &Router, body: &str) -> (StatusCode, Vec<u8>) {
    let req = Request::post("/query")
        .header("content-type", "application/json")
        .body(Body::from(body.to_owned()))
        .unwrap();
    send(app, req).await
}

fn json(body: &[u8]) -> Value {
    serde_json::from_slice(body).unwrap()
}

/// Fetch a stored image through the service and decode it.
async fn fetch_png(app: &Router, url: &str) -> Vec<u8> {
    let name = url.strip_prefix(&format!("{BASE}/")).expect("url under base");
    let (status, bytes) = get(app, &format!("/images/{name}")).await;
    assert_eq!(status, StatusCode::OK);
    decode_png(&bytes).expect("decodable PNG");
    bytes
}

#[tokio::test]
async fn download_image_contract() {
    let d = tempfile::tempdir().unwrap();
    let layout = fixtures(d.path());
    let app = app(&layout, &layout.zero_weights());

    let (status, body) = get(&app, "/download_image").await;
    assert_eq!(status, StatusCode::OK);
    let url = json(&body)["image_url"].as_str().unwrap().to_owned();
    let served = fetch_png(&app, &url).await;
    let name = url.rsplit('/').next().unwrap();
    assert_eq!(served, std::fs::read(layout.images().join(name)).unwrap());

    let (status, _) = get(&app, "/download_image?lat=19.0760&lon=72.8777").await;
    assert_eq!(status, StatusCode::OK);
    let (status, body) = get(&app, "/download_image?lat=91&lon=0").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(json(&body)["error"].is_string());
    let (status, _) = get(&app, "/download_image?lat=abc").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = get(&app, "/download_image?lat=-33.9&lon=18.4").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn segment_with_zero_weights() {
    let d = tempfile::tempdir().unwrap();
    let layout = fixtures(d.path());
    let app = app(&layout, &layout.zero_weights());

    let (status, body) = get(&app, "/segment?threshold=0.7").await;
    assert_eq!(status, StatusCode::OK);
    let r: SegmentResponse = serde_json::from_slice(&body).unwrap();
    assert_eq!(r.flood_fraction, 0.0);

    let (_, body) = get(&app, "/segment?threshold=0.5").await;
    let r: SegmentResponse = serde_json::from_slice(&body).unwrap();
    assert_eq!(r.flood_fraction, 1.0);
    fetch_png(&app, &r.image_url).await;
    fetch_png(&app, &r.overlay_url).await;

    for bad in ["/segment?threshold=1.5", "/segment?threshold=0", "/segment?lat=13&lon=200"] {
        assert_eq!(get(&app, bad).await.0, StatusCode::BAD_REQUEST, "{bad}");
    }
}

#[tokio::test]
async fn segment_is_deterministic_and_concurrent() {
    let d = tempfile::tempdir().unwrap();
    let layout = fixtures(d.path());
    let app = app(&layout, &layout.random_weights());
    let calls = (0..6).map(|_| {
        let app = app.clone();
        async move { get(&app, "/segment?lat=13.0827&lon=80.2707&threshold=0.5").await }
    });
    let results = futures_join(calls).await;
    let parsed: Vec<SegmentResponse> = results
        .iter()
        .map(|(s, b)| {
            assert_eq!(*s, StatusCode::OK);
            serde_json::from_slice(b).unwrap()
        })
        .collect();
    let urls: std::collections::HashSet<_> = parsed.iter().map(|r| r.overlay_url.clone()).collect();
    assert_eq!(urls.len(), parsed.len());
    assert!(parsed.iter().all(|r| r.flood_fraction == parsed[0].flood_fraction));
    let overlays: Vec<Vec<u8>> = parsed
        .iter()
        .map(|r| std::fs::read(layout.images().join(r.overlay_url.rsplit('/').next().unwrap())).unwrap())
        .collect();
    assert!(overlays.iter().all(|o| *o == overlays[0]));
}

async fn futures_join<F: std::future::Future<Output = (StatusCode, Vec<u8>)> + Send + 'static>(
    futs: impl Iterator<Item = F>,
) -> Vec<(StatusCode, Vec<u8>)> {
    let handles: Vec<_> = futs.map(tokio::spawn).collect();
    let mut out = Vec::new();
    for h in handles {
        out.push(h.await.unwrap());
    }
    out
}

#[tokio::test]
async fn query_endpoint() {
    let d = tempfile::tempdir().unwrap();
    let layout = fixtures(d.path());
    let app = app(&layout, &layout.random_weights());

    let (status, body) = post_query(&app, r#"{"text": "What is the Flood Situation in Chhheennai"}"#).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    let r: QueryResult = serde_json::from_slice(&body).unwrap();
    assert_eq!(r.location_name, "Chennai");
    assert_eq!((r.lat, r.lon), (13.0827, 80.2707));
    assert!((0.0..=1.0).contains(&r.flood_fraction));
    assert!(r.message.contains("Chennai"));
    fetch_png(&app, &r.image_url).await;
    fetch_png(&app, &r.overlay_url).await;

    let (status, body) = post_query(&app, r#"{"text": "Flood risk near Atlantis"}"#).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(json(&body)["error"].as_str().unwrap().contains("Atlantis"));
    assert_eq!(post_query(&app, r#"{"text": "hello there"}"#).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(post_query(&app, "{}").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(post_query(&app, "text=chennai").await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn image_route_guards() {
    let d = tempfile::tempdir().unwrap();
    let layout = fixtures(d.path());
    let app = app(&layout, &layout.zero_weights());
    assert_eq!(get(&app, "/images/..%2F..%2Fetc%2Fpasswd").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, "/images/..").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, "/images/gazetteer.jsonl").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(get(&app, "/images/sat_1700000000_abcdef.png").await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn cors_preflight() {
    let d = tempfile::tempdir().unwrap();
    let layout = fixtures(d.path());
    let app = app(&layout, &layout.zero_weights());
    let req = Request::builder()
        .method("OPTIONS")
        .uri("/query")
        .header("origin", "http://localhost:5173")
        .header("access-control-request-method", "POST")
        .body(Body::empty())
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert_eq!(resp.headers()["access-control-allow-origin"], "*");
}

#[test]
fn startup_rejects_bad_config() {
    let d = tempfile::tempdir().unwrap();
    let layout = fixtures(d.path());
    let cfg = ServiceConfig {
        gazetteer_path: layout.gazetteer(),
        tile_store: layout.tiles(),
        weight_path: Some(d.path().join("missing.flwt")),
        ..ServiceConfig::default()
    };
    assert!(AppState::from_config(cfg).is_err());
    let cfg = ServiceConfig {
        gazetteer_path: d.path().join("missing.jsonl"),
        engine: EngineKind::Classical,
        ..ServiceConfig::default()
    };
    assert!(AppState::from_config(cfg).is_err());
}
