use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use floodlense_core::imagery::ImageryError;
use floodlense_core::location::LocationError;
use floodlense_core::pipeline::PipelineError;
use floodlense_core::segmentation::SegmentationError;
use serde_json::json;

/// Error response: status plus a JSON `{"error": message}` body.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(status = %self.status, "{}", self.message);
        } else {
            tracing::info!(status = %self.status, "{}", self.message);
        }
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<LocationError> for ApiError {
    fn from(e: LocationError) -> Self {
        let status = match &e {
            LocationError::NoLocationFound => StatusCode::UNPROCESSABLE_ENTITY,
            LocationError::NotFound(_) => StatusCode::NOT_FOUND,
            LocationError::ServiceError(_) | LocationError::BackendUnavailable(_) => StatusCode::BAD_GATEWAY,
            LocationError::InvalidInput(_) => StatusCode::BAD_REQUEST,
            LocationError::Gazetteer(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let status = match &e {
            PipelineError::Geo(_) => StatusCode::BAD_REQUEST,
            PipelineError::Imagery(ImageryError::NoSceneAvailable(_)) => StatusCode::NOT_FOUND,
            PipelineError::Imagery(ImageryError::ServiceError(_)) => StatusCode::BAD_GATEWAY,
            PipelineError::Segmentation(SegmentationError::InvalidThreshold(_)) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use floodlense_core::GeoError;

    #[test]
    fn status_table() {
        let cases: Vec<(ApiError, u16)> = vec![
            (LocationError::NoLocationFound.into(), 422),
            (LocationError::NotFound("Atlantis".into()).into(), 404),
            (LocationError::ServiceError("x".into()).into(), 502),
            (LocationError::BackendUnavailable("x".into()).into(), 502),
            (PipelineError::Geo(GeoError::LatitudeOutOfRange(91.0)).into(), 400),
            (PipelineError::Imagery(ImageryError::NoSceneAvailable([0.0; 4])).into(), 404),
            (PipelineError::Imagery(ImageryError::ServiceError("x".into())).into(), 502),
            (PipelineError::Segmentation(SegmentationError::WeightMismatch("x".into())).into(), 500),
            (PipelineError::Segmentation(SegmentationError::BadDimensions("x".into())).into(), 500),
        ];
        for (err, want) in cases {
            assert_eq!(err.status.as_u16(), want, "{}", err.message);
        }
    }
}
