//! Flood probability maps from scenes, either through a UNet forward pass or
//! the classical water-index baseline, plus the tooling around them:
//! binarization, overlays, layer ablation and activation statistics.

pub mod classical;
pub mod ops;
pub mod tensor;
pub mod unet;
pub mod weights;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use classical::{otsu_threshold, water_index, ClassicalIndex};
pub use ops::{binarize, overlay, DEFAULT_OVERLAY_ALPHA, DEFAULT_OVERLAY_COLOR};
pub use tensor::{conv2d, Kernel, Tensor};
pub use unet::{UNet, UNetConfig};
pub use weights::{WeightArchive, WeightEntry, WeightError};

use crate::raster::{ImageRaster, ProbabilityMap, RasterError};

#[derive(Debug, Error)]
pub enum SegmentationError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("weights do not match the network: {0}")]
    WeightMismatch(String),
    #[error("bad input dimensions: {0}")]
    BadDimensions(String),
    #[error("channel {channel} not present (image has {available})")]
    BadChannel { channel: usize, available: usize },
    #[error("histogram is empty")]
    EmptyHistogram,
    #[error("unknown layer {0:?}")]
    UnknownLayer(String),
    #[error("threshold {0} must lie strictly between 0 and 1")]
    InvalidThreshold(f32),
    #[error("operation requires a UNet engine")]
    NotUnet,
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Weights(#[from] WeightError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Unet,
    Classical,
}

#[derive(Debug, Clone, PartialEq)]
enum Model {
    Unet(UNet),
    Classical(ClassicalIndex),
}

/// An immutable segmentation model. Output maps always share the input's
/// dimensions and lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationEngine {
    name: String,
    model: Model,
}

/// Summary of one layer's output during a forward pass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerActivation {
    pub name: String,
    pub shape: [usize; 3],
    pub mean: f64,
    /// Share of outputs with `|v| <= NEAR_ZERO`.
    pub near_zero_fraction: f64,
}

pub const NEAR_ZERO: f32 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivationStats {
    pub layers: Vec<LayerActivation>,
}

impl LayerActivation {
    pub fn from_tensor(name: &str, t: &Tensor) -> Self {
        let n = t.data().len().max(1) as f64;
        let sum: f64 = t.data().iter().map(|v| *v as f64).sum();
        let zeros = t.data().iter().filter(|v| v.abs() <= NEAR_ZERO).count();
        LayerActivation {
            name: name.to_owned(),
            shape: t.shape(),
            mean: sum / n,
            near_zero_fraction: zeros as f64 / n,
        }
    }
}

impl SegmentationEngine {
    pub fn unet(
        name: impl Into<String>,
        config: UNetConfig,
        weights: &WeightArchive,
    ) -> Result<Self, SegmentationError> {
        Ok(SegmentationEngine {
            name: name.into(),
            model: Model::Unet(UNet::new(config, weights)?),
        })
    }

    pub fn classical(name: impl Into<String>, index: ClassicalIndex) -> Self {
        SegmentationEngine {
            name: name.into(),
            model: Model::Classical(index),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> EngineKind {
        match self.model {
            Model::Unet(_) => EngineKind::Unet,
            Model::Classical(_) => EngineKind::Classical,
        }
    }

    pub fn as_unet(&self) -> Option<&UNet> {
        match &self.model {
            Model::Unet(u) => Some(u),
            Model::Classical(_) => None,
        }
    }

    /// Ablatable layer names, in forward order. Empty for the classical engine.
    pub fn layer_names(&self) -> Vec<String> {
        self.as_unet().map(UNet::layer_names).unwrap_or_default()
    }

    /// Spatial multiple the input must satisfy.
    pub fn size_multiple(&self) -> usize {
        self.as_unet().map(|u| u.config().size_multiple()).unwrap_or(1)
    }

    pub fn predict(&self, img: &ImageRaster) -> Result<ProbabilityMap, SegmentationError> {
        match &self.model {
            Model::Unet(u) => u.predict(img),
            Model::Classical(c) => c.predict(img),
        }
    }

    /// New engine with `layer`'s weights and biases zeroed. `self` is untouched.
    pub fn ablate(&self, layer: &str) -> Result<SegmentationEngine, SegmentationError> {
        match &self.model {
            Model::Unet(u) => Ok(SegmentationEngine {
                name: format!("{} -{layer}", self.name),
                model: Model::Unet(u.with_layer_zeroed(layer)?),
            }),
            Model::Classical(_) => Err(SegmentationError::UnknownLayer(layer.to_owned())),
        }
    }

    pub fn activation_stats(&self, img: &ImageRaster) -> Result<ActivationStats, SegmentationError> {
        let u = self.as_unet().ok_or(SegmentationError::NotUnet)?;
        let mut layers = Vec::new();
        u.forward_observed(img, |name, t| layers.push(LayerActivation::from_tensor(name, t)))?;
        Ok(ActivationStats { layers })
    }
}
