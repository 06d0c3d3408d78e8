//! Core of the flood-mapping pipeline: geographic and raster primitives,
//! place-name resolution, scene retrieval, segmentation engines and the
//! evaluation harness.

pub mod evaluation;
pub mod geo;
pub mod imagery;
pub mod location;
pub mod pipeline;
pub mod raster;
pub mod segmentation;
pub mod synth;
#[cfg(test)]
mod testutil;

pub use geo::{bbox_around, BoundingBox, GeoError, GeoPoint};
pub use raster::{BinaryMask, ImageRaster, ProbabilityMap, RasterError};
