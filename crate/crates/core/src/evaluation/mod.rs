//! Quantitative evaluation: confusion-count metrics, threshold sweeps,
//! inference timing, layer ablation, dataset loading and table rendering.
//!
//! Dataset-level metrics are micro-aggregated: confusion counts are summed
//! over every image first and the metrics are computed once on the totals.
//! Per-image averages are never taken.

pub mod dataset;
pub mod metrics;
pub mod reference;
pub mod sweep;
pub mod table;
pub mod timing;

use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use dataset::{load_dataset, DatasetSpec, Sample};
pub use metrics::{confusion, metrics, ConfusionCounts, MetricsReport, METRIC_LABELS};
pub use sweep::{threshold_sweep, SweepEntry, SweepReport, DEFAULT_THRESHOLDS};
pub use table::{render_table, Table};
pub use timing::{time_inference, Clock, MonotonicClock, TimingReport};

use crate::segmentation::{binarize, SegmentationEngine, SegmentationError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("image {0:?} has no matching mask")]
    MissingMask(String),
    #[error("cannot decode {0}: {1}")]
    Decode(PathBuf, String),
    #[error("{0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),
    #[error("{0}")]
    EmptyInput(String),
    #[error(transparent)]
    Segmentation(#[from] SegmentationError),
}

/// Threshold used for single-point evaluation and ablation runs.
pub const EVAL_THRESHOLD: f32 = 0.5;

/// Predict every sample, binarize at `threshold`, and sum confusion counts.
pub fn evaluate(
    engine: &SegmentationEngine,
    samples: &[Sample],
    threshold: f32,
) -> Result<ConfusionCounts, EvalError> {
    let per_sample = samples
        .par_iter()
        .map(|s| {
            let pm = engine.predict(&s.image)?;
            confusion(&binarize(&pm, threshold)?, &s.mask)
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(per_sample.into_iter().sum())
}

/// Predict every sample once and sweep the resulting maps.
pub fn sweep_engine(
    engine: &SegmentationEngine,
    samples: &[Sample],
    thresholds: &[f32],
) -> Result<SweepReport, EvalError> {
    let maps = samples
        .par_iter()
        .map(|s| engine.predict(&s.image))
        .collect::<Result<Vec<_>, _>>()?;
    let gts: Vec<_> = samples.iter().map(|s| s.mask.clone()).collect();
    threshold_sweep(&maps, &gts, thresholds)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub layer: String,
    pub counts: ConfusionCounts,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

/// Ablate each layer in turn and evaluate at [`EVAL_THRESHOLD`].
pub fn run_ablation(
    engine: &SegmentationEngine,
    layers: &[String],
    samples: &[Sample],
) -> Result<AblationReport, EvalError> {
    // fail before doing any work if a layer name is wrong
    let known = engine.layer_names();
    if let Some(bad) = layers.iter().find(|l| !known.contains(l)) {
        return Err(SegmentationError::UnknownLayer(bad.clone()).into());
    }
    let rows = layers
        .iter()
        .map(|layer| {
            let ablated = engine.ablate(layer)?;
            let counts = evaluate(&ablated, samples, EVAL_THRESHOLD)?;
            Ok(AblationRow {
                layer: layer.clone(),
                counts,
                metrics: metrics(&counts),
            })
        })
        .collect::<Result<_, EvalError>>()?;
    Ok(AblationReport { rows })
}

impl AblationReport {
    /// One row per ablated layer with precision, recall and F1.
    pub fn to_table(&self, title: &str) -> Table {
        let values = self
            .rows
            .iter()
            .map(|r| vec![r.metrics.precision, r.metrics.recall, r.metrics.f1])
            .collect();
        Table::new(
            title,
            "Ablated Part",
            vec!["Precision".into(), "Recall".into(), "F1-Score".into()],
            self.rows.iter().map(|r| r.layer.clone()).collect(),
            values,
        )
        .expect("grid built from rows")
    }
}

/// Metric rows for one or more named reports, one column each.
pub fn metrics_table(title: &str, reports: &[(&str, MetricsReport)]) -> Table {
    let values = (0..METRIC_LABELS.len())
        .map(|m| reports.iter().map(|(_, r)| r.values()[m]).collect())
        .collect();
    Table::new(
        title,
        "Metric",
        reports.iter().map(|(n, _)| n.to_string()).collect(),
        METRIC_LABELS.iter().map(|s| s.to_string()).collect(),
        values,
    )
    .expect("grid built from reports")
}

/// Timing reports as a single `Inference Time (ms)` row.
pub fn timing_table(title: &str, reports: &[(&str, TimingReport)]) -> Table {
    Table::new(
        title,
        "Model",
        reports.iter().map(|(n, _)| n.to_string()).collect(),
        vec!["Inference Time (ms)".into(), "Std Dev (ms)".into()],
        vec![
            reports.iter().map(|(_, r)| Some(r.mean_ms)).collect(),
            reports.iter().map(|(_, r)| Some(r.std_ms)).collect(),
        ],
    )
    .expect("grid built from reports")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{normalize, BinaryMask, ImageRaster};
    use crate::segmentation::UNetConfig;

    fn tiny() -> UNetConfig {
        UNetConfig {
            levels: 2,
            base_channels: 2,
            in_channels: 3,
            out_channels: 1,
        }
    }

    fn samples() -> Vec<Sample> {
        (0..2)
            .map(|k| {
                let data = (0..8 * 8 * 3).map(|i| ((i * 31 + k * 101) % 256) as u8).collect();
                let image = normalize(&ImageRaster::from_u8(8, 8, 3, data).unwrap()).unwrap();
                let mask = BinaryMask::new(8, 8, (0..64).map(|i| (i + k) % 4 == 0).collect()).unwrap();
                Sample {
                    stem: format!("s{k}"),
                    image,
                    mask,
                }
            })
            .collect()
    }

    #[test]
    fn head_ablation_is_all_positive() {
        let e = SegmentationEngine::unet("u", tiny(), &tiny().random_weights(2)).unwrap();
        let s = samples();
        let r = run_ablation(&e, &["head".into()], &s).unwrap();
        assert_eq!(r.rows.len(), 1);
        let m = r.rows[0].metrics;
        assert_eq!(m.recall, Some(1.0));
        let positives: usize = s.iter().map(|x| x.mask.count_positive()).sum();
        assert_eq!(m.precision, Some(positives as f64 / 128.0));
    }

    #[test]
    fn unknown_layer_fails_up_front() {
        let e = SegmentationEngine::unet("u", tiny(), &tiny().random_weights(2)).unwrap();
        let err = run_ablation(&e, &["head".into(), "nope".into()], &samples()).unwrap_err();
        assert!(matches!(err, EvalError::Segmentation(SegmentationError::UnknownLayer(_))));
    }

    #[test]
    fn ablation_table_renders_undefined() {
        let report = AblationReport {
            rows: vec![AblationRow {
                layer: "enc0.conv1".into(),
                counts: ConfusionCounts::new(0, 0, 5, 5),
                metrics: metrics(&ConfusionCounts::new(0, 0, 5, 5)),
            }],
        };
        let s = report.to_table("Ablation").render();
        assert!(s.contains("enc0.conv1   | undefined | 0.00000 | undefined"), "{s}");
    }
}
