use rayon::prelude::*;
use serde::Serialize;

use super::metrics::{confusion, metrics, ConfusionCounts, MetricsReport, METRIC_LABELS};
use super::table::Table;
use super::EvalError;
use crate::raster::{BinaryMask, ProbabilityMap};
use crate::segmentation::binarize;

pub const DEFAULT_THRESHOLDS: [f32; 5] = [0.3, 0.4, 0.5, 0.6, 0.7];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub threshold: f32,
    pub counts: ConfusionCounts,
    pub metrics: MetricsReport,
}

/// Micro-aggregated metrics per threshold, thresholds strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
}

pub fn validate_thresholds(thresholds: &[f32]) -> Result<(), EvalError> {
    if thresholds.is_empty() {
        return Err(EvalError::InvalidThresholds("no thresholds given".into()));
    }
    if let Some(t) = thresholds.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(EvalError::InvalidThresholds(format!("{t} outside (0, 1)")));
    }
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EvalError::InvalidThresholds(
            "thresholds must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// For each threshold, binarize every map, sum confusion counts over all
/// pairs, then compute metrics on the totals.
pub fn threshold_sweep(
    maps: &[ProbabilityMap],
    gts: &[BinaryMask],
    thresholds: &[f32],
) -> Result<SweepReport, EvalError> {
    validate_thresholds(thresholds)?;
    if maps.len() != gts.len() {
        return Err(EvalError::ShapeMismatch(format!(
            "{} maps vs {} ground-truth masks",
            maps.len(),
            gts.len()
        )));
    }
    let per_pair: Vec<Vec<ConfusionCounts>> = maps
        .par_iter()
        .zip(gts.par_iter())
        .map(|(pm, gt)| {
            thresholds
                .iter()
                .map(|&t| confusion(&binarize(pm, t)?, gt))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    let entries = thresholds
        .iter()
        .enumerate()
        .map(|(i, &threshold)| {
            let counts: ConfusionCounts = per_pair.iter().map(|c| c[i]).sum();
            SweepEntry {
                threshold,
                counts,
                metrics: metrics(&counts),
            }
        })
        .collect();
    Ok(SweepReport { entries })
}

impl SweepReport {
    /// Metrics as rows, thresholds as columns (`Threshold 0.3 | 0.4 | ...`).
    pub fn to_table(&self, title: &str) -> Table {
        let columns = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| {
                if i == 0 {
                    format!("Threshold {}", e.threshold)
                } else {
                    e.threshold.to_string()
                }
            })
            .collect();
        let values = (0..METRIC_LABELS.len())
            .map(|m| self.entries.iter().map(|e| e.metrics.values()[m]).collect())
            .collect();
        Table::new(
            title,
            "Metric",
            columns,
            METRIC_LABELS.iter().map(|s| s.to_string()).collect(),
            values,
        )
        .expect("grid built from entries")
    }
}
