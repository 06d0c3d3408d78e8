//! Published FloodNet and Sentinel results for the RDN, ViT and UNet
//! segmenters. The trained models and datasets behind these numbers do not
//! ship with this crate; the tables are kept as report fixtures.

use super::metrics::METRIC_LABELS;
use super::table::Table;

fn labels(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn grid(rows: &[&[f64]]) -> Vec<Vec<Option<f64>>> {
    rows.iter().map(|r| r.iter().map(|v| Some(*v)).collect()).collect()
}

const SWEEP_COLUMNS: [&str; 5] = ["Threshold 0.3", "0.4", "0.5", "0.6", "0.7"];

pub fn floodnet_metrics() -> Table {
    Table::new(
        "Performance Metrics",
        "Metric",
        labels(&["RDN", "ViT", "UNet"]),
        labels(&METRIC_LABELS),
        grid(&[
            &[0.49412, 0.45401, 0.42273],
            &[0.56414, 0.52523, 0.47872],
            &[0.57131, 0.68377, 0.57269],
            &[0.59470, 0.51801, 0.49207],
            &[0.56414, 0.52523, 0.47872],
            &[0.90969, 0.89435, 0.90674],
        ]),
    )
    .expect("static grid")
}

pub fn floodnet_inference_time() -> Table {
    Table::new(
        "Inference Time on FloodNet Data",
        "Model",
        labels(&["RDN", "ViT", "UNet"]),
        labels(&["Inference Time (ms)"]),
        grid(&[&[10.41157, 66.04217, 10.70199]]),
    )
    .expect("static grid")
}

pub fn sentinel_unet_metrics() -> Table {
    Table::new(
        "Performance Metrics on Sentinel Data (UNet)",
        "Metric",
        labels(&["Value"]),
        labels(&METRIC_LABELS),
        grid(&[&[0.65117], &[0.76080], &[0.77475], &[0.78513], &[0.76080], &[0.87711]]),
    )
    .expect("static grid")
}

fn sweep(title: &str, rows: &[&[f64]]) -> Table {
    Table::new(title, "Metric", labels(&SWEEP_COLUMNS), labels(&METRIC_LABELS), grid(rows))
        .expect("static grid")
}

pub fn floodnet_unet_sweep() -> Table {
    sweep(
        "UNet Performance Metrics",
        &[
            &[0.43301, 0.42650, 0.42273, 0.41835, 0.41302],
            &[0.49098, 0.48274, 0.47872, 0.47429, 0.46890],
            &[0.57501, 0.56790, 0.57269, 0.57329, 0.57311],
            &[0.51038, 0.49959, 0.49207, 0.48446, 0.47623],
            &[0.49098, 0.48274, 0.47872, 0.47429, 0.46890],
            &[0.90683, 0.90672, 0.90674, 0.90644, 0.90575],
        ],
    )
}

pub fn floodnet_rdn_sweep() -> Table {
    sweep(
        "Residual Dense Net Performance Metrics",
        &[
            &[0.49718, 0.49627, 0.49412, 0.49215, 0.48899],
            &[0.56819, 0.56676, 0.56414, 0.56174, 0.55899],
            &[0.56014, 0.56697, 0.57131, 0.57582, 0.58092],
            &[0.61566, 0.60475, 0.59470, 0.58495, 0.57423],
            &[0.56819, 0.56676, 0.56414, 0.56174, 0.55899],
            &[0.90709, 0.90868, 0.90969, 0.91063, 0.91081],
        ],
    )
}

pub fn floodnet_vit_sweep() -> Table {
    sweep(
        "Vision Transformer Performance Metrics",
        &[
            &[0.46295, 0.45869, 0.45401, 0.44926, 0.44506],
            &[0.53512, 0.53039, 0.52523, 0.51969, 0.51530],
            &[0.67567, 0.67880, 0.68377, 0.68568, 0.63724],
            &[0.53205, 0.52533, 0.51801, 0.51019, 0.50293],
            &[0.53512, 0.53039, 0.52523, 0.51969, 0.51530],
            &[0.89621, 0.89532, 0.89435, 0.89332, 0.89238],
        ],
    )
}

pub fn floodnet_ablation() -> Table {
    Table::new(
        "Ablation Study Results for RDN, ViT, and UNet Models on FloodNet Dataset",
        "Model / Ablated Part",
        labels(&["Precision", "Recall", "F1-Score"]),
        labels(&[
            "RDN Block 0 Layer 0",
            "RDN Block 0 Layer 1",
            "RDN Block 0 Layer 2",
            "RDN Block 1 Layer 0",
            "RDN Block 1 Layer 1",
            "RDN Block 1 Layer 2",
            "ViT Decoder Layers 0,1,2,3",
            "UNet enc1",
        ]),
        grid(&[
            &[0.5113, 0.5812, 0.5239],
            &[0.5090, 0.5842, 0.5276],
            &[0.5136, 0.5541, 0.5120],
            &[0.4476, 0.5686, 0.4639],
            &[0.4438, 0.5040, 0.4382],
            &[0.4220, 0.5580, 0.4425],
            &[0.0, 0.0, 0.0],
            &[0.1842, 0.8, 0.2719],
        ]),
    )
    .expect("static grid")
}

/// Every fixture table with a stable file stem.
pub fn all() -> Vec<(&'static str, Table)> {
    vec![
        ("floodnet_metrics", floodnet_metrics()),
        ("floodnet_inference_time", floodnet_inference_time()),
        ("sentinel_unet_metrics", sentinel_unet_metrics()),
        ("floodnet_unet_sweep", floodnet_unet_sweep()),
        ("floodnet_rdn_sweep", floodnet_rdn_sweep()),
        ("floodnet_vit_sweep", floodnet_vit_sweep()),
        ("floodnet_ablation", floodnet_ablation()),
    ]
}
