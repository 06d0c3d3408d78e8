use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use floodlense_core::evaluation::{
    evaluate, load_dataset, metrics, metrics_table, run_ablation, sweep_engine, time_inference, timing_table,
    DatasetSpec, MonotonicClock, Sample, Table, DEFAULT_THRESHOLDS,
};
use floodlense_core::imagery::{FixtureStore, ImageStore};
use floodlense_core::location::{
    evaluate_interface, Gazetteer, GazetteerExtractor, GazetteerGeocoder, InterfaceCase,
};
use floodlense_core::pipeline::{load_engine, segment_image, Pipeline, DEFAULT_IMAGE_SIZE};
use floodlense_core::raster::write_png;
use floodlense_core::segmentation::{EngineKind, SegmentationEngine};
use floodlense_core::synth::{generate, FixtureLayout, SynthOptions, DEFAULT_SEED};
use floodlense_core::GeoPoint;
use floodlense_service::{AppState, ServiceConfig};

#[derive(Parser)]
#[command(name = "floodlense", version, about = "Flood mapping from satellite scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Engine {
    Unet,
    Classical,
}

impl From<Engine> for EngineKind {
    fn from(e: Engine) -> Self {
        match e {
            Engine::Unet => EngineKind::Unet,
            Engine::Classical => EngineKind::Classical,
        }
    }
}

#[derive(clap::Args)]
struct EngineArgs {
    #[arg(long, value_enum, default_value = "unet")]
    engine: Engine,
    /// Weight archive for the unet engine.
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(clap::Args)]
struct DatasetArgs {
    /// Directory holding images/ and masks/.
    #[arg(long)]
    dataset: PathBuf,
    /// Side length every sample is resized to.
    #[arg(long, default_value_t = 128)]
    size: usize,
}

#[derive(clap::Args)]
struct SceneArgs {
    /// Fixture scene store root.
    #[arg(long)]
    tiles: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    lat: f64,
    #[arg(long, allow_hyphen_values = true)]
    lon: f64,
    #[arg(long, default_value_t = 0.05)]
    half_extent: f64,
    #[arg(long, default_value_t = DEFAULT_IMAGE_SIZE)]
    size: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Fetch and preprocess the latest scene for a point.
    Fetch {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Segment a scene and write the overlay.
    Segment {
        #[command(flatten)]
        scene: SceneArgs,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long, default_value_t = 0.5)]
        threshold: f32,
        /// Overlay PNG path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        mask: Option<PathBuf>,
    },
    /// Metrics on a labelled dataset at one threshold.
    Eval {
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long, default_value_t = 0.5)]
        threshold: f32,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Metrics across several thresholds.
    Sweep {
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_THRESHOLDS)]
        thresholds: Vec<f32>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Zero one UNet layer at a time and re-evaluate.
    Ablate {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        weights: PathBuf,
        /// Layers to ablate; all layers when omitted.
        #[arg(long, value_delimiter = ',')]
        layers: Vec<String>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Time inference over the dataset images.
    Bench {
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long, default_value_t = 20)]
        runs: usize,
        #[arg(long, default_value_t = 3)]
        warmups: usize,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Location extraction and geocoding rates on labelled queries.
    InterfaceEval {
        /// JSON lines of {"query", "expected"}.
        #[arg(long)]
        cases: PathBuf,
        #[arg(long)]
        gazetteer: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Write the synthetic dataset, gazetteer, scene store and weights.
    MakeFixtures {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

fn usage_error(msg: &str) -> ! {
    Cli::command().error(clap::error::ErrorKind::ArgumentConflict, msg).exit()
}

fn check_threshold(t: f32, flag: &str) {
    if !(t > 0.0 && t < 1.0) {
        usage_error(&format!("{flag} {t} must lie in (0, 1)"));
    }
}

impl EngineArgs {
    fn validate(&self) {
        if matches!(self.engine, Engine::Unet) && self.weights.is_none() {
            usage_error("--engine unet needs --weights <path>");
        }
    }

    fn load(&self) -> Result<SegmentationEngine> {
        load_engine(self.engine.into(), self.weights.as_deref()).context("loading engine")
    }
}

impl DatasetArgs {
    fn validate(&self) {
        if self.size == 0 {
            usage_error("--size must be >= 1");
        }
    }

    fn load(&self) -> Result<Vec<Sample>> {
        let samples = load_dataset(&DatasetSpec::from_root(&self.dataset, self.size))
            .with_context(|| format!("loading dataset {}", self.dataset.display()))?;
        if samples.is_empty() {
            bail!("dataset {} has no images", self.dataset.display());
        }
        tracing::info!(samples = samples.len(), size = self.size, "dataset loaded");
        Ok(samples)
    }
}

impl SceneArgs {
    fn validate(&self) -> GeoPoint {
        if self.size == 0 {
            usage_error("--size must be >= 1");
        }
        if !(self.half_extent > 0.0) {
            usage_error("--half-extent must be > 0");
        }
        GeoPoint::new(self.lat, self.lon).unwrap_or_else(|e| usage_error(&e.to_string()))
    }

    /// One-shot commands only read scenes, so nothing lands in the image store.
    fn pipeline(&self, engine: SegmentationEngine) -> Pipeline {
        Pipeline::new(
            Arc::new(FixtureStore::new(&self.tiles)),
            ImageStore::new(std::env::temp_dir(), "file://"),
            Arc::new(engine),
            self.half_extent,
            self.size,
        )
    }
}

fn emit(table: &Table, json: Option<&Path>) -> Result<()> {
    print!("{}", table.render());
    if let Some(path) = json {
        let text = serde_json::to_string_pretty(&table.to_json())?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn read_cases(path: &Path) -> Result<Vec<InterfaceCase>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}

fn service_config(path: Option<&Path>) -> Result<ServiceConfig> {
    let mut cfg = match path {
        Some(p) => ServiceConfig::from_file(p)?,
        None => {
            let mut c = ServiceConfig::default();
            c.resolve_paths(&std::env::current_dir()?);
            c
        }
    };
    cfg.apply_env(|k| std::env::var(k).ok())?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Serve { config } => {
            let cfg = service_config(config.as_deref())?;
            let state = AppState::from_config(cfg)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(floodlense_service::serve(state))?;
        }
        Command::Fetch { scene, out } => {
            let point = scene.validate();
            let engine = SegmentationEngine::classical("classical", Default::default());
            let (_, meta, img) = scene.pipeline(engine).scene(point)?;
            write_png(&img, &out).with_context(|| format!("writing {}", out.display()))?;
            println!("{} {}", meta.acquired_at().to_rfc3339(), out.display());
        }
        Command::Segment {
            scene,
            engine,
            threshold,
            out,
            mask,
        } => {
            let point = scene.validate();
            engine.validate();
            check_threshold(threshold, "--threshold");
            let pipeline = scene.pipeline(engine.load()?);
            let (bbox, meta, img) = pipeline.scene(point)?;
            let seg = segment_image(pipeline.engine(), &img, threshold)?;
            write_png(&seg.overlay, &out).with_context(|| format!("writing {}", out.display()))?;
            if let Some(m) = mask {
                write_png(&seg.mask.to_raster(), &m).with_context(|| format!("writing {}", m.display()))?;
            }
            let summary = serde_json::json!({
                "flood_fraction": seg.flood_fraction,
                "threshold": threshold,
                "scene": meta.acquired_at().to_rfc3339(),
                "bbox": bbox.as_array(),
                "overlay": out,
            });
            println!("{summary}");
        }
        Command::Eval {
            data,
            engine,
            threshold,
            json,
        } => {
            data.validate();
            engine.validate();
            check_threshold(threshold, "--threshold");
            let e = engine.load()?;
            let samples = data.load()?;
            let m = metrics(&evaluate(&e, &samples, threshold)?);
            let title = format!("Performance Metrics (threshold {threshold})");
            emit(&metrics_table(&title, &[(e.name(), m)]), json.as_deref())?;
        }
        Command::Sweep {
            data,
            engine,
            thresholds,
            json,
        } => {
            data.validate();
            engine.validate();
            for t in &thresholds {
                check_threshold(*t, "--thresholds");
            }
            if thresholds.windows(2).any(|w| w[0] >= w[1]) {
                usage_error("--thresholds must be strictly increasing");
            }
            let e = engine.load()?;
            let samples = data.load()?;
            let report = sweep_engine(&e, &samples, &thresholds)?;
            emit(&report.to_table(&format!("{} Performance Metrics", e.name())), json.as_deref())?;
        }
        Command::Ablate {
            data,
            weights,
            layers,
            json,
        } => {
            data.validate();
            let e = load_engine(EngineKind::Unet, Some(&weights)).context("loading engine")?;
            let known = e.layer_names();
            let layers = if layers.is_empty() { known.clone() } else { layers };
            if let Some(bad) = layers.iter().find(|l| !known.contains(l)) {
                usage_error(&format!("unknown layer {bad:?}; layers are {}", known.join(",")));
            }
            let samples = data.load()?;
            let report = run_ablation(&e, &layers, &samples)?;
            emit(&report.to_table("Ablation Study Results"), json.as_deref())?;
        }
        Command::Bench {
            data,
            engine,
            runs,
            warmups,
            json,
        } => {
            data.validate();
            engine.validate();
            if runs == 0 {
                usage_error("--runs must be >= 1");
            }
            let e = engine.load()?;
            let inputs: Vec<_> = data.load()?.into_iter().map(|s| s.image).collect();
            let report = time_inference(&e, &inputs, warmups, runs, &MonotonicClock::default())?;
            eprintln!(
                "{} runs on {} / {} with {} threads",
                report.n, report.environment.os, report.environment.arch, report.environment.threads
            );
            emit(&timing_table("Inference Time", &[(e.name(), report)]), json.as_deref())?;
        }
        Command::InterfaceEval { cases, gazetteer, json } => {
            let cases = read_cases(&cases)?;
            if cases.is_empty() {
                bail!("no interface cases");
            }
            let g = Gazetteer::load(&gazetteer)?;
            let report = evaluate_interface(&cases, &GazetteerExtractor::new(g.clone()), &GazetteerGeocoder::new(g))?;
            for o in &report.outcomes {
                eprintln!(
                    "{:<45} extracted={:<16} geocoded={:<5} correct={:<5} error={}",
                    o.query,
                    o.extracted.as_deref().unwrap_or("-"),
                    o.coordinates.is_some(),
                    o.extraction_correct,
                    o.error
                );
            }
            let table = Table::new(
                "Interface Evaluation",
                "Metric",
                vec!["Value".into()],
                vec![
                    "Extraction Accuracy".into(),
                    "Geocoding Success Rate".into(),
                    "Error Rate".into(),
                ],
                vec![
                    vec![Some(report.extraction_accuracy)],
                    vec![Some(report.geocoding_success_rate)],
                    vec![Some(report.error_rate)],
                ],
            )?;
            emit(&table, json.as_deref())?;
        }
        Command::MakeFixtures { out, seed } => {
            let layout = FixtureLayout::new(&out);
            generate(&layout, &SynthOptions { seed, ..SynthOptions::default() })?;
            let cfg = ServiceConfig {
                weight_path: Some("weights/unet_random.flwt".into()),
                ..ServiceConfig::default()
            };
            let path = out.join("service.json");
            std::fs::write(&path, serde_json::to_string_pretty(&cfg)? + "\n")
                .with_context(|| format!("writing {}", path.display()))?;
            println!("fixtures written to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if matches!(cli.command, Command::Serve { .. }) {
        tracing::Level::INFO
    } else {
        tracing::Level::WARN
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(level)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
