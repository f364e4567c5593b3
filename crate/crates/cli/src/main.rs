//! `keyshot` command-line driver.
//!
//! Exit codes: 0 on success, 2 for input or configuration errors, 3 for
//! numerical failures.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use keyshot_core::evaluation::{self, AliasTable, GroundTruth};
use keyshot_core::ingest::{self, FEATURE_DIM};
use keyshot_core::objective;
use keyshot_core::pipeline::{self, ArtifactPaths, Inputs, RunReport, SaliencySource, Settings};
use keyshot_core::query::{self, QueryProfile};
use keyshot_core::saliency::{self, SaliencyMask};
use keyshot_core::solver::SummaryManifest;
use keyshot_core::timeline::Timeline;

use config::RunConfig;

const WORKERS_ENV: &str = "KEYSHOT_WORKERS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] keyshot_core::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numeric() => 3,
            _ => 2,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "keyshot",
    version,
    about = "Query-image conditioned keyframe selection"
)]
struct Cli {
    /// Flat TOML file with run settings; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the full pipeline and write manifest, scores, distances and run report.
    Summarize(RunConfig),
    /// Run the pipeline and emit `shot_id,z_m,selected` plus the run report.
    Score(RunConfig),
    /// Compare a manifest with ground truth.
    Evaluate(RunConfig),
    /// Write the salient-region mask of an image as PGM.
    Saliency {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Skip resizing and histogram equalization.
        #[arg(long)]
        raw: bool,
        #[command(flatten)]
        run: RunConfig,
    },
    /// Dump the objective matrices of a small video as JSON.
    Inspect {
        /// Refuse to print more shots than this.
        #[arg(long, default_value_t = 64)]
        max_shots: usize,
        #[command(flatten)]
        run: RunConfig,
    },
    /// Two-track predicted vs ground-truth timeline as CSV and SVG.
    Timeline(RunConfig),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_workers() {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code());
    }
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn configure_workers() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "{WORKERS_ENV} must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let base = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Summarize(flags) => summarize(&base.overlay(&flags)),
        Command::Score(flags) => score(&base.overlay(&flags)),
        Command::Evaluate(flags) => evaluate(&base.overlay(&flags)),
        Command::Saliency {
            image,
            out,
            raw,
            run,
        } => saliency_cmd(&base.overlay(&run), &image, &out, raw),
        Command::Inspect { max_shots, run } => inspect(&base.overlay(&run), max_shots),
        Command::Timeline(flags) => timeline(&base.overlay(&flags)),
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn load_query(cfg: &RunConfig, alpha: f64) -> Result<QueryProfile, CliError> {
    let detections = match RunConfig::optional(&cfg.query_detections, "query_detections")? {
        Some(path) => ingest::parse_image_detections(&read_text(path)?)?,
        None => Vec::new(),
    };
    let image = RunConfig::optional(&cfg.query, "query")?;
    if let Some(mask) = RunConfig::optional(&cfg.query_mask, "query_mask")? {
        return Ok(QueryProfile {
            detections,
            saliency: SaliencyMask::read_image(mask)?,
        });
    }
    let image = image.ok_or_else(|| CliError::Usage("missing required input `query`".into()))?;
    Ok(QueryProfile::from_image(image, detections, alpha)?)
}

fn load_inputs(cfg: &RunConfig, settings: &Settings) -> Result<Inputs, CliError> {
    let detections_path = RunConfig::require(&cfg.detections, "detections")?;
    let query = load_query(cfg, settings.alpha)?;
    let saliency = match (
        RunConfig::optional(&cfg.masks, "masks")?,
        RunConfig::optional(&cfg.frames, "frames")?,
    ) {
        (Some(masks), _) => SaliencySource::masks(masks)?,
        (None, Some(frames)) => SaliencySource::frames(frames)?,
        (None, None) => {
            return Err(CliError::Usage(
                "one of `frames` or `masks` is required".into(),
            ))
        }
    };
    let detections = ingest::parse_detections(&read_text(detections_path)?, None)?;
    Ok(Inputs {
        detections,
        duration_s: cfg.duration_s,
        saliency,
        query,
    })
}

fn output_dir(cfg: &RunConfig) -> Result<&Path, CliError> {
    cfg.output_dir
        .as_deref()
        .ok_or_else(|| CliError::Usage("missing required `output_dir`".into()))
}

fn summarize(cfg: &RunConfig) -> Result<(), CliError> {
    let started = Instant::now();
    let settings = cfg.settings()?;
    let out = output_dir(cfg)?;
    let inputs = load_inputs(cfg, &settings)?;
    let outcome = pipeline::run(&inputs, &settings)?;
    let paths = ArtifactPaths::in_dir(out);
    let report = pipeline::write_artifacts(&outcome, &settings, &paths, started)?;
    for w in &outcome.manifest.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "selected {}/{} shots; threshold {:.6}; {} iterations (converged: {}); {:.3}s for {:.1}s of video{}",
        report.selected_shots,
        report.total_shots,
        report.threshold,
        report.iterations,
        report.converged,
        report.process_time_s,
        report.video_time_s,
        report
            .speedup
            .map_or_else(String::new, |s| format!(" ({s:.1}x real time)")),
    );
    Ok(())
}

fn score(cfg: &RunConfig) -> Result<(), CliError> {
    let started = Instant::now();
    let settings = cfg.settings()?;
    let inputs = load_inputs(cfg, &settings)?;
    let outcome = pipeline::run(&inputs, &settings)?;
    let csv = pipeline::scores_csv(&outcome.shots, &outcome.scores, &outcome.mask);
    match &cfg.output_dir {
        Some(dir) => {
            let paths = ArtifactPaths::in_dir(dir);
            pipeline::write_file(&paths.scores, csv)?;
            let report = RunReport::new(&outcome, &settings, started.elapsed().as_secs_f64());
            pipeline::write_file(&paths.report, pipeline::to_json_pretty(&report))?;
        }
        None => {
            print!("{csv}");
            let report = RunReport::new(&outcome, &settings, started.elapsed().as_secs_f64());
            eprint!("{}", pipeline::to_json_pretty(&report));
        }
    }
    Ok(())
}

fn load_manifest(cfg: &RunConfig) -> Result<SummaryManifest, CliError> {
    let path = RunConfig::require(&cfg.manifest, "manifest")?;
    serde_json::from_str(&read_text(path)?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn load_ground_truth(cfg: &RunConfig) -> Result<Option<GroundTruth>, CliError> {
    RunConfig::optional(&cfg.ground_truth, "ground_truth")?
        .map(|p| Ok(GroundTruth::from_json(&read_text(p)?)?))
        .transpose()
}

fn evaluate(cfg: &RunConfig) -> Result<(), CliError> {
    let manifest = load_manifest(cfg)?;
    let gt = load_ground_truth(cfg)?
        .ok_or_else(|| CliError::Usage("missing required input `ground_truth`".into()))?;
    let aliases = match RunConfig::optional(&cfg.aliases, "aliases")? {
        Some(p) => AliasTable::from_json(&read_text(p)?)?,
        None => AliasTable::default(),
    };
    let pred = evaluation::manifest_concepts(&manifest, &aliases);
    let mut report = evaluation::evaluate(&pred, &gt.concept_sets(), cfg.metric_mode())?;
    if let Some(path) = RunConfig::optional(&cfg.run_report, "run_report")? {
        let run: RunReport = serde_json::from_str(&read_text(path)?)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        report = report.with_timing(run.process_time_s, run.video_time_s)?;
    }
    let json = pipeline::to_json_pretty(&report);
    match &cfg.output_dir {
        Some(dir) => pipeline::write_file(&dir.join("eval_report.json"), json)?,
        None => print!("{json}"),
    }
    println!("{}", report.summary_line());
    Ok(())
}

fn saliency_cmd(cfg: &RunConfig, image: &Path, out: &Path, raw: bool) -> Result<(), CliError> {
    let alpha = cfg.alpha.unwrap_or(saliency::DEFAULT_ALPHA);
    if !image.exists() {
        return Err(CliError::Usage(format!(
            "{} does not exist",
            image.display()
        )));
    }
    let mask = if raw {
        let frame = ingest::load_frame(image)?;
        saliency::salient_mask(&saliency::hsv_planes(&frame)?, alpha)?
    } else {
        pipeline::frame_saliency(image, alpha)?
    };
    mask.write_pgm(out)?;
    println!(
        "{}x{} mask, {:.4} salient",
        mask.width(),
        mask.height(),
        mask.salient_count() as f64 / mask.len() as f64
    );
    Ok(())
}

#[derive(Serialize)]
struct Inspection {
    n: usize,
    feature_dim: usize,
    p_diag: Vec<f64>,
    q: Vec<Vec<f64>>,
    r_diag: Vec<f64>,
    d: Vec<f64>,
    s: Vec<f64>,
}

fn inspect(cfg: &RunConfig, max_shots: usize) -> Result<(), CliError> {
    let settings = cfg.settings()?;
    let inputs = load_inputs(cfg, &settings)?;
    let spans = pipeline::shot_spans(&inputs.detections, inputs.duration_s, &settings)?;
    if spans.len() > max_shots {
        return Err(CliError::Usage(format!(
            "{} shots exceed --max-shots {max_shots}",
            spans.len()
        )));
    }
    let mut detections = inputs.detections.clone();
    detections.per_shot.resize(spans.len(), Vec::new());
    detections.frame_index.resize(spans.len(), None);
    let shots = pipeline::build_shots(&spans, &detections, &inputs.saliency, settings.alpha)?;
    let features = ingest::assemble_features(&shots)?;
    let dv = query::distance_vector(&inputs.query, &shots, settings.distance)?;
    let m = objective::build_matrices(&features, &dv)?;
    let q = m.q();
    let out = Inspection {
        n: m.n(),
        feature_dim: FEATURE_DIM,
        p_diag: m.p_diag().to_vec(),
        q: (0..q.nrows())
            .map(|i| q.row(i).iter().copied().collect())
            .collect(),
        r_diag: m.r_diag().to_vec(),
        d: dv.d,
        s: dv.s,
    };
    print!("{}", pipeline::to_json_pretty(&out));
    Ok(())
}

fn timeline(cfg: &RunConfig) -> Result<(), CliError> {
    let manifest = load_manifest(cfg)?;
    let gt = load_ground_truth(cfg)?;
    let t = Timeline::new(&manifest, gt.as_ref());
    match &cfg.output_dir {
        Some(dir) => {
            pipeline::write_file(&dir.join("timeline.csv"), t.to_csv())?;
            pipeline::write_file(&dir.join("timeline.svg"), t.to_svg())?;
            println!("{} shots, {} overlapping", t.len(), t.overlap());
        }
        None => print!("{}", t.to_csv()),
    }
    Ok(())
}
