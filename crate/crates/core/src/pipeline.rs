//! End-to-end summarization: shots, saliency, distances, objective, solver,
//! manifest.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{self, FrameIndex, ShotDetections, ShotRecord, ShotSpan, VideoMeta};
use crate::objective::{self, LossParams};
use crate::query::{self, DistanceConfig, DistanceVector, QueryProfile};
use crate::saliency::{self, SaliencyMask};
use crate::solver::{
    self, Provenance, SelectionMask, SelectionScores, SolverConfig, SummaryManifest, ThresholdMode,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub loss: LossParams,
    pub alpha: f64,
    /// `None` takes the shot length declared in the detections document.
    pub shot_length_s: Option<f64>,
    pub threshold: ThresholdMode,
    pub distance: DistanceConfig,
    pub solver: SolverConfig,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            loss: LossParams::default(),
            alpha: saliency::DEFAULT_ALPHA,
            shot_length_s: None,
            threshold: ThresholdMode::default(),
            distance: DistanceConfig::default(),
            solver: SolverConfig::default(),
        }
    }
}

impl Settings {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        saliency::validate_alpha(self.alpha)?;
        if let Some(len) = self.shot_length_s {
            if !(len > 0.0 && len.is_finite()) {
                return Err(Error::Config(format!(
                    "shot length must be positive, got {len}"
                )));
            }
        }
        if let ThresholdMode::MeanPlusKSigma { k } = self.threshold {
            if !k.is_finite() {
                return Err(Error::Config(format!("k must be finite, got {k}")));
            }
        }
        self.solver.validate()
    }
}

/// Where per-shot salient masks come from.
#[derive(Debug, Clone)]
pub enum SaliencySource {
    /// Raw video frames; each representative frame is preprocessed and
    /// thresholded.
    Frames(FrameIndex),
    /// Precomputed masks (grayscale rasters, >= 128 is salient).
    Masks(FrameIndex),
}

impl SaliencySource {
    pub fn frames(dir: &Path) -> Result<Self> {
        Ok(Self::Frames(non_empty_index(dir)?))
    }

    pub fn masks(dir: &Path) -> Result<Self> {
        Ok(Self::Masks(non_empty_index(dir)?))
    }

    fn index(&self) -> &FrameIndex {
        match self {
            Self::Frames(i) | Self::Masks(i) => i,
        }
    }
}

fn non_empty_index(dir: &Path) -> Result<FrameIndex> {
    if !dir.is_dir() {
        return Err(Error::Input(format!(
            "{} is not a directory",
            dir.display()
        )));
    }
    let index = FrameIndex::scan(dir)?;
    if index.is_empty() {
        return Err(Error::Input(format!(
            "{} holds no numbered image files",
            dir.display()
        )));
    }
    Ok(index)
}

/// Salient mask of a raw frame after preprocessing.
pub fn frame_saliency(path: &Path, alpha: f64) -> Result<SaliencyMask> {
    let frame = ingest::preprocess_frame(&ingest::load_frame(path)?)?;
    saliency::salient_mask(&saliency::hsv_planes(&frame)?, alpha)
}

pub struct Inputs {
    pub detections: ShotDetections,
    /// `None` derives the duration from the shots in the detections document.
    pub duration_s: Option<f64>,
    pub saliency: SaliencySource,
    pub query: QueryProfile,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub video_id: String,
    pub video_duration_s: f64,
    pub shots: Vec<ShotRecord>,
    pub distances: DistanceVector,
    pub scores: SelectionScores,
    pub mask: SelectionMask,
    pub manifest: SummaryManifest,
    pub elapsed: Duration,
}

pub fn build_shots(
    spans: &[ShotSpan],
    detections: &ShotDetections,
    source: &SaliencySource,
    alpha: f64,
) -> Result<Vec<ShotRecord>> {
    let fps = detections.fps;
    spans
        .par_iter()
        .map(|span| {
            let (first, last) = span.frame_range(fps);
            let target = detections
                .frame_index
                .get(span.shot_id)
                .copied()
                .flatten()
                .filter(|f| (first..last).contains(f))
                .unwrap_or(span.rep_frame);
            let (_, path) = source.index().nearest(target, first, last).ok_or_else(|| {
                Error::Input(format!(
                    "no frame for shot {} (frames {first}..{last})",
                    span.shot_id
                ))
            })?;
            let saliency = match source {
                SaliencySource::Frames(_) => frame_saliency(path, alpha)?,
                SaliencySource::Masks(_) => SaliencyMask::read_image(path)?,
            };
            Ok(ShotRecord {
                span: *span,
                detections: detections.per_shot[span.shot_id].clone(),
                saliency,
            })
        })
        .collect()
}

/// Resolves the shot grid implied by the detections document and settings.
pub fn shot_spans(
    detections: &ShotDetections,
    duration_s: Option<f64>,
    settings: &Settings,
) -> Result<Vec<ShotSpan>> {
    let shot_length = match settings.shot_length_s {
        Some(len) if (len - detections.shot_length_s).abs() > 1e-9 => {
            return Err(Error::Input(format!(
                "shot length {len}s does not match the detections document ({}s)",
                detections.shot_length_s
            )))
        }
        Some(len) => len,
        None => detections.shot_length_s,
    };
    let duration = match duration_s {
        Some(d) => d,
        None => detections.shot_count() as f64 * shot_length,
    };
    ingest::segment(
        VideoMeta {
            duration_s: duration,
            fps: detections.fps,
        },
        shot_length,
    )
}

/// Runs selection on already assembled shots.
pub fn summarize_shots(
    video_id: &str,
    shots: &[ShotRecord],
    query: &QueryProfile,
    settings: &Settings,
) -> Result<(
    DistanceVector,
    SelectionScores,
    SelectionMask,
    SummaryManifest,
)> {
    settings.validate()?;
    let features = ingest::assemble_features(shots)?;
    let distances = query::distance_vector(query, shots, settings.distance)?;
    let matrices = objective::build_matrices(&features, &distances)?;
    let scores = solver::cccp_minimize(&matrices, settings.loss, settings.solver)?;
    let mask = solver::adaptive_threshold(&scores.z, settings.threshold)?;
    let provenance = Provenance {
        lambda1: settings.loss.lambda1,
        lambda2: settings.loss.lambda2,
        alpha: settings.alpha,
        shot_length_s: settings
            .shot_length_s
            .unwrap_or_else(|| shots.iter().map(|s| s.span.duration()).fold(0.0, f64::max)),
        threshold: settings.threshold,
        phi1_mode: settings.distance.phi1_mode,
        relevance: settings.distance.relevance,
        solver: settings.solver,
        threshold_used: mask.threshold_used,
        iterations_used: scores.iterations_used,
        converged: scores.converged,
        final_loss: scores.final_loss,
    };
    let manifest = solver::select_summary(
        video_id,
        shots,
        &scores,
        &distances,
        &mask,
        Some(provenance),
    )?;
    Ok((distances, scores, mask, manifest))
}

pub fn run(inputs: &Inputs, settings: &Settings) -> Result<Outcome> {
    settings.validate()?;
    let start = Instant::now();
    let spans = shot_spans(&inputs.detections, inputs.duration_s, settings)?;
    let detections = if spans.len() == inputs.detections.shot_count() {
        inputs.detections.clone()
    } else if spans.len() > inputs.detections.shot_count() {
        let mut d = inputs.detections.clone();
        d.per_shot.resize(spans.len(), Vec::new());
        d.frame_index.resize(spans.len(), None);
        d
    } else {
        return Err(Error::Input(format!(
            "detections cover {} shots but the video has only {}",
            inputs.detections.shot_count(),
            spans.len()
        )));
    };
    let shots = build_shots(&spans, &detections, &inputs.saliency, settings.alpha)?;
    let resolved = Settings {
        shot_length_s: Some(detections.shot_length_s),
        ..*settings
    };
    let (distances, scores, mask, manifest) =
        summarize_shots(&detections.video_id, &shots, &inputs.query, &resolved)?;
    let video_duration_s = spans.last().map_or(0.0, |s| s.t_end);
    Ok(Outcome {
        video_id: detections.video_id.clone(),
        video_duration_s,
        shots,
        distances,
        scores,
        mask,
        manifest,
        elapsed: start.elapsed(),
    })
}

/// `shot_id,z_m,selected`
pub fn scores_csv(shots: &[ShotRecord], scores: &SelectionScores, mask: &SelectionMask) -> String {
    let mut out = String::from("shot_id,z_m,selected\n");
    for ((shot, z), sel) in shots.iter().zip(&scores.z).zip(&mask.z) {
        out.push_str(&format!("{},{},{}\n", shot.shot_id(), z, u8::from(*sel)));
    }
    out
}

/// `shot_id,d,s`
pub fn distances_csv(shots: &[ShotRecord], dv: &DistanceVector) -> String {
    let mut out = String::from("shot_id,d,s\n");
    for ((shot, d), s) in shots.iter().zip(&dv.d).zip(&dv.s) {
        out.push_str(&format!("{},{},{}\n", shot.shot_id(), d, s));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub video_id: String,
    pub total_shots: usize,
    pub selected_shots: usize,
    pub iterations: usize,
    pub converged: bool,
    pub final_loss: f64,
    pub threshold: f64,
    pub loss_trace: Vec<f64>,
    pub process_time_s: f64,
    pub video_time_s: f64,
    pub speedup: Option<f64>,
    pub settings: Settings,
}

impl RunReport {
    pub fn new(outcome: &Outcome, settings: &Settings, process_time_s: f64) -> Self {
        Self {
            video_id: outcome.video_id.clone(),
            total_shots: outcome.shots.len(),
            selected_shots: outcome.mask.selected_count(),
            iterations: outcome.scores.iterations_used,
            converged: outcome.scores.converged,
            final_loss: outcome.scores.final_loss,
            threshold: outcome.mask.threshold_used,
            loss_trace: outcome.scores.loss_trace.clone(),
            process_time_s,
            video_time_s: outcome.video_duration_s,
            speedup: crate::evaluation::timing_report(process_time_s, outcome.video_duration_s)
                .ok(),
            settings: *settings,
        }
    }
}

/// Artifact paths written by [`write_artifacts`].
#[derive(Debug, Clone)]
pub struct ArtifactPaths {
    pub manifest: PathBuf,
    pub scores: PathBuf,
    pub distances: PathBuf,
    pub report: PathBuf,
}

impl ArtifactPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            manifest: dir.join("manifest.json"),
            scores: dir.join("scores.csv"),
            distances: dir.join("distances.csv"),
            report: dir.join("run_report.json"),
        }
    }
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

/// Writes manifest, scores and distances, then the run report. Process time
/// covers the pipeline plus these writes.
pub fn write_artifacts(
    outcome: &Outcome,
    settings: &Settings,
    paths: &ArtifactPaths,
    started: Instant,
) -> Result<RunReport> {
    write_file(&paths.manifest, to_json_pretty(&outcome.manifest))?;
    write_file(
        &paths.scores,
        scores_csv(&outcome.shots, &outcome.scores, &outcome.mask),
    )?;
    write_file(
        &paths.distances,
        distances_csv(&outcome.shots, &outcome.distances),
    )?;
    let elapsed = started.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);
    let report = RunReport::new(outcome, settings, elapsed);
    write_file(&paths.report, to_json_pretty(&report))?;
    Ok(report)
}
