//! Flat key-value run configuration. Values come from an optional TOML file
//! and are overridden by command-line flags.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use keyshot_core::evaluation::MetricMode;
use keyshot_core::objective::LossParams;
use keyshot_core::pipeline::Settings;
use keyshot_core::query::{DistanceConfig, Phi1Mode, RelevanceMode};
use keyshot_core::saliency::DEFAULT_ALPHA;
use keyshot_core::solver::{SolverConfig, ThresholdMode};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ThresholdKind {
    PaperStddev,
    MeanPlusKSigma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Phi1Kind {
    CountDiff,
    Symdiff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum RelevanceKind {
    Similarity,
    RawDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum MetricKind {
    WeightSum,
    PairCount,
}

/// Every key accepted in a config file; each one also exists as a flag.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// Salient-region threshold in (0,1).
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub shot_length_s: Option<f64>,
    #[arg(long, value_enum)]
    pub threshold_mode: Option<ThresholdKind>,
    /// Multiplier of the standard deviation in mean_plus_k_sigma mode.
    #[arg(long, allow_negative_numbers = true)]
    pub k: Option<f64>,
    #[arg(long, value_enum)]
    pub phi1_mode: Option<Phi1Kind>,
    #[arg(long, value_enum)]
    pub relevance_mode: Option<RelevanceKind>,
    #[arg(long, value_enum)]
    pub metric_mode: Option<MetricKind>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Initial value of every selection coordinate.
    #[arg(long)]
    pub init: Option<f64>,

    /// Detections JSON document for the video.
    #[arg(long)]
    pub detections: Option<PathBuf>,
    /// Directory of numbered video frames.
    #[arg(long)]
    pub frames: Option<PathBuf>,
    /// Directory of numbered precomputed salient masks (instead of frames).
    #[arg(long)]
    pub masks: Option<PathBuf>,
    /// Video duration in seconds; defaults to the shot grid of the detections.
    #[arg(long)]
    pub duration_s: Option<f64>,
    /// Query image.
    #[arg(long)]
    pub query: Option<PathBuf>,
    /// Detections of the query image, `{"detections": [...]}`.
    #[arg(long)]
    pub query_detections: Option<PathBuf>,
    /// Precomputed query mask, used instead of the query image's saliency.
    #[arg(long)]
    pub query_mask: Option<PathBuf>,
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    /// JSON map from detector class name to lexicon concept.
    #[arg(long)]
    pub aliases: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Run report whose timing is folded into the evaluation report.
    #[arg(long)]
    pub run_report: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($field:ident),* $(,)?) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// Fields set in `top` win.
    pub fn overlay(mut self, top: &RunConfig) -> Self {
        overlay!(
            self,
            top,
            lambda1,
            lambda2,
            alpha,
            shot_length_s,
            threshold_mode,
            k,
            phi1_mode,
            relevance_mode,
            metric_mode,
            max_iters,
            tol,
            init,
            detections,
            frames,
            masks,
            duration_s,
            query,
            query_detections,
            query_mask,
            ground_truth,
            aliases,
            manifest,
            run_report,
            output_dir,
        );
        self
    }

    pub fn settings(&self) -> Result<Settings, CliError> {
        let defaults = SolverConfig::default();
        let loss = LossParams::default();
        let k = self.k.unwrap_or(0.0);
        let settings = Settings {
            loss: LossParams {
                lambda1: self.lambda1.unwrap_or(loss.lambda1),
                lambda2: self.lambda2.unwrap_or(loss.lambda2),
            },
            alpha: self.alpha.unwrap_or(DEFAULT_ALPHA),
            shot_length_s: self.shot_length_s,
            threshold: match self.threshold_mode.unwrap_or(ThresholdKind::PaperStddev) {
                ThresholdKind::PaperStddev => ThresholdMode::PaperStddev,
                ThresholdKind::MeanPlusKSigma => ThresholdMode::MeanPlusKSigma { k },
            },
            distance: DistanceConfig {
                phi1_mode: match self.phi1_mode.unwrap_or(Phi1Kind::CountDiff) {
                    Phi1Kind::CountDiff => Phi1Mode::CountDiff,
                    Phi1Kind::Symdiff => Phi1Mode::Symdiff,
                },
                relevance: match self.relevance_mode.unwrap_or(RelevanceKind::Similarity) {
                    RelevanceKind::Similarity => RelevanceMode::Similarity,
                    RelevanceKind::RawDistance => RelevanceMode::RawDistance,
                },
            },
            solver: SolverConfig {
                max_iters: self.max_iters.unwrap_or(defaults.max_iters),
                tol: self.tol.unwrap_or(defaults.tol),
                init: self.init.unwrap_or(defaults.init),
            },
        };
        settings.validate()?;
        Ok(settings)
    }

    pub fn metric_mode(&self) -> MetricMode {
        match self.metric_mode.unwrap_or(MetricKind::WeightSum) {
            MetricKind::WeightSum => MetricMode::WeightSum,
            MetricKind::PairCount => MetricMode::PairCount,
        }
    }

    /// Returns the path stored in `value`, checking that it exists.
    pub fn require<'a>(value: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, CliError> {
        let path = value
            .as_deref()
            .ok_or_else(|| CliError::Usage(format!("missing required input `{key}`")))?;
        if !path.exists() {
            return Err(CliError::Usage(format!(
                "{key}: {} does not exist",
                path.display()
            )));
        }
        Ok(path)
    }

    pub fn optional<'a>(
        value: &'a Option<PathBuf>,
        key: &str,
    ) -> Result<Option<&'a Path>, CliError> {
        match value {
            Some(_) => Self::require(value, key).map(Some),
            None => Ok(None),
        }
    }
}
