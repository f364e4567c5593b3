//! CCCP minimization of the selection loss over the box `[0,1]^n`, followed
//! by an adaptive threshold that turns relaxed scores into a binary mask.
//!
//! The loss splits as `f(Z) − g(Z)` with `f(Z) = λ1·ZᵀPZ` and
//! `g(Z) = Zᵀ(λ1·Q + λ2·R)Z`, both convex. Each iteration linearizes `g` at
//! the current iterate and minimizes `f(Z) − ∇g(Z_t)ᵀZ` over the box. `P` is
//! diagonal, so the subproblem separates per coordinate and has a closed
//! form: `z_i = clamp(c_i / (2·λ1·p_ii), 0, 1)` with `c = ∇g(Z_t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ShotRecord;
use crate::objective::{self, LossParams, ObjectiveMatrices};
use crate::query::DistanceVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop once the infinity-norm step falls below this.
    pub tol: f64,
    /// Initial value of every coordinate.
    pub init: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-6,
            init: 0.5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Config(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if !(self.init > 0.0 && self.init < 1.0) {
            return Err(Error::Config(format!(
                "init must lie in (0,1), got {}",
                self.init
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionScores {
    pub z: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
    pub final_loss: f64,
    /// Loss at the initial point followed by the loss after each iteration.
    pub loss_trace: Vec<f64>,
}

pub fn cccp_minimize(
    m: &ObjectiveMatrices,
    params: LossParams,
    cfg: SolverConfig,
) -> Result<SelectionScores> {
    params.validate()?;
    cfg.validate()?;
    let finite = m.p_diag().iter().chain(m.r_diag()).all(|v| v.is_finite())
        && m.q().iter().all(|v| v.is_finite());
    if !finite {
        return Err(Error::Numeric(
            "objective matrices contain NaN or Inf".into(),
        ));
    }

    let n = m.n();
    let p = m.p_diag();
    let r = m.r_diag();
    let mut z = vec![cfg.init; n];
    let mut loss_trace = vec![objective::loss(m, params, &z)?];
    let mut converged = false;
    let mut iterations_used = 0;

    for _ in 0..cfg.max_iters {
        iterations_used += 1;
        let qz = m.q_apply(&z)?;
        let mut step: f64 = 0.0;
        let next: Vec<f64> = (0..n)
            .map(|i| {
                let c = 2.0 * (params.lambda1 * qz[i] + params.lambda2 * r[i] * z[i]);
                let curvature = 2.0 * params.lambda1 * p[i];
                let zi = if curvature > 0.0 {
                    (c / curvature).clamp(0.0, 1.0)
                } else if c > 0.0 {
                    1.0
                } else {
                    0.0
                };
                step = step.max((zi - z[i]).abs());
                zi
            })
            .collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite iterate at iteration {iterations_used}"
            )));
        }
        z = next;
        loss_trace.push(objective::loss(m, params, &z)?);
        if step < cfg.tol {
            converged = true;
            break;
        }
    }

    let final_loss = *loss_trace.last().expect("trace holds the initial loss");
    if !final_loss.is_finite() {
        return Err(Error::Numeric("loss is not finite".into()));
    }
    Ok(SelectionScores {
        z,
        iterations_used,
        converged,
        final_loss,
        loss_trace,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ThresholdMode {
    /// `τ = σ(Z_m)`
    #[default]
    PaperStddev,
    /// `τ = μ(Z_m) + k·σ(Z_m)`
    MeanPlusKSigma { k: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionMask {
    pub z: Vec<bool>,
    pub threshold_used: f64,
}

impl SelectionMask {
    pub fn selected_count(&self) -> usize {
        self.z.iter().filter(|&&b| b).count()
    }

    pub fn selected_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.z
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i)
    }
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Selects every shot whose relaxed score exceeds the threshold. With all
/// scores equal the standard deviation is zero and every nonzero score is
/// selected.
pub fn adaptive_threshold(z: &[f64], mode: ThresholdMode) -> Result<SelectionMask> {
    if z.is_empty() {
        return Err(Error::Input(
            "cannot threshold an empty score vector".into(),
        ));
    }
    let (mean, std) = mean_std(z);
    let threshold_used = match mode {
        ThresholdMode::PaperStddev => std,
        ThresholdMode::MeanPlusKSigma { k } => mean + k * std,
    };
    Ok(SelectionMask {
        z: z.iter().map(|&v| v > threshold_used).collect(),
        threshold_used,
    })
}

/// Settings recorded alongside a summary so a run can be reproduced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub lambda1: f64,
    pub lambda2: f64,
    pub alpha: f64,
    pub shot_length_s: f64,
    pub threshold: ThresholdMode,
    pub phi1_mode: crate::query::Phi1Mode,
    pub relevance: crate::query::RelevanceMode,
    pub solver: SolverConfig,
    pub threshold_used: f64,
    pub iterations_used: usize,
    pub converged: bool,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub shot_id: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub rep_frame: usize,
    pub z_m: f64,
    pub distance: f64,
    pub relevance: f64,
    /// Distinct detected class names, sorted.
    pub classes: Vec<String>,
}

/// Selected shots in temporal order; an edit-decision list for rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryManifest {
    pub video_id: String,
    pub total_shots: usize,
    pub shots: Vec<ManifestEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl SummaryManifest {
    pub fn is_empty(&self) -> bool {
        self.shots.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.shots.iter().map(|s| s.t_end - s.t_start).sum()
    }
}

pub fn select_summary(
    video_id: &str,
    shots: &[ShotRecord],
    scores: &SelectionScores,
    distances: &DistanceVector,
    mask: &SelectionMask,
    provenance: Option<Provenance>,
) -> Result<SummaryManifest> {
    let n = shots.len();
    if mask.z.len() != n || scores.z.len() != n || distances.len() != n {
        return Err(Error::Input(format!(
            "length mismatch: {n} shots, {} mask entries, {} scores, {} distances",
            mask.z.len(),
            scores.z.len(),
            distances.len()
        )));
    }
    let mut order: Vec<usize> = mask.selected_indices().collect();
    order.sort_by(|&a, &b| {
        shots[a]
            .span
            .t_start
            .total_cmp(&shots[b].span.t_start)
            .then(a.cmp(&b))
    });
    let entries = order
        .into_iter()
        .map(|i| {
            let shot = &shots[i];
            let mut classes: Vec<String> = shot
                .detections
                .iter()
                .map(|d| d.class_name.clone())
                .collect();
            classes.sort();
            classes.dedup();
            ManifestEntry {
                shot_id: shot.span.shot_id,
                t_start: shot.span.t_start,
                t_end: shot.span.t_end,
                rep_frame: shot.span.rep_frame,
                z_m: scores.z[i],
                distance: distances.d[i],
                relevance: distances.s[i],
                classes,
            }
        })
        .collect::<Vec<_>>();
    let mut warnings = Vec::new();
    if entries.is_empty() {
        warnings.push("no shot passed the selection threshold; summary is empty".to_string());
    }
    Ok(SummaryManifest {
        video_id: video_id.to_string(),
        total_shots: n,
        shots: entries,
        warnings,
        provenance,
    })
}
