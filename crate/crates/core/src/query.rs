//! Query-to-shot distances.
//!
//! Four terms are summed into a per-shot distance `d_i`:
//!
//! - object-count difference between the query and the shot,
//! - summed centroid distance of matched same-class objects,
//! - summed area difference of the same matched objects,
//! - salient-mask disagreement ratio.
//!
//! Distances become relevance scores through `s_i = exp(-d_i)` unless the
//! raw-distance mode is requested.

use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{self, DetectionRecord, ShotRecord};
use crate::saliency::{self, SaliencyMask};

#[derive(Debug, Clone, PartialEq)]
pub struct QueryProfile {
    pub detections: Vec<DetectionRecord>,
    pub saliency: SaliencyMask,
}

impl QueryProfile {
    /// Builds the profile from a query image: the frame is preprocessed the
    /// same way as video frames before its mask is taken.
    pub fn from_image(path: &Path, detections: Vec<DetectionRecord>, alpha: f64) -> Result<Self> {
        let frame = ingest::preprocess_frame(&ingest::load_frame(path)?)?;
        let planes = saliency::hsv_planes(&frame)?;
        Ok(Self {
            detections,
            saliency: saliency::salient_mask(&planes, alpha)?,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phi1Mode {
    /// `| |classes(q)| - |classes(v)| |`
    #[default]
    CountDiff,
    /// `|classes(q) Δ classes(v)|`
    Symdiff,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelevanceMode {
    /// `s_i = exp(-d_i)`
    #[default]
    Similarity,
    /// `s_i = d_i`
    RawDistance,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistanceConfig {
    pub phi1_mode: Phi1Mode,
    pub relevance: RelevanceMode,
}

fn distinct_classes(dets: &[DetectionRecord]) -> BTreeSet<usize> {
    dets.iter().map(|d| d.class_id).collect()
}

pub fn phi1(q: &[DetectionRecord], v: &[DetectionRecord], mode: Phi1Mode) -> f64 {
    let cq = distinct_classes(q);
    let cv = distinct_classes(v);
    match mode {
        Phi1Mode::CountDiff => cq.len().abs_diff(cv.len()) as f64,
        Phi1Mode::Symdiff => cq.symmetric_difference(&cv).count() as f64,
    }
}

fn centroid_distance(a: &DetectionRecord, b: &DetectionRecord) -> f64 {
    (a.bbox.cx - b.bbox.cx).hypot(a.bbox.cy - b.bbox.cy)
}

/// Pairs same-class instances greedily: repeatedly take the closest
/// remaining pair by centroid distance, ties broken by lower query index
/// then lower shot index. Unpaired instances are dropped.
pub fn pair_objects<'a>(
    q: &'a [DetectionRecord],
    v: &'a [DetectionRecord],
) -> Vec<(&'a DetectionRecord, &'a DetectionRecord)> {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, a) in q.iter().enumerate() {
        for (j, b) in v.iter().enumerate() {
            if a.class_id == b.class_id {
                candidates.push((centroid_distance(a, b), i, j));
            }
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_q = vec![false; q.len()];
    let mut used_v = vec![false; v.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in candidates {
        if !used_q[i] && !used_v[j] {
            used_q[i] = true;
            used_v[j] = true;
            pairs.push((i, j));
        }
    }
    pairs.sort_unstable();
    pairs.into_iter().map(|(i, j)| (&q[i], &v[j])).collect()
}

pub fn phi2(q: &[DetectionRecord], v: &[DetectionRecord]) -> f64 {
    pair_objects(q, v)
        .into_iter()
        .map(|(a, b)| centroid_distance(a, b))
        .sum()
}

pub fn phi3(q: &[DetectionRecord], v: &[DetectionRecord]) -> f64 {
    pair_objects(q, v)
        .into_iter()
        .map(|(a, b)| (a.bbox.area() - b.bbox.area()).abs())
        .sum()
}

pub fn phi4(q: &SaliencyMask, v: &SaliencyMask) -> Result<f64> {
    saliency::compare_masks(q, v)
}

/// The four distance terms for one shot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceTerms {
    pub phi1: f64,
    pub phi2: f64,
    pub phi3: f64,
    pub phi4: f64,
}

impl DistanceTerms {
    pub fn compute(q: &QueryProfile, v: &ShotRecord, mode: Phi1Mode) -> Result<Self> {
        Ok(Self {
            phi1: phi1(&q.detections, &v.detections, mode),
            phi2: phi2(&q.detections, &v.detections),
            phi3: phi3(&q.detections, &v.detections),
            phi4: phi4(&q.saliency, &v.saliency)?,
        })
    }

    pub fn total(&self) -> f64 {
        self.phi1 + self.phi2 + self.phi3 + self.phi4
    }
}

pub fn cumulative_distance(q: &QueryProfile, v: &ShotRecord, mode: Phi1Mode) -> Result<f64> {
    Ok(DistanceTerms::compute(q, v, mode)?.total())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceVector {
    pub d: Vec<f64>,
    pub s: Vec<f64>,
}

impl DistanceVector {
    /// Builds the vector from precomputed distances.
    pub fn from_distances(d: Vec<f64>, relevance: RelevanceMode) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::Input("distance vector is empty".into()));
        }
        if let Some(bad) = d.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::Numeric(format!("invalid distance {bad}")));
        }
        let s = d
            .iter()
            .map(|&x| match relevance {
                RelevanceMode::Similarity => (-x).exp(),
                RelevanceMode::RawDistance => x,
            })
            .collect();
        Ok(Self { d, s })
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }
}

pub fn distance_vector(
    q: &QueryProfile,
    shots: &[ShotRecord],
    cfg: DistanceConfig,
) -> Result<DistanceVector> {
    if shots.is_empty() {
        return Err(Error::Input("no shots to score".into()));
    }
    // Resample the query once; shots are resampled inside compare_masks.
    let q_cmp = QueryProfile {
        detections: q.detections.clone(),
        saliency: q
            .saliency
            .resample(saliency::COMPARE_SIZE, saliency::COMPARE_SIZE)?,
    };
    let d = shots
        .par_iter()
        .map(|v| cumulative_distance(&q_cmp, v, cfg.phi1_mode))
        .collect::<Result<Vec<_>>>()?;
    DistanceVector::from_distances(d, cfg.relevance)
}
