//! Shot segmentation, frame preprocessing, detection records and the per-shot
//! feature matrix.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use image::imageops::{self, FilterType};
use image::{Rgb, RgbImage};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classes::{self, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::saliency::SaliencyMask;

pub const DEFAULT_SHOT_LENGTH_S: f64 = 5.0;
pub const MIN_CONFIDENCE: f64 = 0.5;
/// Edge length frames are resized to before any analysis.
pub const PREPROCESS_SIZE: u32 = 416;
pub const FEATURE_DIM: usize = NUM_CLASSES + 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VideoMeta {
    pub duration_s: f64,
    pub fps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotSpan {
    pub shot_id: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub rep_frame: usize,
}

impl ShotSpan {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// Half-open frame range `[first, last)` covered by this shot.
    pub fn frame_range(&self, fps: f64) -> (usize, usize) {
        let first = (self.t_start * fps).floor() as usize;
        let last = ((self.t_end * fps).ceil() as usize).max(first + 1);
        (first, last)
    }
}

/// Cuts `[0, duration]` into consecutive shots of `shot_length` seconds. The
/// final shot keeps whatever remains, so it may be shorter.
pub fn segment(meta: VideoMeta, shot_length: f64) -> Result<Vec<ShotSpan>> {
    if !(meta.duration_s > 0.0 && meta.duration_s.is_finite()) {
        return Err(Error::Input(format!(
            "video duration must be positive, got {}",
            meta.duration_s
        )));
    }
    if !(meta.fps > 0.0 && meta.fps.is_finite()) {
        return Err(Error::Input(format!(
            "fps must be positive, got {}",
            meta.fps
        )));
    }
    if !(shot_length > 0.0 && shot_length.is_finite()) {
        return Err(Error::Input(format!(
            "shot length must be positive, got {shot_length}"
        )));
    }
    // Absorb rounding noise such as 10.000000000002 / 5.
    let count = ((meta.duration_s / shot_length) - 1e-9).ceil().max(1.0) as usize;
    Ok((0..count)
        .map(|i| {
            let t_start = i as f64 * shot_length;
            let t_end = if i + 1 == count {
                meta.duration_s
            } else {
                (i + 1) as f64 * shot_length
            };
            ShotSpan {
                shot_id: i,
                t_start,
                t_end,
                rep_frame: (meta.fps * (t_start + t_end) / 2.0).floor() as usize,
            }
        })
        .collect())
}

pub fn load_frame(path: &Path) -> Result<RgbImage> {
    image::open(path)
        .map(|img| img.to_rgb8())
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

/// Resize to 416×416 (bilinear) and equalize the luminance histogram,
/// leaving chroma untouched.
pub fn preprocess_frame(frame: &RgbImage) -> Result<RgbImage> {
    let (w, h) = frame.dimensions();
    if w == 0 || h == 0 {
        return Err(Error::Dimension(format!("zero-area frame {w}x{h}")));
    }
    let mut out = if (w, h) == (PREPROCESS_SIZE, PREPROCESS_SIZE) {
        frame.clone()
    } else {
        imageops::resize(
            frame,
            PREPROCESS_SIZE,
            PREPROCESS_SIZE,
            FilterType::Triangle,
        )
    };
    equalize_luminance(&mut out);
    Ok(out)
}

fn to_ycbcr([r, g, b]: [u8; 3]) -> (f64, f64, f64) {
    let (r, g, b) = (r as f64, g as f64, b as f64);
    let y = 0.299 * r + 0.587 * g + 0.114 * b;
    let cb = 128.0 - 0.168_736 * r - 0.331_264 * g + 0.5 * b;
    let cr = 128.0 + 0.5 * r - 0.418_688 * g - 0.081_312 * b;
    (y, cb, cr)
}

fn to_rgb(y: f64, cb: f64, cr: f64) -> [u8; 3] {
    let r = y + 1.402 * (cr - 128.0);
    let g = y - 0.344_136 * (cb - 128.0) - 0.714_136 * (cr - 128.0);
    let b = y + 1.772 * (cb - 128.0);
    [r, g, b].map(|c| c.round().clamp(0.0, 255.0) as u8)
}

/// Histogram equalization of the Y channel (cumulative-distribution rule).
/// Frames with a single luminance level are left as they are.
pub fn equalize_luminance(frame: &mut RgbImage) {
    let luma: Vec<u8> = frame
        .pixels()
        .map(|p| to_ycbcr(p.0).0.round().clamp(0.0, 255.0) as u8)
        .collect();
    let mut hist = [0usize; 256];
    for &y in &luma {
        hist[y as usize] += 1;
    }
    if hist.iter().filter(|&&c| c > 0).count() <= 1 {
        return;
    }
    let total = luma.len();
    let mut cdf = [0usize; 256];
    let mut acc = 0;
    for (i, &c) in hist.iter().enumerate() {
        acc += c;
        cdf[i] = acc;
    }
    let cdf_min = cdf.iter().copied().find(|&c| c > 0).unwrap_or(0);
    let denom = (total - cdf_min) as f64;
    let lut: Vec<f64> = cdf
        .iter()
        .map(|&c| (((c.saturating_sub(cdf_min)) as f64 / denom) * 255.0).round())
        .collect();
    for (px, &y) in frame.pixels_mut().zip(&luma) {
        let (_, cb, cr) = to_ycbcr(px.0);
        *px = Rgb(to_rgb(lut[y as usize], cb, cr));
    }
}

/// Normalized centre-format box: centroid and extents relative to frame size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl From<[f64; 4]> for BBox {
    fn from([cx, cy, w, h]: [f64; 4]) -> Self {
        BBox { cx, cy, w, h }
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.cx, b.cy, b.w, b.h]
    }
}

impl BBox {
    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Clips the box to the unit square and recomputes centre and extents.
    fn clamped(self) -> Result<BBox> {
        let vals = [self.cx, self.cy, self.w, self.h];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Schema(format!("non-finite bbox {vals:?}")));
        }
        if self.w <= 0.0 || self.h <= 0.0 {
            return Err(Error::Schema(format!(
                "bbox extents must be positive, got w={} h={}",
                self.w, self.h
            )));
        }
        let x0 = (self.cx - self.w / 2.0).clamp(0.0, 1.0);
        let x1 = (self.cx + self.w / 2.0).clamp(0.0, 1.0);
        let y0 = (self.cy - self.h / 2.0).clamp(0.0, 1.0);
        let y1 = (self.cy + self.h / 2.0).clamp(0.0, 1.0);
        if x1 <= x0 || y1 <= y0 {
            return Err(Error::Schema(format!(
                "bbox {vals:?} lies outside the frame"
            )));
        }
        Ok(BBox {
            cx: (x0 + x1) / 2.0,
            cy: (y0 + y1) / 2.0,
            w: x1 - x0,
            h: y1 - y0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub class_id: usize,
    pub class_name: String,
    pub confidence: f64,
    pub bbox: BBox,
}

impl DetectionRecord {
    pub fn new(class_id: usize, confidence: f64, bbox: BBox) -> Result<Self> {
        RawDetection {
            class_id: class_id as i64,
            class_name: None,
            confidence,
            bbox,
        }
        .validate()
    }
}

#[derive(Debug, Clone, Deserialize)]
struct RawDetection {
    class_id: i64,
    #[serde(default)]
    class_name: Option<String>,
    confidence: f64,
    bbox: BBox,
}

impl RawDetection {
    fn validate(self) -> Result<DetectionRecord> {
        let name = usize::try_from(self.class_id)
            .ok()
            .and_then(classes::class_name)
            .ok_or_else(|| Error::Schema(format!("unknown class_id {}", self.class_id)))?;
        if let Some(given) = &self.class_name {
            if classes::class_id(given) != Some(self.class_id as usize) {
                return Err(Error::Schema(format!(
                    "class_name {given:?} does not match class_id {} ({name})",
                    self.class_id
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::Schema(format!(
                "confidence {} outside [0,1]",
                self.confidence
            )));
        }
        Ok(DetectionRecord {
            class_id: self.class_id as usize,
            class_name: name.to_string(),
            confidence: self.confidence,
            bbox: self.bbox.clamped()?,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
struct RawShot {
    shot_id: i64,
    #[serde(default)]
    frame_index: Option<i64>,
    #[serde(default)]
    detections: Vec<RawDetection>,
}

#[derive(Debug, Clone, Deserialize)]
struct RawDocument {
    video_id: String,
    fps: f64,
    shot_length_s: f64,
    shots: Vec<RawShot>,
}

/// Detections document after validation and confidence filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotDetections {
    pub video_id: String,
    pub fps: f64,
    pub shot_length_s: f64,
    /// Indexed by shot id; shots absent from the document are empty.
    pub per_shot: Vec<Vec<DetectionRecord>>,
    /// Frame index the detector ran on, when the document records it.
    pub frame_index: Vec<Option<usize>>,
}

impl ShotDetections {
    pub fn shot_count(&self) -> usize {
        self.per_shot.len()
    }
}

/// Parses a detections JSON document. Records below the confidence floor
/// are dropped and boxes are clipped to the unit square. With `shot_count`
/// the output has exactly that many entries; otherwise it covers shot ids
/// up to the largest one present.
pub fn parse_detections(json: &str, shot_count: Option<usize>) -> Result<ShotDetections> {
    let doc: RawDocument = serde_json::from_str(json).map_err(|e| Error::Schema(e.to_string()))?;
    if !(doc.fps > 0.0 && doc.fps.is_finite()) {
        return Err(Error::Schema(format!(
            "fps must be positive, got {}",
            doc.fps
        )));
    }
    if !(doc.shot_length_s > 0.0 && doc.shot_length_s.is_finite()) {
        return Err(Error::Schema(format!(
            "shot_length_s must be positive, got {}",
            doc.shot_length_s
        )));
    }
    let mut ids = Vec::with_capacity(doc.shots.len());
    for shot in &doc.shots {
        let id = usize::try_from(shot.shot_id)
            .map_err(|_| Error::Schema(format!("negative shot_id {}", shot.shot_id)))?;
        ids.push(id);
    }
    let n = match shot_count {
        Some(n) => n,
        None => ids.iter().max().map_or(0, |m| m + 1),
    };
    let mut per_shot = vec![Vec::new(); n];
    let mut frame_index = vec![None; n];
    let mut seen = vec![false; n];
    for (shot, id) in doc.shots.into_iter().zip(ids) {
        if id >= n {
            return Err(Error::Schema(format!(
                "shot_id {id} out of range for {n} shots"
            )));
        }
        if std::mem::replace(&mut seen[id], true) {
            return Err(Error::Schema(format!("duplicate shot_id {id}")));
        }
        frame_index[id] = shot.frame_index.and_then(|f| usize::try_from(f).ok());
        for raw in shot.detections {
            let rec = raw.validate()?;
            if rec.confidence >= MIN_CONFIDENCE {
                per_shot[id].push(rec);
            }
        }
    }
    Ok(ShotDetections {
        video_id: doc.video_id,
        fps: doc.fps,
        shot_length_s: doc.shot_length_s,
        per_shot,
        frame_index,
    })
}

/// Detections for a single image, `{"detections": [...]}`. Used for the
/// query image.
pub fn parse_image_detections(json: &str) -> Result<Vec<DetectionRecord>> {
    #[derive(Deserialize)]
    struct Doc {
        detections: Vec<RawDetection>,
    }
    let doc: Doc = serde_json::from_str(json).map_err(|e| Error::Schema(e.to_string()))?;
    let mut out = Vec::new();
    for raw in doc.detections {
        let rec = raw.validate()?;
        if rec.confidence >= MIN_CONFIDENCE {
            out.push(rec);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShotRecord {
    pub span: ShotSpan,
    pub detections: Vec<DetectionRecord>,
    pub saliency: SaliencyMask,
}

impl ShotRecord {
    pub fn shot_id(&self) -> usize {
        self.span.shot_id
    }
}

/// Per-shot descriptor: an 80-bin class histogram, salient coverage,
/// salient centroid (x, y) and total detected area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_DIM]);

impl FeatureVector {
    pub const COVERAGE: usize = NUM_CLASSES;
    pub const CENTROID_X: usize = NUM_CLASSES + 1;
    pub const CENTROID_Y: usize = NUM_CLASSES + 2;
    pub const AREA: usize = NUM_CLASSES + 3;

    pub fn from_parts(detections: &[DetectionRecord], saliency: &SaliencyMask) -> Self {
        let mut f = [0.0; FEATURE_DIM];
        if !detections.is_empty() {
            let total = detections.len() as f64;
            for d in detections {
                f[d.class_id] += 1.0;
            }
            for h in &mut f[..NUM_CLASSES] {
                *h /= total;
            }
        }

        let (w, h) = (saliency.width(), saliency.height());
        let (mut count, mut sx, mut sy) = (0usize, 0.0, 0.0);
        for (i, &b) in saliency.bits().iter().enumerate() {
            if b {
                count += 1;
                sx += (i as u32 % w) as f64 + 0.5;
                sy += (i as u32 / w) as f64 + 0.5;
            }
        }
        f[Self::COVERAGE] = count as f64 / saliency.len() as f64;
        if count == 0 {
            f[Self::CENTROID_X] = 0.5;
            f[Self::CENTROID_Y] = 0.5;
        } else {
            f[Self::CENTROID_X] = (sx / count as f64 / w as f64).clamp(0.0, 1.0);
            f[Self::CENTROID_Y] = (sy / count as f64 / h as f64).clamp(0.0, 1.0);
        }
        f[Self::AREA] = detections
            .iter()
            .map(|d| d.bbox.area())
            .sum::<f64>()
            .clamp(0.0, 1.0);
        FeatureVector(f)
    }

    pub fn histogram(&self) -> &[f64] {
        &self.0[..NUM_CLASSES]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }
}

/// Row `i` is the feature vector of shot `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: Vec<FeatureVector>,
}

impl FeatureMatrix {
    pub fn from_rows(rows: Vec<FeatureVector>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Input(
                "feature matrix needs at least one shot".into(),
            ));
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[FeatureVector] {
        &self.rows
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows.len(), FEATURE_DIM, |i, j| self.rows[i].0[j])
    }
}

pub fn assemble_features(shots: &[ShotRecord]) -> Result<FeatureMatrix> {
    if shots.is_empty() {
        return Err(Error::Input("no shots to assemble".into()));
    }
    let rows = shots
        .par_iter()
        .map(|s| FeatureVector::from_parts(&s.detections, &s.saliency))
        .collect();
    FeatureMatrix::from_rows(rows)
}

/// Image files in a directory keyed by the trailing integer in their stem,
/// so `frame_000123.png` and `123.jpg` both map to frame 123.
#[derive(Debug, Clone, Default)]
pub struct FrameIndex {
    frames: BTreeMap<usize, PathBuf>,
}

impl FrameIndex {
    pub fn scan(dir: &Path) -> Result<Self> {
        let mut frames = BTreeMap::new();
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if !path.is_file() {
                continue;
            }
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let digits: String = stem
                .chars()
                .rev()
                .take_while(char::is_ascii_digit)
                .collect::<Vec<_>>()
                .into_iter()
                .rev()
                .collect();
            if let Ok(idx) = digits.parse::<usize>() {
                frames.entry(idx).or_insert(path);
            }
        }
        Ok(Self { frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// The available frame in `[first, last)` closest to `target`; ties go
    /// to the earlier frame.
    pub fn nearest(&self, target: usize, first: usize, last: usize) -> Option<(usize, &Path)> {
        let before = self.frames.range(first..=target.max(first)).next_back();
        let after = self.frames.range(target.max(first)..last).next();
        let pick = match (before, after) {
            (Some(b), Some(a)) => {
                if target.abs_diff(*a.0) < target.abs_diff(*b.0) {
                    a
                } else {
                    b
                }
            }
            (Some(b), None) => b,
            (None, Some(a)) => a,
            (None, None) => return None,
        };
        (*pick.0 < last).then_some((*pick.0, pick.1.as_path()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn det(class_id: usize, bbox: [f64; 4]) -> DetectionRecord {
        DetectionRecord::new(class_id, 0.9, bbox.into()).unwrap()
    }

    #[test]
    fn segment_long_video() {
        let shots = segment(
            VideoMeta {
                duration_s: 12_600.0,
                fps: 30.0,
            },
            5.0,
        )
        .unwrap();
        assert_eq!(shots.len(), 2520);
    }

    #[test]
    fn segment_keeps_partial_tail() {
        let shots = segment(
            VideoMeta {
                duration_s: 12.0,
                fps: 10.0,
            },
            5.0,
        )
        .unwrap();
        let spans: Vec<_> = shots.iter().map(|s| (s.t_start, s.t_end)).collect();
        assert_eq!(spans, vec![(0.0, 5.0), (5.0, 10.0), (10.0, 12.0)]);
        let reps: Vec<_> = shots.iter().map(|s| s.rep_frame).collect();
        assert_eq!(reps, vec![25, 75, 110]);
    }

    #[test]
    fn segment_rejects_empty_video() {
        for (d, fps, len) in [(0.0, 30.0, 5.0), (10.0, 0.0, 5.0), (10.0, 30.0, -1.0)] {
            let meta = VideoMeta { duration_s: d, fps };
            assert!(matches!(segment(meta, len), Err(Error::Input(_))));
        }
    }

    #[test]
    fn preprocess_resizes() {
        let frame = RgbImage::from_fn(1920, 1080, |x, y| {
            Rgb([(x % 256) as u8, (y % 256) as u8, 40])
        });
        let out = preprocess_frame(&frame).unwrap();
        assert_eq!(out.dimensions(), (416, 416));
        let same = RgbImage::from_fn(416, 416, |x, _| Rgb([(x % 256) as u8, 0, 0]));
        assert_eq!(preprocess_frame(&same).unwrap().dimensions(), (416, 416));
    }

    #[test]
    fn preprocess_leaves_constant_gray_alone() {
        let frame = RgbImage::from_pixel(416, 416, Rgb([97, 97, 97]));
        assert_eq!(preprocess_frame(&frame).unwrap(), frame);
        let small = RgbImage::from_pixel(30, 20, Rgb([128, 128, 128]));
        let out = preprocess_frame(&small).unwrap();
        assert!(out.pixels().all(|p| p.0 == [128, 128, 128]));
    }

    #[test]
    fn preprocess_rejects_zero_area() {
        assert!(matches!(
            preprocess_frame(&RgbImage::new(0, 0)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn equalization_stretches_gray_ramp() {
        // Two gray levels become the extremes of the range.
        let mut frame = RgbImage::from_fn(4, 1, |x, _| {
            let v = if x < 2 { 100 } else { 120 };
            Rgb([v, v, v])
        });
        equalize_luminance(&mut frame);
        let vals: Vec<u8> = frame.pixels().map(|p| p.0[0]).collect();
        assert_eq!(vals, vec![0, 0, 255, 255]);
    }

    #[test]
    fn parse_valid_record() {
        let doc = r#"{"video_id":"v","fps":30.0,"shot_length_s":5.0,"shots":[
            {"shot_id":0,"frame_index":75,"detections":[
                {"class_id":0,"class_name":"person","confidence":0.9,"bbox":[0.5,0.5,0.2,0.4]},
                {"class_id":2,"class_name":"car","confidence":0.4,"bbox":[0.5,0.5,0.2,0.4]}]}]}"#;
        let parsed = parse_detections(doc, Some(3)).unwrap();
        assert_eq!(parsed.shot_count(), 3);
        assert_eq!(parsed.per_shot[0].len(), 1);
        assert_eq!(parsed.per_shot[0][0].class_name, "person");
        assert_eq!(parsed.frame_index[0], Some(75));
        assert!(parsed.per_shot[1].is_empty() && parsed.per_shot[2].is_empty());
    }

    #[test]
    fn parse_rejects_bad_records() {
        let wrap = |rec: &str| {
            format!(
                r#"{{"video_id":"v","fps":30,"shot_length_s":5,"shots":[{{"shot_id":0,"detections":[{rec}]}}]}}"#
            )
        };
        let bad = [
            r#"{"class_id":80,"class_name":"x","confidence":0.9,"bbox":[0.5,0.5,0.1,0.1]}"#,
            r#"{"class_id":-1,"confidence":0.9,"bbox":[0.5,0.5,0.1,0.1]}"#,
            r#"{"class_id":0,"class_name":"car","confidence":0.9,"bbox":[0.5,0.5,0.1,0.1]}"#,
            r#"{"class_id":0,"confidence":0.9,"bbox":[0.5,0.5,0.0,0.1]}"#,
            r#"{"class_id":0,"confidence":0.9,"bbox":[0.5,0.5,0.1,-0.1]}"#,
            r#"{"class_id":0,"confidence":1.2,"bbox":[0.5,0.5,0.1,0.1]}"#,
            r#"{"class_id":0,"confidence":0.9,"bbox":[0.5,0.5,0.1]}"#,
        ];
        for rec in bad {
            assert!(
                matches!(parse_detections(&wrap(rec), None), Err(Error::Schema(_))),
                "{rec}"
            );
        }
    }

    #[test]
    fn parse_clamps_boxes() {
        let doc = r#"{"video_id":"v","fps":30,"shot_length_s":5,"shots":[{"shot_id":0,"detections":[
            {"class_id":0,"confidence":0.8,"bbox":[0.9,0.5,0.4,0.2]}]}]}"#;
        let parsed = parse_detections(doc, None).unwrap();
        let b = parsed.per_shot[0][0].bbox;
        assert_abs_diff_eq!(b.cx, 0.85, epsilon = 1e-12);
        assert_abs_diff_eq!(b.w, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(b.h, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn parse_rejects_duplicate_and_out_of_range_shots() {
        let dup =
            r#"{"video_id":"v","fps":30,"shot_length_s":5,"shots":[{"shot_id":0},{"shot_id":0}]}"#;
        assert!(matches!(parse_detections(dup, None), Err(Error::Schema(_))));
        let oob = r#"{"video_id":"v","fps":30,"shot_length_s":5,"shots":[{"shot_id":4}]}"#;
        assert!(matches!(
            parse_detections(oob, Some(2)),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn features_of_empty_shot() {
        let mask = SaliencyMask::filled(8, 8, false).unwrap();
        let f = FeatureVector::from_parts(&[], &mask);
        assert!(f.histogram().iter().all(|&h| h == 0.0));
        assert_eq!(f.0[FeatureVector::COVERAGE], 0.0);
        assert_eq!(f.0[FeatureVector::CENTROID_X], 0.5);
        assert_eq!(f.0[FeatureVector::CENTROID_Y], 0.5);
        assert_eq!(f.0[FeatureVector::AREA], 0.0);
    }

    #[test]
    fn features_histogram_normalized() {
        let mask = SaliencyMask::filled(4, 4, true).unwrap();
        let dets = [
            det(0, [0.3, 0.3, 0.1, 0.1]),
            det(0, [0.6, 0.6, 0.1, 0.2]),
            det(2, [0.5, 0.5, 0.2, 0.2]),
        ];
        let f = FeatureVector::from_parts(&dets, &mask);
        assert_abs_diff_eq!(f.0[0], 2.0 / 3.0);
        assert_abs_diff_eq!(f.0[2], 1.0 / 3.0);
        assert_abs_diff_eq!(f.histogram().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_eq!(f.0[FeatureVector::COVERAGE], 1.0);
        assert_eq!(f.0[FeatureVector::CENTROID_X], 0.5);
        assert_eq!(f.0[FeatureVector::CENTROID_Y], 0.5);
        assert_abs_diff_eq!(
            f.0[FeatureVector::AREA],
            0.01 + 0.02 + 0.04,
            epsilon = 1e-12
        );
    }

    #[test]
    fn area_feature_is_clamped() {
        let mask = SaliencyMask::filled(2, 2, false).unwrap();
        let dets = vec![det(0, [0.5, 0.5, 1.0, 1.0]); 3];
        let f = FeatureVector::from_parts(&dets, &mask);
        assert_eq!(f.0[FeatureVector::AREA], 1.0);
    }

    #[test]
    fn assemble_rejects_empty() {
        assert!(matches!(assemble_features(&[]), Err(Error::Input(_))));
    }

    #[test]
    fn frame_index_picks_nearest_in_span() {
        let dir = std::env::temp_dir().join(format!("keyshot-frames-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        for i in [10, 20, 35] {
            std::fs::write(dir.join(format!("frame_{i:06}.png")), b"").unwrap();
        }
        std::fs::write(dir.join("notes.txt"), b"").unwrap();
        let idx = FrameIndex::scan(&dir).unwrap();
        assert_eq!(idx.len(), 3);
        assert_eq!(idx.nearest(14, 0, 25).unwrap().0, 10);
        assert_eq!(idx.nearest(16, 0, 25).unwrap().0, 20);
        assert_eq!(idx.nearest(15, 0, 25).unwrap().0, 10);
        assert_eq!(idx.nearest(30, 25, 40).unwrap().0, 35);
        assert!(idx.nearest(45, 40, 50).is_none());
        std::fs::remove_dir_all(dir).ok();
    }

    fn arb_record() -> impl Strategy<Value = DetectionRecord> {
        (
            0usize..NUM_CLASSES,
            0.05f64..0.95,
            0.05f64..0.95,
            0.01f64..0.5,
            0.01f64..0.5,
        )
            .prop_map(|(c, cx, cy, w, h)| det(c, [cx, cy, w, h]))
    }

    fn arb_shot() -> impl Strategy<Value = ShotRecord> {
        (
            proptest::collection::vec(arb_record(), 0..5),
            proptest::collection::vec(any::<bool>(), 16),
        )
            .prop_map(|(detections, bits)| ShotRecord {
                span: ShotSpan {
                    shot_id: 0,
                    t_start: 0.0,
                    t_end: 5.0,
                    rep_frame: 0,
                },
                detections,
                saliency: SaliencyMask::new(4, 4, bits).unwrap(),
            })
    }

    proptest! {
        #[test]
        fn spans_tile_the_video(duration in 0.1f64..500.0, len in 0.5f64..30.0, fps in 1.0f64..60.0) {
            let shots = segment(VideoMeta { duration_s: duration, fps }, len).unwrap();
            prop_assert_eq!(shots[0].t_start, 0.0);
            prop_assert_eq!(shots.last().unwrap().t_end, duration);
            for w in shots.windows(2) {
                prop_assert_eq!(w[0].t_end, w[1].t_start);
            }
            for s in &shots {
                prop_assert!(s.t_end > s.t_start);
                prop_assert!(s.duration() <= len + 1e-9);
            }
        }

        #[test]
        fn features_are_bounded(shot in arb_shot()) {
            let f = FeatureVector::from_parts(&shot.detections, &shot.saliency);
            prop_assert!(f.0.iter().all(|x| (0.0..=1.0).contains(x)));
            let sum: f64 = f.histogram().iter().sum();
            prop_assert!(sum == 0.0 || (sum - 1.0).abs() < 1e-12);
        }

        #[test]
        fn assembly_is_permutation_equivariant(
            shots in proptest::collection::vec(arb_shot(), 1..8),
            seed in any::<u64>(),
        ) {
            let base = assemble_features(&shots).unwrap();
            let mut order: Vec<usize> = (0..shots.len()).collect();
            let mut s = seed;
            for i in (1..order.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                order.swap(i, (s >> 33) as usize % (i + 1));
            }
            let permuted: Vec<_> = order.iter().map(|&i| shots[i].clone()).collect();
            let out = assemble_features(&permuted).unwrap();
            for (k, &i) in order.iter().enumerate() {
                prop_assert_eq!(out.rows()[k], base.rows()[i]);
            }
            prop_assert_eq!(assemble_features(&shots).unwrap(), base);
        }
    }
}
