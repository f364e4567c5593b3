//! Synthetic fixtures: a detections document, a directory of precomputed
//! salient masks, the query's detections/mask/image and a ground truth.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use keyshot_core::saliency::SaliencyMask;

pub const FPS: f64 = 10.0;
pub const SHOT_LENGTH: f64 = 5.0;
pub const MASK_SIZE: u32 = 256;

const PERSON: usize = 0;
const CAR: usize = 2;

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub n_shots: usize,
    pub planted: Vec<usize>,
}

impl Fixture {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn detections(&self) -> PathBuf {
        self.path("detections.json")
    }

    pub fn masks(&self) -> PathBuf {
        self.path("masks")
    }

    pub fn query_mask(&self) -> PathBuf {
        self.path("query_mask.pgm")
    }

    pub fn query_image(&self) -> PathBuf {
        self.path("query.png")
    }

    pub fn query_detections(&self) -> PathBuf {
        self.path("query_detections.json")
    }

    pub fn ground_truth(&self) -> PathBuf {
        self.path("ground_truth.json")
    }

    pub fn out(&self) -> PathBuf {
        self.path("out")
    }

    pub fn duration(&self) -> f64 {
        self.n_shots as f64 * SHOT_LENGTH
    }

    /// Common summarize/score arguments reading masks and the query mask.
    pub fn pipeline_args(&self) -> Vec<String> {
        vec![
            "--detections".into(),
            self.detections().display().to_string(),
            "--masks".into(),
            self.masks().display().to_string(),
            "--query-mask".into(),
            self.query_mask().display().to_string(),
            "--query-detections".into(),
            self.query_detections().display().to_string(),
        ]
    }
}

fn rect_mask(x0: u32, y0: u32, x1: u32, y1: u32) -> SaliencyMask {
    let bits = (0..MASK_SIZE * MASK_SIZE)
        .map(|i| {
            let (x, y) = (i % MASK_SIZE, i / MASK_SIZE);
            x >= x0 && x < x1 && y >= y0 && y < y1
        })
        .collect();
    SaliencyMask::new(MASK_SIZE, MASK_SIZE, bits).unwrap()
}

fn query_mask() -> SaliencyMask {
    rect_mask(40, 60, 140, 220)
}

fn query_records() -> serde_json::Value {
    json!([
        {"class_id": PERSON, "class_name": "person", "confidence": 0.92, "bbox": [0.3, 0.5, 0.2, 0.4]},
        {"class_id": CAR, "class_name": "car", "confidence": 0.81, "bbox": [0.7, 0.6, 0.3, 0.2]}
    ])
}

pub fn rep_frame(shot: usize) -> usize {
    ((FPS * (shot as f64 * SHOT_LENGTH + (shot + 1) as f64 * SHOT_LENGTH) / 2.0).floor()) as usize
}

/// `n_shots` shots; the `planted` ones repeat the query's objects and
/// salient region, the rest hold other classes and other regions.
pub fn build(n_shots: usize, planted: &[usize], seed: u64) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std::fs::create_dir_all(dir.path().join("masks")).unwrap();

    let mut shots = Vec::new();
    let mut gt = Vec::new();
    for i in 0..n_shots {
        let frame = rep_frame(i);
        let (records, mask) = if planted.contains(&i) {
            gt.push(json!({"shot_id": i, "concepts": ["person", "car"]}));
            (query_records(), query_mask())
        } else {
            let count = rng.gen_range(1..=3);
            let records: Vec<_> = (0..count)
                .map(|_| {
                    let class_id = rng.gen_range(3..80);
                    json!({
                        "class_id": class_id,
                        "confidence": rng.gen_range(0.5..1.0),
                        "bbox": [rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9),
                                 rng.gen_range(0.05..0.3), rng.gen_range(0.05..0.3)]
                    })
                })
                .collect();
            let x0 = rng.gen_range(150..200);
            let y0 = rng.gen_range(0..100);
            let mask = rect_mask(
                x0,
                y0,
                x0 + rng.gen_range(20..56),
                y0 + rng.gen_range(20..100),
            );
            (json!(records), mask)
        };
        mask.write_pgm(&dir.path().join(format!("masks/frame_{frame:06}.pgm")))
            .unwrap();
        shots.push(json!({"shot_id": i, "frame_index": frame, "detections": records}));
    }

    let doc = json!({
        "video_id": "synthetic",
        "fps": FPS,
        "shot_length_s": SHOT_LENGTH,
        "shots": shots,
    });
    write_json(&dir.path().join("detections.json"), &doc);
    write_json(
        &dir.path().join("query_detections.json"),
        &json!({"detections": query_records()}),
    );
    write_json(
        &dir.path().join("ground_truth.json"),
        &json!({"video_id": "synthetic", "shots": gt}),
    );
    query_mask()
        .write_pgm(&dir.path().join("query_mask.pgm"))
        .unwrap();
    query_image().save(dir.path().join("query.png")).unwrap();

    Fixture {
        dir,
        n_shots,
        planted: planted.to_vec(),
    }
}

/// A saturated red subject on a gray background.
pub fn query_image() -> RgbImage {
    RgbImage::from_fn(320, 240, |x, y| {
        if (60..160).contains(&x) && (40..200).contains(&y) {
            Rgb([220, 30, 30])
        } else {
            Rgb([150, 150, 150])
        }
    })
}

pub fn write_json(path: &Path, value: &serde_json::Value) {
    std::fs::write(path, serde_json::to_string_pretty(value).unwrap()).unwrap();
}

pub fn keyshot(args: &[String]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_keyshot"))
        .args(args)
        .output()
        .expect("keyshot binary runs")
}

pub fn args(parts: &[&str]) -> Vec<String> {
    parts.iter().map(|s| s.to_string()).collect()
}
