//! Seeded synthetic inputs shared by the benchmarks.

use keyshot_core::ingest::{self, BBox, DetectionRecord, ShotRecord, VideoMeta};
use keyshot_core::saliency::SaliencyMask;
use keyshot_core::QueryProfile;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MASK_SIDE: u32 = 256;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_mask(rng: &mut ChaCha8Rng) -> SaliencyMask {
    let x0 = rng.gen_range(0..MASK_SIDE / 2);
    let y0 = rng.gen_range(0..MASK_SIDE / 2);
    let (w, h) = (
        rng.gen_range(16..MASK_SIDE / 2),
        rng.gen_range(16..MASK_SIDE / 2),
    );
    let bits = (0..MASK_SIDE * MASK_SIDE)
        .map(|i| {
            let (x, y) = (i % MASK_SIDE, i / MASK_SIDE);
            (x0..x0 + w).contains(&x) && (y0..y0 + h).contains(&y)
        })
        .collect();
    SaliencyMask::new(MASK_SIDE, MASK_SIDE, bits).unwrap()
}

fn random_detections(rng: &mut ChaCha8Rng) -> Vec<DetectionRecord> {
    (0..rng.gen_range(0..6))
        .map(|_| {
            let bbox = BBox {
                cx: rng.gen_range(0.0..1.0),
                cy: rng.gen_range(0.0..1.0),
                w: rng.gen_range(0.05..0.5),
                h: rng.gen_range(0.05..0.5),
            };
            DetectionRecord::new(rng.gen_range(0..12), rng.gen_range(0.5..1.0), bbox).unwrap()
        })
        .collect()
}

/// `n` five-second shots at 25 fps with random objects and masks.
pub fn shots(n: usize, seed: u64) -> Vec<ShotRecord> {
    let mut rng = rng(seed);
    let meta = VideoMeta {
        duration_s: n as f64 * ingest::DEFAULT_SHOT_LENGTH_S,
        fps: 25.0,
    };
    ingest::segment(meta, ingest::DEFAULT_SHOT_LENGTH_S)
        .unwrap()
        .into_iter()
        .map(|span| ShotRecord {
            span,
            detections: random_detections(&mut rng),
            saliency: random_mask(&mut rng),
        })
        .collect()
}

pub fn query(seed: u64) -> QueryProfile {
    let mut rng = rng(seed);
    QueryProfile {
        detections: random_detections(&mut rng),
        saliency: random_mask(&mut rng),
    }
}

/// Square weight matrix with entries in [0, 1).
pub fn weights(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng(seed);
    (0..n)
        .map(|_| (0..n).map(|_| rng.gen_range(0.0..1.0)).collect())
        .collect()
}
