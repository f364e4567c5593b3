//! HSV saturation/value planes and the salient-region mask.
//!
//! A pixel is salient when `exp(-(V - S)) > alpha`. Equivalently it is salient
//! iff `V - S < -ln(alpha)`, so with the default `alpha = 0.7` the boundary
//! sits at `V - S ≈ 0.35667` and every pixel with `S >= V` is salient.
//!
//! Masks of different sizes are compared after nearest-neighbour resampling
//! to [`COMPARE_SIZE`]×[`COMPARE_SIZE`].

use std::io::Write;
use std::path::Path;

use image::RgbImage;

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.7;

/// Resolution at which masks are compared.
pub const COMPARE_SIZE: u32 = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct HsvPlanes {
    width: u32,
    height: u32,
    s: Vec<f64>,
    v: Vec<f64>,
}

impl HsvPlanes {
    pub fn new(width: u32, height: u32, s: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let len = area(width, height)?;
        if s.len() != len || v.len() != len {
            return Err(Error::Dimension(format!(
                "planes must hold {len} entries, got s={} v={}",
                s.len(),
                v.len()
            )));
        }
        if s.iter().chain(v.iter()).any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::Input("plane entries must lie in [0,1]".into()));
        }
        Ok(Self {
            width,
            height,
            s,
            v,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn saturation(&self) -> &[f64] {
        &self.s
    }

    pub fn value(&self) -> &[f64] {
        &self.v
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SaliencyMask {
    width: u32,
    height: u32,
    mask: Vec<bool>,
}

impl SaliencyMask {
    pub fn new(width: u32, height: u32, mask: Vec<bool>) -> Result<Self> {
        let len = area(width, height)?;
        if mask.len() != len {
            return Err(Error::Dimension(format!(
                "mask must hold {len} entries, got {}",
                mask.len()
            )));
        }
        Ok(Self {
            width,
            height,
            mask,
        })
    }

    pub fn filled(width: u32, height: u32, value: bool) -> Result<Self> {
        let len = area(width, height)?;
        Self::new(width, height, vec![value; len])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.mask
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.mask[(y * self.width + x) as usize]
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn salient_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Nearest-neighbour resample; the source pixel for destination column
    /// `x` is `floor((x + 0.5) * src_w / dst_w)`.
    pub fn resample(&self, width: u32, height: u32) -> Result<SaliencyMask> {
        if width == self.width && height == self.height {
            return Ok(self.clone());
        }
        let len = area(width, height)?;
        let xs: Vec<u32> = (0..width)
            .map(|x| nearest_source(x, self.width, width))
            .collect();
        let mut mask = Vec::with_capacity(len);
        for y in 0..height {
            let sy = nearest_source(y, self.height, height);
            mask.extend(xs.iter().map(|&sx| self.get(sx, sy)));
        }
        SaliencyMask::new(width, height, mask)
    }

    /// Binary PGM (P5), salient pixels as 255.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.mask.iter().map(|&b| if b { 255u8 } else { 0 }));
        out
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&self.to_pgm())
            .map_err(|e| Error::io(path, e))
    }

    /// Reads a grayscale raster and treats any pixel >= 128 as salient.
    pub fn read_image(path: &Path) -> Result<SaliencyMask> {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let gray = img.to_luma8();
        let (w, h) = gray.dimensions();
        SaliencyMask::new(w, h, gray.pixels().map(|p| p.0[0] >= 128).collect())
    }
}

fn nearest_source(dst: u32, src_len: u32, dst_len: u32) -> u32 {
    let s = ((2 * dst as u64 + 1) * src_len as u64) / (2 * dst_len as u64);
    (s as u32).min(src_len - 1)
}

fn area(width: u32, height: u32) -> Result<usize> {
    if width == 0 || height == 0 {
        return Err(Error::Dimension(format!(
            "zero-area raster {width}x{height}"
        )));
    }
    Ok(width as usize * height as usize)
}

/// Saturation and value planes of an 8-bit RGB frame. Hue is never needed.
pub fn hsv_planes(frame: &RgbImage) -> Result<HsvPlanes> {
    let (width, height) = frame.dimensions();
    let len = area(width, height)?;
    let mut s = Vec::with_capacity(len);
    let mut v = Vec::with_capacity(len);
    for px in frame.pixels() {
        let [r, g, b] = px.0;
        let max = r.max(g).max(b);
        let min = r.min(g).min(b);
        let sat = if max == 0 {
            0.0
        } else {
            1.0 - min as f64 / max as f64
        };
        s.push(sat.clamp(0.0, 1.0));
        v.push((max as f64 / 255.0).clamp(0.0, 1.0));
    }
    Ok(HsvPlanes {
        width,
        height,
        s,
        v,
    })
}

pub fn validate_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "alpha must lie in (0,1), got {alpha}"
        )))
    }
}

#[inline]
pub fn is_salient(v: f64, s: f64, alpha: f64) -> bool {
    (-(v - s)).exp() > alpha
}

pub fn salient_mask(planes: &HsvPlanes, alpha: f64) -> Result<SaliencyMask> {
    validate_alpha(alpha)?;
    let mask = planes
        .v
        .iter()
        .zip(&planes.s)
        .map(|(&v, &s)| is_salient(v, s, alpha))
        .collect();
    SaliencyMask::new(planes.width, planes.height, mask)
}

/// Fraction of pixels on which two equally sized masks disagree.
pub fn mask_difference(a: &SaliencyMask, b: &SaliencyMask) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::Dimension(format!(
            "mask sizes differ: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let total = area(a.width, a.height)?;
    let diff = a.mask.iter().zip(&b.mask).filter(|(x, y)| x != y).count();
    Ok(diff as f64 / total as f64)
}

/// [`mask_difference`] after resampling both masks to the comparison grid.
pub fn compare_masks(a: &SaliencyMask, b: &SaliencyMask) -> Result<f64> {
    let a = a.resample(COMPARE_SIZE, COMPARE_SIZE)?;
    let b = b.resample(COMPARE_SIZE, COMPARE_SIZE)?;
    mask_difference(&a, &b)
}
