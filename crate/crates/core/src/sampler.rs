//! Annotation target selection: roughly equidistant points inside a part
//! mask, found by k-means and presented in row-band order.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::PartId;

/// Upper bound on annotation targets per part.
pub const MAX_POINTS_PER_PART: usize = 14;
const LLOYD_ITERATIONS: usize = 100;
const SUCCESSION_BANDS: u64 = 4;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("mask is empty")]
    EmptyMask,
    #[error("pixel ({x}, {y}) outside {width}x{height} image")]
    OutOfBounds { x: u32, y: u32, width: u32, height: u32 },
    #[error("requested {k} points from a mask of {available} pixels")]
    KTooLarge { k: usize, available: usize },
    #[error("invalid segmentation: {0}")]
    InvalidSegmentation(String),
    #[error("mask image: {0}")]
    Image(#[from] image::ImageError),
}

/// Pixels of one body part in one image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartMask {
    width: u32,
    height: u32,
    part: PartId,
    /// Sorted by (y, x), unique.
    pixels: Vec<(u32, u32)>,
}

impl PartMask {
    pub fn new(
        width: u32,
        height: u32,
        part: PartId,
        mut pixels: Vec<(u32, u32)>,
    ) -> Result<Self, SamplerError> {
        if let Some(&(x, y)) = pixels.iter().find(|&&(x, y)| x >= width || y >= height) {
            return Err(SamplerError::OutOfBounds {
                x,
                y,
                width,
                height,
            });
        }
        pixels.sort_unstable_by_key(|&(x, y)| (y, x));
        pixels.dedup();
        if pixels.is_empty() {
            return Err(SamplerError::EmptyMask);
        }
        Ok(PartMask {
            width,
            height,
            part,
            pixels,
        })
    }

    /// Non-zero pixels of a grayscale image.
    pub fn from_luma(img: &image::GrayImage, part: PartId) -> Result<Self, SamplerError> {
        let pixels = img
            .enumerate_pixels()
            .filter(|(_, _, p)| p.0[0] != 0)
            .map(|(x, y, _)| (x, y))
            .collect();
        Self::new(img.width(), img.height(), part, pixels)
    }

    pub fn from_png(path: &Path, part: PartId) -> Result<Self, SamplerError> {
        let img = image::open(path)?.to_luma8();
        Self::from_luma(&img, part)
    }

    /// Decodes a COCO run-length segmentation (column-major runs, starting
    /// with background).
    pub fn from_rle(rle: &Rle, part: PartId) -> Result<Self, SamplerError> {
        let [height, width] = rle.size;
        let counts = rle.counts.decode()?;
        let total = u64::from(width) * u64::from(height);
        let mut pixels = Vec::new();
        let mut pos: u64 = 0;
        for (k, &run) in counts.iter().enumerate() {
            let end = pos + run;
            if end > total {
                return Err(SamplerError::InvalidSegmentation(format!(
                    "runs cover {end} pixels but the image has {total}"
                )));
            }
            if k % 2 == 1 {
                for i in pos..end {
                    let x = (i / u64::from(height)) as u32;
                    let y = (i % u64::from(height)) as u32;
                    pixels.push((x, y));
                }
            }
            pos = end;
        }
        Self::new(width, height, part, pixels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn part(&self) -> PartId {
        self.part
    }

    pub fn pixels(&self) -> &[(u32, u32)] {
        &self.pixels
    }

    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        self.pixels.binary_search_by_key(&(y, x), |&(px, py)| (py, px)).is_ok()
    }

    /// Re-encodes as uncompressed COCO RLE.
    pub fn to_rle(&self) -> Rle {
        let h = u64::from(self.height);
        let mut linear: Vec<u64> = self
            .pixels
            .iter()
            .map(|&(x, y)| u64::from(x) * h + u64::from(y))
            .collect();
        linear.sort_unstable();
        let mut counts = Vec::new();
        let mut pos = 0u64;
        let mut k = 0;
        while k < linear.len() {
            let start = linear[k];
            let mut end = start + 1;
            k += 1;
            while k < linear.len() && linear[k] == end {
                end += 1;
                k += 1;
            }
            counts.push(start - pos);
            counts.push(end - start);
            pos = end;
        }
        let total = u64::from(self.width) * h;
        if pos < total {
            counts.push(total - pos);
        }
        Rle {
            size: [self.height, self.width],
            counts: RleCounts::Runs(counts),
        }
    }
}

/// COCO-style RLE: `size` is `[height, width]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rle {
    pub size: [u32; 2],
    pub counts: RleCounts,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RleCounts {
    Runs(Vec<u64>),
    /// LEB128-like compressed string used by pycocotools.
    Compressed(String),
}

impl RleCounts {
    pub fn decode(&self) -> Result<Vec<u64>, SamplerError> {
        match self {
            RleCounts::Runs(r) => Ok(r.clone()),
            RleCounts::Compressed(s) => decode_compressed_counts(s),
        }
    }
}

fn decode_compressed_counts(s: &str) -> Result<Vec<u64>, SamplerError> {
    let bytes = s.as_bytes();
    let mut counts: Vec<i64> = Vec::new();
    let mut p = 0;
    while p < bytes.len() {
        let mut x: i64 = 0;
        let mut k = 0;
        loop {
            let c = i64::from(bytes.get(p).copied().ok_or_else(|| {
                SamplerError::InvalidSegmentation("truncated compressed counts".into())
            })?) - 48;
            if !(0..64).contains(&c) || k > 12 {
                return Err(SamplerError::InvalidSegmentation(format!(
                    "bad character in compressed counts at {p}"
                )));
            }
            x |= (c & 0x1f) << (5 * k);
            let more = c & 0x20 != 0;
            p += 1;
            k += 1;
            if !more {
                if c & 0x10 != 0 {
                    x |= -1i64 << (5 * k);
                }
                break;
            }
        }
        if counts.len() > 2 {
            x += counts[counts.len() - 2];
        }
        counts.push(x);
    }
    counts
        .into_iter()
        .map(|c| {
            u64::try_from(c)
                .map_err(|_| SamplerError::InvalidSegmentation(format!("negative run {c}")))
        })
        .collect()
}

/// How many targets a part gets: `min(14, max(1, round(sqrt(area) / 10)))`.
pub fn choose_point_count(mask: &PartMask) -> usize {
    point_count_for_area(mask.area())
}

pub fn point_count_for_area(area: usize) -> usize {
    let raw = ((area as f64).sqrt() / 10.0).round() as usize;
    raw.clamp(1, MAX_POINTS_PER_PART)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampledPoint {
    pub x: u32,
    pub y: u32,
    /// Position in the presentation order.
    pub succession: usize,
}

/// Targets for one part, sorted by succession index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampledPoints {
    pub part: PartId,
    pub points: Vec<SampledPoint>,
}

fn squared_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

fn nearest_center(p: [f64; 2], centers: &[[f64; 2]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, &center) in centers.iter().enumerate() {
        let d = squared_distance(p, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means objective: squared distance of each mask pixel to its nearest center.
pub fn within_cluster_ss(mask: &PartMask, centers: &[[f64; 2]]) -> f64 {
    mask.pixels
        .iter()
        .map(|&(x, y)| nearest_center([f64::from(x), f64::from(y)], centers).1)
        .sum()
}

fn kmeans_plus_plus(points: &[[f64; 2]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let mut centers = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..points.len())]);
    let mut d2: Vec<f64> = points.iter().map(|&p| squared_distance(p, centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = d2.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            while d2[chosen] == 0.0 {
                chosen -= 1;
            }
            chosen
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[pick];
        centers.push(c);
        for (i, &p) in points.iter().enumerate() {
            d2[i] = d2[i].min(squared_distance(p, c));
        }
    }
    centers
}

fn lloyd(points: &[[f64; 2]], centers: &mut [[f64; 2]]) {
    let k = centers.len();
    let mut assignment = vec![usize::MAX; points.len()];
    for _ in 0..LLOYD_ITERATIONS {
        let mut changed = false;
        for (i, &p) in points.iter().enumerate() {
            let (c, _) = nearest_center(p, centers);
            if assignment[i] != c {
                assignment[i] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![[0.0f64; 3]; k];
        for (i, &p) in points.iter().enumerate() {
            let s = &mut sums[assignment[i]];
            s[0] += p[0];
            s[1] += p[1];
            s[2] += 1.0;
        }
        for (c, s) in centers.iter_mut().zip(&sums) {
            if s[2] > 0.0 {
                *c = [s[0] / s[2], s[1] / s[2]];
            }
        }
    }
}

/// k-means++ seeded Lloyd clustering of the mask pixels. Each centroid is
/// snapped to the nearest not-yet-used mask pixel, and the targets are
/// ordered by horizontal band (a quarter of the image height each), then x.
pub fn sample_points(mask: &PartMask, k: usize, seed: u64) -> Result<SampledPoints, SamplerError> {
    if k == 0 || k > mask.area() {
        return Err(SamplerError::KTooLarge {
            k,
            available: mask.area(),
        });
    }
    let points: Vec<[f64; 2]> = mask
        .pixels
        .iter()
        .map(|&(x, y)| [f64::from(x), f64::from(y)])
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = kmeans_plus_plus(&points, k, &mut rng);
    lloyd(&points, &mut centers);

    let mut taken = vec![false; points.len()];
    let mut chosen: Vec<(u32, u32)> = Vec::with_capacity(k);
    for c in &centers {
        let mut best: Option<(f64, usize)> = None;
        for (i, &p) in points.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let d = squared_distance(p, *c);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        let (_, i) = best.expect("k <= mask size leaves a free pixel");
        taken[i] = true;
        chosen.push(mask.pixels[i]);
    }

    let height = u64::from(mask.height);
    chosen.sort_by_key(|&(x, y)| (u64::from(y) * SUCCESSION_BANDS / height, x, y));
    Ok(SampledPoints {
        part: mask.part,
        points: chosen
            .into_iter()
            .enumerate()
            .map(|(succession, (x, y))| SampledPoint { x, y, succession })
            .collect(),
    })
}
