//! Turns per-pixel part posteriors and per-part UV regressions into an IUV
//! raster: each pixel takes the most probable class, and if that is a body
//! part, the U/V regressed for that part.

use image::RgbImage;
use thiserror::Error;

use crate::mesh::{PartId, PART_COUNT};
use crate::metrics::{Estimate, PredictedInstance};
use crate::parametrization::{ParamError, UVAtlas};

/// Background plus the 24 parts.
pub const CLASS_COUNT: usize = PART_COUNT + 1;
/// Posterior channels, then U for parts 1..=24, then V for parts 1..=24.
pub const CHANNEL_COUNT: usize = CLASS_COUNT + 2 * PART_COUNT;
const POSTERIOR_SUM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid scores at pixel ({x}, {y}): {message}")]
    InvalidScores { x: u32, y: u32, message: String },
    #[error("pixel ({0}, {1}) outside the raster")]
    OutOfBounds(u32, u32),
    #[error(transparent)]
    Chart(#[from] ParamError),
}

/// Network outputs for one image, stored channel-planar: channel `c` occupies
/// `data[c*w*h .. (c+1)*w*h]`, row-major within the plane.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMaps {
    width: u32,
    height: u32,
    data: Vec<f32>,
}

impl ScoreMaps {
    pub fn new(width: u32, height: u32, data: Vec<f32>) -> Result<Self, DecodeError> {
        let plane = width as usize * height as usize;
        if data.len() != CHANNEL_COUNT * plane {
            return Err(DecodeError::ShapeMismatch(format!(
                "{} values for {width}x{height} with {CHANNEL_COUNT} channels",
                data.len()
            )));
        }
        let maps = ScoreMaps { width, height, data };
        for y in 0..height {
            for x in 0..width {
                maps.check_pixel(x, y)?;
            }
        }
        Ok(maps)
    }

    fn check_pixel(&self, x: u32, y: u32) -> Result<(), DecodeError> {
        let invalid = |message: String| DecodeError::InvalidScores { x, y, message };
        let i = self.pixel(x, y);
        let mut sum = 0.0f64;
        for c in 0..CLASS_COUNT {
            let p = self.channel(c)[i];
            if !(p >= 0.0) || !p.is_finite() {
                return Err(invalid(format!("posterior {c} is {p}")));
            }
            sum += f64::from(p);
        }
        if (sum - 1.0).abs() > POSTERIOR_SUM_TOLERANCE {
            return Err(invalid(format!("posteriors sum to {sum}")));
        }
        for c in CLASS_COUNT..CHANNEL_COUNT {
            if !self.channel(c)[i].is_finite() {
                return Err(invalid(format!("regression channel {c} is not finite")));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    fn pixel(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    fn channel(&self, c: usize) -> &[f32] {
        let plane = self.width as usize * self.height as usize;
        &self.data[c * plane..(c + 1) * plane]
    }

    pub fn posterior(&self, class: usize, x: u32, y: u32) -> f32 {
        self.channel(class)[self.pixel(x, y)]
    }

    /// Regressed (U, V) of a surface part.
    pub fn regression(&self, part: PartId, x: u32, y: u32) -> (f32, f32) {
        let i = self.pixel(x, y);
        let s = part.slot();
        (
            self.channel(CLASS_COUNT + s)[i],
            self.channel(CLASS_COUNT + PART_COUNT + s)[i],
        )
    }
}

/// Per-pixel (part, U, V). Background pixels hold part 0 and U = V = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct IuvRaster {
    width: u32,
    height: u32,
    part: Vec<PartId>,
    uv: Vec<[f32; 2]>,
}

impl IuvRaster {
    pub fn background(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        IuvRaster {
            width,
            height,
            part: vec![PartId::BACKGROUND; n],
            uv: vec![[0.0; 2]; n],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    pub fn get(&self, x: u32, y: u32) -> (PartId, f32, f32) {
        let i = self.index(x, y);
        (self.part[i], self.uv[i][0], self.uv[i][1])
    }

    /// Sets a pixel; U and V are clamped to [0, 1] and zeroed for background.
    pub fn set(&mut self, x: u32, y: u32, part: PartId, u: f32, v: f32) {
        let i = self.index(x, y);
        self.part[i] = part;
        self.uv[i] = if part.is_background() {
            [0.0, 0.0]
        } else {
            [u.clamp(0.0, 1.0), v.clamp(0.0, 1.0)]
        };
    }

    /// 8-bit export: (I, round(255 U), round(255 V)).
    pub fn to_png_image(&self) -> RgbImage {
        RgbImage::from_fn(self.width, self.height, |x, y| {
            let (p, u, v) = self.get(x, y);
            image::Rgb([p.get(), quantize(u), quantize(v)])
        })
    }

    pub fn from_png_image(img: &RgbImage) -> Result<Self, DecodeError> {
        let mut raster = IuvRaster::background(img.width(), img.height());
        for (x, y, px) in img.enumerate_pixels() {
            let part = PartId::new(px.0[0]).map_err(|e| DecodeError::InvalidScores {
                x,
                y,
                message: e.to_string(),
            })?;
            raster.set(x, y, part, f32::from(px.0[1]) / 255.0, f32::from(px.0[2]) / 255.0);
        }
        Ok(raster)
    }
}

fn quantize(c: f32) -> u8 {
    (255.0 * c).round().clamp(0.0, 255.0) as u8
}

/// Most probable class per pixel (lowest index on ties) and, for body parts,
/// that part's regressed U/V clamped to [0, 1].
pub fn decode(maps: &ScoreMaps) -> IuvRaster {
    let mut raster = IuvRaster::background(maps.width, maps.height);
    for y in 0..maps.height {
        for x in 0..maps.width {
            let mut best = 0;
            let mut best_p = maps.posterior(0, x, y);
            for c in 1..CLASS_COUNT {
                let p = maps.posterior(c, x, y);
                if p > best_p {
                    best = c;
                    best_p = p;
                }
            }
            if best > 0 {
                let part = PartId::new(best as u8).expect("class index is a part");
                let (u, v) = maps.regression(part, x, y);
                raster.set(x, y, part, u, v);
            }
        }
    }
    raster
}

/// Maps raster pixels to surface vertices through the atlas.
pub fn lift(raster: &IuvRaster, atlas: &UVAtlas, pixels: &[(u32, u32)]) -> Result<Vec<Estimate>, DecodeError> {
    pixels
        .iter()
        .map(|&(x, y)| {
            if x >= raster.width || y >= raster.height {
                return Err(DecodeError::OutOfBounds(x, y));
            }
            let (part, u, v) = raster.get(x, y);
            if part.is_background() {
                Ok(Estimate::Background)
            } else {
                Ok(Estimate::Vertex(atlas.uv_to_vertex(part, f64::from(u), f64::from(v))?))
            }
        })
        .collect()
}

/// Prediction for a detection whose raster covers the image box starting at
/// `origin`. Every foreground pixel is lifted.
pub fn predicted_instance(
    raster: &IuvRaster,
    atlas: &UVAtlas,
    origin: (i64, i64),
    id: u64,
    image_id: u64,
    score: f64,
) -> Result<PredictedInstance, DecodeError> {
    let pixels: Vec<(u32, u32)> = (0..raster.height)
        .flat_map(|y| (0..raster.width).map(move |x| (x, y)))
        .filter(|&(x, y)| !raster.get(x, y).0.is_background())
        .collect();
    let estimates = lift(raster, atlas, &pixels)?;
    let mut pred = PredictedInstance::new(id, image_id, score);
    for (&(x, y), est) in pixels.iter().zip(estimates) {
        pred.insert(
            (origin.0 + i64::from(x)) as f64,
            (origin.1 + i64::from(y)) as f64,
            est,
        );
    }
    Ok(pred)
}
