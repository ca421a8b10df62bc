//! Texture transfer: repaint foreground IUV pixels from per-part tiles.

use std::path::Path;

use image::{Rgb, RgbImage};
use thiserror::Error;

use crate::decoder::IuvRaster;
use crate::mesh::{PartId, PART_COUNT};

/// Tile grid of a single-image atlas: 6 columns by 4 rows, parts row-major.
pub const GRID_COLUMNS: u32 = 6;
pub const GRID_ROWS: u32 = 4;

#[derive(Debug, Error)]
pub enum TextureError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("missing texture tile for part {0}")]
    MissingTile(u8),
    #[error("texture image: {0}")]
    Image(#[from] image::ImageError),
}

/// 24 square RGB tiles of equal size, tile `p - 1` for part `p`.
#[derive(Debug, Clone)]
pub struct TextureAtlas {
    resolution: u32,
    tiles: Vec<RgbImage>,
}

impl TextureAtlas {
    pub fn new(tiles: Vec<RgbImage>) -> Result<Self, TextureError> {
        if tiles.len() != PART_COUNT {
            return Err(TextureError::MissingTile(tiles.len() as u8 + 1));
        }
        let resolution = tiles[0].width();
        if resolution == 0 {
            return Err(TextureError::DimensionMismatch("empty tile".into()));
        }
        for (k, t) in tiles.iter().enumerate() {
            if t.width() != resolution || t.height() != resolution {
                return Err(TextureError::DimensionMismatch(format!(
                    "tile {} is {}x{}, expected {resolution}x{resolution}",
                    k + 1,
                    t.width(),
                    t.height()
                )));
            }
        }
        Ok(TextureAtlas { resolution, tiles })
    }

    /// Splits a 6x4 grid image into tiles.
    pub fn from_grid_image(img: &RgbImage) -> Result<Self, TextureError> {
        let (w, h) = img.dimensions();
        if w % GRID_COLUMNS != 0 || h % GRID_ROWS != 0 || w / GRID_COLUMNS != h / GRID_ROWS {
            return Err(TextureError::DimensionMismatch(format!(
                "{w}x{h} is not a {GRID_COLUMNS}x{GRID_ROWS} grid of square tiles"
            )));
        }
        let res = w / GRID_COLUMNS;
        let tiles = (0..PART_COUNT as u32)
            .map(|k| {
                let (col, row) = (k % GRID_COLUMNS, k / GRID_COLUMNS);
                image::imageops::crop_imm(img, col * res, row * res, res, res).to_image()
            })
            .collect();
        Self::new(tiles)
    }

    pub fn to_grid_image(&self) -> RgbImage {
        let res = self.resolution;
        let mut img = RgbImage::new(res * GRID_COLUMNS, res * GRID_ROWS);
        for (k, tile) in self.tiles.iter().enumerate() {
            let k = k as u32;
            image::imageops::replace(
                &mut img,
                tile,
                i64::from((k % GRID_COLUMNS) * res),
                i64::from((k / GRID_COLUMNS) * res),
            );
        }
        img
    }

    /// Loads either a grid PNG or a directory holding `part_01.png` ..
    /// `part_24.png`.
    pub fn load(path: &Path) -> Result<Self, TextureError> {
        if path.is_dir() {
            let tiles = (1..=PART_COUNT)
                .map(|p| {
                    let file = path.join(format!("part_{p:02}.png"));
                    if !file.exists() {
                        return Err(TextureError::MissingTile(p as u8));
                    }
                    Ok(image::open(file)?.to_rgb8())
                })
                .collect::<Result<_, _>>()?;
            Self::new(tiles)
        } else {
            Self::from_grid_image(&image::open(path)?.to_rgb8())
        }
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn tile(&self, part: PartId) -> &RgbImage {
        &self.tiles[part.slot()]
    }

    /// Bilinear sample of a part tile at texel position
    /// `(u * (res - 1), v * (res - 1))`, (0, 0) being the top-left texel.
    pub fn sample(&self, part: PartId, u: f64, v: f64) -> Rgb<u8> {
        let tile = self.tile(part);
        let max = f64::from(self.resolution - 1);
        let x = (u * max).clamp(0.0, max);
        let y = (v * max).clamp(0.0, max);
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        let (x0, y0) = (x0 as u32, y0 as u32);
        let x1 = (x0 + 1).min(self.resolution - 1);
        let y1 = (y0 + 1).min(self.resolution - 1);
        let texel = |x, y| tile.get_pixel(x, y).0.map(f64::from);
        let (a, b, c, d) = (texel(x0, y0), texel(x1, y0), texel(x0, y1), texel(x1, y1));
        Rgb(std::array::from_fn(|k| {
            let top = a[k] * (1.0 - fx) + b[k] * fx;
            let bottom = c[k] * (1.0 - fx) + d[k] * fx;
            (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8
        }))
    }
}

/// Copies `base`, replacing every foreground pixel of `iuv` with the texture
/// sampled at its (U, V) in its part's tile.
pub fn apply_texture(iuv: &IuvRaster, base: &RgbImage, atlas: &TextureAtlas) -> Result<RgbImage, TextureError> {
    if base.dimensions() != (iuv.width(), iuv.height()) {
        return Err(TextureError::DimensionMismatch(format!(
            "image is {}x{}, IUV raster is {}x{}",
            base.width(),
            base.height(),
            iuv.width(),
            iuv.height()
        )));
    }
    let mut out = base.clone();
    for (x, y, px) in out.enumerate_pixels_mut() {
        let (part, u, v) = iuv.get(x, y);
        if !part.is_background() {
            *px = atlas.sample(part, f64::from(u), f64::from(v));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient_atlas(res: u32) -> TextureAtlas {
        TextureAtlas::new(
            (0..PART_COUNT as u32)
                .map(|k| RgbImage::from_fn(res, res, |x, y| Rgb([(x * 10) as u8, (y * 10) as u8, k as u8])))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn background_copies_base() {
        let iuv = IuvRaster::background(4, 3);
        let base = RgbImage::from_fn(4, 3, |x, y| Rgb([x as u8, y as u8, 9]));
        assert_eq!(apply_texture(&iuv, &base, &gradient_atlas(4)).unwrap(), base);
    }

    #[test]
    fn corner_and_bilinear_samples() {
        let atlas = gradient_atlas(5);
        let p5 = PartId::new(5).unwrap();
        assert_eq!(atlas.sample(p5, 0.0, 0.0).0, atlas.tile(p5).get_pixel(0, 0).0);
        assert_eq!(atlas.sample(p5, 1.0, 1.0).0, [40, 40, 4]);
        // halfway between texels 1 and 2 along x: 15
        assert_eq!(atlas.sample(p5, 0.375, 0.0).0, [15, 0, 4]);
    }

    #[test]
    fn grid_round_trip_and_errors() {
        let atlas = gradient_atlas(3);
        let grid = atlas.to_grid_image();
        assert_eq!(grid.dimensions(), (18, 12));
        let back = TextureAtlas::from_grid_image(&grid).unwrap();
        for p in PartId::all_surface() {
            assert_eq!(back.tile(p), atlas.tile(p));
        }
        assert!(TextureAtlas::from_grid_image(&RgbImage::new(18, 13)).is_err());
        assert!(matches!(
            TextureAtlas::new(vec![RgbImage::new(2, 2); 23]),
            Err(TextureError::MissingTile(24))
        ));
        let iuv = IuvRaster::background(2, 2);
        assert!(matches!(
            apply_texture(&iuv, &RgbImage::new(3, 2), &atlas),
            Err(TextureError::DimensionMismatch(_))
        ));
    }
}
