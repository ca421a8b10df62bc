mod oracles;

use std::collections::HashMap;

use densecorr::decoder::{decode, IuvRaster, ScoreMaps, CHANNEL_COUNT, CLASS_COUNT};
use densecorr::io::{decode_score_maps, encode_score_maps, read_score_maps, write_score_maps, FormatError};
use densecorr::mesh::PartId;
use densecorr::texture::{apply_texture, TextureAtlas};
use image::{Rgb, RgbImage};
use proptest::prelude::*;

/// Planar channel data for a `w`×`h` image. Posterior weights are small
/// integers so ties between classes are common.
fn maps(max_side: u32) -> impl Strategy<Value = ScoreMaps> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(w, h)| {
        let n = (w * h) as usize;
        (
            prop::collection::vec(prop::collection::vec(0u8..4, CLASS_COUNT), n),
            prop::collection::vec(-0.5f32..1.5, (CHANNEL_COUNT - CLASS_COUNT) * n),
        )
            .prop_filter_map("all-zero posterior weights", move |(weights, regress)| {
                if weights.iter().any(|px| px.iter().all(|&c| c == 0)) {
                    return None;
                }
                let mut data = vec![0.0f32; CHANNEL_COUNT * n];
                for (i, px) in weights.iter().enumerate() {
                    let total: u32 = px.iter().map(|&c| u32::from(c)).sum();
                    for (c, &wgt) in px.iter().enumerate() {
                        data[c * n + i] = f32::from(wgt) / total as f32;
                    }
                }
                data[CLASS_COUNT * n..].copy_from_slice(&regress);
                Some(ScoreMaps::new(w, h, data).expect("valid maps"))
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn decode_is_argmax_with_clamped_regression(maps in maps(9)) {
        let raster = decode(&maps);
        for y in 0..maps.height() {
            for x in 0..maps.width() {
                let (part, u, v) = raster.get(x, y);
                prop_assert_eq!((part.get(), u, v), oracles::decode_pixel(&maps, x, y));
            }
        }
    }

    #[test]
    fn score_maps_round_trip_bit_exactly(maps in maps(6)) {
        let bytes = encode_score_maps(&maps);
        prop_assert_eq!(bytes.len(), 12 + 4 * maps.data().len());
        let back = decode_score_maps(&bytes).unwrap();
        prop_assert_eq!(back.width(), maps.width());
        let same = back.data().iter().zip(maps.data()).all(|(a, b)| a.to_bits() == b.to_bits());
        prop_assert!(same);
    }

    #[test]
    fn iuv_png_quantizes_to_nearest_step(maps in maps(6)) {
        let raster = decode(&maps);
        let back = IuvRaster::from_png_image(&raster.to_png_image()).unwrap();
        for y in 0..raster.height() {
            for x in 0..raster.width() {
                let (p, u, v) = raster.get(x, y);
                let (q, bu, bv) = back.get(x, y);
                prop_assert_eq!(p, q);
                prop_assert!((u - bu).abs() <= 0.5 / 255.0 + 1e-6);
                prop_assert!((v - bv).abs() <= 0.5 / 255.0 + 1e-6);
            }
        }
    }
}

#[test]
fn score_map_files_reject_damage() {
    let n = 4;
    let mut data = vec![0.0f32; CHANNEL_COUNT * n];
    data[..n].fill(1.0);
    let maps = ScoreMaps::new(2, 2, data).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.dcsm");
    write_score_maps(&maps, &path).unwrap();
    assert_eq!(read_score_maps(&path).unwrap(), maps);

    let bytes = encode_score_maps(&maps);
    let mut wrong = bytes.clone();
    wrong[0] = b'X';
    assert!(matches!(decode_score_maps(&wrong), Err(FormatError::BadMagic { .. })));
    assert!(matches!(
        decode_score_maps(&bytes[..bytes.len() - 1]),
        Err(FormatError::Truncated { .. })
    ));
    assert!(matches!(decode_score_maps(&bytes[..7]), Err(FormatError::Truncated { .. })));

    // a posterior that is not a distribution is refused on read
    let mut bad = bytes.clone();
    bad[12..16].copy_from_slice(&0.5f32.to_le_bytes());
    assert!(decode_score_maps(&bad).is_err());
}

fn constant_atlas() -> TextureAtlas {
    TextureAtlas::new(
        PartId::all_surface()
            .map(|p| RgbImage::from_pixel(8, 8, Rgb([10 * p.get(), 255 - 10 * p.get(), 7])))
            .collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn constant_tiles_recolor_by_part(maps in maps(12), seed in any::<u8>()) {
        let raster = decode(&maps);
        let base = RgbImage::from_fn(raster.width(), raster.height(), |x, y| {
            // base colors never collide with tile colors (blue channel 7)
            Rgb([x as u8, y as u8, 200u8.wrapping_add(seed % 50)])
        });
        let atlas = constant_atlas();
        let out = apply_texture(&raster, &base, &atlas).unwrap();

        let mut expected: HashMap<[u8; 3], usize> = HashMap::new();
        let mut observed: HashMap<[u8; 3], usize> = HashMap::new();
        for y in 0..raster.height() {
            for x in 0..raster.width() {
                let (part, _, _) = raster.get(x, y);
                let px = out.get_pixel(x, y).0;
                if part.is_background() {
                    prop_assert_eq!(px, base.get_pixel(x, y).0);
                } else {
                    *expected.entry(atlas.tile(part).get_pixel(0, 0).0).or_default() += 1;
                    *observed.entry(px).or_default() += 1;
                    // the part is recoverable from the color alone
                    prop_assert_eq!(px[0] / 10, part.get());
                }
            }
        }
        prop_assert_eq!(expected, observed);
    }
}

#[test]
fn texture_directory_and_grid_agree() {
    let atlas = constant_atlas();
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.png");
    atlas.to_grid_image().save(&grid).unwrap();
    let tiles = dir.path().join("tiles");
    std::fs::create_dir(&tiles).unwrap();
    for p in PartId::all_surface() {
        atlas.tile(p).save(tiles.join(format!("part_{:02}.png", p.get()))).unwrap();
    }
    let a = TextureAtlas::load(&grid).unwrap();
    let b = TextureAtlas::load(&tiles).unwrap();
    for p in PartId::all_surface() {
        assert_eq!(a.tile(p), b.tile(p));
        assert_eq!(a.tile(p), atlas.tile(p));
    }
}
