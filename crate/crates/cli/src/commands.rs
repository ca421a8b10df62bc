use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use densecorr::decoder::{decode, DecodeError, IuvRaster};
use densecorr::io::{self, FormatError, SchemaError};
use densecorr::mesh::{load_mesh, MeshError, PartId, SurfaceMesh};
use densecorr::metrics::{
    annotator_error_field, evaluate_ap_ar, pixel_key, AnnotatorSampleSet, Estimate, EvalOptions, GeodesicCache,
    GpsConfig, MetricsError,
};
use densecorr::parametrization::{build_atlas, read_atlas, read_charts, write_atlas, AtlasOptions, ParamError, UVAtlas};
use densecorr::render::{render_part_views, RenderError};
use densecorr::sampler::{choose_point_count, sample_points, PartMask, Rle, SamplerError};
use densecorr::texture::{apply_texture, TextureAtlas, TextureError};
use densecorr_service::{AnnotationService, ServiceConfig, ServiceError};
use serde_json::json;

use crate::{Cli, Command, GlobalArgs};

/// Missing or inconsistent command-line input discovered after parsing.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        let data = cause.is::<MeshError>()
            || cause.is::<ParamError>()
            || cause.is::<FormatError>()
            || cause.is::<SchemaError>()
            || cause.is::<SamplerError>()
            || cause.is::<DecodeError>()
            || cause.is::<TextureError>()
            || cause.is::<MetricsError>()
            || cause.is::<RenderError>()
            || cause.is::<std::io::Error>()
            || cause.is::<serde_json::Error>()
            || cause.is::<image::ImageError>();
        if data {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<ServiceError>() {
            return if e.status() >= 500 { 4 } else { 3 };
        }
    }
    4
}

fn mesh(g: &GlobalArgs) -> Result<SurfaceMesh> {
    let (Some(m), Some(l)) = (&g.mesh, &g.labels) else {
        return Err(usage("this command needs --mesh and --labels"));
    };
    Ok(load_mesh(m, l)?)
}

fn atlas(g: &GlobalArgs) -> Result<UVAtlas> {
    let path = g.atlas.as_ref().ok_or_else(|| usage("this command needs --atlas"))?;
    Ok(read_atlas(path)?)
}

fn part_id(p: u8) -> Result<PartId> {
    match PartId::new(p) {
        Ok(id) if !id.is_background() => Ok(id),
        _ => Err(usage(format!("--part must be in 1..=24, got {p}"))),
    }
}

fn emit(value: &serde_json::Value, out: Option<&Path>) -> Result<()> {
    let text = io::canonical_json(value)?;
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Unwrap { charts, out } => {
            let mesh = mesh(g)?;
            let supplied = match charts {
                Some(p) => read_charts(&p)?,
                None => Vec::new(),
            };
            let atlas = build_atlas(&mesh, &supplied, &AtlasOptions::default())?;
            write_atlas(&atlas, &out)?;
            let parts = atlas.charts().iter().filter(|c| !c.vertices.is_empty()).count();
            eprintln!("wrote {} ({parts} charts)", out.display());
        }
        Command::RenderViews { part, res, out } => {
            let mesh = mesh(g)?;
            let views = render_part_views(&mesh, part_id(part)?, res)?;
            let files = io::write_view_bundle(&views, &out)?;
            eprintln!("wrote {} files under {}", files.len(), out.display());
        }
        Command::SamplePoints {
            mask,
            rle,
            part,
            k,
            out,
        } => {
            let part = part_id(part)?;
            let mask = match (mask, rle) {
                (Some(png), None) => PartMask::from_png(&png, part)?,
                (None, Some(path)) => {
                    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    let rle: Rle = serde_json::from_str(&text)?;
                    PartMask::from_rle(&rle, part)?
                }
                _ => return Err(usage("give exactly one of --mask or --rle")),
            };
            let k = k.unwrap_or_else(|| choose_point_count(&mask));
            let points = sample_points(&mask, k, g.seed)?;
            emit(&serde_json::to_value(&points)?, out.as_deref())?;
        }
        Command::Serve {
            views,
            store,
            port,
            host,
            res,
        } => serve(g, views, store, &host, port, res)?,
        Command::Decode { maps, out } => {
            let maps = io::read_score_maps(&maps)?;
            let raster = decode(&maps);
            raster
                .to_png_image()
                .save(&out)
                .with_context(|| format!("writing {}", out.display()))?;
        }
        Command::Evaluate { gt, pred, kappa, out } => {
            let mesh = mesh(g)?;
            let atlas = g.atlas.as_ref().map(|p| read_atlas(p)).transpose()?;
            let gts = io::ground_truth_instances(&io::read_dataset(&gt)?, atlas.as_ref(), Some(&mesh))?;
            let preds = io::predicted_instances(&io::read_dataset(&pred)?, atlas.as_ref(), Some(&mesh))?;
            let scale = g.units.per_meter();
            let defaults = EvalOptions::default();
            let options = EvalOptions {
                gps: GpsConfig {
                    kappa: kappa * scale,
                    ..GpsConfig::default()
                },
                auc_ranges: defaults.auc_ranges.map(|a| a * scale),
                ..defaults
            };
            let report = evaluate_ap_ar(&gts, &preds, &mesh, &options)?;
            emit(&serde_json::to_value(&report)?, out.as_deref())?;
        }
        Command::AnnotatorAccuracy {
            reference,
            annotations,
            out,
        } => {
            let mesh = mesh(g)?;
            let atlas = g.atlas.as_ref().map(|p| read_atlas(p)).transpose()?;
            let reference = io::read_dataset(&reference)?;
            let clicked = io::read_dataset(&annotations)?;
            let records = annotator_records(&mesh, atlas.as_ref(), &reference, &clicked)?;
            let field = annotator_error_field(&records, &mesh)?;
            let per_part: serde_json::Map<String, serde_json::Value> = field
                .part_means(&mesh)
                .into_iter()
                .map(|(p, e)| (format!("{:02}", p.get()), json!(e / g.units.per_meter())))
                .collect();
            emit(
                &json!({
                    "images": field.image_count,
                    "mean_error_m": field.mean() / g.units.per_meter(),
                    "part_mean_error_m": per_part,
                }),
                out.as_deref(),
            )?;
        }
        Command::Texture {
            iuv,
            image,
            texture,
            out,
        } => {
            let iuv = IuvRaster::from_png_image(&image::open(&iuv)?.to_rgb8())?;
            let base = image::open(&image)?.to_rgb8();
            let tex = TextureAtlas::load(&texture)?;
            apply_texture(&iuv, &base, &tex)?
                .save(&out)
                .with_context(|| format!("writing {}", out.display()))?;
        }
    }
    Ok(())
}

/// Pairs each reference point with the annotator's point at the same image
/// pixel. Reference points the annotator did not label are skipped.
fn annotator_records(
    mesh: &SurfaceMesh,
    atlas: Option<&UVAtlas>,
    reference: &io::DatasetFile,
    clicked: &io::DatasetFile,
) -> Result<Vec<AnnotatorSampleSet>> {
    let truth = io::ground_truth_instances(reference, atlas, Some(mesh))?;
    let answers = io::ground_truth_instances(clicked, atlas, Some(mesh))?;
    let mut by_pixel: HashMap<(u64, (i64, i64)), usize> = HashMap::new();
    for inst in &answers {
        for p in &inst.points {
            by_pixel.insert((inst.image_id, pixel_key(p.x, p.y)), p.vertex);
        }
    }
    let cache = GeodesicCache::new(mesh);
    let mut pairs: std::collections::BTreeMap<u64, Vec<(usize, Estimate)>> = Default::default();
    for inst in &truth {
        for p in &inst.points {
            if let Some(&v) = by_pixel.get(&(inst.image_id, pixel_key(p.x, p.y))) {
                pairs.entry(inst.image_id).or_default().push((p.vertex, Estimate::Vertex(v)));
            }
        }
    }
    if pairs.is_empty() {
        bail!(FormatError::Invalid("no annotator point matches a reference pixel".into()));
    }
    pairs
        .into_iter()
        .map(|(image, pairs)| Ok(AnnotatorSampleSet::from_annotations(&cache, image, &pairs)?))
        .collect()
}

fn serve(g: &GlobalArgs, views: Option<PathBuf>, store: PathBuf, host: &str, port: u16, res: u32) -> Result<()> {
    let mesh = Arc::new(mesh(g)?);
    let atlas = Arc::new(atlas(g)?);
    let config = ServiceConfig {
        store,
        views_dir: views,
        resolution: res,
    };
    let service = Arc::new(AnnotationService::open(mesh, atlas, config)?);
    let runtime = tokio::runtime::Runtime::new().context("starting async runtime")?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((host, port))
            .await
            .with_context(|| format!("binding {host}:{port}"))?;
        densecorr_service::serve(service, listener).await?;
        Ok(())
    })
}
