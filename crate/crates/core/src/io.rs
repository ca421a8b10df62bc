//! File formats shared by the CLI and the annotation service.
//!
//! * Dataset files: COCO-flavoured JSON with per-instance `dp_points`,
//!   validated field by field and written in one canonical form (sorted
//!   keys, shortest round-trip float formatting, two-space indentation).
//! * `DCSM`: network score maps. Magic, `u32` width, `u32` height, then the
//!   73 channels as `f32`, channel-planar.
//! * `DCVB`: a view's G-buffer. Magic, `u32` width, `u32` height, then per
//!   pixel `i32` face id, 3 × `f32` barycentric, `f32` depth.
//!
//! All binary values are little-endian.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::decoder::{DecodeError, ScoreMaps, CHANNEL_COUNT};
use crate::mesh::{PartId, SurfaceMesh, PART_COUNT};
use crate::metrics::{Estimate, GroundTruthInstance, GroundTruthPoint, PredictedInstance};
use crate::parametrization::{ParamError, UVAtlas};
use crate::render::{view_from_buffers, GBuffer, PartViews, RenderError, ViewMeta, ViewRender, VIEW_COUNT};

pub const SCORE_MAGIC: [u8; 4] = *b"DCSM";
pub const GBUFFER_MAGIC: [u8; 4] = *b"DCVB";

/// A schema violation, located by a JSON pointer (`/annotations/0/dp_points/3/part`).
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{pointer}: {message}")]
pub struct SchemaError {
    pub pointer: String,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema violation at {0}")]
    Schema(#[from] SchemaError),
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("truncated file: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Chart(#[from] ParamError),
    #[error("image: {0}")]
    Image(#[from] image::ImageError),
    #[error("{0}")]
    Invalid(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Length unit of a mesh file. Metric thresholds given in meters are
/// multiplied by [`Units::per_meter`] to land in mesh units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Units {
    #[default]
    Meters,
    Centimeters,
    Millimeters,
}

impl Units {
    pub fn per_meter(self) -> f64 {
        match self {
            Units::Meters => 1.0,
            Units::Centimeters => 100.0,
            Units::Millimeters => 1000.0,
        }
    }
}

impl FromStr for Units {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "m" => Ok(Units::Meters),
            "cm" => Ok(Units::Centimeters),
            "mm" => Ok(Units::Millimeters),
            other => Err(format!("unknown unit {other:?} (expected m, cm or mm)")),
        }
    }
}

impl fmt::Display for Units {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Units::Meters => "m",
            Units::Centimeters => "cm",
            Units::Millimeters => "mm",
        })
    }
}

// ---------------------------------------------------------------------------
// Dataset files

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetImage {
    pub id: u64,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpPoint {
    pub x: f64,
    pub y: f64,
    pub part: PartId,
    pub u: f64,
    pub v: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertex: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetAnnotation {
    pub id: u64,
    pub image_id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    pub dp_points: Vec<DpPoint>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetFile {
    pub images: Vec<DatasetImage>,
    pub annotations: Vec<DatasetAnnotation>,
}

struct Checker {
    path: Vec<String>,
}

impl Checker {
    fn pointer(&self, leaf: Option<&str>) -> String {
        let mut p = String::new();
        for seg in self.path.iter().map(String::as_str).chain(leaf) {
            p.push('/');
            p.push_str(&seg.replace('~', "~0").replace('/', "~1"));
        }
        p
    }

    fn fail<T>(&self, leaf: Option<&str>, message: impl Into<String>) -> Result<T, SchemaError> {
        Err(SchemaError {
            pointer: self.pointer(leaf),
            message: message.into(),
        })
    }

    fn object<'v>(&self, v: &'v Value, leaf: Option<&str>) -> Result<&'v serde_json::Map<String, Value>, SchemaError> {
        v.as_object().map_or_else(|| self.fail(leaf, "expected an object"), Ok)
    }

    fn array<'v>(&self, obj: &'v serde_json::Map<String, Value>, key: &str) -> Result<&'v Vec<Value>, SchemaError> {
        match obj.get(key) {
            Some(Value::Array(a)) => Ok(a),
            Some(_) => self.fail(Some(key), "expected an array"),
            None => self.fail(Some(key), "missing required field"),
        }
    }

    fn required<'v>(&self, obj: &'v serde_json::Map<String, Value>, key: &str) -> Result<&'v Value, SchemaError> {
        obj.get(key).map_or_else(|| self.fail(Some(key), "missing required field"), Ok)
    }

    fn uint(&self, obj: &serde_json::Map<String, Value>, key: &str, max: u64) -> Result<u64, SchemaError> {
        match self.required(obj, key)?.as_u64() {
            Some(n) if n <= max => Ok(n),
            Some(n) => self.fail(Some(key), format!("{n} exceeds {max}")),
            None => self.fail(Some(key), "expected a non-negative integer"),
        }
    }

    fn number(&self, v: &Value, key: &str) -> Result<f64, SchemaError> {
        match v.as_f64() {
            Some(x) if x.is_finite() => Ok(x),
            _ => self.fail(Some(key), "expected a finite number"),
        }
    }

    fn unknown_fields(&self, obj: &serde_json::Map<String, Value>, allowed: &[&str]) -> Result<(), SchemaError> {
        match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => self.fail(Some(k), "unknown field"),
            None => Ok(()),
        }
    }
}

/// Validates a parsed dataset document against the schema, reporting the
/// first violation with its JSON pointer.
pub fn validate_dataset(doc: &Value) -> Result<(), SchemaError> {
    let mut c = Checker { path: Vec::new() };
    let root = c.object(doc, None)?;
    c.unknown_fields(root, &["images", "annotations"])?;

    let mut image_ids = HashSet::new();
    let images = c.array(root, "images")?;
    c.path.push("images".into());
    for (i, img) in images.iter().enumerate() {
        let o = c.object(img, Some(&i.to_string()))?;
        c.path.push(i.to_string());
        c.unknown_fields(o, &["id", "width", "height"])?;
        let id = c.uint(o, "id", u64::MAX)?;
        c.uint(o, "width", u64::from(u32::MAX))?;
        c.uint(o, "height", u64::from(u32::MAX))?;
        if !image_ids.insert(id) {
            return c.fail(Some("id"), format!("duplicate image id {id}"));
        }
        c.path.pop();
    }
    c.path.pop();

    let annotations = c.array(root, "annotations")?;
    c.path.push("annotations".into());
    let mut ann_ids = HashSet::new();
    for (i, ann) in annotations.iter().enumerate() {
        let o = c.object(ann, Some(&i.to_string()))?;
        c.path.push(i.to_string());
        c.unknown_fields(o, &["id", "image_id", "bbox", "score", "dp_points"])?;
        let id = c.uint(o, "id", u64::MAX)?;
        if !ann_ids.insert(id) {
            return c.fail(Some("id"), format!("duplicate annotation id {id}"));
        }
        let image_id = c.uint(o, "image_id", u64::MAX)?;
        if !image_ids.contains(&image_id) {
            return c.fail(Some("image_id"), format!("image {image_id} is not listed in /images"));
        }
        if let Some(bbox) = o.get("bbox") {
            match bbox.as_array() {
                Some(b) if b.len() == 4 => {
                    c.path.push("bbox".into());
                    for (k, x) in b.iter().enumerate() {
                        c.number(x, &k.to_string())?;
                    }
                    c.path.pop();
                }
                _ => return c.fail(Some("bbox"), "expected [x, y, width, height]"),
            }
        }
        if let Some(score) = o.get("score") {
            c.number(score, "score")?;
        }
        let points = c.array(o, "dp_points")?;
        c.path.push("dp_points".into());
        for (k, pt) in points.iter().enumerate() {
            let p = c.object(pt, Some(&k.to_string()))?;
            c.path.push(k.to_string());
            c.unknown_fields(p, &["x", "y", "part", "u", "v", "vertex"])?;
            c.number(c.required(p, "x")?, "x")?;
            c.number(c.required(p, "y")?, "y")?;
            match c.required(p, "part")?.as_u64() {
                Some(n) if (1..=PART_COUNT as u64).contains(&n) => {}
                _ => return c.fail(Some("part"), format!("part must be an integer in 1..={PART_COUNT}")),
            }
            for key in ["u", "v"] {
                let x = c.number(c.required(p, key)?, key)?;
                if !(0.0..=1.0).contains(&x) {
                    return c.fail(Some(key), format!("{x} is outside [0, 1]"));
                }
            }
            if let Some(v) = p.get("vertex") {
                if v.as_u64().is_none() {
                    return c.fail(Some("vertex"), "expected a non-negative integer");
                }
            }
            c.path.pop();
        }
        c.path.pop();
        c.path.pop();
    }
    Ok(())
}

pub fn parse_dataset(text: &str) -> Result<DatasetFile, FormatError> {
    let doc: Value = serde_json::from_str(text)?;
    validate_dataset(&doc)?;
    Ok(serde_json::from_value(doc)?)
}

pub fn read_dataset(path: &Path) -> Result<DatasetFile, FormatError> {
    parse_dataset(&fs::read_to_string(path).map_err(io_err(path))?)
}

/// Canonical text: keys sorted, floats in shortest round-trip form.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String, FormatError> {
    // `Value` objects are ordered maps, so going through it sorts every key.
    let doc = serde_json::to_value(value)?;
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    Ok(text)
}

/// Writes canonical JSON through a temporary sibling and a rename, so a
/// reader never sees a partial file.
pub fn write_json_atomic<T: Serialize>(value: &T, path: &Path) -> Result<(), FormatError> {
    write_bytes_atomic(canonical_json(value)?.as_bytes(), path)
}

pub fn write_dataset(dataset: &DatasetFile, path: &Path) -> Result<(), FormatError> {
    let doc = serde_json::to_value(dataset)?;
    validate_dataset(&doc)?;
    write_json_atomic(dataset, path)
}

fn write_bytes_atomic(bytes: &[u8], path: &Path) -> Result<(), FormatError> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    drop(f);
    fs::rename(&tmp, path).map_err(io_err(path))
}

impl DatasetFile {
    pub fn point_count(&self) -> usize {
        self.annotations.iter().map(|a| a.dp_points.len()).sum()
    }

    pub fn image_ids(&self) -> BTreeSet<u64> {
        self.images.iter().map(|i| i.id).collect()
    }
}

fn point_vertex(p: &DpPoint, atlas: Option<&UVAtlas>, mesh: Option<&SurfaceMesh>) -> Result<usize, FormatError> {
    match (p.vertex, atlas) {
        (Some(v), _) => {
            if let Some(mesh) = mesh {
                if v >= mesh.vertex_count() {
                    return Err(FormatError::Invalid(format!(
                        "vertex {v} out of range for a mesh with {} vertices",
                        mesh.vertex_count()
                    )));
                }
            }
            Ok(v)
        }
        (None, Some(atlas)) => Ok(atlas.uv_to_vertex(p.part, p.u, p.v)?),
        (None, None) => Err(FormatError::Invalid(
            "point has no vertex and no atlas was given to look one up".into(),
        )),
    }
}

/// Ground-truth instances. Points carrying an explicit vertex use it; others
/// are lifted through the atlas.
pub fn ground_truth_instances(
    dataset: &DatasetFile,
    atlas: Option<&UVAtlas>,
    mesh: Option<&SurfaceMesh>,
) -> Result<Vec<GroundTruthInstance>, FormatError> {
    dataset
        .annotations
        .iter()
        .map(|a| {
            let points = a
                .dp_points
                .iter()
                .map(|p| {
                    Ok(GroundTruthPoint {
                        x: p.x,
                        y: p.y,
                        vertex: point_vertex(p, atlas, mesh)?,
                    })
                })
                .collect::<Result<_, FormatError>>()?;
            Ok(GroundTruthInstance {
                id: a.id,
                image_id: a.image_id,
                bbox: a.bbox,
                points,
            })
        })
        .collect()
}

/// Predicted instances; every annotation must carry a score.
pub fn predicted_instances(
    dataset: &DatasetFile,
    atlas: Option<&UVAtlas>,
    mesh: Option<&SurfaceMesh>,
) -> Result<Vec<PredictedInstance>, FormatError> {
    dataset
        .annotations
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let score = a.score.ok_or_else(|| SchemaError {
                pointer: format!("/annotations/{i}/score"),
                message: "predictions require a score".into(),
            })?;
            let mut pred = PredictedInstance::new(a.id, a.image_id, score);
            for p in &a.dp_points {
                pred.insert(p.x, p.y, Estimate::Vertex(point_vertex(p, atlas, mesh)?));
            }
            Ok(pred)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Binary formats

fn check_header(bytes: &[u8], magic: [u8; 4]) -> Result<(u32, u32), FormatError> {
    if bytes.len() < 4 || bytes[..4] != magic {
        let found = &bytes[..bytes.len().min(4)];
        return Err(FormatError::BadMagic {
            expected: String::from_utf8_lossy(&magic).into_owned(),
            found: String::from_utf8_lossy(found).into_owned(),
        });
    }
    if bytes.len() < 12 {
        return Err(FormatError::Truncated {
            expected: 12,
            found: bytes.len(),
        });
    }
    let w = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    let h = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    Ok((w, h))
}

fn expect_len(bytes: &[u8], expected: usize) -> Result<(), FormatError> {
    if bytes.len() != expected {
        return Err(FormatError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    Ok(())
}

fn f32_at(bytes: &[u8], offset: usize) -> f32 {
    f32::from_le_bytes(bytes[offset..offset + 4].try_into().expect("4 bytes"))
}

pub fn encode_score_maps(maps: &ScoreMaps) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * maps.data().len());
    out.extend_from_slice(&SCORE_MAGIC);
    out.extend_from_slice(&maps.width().to_le_bytes());
    out.extend_from_slice(&maps.height().to_le_bytes());
    for x in maps.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_score_maps(bytes: &[u8]) -> Result<ScoreMaps, FormatError> {
    let (w, h) = check_header(bytes, SCORE_MAGIC)?;
    let n = CHANNEL_COUNT * w as usize * h as usize;
    expect_len(bytes, 12 + 4 * n)?;
    let data = (0..n).map(|i| f32_at(bytes, 12 + 4 * i)).collect();
    Ok(ScoreMaps::new(w, h, data)?)
}

pub fn read_score_maps(path: &Path) -> Result<ScoreMaps, FormatError> {
    decode_score_maps(&fs::read(path).map_err(io_err(path))?)
}

pub fn write_score_maps(maps: &ScoreMaps, path: &Path) -> Result<(), FormatError> {
    write_bytes_atomic(&encode_score_maps(maps), path)
}

const GBUFFER_PIXEL_BYTES: usize = 20;

pub fn encode_gbuffer(gb: &GBuffer) -> Vec<u8> {
    let n = gb.face_id.len();
    let mut out = Vec::with_capacity(12 + GBUFFER_PIXEL_BYTES * n);
    out.extend_from_slice(&GBUFFER_MAGIC);
    out.extend_from_slice(&gb.width.to_le_bytes());
    out.extend_from_slice(&gb.height.to_le_bytes());
    for i in 0..n {
        out.extend_from_slice(&gb.face_id[i].to_le_bytes());
        for b in gb.barycentric[i] {
            out.extend_from_slice(&b.to_le_bytes());
        }
        out.extend_from_slice(&gb.depth[i].to_le_bytes());
    }
    out
}

pub fn decode_gbuffer(bytes: &[u8]) -> Result<GBuffer, FormatError> {
    let (width, height) = check_header(bytes, GBUFFER_MAGIC)?;
    let n = width as usize * height as usize;
    expect_len(bytes, 12 + GBUFFER_PIXEL_BYTES * n)?;
    let mut gb = GBuffer {
        width,
        height,
        face_id: Vec::with_capacity(n),
        barycentric: Vec::with_capacity(n),
        depth: Vec::with_capacity(n),
    };
    for i in 0..n {
        let o = 12 + GBUFFER_PIXEL_BYTES * i;
        gb.face_id.push(i32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")));
        gb.barycentric
            .push([f32_at(bytes, o + 4), f32_at(bytes, o + 8), f32_at(bytes, o + 12)]);
        gb.depth.push(f32_at(bytes, o + 16));
    }
    Ok(gb)
}

pub fn view_image(view: &ViewRender) -> image::GrayImage {
    image::GrayImage::from_raw(view.width(), view.height(), view.shade.clone())
        .expect("shade buffer matches the view size")
}

pub fn encode_png(img: &image::DynamicImage) -> Result<Vec<u8>, FormatError> {
    let mut bytes = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)?;
    Ok(bytes)
}

fn view_stem(dir: &Path, part: PartId, view: usize) -> PathBuf {
    dir.join(format!("part_{:02}", part.get())).join(format!("view_{view}"))
}

/// Writes `DIR/part_PP/view_V.{png,dcvb,json}` for each view.
pub fn write_view_bundle(views: &PartViews, dir: &Path) -> Result<Vec<PathBuf>, FormatError> {
    let part_dir = dir.join(format!("part_{:02}", views.part.get()));
    fs::create_dir_all(&part_dir).map_err(io_err(&part_dir))?;
    let mut written = Vec::new();
    for view in &views.views {
        let stem = view_stem(dir, views.part, view.view_index);
        let png = stem.with_extension("png");
        write_bytes_atomic(&encode_png(&view_image(view).into())?, &png)?;
        let gb = stem.with_extension("dcvb");
        write_bytes_atomic(&encode_gbuffer(&view.buffers), &gb)?;
        let meta = stem.with_extension("json");
        write_json_atomic(&view.meta(), &meta)?;
        written.extend([png, gb, meta]);
    }
    Ok(written)
}

/// Reads the bundle of one part, or `None` if the directory holds none.
pub fn read_view_bundle(mesh: &SurfaceMesh, part: PartId, dir: &Path) -> Result<Option<PartViews>, FormatError> {
    if !view_stem(dir, part, 0).with_extension("dcvb").exists() {
        return Ok(None);
    }
    let mut views = Vec::with_capacity(VIEW_COUNT);
    for v in 0..VIEW_COUNT {
        let stem = view_stem(dir, part, v);
        let meta_path = stem.with_extension("json");
        let meta: ViewMeta =
            serde_json::from_str(&fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?)?;
        let gb_path = stem.with_extension("dcvb");
        let gb = decode_gbuffer(&fs::read(&gb_path).map_err(io_err(&gb_path))?)?;
        if meta.part != part || meta.view != v {
            return Err(FormatError::Invalid(format!(
                "{} describes part {} view {}",
                meta_path.display(),
                meta.part,
                meta.view
            )));
        }
        views.push(view_from_buffers(mesh, part, v, meta.camera, gb)?);
    }
    Ok(Some(PartViews { part, views }))
}
