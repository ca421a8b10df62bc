//! Correspondence accuracy measures.
//!
//! * Ratio of correct points: `f(t)` is the fraction of points whose geodesic
//!   error is below `t`; `AUC_a = (1/a) * integral_0^a f(t) dt`.
//! * Geodesic point similarity of an instance:
//!   `GPS = mean_p exp(-g(i_p, est_p)^2 / (2 kappa^2))`.
//! * COCO-style AP/AR with GPS in place of box IoU.
//! * Annotator error fields: per-image sampled errors spread to the whole
//!   surface by geodesic nearest neighbour, then averaged over images.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{MeshError, PartId, SurfaceMesh};

/// Number of threshold samples on the RCP grid over `(0, a]`.
pub const RCP_GRID: usize = 256;
/// Default GPS bandwidth in meters.
pub const DEFAULT_KAPPA: f64 = 0.255;
/// COCO limit on detections per image.
pub const MAX_DETECTIONS: usize = 100;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no errors to summarise")]
    EmptyInput,
    #[error("instance {0} has no ground-truth points")]
    EmptyInstance(u64),
    #[error("image {0} has no sampled points")]
    EmptySample(u64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// What a model (or annotator) put at an image location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimate {
    Vertex(usize),
    Background,
}

/// Geodesic error between the true vertex and an estimate; background is
/// infinitely wrong.
pub fn geodesic_error(mesh: &SurfaceMesh, true_vertex: usize, estimate: Estimate) -> Result<f64, MeshError> {
    match estimate {
        Estimate::Background => {
            if true_vertex >= mesh.vertex_count() {
                return Err(MeshError::IndexOutOfRange {
                    index: true_vertex,
                    len: mesh.vertex_count(),
                });
            }
            Ok(f64::INFINITY)
        }
        Estimate::Vertex(v) => mesh.geodesic_between(true_vertex, v),
    }
}

/// Memoised single-source fields. Lookups agree bitwise with
/// [`SurfaceMesh::geodesic_between`] because both search from the lower index.
pub struct GeodesicCache<'m> {
    mesh: &'m SurfaceMesh,
    fields: RwLock<HashMap<usize, Arc<Vec<f64>>>>,
}

impl<'m> GeodesicCache<'m> {
    pub fn new(mesh: &'m SurfaceMesh) -> Self {
        GeodesicCache {
            mesh,
            fields: RwLock::new(HashMap::new()),
        }
    }

    pub fn mesh(&self) -> &SurfaceMesh {
        self.mesh
    }

    fn field(&self, source: usize) -> Result<Arc<Vec<f64>>, MeshError> {
        if let Some(f) = self.fields.read().expect("cache lock").get(&source) {
            return Ok(f.clone());
        }
        let field = Arc::new(self.mesh.geodesic_from(source)?.distance);
        self.fields
            .write()
            .expect("cache lock")
            .entry(source)
            .or_insert_with(|| field.clone());
        Ok(field)
    }

    pub fn distance(&self, i: usize, j: usize) -> Result<f64, MeshError> {
        let n = self.mesh.vertex_count();
        for idx in [i, j] {
            if idx >= n {
                return Err(MeshError::IndexOutOfRange { index: idx, len: n });
            }
        }
        if i == j {
            return Ok(0.0);
        }
        Ok(self.field(i.min(j))?[i.max(j)])
    }

    pub fn error(&self, true_vertex: usize, estimate: Estimate) -> Result<f64, MeshError> {
        match estimate {
            Estimate::Background => self.distance(true_vertex, true_vertex).map(|_| f64::INFINITY),
            Estimate::Vertex(v) => self.distance(true_vertex, v),
        }
    }
}

/// `f(t)` sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcpCurve {
    pub thresholds: Vec<f64>,
    pub ratio: Vec<f64>,
    pub point_count: usize,
}

/// RCP curve on `RCP_GRID` thresholds `a*k/256, k = 1..=256`, and its
/// normalised area by the trapezoidal rule. The curve starts from the
/// right-limit `f(0+)`, the share of exactly-zero errors.
pub fn rcp_auc(errors: &[f64], a: f64) -> Result<(RcpCurve, f64), MetricsError> {
    if errors.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if !(a > 0.0) || !a.is_finite() {
        return Err(MetricsError::InvalidConfig(format!("AUC range {a} must be positive")));
    }
    if let Some(e) = errors.iter().find(|e| e.is_nan() || **e < 0.0) {
        return Err(MetricsError::InvalidValue(format!("geodesic error {e}")));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let below = |t: f64| sorted.partition_point(|&e| e < t) as f64 / n;
    let at_zero = sorted.partition_point(|&e| e <= 0.0) as f64 / n;

    let thresholds: Vec<f64> = (1..=RCP_GRID).map(|k| a * k as f64 / RCP_GRID as f64).collect();
    let ratio: Vec<f64> = thresholds.iter().map(|&t| below(t)).collect();
    let step = 1.0 / RCP_GRID as f64;
    let mut area = 0.5 * (at_zero + ratio[0]) * step;
    for w in ratio.windows(2) {
        area += 0.5 * (w[0] + w[1]) * step;
    }
    Ok((
        RcpCurve {
            thresholds,
            ratio,
            point_count: errors.len(),
        },
        area.clamp(0.0, 1.0),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpsConfig {
    /// Bandwidth in mesh length units.
    pub kappa: f64,
    /// GPS thresholds for AP/AR, strictly ascending inside (0, 1).
    pub thresholds: Vec<f64>,
}

impl Default for GpsConfig {
    fn default() -> Self {
        GpsConfig {
            kappa: DEFAULT_KAPPA,
            thresholds: (0..10).map(|i| f64::from(50 + 5 * i) / 100.0).collect(),
        }
    }
}

impl GpsConfig {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(MetricsError::InvalidConfig(format!("kappa {} must be positive", self.kappa)));
        }
        if self.thresholds.is_empty() {
            return Err(MetricsError::InvalidConfig("no GPS thresholds".into()));
        }
        if self.thresholds.iter().any(|&t| !(t > 0.0 && t < 1.0))
            || self.thresholds.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(MetricsError::InvalidConfig(format!(
                "GPS thresholds {:?} must be strictly ascending within (0, 1)",
                self.thresholds
            )));
        }
        Ok(())
    }

    /// Per-point similarity for a geodesic error.
    pub fn similarity(&self, error: f64) -> f64 {
        if error.is_infinite() {
            return 0.0;
        }
        (-(error * error) / (2.0 * self.kappa * self.kappa)).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthPoint {
    pub x: f64,
    pub y: f64,
    pub vertex: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthInstance {
    pub id: u64,
    pub image_id: u64,
    pub bbox: Option<[f64; 4]>,
    pub points: Vec<GroundTruthPoint>,
}

/// Integer pixel holding a continuous image location.
pub fn pixel_key(x: f64, y: f64) -> (i64, i64) {
    (x.floor() as i64, y.floor() as i64)
}

/// A detected person with its per-pixel surface estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedInstance {
    pub id: u64,
    pub image_id: u64,
    pub score: f64,
    estimates: HashMap<(i64, i64), Estimate>,
}

impl PredictedInstance {
    pub fn new(id: u64, image_id: u64, score: f64) -> Self {
        PredictedInstance {
            id,
            image_id,
            score,
            estimates: HashMap::new(),
        }
    }

    pub fn insert(&mut self, x: f64, y: f64, estimate: Estimate) {
        self.estimates.insert(pixel_key(x, y), estimate);
    }

    /// Estimate at the pixel containing `(x, y)`; pixels the model did not
    /// cover count as background.
    pub fn estimate_at(&self, x: f64, y: f64) -> Estimate {
        self.estimates
            .get(&pixel_key(x, y))
            .copied()
            .unwrap_or(Estimate::Background)
    }
}

fn instance_errors(
    cache: &GeodesicCache<'_>,
    gt: &GroundTruthInstance,
    pred: Option<&PredictedInstance>,
) -> Result<Vec<f64>, MetricsError> {
    gt.points
        .iter()
        .map(|p| {
            let est = pred.map_or(Estimate::Background, |pr| pr.estimate_at(p.x, p.y));
            Ok(cache.error(p.vertex, est)?)
        })
        .collect()
}

fn gps_from_errors(errors: &[f64], cfg: &GpsConfig) -> f64 {
    errors.iter().map(|&e| cfg.similarity(e)).sum::<f64>() / errors.len() as f64
}

/// Geodesic point similarity of one prediction against one instance.
pub fn gps(
    gt: &GroundTruthInstance,
    pred: &PredictedInstance,
    mesh: &SurfaceMesh,
    cfg: &GpsConfig,
) -> Result<f64, MetricsError> {
    gps_cached(gt, pred, &GeodesicCache::new(mesh), cfg)
}

pub fn gps_cached(
    gt: &GroundTruthInstance,
    pred: &PredictedInstance,
    cache: &GeodesicCache<'_>,
    cfg: &GpsConfig,
) -> Result<f64, MetricsError> {
    cfg.validate()?;
    if gt.points.is_empty() {
        return Err(MetricsError::EmptyInstance(gt.id));
    }
    Ok(gps_from_errors(&instance_errors(cache, gt, Some(pred))?, cfg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub gps: GpsConfig,
    /// Short and long RCP integration ranges, mesh units.
    pub auc_ranges: [f64; 2],
    pub max_detections: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            gps: GpsConfig::default(),
            auc_ranges: [0.10, 0.30],
            max_detections: MAX_DETECTIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMatch {
    pub image_id: u64,
    pub gt_id: u64,
    pub pred_id: Option<u64>,
    pub gps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ap: f64,
    pub ap50: f64,
    pub ap75: f64,
    pub ar: f64,
    pub thresholds: Vec<f64>,
    pub ap_per_threshold: Vec<f64>,
    pub ar_per_threshold: Vec<f64>,
    pub auc10: f64,
    pub auc30: f64,
    /// Per-point curve over the long range.
    pub rcp: RcpCurve,
    pub instances: Vec<InstanceMatch>,
    pub gt_count: usize,
    pub detection_count: usize,
}

struct Detection {
    score: f64,
    /// GPS of the matched instance, `None` when unmatched.
    matched_gps: Option<f64>,
}

/// 101-point interpolated average precision, COCO style.
fn interpolated_ap(tp: &[bool], gt_count: usize) -> (f64, f64) {
    if gt_count == 0 || tp.is_empty() {
        return (0.0, 0.0);
    }
    let mut recall = Vec::with_capacity(tp.len());
    let mut precision = Vec::with_capacity(tp.len());
    let (mut tps, mut fps) = (0usize, 0usize);
    for &t in tp {
        if t {
            tps += 1;
        } else {
            fps += 1;
        }
        recall.push(tps as f64 / gt_count as f64);
        precision.push(tps as f64 / (tps + fps) as f64);
    }
    for i in (1..precision.len()).rev() {
        if precision[i] > precision[i - 1] {
            precision[i - 1] = precision[i];
        }
    }
    let sum: f64 = (0..=100)
        .map(|i| {
            let r = f64::from(i) / 100.0;
            let idx = recall.partition_point(|&rc| rc < r);
            precision.get(idx).copied().unwrap_or(0.0)
        })
        .sum();
    (sum / 101.0, *recall.last().expect("non-empty"))
}

fn threshold_value(thresholds: &[f64], values: &[f64], target: f64) -> f64 {
    thresholds
        .iter()
        .position(|&t| (t - target).abs() < 1e-9)
        .map_or(f64::NAN, |i| values[i])
}

/// AP/AR over GPS thresholds plus per-point RCP summaries.
///
/// Per image, predictions (best score first, at most `max_detections`) each
/// take the unmatched ground-truth instance with the highest GPS. A match is
/// a true positive at threshold `tau` when its GPS is at least `tau`. Points
/// of unmatched instances count as background for the RCP curves.
pub fn evaluate_ap_ar(
    gts: &[GroundTruthInstance],
    preds: &[PredictedInstance],
    mesh: &SurfaceMesh,
    options: &EvalOptions,
) -> Result<EvalReport, MetricsError> {
    let cfg = &options.gps;
    cfg.validate()?;
    for &a in &options.auc_ranges {
        if !(a > 0.0) {
            return Err(MetricsError::InvalidConfig(format!("AUC range {a} must be positive")));
        }
    }
    if let Some(g) = gts.iter().find(|g| g.points.is_empty()) {
        return Err(MetricsError::EmptyInstance(g.id));
    }
    let cache = GeodesicCache::new(mesh);

    let mut images: BTreeMap<u64, (Vec<&GroundTruthInstance>, Vec<&PredictedInstance>)> = BTreeMap::new();
    for g in gts {
        images.entry(g.image_id).or_default().0.push(g);
    }
    for p in preds {
        if !p.score.is_finite() {
            return Err(MetricsError::InvalidValue(format!(
                "prediction {} has score {}",
                p.id, p.score
            )));
        }
        images.entry(p.image_id).or_default().1.push(p);
    }

    let mut detections: Vec<Detection> = Vec::new();
    let mut instances = Vec::new();
    let mut point_errors = Vec::new();
    for (&image_id, (image_gts, image_preds)) in &images {
        let mut ordered: Vec<&PredictedInstance> = image_preds.clone();
        ordered.sort_by(|a, b| b.score.total_cmp(&a.score));
        ordered.truncate(options.max_detections);

        let mut owner: Vec<Option<usize>> = vec![None; image_gts.len()];
        let mut gps_matrix = vec![vec![0.0; image_gts.len()]; ordered.len()];
        let mut error_matrix = vec![vec![Vec::new(); image_gts.len()]; ordered.len()];
        for (d, pred) in ordered.iter().enumerate() {
            for (g, gt) in image_gts.iter().enumerate() {
                let errors = instance_errors(&cache, gt, Some(pred))?;
                gps_matrix[d][g] = gps_from_errors(&errors, cfg);
                error_matrix[d][g] = errors;
            }
        }
        for (d, pred) in ordered.iter().enumerate() {
            let mut best: Option<usize> = None;
            for g in 0..image_gts.len() {
                if owner[g].is_some() {
                    continue;
                }
                if best.is_none_or(|b| gps_matrix[d][g] > gps_matrix[d][b]) {
                    best = Some(g);
                }
            }
            if let Some(g) = best {
                owner[g] = Some(d);
            }
            detections.push(Detection {
                score: pred.score,
                matched_gps: best.map(|g| gps_matrix[d][g]),
            });
        }
        for (g, gt) in image_gts.iter().enumerate() {
            match owner[g] {
                Some(d) => {
                    point_errors.extend_from_slice(&error_matrix[d][g]);
                    instances.push(InstanceMatch {
                        image_id,
                        gt_id: gt.id,
                        pred_id: Some(ordered[d].id),
                        gps: gps_matrix[d][g],
                    });
                }
                None => {
                    point_errors.extend(std::iter::repeat_n(f64::INFINITY, gt.points.len()));
                    instances.push(InstanceMatch {
                        image_id,
                        gt_id: gt.id,
                        pred_id: None,
                        gps: 0.0,
                    });
                }
            }
        }
    }

    // stable: equal scores keep image order, then in-image order
    detections.sort_by(|a, b| b.score.total_cmp(&a.score));
    let gt_count = gts.len();
    let mut ap_per_threshold = Vec::with_capacity(cfg.thresholds.len());
    let mut ar_per_threshold = Vec::with_capacity(cfg.thresholds.len());
    for &tau in &cfg.thresholds {
        let tp: Vec<bool> = detections
            .iter()
            .map(|d| d.matched_gps.is_some_and(|g| g >= tau))
            .collect();
        let (ap, ar) = interpolated_ap(&tp, gt_count);
        ap_per_threshold.push(ap);
        ar_per_threshold.push(ar);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;

    let (auc10, auc30, rcp) = if point_errors.is_empty() {
        (0.0, 0.0, RcpCurve { thresholds: Vec::new(), ratio: Vec::new(), point_count: 0 })
    } else {
        let (_, short) = rcp_auc(&point_errors, options.auc_ranges[0])?;
        let (curve, long) = rcp_auc(&point_errors, options.auc_ranges[1])?;
        (short, long, curve)
    };

    Ok(EvalReport {
        ap: mean(&ap_per_threshold),
        ap50: threshold_value(&cfg.thresholds, &ap_per_threshold, 0.50),
        ap75: threshold_value(&cfg.thresholds, &ap_per_threshold, 0.75),
        ar: mean(&ar_per_threshold),
        thresholds: cfg.thresholds.clone(),
        ap_per_threshold,
        ar_per_threshold,
        auc10,
        auc30,
        rcp,
        instances,
        gt_count,
        detection_count: detections.len(),
    })
}

/// One image of the annotator study: sampled surface points and their errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorSampleSet {
    pub image_id: u64,
    /// `(sampled vertex, geodesic error at that vertex)`.
    pub samples: Vec<(usize, f64)>,
}

impl AnnotatorSampleSet {
    /// Errors from true vertices and what the annotator clicked.
    pub fn from_annotations(
        cache: &GeodesicCache<'_>,
        image_id: u64,
        pairs: &[(usize, Estimate)],
    ) -> Result<Self, MetricsError> {
        let samples = pairs
            .iter()
            .map(|&(v, est)| Ok((v, cache.error(v, est)?)))
            .collect::<Result<_, MetricsError>>()?;
        Ok(AnnotatorSampleSet { image_id, samples })
    }
}

/// Per-vertex annotator error averaged over images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorErrorField {
    /// `None` for vertices without a part label.
    pub error: Vec<Option<f64>>,
    pub image_count: usize,
}

impl AnnotatorErrorField {
    pub fn mean(&self) -> f64 {
        let vals: Vec<f64> = self.error.iter().flatten().copied().collect();
        vals.iter().sum::<f64>() / vals.len().max(1) as f64
    }

    /// Mean error per present part.
    pub fn part_means(&self, mesh: &SurfaceMesh) -> BTreeMap<PartId, f64> {
        let mut acc: BTreeMap<PartId, (f64, usize)> = BTreeMap::new();
        for (v, e) in self.error.iter().enumerate() {
            if let Some(e) = e {
                let slot = acc.entry(mesh.label(v)).or_default();
                slot.0 += e;
                slot.1 += 1;
            }
        }
        acc.into_iter().map(|(p, (s, n))| (p, s / n as f64)).collect()
    }
}

/// Nearest-sample interpolation of each image's errors over the labeled
/// surface, averaged uniformly over images. Geodesic ties go to the earlier
/// sample; vertices no sample can reach take the Euclidean-nearest sample.
pub fn annotator_error_field(
    records: &[AnnotatorSampleSet],
    mesh: &SurfaceMesh,
) -> Result<AnnotatorErrorField, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let n = mesh.vertex_count();
    let labeled: Vec<bool> = mesh.labels().iter().map(|p| !p.is_background()).collect();
    let mut total = vec![0.0; n];
    for record in records {
        if record.samples.is_empty() {
            return Err(MetricsError::EmptySample(record.image_id));
        }
        for &(v, e) in &record.samples {
            if v >= n {
                return Err(MeshError::IndexOutOfRange { index: v, len: n }.into());
            }
            if !(e >= 0.0) || !e.is_finite() {
                return Err(MetricsError::InvalidValue(format!(
                    "image {}: error {e} at vertex {v}",
                    record.image_id
                )));
            }
        }
        let fields: Vec<Vec<f64>> = record
            .samples
            .iter()
            .map(|&(v, _)| mesh.geodesic_from(v).map(|f| f.distance))
            .collect::<Result<_, _>>()?;
        for w in 0..n {
            if !labeled[w] {
                continue;
            }
            let mut best: Option<(f64, usize)> = None;
            for (s, field) in fields.iter().enumerate() {
                if field[w] < best.map_or(f64::INFINITY, |b| b.0) {
                    best = Some((field[w], s));
                }
            }
            let s = best.map(|b| b.1).unwrap_or_else(|| {
                let pos = mesh.vertices()[w];
                (0..record.samples.len())
                    .min_by(|&a, &b| {
                        let da = (mesh.vertices()[record.samples[a].0] - pos).norm();
                        let db = (mesh.vertices()[record.samples[b].0] - pos).norm();
                        da.total_cmp(&db)
                    })
                    .expect("non-empty samples")
            });
            total[w] += record.samples[s].1;
        }
    }
    let k = records.len() as f64;
    Ok(AnnotatorErrorField {
        error: (0..n)
            .map(|w| labeled[w].then(|| total[w] / k))
            .collect(),
        image_count: records.len(),
    })
}
