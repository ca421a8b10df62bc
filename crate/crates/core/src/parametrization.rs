//! Per-part UV charts.
//!
//! Parts without a supplied chart are flattened by metric MDS on their
//! geodesic distance matrix: classical (Torgerson) MDS gives the starting
//! layout and SMACOF majorization refines it against raw stress
//! `sum_{i<j} (|x_i - x_j| - d_ij)^2`. The layout is then rotated onto its
//! principal axis and fitted into the unit square.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, Matrix2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{MeshError, PartId, SurfaceMesh, PART_COUNT};

#[derive(Debug, Error)]
pub enum ParamError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("invalid distance matrix: {0}")]
    InvalidDistances(String),
    #[error("all distances are zero for {0} points")]
    DegenerateInput(usize),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("chart conflict: {0}")]
    ChartConflict(String),
    #[error("invalid chart: {0}")]
    InvalidChart(String),
    #[error("chart for part {0} is empty")]
    EmptyChart(PartId),
    #[error("query ({0}, {1}) is not a finite uv coordinate")]
    InvalidQuery(f64, f64),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("atlas file: {0}")]
    Format(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdsOptions {
    pub max_iterations: usize,
    /// Stop once `(stress_prev - stress) / stress_prev` drops below this.
    pub relative_tolerance: f64,
    /// Sweep cap for the symmetric eigensolver; 0 means unbounded.
    pub eigen_max_sweeps: usize,
}

impl Default for MdsOptions {
    fn default() -> Self {
        MdsOptions {
            max_iterations: 300,
            relative_tolerance: 1e-9,
            eigen_max_sweeps: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Relative stress change fell below tolerance, or stress is negligible
    /// relative to the squared distances.
    Converged,
    IterationCap,
    /// An update raised stress by more than the tolerance (only possible
    /// through rounding); the last decreasing configuration was kept.
    RoundingFloor,
    /// Fewer than two points; nothing to optimise.
    Trivial,
}

/// Result of [`unwrap_part`].
#[derive(Debug, Clone)]
pub struct Embedding {
    pub points: Vec<[f64; 2]>,
    /// Raw stress of the classical-MDS start followed by each accepted
    /// SMACOF iterate.
    pub stress_history: Vec<f64>,
    pub termination: Termination,
}

impl Embedding {
    pub fn stress(&self) -> f64 {
        self.stress_history.last().copied().unwrap_or(0.0)
    }
}

/// Stress ratio treated as an exact embedding.
pub const EXACT_STRESS_RATIO: f64 = 1e-24;

/// Raw stress of a 2D layout against a distance matrix.
pub fn raw_stress(points: &[[f64; 2]], distances: &DMatrix<f64>) -> f64 {
    let n = points.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let r = planar_distance(points[i], points[j]) - distances[(i, j)];
            s += r * r;
        }
    }
    s
}

/// `sum_{i<j} d_ij^2`, the normaliser for stress ratios.
pub fn distance_energy(distances: &DMatrix<f64>) -> f64 {
    let n = distances.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += distances[(i, j)] * distances[(i, j)];
        }
    }
    s
}

fn planar_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn validate_distances(d: &DMatrix<f64>) -> Result<(), ParamError> {
    let n = d.nrows();
    if d.ncols() != n {
        return Err(ParamError::InvalidDistances(format!(
            "matrix is {}x{}",
            n,
            d.ncols()
        )));
    }
    for i in 0..n {
        if d[(i, i)] != 0.0 {
            return Err(ParamError::InvalidDistances(format!("diagonal entry {i} is non-zero")));
        }
        for j in 0..n {
            let x = d[(i, j)];
            if !x.is_finite() || x < 0.0 {
                return Err(ParamError::InvalidDistances(format!(
                    "entry ({i},{j}) = {x} is not a finite non-negative length"
                )));
            }
            if x != d[(j, i)] {
                return Err(ParamError::InvalidDistances(format!(
                    "entries ({i},{j}) and ({j},{i}) differ"
                )));
            }
        }
    }
    Ok(())
}

/// Classical MDS: top two eigenpairs of the double-centered squared-distance
/// Gram matrix.
pub fn classical_mds(distances: &DMatrix<f64>, eigen_max_sweeps: usize) -> Result<Vec<[f64; 2]>, ParamError> {
    let n = distances.nrows();
    let squared = distances.map(|x| x * x);
    let row_means: Vec<f64> = (0..n).map(|i| squared.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let gram = DMatrix::from_fn(n, n, |i, j| {
        -0.5 * (squared[(i, j)] - row_means[i] - row_means[j] + grand)
    });
    let eigen = gram
        .try_symmetric_eigen(f64::EPSILON, eigen_max_sweeps)
        .ok_or_else(|| {
            ParamError::NumericalFailure(format!(
                "symmetric eigensolver did not converge within {eigen_max_sweeps} sweeps"
            ))
        })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b]
            .total_cmp(&eigen.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let mut points = vec![[0.0; 2]; n];
    for (axis, &k) in order.iter().take(2).enumerate() {
        let scale = eigen.eigenvalues[k].max(0.0).sqrt();
        for (i, p) in points.iter_mut().enumerate() {
            p[axis] = eigen.eigenvectors[(i, k)] * scale;
        }
    }
    if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(ParamError::NumericalFailure("non-finite classical MDS layout".into()));
    }
    Ok(points)
}

/// One SMACOF step (Guttman transform with unit weights).
fn guttman_transform(points: &[[f64; 2]], distances: &DMatrix<f64>) -> Vec<[f64; 2]> {
    let n = points.len();
    let mut next = vec![[0.0; 2]; n];
    for i in 0..n {
        let mut acc = [0.0; 2];
        let mut diag = 0.0;
        for j in 0..n {
            if i == j {
                continue;
            }
            let dist = planar_distance(points[i], points[j]);
            if dist > 0.0 {
                let b = -distances[(i, j)] / dist;
                acc[0] += b * points[j][0];
                acc[1] += b * points[j][1];
                diag -= b;
            }
        }
        next[i][0] = (acc[0] + diag * points[i][0]) / n as f64;
        next[i][1] = (acc[1] + diag * points[i][1]) / n as f64;
    }
    next
}

/// Embeds a geodesic distance matrix in the plane.
pub fn unwrap_part(distances: &DMatrix<f64>, options: &MdsOptions) -> Result<Embedding, ParamError> {
    validate_distances(distances)?;
    let n = distances.nrows();
    if n == 0 {
        return Err(ParamError::InvalidDistances("empty matrix".into()));
    }
    if n == 1 {
        return Ok(Embedding {
            points: vec![[0.0, 0.0]],
            stress_history: vec![0.0],
            termination: Termination::Trivial,
        });
    }
    if distances.iter().all(|&x| x == 0.0) {
        return Err(ParamError::DegenerateInput(n));
    }

    let mut points = classical_mds(distances, options.eigen_max_sweeps)?;
    let mut stress = raw_stress(&points, distances);
    let mut history = vec![stress];
    let mut termination = Termination::IterationCap;
    // Below this the layout is exact to working precision and further steps
    // only shuffle rounding error.
    let floor = distance_energy(distances) * EXACT_STRESS_RATIO;
    for _ in 0..options.max_iterations {
        if stress <= floor {
            termination = Termination::Converged;
            break;
        }
        let candidate = guttman_transform(&points, distances);
        let next = raw_stress(&candidate, distances);
        if !next.is_finite() {
            return Err(ParamError::NumericalFailure("non-finite stress".into()));
        }
        let change = (stress - next) / stress;
        if change < 0.0 {
            // Majorization cannot raise stress, so this is rounding at a
            // fixed point; keep the previous layout either way.
            termination = if -change < options.relative_tolerance {
                Termination::Converged
            } else {
                Termination::RoundingFloor
            };
            break;
        }
        points = candidate;
        stress = next;
        history.push(stress);
        if change < options.relative_tolerance {
            termination = Termination::Converged;
            break;
        }
    }
    Ok(Embedding {
        points,
        stress_history: history,
        termination,
    })
}

/// Rotates a layout so its principal axis runs along U, then mirrors each
/// axis so the first point sits at or below the bounding-box midline.
pub fn canonical_orientation(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let n = points.len();
    if n < 2 {
        return points.to_vec();
    }
    let cx = points.iter().map(|p| p[0]).sum::<f64>() / n as f64;
    let cy = points.iter().map(|p| p[1]).sum::<f64>() / n as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p[0] - cx, p[1] - cy);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let (s, c) = theta.sin_cos();
    let rotation = Matrix2::new(c, s, -s, c);
    let mut out: Vec<[f64; 2]> = points
        .iter()
        .map(|p| {
            let r = rotation * nalgebra::Vector2::new(p[0] - cx, p[1] - cy);
            [r.x, r.y]
        })
        .collect();
    for axis in 0..2 {
        let lo = out.iter().map(|p| p[axis]).fold(f64::INFINITY, f64::min);
        let hi = out.iter().map(|p| p[axis]).fold(f64::NEG_INFINITY, f64::max);
        if out[0][axis] > 0.5 * (lo + hi) {
            for p in &mut out {
                p[axis] = -p[axis];
            }
        }
    }
    out
}

/// Fits a layout into the unit square: uniform scale so the longer bounding
/// box side spans [0,1], shorter side centered. A single point (or fully
/// coincident points) maps to (0.5, 0.5).
pub fn normalize_chart(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let lo = [0, 1].map(|k| points.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min));
    let hi = [0, 1].map(|k| points.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max));
    let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    if !(extent > 0.0) {
        return vec![[0.5, 0.5]; points.len()];
    }
    let offset = [0, 1].map(|k| 0.5 * (1.0 - (hi[k] - lo[k]) / extent));
    points
        .iter()
        .map(|p| {
            [0, 1].map(|k| ((p[k] - lo[k]) / extent + offset[k]).clamp(0.0, 1.0))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartSource {
    Supplied,
    Mds,
}

/// UV chart of one body part.
#[derive(Debug, Clone, PartialEq)]
pub struct PartChart {
    pub part: PartId,
    pub source: ChartSource,
    pub vertices: Vec<usize>,
    pub uv: Vec<[f64; 2]>,
}

impl PartChart {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    fn validate(&self) -> Result<(), ParamError> {
        if self.part.is_background() {
            return Err(ParamError::InvalidChart("chart for background part".into()));
        }
        if self.vertices.len() != self.uv.len() {
            return Err(ParamError::InvalidChart(format!(
                "part {}: {} vertices but {} uv entries",
                self.part,
                self.vertices.len(),
                self.uv.len()
            )));
        }
        for (k, uv) in self.uv.iter().enumerate() {
            if !uv.iter().all(|c| (0.0..=1.0).contains(c)) {
                return Err(ParamError::InvalidChart(format!(
                    "part {}: entry {k} uv {uv:?} outside [0,1]",
                    self.part
                )));
            }
        }
        let mut sorted = self.vertices.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(ParamError::InvalidChart(format!(
                "part {}: repeated vertex",
                self.part
            )));
        }
        if self.uv.len() >= 2 && self.uv.iter().all(|uv| *uv == self.uv[0]) {
            return Err(ParamError::InvalidChart(format!(
                "part {}: all uv positions coincide",
                self.part
            )));
        }
        Ok(())
    }
}

/// Uniform-grid bucket index over one chart's uv positions.
#[derive(Debug, Clone)]
struct ChartIndex {
    side: usize,
    cells: Vec<Vec<usize>>,
}

impl ChartIndex {
    fn build(uv: &[[f64; 2]]) -> Self {
        let side = ((uv.len() as f64).sqrt().ceil() as usize).max(1);
        let mut cells = vec![Vec::new(); side * side];
        for (k, p) in uv.iter().enumerate() {
            let (cx, cy) = Self::cell_of(side, p[0], p[1]);
            cells[cy * side + cx].push(k);
        }
        ChartIndex { side, cells }
    }

    fn cell_of(side: usize, u: f64, v: f64) -> (usize, usize) {
        let c = |x: f64| ((x * side as f64).floor().max(0.0) as usize).min(side - 1);
        (c(u), c(v))
    }

    /// Nearest entry by squared uv distance, ties to the lowest vertex index.
    fn nearest(&self, chart: &PartChart, u: f64, v: f64) -> usize {
        let side = self.side as isize;
        let (cx, cy) = Self::cell_of(self.side, u, v);
        let (cx, cy) = (cx as isize, cy as isize);
        let cell = 1.0 / self.side as f64;
        let mut best: Option<(f64, usize)> = None;
        for ring in 0..side {
            for dy in -ring..=ring {
                for dx in -ring..=ring {
                    if dx.abs() != ring && dy.abs() != ring {
                        continue;
                    }
                    let (x, y) = (cx + dx, cy + dy);
                    if x < 0 || y < 0 || x >= side || y >= side {
                        continue;
                    }
                    for &k in &self.cells[(y * side + x) as usize] {
                        let du = chart.uv[k][0] - u;
                        let dv = chart.uv[k][1] - v;
                        let key = (du * du + dv * dv, chart.vertices[k]);
                        if best.is_none_or(|b| key.0 < b.0 || (key.0 == b.0 && key.1 < b.1)) {
                            best = Some(key);
                        }
                    }
                }
            }
            let covers_all = cx - ring <= 0 && cy - ring <= 0 && cx + ring >= side - 1 && cy + ring >= side - 1;
            if covers_all {
                break;
            }
            if let Some((d2, _)) = best {
                // distance from the query to the outside of the searched block;
                // sides already flush with the grid boundary have nothing beyond
                let mut gap = f64::INFINITY;
                if cx - ring > 0 {
                    gap = gap.min(u - (cx - ring) as f64 * cell);
                }
                if cx + ring < side - 1 {
                    gap = gap.min((cx + ring + 1) as f64 * cell - u);
                }
                if cy - ring > 0 {
                    gap = gap.min(v - (cy - ring) as f64 * cell);
                }
                if cy + ring < side - 1 {
                    gap = gap.min((cy + ring + 1) as f64 * cell - v);
                }
                if gap > 0.0 && d2 < gap * gap {
                    break;
                }
            }
        }
        best.map(|(_, vertex)| vertex).expect("non-empty chart")
    }
}

/// The 24 part charts plus lookup structures in both directions.
#[derive(Debug, Clone)]
pub struct UVAtlas {
    charts: Vec<PartChart>,
    indexes: Vec<ChartIndex>,
    vertex_slot: HashMap<usize, (usize, usize)>,
}

impl PartialEq for UVAtlas {
    fn eq(&self, other: &Self) -> bool {
        self.charts == other.charts
    }
}

impl UVAtlas {
    /// Assembles an atlas from exactly one chart per part 1..=24.
    pub fn from_charts(mut charts: Vec<PartChart>) -> Result<Self, ParamError> {
        charts.sort_by_key(|c| c.part);
        let parts: Vec<u8> = charts.iter().map(|c| c.part.get()).collect();
        let expected: Vec<u8> = (1..=PART_COUNT as u8).collect();
        if parts != expected {
            return Err(ParamError::InvalidChart(format!(
                "atlas needs one chart per part 1..=24, got parts {parts:?}"
            )));
        }
        let mut vertex_slot = HashMap::new();
        for (ci, chart) in charts.iter().enumerate() {
            chart.validate()?;
            for (k, &v) in chart.vertices.iter().enumerate() {
                if vertex_slot.insert(v, (ci, k)).is_some() {
                    return Err(ParamError::ChartConflict(format!(
                        "vertex {v} appears in more than one chart"
                    )));
                }
            }
        }
        let indexes = charts.iter().map(|c| ChartIndex::build(&c.uv)).collect();
        Ok(UVAtlas {
            charts,
            indexes,
            vertex_slot,
        })
    }

    pub fn charts(&self) -> &[PartChart] {
        &self.charts
    }

    pub fn chart(&self, part: PartId) -> &PartChart {
        &self.charts[part.slot()]
    }

    /// Part and uv of a charted vertex.
    pub fn uv_of(&self, vertex: usize) -> Option<(PartId, [f64; 2])> {
        self.vertex_slot.get(&vertex).map(|&(ci, k)| {
            let c = &self.charts[ci];
            (c.part, c.uv[k])
        })
    }

    /// Chart vertex nearest to `(u, v)` in uv space; ties go to the lowest
    /// vertex index.
    pub fn uv_to_vertex(&self, part: PartId, u: f64, v: f64) -> Result<usize, ParamError> {
        if part.is_background() {
            return Err(ParamError::EmptyChart(part));
        }
        if !u.is_finite() || !v.is_finite() {
            return Err(ParamError::InvalidQuery(u, v));
        }
        let chart = &self.charts[part.slot()];
        if chart.is_empty() {
            return Err(ParamError::EmptyChart(part));
        }
        Ok(self.indexes[part.slot()].nearest(chart, u, v))
    }

    /// Checks that the atlas covers exactly the labeled vertices of `mesh`
    /// with matching parts.
    pub fn check_against(&self, mesh: &SurfaceMesh) -> Result<(), ParamError> {
        for (v, &label) in mesh.labels().iter().enumerate() {
            match (label.is_background(), self.uv_of(v)) {
                (true, None) => {}
                (false, Some((p, _))) if p == label => {}
                (false, Some((p, _))) => {
                    return Err(ParamError::ChartConflict(format!(
                        "vertex {v} is labeled {label} but charted in part {p}"
                    )))
                }
                (false, None) => {
                    return Err(ParamError::ChartConflict(format!("vertex {v} is not charted")))
                }
                (true, Some(_)) => {
                    return Err(ParamError::ChartConflict(format!(
                        "unlabeled vertex {v} is charted"
                    )))
                }
            }
        }
        if let Some(&v) = self.vertex_slot.keys().find(|&&v| v >= mesh.vertex_count()) {
            return Err(ParamError::ChartConflict(format!(
                "charted vertex {v} does not exist on the mesh"
            )));
        }
        Ok(())
    }
}

/// Options for [`build_atlas`].
#[derive(Debug, Clone, Copy, Default)]
pub struct AtlasOptions {
    pub mds: MdsOptions,
}

/// MDS chart for one part of the mesh.
pub fn mds_chart(mesh: &SurfaceMesh, part: PartId, options: &MdsOptions) -> Result<PartChart, ParamError> {
    let pd = mesh.part_distance_matrix(part)?;
    let embedding = unwrap_part(&pd.distances, options)?;
    let uv = normalize_chart(&canonical_orientation(&embedding.points));
    Ok(PartChart {
        part,
        source: ChartSource::Mds,
        vertices: pd.vertices,
        uv,
    })
}

/// Builds the 24-chart atlas. Supplied charts are used verbatim; every other
/// part present on the mesh is unwrapped by MDS; absent parts get empty charts.
pub fn build_atlas(
    mesh: &SurfaceMesh,
    supplied: &[PartChart],
    options: &AtlasOptions,
) -> Result<UVAtlas, ParamError> {
    let mut supplied_by_part: HashMap<PartId, &PartChart> = HashMap::new();
    for chart in supplied {
        if supplied_by_part.insert(chart.part, chart).is_some() {
            return Err(ParamError::ChartConflict(format!(
                "part {} supplied more than once",
                chart.part
            )));
        }
        check_supplied(mesh, chart)?;
    }
    let charts: Vec<PartChart> = PartId::all_surface()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&part| -> Result<PartChart, ParamError> {
            if let Some(chart) = supplied_by_part.get(&part) {
                let mut chart = (*chart).clone();
                chart.source = ChartSource::Supplied;
                return Ok(chart);
            }
            if mesh.part_vertices(part).is_empty() {
                return Ok(PartChart {
                    part,
                    source: ChartSource::Mds,
                    vertices: Vec::new(),
                    uv: Vec::new(),
                });
            }
            mds_chart(mesh, part, &options.mds)
        })
        .collect::<Result<_, _>>()?;
    let atlas = UVAtlas::from_charts(charts)?;
    atlas.check_against(mesh)?;
    Ok(atlas)
}

fn check_supplied(mesh: &SurfaceMesh, chart: &PartChart) -> Result<(), ParamError> {
    chart.validate()?;
    let n = mesh.vertex_count();
    for &v in &chart.vertices {
        if v >= n {
            return Err(ParamError::InvalidChart(format!(
                "supplied part {}: vertex {v} out of range for {n} vertices",
                chart.part
            )));
        }
        if mesh.label(v) != chart.part {
            return Err(ParamError::ChartConflict(format!(
                "supplied part {} claims vertex {v}, which is labeled {}",
                chart.part,
                mesh.label(v)
            )));
        }
    }
    let expected = mesh.part_vertices(chart.part).len();
    if chart.vertices.len() != expected {
        return Err(ParamError::ChartConflict(format!(
            "supplied part {} covers {} of its {expected} vertices",
            chart.part,
            chart.vertices.len()
        )));
    }
    Ok(())
}

/// On-disk chart record: `{part_id, source?, entries: [[vertex, u, v], ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ChartRecord {
    part_id: PartId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<ChartSource>,
    entries: Vec<(usize, f64, f64)>,
}

/// Parses a chart file (supplied charts or a full atlas).
pub fn parse_charts(text: &str) -> Result<Vec<PartChart>, ParamError> {
    let records: Vec<ChartRecord> = serde_json::from_str(text)?;
    records
        .into_iter()
        .map(|r| {
            if r.part_id.is_background() {
                return Err(ParamError::InvalidChart("chart with part_id 0".into()));
            }
            Ok(PartChart {
                part: r.part_id,
                source: r.source.unwrap_or(ChartSource::Supplied),
                vertices: r.entries.iter().map(|e| e.0).collect(),
                uv: r.entries.iter().map(|e| [e.1, e.2]).collect(),
            })
        })
        .collect()
}

pub fn charts_to_json(charts: &[PartChart]) -> String {
    let records: Vec<ChartRecord> = charts
        .iter()
        .map(|c| ChartRecord {
            part_id: c.part,
            source: Some(c.source),
            entries: c
                .vertices
                .iter()
                .zip(&c.uv)
                .map(|(&v, uv)| (v, uv[0], uv[1]))
                .collect(),
        })
        .collect();
    serde_json::to_string(&records).expect("chart records serialize")
}

pub fn read_charts(path: &Path) -> Result<Vec<PartChart>, ParamError> {
    let text = fs::read_to_string(path).map_err(|source| ParamError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_charts(&text)
}

pub fn read_atlas(path: &Path) -> Result<UVAtlas, ParamError> {
    UVAtlas::from_charts(read_charts(path)?)
}

pub fn write_atlas(atlas: &UVAtlas, path: &Path) -> Result<(), ParamError> {
    fs::write(path, charts_to_json(atlas.charts())).map_err(|source| ParamError::Io {
        path: path.display().to_string(),
        source,
    })
}
