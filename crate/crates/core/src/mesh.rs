//! Part-labeled triangle mesh and shortest-path geodesics on its edge graph.
//!
//! Geodesic distance here means the length of the shortest path along mesh
//! edges, weighted by Euclidean edge length. It overestimates the true surface
//! geodesic (two unit edges instead of `sqrt(2)` across a square with the other
//! diagonal), but it is exact, deterministic and cheap to verify. An optional
//! edge-midpoint refinement adds intra-face shortcuts that tighten the bound.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, Point3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of surface parts in the body atlas.
pub const PART_COUNT: usize = 24;

/// Body-part identifier: 0 is background, 1..=24 are surface parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct PartId(u8);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("part id {0} is outside 0..=24")]
pub struct InvalidPartId(pub i64);

impl PartId {
    pub const BACKGROUND: PartId = PartId(0);

    pub fn new(value: u8) -> Result<Self, InvalidPartId> {
        if usize::from(value) <= PART_COUNT {
            Ok(PartId(value))
        } else {
            Err(InvalidPartId(i64::from(value)))
        }
    }

    /// A surface part (1..=24); background and out-of-range values are rejected.
    pub fn surface(value: i64) -> Result<Self, InvalidPartId> {
        if (1..=PART_COUNT as i64).contains(&value) {
            Ok(PartId(value as u8))
        } else {
            Err(InvalidPartId(value))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn is_background(self) -> bool {
        self.0 == 0
    }

    /// Zero-based slot of a surface part (part 1 -> 0).
    pub fn slot(self) -> usize {
        debug_assert!(!self.is_background());
        usize::from(self.0) - 1
    }

    /// All surface parts in ascending order.
    pub fn all_surface() -> impl Iterator<Item = PartId> {
        (1..=PART_COUNT as u8).map(PartId)
    }
}

impl TryFrom<u8> for PartId {
    type Error = InvalidPartId;
    fn try_from(value: u8) -> Result<Self, Self::Error> {
        PartId::new(value)
    }
}

impl From<PartId> for u8 {
    fn from(p: PartId) -> u8 {
        p.0
    }
}

impl fmt::Display for PartId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("label mismatch: {0}")]
    LabelMismatch(String),
    #[error("part {0} is not connected on the edge graph")]
    DisconnectedPart(PartId),
    #[error("vertex index {index} out of range for mesh with {len} vertices")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("part {0} has no vertices")]
    EmptyPart(PartId),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// How the geodesic graph is built from the mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeodesicRefinement {
    /// Vertices and mesh edges only.
    #[default]
    None,
    /// Adds one node per edge midpoint, fully connected within each face.
    EdgeMidpoints,
}

/// Compressed adjacency of the geodesic graph. Nodes `0..vertex_count` are the
/// mesh vertices; refined graphs append midpoint nodes after them.
#[derive(Debug, Clone)]
struct EdgeGraph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
    node_part: Vec<PartId>,
}

impl EdgeGraph {
    fn build(
        vertices: &[Point3<f64>],
        faces: &[[usize; 3]],
        labels: &[PartId],
        refinement: GeodesicRefinement,
    ) -> Self {
        let mut positions: Vec<Point3<f64>> = vertices.to_vec();
        let mut node_part: Vec<PartId> = labels.to_vec();
        let mut edges: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let mut add_edge = |a: usize, b: usize, positions: &[Point3<f64>]| {
            if a == b {
                return;
            }
            let key = (a.min(b), a.max(b));
            edges
                .entry(key)
                .or_insert_with(|| (positions[a] - positions[b]).norm());
        };

        match refinement {
            GeodesicRefinement::None => {
                for f in faces {
                    add_edge(f[0], f[1], &positions);
                    add_edge(f[1], f[2], &positions);
                    add_edge(f[2], f[0], &positions);
                }
            }
            GeodesicRefinement::EdgeMidpoints => {
                let mut midpoint_of: BTreeMap<(usize, usize), usize> = BTreeMap::new();
                for f in faces {
                    let mut nodes = [f[0], f[1], f[2], 0, 0, 0];
                    for k in 0..3 {
                        let (a, b) = (f[k], f[(k + 1) % 3]);
                        let key = (a.min(b), a.max(b));
                        let id = *midpoint_of.entry(key).or_insert_with(|| {
                            positions.push(nalgebra::center(&vertices[a], &vertices[b]));
                            node_part.push(if labels[a] == labels[b] {
                                labels[a]
                            } else {
                                PartId::BACKGROUND
                            });
                            positions.len() - 1
                        });
                        nodes[3 + k] = id;
                    }
                    for i in 0..6 {
                        for j in (i + 1)..6 {
                            add_edge(nodes[i], nodes[j], &positions);
                        }
                    }
                }
            }
        }

        let n = positions.len();
        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (&(a, b), &w) in &edges {
            adjacency[a].push((b, w));
            adjacency[b].push((a, w));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::with_capacity(edges.len() * 2);
        let mut weights = Vec::with_capacity(edges.len() * 2);
        offsets.push(0);
        for mut row in adjacency {
            row.sort_by_key(|&(t, _)| t);
            for (t, w) in row {
                targets.push(t);
                weights.push(w);
            }
            offsets.push(targets.len());
        }
        EdgeGraph {
            offsets,
            targets,
            weights,
            node_part,
        }
    }

    fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    fn neighbors(&self, node: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[node]..self.offsets[node + 1];
        self.targets[range.clone()]
            .iter()
            .copied()
            .zip(self.weights[range].iter().copied())
    }

    /// Dijkstra from `source`. With `restrict`, only nodes of that part are
    /// traversed. Stops early once `stop_at` is settled.
    fn shortest_paths(
        &self,
        source: usize,
        restrict: Option<PartId>,
        stop_at: Option<usize>,
    ) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.node_count()];
        let mut settled = vec![false; self.node_count()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(HeapEntry {
            dist: 0.0,
            node: source,
        });
        while let Some(HeapEntry { dist: d, node }) = heap.pop() {
            if settled[node] {
                continue;
            }
            settled[node] = true;
            if Some(node) == stop_at {
                break;
            }
            for (next, w) in self.neighbors(node) {
                if settled[next] {
                    continue;
                }
                if let Some(part) = restrict {
                    if self.node_part[next] != part {
                        continue;
                    }
                }
                let candidate = d + w;
                if candidate < dist[next] {
                    dist[next] = candidate;
                    heap.push(HeapEntry {
                        dist: candidate,
                        node: next,
                    });
                }
            }
        }
        dist
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, then on node index
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source geodesic distances over the mesh vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicField {
    pub source: usize,
    /// Per-vertex distance; `f64::INFINITY` where unreachable.
    pub distance: Vec<f64>,
}

/// Pairwise geodesic distances between the vertices of one part, measured on
/// the part's own edge graph.
#[derive(Debug, Clone, PartialEq)]
pub struct PartDistances {
    pub part: PartId,
    /// Mesh vertex index of each row/column, ascending.
    pub vertices: Vec<usize>,
    pub distances: DMatrix<f64>,
}

/// Triangle mesh whose vertices carry body-part labels. Immutable once built.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[usize; 3]>,
    labels: Vec<PartId>,
    refinement: GeodesicRefinement,
    graph: EdgeGraph,
}

impl SurfaceMesh {
    /// Builds and validates a mesh.
    pub fn new(
        vertices: Vec<Point3<f64>>,
        faces: Vec<[usize; 3]>,
        labels: Vec<PartId>,
    ) -> Result<Self, MeshError> {
        Self::with_refinement(vertices, faces, labels, GeodesicRefinement::None)
    }

    pub fn with_refinement(
        vertices: Vec<Point3<f64>>,
        faces: Vec<[usize; 3]>,
        labels: Vec<PartId>,
        refinement: GeodesicRefinement,
    ) -> Result<Self, MeshError> {
        let n = vertices.len();
        if labels.len() != n {
            return Err(MeshError::LabelMismatch(format!(
                "{} labels for {} vertices",
                labels.len(),
                n
            )));
        }
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&i| i >= n) {
                return Err(MeshError::Parse {
                    line: 0,
                    message: format!("face {fi} references vertex {bad} of {n}"),
                });
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(MeshError::Parse {
                    line: 0,
                    message: format!("face {fi} is degenerate: {f:?}"),
                });
            }
        }
        if let Some(v) = vertices
            .iter()
            .position(|p| !p.coords.iter().all(|c| c.is_finite()))
        {
            return Err(MeshError::Parse {
                line: 0,
                message: format!("vertex {v} has a non-finite coordinate"),
            });
        }
        let mut referenced = vec![false; n];
        for f in &faces {
            for &i in f {
                referenced[i] = true;
            }
        }
        if let Some(v) = (0..n).find(|&v| referenced[v] && labels[v].is_background()) {
            return Err(MeshError::LabelMismatch(format!(
                "vertex {v} is used by a face but has no part label"
            )));
        }

        let base = EdgeGraph::build(&vertices, &faces, &labels, GeodesicRefinement::None);
        check_part_connectivity(&base, &labels)?;
        let graph = match refinement {
            GeodesicRefinement::None => base,
            GeodesicRefinement::EdgeMidpoints => {
                EdgeGraph::build(&vertices, &faces, &labels, refinement)
            }
        };
        Ok(SurfaceMesh {
            vertices,
            faces,
            labels,
            refinement,
            graph,
        })
    }

    /// Same geometry with a different geodesic graph.
    pub fn refined(&self, refinement: GeodesicRefinement) -> SurfaceMesh {
        let graph = EdgeGraph::build(&self.vertices, &self.faces, &self.labels, refinement);
        SurfaceMesh {
            vertices: self.vertices.clone(),
            faces: self.faces.clone(),
            labels: self.labels.clone(),
            refinement,
            graph,
        }
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn labels(&self) -> &[PartId] {
        &self.labels
    }

    pub fn refinement(&self) -> GeodesicRefinement {
        self.refinement
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn label(&self, vertex: usize) -> PartId {
        self.labels[vertex]
    }

    /// Part of a face when all three corners share a label.
    pub fn face_part(&self, face: usize) -> Option<PartId> {
        let [a, b, c] = self.faces[face];
        let p = self.labels[a];
        (p == self.labels[b] && p == self.labels[c] && !p.is_background()).then_some(p)
    }

    /// Vertices labeled with `part`, ascending.
    pub fn part_vertices(&self, part: PartId) -> Vec<usize> {
        (0..self.vertices.len())
            .filter(|&v| self.labels[v] == part)
            .collect()
    }

    /// Faces whose three corners all belong to `part`, ascending.
    pub fn part_faces(&self, part: PartId) -> Vec<usize> {
        (0..self.faces.len())
            .filter(|&f| self.face_part(f) == Some(part))
            .collect()
    }

    /// Surface parts that own at least one vertex.
    pub fn present_parts(&self) -> Vec<PartId> {
        let mut seen = [false; PART_COUNT + 1];
        for p in &self.labels {
            seen[usize::from(p.get())] = true;
        }
        PartId::all_surface()
            .filter(|p| seen[usize::from(p.get())])
            .collect()
    }

    /// Length of the axis-aligned bounding-box diagonal.
    pub fn bounding_diagonal(&self) -> f64 {
        bounding_diagonal(self.vertices.iter())
    }

    fn check_index(&self, index: usize) -> Result<(), MeshError> {
        if index < self.vertices.len() {
            Ok(())
        } else {
            Err(MeshError::IndexOutOfRange {
                index,
                len: self.vertices.len(),
            })
        }
    }

    pub fn geodesic_from(&self, source: usize) -> Result<GeodesicField, MeshError> {
        self.check_index(source)?;
        let mut distance = self.graph.shortest_paths(source, None, None);
        distance.truncate(self.vertices.len());
        Ok(GeodesicField { source, distance })
    }

    /// Geodesic distance between two vertices. Always searched from the lower
    /// index so the result is bitwise symmetric.
    pub fn geodesic_between(&self, i: usize, j: usize) -> Result<f64, MeshError> {
        self.check_index(i)?;
        self.check_index(j)?;
        if i == j {
            return Ok(0.0);
        }
        let (from, to) = (i.min(j), i.max(j));
        Ok(self.graph.shortest_paths(from, None, Some(to))[to])
    }

    /// Distances from `source` restricted to the edge graph of its own part.
    pub fn part_geodesic_from(&self, source: usize) -> Result<GeodesicField, MeshError> {
        self.check_index(source)?;
        let part = self.labels[source];
        let mut distance = self.graph.shortest_paths(source, Some(part), None);
        distance.truncate(self.vertices.len());
        Ok(GeodesicField { source, distance })
    }

    /// Symmetric all-pairs geodesic matrix over one part's vertices. Row `i` is
    /// computed from vertex `i`; the lower triangle mirrors the upper one.
    pub fn part_distance_matrix(&self, part: PartId) -> Result<PartDistances, MeshError> {
        if part.is_background() {
            return Err(MeshError::EmptyPart(part));
        }
        let vertices = self.part_vertices(part);
        if vertices.is_empty() {
            return Err(MeshError::EmptyPart(part));
        }
        let n = vertices.len();
        let rows: Vec<Vec<f64>> = vertices
            .par_iter()
            .map(|&v| {
                let d = self.graph.shortest_paths(v, Some(part), None);
                vertices.iter().map(|&w| d[w]).collect()
            })
            .collect();
        let mut distances = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let d = rows[i][j];
                if !d.is_finite() {
                    return Err(MeshError::DisconnectedPart(part));
                }
                distances[(i, j)] = d;
                distances[(j, i)] = d;
            }
        }
        Ok(PartDistances {
            part,
            vertices,
            distances,
        })
    }
}

pub(crate) fn bounding_diagonal<'a>(points: impl Iterator<Item = &'a Point3<f64>>) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    let mut any = false;
    for p in points {
        any = true;
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    if !any {
        return 0.0;
    }
    ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2) + (hi[2] - lo[2]).powi(2)).sqrt()
}

fn check_part_connectivity(graph: &EdgeGraph, labels: &[PartId]) -> Result<(), MeshError> {
    let n = labels.len();
    let mut seen = vec![false; n];
    let mut visited_part = [false; PART_COUNT + 1];
    for start in 0..n {
        let part = labels[start];
        if part.is_background() || seen[start] {
            continue;
        }
        if visited_part[usize::from(part.get())] {
            return Err(MeshError::DisconnectedPart(part));
        }
        visited_part[usize::from(part.get())] = true;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            for (w, _) in graph.neighbors(v) {
                if w < n && !seen[w] && labels[w] == part {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    Ok(())
}

/// Vertex positions and triangles read from an OBJ file.
pub type ObjGeometry = (Vec<Point3<f64>>, Vec<[usize; 3]>);

/// Parses Wavefront-style text: `v x y z` and `f a b c` lines with 1-based
/// indices. `a/b/c` corner syntax is accepted; only the position index is used.
pub fn parse_obj(text: &str) -> Result<ObjGeometry, MeshError> {
    let mut vertices = Vec::new();
    let mut raw_faces: Vec<(usize, [usize; 3])> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        let err = |message: String| MeshError::Parse {
            line: line_no,
            message,
        };
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| t.parse::<f64>().map_err(|e| err(format!("bad coordinate {t:?}: {e}"))))
                    .collect::<Result<_, _>>()?;
                if coords.len() != 3 {
                    return Err(err("vertex needs three coordinates".into()));
                }
                if !coords.iter().all(|c| c.is_finite()) {
                    return Err(err("non-finite coordinate".into()));
                }
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let corners: Vec<usize> = tokens
                    .map(|t| {
                        let idx = t.split('/').next().unwrap_or("");
                        idx.parse::<usize>()
                            .map_err(|e| err(format!("bad face index {t:?}: {e}")))
                    })
                    .collect::<Result<_, _>>()?;
                if corners.len() != 3 {
                    return Err(err(format!(
                        "only triangles are supported, got {} corners",
                        corners.len()
                    )));
                }
                raw_faces.push((line_no, [corners[0], corners[1], corners[2]]));
            }
            _ => {}
        }
    }
    let n = vertices.len();
    let mut faces = Vec::with_capacity(raw_faces.len());
    for (line, f) in raw_faces {
        let mut tri = [0usize; 3];
        for k in 0..3 {
            if f[k] == 0 || f[k] > n {
                return Err(MeshError::Parse {
                    line,
                    message: format!("face index {} outside 1..={n}", f[k]),
                });
            }
            tri[k] = f[k] - 1;
        }
        if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
            return Err(MeshError::Parse {
                line,
                message: "degenerate face".into(),
            });
        }
        faces.push(tri);
    }
    Ok((vertices, faces))
}

/// Parses a JSON array of per-vertex part labels.
pub fn parse_labels(text: &str) -> Result<Vec<PartId>, MeshError> {
    let raw: Vec<i64> = serde_json::from_str(text).map_err(|e| MeshError::Parse {
        line: e.line(),
        message: format!("labels: {e}"),
    })?;
    raw.iter()
        .enumerate()
        .map(|(i, &v)| {
            u8::try_from(v)
                .ok()
                .and_then(|b| PartId::new(b).ok())
                .ok_or_else(|| MeshError::LabelMismatch(format!("label {v} at index {i} outside 0..=24")))
        })
        .collect()
}

/// Loads and validates a mesh with its label file.
pub fn load_mesh(mesh_file: &Path, labels_file: &Path) -> Result<SurfaceMesh, MeshError> {
    let read = |p: &Path| {
        fs::read_to_string(p).map_err(|source| MeshError::Io {
            path: p.display().to_string(),
            source,
        })
    };
    let (vertices, faces) = parse_obj(&read(mesh_file)?)?;
    let labels = parse_labels(&read(labels_file)?)?;
    SurfaceMesh::new(vertices, faces, labels)
}

/// Writes the mesh as Wavefront text plus a JSON label array.
pub fn write_mesh(mesh: &SurfaceMesh, mesh_file: &Path, labels_file: &Path) -> Result<(), MeshError> {
    use std::fmt::Write as _;
    let mut obj = String::new();
    for p in mesh.vertices() {
        let _ = writeln!(obj, "v {} {} {}", p.x, p.y, p.z);
    }
    for f in mesh.faces() {
        let _ = writeln!(obj, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    let labels: Vec<u8> = mesh.labels().iter().map(|p| p.get()).collect();
    let io = |p: &Path, source| MeshError::Io {
        path: p.display().to_string(),
        source,
    };
    fs::write(mesh_file, obj).map_err(|e| io(mesh_file, e))?;
    fs::write(labels_file, serde_json::to_string(&labels).unwrap_or_default())
        .map_err(|e| io(labels_file, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> SurfaceMesh {
        let v = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ];
        let p = PartId::new(1).unwrap();
        SurfaceMesh::new(v, vec![[0, 1, 2], [0, 2, 3]], vec![p; 4]).unwrap()
    }

    #[test]
    fn parses_two_triangle_square() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3\nf 1 3 4\n";
        let (v, f) = parse_obj(text).unwrap();
        let mesh = SurfaceMesh::new(v, f, parse_labels("[1,1,1,1]").unwrap()).unwrap();
        assert_eq!(mesh.vertex_count(), 4);
        assert_eq!(mesh.faces().len(), 2);
    }

    #[test]
    fn label_out_of_range_is_rejected() {
        assert!(matches!(
            parse_labels("[1, 25, 1]"),
            Err(MeshError::LabelMismatch(_))
        ));
        assert!(matches!(parse_labels("[-1]"), Err(MeshError::LabelMismatch(_))));
    }

    #[test]
    fn face_index_out_of_bounds_is_parse_error() {
        let mut text = String::new();
        for i in 0..8 {
            text.push_str(&format!("v {i} 0 0\n"));
        }
        text.push_str("f 1 2 9\n");
        assert!(matches!(parse_obj(&text), Err(MeshError::Parse { line: 9, .. })));
    }

    #[test]
    fn quads_and_zero_index_rejected() {
        assert!(parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").is_err());
        assert!(parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nf 0 1 2\n").is_err());
        assert!(parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nf 1 1 2\n").is_err());
    }

    #[test]
    fn label_count_mismatch() {
        let (v, f) = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nf 1 2 3\n").unwrap();
        let err = SurfaceMesh::new(v, f, vec![PartId::new(1).unwrap(); 2]).unwrap_err();
        assert!(matches!(err, MeshError::LabelMismatch(_)));
    }

    #[test]
    fn unlabeled_face_vertex_rejected() {
        let (v, f) = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nf 1 2 3\n").unwrap();
        let p = PartId::new(2).unwrap();
        let err = SurfaceMesh::new(v, f, vec![p, p, PartId::BACKGROUND]).unwrap_err();
        assert!(matches!(err, MeshError::LabelMismatch(_)));
    }

    #[test]
    fn disconnected_part_detected() {
        // two separate triangles with the same label
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 5 0 0\nv 6 0 0\nv 5 1 0\nf 1 2 3\nf 4 5 6\n";
        let (v, f) = parse_obj(text).unwrap();
        let err = SurfaceMesh::new(v, f, parse_labels("[3,3,3,3,3,3]").unwrap()).unwrap_err();
        assert!(matches!(err, MeshError::DisconnectedPart(p) if p.get() == 3));
    }

    #[test]
    fn geodesic_identity_and_single_edge() {
        let m = unit_square();
        let field = m.geodesic_from(2).unwrap();
        assert_eq!(field.distance[2], 0.0);
        assert_eq!(m.geodesic_between(0, 1).unwrap(), 1.0);
        assert_eq!(m.geodesic_between(3, 3).unwrap(), 0.0);
    }

    #[test]
    fn square_opposite_corners_go_around() {
        // diagonal runs (0,0)-(1,1); (1,0) -> (0,1) must use two unit edges
        let m = unit_square();
        assert_eq!(m.geodesic_between(1, 3).unwrap(), 2.0);
        assert_eq!(m.geodesic_between(0, 2).unwrap(), 2f64.sqrt());
    }

    #[test]
    fn midpoint_refinement_shortens_paths() {
        let m = unit_square().refined(GeodesicRefinement::EdgeMidpoints);
        let d = m.geodesic_between(1, 3).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-12, "{d}");
        assert_eq!(m.geodesic_from(0).unwrap().distance.len(), 4);
    }

    #[test]
    fn out_of_range_index() {
        let m = unit_square();
        assert!(matches!(
            m.geodesic_from(4),
            Err(MeshError::IndexOutOfRange { index: 4, len: 4 })
        ));
        assert!(m.geodesic_between(0, 7).is_err());
    }

    #[test]
    fn path_part_distance_matrix() {
        let v = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
            Point3::new(1.0, 5.0, 0.0),
        ];
        let a = PartId::new(1).unwrap();
        let b = PartId::new(2).unwrap();
        let m = SurfaceMesh::new(v, vec![[0, 1, 3], [1, 2, 3]], vec![a, a, a, b]).unwrap();
        let pd = m.part_distance_matrix(a).unwrap();
        assert_eq!(pd.vertices, vec![0, 1, 2]);
        let expected = [[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]];
        for (i, row) in expected.iter().enumerate() {
            for (j, &d) in row.iter().enumerate() {
                assert_eq!(pd.distances[(i, j)], d);
            }
        }
        let single = m.part_distance_matrix(b).unwrap();
        assert_eq!(single.distances.shape(), (1, 1));
        assert_eq!(single.distances[(0, 0)], 0.0);
        assert!(matches!(
            m.part_distance_matrix(PartId::new(7).unwrap()),
            Err(MeshError::EmptyPart(_))
        ));
    }

    #[test]
    fn unreachable_vertices_are_infinite() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 5 0 0\nv 6 0 0\nv 5 1 0\nf 1 2 3\nf 4 5 6\n";
        let (v, f) = parse_obj(text).unwrap();
        let m = SurfaceMesh::new(v, f, parse_labels("[1,1,1,2,2,2]").unwrap()).unwrap();
        let field = m.geodesic_from(0).unwrap();
        assert!(field.distance[4].is_infinite());
        assert!(m.geodesic_between(5, 0).unwrap().is_infinite());
    }

    #[test]
    fn part_id_bounds() {
        assert!(PartId::new(24).is_ok());
        assert!(PartId::new(25).is_err());
        assert!(PartId::surface(0).is_err());
        assert_eq!(PartId::all_surface().count(), 24);
        let parsed: PartId = serde_json::from_str("5").unwrap();
        assert_eq!(parsed.get(), 5);
        assert!(serde_json::from_str::<PartId>("30").is_err());
    }
}
