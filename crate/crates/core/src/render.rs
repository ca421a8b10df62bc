//! Six orthographic views per body part, rendered with per-pixel surface
//! lookup buffers (face id, barycentric weights, depth).
//!
//! Cameras sit on the six half-axes of the part's principal-component frame
//! and look back at the part, so every face of a near-convex part is
//! front-facing in at least one view. Only front-facing faces of the part are
//! rasterized; other parts never occlude.
//!
//! Screen coordinates are continuous: pixel `(i, j)` covers
//! `[i, i+1) x [j, j+1)` and its center is `(i + 0.5, j + 0.5)`. The y axis
//! points down. Depth grows away from the camera.

use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{MeshError, PartId, SurfaceMesh};
use crate::parametrization::UVAtlas;

pub const VIEW_COUNT: usize = 6;
/// Fraction of the image left empty on each side of the fitted part.
pub const VIEW_MARGIN: f64 = 0.05;
/// Depth tolerance as a fraction of the part's bounding-box diagonal.
pub const DEPTH_EPSILON_FRACTION: f64 = 1e-4;
const TILE: u32 = 16;
const BACKGROUND_SHADE: u8 = 255;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("part {0} has no faces")]
    EmptyPart(PartId),
    #[error("no surface under ({x}, {y})")]
    NoSurface { x: f64, y: f64 },
    #[error("({x}, {y}) is outside the {width}x{height} view")]
    OutOfBounds { x: f64, y: f64, width: u32, height: u32 },
    #[error("resolution must be at least 8 pixels, got {0}")]
    InvalidResolution(u32),
    #[error("view index {0} is not in 0..6")]
    InvalidView(usize),
    #[error("{0}")]
    Mismatch(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Orthographic camera of one view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewCamera {
    /// Unit vector from the part toward the camera.
    pub direction: Vector3<f64>,
    pub right: Vector3<f64>,
    pub up: Vector3<f64>,
    /// In-plane coordinates (along `right`, `up`) mapped to the image center.
    pub offset: [f64; 2],
    /// Pixels per world unit.
    pub scale: f64,
    pub width: u32,
    pub height: u32,
}

impl ViewCamera {
    /// Continuous pixel coordinates and depth of a world point.
    pub fn project(&self, p: &Point3<f64>) -> (f64, f64, f64) {
        let x = f64::from(self.width) / 2.0 + self.scale * (p.coords.dot(&self.right) - self.offset[0]);
        let y = f64::from(self.height) / 2.0 - self.scale * (p.coords.dot(&self.up) - self.offset[1]);
        (x, y, -p.coords.dot(&self.direction))
    }

    pub fn world_units_per_pixel(&self) -> f64 {
        1.0 / self.scale
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x < f64::from(self.width) && y < f64::from(self.height)
    }
}

/// Per-pixel surface lookup buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct GBuffer {
    pub width: u32,
    pub height: u32,
    /// Face index per pixel, -1 for background.
    pub face_id: Vec<i32>,
    pub barycentric: Vec<[f32; 3]>,
    /// Depth per pixel, `+inf` for background.
    pub depth: Vec<f32>,
}

impl GBuffer {
    fn empty(width: u32, height: u32) -> Self {
        let n = (width as usize) * (height as usize);
        GBuffer {
            width,
            height,
            face_id: vec![-1; n],
            barycentric: vec![[0.0; 3]; n],
            depth: vec![f32::INFINITY; n],
        }
    }

    pub fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }
}

/// A face of the part as seen by one camera.
#[derive(Debug, Clone, Copy)]
struct ScreenTriangle {
    face: usize,
    xy: [[f64; 2]; 3],
    depth: [f64; 3],
    area: f64,
}

fn cross2(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

impl ScreenTriangle {
    /// Barycentric weights of a screen point, `None` when outside (edges
    /// count as inside).
    fn cover(&self, x: f64, y: f64) -> Option<[f64; 3]> {
        let p = [x, y];
        let [a, b, c] = self.xy;
        let w0 = cross2(p, b, c) / self.area;
        let w1 = cross2(p, c, a) / self.area;
        let w2 = cross2(p, a, b) / self.area;
        (w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0).then(|| {
            let s = w0 + w1 + w2;
            [w0 / s, w1 / s, w2 / s]
        })
    }

    fn depth_at(&self, w: [f64; 3]) -> f64 {
        w[0] * self.depth[0] + w[1] * self.depth[1] + w[2] * self.depth[2]
    }

    /// Weights of the closest point of the triangle to a screen point.
    fn closest_weights(&self, x: f64, y: f64) -> [f64; 3] {
        let p = [x, y];
        let [a, b, c] = self.xy;
        let raw = [
            cross2(p, b, c) / self.area,
            cross2(p, c, a) / self.area,
            cross2(p, a, b) / self.area,
        ];
        if raw.iter().all(|&w| w >= 0.0) {
            let s: f64 = raw.iter().sum();
            return raw.map(|w| w / s);
        }
        // project onto each edge, keep the nearest
        let verts = [a, b, c];
        let mut best = (f64::INFINITY, [1.0, 0.0, 0.0]);
        for k in 0..3 {
            let (i, j) = (k, (k + 1) % 3);
            let (u, v) = (verts[i], verts[j]);
            let e = [v[0] - u[0], v[1] - u[1]];
            let len2 = e[0] * e[0] + e[1] * e[1];
            let t = if len2 > 0.0 {
                (((p[0] - u[0]) * e[0] + (p[1] - u[1]) * e[1]) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let q = [u[0] + t * e[0], u[1] + t * e[1]];
            let d = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
            if d < best.0 {
                let mut w = [0.0; 3];
                w[i] = 1.0 - t;
                w[j] = t;
                best = (d, w);
            }
        }
        best.1
    }
}

/// A point on the mesh surface: a face plus barycentric weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub face: usize,
    pub barycentric: [f64; 3],
}

impl SurfacePoint {
    pub fn new(mesh: &SurfaceMesh, face: usize, barycentric: [f64; 3]) -> Result<Self, RenderError> {
        if face >= mesh.faces().len() {
            return Err(RenderError::Mismatch(format!("face {face} does not exist")));
        }
        let sum: f64 = barycentric.iter().sum();
        if barycentric.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > 1e-6 {
            return Err(RenderError::Mismatch(format!(
                "invalid barycentric weights {barycentric:?}"
            )));
        }
        if mesh.face_part(face).is_none() {
            return Err(RenderError::Mismatch(format!(
                "face {face} straddles several parts"
            )));
        }
        Ok(SurfacePoint { face, barycentric })
    }

    pub fn position(&self, mesh: &SurfaceMesh) -> Point3<f64> {
        let f = mesh.faces()[self.face];
        let v = mesh.vertices();
        let w = self.barycentric;
        Point3::from(v[f[0]].coords * w[0] + v[f[1]].coords * w[1] + v[f[2]].coords * w[2])
    }

    pub fn part(&self, mesh: &SurfaceMesh) -> Option<PartId> {
        mesh.face_part(self.face)
    }

    /// Barycentric interpolation of the corner uvs.
    pub fn uv(&self, mesh: &SurfaceMesh, atlas: &UVAtlas) -> Option<[f64; 2]> {
        let f = mesh.faces()[self.face];
        let mut uv = [0.0; 2];
        for (&vertex, w) in f.iter().zip(self.barycentric) {
            let (_, c) = atlas.uv_of(vertex)?;
            uv[0] += w * c[0];
            uv[1] += w * c[1];
        }
        Some(uv.map(|c| c.clamp(0.0, 1.0)))
    }

    /// Corner with the largest weight; ties go to the lowest vertex index.
    pub fn nearest_vertex(&self, mesh: &SurfaceMesh) -> usize {
        let f = mesh.faces()[self.face];
        let mut best = 0;
        for k in 1..3 {
            let (w, bw) = (self.barycentric[k], self.barycentric[best]);
            if w > bw || (w == bw && f[k] < f[best]) {
                best = k;
            }
        }
        f[best]
    }

    /// The point sitting exactly on a vertex, using any face of its part.
    pub fn at_vertex(mesh: &SurfaceMesh, vertex: usize) -> Option<Self> {
        mesh.faces().iter().enumerate().find_map(|(fi, f)| {
            let k = f.iter().position(|&v| v == vertex)?;
            mesh.face_part(fi)?;
            let mut w = [0.0; 3];
            w[k] = 1.0;
            Some(SurfacePoint {
                face: fi,
                barycentric: w,
            })
        })
    }
}

/// Geodesic distance between two surface points. Points on the same face or
/// on faces sharing a vertex use the straight chord; otherwise the path runs
/// chord, vertex-graph geodesic, chord through the best pair of corners.
pub fn surface_distance(mesh: &SurfaceMesh, a: &SurfacePoint, b: &SurfacePoint) -> Result<f64, MeshError> {
    let fa = mesh.faces()[a.face];
    let fb = mesh.faces()[b.face];
    let pa = a.position(mesh);
    let pb = b.position(mesh);
    if fa.iter().any(|v| fb.contains(v)) {
        return Ok((pa - pb).norm());
    }
    let mut best = f64::INFINITY;
    for &va in &fa {
        let field = mesh.geodesic_from(va)?;
        let lead = (pa - mesh.vertices()[va]).norm();
        for &vb in &fb {
            let d = lead + field.distance[vb] + (mesh.vertices()[vb] - pb).norm();
            best = best.min(d);
        }
    }
    Ok(best)
}

/// One rendered view of a part with its lookup buffers.
#[derive(Debug, Clone)]
pub struct ViewRender {
    pub part: PartId,
    pub view_index: usize,
    pub camera: ViewCamera,
    pub buffers: GBuffer,
    /// Flat-shaded grayscale image.
    pub shade: Vec<u8>,
    pub depth_epsilon: f64,
    triangles: Vec<ScreenTriangle>,
    tiles_x: u32,
    bins: Vec<Vec<u32>>,
}

/// Where a surface point lands in one view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewProjection {
    pub view: usize,
    pub x: f64,
    pub y: f64,
    pub visible: bool,
}

/// Hit of an exact screen-space query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceHit {
    pub face: usize,
    pub barycentric: [f64; 3],
    pub depth: f64,
}

impl ViewRender {
    pub fn width(&self) -> u32 {
        self.camera.width
    }

    pub fn height(&self) -> u32 {
        self.camera.height
    }

    /// Front-facing faces of this view, ascending.
    pub fn front_faces(&self) -> impl Iterator<Item = usize> + '_ {
        self.triangles.iter().map(|t| t.face)
    }

    fn candidates(&self, x: f64, y: f64) -> &[u32] {
        if !self.camera.contains(x, y) {
            return &[];
        }
        let tx = (x as u32) / TILE;
        let ty = (y as u32) / TILE;
        &self.bins[(ty * self.tiles_x + tx) as usize]
    }

    /// Nearest front-facing part face covering a continuous screen point;
    /// depth ties go to the lower face index.
    pub fn surface_at(&self, x: f64, y: f64) -> Option<SurfaceHit> {
        let mut best: Option<SurfaceHit> = None;
        for &t in self.candidates(x, y) {
            let tri = &self.triangles[t as usize];
            if let Some(w) = tri.cover(x, y) {
                let depth = tri.depth_at(w);
                if best.is_none_or(|b| depth < b.depth) {
                    best = Some(SurfaceHit {
                        face: tri.face,
                        barycentric: w,
                        depth,
                    });
                }
            }
        }
        best
    }

    /// Shallowest depth among front-facing faces other than `skip` covering
    /// the point.
    fn occluder_depth(&self, x: f64, y: f64, skip: usize) -> Option<f64> {
        self.candidates(x, y)
            .iter()
            .map(|&t| &self.triangles[t as usize])
            .filter(|tri| tri.face != skip)
            .filter_map(|tri| tri.cover(x, y).map(|w| tri.depth_at(w)))
            .min_by(f64::total_cmp)
    }

    fn is_front_facing(&self, face: usize) -> bool {
        self.triangles.binary_search_by_key(&face, |t| t.face).is_ok()
    }

    pub fn meta(&self) -> ViewMeta {
        ViewMeta {
            part: self.part,
            view: self.view_index,
            width: self.width(),
            height: self.height(),
            camera: self.camera,
            world_units_per_pixel: self.camera.world_units_per_pixel(),
            depth_epsilon: self.depth_epsilon,
        }
    }
}

/// Serializable description of a view (served alongside its image).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewMeta {
    pub part: PartId,
    pub view: usize,
    pub width: u32,
    pub height: u32,
    pub camera: ViewCamera,
    pub world_units_per_pixel: f64,
    pub depth_epsilon: f64,
}

/// The six views of one part.
#[derive(Debug, Clone)]
pub struct PartViews {
    pub part: PartId,
    pub views: Vec<ViewRender>,
}

impl PartViews {
    pub fn view(&self, index: usize) -> Result<&ViewRender, RenderError> {
        self.views.get(index).ok_or(RenderError::InvalidView(index))
    }

    /// Faces of the part that own no pixel in any view.
    pub fn unseen_faces(&self, mesh: &SurfaceMesh) -> Vec<usize> {
        let faces = mesh.part_faces(self.part);
        let mut seen = std::collections::HashSet::new();
        for view in &self.views {
            seen.extend(view.buffers.face_id.iter().filter(|&&f| f >= 0).map(|&f| f as usize));
        }
        faces.into_iter().filter(|f| !seen.contains(f)).collect()
    }
}

/// Principal axes of the part's vertices, ordered by decreasing variance,
/// right-handed, each with its largest component positive.
fn principal_frame(points: &[Point3<f64>]) -> [Vector3<f64>; 3] {
    let n = points.len() as f64;
    let mean = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p.coords - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    let eigen = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]).then(a.cmp(&b)));
    let canonical = |v: Vector3<f64>| {
        let k = v.iamax();
        if v[k] < 0.0 {
            -v
        } else {
            v
        }
    };
    let e1 = canonical(eigen.eigenvectors.column(order[0]).into_owned()).normalize();
    let e2 = canonical(eigen.eigenvectors.column(order[1]).into_owned()).normalize();
    let e3 = e1.cross(&e2).normalize();
    [e1, e2, e3]
}

/// View directions and up vectors, in view order.
fn view_axes(frame: &[Vector3<f64>; 3]) -> [(Vector3<f64>, Vector3<f64>); VIEW_COUNT] {
    let [e1, e2, e3] = *frame;
    [(e1, e2), (-e1, e2), (e2, e1), (-e2, e1), (e3, e1), (-e3, e1)]
}

fn part_geometry(mesh: &SurfaceMesh, part: PartId) -> Result<(Vec<usize>, Vec<Point3<f64>>), RenderError> {
    let faces = mesh.part_faces(part);
    if faces.is_empty() {
        return Err(RenderError::EmptyPart(part));
    }
    let mut used: Vec<usize> = faces.iter().flat_map(|&f| mesh.faces()[f]).collect();
    used.sort_unstable();
    used.dedup();
    let points = used.iter().map(|&v| mesh.vertices()[v]).collect();
    Ok((faces, points))
}

/// Cameras for the six views of a part.
pub fn part_cameras(mesh: &SurfaceMesh, part: PartId, resolution: u32) -> Result<Vec<ViewCamera>, RenderError> {
    if resolution < 8 {
        return Err(RenderError::InvalidResolution(resolution));
    }
    let (_, points) = part_geometry(mesh, part)?;
    let frame = principal_frame(&points);
    Ok(view_axes(&frame)
        .iter()
        .map(|&(direction, up)| {
            let right = up.cross(&direction);
            let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for p in &points {
                let q = [p.coords.dot(&right), p.coords.dot(&up)];
                for k in 0..2 {
                    lo[k] = lo[k].min(q[k]);
                    hi[k] = hi[k].max(q[k]);
                }
            }
            let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]);
            let usable = f64::from(resolution) * (1.0 - 2.0 * VIEW_MARGIN);
            let scale = if extent > 0.0 { usable / extent } else { 1.0 };
            ViewCamera {
                direction,
                right,
                up,
                offset: [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])],
                scale,
                width: resolution,
                height: resolution,
            }
        })
        .collect())
}

fn screen_triangles(mesh: &SurfaceMesh, faces: &[usize], camera: &ViewCamera) -> Vec<ScreenTriangle> {
    faces
        .iter()
        .filter_map(|&face| {
            let [a, b, c] = mesh.faces()[face].map(|v| mesh.vertices()[v]);
            let normal = (b - a).cross(&(c - a));
            if normal.dot(&camera.direction) <= 0.0 {
                return None;
            }
            let pa = camera.project(&a);
            let pb = camera.project(&b);
            let pc = camera.project(&c);
            let xy = [[pa.0, pa.1], [pb.0, pb.1], [pc.0, pc.1]];
            let area = cross2(xy[0], xy[1], xy[2]);
            (area != 0.0).then_some(ScreenTriangle {
                face,
                xy,
                depth: [pa.2, pb.2, pc.2],
                area,
            })
        })
        .collect()
}

fn pixel_span(lo: f64, hi: f64, limit: u32) -> Option<(u32, u32)> {
    // pixels whose centers may fall in [lo, hi]
    let first = (lo - 0.5).ceil().max(0.0);
    let last = (hi - 0.5).floor().min(f64::from(limit) - 1.0);
    (first <= last).then_some((first as u32, last as u32))
}

fn bin_triangles(triangles: &[ScreenTriangle], width: u32, height: u32) -> (u32, Vec<Vec<u32>>) {
    let tiles_x = width.div_ceil(TILE);
    let tiles_y = height.div_ceil(TILE);
    let mut bins = vec![Vec::new(); (tiles_x * tiles_y) as usize];
    for (t, tri) in triangles.iter().enumerate() {
        let xs = tri.xy.map(|p| p[0]);
        let ys = tri.xy.map(|p| p[1]);
        let x0 = xs.iter().copied().fold(f64::INFINITY, f64::min).floor().max(0.0);
        let x1 = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max).floor();
        let y0 = ys.iter().copied().fold(f64::INFINITY, f64::min).floor().max(0.0);
        let y1 = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max).floor();
        if x1 < 0.0 || y1 < 0.0 || x0 >= f64::from(width) || y0 >= f64::from(height) {
            continue;
        }
        let x1 = x1.min(f64::from(width - 1)) as u32;
        let y1 = y1.min(f64::from(height - 1)) as u32;
        for ty in (y0 as u32 / TILE)..=(y1 / TILE) {
            for tx in (x0 as u32 / TILE)..=(x1 / TILE) {
                bins[(ty * tiles_x + tx) as usize].push(t as u32);
            }
        }
    }
    (tiles_x, bins)
}

fn assemble_view(
    mesh: &SurfaceMesh,
    part: PartId,
    view_index: usize,
    camera: ViewCamera,
    faces: &[usize],
    depth_epsilon: f64,
    buffers: Option<GBuffer>,
) -> Result<ViewRender, RenderError> {
    let triangles = screen_triangles(mesh, faces, &camera);
    let (tiles_x, bins) = bin_triangles(&triangles, camera.width, camera.height);
    let buffers = match buffers {
        Some(b) => {
            if b.width != camera.width || b.height != camera.height {
                return Err(RenderError::Mismatch(format!(
                    "buffers are {}x{}, camera is {}x{}",
                    b.width, b.height, camera.width, camera.height
                )));
            }
            b
        }
        None => rasterize(&triangles, &camera),
    };
    let shade = shade_buffer(mesh, &buffers, &camera);
    Ok(ViewRender {
        part,
        view_index,
        camera,
        buffers,
        shade,
        depth_epsilon,
        triangles,
        tiles_x,
        bins,
    })
}

fn rasterize(triangles: &[ScreenTriangle], camera: &ViewCamera) -> GBuffer {
    let mut gb = GBuffer::empty(camera.width, camera.height);
    let mut zbuf = vec![f64::INFINITY; gb.face_id.len()];
    for tri in triangles {
        let xs = tri.xy.map(|p| p[0]);
        let ys = tri.xy.map(|p| p[1]);
        let Some((x0, x1)) = pixel_span(
            xs.iter().copied().fold(f64::INFINITY, f64::min),
            xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            camera.width,
        ) else {
            continue;
        };
        let Some((y0, y1)) = pixel_span(
            ys.iter().copied().fold(f64::INFINITY, f64::min),
            ys.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            camera.height,
        ) else {
            continue;
        };
        for py in y0..=y1 {
            for px in x0..=x1 {
                let (cx, cy) = (f64::from(px) + 0.5, f64::from(py) + 0.5);
                let Some(w) = tri.cover(cx, cy) else { continue };
                let depth = tri.depth_at(w);
                let i = gb.index(px, py);
                if depth < zbuf[i] {
                    zbuf[i] = depth;
                    gb.face_id[i] = tri.face as i32;
                    gb.barycentric[i] = w.map(|c| c as f32);
                    gb.depth[i] = depth as f32;
                }
            }
        }
    }
    gb
}

fn shade_buffer(mesh: &SurfaceMesh, gb: &GBuffer, camera: &ViewCamera) -> Vec<u8> {
    let intensity: Vec<u8> = mesh
        .faces()
        .iter()
        .map(|f| {
            let [a, b, c] = f.map(|v| mesh.vertices()[v]);
            let n = (b - a).cross(&(c - a));
            let cos = if n.norm() > 0.0 {
                n.normalize().dot(&camera.direction).clamp(0.0, 1.0)
            } else {
                0.0
            };
            (40.0 + 190.0 * cos).round() as u8
        })
        .collect();
    gb.face_id
        .iter()
        .map(|&f| if f < 0 { BACKGROUND_SHADE } else { intensity[f as usize] })
        .collect()
}

fn depth_epsilon(mesh: &SurfaceMesh, part: PartId) -> Result<f64, RenderError> {
    let (_, points) = part_geometry(mesh, part)?;
    Ok(DEPTH_EPSILON_FRACTION * crate::mesh::bounding_diagonal(points.iter()))
}

/// Renders the six views of one part.
pub fn render_part_views(mesh: &SurfaceMesh, part: PartId, resolution: u32) -> Result<PartViews, RenderError> {
    let cameras = part_cameras(mesh, part, resolution)?;
    let faces = mesh.part_faces(part);
    let eps = depth_epsilon(mesh, part)?;
    let views = cameras
        .into_iter()
        .enumerate()
        .map(|(i, cam)| assemble_view(mesh, part, i, cam, &faces, eps, None))
        .collect::<Result<_, _>>()?;
    Ok(PartViews { part, views })
}

/// Rebuilds a view from stored buffers and its camera.
pub fn view_from_buffers(
    mesh: &SurfaceMesh,
    part: PartId,
    view_index: usize,
    camera: ViewCamera,
    buffers: GBuffer,
) -> Result<ViewRender, RenderError> {
    if view_index >= VIEW_COUNT {
        return Err(RenderError::InvalidView(view_index));
    }
    let faces = mesh.part_faces(part);
    let eps = depth_epsilon(mesh, part)?;
    assemble_view(mesh, part, view_index, camera, &faces, eps, Some(buffers))
}

/// Resolves a click at continuous view coordinates to a surface point.
///
/// The returned point is the nearest front-facing face under the exact click
/// position. Faces seen nearly edge-on can cover no pixel centre, so an exact
/// hit wins even on a background pixel. A click in a covered pixel that falls
/// just outside every face (silhouette edge) uses the pixel's face with the
/// closest in-face weights.
pub fn click_to_surface(view: &ViewRender, x: f64, y: f64) -> Result<SurfacePoint, RenderError> {
    if !view.camera.contains(x, y) || !x.is_finite() || !y.is_finite() {
        return Err(RenderError::OutOfBounds {
            x,
            y,
            width: view.width(),
            height: view.height(),
        });
    }
    if let Some(hit) = view.surface_at(x, y) {
        return Ok(SurfacePoint {
            face: hit.face,
            barycentric: hit.barycentric,
        });
    }
    let i = view.buffers.index(x as u32, y as u32);
    let pixel_face = view.buffers.face_id[i];
    if pixel_face < 0 {
        return Err(RenderError::NoSurface { x, y });
    }
    let face = pixel_face as usize;
    let barycentric = match view.triangles.binary_search_by_key(&face, |t| t.face) {
        Ok(t) => view.triangles[t].closest_weights(x, y),
        Err(_) => view.buffers.barycentric[i].map(f64::from),
    };
    Ok(SurfacePoint { face, barycentric })
}

/// Projects a surface point into every view. A projection is visible when
/// the point's face is front-facing there and no other face of the part lies
/// in front of it by more than the depth tolerance at the exact projected
/// position.
pub fn project_to_views(mesh: &SurfaceMesh, views: &PartViews, point: &SurfacePoint) -> Vec<ViewProjection> {
    let position = point.position(mesh);
    views
        .views
        .iter()
        .map(|view| {
            let (x, y, depth) = view.camera.project(&position);
            let visible = view.camera.contains(x, y)
                && view.is_front_facing(point.face)
                && view
                    .occluder_depth(x, y, point.face)
                    .is_none_or(|d| d >= depth - view.depth_epsilon);
            ViewProjection {
                view: view.view_index,
                x,
                y,
                visible,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    fn p1() -> PartId {
        PartId::new(1).unwrap()
    }

    #[test]
    fn single_triangle_shows_in_one_view() {
        let mesh = synthetic::single_triangle(1.0);
        let views = render_part_views(&mesh, p1(), 64).unwrap();
        let covered: Vec<usize> = views
            .views
            .iter()
            .map(|v| v.buffers.face_id.iter().filter(|&&f| f >= 0).count())
            .collect();
        assert_eq!(covered.iter().filter(|&&c| c > 0).count(), 1, "{covered:?}");
        for v in &views.views {
            for (i, &f) in v.buffers.face_id.iter().enumerate() {
                if f >= 0 {
                    assert_eq!(f, 0);
                    let w = v.buffers.barycentric[i];
                    assert!(w.iter().all(|&c| c >= 0.0));
                    assert!(((w[0] + w[1] + w[2]) as f64 - 1.0).abs() < 1e-6);
                    assert!(v.buffers.depth[i].is_finite());
                } else {
                    assert!(v.buffers.depth[i].is_infinite());
                }
            }
        }
    }

    #[test]
    fn background_click_is_no_surface() {
        let mesh = synthetic::single_triangle(1.0);
        let views = render_part_views(&mesh, p1(), 64).unwrap();
        let v = &views.views[0];
        assert!(matches!(click_to_surface(v, 0.5, 0.5), Err(RenderError::NoSurface { .. })));
        assert!(matches!(
            click_to_surface(v, 64.0, 3.0),
            Err(RenderError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn centroid_pixel_has_equal_weights() {
        let res = 128;
        let mesh = synthetic::single_triangle(1.0);
        let views = render_part_views(&mesh, p1(), res).unwrap();
        let view = views
            .views
            .iter()
            .find(|v| v.buffers.face_id.iter().any(|&f| f >= 0))
            .unwrap();
        let centroid = SurfacePoint {
            face: 0,
            barycentric: [1.0 / 3.0; 3],
        };
        let (x, y, _) = view.camera.project(&centroid.position(&mesh));
        let i = view.buffers.index(x as u32, y as u32);
        let w = view.buffers.barycentric[i];
        for c in w {
            assert!((f64::from(c) - 1.0 / 3.0).abs() <= 2.0 / f64::from(res), "{w:?}");
        }
    }

    #[test]
    fn back_side_projection_invisible() {
        let mesh = synthetic::single_triangle(1.0);
        let views = render_part_views(&mesh, p1(), 64).unwrap();
        let sp = SurfacePoint {
            face: 0,
            barycentric: [0.2, 0.3, 0.5],
        };
        let proj = project_to_views(&mesh, &views, &sp);
        assert_eq!(proj.iter().filter(|p| p.visible).count(), 1);
        let front = proj.iter().find(|p| p.visible).unwrap();
        let hit = click_to_surface(&views.views[front.view], front.x, front.y).unwrap();
        assert_eq!(hit.face, 0);
        for k in 0..3 {
            assert!((hit.barycentric[k] - sp.barycentric[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn covered_pixels_reproject_to_themselves() {
        let mesh = synthetic::ellipsoid(synthetic::EllipsoidSpec::default());
        let views = render_part_views(&mesh, p1(), 96).unwrap();
        for v in &views.views {
            for y in 0..v.height() {
                for x in 0..v.width() {
                    let i = v.buffers.index(x, y);
                    let f = v.buffers.face_id[i];
                    if f < 0 {
                        continue;
                    }
                    let sp = SurfacePoint {
                        face: f as usize,
                        barycentric: v.buffers.barycentric[i].map(f64::from),
                    };
                    let (px, py, _) = v.camera.project(&sp.position(&mesh));
                    assert!((px - (f64::from(x) + 0.5)).abs() <= 0.5);
                    assert!((py - (f64::from(y) + 0.5)).abs() <= 0.5);
                    let hit = click_to_surface(v, f64::from(x) + 0.5, f64::from(y) + 0.5).unwrap();
                    assert_eq!(hit.face, f as usize);
                }
            }
        }
    }

    #[test]
    fn every_face_seen_on_ellipsoid_part() {
        let mesh = synthetic::ellipsoid(synthetic::EllipsoidSpec::default());
        for part in mesh.present_parts() {
            let views = render_part_views(&mesh, part, 256).unwrap();
            assert!(views.unseen_faces(&mesh).is_empty());
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let mesh = synthetic::ellipsoid(synthetic::EllipsoidSpec::default());
        let a = render_part_views(&mesh, p1(), 64).unwrap();
        let b = render_part_views(&mesh, p1(), 64).unwrap();
        for (va, vb) in a.views.iter().zip(&b.views) {
            assert_eq!(va.buffers, vb.buffers);
            assert_eq!(va.shade, vb.shade);
        }
    }

    #[test]
    fn empty_part_errors() {
        let mesh = synthetic::single_triangle(1.0);
        assert!(matches!(
            render_part_views(&mesh, PartId::new(2).unwrap(), 64),
            Err(RenderError::EmptyPart(_))
        ));
    }

    #[test]
    fn nearest_vertex_and_distance() {
        let mesh = synthetic::unit_square();
        let a = SurfacePoint {
            face: 0,
            barycentric: [0.1, 0.7, 0.2],
        };
        assert_eq!(a.nearest_vertex(&mesh), 1);
        let b = SurfacePoint::at_vertex(&mesh, 3).unwrap();
        let d = surface_distance(&mesh, &a, &b).unwrap();
        assert!((d - (a.position(&mesh) - mesh.vertices()[3]).norm()).abs() < 1e-12);
    }
}
