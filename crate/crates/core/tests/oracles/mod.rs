//! Independent reference implementations used only by tests. Each one is
//! deliberately naive: no shared code paths with the library beyond the mesh
//! data itself.
#![allow(dead_code)]

use densecorr::decoder::{ScoreMaps, CLASS_COUNT};
use densecorr::mesh::{PartId, SurfaceMesh, PART_COUNT};
use nalgebra::{Point3, Vector3};

/// All-pairs shortest paths over the vertex-edge graph by Floyd–Warshall.
///
/// Path lengths are re-accumulated left to right along each reconstructed
/// path, which is the order a single-source search sums them in; without
/// that, equal paths could differ in the last bit purely through float
/// association.
pub fn floyd_warshall(mesh: &SurfaceMesh) -> Vec<Vec<f64>> {
    let n = mesh.vertex_count();
    let mut w = vec![vec![f64::INFINITY; n]; n];
    for f in mesh.faces() {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            let d = (mesh.vertices()[a] - mesh.vertices()[b]).norm();
            w[a][b] = d;
            w[b][a] = d;
        }
    }
    let mut dist = w.clone();
    let mut next: Vec<Vec<Option<usize>>> = (0..n)
        .map(|i| (0..n).map(|j| w[i][j].is_finite().then_some(j)).collect())
        .collect();
    for i in 0..n {
        dist[i][i] = 0.0;
        next[i][i] = Some(i);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = dist[i][k] + dist[k][j];
                if via < dist[i][j] {
                    dist[i][j] = via;
                    next[i][j] = next[i][k];
                }
            }
        }
    }
    let mut out = vec![vec![f64::INFINITY; n]; n];
    for s in 0..n {
        for t in 0..n {
            if next[s][t].is_none() {
                continue;
            }
            let (mut at, mut sum) = (s, 0.0);
            while at != t {
                let step = next[at][t].expect("path continues");
                sum += w[at][step];
                at = step;
            }
            out[s][t] = sum;
        }
    }
    out
}

/// Möller–Trumbore ray/triangle intersection; returns the ray parameter.
pub fn ray_triangle(origin: &Point3<f64>, dir: &Vector3<f64>, tri: [Point3<f64>; 3]) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-15 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(&q) * inv)
}

fn face_normal(mesh: &SurfaceMesh, f: usize) -> Vector3<f64> {
    let [a, b, c] = mesh.faces()[f].map(|v| mesh.vertices()[v]);
    (b - a).cross(&(c - a))
}

/// Visibility of a point on `face` from an orthographic camera looking along
/// `-toward_camera`: the face must face the camera, and the ray from the
/// point toward the camera must not hit another camera-facing face of the
/// part farther than `eps` along the ray.
pub fn ray_visible(
    mesh: &SurfaceMesh,
    part: PartId,
    toward_camera: &Vector3<f64>,
    point: &Point3<f64>,
    face: usize,
    eps: f64,
) -> bool {
    if face_normal(mesh, face).dot(toward_camera) <= 0.0 {
        return false;
    }
    !mesh.part_faces(part).into_iter().any(|f| {
        f != face
            && face_normal(mesh, f).dot(toward_camera) > 0.0
            && ray_triangle(point, toward_camera, mesh.faces()[f].map(|v| mesh.vertices()[v])).is_some_and(|t| t > eps)
    })
}

/// Per-pixel argmax decode written out longhand.
pub fn decode_pixel(maps: &ScoreMaps, x: u32, y: u32) -> (u8, f32, f32) {
    let mut best = 0usize;
    for c in 1..CLASS_COUNT {
        if maps.posterior(c, x, y) > maps.posterior(best, x, y) {
            best = c;
        }
    }
    if best == 0 {
        return (0, 0.0, 0.0);
    }
    let w = maps.width() as usize;
    let plane = w * maps.height() as usize;
    let i = y as usize * w + x as usize;
    let u = maps.data()[(CLASS_COUNT + best - 1) * plane + i];
    let v = maps.data()[(CLASS_COUNT + PART_COUNT + best - 1) * plane + i];
    (best as u8, u.clamp(0.0, 1.0), v.clamp(0.0, 1.0))
}

/// Nearest chart vertex by linear scan; ties go to the lower vertex index.
pub fn nearest_uv(entries: &[(usize, [f64; 2])], u: f64, v: f64) -> usize {
    let mut best = (f64::INFINITY, usize::MAX);
    for &(vertex, [a, b]) in entries {
        let d = (a - u).powi(2) + (b - v).powi(2);
        if d < best.0 || (d == best.0 && vertex < best.1) {
            best = (d, vertex);
        }
    }
    best.1
}

/// GPS of a list of per-point geodesic errors, straight from the definition.
pub fn gps(errors: &[f64], kappa: f64) -> f64 {
    errors.iter().map(|g| (-g * g / (2.0 * kappa * kappa)).exp()).sum::<f64>() / errors.len() as f64
}

/// Within-cluster sum of squares of pixels assigned to their nearest center.
pub fn wcss(pixels: &[(u32, u32)], centers: &[[f64; 2]]) -> f64 {
    pixels
        .iter()
        .map(|&(x, y)| {
            centers
                .iter()
                .map(|c| (f64::from(x) - c[0]).powi(2) + (f64::from(y) - c[1]).powi(2))
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

/// Developable test charts: a straight path, a triangulated grid strip and a
/// fan of equilateral triangles, each as a geodesic distance matrix.
pub fn developable_charts() -> Vec<(&'static str, nalgebra::DMatrix<f64>)> {
    let path = nalgebra::DMatrix::from_fn(12, 12, |i, j| (i as f64 - j as f64).abs() * 0.1);
    let strip = densecorr::synthetic::grid(10, 3, 0.1, 1);
    let strip = strip.part_distance_matrix(PartId::new(1).unwrap()).unwrap().distances;
    let fan = equilateral_fan(6);
    let fan = fan.part_distance_matrix(PartId::new(1).unwrap()).unwrap().distances;
    vec![("path", path), ("grid strip", strip), ("equilateral fan", fan)]
}

/// `n` unit equilateral triangles sharing vertex 0, laid out flat.
pub fn equilateral_fan(n: usize) -> SurfaceMesh {
    assert!((1..=6).contains(&n));
    let mut vertices = vec![Point3::origin()];
    for k in 0..=n.min(5) {
        let a = k as f64 * std::f64::consts::FRAC_PI_3;
        vertices.push(Point3::new(a.cos(), a.sin(), 0.0));
    }
    let ring = vertices.len() - 1;
    let faces = (0..n).map(|k| [0, 1 + k, 1 + (k + 1) % ring]).collect();
    let labels = vec![PartId::new(1).unwrap(); vertices.len()];
    SurfaceMesh::new(vertices, faces, labels).unwrap()
}
