//! Procedural meshes for demos and tests: flat grids and a part-split
//! ellipsoid that stands in for a body model.

use std::f64::consts::PI;

use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::{PartId, SurfaceMesh};

fn part(id: u8) -> PartId {
    PartId::new(id).expect("part id in range")
}

/// Two triangles over the unit square, diagonal from (0,0) to (1,1), part 1.
pub fn unit_square() -> SurfaceMesh {
    let vertices = vec![
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(1.0, 1.0, 0.0),
        Point3::new(0.0, 1.0, 0.0),
    ];
    SurfaceMesh::new(vertices, vec![[0, 1, 2], [0, 2, 3]], vec![part(1); 4])
        .expect("valid square")
}

/// Row-major grid of `nx * ny` vertices in the z=0 plane, each cell split by
/// its lower-left to upper-right diagonal. Counter-clockwise seen from +z.
pub fn grid(nx: usize, ny: usize, spacing: f64, part_id: u8) -> SurfaceMesh {
    assert!(nx >= 2 && ny >= 2);
    let mut vertices = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            vertices.push(Point3::new(i as f64 * spacing, j as f64 * spacing, 0.0));
        }
    }
    let faces = grid_faces(nx, ny, |_, _| false);
    SurfaceMesh::new(vertices, faces, vec![part(part_id); nx * ny]).expect("valid grid")
}

fn grid_faces(nx: usize, ny: usize, mut flip: impl FnMut(usize, usize) -> bool) -> Vec<[usize; 3]> {
    let mut faces = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let a = j * nx + i;
            let b = a + 1;
            let c = a + nx + 1;
            let d = a + nx;
            if flip(i, j) {
                faces.push([a, b, d]);
                faces.push([b, c, d]);
            } else {
                faces.push([a, b, c]);
                faces.push([a, c, d]);
            }
        }
    }
    faces
}

/// Jittered height-field grid with random diagonal choices, single part.
/// Used as a source of small irregular triangulations.
pub fn random_grid_mesh(seed: u64, nx: usize, ny: usize) -> SurfaceMesh {
    assert!(nx >= 2 && ny >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vertices = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            vertices.push(Point3::new(
                i as f64 + rng.random_range(-0.3..0.3),
                j as f64 + rng.random_range(-0.3..0.3),
                rng.random_range(-0.5..0.5),
            ));
        }
    }
    let flips: Vec<bool> = (0..(nx - 1) * (ny - 1)).map(|_| rng.random_bool(0.5)).collect();
    let faces = grid_faces(nx, ny, |i, j| flips[j * (nx - 1) + i]);
    SurfaceMesh::new(vertices, faces, vec![part(1); nx * ny]).expect("valid random grid")
}

/// Latitude-longitude ellipsoid split into `sectors` longitude wedges times
/// `bands` latitude bands, numbered `band * sectors + sector + 1`. Each part is
/// a topological disk. Faces are wound with outward normals.
#[derive(Debug, Clone, Copy)]
pub struct EllipsoidSpec {
    pub radii: [f64; 3],
    pub segments: usize,
    pub rings: usize,
    pub sectors: usize,
    pub bands: usize,
}

impl Default for EllipsoidSpec {
    fn default() -> Self {
        EllipsoidSpec {
            radii: [0.16, 0.12, 0.30],
            segments: 24,
            rings: 16,
            sectors: 2,
            bands: 2,
        }
    }
}

pub fn ellipsoid(spec: EllipsoidSpec) -> SurfaceMesh {
    let EllipsoidSpec {
        radii,
        segments,
        rings,
        sectors,
        bands,
    } = spec;
    assert!(segments >= 3 && rings >= 3);
    assert!(sectors >= 1 && bands >= 1 && sectors * bands <= 24);
    assert!(segments >= 2 * sectors && rings > 2 * bands);

    let ring_count = rings - 1;
    let mut vertices = Vec::with_capacity(2 + ring_count * segments);
    let mut labels = Vec::with_capacity(vertices.capacity());
    let label_of = |ring: usize, seg: usize| {
        let band = ring * bands / ring_count;
        let sector = seg * sectors / segments;
        part((band * sectors + sector + 1) as u8)
    };

    vertices.push(Point3::new(0.0, 0.0, radii[2]));
    labels.push(label_of(0, 0));
    for r in 0..ring_count {
        let theta = PI * (r + 1) as f64 / rings as f64;
        for s in 0..segments {
            let phi = 2.0 * PI * s as f64 / segments as f64;
            vertices.push(Point3::new(
                radii[0] * theta.sin() * phi.cos(),
                radii[1] * theta.sin() * phi.sin(),
                radii[2] * theta.cos(),
            ));
            labels.push(label_of(r, s));
        }
    }
    let south = vertices.len();
    vertices.push(Point3::new(0.0, 0.0, -radii[2]));
    labels.push(label_of(ring_count - 1, 0));

    let ring_vertex = |r: usize, s: usize| 1 + r * segments + (s % segments);
    let mut faces = Vec::new();
    for s in 0..segments {
        faces.push([0, ring_vertex(0, s), ring_vertex(0, s + 1)]);
    }
    for r in 0..ring_count - 1 {
        for s in 0..segments {
            let a = ring_vertex(r, s);
            let b = ring_vertex(r, s + 1);
            let c = ring_vertex(r + 1, s + 1);
            let d = ring_vertex(r + 1, s);
            faces.push([a, d, c]);
            faces.push([a, c, b]);
        }
    }
    for s in 0..segments {
        faces.push([south, ring_vertex(ring_count - 1, s + 1), ring_vertex(ring_count - 1, s)]);
    }
    SurfaceMesh::new(vertices, faces, labels).expect("valid ellipsoid")
}

/// Single triangle lying in the z=0 plane, facing +z, labeled part 1.
pub fn single_triangle(size: f64) -> SurfaceMesh {
    let h = size * 3f64.sqrt() / 2.0;
    let vertices = vec![
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(size, 0.0, 0.0),
        Point3::new(size / 2.0, h, 0.0),
    ];
    SurfaceMesh::new(vertices, vec![[0, 1, 2]], vec![part(1); 3]).expect("valid triangle")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ellipsoid_normals_point_outward() {
        let m = ellipsoid(EllipsoidSpec::default());
        for f in m.faces() {
            let [a, b, c] = f.map(|i| m.vertices()[i]);
            let n = (b - a).cross(&(c - a));
            let centroid = (a.coords + b.coords + c.coords) / 3.0;
            assert!(n.dot(&centroid) > 0.0);
        }
        assert_eq!(m.present_parts().len(), 4);
    }

    #[test]
    fn grid_faces_are_ccw() {
        let m = grid(3, 3, 1.0, 1);
        assert_eq!(m.faces().len(), 8);
        for f in m.faces() {
            let [a, b, c] = f.map(|i| m.vertices()[i]);
            assert!((b - a).cross(&(c - a)).z > 0.0);
        }
        let r = random_grid_mesh(7, 5, 4);
        assert_eq!(r.vertex_count(), 20);
    }
}
