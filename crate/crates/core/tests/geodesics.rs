mod oracles;

use densecorr::mesh::{GeodesicRefinement, PartId, SurfaceMesh};
use densecorr::synthetic::{grid, random_grid_mesh};
use nalgebra::{Rotation3, Vector3};
use proptest::prelude::*;

fn small_mesh() -> impl Strategy<Value = SurfaceMesh> {
    (any::<u64>(), 2usize..=7, 2usize..=7).prop_map(|(seed, nx, ny)| random_grid_mesh(seed, nx, ny))
}

fn transformed(mesh: &SurfaceMesh, f: impl Fn(nalgebra::Point3<f64>) -> nalgebra::Point3<f64>) -> SurfaceMesh {
    SurfaceMesh::new(
        mesh.vertices().iter().map(|&p| f(p)).collect(),
        mesh.faces().to_vec(),
        mesh.labels().to_vec(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dijkstra_matches_floyd_warshall(mesh in small_mesh()) {
        let fw = oracles::floyd_warshall(&mesh);
        for (s, row) in fw.iter().enumerate() {
            let field = mesh.geodesic_from(s).unwrap();
            prop_assert_eq!(&field.distance, row);
        }
    }

    #[test]
    fn distances_are_symmetric_and_metric(mesh in small_mesh()) {
        let n = mesh.vertex_count();
        let rows: Vec<Vec<f64>> = (0..n).map(|s| mesh.geodesic_from(s).unwrap().distance).collect();
        for i in 0..n {
            prop_assert_eq!(rows[i][i], 0.0);
            for j in 0..n {
                prop_assert_eq!(mesh.geodesic_between(i, j).unwrap(), mesh.geodesic_between(j, i).unwrap());
                prop_assert!((rows[i][j] - rows[j][i]).abs() <= 1e-12 * (1.0 + rows[i][j]));
                for k in 0..n {
                    prop_assert!(rows[i][k] <= rows[i][j] + rows[j][k] + 1e-12);
                }
            }
        }
    }

    #[test]
    fn rigid_motion_and_scale(mesh in small_mesh(), angle in -3.0f64..3.0, scale in 0.1f64..10.0, shift in -5.0f64..5.0) {
        let r = Rotation3::from_axis_angle(&Vector3::y_axis(), angle);
        let moved = transformed(&mesh, |p| r * p + Vector3::new(shift, -shift, 2.0 * shift));
        let scaled = transformed(&mesh, |p| p * scale);
        for s in [0, mesh.vertex_count() - 1] {
            let a = mesh.geodesic_from(s).unwrap().distance;
            let b = moved.geodesic_from(s).unwrap().distance;
            let c = scaled.geodesic_from(s).unwrap().distance;
            for v in 0..a.len() {
                prop_assert!((a[v] - b[v]).abs() <= 1e-9 * (1.0 + a[v]));
                prop_assert!((a[v] * scale - c[v]).abs() <= 1e-9 * (1.0 + c[v]));
            }
        }
    }

    #[test]
    fn refinement_never_lengthens(mesh in small_mesh()) {
        let fine = mesh.refined(GeodesicRefinement::EdgeMidpoints);
        let a = mesh.geodesic_from(0).unwrap().distance;
        let b = fine.geodesic_from(0).unwrap().distance;
        for v in 0..a.len() {
            prop_assert!(b[v] <= a[v] + 1e-12);
        }
    }
}

#[test]
fn flat_grid_geodesics_are_exact_on_axes() {
    let mesh = grid(5, 4, 0.5, 1);
    // along the bottom row the graph path is straight
    assert_eq!(mesh.geodesic_between(0, 4).unwrap(), 2.0);
    // the diagonal of the unit-spacing grid runs along the triangle diagonals
    let d = mesh.geodesic_between(0, 5 * 3 + 3).unwrap();
    assert!((d - 3.0 * 0.5 * 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn part_restricted_distances_stay_inside_the_part() {
    let mesh = densecorr::synthetic::ellipsoid(Default::default());
    let part = PartId::new(2).unwrap();
    let pd = mesh.part_distance_matrix(part).unwrap();
    assert_eq!(pd.distances.nrows(), pd.vertices.len());
    let whole = mesh.geodesic_from(pd.vertices[0]).unwrap();
    for (k, &v) in pd.vertices.iter().enumerate() {
        assert!(pd.distances[(0, k)] >= whole.distance[v] - 1e-12);
        assert_eq!(pd.distances[(0, k)], pd.distances[(k, 0)]);
    }
}
