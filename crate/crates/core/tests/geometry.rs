mod common;

use graspkit::geometry::{primitives, rotation_from_uniform, sample_surface_n, CameraModel, RigidTransform, Vec3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;

fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn uniform3() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64)
}

#[test]
fn closest_point_matches_triangle_scan_on_1000_queries() {
    let meshes = [
        primitives::cuboid(Vec3::new(0.5, 0.2, 0.3)),
        primitives::icosphere(0.3, 3),
        primitives::cylinder(0.1, 0.4, 24),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for m in &meshes {
        for _ in 0..1000 {
            let q = random_unit(&mut rng) * rand::Rng::random_range(&mut rng, 0.0..1.0);
            let c = m.closest_point(&q).unwrap();
            let want = mesh_distance_scan(m, &q);
            assert!((c.distance - want).abs() <= 1e-9, "{q:?}: {} vs {want}", c.distance);
            assert!(((c.point - q).norm() - c.distance).abs() <= 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closest_point_matches_scan(q in vec3(1.0), half in vec3(0.5).prop_map(|v| v.abs().add_scalar(0.01))) {
        let m = primitives::cuboid(half);
        let c = m.closest_point(&q).unwrap();
        prop_assert!((c.distance - mesh_distance_scan(&m, &q)).abs() <= 1e-9);
    }

    #[test]
    fn closest_distance_is_rigid_invariant(q in vec3(0.5), u in uniform3(), t in vec3(2.0)) {
        let m = primitives::icosphere(0.2, 2);
        let tf = RigidTransform::new(rotation_from_uniform(u.0, u.1, u.2), t).unwrap();
        let a = m.closest_point(&q).unwrap().distance;
        let b = m.transformed(&tf).closest_point(&tf.apply_point(&q)).unwrap().distance;
        prop_assert!((a - b).abs() <= 1e-9);
    }

    #[test]
    fn uniform_rotations_are_proper(u in uniform3()) {
        let r = rotation_from_uniform(u.0, u.1, u.2);
        prop_assert!((r.determinant() - 1.0).abs() <= 1e-6);
        prop_assert!((r.transpose() * r - nalgebra::Matrix3::identity()).norm() <= 1e-6);
    }

    #[test]
    fn transform_inverse_and_compose(u in uniform3(), t in vec3(3.0), p in vec3(3.0)) {
        let tf = RigidTransform::new(rotation_from_uniform(u.0, u.1, u.2), t).unwrap();
        prop_assert!((tf.inverse().apply_point(&tf.apply_point(&p)) - p).norm() <= 1e-12);
        prop_assert!((tf.compose(&tf.inverse()).apply_point(&p) - p).norm() <= 1e-12);
        let back = RigidTransform::from_row_major(&tf.to_row_major()).unwrap();
        prop_assert!((back.apply_point(&p) - tf.apply_point(&p)).norm() <= 1e-12);
    }

    #[test]
    fn project_unproject_round_trip(u in 0.0..640.0f64, v in 0.0..480.0f64, z in 0.1..5.0f64) {
        let cam = CameraModel::new(600.0, 610.0, 320.0, 240.0, 640, 480).unwrap();
        let p = cam.unproject(u, v, z);
        prop_assert!((p.z - z).abs() <= 1e-12);
        let uv = cam.project(&p).unwrap();
        prop_assert!((uv.x - u).abs() <= 1e-9 && (uv.y - v).abs() <= 1e-9);
    }
}

#[test]
fn sphere_signed_distance_within_tessellation_error() {
    let m = primitives::icosphere(0.5, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let p = random_unit(&mut rng) * rand::Rng::random_range(&mut rng, 0.0..1.0);
        let d = m.signed_distance(&p).unwrap();
        assert!((d - (p.norm() - 0.5)).abs() <= 2e-3, "{p:?}: {d}");
    }
    assert!((m.signed_distance(&Vec3::new(0.0, 0.0, 1.0)).unwrap() - 0.5).abs() <= 2e-3);
}

/// Per-triangle sample counts over 10^5 draws follow triangle areas.
#[test]
fn sampling_is_area_weighted_chi_square() {
    let m = primitives::cuboid(Vec3::new(0.05, 0.1, 0.2));
    let n = 100_000;
    let samples = sample_surface_n(&m, n, 13).unwrap();
    let mut counts = vec![0usize; m.triangles().len()];
    for s in &samples {
        counts[s.triangle_id] += 1;
        assert!(mesh_distance_scan(&m, &s.point) <= 1e-12);
    }
    let area = m.surface_area();
    let chi2: f64 = counts
        .iter()
        .enumerate()
        .map(|(t, &c)| {
            let e = n as f64 * m.triangle_area(t) / area;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    // 11 degrees of freedom, p = 0.001.
    assert!(chi2 < 31.26, "chi2 = {chi2}, counts {counts:?}");
}

#[test]
fn plate_samples_face_up() {
    let m = primitives::square(0.1);
    let s = sample_surface_n(&m, 1000, 5).unwrap();
    assert!(s
        .iter()
        .all(|x| (x.normal - Vec3::z()).norm() < 1e-12 && x.point.z.abs() < 1e-12));
}
