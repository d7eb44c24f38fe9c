mod common;

use graspkit::bench::random_scene;
use graspkit::geometry::{primitives, Vec3};
use graspkit::graspgen::{CollisionGeometry, SurfaceCloud};
use graspkit::metrics::{
    chamfer_distance, f1_score, normal_consistency, precision_recall_f1, scene_ap, PointSet, FRICTIONS,
};
use graspkit::refine::{filter_collisions, grasp_nms, refine_grasp, Reconstruction, RefinementConfig};
use graspkit::{GraspPose, GripperModel};
use nalgebra::{Rotation3, Unit};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

fn points(rng: &mut ChaCha8Rng, n: usize, s: f64) -> Vec<Vec3> {
    (0..n)
        .map(|_| {
            Vec3::new(
                rng.random_range(0.0..s),
                rng.random_range(0.0..s),
                rng.random_range(0.0..s),
            )
        })
        .collect()
}

/// Greedy NMS written from the definition, with the rotation angle taken from
/// the Frobenius distance of the two frames.
fn nms_reference(grasps: &[GraspPose], t: f64, r: f64, top_k: usize) -> Vec<GraspPose> {
    let mut order: Vec<usize> = (0..grasps.len()).collect();
    order.sort_by(|&a, &b| grasps[b].score().total_cmp(&grasps[a].score()));
    let mut kept: Vec<GraspPose> = Vec::new();
    for i in order {
        if kept.len() == top_k {
            break;
        }
        let g = &grasps[i];
        let near = kept.iter().any(|k| {
            let f = (k.rotation() - g.rotation()).norm();
            let angle = 2.0 * (f / (2.0 * 2f64.sqrt())).min(1.0).asin();
            (k.anchor - g.anchor).norm() <= t && angle <= r
        });
        if !near {
            kept.push(*g);
        }
    }
    kept
}

#[test]
fn nms_matches_quadratic_reference_on_500_grasps() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for top_k in [50, 500] {
        let grasps: Vec<GraspPose> = (0..500)
            .map(|_| {
                let mut g = random_grasp(&mut rng, &Vec3::zeros(), 0.08);
                g.graspness = rng.random();
                g.quality = rng.random();
                g
            })
            .collect();
        let cfg = RefinementConfig {
            top_k,
            ..RefinementConfig::default()
        };
        let got = grasp_nms(&grasps, &cfg);
        let want = nms_reference(&grasps, cfg.nms_translation, cfg.nms_rotation, top_k);
        assert_eq!(got, want);
        assert!(got.len() < 500);
    }
}

#[test]
fn filter_matches_per_grasp_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let gr = GripperModel::default();
    let mesh = primitives::cuboid(Vec3::new(0.03, 0.02, 0.04));
    let surface = SurfaceCloud::sample_mesh(&mesh, 1e-5, 0).unwrap();
    let pts = surface.points().to_vec();
    let recon = Reconstruction::new(surface, CollisionGeometry::from_points(pts.clone()));
    let grasps: Vec<GraspPose> = (0..2000).map(|_| random_grasp(&mut rng, &Vec3::zeros(), 0.1)).collect();
    let want: Vec<GraspPose> = grasps
        .iter()
        .filter(|g| !collides_bruteforce(g, &gr, &pts, None))
        .copied()
        .collect();
    let got = filter_collisions(&grasps, &recon, &gr);
    assert!(!got.is_empty() && got.len() < grasps.len());
    assert_eq!(got, want);

    let empty = Reconstruction::new(
        SurfaceCloud::new(vec![], vec![]),
        CollisionGeometry::from_points(vec![]),
    );
    assert_eq!(filter_collisions(&grasps, &empty, &gr), grasps);
}

/// Filtering at the input pose, then refining, rarely lands in collision.
#[test]
fn refined_survivors_are_collision_free_99_percent() {
    let gr = GripperModel::default();
    let cfg = RefinementConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let (mut total, mut clear) = (0, 0);
    for s in 0..4u64 {
        let scene = random_scene(&mut ChaCha8Rng::seed_from_u64(300 + s));
        let clouds: Vec<SurfaceCloud> = scene
            .world_meshes()
            .iter()
            .enumerate()
            .map(|(i, m)| SurfaceCloud::sample_mesh(m, 1e-5, i as u64).unwrap())
            .collect();
        let cloud = SurfaceCloud::merged(&clouds);
        let occ = CollisionGeometry::from_points(cloud.points().to_vec()).with_support_plane(scene.support_plane());
        let recon = Reconstruction::new(cloud, occ);
        let grasps: Vec<GraspPose> = (0..3000)
            .map(|_| {
                let o = &scene.world_meshes()[rng.random_range(0..scene.world_meshes().len())];
                let b = o.bounds();
                let mut g = random_grasp(&mut rng, &((b.min + b.max) / 2.0), 0.03);
                g.view = Vec3::new(rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6), -1.0).normalize();
                g
            })
            .collect();
        for g in filter_collisions(&grasps, &recon, &gr) {
            if let Some(r) = refine_grasp(&g, &recon, &gr, &cfg) {
                total += 1;
                clear += !recon.collides(&r, &gr) as usize;
            }
        }
    }
    assert!(total >= 200, "only {total} refined grasps");
    let rate = clear as f64 / total as f64;
    assert!(rate >= 0.99, "{clear}/{total} collision-free");
}

#[test]
fn chamfer_matches_scan_on_200_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..20 {
        let (a, b) = (points(&mut rng, 200, 0.1), points(&mut rng, 150, 0.1));
        let cd = chamfer_distance(&PointSet::new(a.clone()), &PointSet::new(b.clone())).unwrap();
        assert!((cd - chamfer_scan(&a, &b)).abs() <= 1e-9);
    }
}

#[test]
fn f1_constructed_half_precision() {
    // Half of pd sits on gt, the other half 5 cm away; gt is fully covered.
    let gt: Vec<Vec3> = (0..10).map(|i| Vec3::new(i as f64 * 0.1, 0.0, 0.0)).collect();
    let mut pd = gt.clone();
    pd.extend(gt.iter().map(|p| p + Vec3::new(0.0, 0.05, 0.0)));
    let (p, r, f) = precision_recall_f1(&PointSet::new(pd.clone()), &PointSet::new(gt.clone()), 0.01).unwrap();
    assert_eq!((p, r), (50.0, 100.0));
    assert!((f - 200.0 / 3.0).abs() < 1e-9);
    let far: Vec<Vec3> = gt.iter().map(|p| p + Vec3::new(0.0, 0.0, 0.02)).collect();
    assert_eq!(f1_score(&PointSet::new(far), &PointSet::new(gt), 0.01).unwrap(), 0.0);
}

#[test]
fn normal_consistency_with_10_degree_noise() {
    let sphere = primitives::icosphere(0.1, 4);
    let cloud = SurfaceCloud::sample_mesh(&sphere, 2e-5, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let tilt = 10f64.to_radians();
    let noisy: Vec<Vec3> = cloud
        .normals()
        .iter()
        .map(|n| {
            let axis = Unit::new_normalize(n.cross(&random_unit(&mut rng)));
            Rotation3::from_axis_angle(&axis, tilt) * n
        })
        .collect();
    let a = PointSet::with_normals(cloud.points().to_vec(), cloud.normals().to_vec());
    let b = PointSet::with_normals(cloud.points().to_vec(), noisy);
    let nc = normal_consistency(&a, &b).unwrap();
    assert!((nc - 0.985).abs() <= 0.005, "nc = {nc}");
    let flipped = PointSet::with_normals(cloud.points().to_vec(), cloud.normals().iter().map(|n| -n).collect());
    assert!((normal_consistency(&a, &flipped).unwrap() + 1.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn chamfer_is_symmetric(seed in any::<u64>(), n in 1usize..120, m in 1usize..120) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (PointSet::new(points(&mut rng, n, 0.2)), PointSet::new(points(&mut rng, m, 0.2)));
        prop_assert!((chamfer_distance(&a, &b).unwrap() - chamfer_distance(&b, &a).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn f1_is_monotone_in_eta(seed in any::<u64>(), e1 in 0.001..0.05f64, e2 in 0.001..0.05f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (points(&mut rng, 100, 0.1), points(&mut rng, 80, 0.1));
        let (lo, hi) = (e1.min(e2), e1.max(e2));
        let (pa, pb) = (PointSet::new(a.clone()), PointSet::new(b.clone()));
        prop_assert!(f1_score(&pa, &pb, lo).unwrap() <= f1_score(&pa, &pb, hi).unwrap());
        prop_assert!((f1_score(&pa, &pb, lo).unwrap() - f1_scan(&a, &b, lo)).abs() <= 1e-9);
    }

    #[test]
    fn scene_ap_invariants(q in proptest::collection::vec(proptest::option::of(-1.0..1.0f64), 0..80), k in 1usize..80) {
        let s = scene_ap(&q, k);
        prop_assert_eq!(s.ap_by_mu.len(), FRICTIONS.len());
        prop_assert!(s.ap_by_mu.iter().all(|v| (0.0..=100.0).contains(v)));
        prop_assert!(s.ap_by_mu.windows(2).all(|w| w[0] <= w[1] + 1e-12));
        let mean = s.ap_by_mu.iter().sum::<f64>() / FRICTIONS.len() as f64;
        prop_assert!((s.ap - mean).abs() <= 1e-9);
    }
}
