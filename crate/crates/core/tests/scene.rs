mod common;

use graspkit::geometry::{primitives, CameraModel, RigidTransform, Vec3};
use graspkit::occlusion::{
    block_centers, compute_occlusion_field, compute_occlusion_field_raycast, depth_epsilon, OcclusionField, INTER_BIT,
    SELF_BIT,
};
use graspkit::octree::Voxel;
use graspkit::scene::{look_at, render, Scene, SceneObject};
use proptest::prelude::*;

use common::*;

fn camera() -> CameraModel {
    CameraModel::new(300.0, 300.0, 80.0, 60.0, 160, 120).unwrap()
}

fn object(id: u32, mesh: usize, t: Vec3) -> SceneObject {
    SceneObject {
        id,
        mesh,
        pose: RigidTransform::from_translation(t),
    }
}

fn two_spheres() -> Scene {
    let m = primitives::icosphere(0.05, 3);
    Scene::new(
        vec![m],
        vec![
            object(1, 0, Vec3::new(-0.02, 0.0, 0.05)),
            object(2, 0, Vec3::new(0.03, 0.01, 0.07)),
        ],
        Some(0.0),
    )
    .unwrap()
}

fn eye_pose() -> RigidTransform {
    look_at(Vec3::new(0.0, -0.4, 0.4), Vec3::new(0.0, 0.0, 0.05), Vec3::z())
}

#[test]
fn overlapping_spheres_mask_matches_per_pixel_scan() {
    let scene = two_spheres();
    let (cam, pose) = (camera(), eye_pose());
    let view = render(&scene, &cam, &pose);
    let eye = *pose.translation();
    let mut boundary = 0;
    for v in 0..cam.height {
        for u in 0..cam.width {
            let dir = pose.apply_vector(&cam.pixel_ray(u as f64, v as f64));
            let hit = scene_ray_scan(&scene, &eye, &dir);
            let (t, id) = hit.unwrap_or((0.0, 0));
            assert_eq!(view.mask_at(u, v), id, "pixel ({u},{v})");
            assert!((view.depth_at(u, v) - t).abs() <= 1e-9);
            let right = if u + 1 < cam.width { view.mask_at(u + 1, v) } else { id };
            boundary += (right != id) as usize;
        }
    }
    assert!(boundary > 0);
}

#[test]
fn unprojected_cube_points_lie_on_the_cube() {
    let cube = primitives::cuboid(Vec3::repeat(0.04));
    let scene = Scene::new(vec![cube.clone()], vec![object(1, 0, Vec3::new(0.0, 0.0, 0.04))], None).unwrap();
    let view = render(&scene, &camera(), &eye_pose());
    let pts = view.unproject(1).unwrap();
    assert!(pts.len() > 100);
    let world = &scene.world_meshes()[0];
    for (p, _) in &pts {
        assert!(mesh_distance_scan(world, p) <= 1e-4);
    }
    assert!(view
        .unproject(1)
        .unwrap()
        .iter()
        .all(|(_, (u, v))| view.mask_at(*u, *v) == 1));
}

#[test]
fn single_cube_self_occlusion_and_free_space() {
    let cube = primitives::cuboid(Vec3::repeat(0.1));
    let scene = Scene::new(vec![cube], vec![object(1, 0, Vec3::new(0.0, 0.0, 1.0))], None).unwrap();
    let cam = CameraModel::new(600.0, 600.0, 320.0, 240.0, 640, 480).unwrap();
    let view = render(&scene, &cam, &RigidTransform::identity());
    let tiny = |z: f64| Voxel {
        center: Vec3::new(0.0, 0.0, z),
        half_extent: 0.001,
    };
    // Front face at z = 0.9.
    let voxels = [tiny(0.95), tiny(0.5)];
    for f in [
        compute_occlusion_field(&view, &voxels, 1, 1).unwrap(),
        compute_occlusion_field_raycast(&scene, &view, &voxels, 1, 1).unwrap(),
    ] {
        assert_eq!(f.flags, vec![SELF_BIT, 0]);
    }
}

/// Flags of every block against an exact ray test along the block's own ray.
#[test]
fn ray_mode_matches_exact_intersections() {
    let scene = two_spheres();
    let pose = eye_pose();
    let view = render(&scene, &camera(), &pose);
    let to_cam = pose.inverse();
    let eye = *pose.translation();
    for target in [1, 2] {
        let tree = graspkit::Octree::from_mesh(scene.world_mesh(target).unwrap(), 4).unwrap();
        let voxels = tree.voxels_at(3);
        let f = compute_occlusion_field_raycast(&scene, &view, &voxels, target, 2).unwrap();
        let mut inter = 0;
        for (i, v) in voxels.iter().enumerate() {
            let eps = depth_epsilon(v, 2);
            for (j, c) in block_centers(v, 2).iter().enumerate() {
                let z = to_cam.apply_point(c).z;
                let want = match scene_ray_scan(&scene, &eye, &((c - eye) / z)) {
                    Some((t, id)) if id != 0 && z > t + eps => {
                        if id == target {
                            SELF_BIT
                        } else {
                            INTER_BIT
                        }
                    }
                    _ => 0,
                };
                assert_eq!(f.voxel_flags(i)[j], want, "target {target} voxel {i} block {j}");
                inter += (want == INTER_BIT) as usize;
            }
        }
        if target == 2 {
            assert!(inter > 0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn field_bytes_round_trip(flags in proptest::collection::vec(0u8..4, 8..=8 * 5), b in 1u32..3) {
        let per = (b * b * b) as usize;
        let n = flags.len() / per;
        prop_assume!(n > 0);
        let field = OcclusionField {
            voxels: (0..n).map(|i| Voxel { center: Vec3::repeat(i as f64), half_extent: 0.5 }).collect(),
            block_resolution: b,
            target_id: 7,
            flags: flags[..n * per].to_vec(),
        };
        let (h, got) = OcclusionField::parse_bytes(&field.to_bytes()).unwrap();
        prop_assert_eq!(h.num_voxels, n);
        prop_assert_eq!(h.target_id, 7);
        prop_assert_eq!(got, field.flags);
    }
}
