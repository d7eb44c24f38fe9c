use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use graspkit::bench::label_scene;
use graspkit::geometry::{io as mesh_io, CameraModel, RigidTransform, SurfaceSample, TriangleMesh, Vec3};
use graspkit::graspgen::{
    attach_labels, generate_labels_with, io as grasp_io, GraspLabel, GraspPose, LABEL_RADIUS, PER_VIEW,
};
use graspkit::metrics::{
    chamfer_distance, grasp_ap, normal_consistency, precision_recall_f1, ApConfig, GroundTruthScene, PointSet,
    FRICTIONS,
};
use graspkit::occlusion::{compute_occlusion_field, compute_occlusion_field_raycast, OcclusionField};
use graspkit::octree::Octree;
use graspkit::refine::{filter_collisions, grasp_nms, refine_grasp, Reconstruction};
use graspkit::scene::{demo_camera_pose, look_at, render as render_scene, Scene, SceneObject};

use crate::config::RunConfig;
use crate::{
    CameraArgs, EvaluateArgs, ExportArgs, GenerateArgs, Internal, ModeArg, OcclusionArgs, RefineArgs, RenderArgs,
    SceneInput, SceneOnly,
};

pub fn print_summary(v: &Value) {
    if let Value::Object(m) = v {
        for (k, v) in m {
            match v {
                Value::Array(_) | Value::Object(_) => println!("{k}: {v}"),
                Value::String(s) => println!("{k}: {s}"),
                _ => println!("{k}: {v}"),
            }
        }
    }
}

fn ensure_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))
}

fn octree_path(dir: &Path, id: u32) -> PathBuf {
    dir.join(format!("object_{id}.octz"))
}

fn load_mesh(path: &Path, scale: f64) -> Result<TriangleMesh> {
    if !path.exists() {
        bail!("input file not found: {}", path.display());
    }
    Ok(mesh_io::load_mesh(path, scale)?)
}

/// Resolves `--mesh/--scene/--demo` to a scene. A lone mesh becomes object 1
/// at the identity pose with no support plane.
fn load_scene_input(input: &SceneInput, scale: f64) -> Result<Scene> {
    if let Some(m) = &input.mesh {
        let mesh = load_mesh(m, scale)?;
        return Ok(Scene::new(
            vec![mesh],
            vec![SceneObject {
                id: 1,
                mesh: 0,
                pose: RigidTransform::identity(),
            }],
            None,
        )?);
    }
    load_scene_only(&SceneOnly {
        scene: input.scene.clone(),
        demo: input.demo,
    })
}

fn load_scene_only(input: &SceneOnly) -> Result<Scene> {
    match &input.scene {
        Some(p) => {
            if !p.exists() {
                bail!("input file not found: {}", p.display());
            }
            Ok(Scene::load(p)?)
        }
        None => Ok(Scene::demo()),
    }
}

#[derive(Serialize)]
struct LabelRecord<'a> {
    object_id: u32,
    point: [f64; 3],
    normal: [f64; 3],
    graspness: &'a [f32],
    best: Option<GraspPose>,
}

pub fn generate(a: &GenerateArgs, cfg: &RunConfig) -> Result<Value> {
    let gripper = cfg.gripper()?;
    let lcfg = cfg.labels();
    let scene = load_scene_input(&a.input, a.scale)?;
    let labeled: Vec<(u32, SurfaceSample, GraspLabel)> = if a.input.mesh.is_some() {
        generate_labels_with(&scene.world_meshes()[0], &gripper, &lcfg, cfg.seed)?
            .into_iter()
            .map(|(s, mut l)| {
                if let Some(b) = l.best.as_mut() {
                    b.object_id = 1;
                }
                (1, s, l)
            })
            .collect()
    } else {
        label_scene(&scene, &gripper, &lcfg, cfg.seed)?.samples
    };
    ensure_dir(&cfg.out)?;
    let grasps: Vec<GraspPose> = labeled
        .iter()
        .filter_map(|x| x.2.best)
        .map(|g| g.to_f32_precision())
        .collect();
    grasp_io::write_jsonl(&cfg.out.join("grasps.jsonl"), &grasps)?;
    grasp_io::write_packed(&cfg.out.join("grasps.bin"), &grasps)?;
    let mut text = String::new();
    for (id, s, l) in &labeled {
        let rec = LabelRecord {
            object_id: *id,
            point: s.point.into(),
            normal: s.normal.into(),
            graspness: &l.graspness,
            best: l.best.map(|g| g.to_f32_precision()),
        };
        text.push_str(&serde_json::to_string(&rec)?);
        text.push('\n');
    }
    let labels_path = cfg.out.join("labels.jsonl");
    fs::write(&labels_path, text).with_context(|| format!("writing {}", labels_path.display()))?;

    let mut octrees = Vec::new();
    for (o, m) in scene.objects().iter().zip(scene.world_meshes()) {
        let mut tree = Octree::from_mesh(m, cfg.depth)?;
        let mine: Vec<(SurfaceSample, GraspLabel)> = labeled
            .iter()
            .filter(|x| x.0 == o.id)
            .map(|x| (x.1, x.2.clone()))
            .collect();
        attach_labels(&mut tree, &mine, LABEL_RADIUS)?;
        let p = octree_path(&cfg.out, o.id);
        fs::write(&p, tree.to_bytes()).with_context(|| format!("writing {}", p.display()))?;
        octrees.push(json!({"object_id": o.id, "path": p, "leaves": tree.len()}));
    }
    let survivors: usize = labeled
        .iter()
        .map(|x| {
            x.2.graspness
                .iter()
                .map(|s| (s * PER_VIEW as f32).round() as usize)
                .sum::<usize>()
        })
        .sum();
    log::info!("labeled {} samples", labeled.len());
    Ok(json!({
        "samples": labeled.len(),
        "candidates": labeled.len() * graspkit::graspgen::CANDIDATES_PER_SAMPLE,
        "survivors": survivors,
        "grasps": grasps.len(),
        "octrees": octrees,
        "out": cfg.out,
    }))
}

fn read_octree(p: &Path) -> Result<Octree> {
    let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
    Octree::from_bytes(&bytes).with_context(|| format!("decoding {}", p.display()))
}

fn read_grasps(p: &Path) -> Result<Vec<GraspPose>> {
    if !p.exists() {
        bail!("input file not found: {}", p.display());
    }
    Ok(grasp_io::read_grasps(p)?)
}

pub fn refine(a: &RefineArgs, cfg: &RunConfig) -> Result<Value> {
    let gripper = cfg.gripper()?;
    let rcfg = cfg.refinement();
    let grasps = read_grasps(&a.grasps)?;
    let trees = a.octree.iter().map(|p| read_octree(p)).collect::<Result<Vec<_>>>()?;
    let recon = Reconstruction::from_octrees(trees.iter())?.with_support_plane(a.support_plane);
    let refined: Vec<GraspPose> = {
        use rayon::prelude::*;
        grasps
            .par_iter()
            .map(|g| refine_grasp(g, &recon, &gripper, &rcfg))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    };
    let free = filter_collisions(&refined, &recon, &gripper);
    let out = if a.no_nms {
        free.clone()
    } else {
        grasp_nms(&free, &rcfg)
    };
    for g in &out {
        if !(0.0..=0.10).contains(&g.width) || !(0.0..=0.04).contains(&g.depth) {
            return Err(Internal(format!(
                "refined grasp outside clip ranges: w={} d={}",
                g.width, g.depth
            ))
            .into());
        }
    }
    let out: Vec<GraspPose> = out.iter().map(|g| g.to_f32_precision()).collect();
    let path = if cfg.out.extension().is_some() {
        cfg.out.clone()
    } else {
        ensure_dir(&cfg.out)?;
        cfg.out.join("refined.jsonl")
    };
    grasp_io::write_jsonl(&path, &out)?;
    Ok(json!({
        "input": grasps.len(),
        "refined": refined.len(),
        "collision_free": free.len(),
        "output": out.len(),
        "path": path,
    }))
}

pub fn evaluate(a: &EvaluateArgs, cfg: &RunConfig) -> Result<Value> {
    let gripper = cfg.gripper()?;
    let scene = load_scene_input(&a.input, a.scale)?;
    let grasps = read_grasps(&a.grasps)?;
    let gt = GroundTruthScene::new(
        scene.world_meshes().to_vec(),
        scene.support_plane(),
        cfg.contact_density,
        cfg.seed,
    )?;
    let report = grasp_ap(
        &[grasps],
        std::slice::from_ref(&gt),
        &gripper,
        &ApConfig { top_k: cfg.top_k },
    )?;
    let mut objects = Vec::new();
    if let Some(dir) = &a.recon_dir {
        for (k, (o, m)) in scene.objects().iter().zip(scene.world_meshes()).enumerate() {
            let p = octree_path(dir, o.id);
            if !p.exists() {
                bail!("input file not found: {}", p.display());
            }
            let pd = PointSet::from_pairs(&read_octree(&p)?.extract_surface()?);
            let gt_cloud = graspkit::graspgen::SurfaceCloud::sample_mesh(m, cfg.contact_density, cfg.seed + k as u64)?;
            let gts = PointSet::from_pairs(&gt_cloud.pairs());
            let (_, _, f1) = precision_recall_f1(&pd, &gts, a.eta)?;
            objects.push(json!({
                "object_id": o.id,
                "cd": chamfer_distance(&pd, &gts)?,
                "f1": f1,
                "nc": normal_consistency(&pd, &gts)?,
            }));
        }
    }
    if let Some(csv) = &a.csv {
        let mut t = String::from("row,ap");
        for mu in FRICTIONS {
            t.push_str(&format!(",ap_{mu:.1}"));
        }
        t.push_str(",cd_mm,f1,nc\n");
        t.push_str(&format!("scene,{:.4}", report.ap));
        for v in report.ap_by_mu.values() {
            t.push_str(&format!(",{v:.4}"));
        }
        t.push_str(",,,\n");
        for o in &objects {
            t.push_str(&format!("object_{},", o["object_id"]));
            t.push_str(&",".repeat(FRICTIONS.len()));
            t.push_str(&format!(
                ",{:.4},{:.4},{:.4}\n",
                o["cd"].as_f64().unwrap_or(f64::NAN),
                o["f1"].as_f64().unwrap_or(f64::NAN),
                o["nc"].as_f64().unwrap_or(f64::NAN)
            ));
        }
        fs::write(csv, t).with_context(|| format!("writing {}", csv.display()))?;
    }
    let value = json!({
        "ap": report.ap,
        "ap_by_mu": report.ap_by_mu,
        "top_k": cfg.top_k,
        "objects": objects,
    });
    if cfg.out.extension().is_some_and(|e| e == "json") {
        let mut full = value.clone();
        full["precision_at_k"] = json!(report.scenes[0].precision_at_k);
        fs::write(&cfg.out, serde_json::to_string_pretty(&full)?)
            .with_context(|| format!("writing {}", cfg.out.display()))?;
    }
    Ok(value)
}

fn camera(c: &CameraArgs) -> Result<(CameraModel, RigidTransform)> {
    let cx = c.cx.unwrap_or(c.width as f64 / 2.0);
    let cy = c.cy.unwrap_or(c.height as f64 / 2.0);
    let cam = CameraModel::new(c.fx, c.fy, cx, cy, c.width, c.height)?;
    let pose = match (&c.eye, &c.target) {
        (None, None) => demo_camera_pose(),
        (eye, target) => {
            let v = |x: &Option<Vec<f64>>, d: Vec3| x.as_ref().map_or(d, |x| Vec3::new(x[0], x[1], x[2]));
            let demo = demo_camera_pose();
            let eye = v(eye, *demo.translation());
            let target = v(target, Vec3::new(0.0, 0.04, 0.03));
            if (target - eye).norm() < 1e-9 {
                bail!("camera eye and target coincide");
            }
            look_at(eye, target, Vec3::z())
        }
    };
    Ok((cam, pose))
}

pub fn render(a: &RenderArgs, cfg: &RunConfig) -> Result<Value> {
    let scene = load_scene_only(&a.input)?;
    let (cam, pose) = camera(&a.camera)?;
    let view = render_scene(&scene, &cam, &pose);
    ensure_dir(&cfg.out)?;
    view.write_depth_png(&cfg.out.join("depth.png"))?;
    view.write_mask_png(&cfg.out.join("mask.png"))?;
    view.write_depth_raw(&cfg.out.join("depth.f32"))?;
    let counts: Vec<Value> = scene
        .object_ids()
        .iter()
        .map(|id| json!({"object_id": id, "pixels": view.mask.iter().filter(|m| *m == id).count()}))
        .collect();
    Ok(json!({
        "width": cam.width,
        "height": cam.height,
        "hit_pixels": view.depth.iter().filter(|d| **d > 0.0).count(),
        "objects": counts,
        "out": cfg.out,
    }))
}

pub fn occlusion(a: &OcclusionArgs, cfg: &RunConfig) -> Result<Value> {
    let scene = load_scene_only(&a.input)?;
    let (cam, pose) = camera(&a.camera)?;
    let Some(mesh) = scene.world_mesh(a.target_id) else {
        bail!("object id {} is not in the scene", a.target_id);
    };
    if a.level > cfg.depth {
        bail!("voxel level {} is deeper than the octree depth {}", a.level, cfg.depth);
    }
    let tree = Octree::from_mesh(mesh, cfg.depth)?;
    let voxels = tree.voxels_at(a.level);
    let view = render_scene(&scene, &cam, &pose);
    let field: OcclusionField = match a.mode {
        ModeArg::MaskDepth => compute_occlusion_field(&view, &voxels, a.target_id, a.blocks)?,
        ModeArg::RayIntersection => compute_occlusion_field_raycast(&scene, &view, &voxels, a.target_id, a.blocks)?,
    };
    ensure_dir(&cfg.out)?;
    let bin = cfg.out.join("occlusion.bin");
    fs::write(&bin, field.to_bytes()).with_context(|| format!("writing {}", bin.display()))?;
    let fr = field.fractions();
    let s: Vec<f32> = fr.iter().map(|x| x.0 as f32).collect();
    let t: Vec<f32> = fr.iter().map(|x| x.1 as f32).collect();
    let centers: Vec<Vec3> = voxels.iter().map(|v| v.center).collect();
    mesh_io::write_points_ply(
        &cfg.out.join("occlusion.ply"),
        &centers,
        None,
        &[("o_self", &s), ("o_inter", &t)],
    )?;
    let count = |bit: u8| field.flags.iter().filter(|f| **f & bit != 0).count();
    Ok(json!({
        "voxels": voxels.len(),
        "blocks": field.flags.len(),
        "self_flags": count(graspkit::occlusion::SELF_BIT),
        "inter_flags": count(graspkit::occlusion::INTER_BIT),
        "voxels_with_inter": t.iter().filter(|v| **v > 0.0).count(),
        "out": cfg.out,
    }))
}

pub fn export_ply(a: &ExportArgs, cfg: &RunConfig) -> Result<Value> {
    let path = if cfg.out.extension().is_some() {
        cfg.out.clone()
    } else {
        ensure_dir(&cfg.out)?;
        cfg.out.join("export.ply")
    };
    if let Some(m) = &a.input.mesh {
        let mesh = load_mesh(m, 1.0)?;
        mesh_io::write_mesh_ply(&path, &mesh)?;
        return Ok(json!({"vertices": mesh.vertices().len(), "triangles": mesh.triangles().len(), "path": path}));
    }
    let src = a.input.octree.as_ref().expect("clap enforces one input");
    let tree = read_octree(src)?;
    let graspness: Vec<f32> = match tree.grasp_labels() {
        Some(l) => l
            .iter()
            .map(|x| x.as_ref().map_or(0.0, |x| x.max_graspness()))
            .collect(),
        None => vec![0.0; tree.len()],
    };
    let n = if a.centers || tree.sdf().is_none() {
        mesh_io::write_points_ply(&path, &tree.leaf_centers(), None, &[("graspness", &graspness)])?;
        tree.len()
    } else {
        let s = tree.extract_surface()?;
        let (p, nn): (Vec<Vec3>, Vec<Vec3>) = s.into_iter().unzip();
        mesh_io::write_points_ply(&path, &p, Some(&nn), &[("graspness", &graspness)])?;
        p.len()
    };
    Ok(json!({"points": n, "path": path}))
}
