//! `graspkit` command-line tool.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(
    name = "graspkit",
    version,
    about = "Grasp synthesis, refinement, rendering and evaluation"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct GlobalArgs {
    /// JSON run configuration; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random draw in the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, env = "GRASPKIT_THREADS")]
    threads: Option<usize>,
    /// Print a machine-readable JSON summary on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Output directory (or file, for commands writing one file).
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a mesh or scene, label grasps and write grasps plus octrees.
    Generate(GenerateArgs),
    /// Refine grasps against reconstructed octrees and filter collisions.
    Refine(RefineArgs),
    /// Grasp AP against ground-truth meshes, plus reconstruction metrics.
    Evaluate(EvaluateArgs),
    /// Render depth and instance masks of a scene.
    Render(RenderArgs),
    /// Occlusion field of one object's voxels.
    Occlusion(OcclusionArgs),
    /// Write an octree or mesh as a PLY file.
    ExportPly(ExportArgs),
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false, id = "input")]
struct SceneInput {
    /// Single mesh (PLY or OBJ) in meters.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Scene description JSON.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Built-in three-object demo scene.
    #[arg(long)]
    demo: bool,
}

#[derive(Args, Debug, Clone)]
struct GenerateArgs {
    #[command(flatten)]
    input: SceneInput,
    /// Multiplies mesh coordinates on load.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Surface area per sample, m².
    #[arg(long)]
    rho: Option<f64>,
    /// Surface area per dense contact point, m².
    #[arg(long)]
    contact_density: Option<f64>,
    /// Octree leaf depth.
    #[arg(long)]
    depth: Option<u8>,
    /// Gripper JSON.
    #[arg(long)]
    gripper: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct RefinementArgs {
    #[arg(long)]
    gamma_min: Option<f64>,
    #[arg(long)]
    gamma_max: Option<f64>,
    /// NMS translation threshold, m.
    #[arg(long)]
    nms_t: Option<f64>,
    /// NMS rotation threshold, degrees.
    #[arg(long)]
    nms_r: Option<f64>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    gripper: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct RefineArgs {
    /// Input grasps (.jsonl or packed).
    #[arg(long)]
    grasps: PathBuf,
    /// Reconstruction octree; repeat for several objects.
    #[arg(long, required = true)]
    octree: Vec<PathBuf>,
    /// Height of a support plane to avoid.
    #[arg(long)]
    support_plane: Option<f64>,
    /// Skip grasp NMS.
    #[arg(long)]
    no_nms: bool,
    #[command(flatten)]
    refinement: RefinementArgs,
}

#[derive(Args, Debug, Clone)]
struct EvaluateArgs {
    #[arg(long)]
    grasps: PathBuf,
    #[command(flatten)]
    input: SceneInput,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Directory of `object_<id>.octz` reconstructions for CD/F1/NC.
    #[arg(long)]
    recon_dir: Option<PathBuf>,
    /// Surface area per ground-truth point, m².
    #[arg(long)]
    gt_density: Option<f64>,
    /// F-score threshold, m.
    #[arg(long, default_value_t = graspkit::metrics::DEFAULT_ETA)]
    eta: f64,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    gripper: Option<PathBuf>,
    /// Also write a CSV table.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct CameraArgs {
    #[arg(long, default_value_t = 640)]
    width: u32,
    #[arg(long, default_value_t = 480)]
    height: u32,
    #[arg(long, default_value_t = 600.0)]
    fx: f64,
    #[arg(long, default_value_t = 600.0)]
    fy: f64,
    /// Defaults to the image center.
    #[arg(long)]
    cx: Option<f64>,
    #[arg(long)]
    cy: Option<f64>,
    /// Camera position x,y,z; defaults to the demo viewpoint.
    #[arg(long, value_delimiter = ',', num_args = 3, allow_hyphen_values = true)]
    eye: Option<Vec<f64>>,
    /// Look-at point x,y,z.
    #[arg(long = "look-at", value_delimiter = ',', num_args = 3, allow_hyphen_values = true)]
    target: Option<Vec<f64>>,
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false, id = "scene_input")]
struct SceneOnly {
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long)]
    demo: bool,
}

#[derive(Args, Debug, Clone)]
struct RenderArgs {
    #[command(flatten)]
    input: SceneOnly,
    #[command(flatten)]
    camera: CameraArgs,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    MaskDepth,
    RayIntersection,
}

#[derive(Args, Debug, Clone)]
struct OcclusionArgs {
    #[command(flatten)]
    input: SceneOnly,
    #[command(flatten)]
    camera: CameraArgs,
    /// Object whose voxels get the field.
    #[arg(long = "target", visible_alias = "target-id")]
    target_id: u32,
    /// Leaf depth of the target octree.
    #[arg(long)]
    depth: Option<u8>,
    /// Octree level whose occupied nodes are the voxels.
    #[arg(long, default_value_t = 4)]
    level: u8,
    /// Blocks per voxel axis.
    #[arg(long, default_value_t = graspkit::occlusion::DEFAULT_BLOCK_RESOLUTION)]
    blocks: u32,
    #[arg(long, value_enum, default_value_t = ModeArg::MaskDepth)]
    mode: ModeArg,
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false, id = "export_input")]
struct ExportInput {
    #[arg(long)]
    octree: Option<PathBuf>,
    #[arg(long)]
    mesh: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct ExportArgs {
    #[command(flatten)]
    input: ExportInput,
    /// For octrees: write leaf centers instead of surface points.
    #[arg(long)]
    centers: bool,
}

/// Failure of an internal consistency check, reported with exit code 2.
#[derive(Debug)]
pub struct Internal(pub String);

impl std::fmt::Display for Internal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "internal error: {}", self.0)
    }
}

impl std::error::Error for Internal {}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            if e.is::<Internal>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
        Err(_) => ExitCode::from(2),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = RunConfig::load(cli.global.config.as_deref())?;
    if let Some(s) = cli.global.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.global.threads {
        cfg.threads = Some(t);
    }
    if let Some(o) = &cli.global.out {
        cfg.out = o.clone();
    }
    apply_command_overrides(&mut cfg, &cli.command);
    cfg.validate()?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Internal(e.to_string()))?;
    }
    let json = cli.global.json;
    let summary = match &cli.command {
        Command::Generate(a) => commands::generate(a, &cfg)?,
        Command::Refine(a) => commands::refine(a, &cfg)?,
        Command::Evaluate(a) => commands::evaluate(a, &cfg)?,
        Command::Render(a) => commands::render(a, &cfg)?,
        Command::Occlusion(a) => commands::occlusion(a, &cfg)?,
        Command::ExportPly(a) => commands::export_ply(a, &cfg)?,
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        commands::print_summary(&summary);
    }
    Ok(())
}

fn apply_command_overrides(cfg: &mut RunConfig, cmd: &Command) {
    fn set<T: Clone>(dst: &mut T, v: &Option<T>) {
        if let Some(v) = v {
            *dst = v.clone();
        }
    }
    let refinement = |cfg: &mut RunConfig, r: &RefinementArgs| {
        set(&mut cfg.gamma_min, &r.gamma_min);
        set(&mut cfg.gamma_max, &r.gamma_max);
        set(&mut cfg.nms_t, &r.nms_t);
        set(&mut cfg.nms_r, &r.nms_r);
        set(&mut cfg.top_k, &r.top_k);
        if r.gripper.is_some() {
            cfg.gripper = r.gripper.clone();
        }
    };
    match cmd {
        Command::Generate(a) => {
            set(&mut cfg.rho, &a.rho);
            set(&mut cfg.contact_density, &a.contact_density);
            set(&mut cfg.depth, &a.depth);
            if a.gripper.is_some() {
                cfg.gripper = a.gripper.clone();
            }
        }
        Command::Refine(a) => refinement(cfg, &a.refinement),
        Command::Evaluate(a) => {
            set(&mut cfg.top_k, &a.top_k);
            set(&mut cfg.contact_density, &a.gt_density);
            if a.gripper.is_some() {
                cfg.gripper = a.gripper.clone();
            }
        }
        Command::Occlusion(a) => set(&mut cfg.depth, &a.depth),
        Command::Render(_) | Command::ExportPly(_) => {}
    }
}
