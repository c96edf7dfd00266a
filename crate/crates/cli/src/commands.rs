use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use radiant_core::fields::{make_analytic_sdf, Shape};
use radiant_core::grid::{axis_directions, compute_scene_bounds, sample_grid};
use radiant_core::io::{
    read_json, read_nfvg, to_json_string, write_json, write_nfvg, write_ply, write_ppm, PointCloud,
};
use radiant_core::maps::{build_semantic_map, SemanticMapConfig};
use radiant_core::masking::{apply_mask, psnr3d, recon_losses, PatchMask};
use radiant_core::math::{Camera, Intrinsics};
use radiant_core::metrics::{
    detection_ap, detection_ap_per_class, nav_metrics, pose_ap, voxel_label_metrics, NavMetrics,
};
use radiant_core::octree::{bench_octree, dense_extract, extract_surface, BenchRow};
use radiant_core::render::{render_composed, render_image, render_ray, render_ray_nearfar};
use radiant_core::{Aabb, Error, LodConfig, OrientedBox3, Pose, PoseRecord, RenderConfig, Trajectory, Vec3};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::scene::{named_shape, FieldSpec, SceneFile};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("refusing to overwrite {0} (pass --force)")]
    OutputExists(PathBuf),
    #[error("{0}")]
    Check(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::OutputExists(_) | CliError::Core(Error::Io(_)) => 2,
            CliError::Check(_) | CliError::Core(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "Usage",
            CliError::OutputExists(_) => "OutputExists",
            CliError::Check(_) => "CheckFailed",
            CliError::Core(e) => e.kind(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "radiant", version, about = "Neural-field geometry and evaluation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a radiance field into an RGBA voxel grid (NFVG).
    Voxelize(VoxelizeArgs),
    /// Extract surface points from an SDF with the octree (or a dense grid).
    ExtractSurface(ExtractArgs),
    /// Mask random 3D patches of a grid.
    Mask(MaskArgs),
    /// Volume-render a scene or a grid to PPM images.
    Render(RenderArgs),
    /// Detection AP for oriented boxes.
    EvalDetect(EvalDetectArgs),
    /// Pose AP at rotation/translation thresholds.
    EvalPose(EvalPoseArgs),
    /// Voxel segmentation metrics.
    EvalVoxels(EvalVoxelsArgs),
    /// Navigation metrics for trajectories.
    EvalNav(EvalNavArgs),
    /// Compare point-sampling cost of ordinary grids and the octree.
    BenchOctree(BenchArgs),
    /// Build a top-down semantic map from one RGB-D frame.
    Semmap(SemmapArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct VoxelizeArgs {
    /// Built-in field: sphere, box, union or constant.
    #[arg(long, conflicts_with = "field_file", required_unless_present = "field_file")]
    field: Option<String>,
    /// Field description as JSON.
    #[arg(long)]
    field_file: Option<PathBuf>,
    #[arg(long, default_value_t = radiant_core::grid::DEFAULT_GRID_DIM)]
    dims: usize,
    /// `lo,hi` for a cube or six values `minx,miny,minz,maxx,maxy,maxz`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    bounds: Option<Vec<f64>>,
    /// JSON list of cameras; sets the viewing directions and, without
    /// --bounds, the scene bounds.
    #[arg(long)]
    cameras: Option<PathBuf>,
    /// JSON list of boxes included in the scene bounds.
    #[arg(long)]
    boxes: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    margin: f64,
    #[arg(long, default_value_t = radiant_core::fields::DEFAULT_ALPHA_DELTA)]
    delta: f64,
    /// Density of the built-in fields.
    #[arg(long, default_value_t = 50.0)]
    sigma: f64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct ShapeArgs {
    /// Built-in shape: sphere, box or union.
    #[arg(long, conflicts_with = "shape_file", required_unless_present = "shape_file")]
    shape: Option<String>,
    /// Shape description as JSON.
    #[arg(long)]
    shape_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long, default_value_t = 3)]
    lod_start: u32,
    #[arg(long, default_value_t = 6)]
    lod_end: u32,
    /// Keep cells with sdf < cell size rather than |sdf| < cell size.
    #[arg(long)]
    literal_occupancy: bool,
    #[arg(long, default_value_t = 1)]
    iterations: usize,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    bounds: Option<Vec<f64>>,
    /// Use a dense grid of this resolution instead of the octree.
    #[arg(long)]
    dense: Option<usize>,
    /// Narrow band for --dense.
    #[arg(long, default_value_t = 0.03)]
    band: f64,
    #[arg(long)]
    out: PathBuf,
    /// Statistics sidecar; defaults to the output path with a .json extension.
    #[arg(long)]
    stats: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct MaskArgs {
    #[arg(long)]
    grid: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Where to write the mask JSON.
    #[arg(long)]
    mask_out: PathBuf,
    #[arg(long, default_value_t = radiant_core::masking::DEFAULT_PATCH_SIZE)]
    patch: usize,
    #[arg(long, default_value_t = radiant_core::masking::DEFAULT_MASK_RATIO)]
    ratio: f64,
    /// Reconstruction to score against the unmasked input.
    #[arg(long)]
    pred: Option<PathBuf>,
    #[arg(long, default_value_t = 0.01)]
    alpha_floor: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct RenderArgs {
    /// Scene JSON with cameras and fields.
    #[arg(long, conflicts_with = "grid", required_unless_present = "grid")]
    scene: Option<PathBuf>,
    /// Render an NFVG grid from a default viewpoint.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 64)]
    width: u32,
    #[arg(long, default_value_t = 64)]
    height: u32,
    /// Overrides the scene's sample count.
    #[arg(long)]
    n_coarse: Option<usize>,
    #[arg(long)]
    force: bool,
    /// Overrides the scene's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct EvalOut {
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct EvalDetectArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5")]
    iou_thresholds: Vec<f64>,
    #[command(flatten)]
    out: EvalOut,
}

#[derive(Debug, Args)]
struct EvalPoseArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Comma-separated `deg:cm` pairs.
    #[arg(long, value_delimiter = ',', default_value = "5:5,5:10,10:10", value_parser = parse_pose_threshold)]
    pose_thresholds: Vec<(f64, f64)>,
    #[command(flatten)]
    out: EvalOut,
}

#[derive(Debug, Args)]
struct EvalVoxelsArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    classes: u32,
    #[command(flatten)]
    out: EvalOut,
}

#[derive(Debug, Args)]
struct EvalNavArgs {
    #[arg(long)]
    trajectory: PathBuf,
    #[command(flatten)]
    out: EvalOut,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long, default_value_t = 0.03)]
    band: f64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    bounds: Option<Vec<f64>>,
    #[command(flatten)]
    out: EvalOut,
}

#[derive(Debug, Args)]
struct SemmapArgs {
    /// JSON with `camera`, `depth` and `semantics` (row-major).
    #[arg(long)]
    frame: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 40)]
    r: usize,
    #[arg(long, default_value_t = 0.1)]
    cell_size: f64,
    #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
    height_min: f64,
    #[arg(long, default_value_t = 1.8, allow_hyphen_values = true)]
    height_max: f64,
    #[arg(long, default_value_t = 1)]
    classes: usize,
    #[command(flatten)]
    common: Common,
}

fn parse_pose_threshold(s: &str) -> Result<(f64, f64), String> {
    let (d, c) = s.split_once(':').ok_or_else(|| format!("expected deg:cm, got '{s}'"))?;
    let d: f64 = d.trim().parse().map_err(|_| format!("bad degrees in '{s}'"))?;
    let c: f64 = c.trim().parse().map_err(|_| format!("bad centimetres in '{s}'"))?;
    Ok((d, c))
}

pub fn dispatch(cli: Cli) -> CliResult {
    match cli.command {
        Command::Voxelize(a) => voxelize(a),
        Command::ExtractSurface(a) => extract(a),
        Command::Mask(a) => mask(a),
        Command::Render(a) => render(a),
        Command::EvalDetect(a) => eval_detect(a),
        Command::EvalPose(a) => eval_pose(a),
        Command::EvalVoxels(a) => eval_voxels(a),
        Command::EvalNav(a) => eval_nav(a),
        Command::BenchOctree(a) => bench(a),
        Command::Semmap(a) => semmap(a),
    }
}

fn check_output(path: &Path, force: bool) -> CliResult {
    if path.exists() && !force {
        return Err(CliError::OutputExists(path.to_path_buf()));
    }
    Ok(())
}

fn parse_bounds(v: &Option<Vec<f64>>) -> CliResult<Option<Aabb>> {
    let Some(v) = v else { return Ok(None) };
    let b = match v.as_slice() {
        [lo, hi] => Aabb::new(Vec3::splat(*lo), Vec3::splat(*hi)),
        [a, b, c, d, e, f] => Aabb::new(Vec3::new(*a, *b, *c), Vec3::new(*d, *e, *f)),
        _ => return Err(CliError::Usage("--bounds takes 2 or 6 comma-separated numbers".into())),
    };
    if !b.has_volume() {
        return Err(CliError::Usage("--bounds must describe a box with positive volume".into()));
    }
    Ok(Some(b))
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn emit(value: &impl Serialize, out: &Option<PathBuf>, force: bool) -> CliResult {
    match out {
        Some(p) => {
            check_output(p, force)?;
            write_json(p, value)?;
            println!("{}", p.display());
        }
        None => print!("{}", to_json_string(value)?),
    }
    Ok(())
}

fn load_shape(a: &ShapeArgs) -> CliResult<Shape> {
    match (&a.shape, &a.shape_file) {
        (Some(name), _) => {
            named_shape(name).ok_or_else(|| CliError::Usage(format!("unknown shape '{name}' (sphere, box, union)")))
        }
        (None, Some(path)) => Ok(read_json(path)?),
        (None, None) => Err(CliError::Usage("one of --shape or --shape-file is required".into())),
    }
}

fn voxelize(a: VoxelizeArgs) -> CliResult {
    check_output(&a.out, a.common.force)?;
    let (spec, base) = match (&a.field, &a.field_file) {
        (Some(name), _) => {
            let spec = match name.as_str() {
                "constant" => FieldSpec::Constant { color: [0.5; 3], sigma: a.sigma },
                other => FieldSpec::Solid {
                    shape: named_shape(other).ok_or_else(|| {
                        CliError::Usage(format!("unknown field '{other}' (sphere, box, union, constant)"))
                    })?,
                    sigma: a.sigma,
                },
            };
            (spec, PathBuf::new())
        }
        (None, Some(path)) => (read_json::<FieldSpec>(path)?, base_dir(path)),
        (None, None) => return Err(CliError::Usage("one of --field or --field-file is required".into())),
    };
    let field = spec.build(&base)?;
    let cameras: Vec<Camera> = match &a.cameras {
        Some(p) => read_json(p)?,
        None => Vec::new(),
    };
    let boxes: Vec<OrientedBox3> = match &a.boxes {
        Some(p) => read_json(p)?,
        None => Vec::new(),
    };
    let bounds = match parse_bounds(&a.bounds)? {
        Some(b) => b,
        None if !cameras.is_empty() || !boxes.is_empty() => {
            let poses: Vec<Pose> = cameras.iter().map(|c| c.pose).collect();
            compute_scene_bounds(&poses, &boxes, a.margin)?
        }
        None => Aabb::cube(1.0),
    };
    let directions =
        if cameras.is_empty() { axis_directions() } else { cameras.iter().map(|c| c.pose.forward()).collect() };
    let grid = sample_grid(field.as_ref(), &bounds, [a.dims; 3], &directions, a.delta)?;
    write_nfvg(&a.out, &grid)?;
    println!("{}", a.out.display());
    Ok(())
}

fn extract(a: ExtractArgs) -> CliResult {
    let stats_path = a.stats.clone().unwrap_or_else(|| a.out.with_extension("json"));
    check_output(&a.out, a.common.force)?;
    check_output(&stats_path, a.common.force)?;
    let sdf = make_analytic_sdf(&load_shape(&a.shape)?)?;
    let bounds = parse_bounds(&a.bounds)?.unwrap_or(Aabb::cube(1.0));
    let (samples, stats) = match a.dense {
        Some(res) => dense_extract(&sdf, &bounds, res, a.band)?,
        None => {
            let cfg = LodConfig {
                lod_start: a.lod_start,
                lod_end: a.lod_end,
                bounds,
                literal_occupancy: a.literal_occupancy,
                projection_iterations: a.iterations,
            };
            extract_surface(&sdf, &cfg)?
        }
    };
    write_ply(&a.out, &PointCloud::from(samples.as_slice()))?;
    write_json(&stats_path, &stats)?;
    println!("{}", a.out.display());
    println!("{}", stats_path.display());
    Ok(())
}

fn mask(a: MaskArgs) -> CliResult {
    check_output(&a.out, a.common.force)?;
    check_output(&a.mask_out, a.common.force)?;
    let grid = read_nfvg(&a.grid)?;
    let m = PatchMask::generate(grid.dims(), a.patch, a.ratio, a.common.seed)?;
    let pred = a.pred.as_deref().map(read_nfvg).transpose()?;
    let masked = apply_mask(&grid, &m)?;
    write_nfvg(&a.out, &masked)?;
    write_json(&a.mask_out, &m.to_file())?;
    println!("{}", a.out.display());
    println!("{}", a.mask_out.display());
    if let Some(pred) = pred {
        let losses = recon_losses(&pred, &grid, &m, a.alpha_floor)?;
        let report = json!({ "losses": losses, "psnr3d": psnr3d(&pred, &grid)? });
        print!("{}", to_json_string(&report)?);
    }
    Ok(())
}

/// Camera on the -z side of the grid looking at its center, image up
/// along world +y.
fn default_grid_camera(bounds: &Aabb, width: u32, height: u32) -> CliResult<Camera> {
    let c = bounds.center();
    let eye = c - Vec3::Z * (1.2 * bounds.diagonal());
    let pose = Pose::look_at(eye, c, Vec3::new(0.0, -1.0, 0.0))?;
    let f = width.max(height) as f64;
    let intrinsics = Intrinsics::new(f, f, (width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0, width, height)?;
    Ok(Camera { intrinsics, pose })
}

fn render(a: RenderArgs) -> CliResult {
    let (scene, base) = match (&a.scene, &a.grid) {
        (Some(path), _) => (read_json::<SceneFile>(path)?, base_dir(path)),
        (None, Some(grid_path)) => {
            let grid = read_nfvg(grid_path)?;
            let cam = default_grid_camera(&grid.bounds(), a.width, a.height)?;
            let dist = 1.2 * grid.bounds().diagonal();
            let scene = SceneFile {
                cameras: vec![cam],
                near: FieldSpec::Grid {
                    path: grid_path.canonicalize()?,
                    delta: radiant_core::fields::DEFAULT_ALPHA_DELTA,
                },
                far: None,
                object: None,
                boxes: Vec::new(),
                config: RenderConfig { near: 0.02, far: dist + grid.bounds().diagonal(), ..Default::default() },
            };
            (scene, PathBuf::new())
        }
        (None, None) => return Err(CliError::Usage("one of --scene or --grid is required".into())),
    };
    let mut cfg = scene.config;
    if let Some(n) = a.n_coarse {
        cfg.n_coarse = n;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let near = scene.near.build(&base)?;
    let far = scene.far.as_ref().map(|f| f.build(&base)).transpose()?;
    let object = scene.object.as_ref().map(|f| f.build(&base)).transpose()?;
    if scene.cameras.is_empty() {
        return Err(CliError::Core(Error::InvalidArgument("scene has no cameras".into())));
    }

    let image_paths: Vec<PathBuf> =
        (0..scene.cameras.len()).map(|i| a.out_dir.join(format!("view_{i:03}.ppm"))).collect();
    let metrics_path = a.out_dir.join("metrics.json");
    for p in image_paths.iter().chain([&metrics_path]) {
        check_output(p, a.force)?;
    }
    fs::create_dir_all(&a.out_dir)?;

    let mut images = Vec::new();
    for (cam, path) in scene.cameras.iter().zip(&image_paths) {
        let img = render_image(&cam.intrinsics, &cam.pose, |ray| match (&far, &object) {
            (Some(far), Some(obj)) => render_composed(obj, &near, far, &scene.boxes, ray, &cfg),
            (Some(far), None) if !scene.boxes.is_empty() => {
                let empty = radiant_core::ConstantField::empty();
                render_composed(&empty, &near, far, &scene.boxes, ray, &cfg)
            }
            (Some(far), None) => render_ray_nearfar(&near, far, ray, &cfg),
            (None, _) => render_ray(&near, ray, &cfg),
        })?;
        write_ppm(path, img.width, img.height, &img.color)?;
        images.push(json!({
            "file": path.file_name().map(|n| n.to_string_lossy().into_owned()),
            "mean_acc": img.mean_acc(),
        }));
    }
    write_json(&metrics_path, &json!({ "images": images }))?;
    for p in image_paths.iter().chain([&metrics_path]) {
        println!("{}", p.display());
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct BoxesFile {
    boxes: Vec<OrientedBox3>,
}

fn eval_detect(a: EvalDetectArgs) -> CliResult {
    let preds: BoxesFile = read_json(&a.pred)?;
    let gts: BoxesFile = read_json(&a.gt)?;
    let mut report = BTreeMap::new();
    for &t in &a.iou_thresholds {
        let pooled = detection_ap(&preds.boxes, &gts.boxes, t)?;
        let (per_class, mean) = detection_ap_per_class(&preds.boxes, &gts.boxes, t)?;
        let per_class: BTreeMap<String, _> = per_class.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        report.insert(format!("iou_{t}"), json!({ "pooled": pooled, "mean": mean, "per_class": per_class }));
    }
    report.insert("n_pred".into(), json!(preds.boxes.len()));
    report.insert("n_gt".into(), json!(gts.boxes.len()));
    emit(&report, &a.out.out, a.out.common.force)
}

#[derive(Debug, Deserialize)]
struct PosesFile {
    poses: Vec<PoseRecord>,
    /// Class id to symmetry axis (object frame).
    #[serde(default)]
    symmetric_axes: BTreeMap<String, Vec3>,
}

fn eval_pose(a: EvalPoseArgs) -> CliResult {
    let preds: PosesFile = read_json(&a.pred)?;
    let gts: PosesFile = read_json(&a.gt)?;
    let mut symmetric = BTreeMap::new();
    for (k, v) in &gts.symmetric_axes {
        let class: u32 = k
            .parse()
            .map_err(|_| CliError::Core(Error::Parse(format!("symmetric_axes key '{k}' is not a class id"))))?;
        symmetric.insert(class, *v);
    }
    let mut report = BTreeMap::new();
    for &(deg, cm) in &a.pose_thresholds {
        let ap = pose_ap(&preds.poses, &gts.poses, deg, cm, &symmetric)?;
        report.insert(format!("{deg}deg_{cm}cm"), json!(ap));
    }
    report.insert("n_pred".into(), json!(preds.poses.len()));
    report.insert("n_gt".into(), json!(gts.poses.len()));
    emit(&report, &a.out.out, a.out.common.force)
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum LabelsFile {
    Inline { labels: Vec<u32> },
    External { labels_file: PathBuf },
}

fn load_labels(path: &Path) -> CliResult<Vec<u32>> {
    match read_json::<LabelsFile>(path)? {
        LabelsFile::Inline { labels } => Ok(labels),
        LabelsFile::External { labels_file } => {
            let grid = read_nfvg(&base_dir(path).join(labels_file))?;
            grid.data()
                .iter()
                .map(|&v| {
                    if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                        Ok(v as u32)
                    } else {
                        Err(CliError::Core(Error::Parse(format!("label value {v} is not a class id"))))
                    }
                })
                .collect()
        }
    }
}

fn eval_voxels(a: EvalVoxelsArgs) -> CliResult {
    let pred = load_labels(&a.pred)?;
    let gt = load_labels(&a.gt)?;
    let m = voxel_label_metrics(&pred, &gt, a.classes)?;
    let per_class: BTreeMap<String, Value> =
        m.per_class.iter().map(|(k, (iou, acc))| (k.to_string(), json!({ "iou": iou, "acc": acc }))).collect();
    let report = json!({ "miou": m.miou, "macc": m.macc, "acc": m.acc, "per_class": per_class });
    emit(&report, &a.out.out, a.out.common.force)
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum NavFile {
    Many { trajectories: Vec<Trajectory> },
    One { trajectory: Trajectory },
    Bare(Trajectory),
}

fn eval_nav(a: EvalNavArgs) -> CliResult {
    let episodes = match read_json::<NavFile>(&a.trajectory)? {
        NavFile::Many { trajectories } => trajectories,
        NavFile::One { trajectory } | NavFile::Bare(trajectory) => vec![trajectory],
    };
    if episodes.is_empty() {
        return Err(CliError::Core(Error::EmptyPath));
    }
    let per: Vec<NavMetrics> = episodes.iter().map(nav_metrics).collect::<Result<_, _>>()?;
    let n = per.len() as f64;
    let mean = |f: fn(&NavMetrics) -> f64| per.iter().map(f).sum::<f64>() / n;
    let report = json!({
        "episodes": per,
        "mean": { "sr": mean(|m| m.sr), "spl": mean(|m| m.spl), "ndtw": mean(|m| m.ndtw),
                  "tl": mean(|m| m.tl), "ne": mean(|m| m.ne) },
    });
    emit(&report, &a.out.out, a.out.common.force)
}

/// Octree rows must get cheaper relative to their matched dense grid as
/// the level grows, and stay below the dense grid outright.
fn bench_checks(rows: &[BenchRow]) -> (bool, bool) {
    let oct: Vec<&BenchRow> = rows.iter().filter(|r| r.grid_type == "octree").collect();
    let ratios: Vec<f64> = oct.iter().filter_map(|r| r.eval_ratio).collect();
    let decreasing = ratios.windows(2).all(|w| w[1] < w[0]);
    let below = oct.iter().all(|r| r.eval_ratio.is_some_and(|x| x < 1.0));
    (decreasing, below)
}

fn bench(a: BenchArgs) -> CliResult {
    let sdf = make_analytic_sdf(&load_shape(&a.shape)?)?;
    let bounds = parse_bounds(&a.bounds)?.unwrap_or(Aabb::cube(1.0));
    let rows = bench_octree(&sdf, &bounds, a.band)?;
    let (decreasing, below) = bench_checks(&rows);
    let report = json!({
        "rows": rows,
        "checks": { "eval_ratio_strictly_decreasing": decreasing, "octree_below_matched_dense": below },
    });
    emit(&report, &a.out.out, a.out.common.force)?;
    if !(decreasing && below) {
        return Err(CliError::Check("octree efficiency checks failed".into()));
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct FrameFile {
    camera: Camera,
    depth: Vec<f64>,
    semantics: Vec<u32>,
}

fn semmap(a: SemmapArgs) -> CliResult {
    check_output(&a.out, a.common.force)?;
    let frame: FrameFile = read_json(&a.frame)?;
    let cfg = SemanticMapConfig {
        r: a.r,
        cell_size: a.cell_size,
        height_min: a.height_min,
        height_max: a.height_max,
        classes: a.classes,
    };
    let map = build_semantic_map(&frame.depth, &frame.semantics, &frame.camera.intrinsics, &frame.camera.pose, &cfg)?;
    write_nfvg(&a.out, &map.to_grid()?)?;
    println!("{}", a.out.display());
    Ok(())
}
