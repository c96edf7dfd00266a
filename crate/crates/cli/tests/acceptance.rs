//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use radiant_core::fields::{make_analytic_sdf, make_constant_field, ConstantField, GridField, Shape, SolidField};
use radiant_core::grid::{axis_directions, sample_grid};
use radiant_core::io::{decode_nfvg, decode_ply, encode_nfvg, encode_ply, PointCloud};
use radiant_core::maps::{
    build_semantic_map, collapse_to_triplanes, detect_peaks, sample_triplane, splat_heatmap, SemanticMapConfig,
};
use radiant_core::masking::{psnr3d, recon_losses, PatchMask};
use radiant_core::math::{Intrinsics, Pose, Ray, Rotation3};
use radiant_core::metrics::{
    average_precision, chamfer, detection_ap, iou3d, nav_metrics, pose_ap, pose_errors, voxel_label_metrics,
};
use radiant_core::octree::{dense_extract, extract_surface};
use radiant_core::render::{composite, render_composed, render_ray, render_ray_nearfar, stratified_samples};
use radiant_core::{Aabb, LodConfig, OrientedBox3, PoseRecord, RenderConfig, SdfField, Trajectory, Vec3, VoxelGrid};

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn single_thread<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("thread pool").install(f)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// Box half extents sit at odd multiples of a quarter LoD6 cell away from the
// cell-center lattice, so no lattice point lands on an interior medial plane
// where the finite-difference normal is undefined.
fn box_fixture() -> Shape {
    let c = 1.0 / 32.0;
    Shape::Box { center: Vec3::ZERO, half_extents: Vec3::new(12.5 * c, (10.0 + 1.0 / 6.0) * c, (7.0 + 5.0 / 6.0) * c) }
}

fn sphere_fixture() -> Shape {
    Shape::Sphere { center: Vec3::ZERO, radius: 0.5 }
}

fn union_fixture() -> Shape {
    Shape::Union {
        shapes: vec![
            Shape::Sphere { center: Vec3::new(-0.3, 0.0, 0.0), radius: 0.35 },
            Shape::Box { center: Vec3::new(0.35, 0.1, 0.0), half_extents: Vec3::new(0.25, 0.2, 0.3) },
        ],
    }
}

fn criterion_1() -> Outcome {
    let cfg = LodConfig::default();
    let edge = cfg.cell_size(cfg.lod_end);
    let mut notes = Vec::new();
    for (name, shape) in [("sphere", sphere_fixture()), ("box", box_fixture())] {
        let sdf = make_analytic_sdf(&shape).map_err(|e| e.to_string())?;
        let start = Instant::now();
        let (oct, _) = single_thread(|| extract_surface(&sdf, &cfg)).map_err(|e| e.to_string())?;
        let elapsed = start.elapsed().as_secs_f64();
        let (dense, _) = dense_extract(&sdf, &cfg.bounds, 64, 0.03).map_err(|e| e.to_string())?;
        let a: Vec<Vec3> = oct.iter().map(|s| s.position).collect();
        let b: Vec<Vec3> = dense.iter().map(|s| s.position).collect();
        let cd = chamfer(&a, &b).map_err(|e| e.to_string())?;
        let worst = a.iter().chain(&b).map(|p| sdf.eval(*p).abs()).fold(0.0, f64::max);
        ensure(cd <= 2.0 * edge, || format!("{name}: chamfer {cd:.3e} > {:.3e}", 2.0 * edge))?;
        ensure(worst <= 1e-3, || format!("{name}: point {worst:.3e} off the surface"))?;
        ensure(elapsed < 10.0, || format!("{name}: {elapsed:.2}s single-threaded"))?;
        notes.push(format!("{name} chamfer={cd:.2e} max|sdf|={worst:.1e} t={elapsed:.2}s"));
    }
    Ok(notes.join("; "))
}

fn criterion_2() -> Outcome {
    let cfg = LodConfig::default();
    let dense = 64u64.pow(3) as f64;
    let mut notes = Vec::new();
    for (name, shape) in [("sphere", sphere_fixture()), ("box", box_fixture()), ("union", union_fixture())] {
        let sdf = make_analytic_sdf(&shape).map_err(|e| e.to_string())?;
        let (_, stats) = extract_surface(&sdf, &cfg).map_err(|e| e.to_string())?;
        let ratio = stats.total_sdf_evals as f64 / dense;
        ensure(ratio <= 0.15, || format!("{name}: LoD6 evals {} = {ratio:.4} of 64^3", stats.total_sdf_evals))?;
        notes.push(format!("{name}={ratio:.4}"));
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for name in ["sphere", "box", "union"] {
        let out = dir.path().join(format!("bench_{name}.json"));
        let run = radiant(&["bench-octree", "--shape", name, "--out", path_str(&out)], &[]);
        ensure(run.status == Some(0), || format!("bench-octree {name} exited {:?}: {}", run.status, run.stderr))?;
        let report: Value = read_json_value(&out)?;
        ensure(report["checks"]["eval_ratio_strictly_decreasing"] == json!(true), || {
            format!("{name}: eval ratio not strictly decreasing")
        })?;
        let rows = report["rows"].as_array().ok_or("rows missing")?;
        let dense60 = rows.iter().find(|r| r["grid_type"] == "ordinary" && r["resolution"] == 60);
        ensure(dense60.is_some_and(|r| r["input_points"] == 216000), || format!("{name}: dense 60 row wrong"))?;
    }
    notes.push("bench-octree monotone on all fixtures".into());
    Ok(notes.join(" "))
}

fn smooth_sigma(t: f64) -> f64 {
    1.0 + 0.5 * (3.0 * t).sin()
}

fn smooth_integral(a: f64, b: f64) -> f64 {
    (b - a) - ((3.0 * b).cos() - (3.0 * a).cos()) / 6.0
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut r = rng(3);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let n = r.random_range(1..96);
        let colors: Vec<[f64; 3]> = (0..n).map(|_| [r.random(), r.random(), r.random()]).collect();
        let sigmas: Vec<f64> = (0..n).map(|_| r.random_range(0.0..20.0)).collect();
        let deltas: Vec<f64> = (0..n).map(|_| r.random_range(1e-4..0.2)).collect();
        let c = composite(&colors, &sigmas, &deltas).map_err(|e| e.to_string())?;
        let sum: f64 = c.weights.iter().sum();
        ensure(c.acc <= 1.0 + 1e-9, || format!("acc {} > 1", c.acc))?;
        worst = worst.max((sum - c.acc).abs());
    }
    ensure(worst <= 1e-9, || format!("|sum w - acc| = {worst:.2e}"))?;

    // rendered rays through a solid sphere obey the same bound
    let solid = SolidField::new(make_analytic_sdf(&sphere_fixture()).map_err(|e| e.to_string())?, 30.0)
        .map_err(|e| e.to_string())?;
    let cfg = RenderConfig { n_coarse: 32, ..Default::default() };
    for _ in 0..200 {
        let d = Vec3::new(r.random_range(-0.2..0.2), r.random_range(-0.2..0.2), 1.0);
        let ray = Ray::new(Vec3::new(0.0, 0.0, -1.5), d).map_err(|e| e.to_string())?;
        let out = render_ray(&solid, &ray, &cfg).map_err(|e| e.to_string())?;
        ensure(out.acc <= 1.0 + 1e-9, || format!("rendered acc {}", out.acc))?;
    }

    let mut errors = Vec::new();
    for n in [32usize, 64, 128, 256] {
        let cfg = RenderConfig { near: 0.1, far: 3.0, n_coarse: n, ..Default::default() };
        let exact = (-smooth_integral(cfg.near, cfg.far)).exp();
        let trials = 400;
        let mut total = 0.0;
        for seed in 0..trials {
            let ray = Ray::new(Vec3::ZERO, Vec3::Z).map_err(|e| e.to_string())?;
            let s = stratified_samples(&ray, &RenderConfig { seed, ..cfg }).map_err(|e| e.to_string())?;
            let sig: Vec<f64> = s.t_values.iter().map(|&t| smooth_sigma(t)).collect();
            let c = composite(&vec![[0.0; 3]; n], &sig, &s.deltas).map_err(|e| e.to_string())?;
            total += ((1.0 - c.acc) - exact).abs();
        }
        errors.push(total / trials as f64);
    }
    for w in errors.windows(2) {
        ensure(w[1] <= 0.6 * w[0], || format!("transmittance errors {errors:?} not contracting"))?;
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 5.0, || format!("{elapsed:.2}s"))?;
    let ratios: Vec<String> = errors.windows(2).map(|w| format!("{:.3}", w[1] / w[0])).collect();
    Ok(format!("max|sum w - acc|={worst:.1e}, error ratios {} , t={elapsed:.2}s", ratios.join("/")))
}

fn random_rgba_grid(r: &mut ChaCha8Rng, dims: [usize; 3], bounds: Aabb) -> VoxelGrid {
    let n = dims.iter().product::<usize>();
    let mut data = Vec::with_capacity(4 * n);
    for _ in 0..n {
        data.extend([r.random::<f64>(), r.random(), r.random(), r.random_range(0.0..0.99)]);
    }
    VoxelGrid::from_data(dims, 4, bounds, data).expect("grid")
}

fn criterion_4() -> Outcome {
    let mut r = rng(4);
    let mut worst_alpha: f64 = 0.0;
    for trial in 0..5 {
        let bounds = Aabb::new(Vec3::new(-1.0, -0.5, 0.0), Vec3::new(1.0 + trial as f64 * 0.1, 0.5, 0.75));
        let g = random_rgba_grid(&mut r, [16; 3], bounds);
        let field = GridField::with_delta(g.clone(), 0.01).map_err(|e| e.to_string())?;
        let back = sample_grid(&field, &bounds, [16; 3], &axis_directions(), 0.01).map_err(|e| e.to_string())?;
        for (a, b) in g.data().chunks(4).zip(back.data().chunks(4)) {
            ensure(a[..3] == b[..3], || format!("rgb {:?} came back as {:?}", &a[..3], &b[..3]))?;
            worst_alpha = worst_alpha.max((a[3] - b[3]).abs());
        }
    }
    ensure(worst_alpha <= 1e-9, || format!("alpha error {worst_alpha:.2e}"))?;
    Ok(format!("5 grids of 16^3, rgb exact, max alpha error {worst_alpha:.1e}"))
}

fn criterion_5() -> Outcome {
    let dims = [40, 40, 40];
    let m = PatchMask::generate(dims, 4, 0.75, 11).map_err(|e| e.to_string())?;
    ensure(m.masked.len() == 1000 && m.n_visible() == 250, || {
        format!("{} patches, {} visible", m.masked.len(), m.n_visible())
    })?;

    let mut r = rng(5);
    let target = random_rgba_grid(&mut r, dims, Aabb::cube(1.0));
    let same = recon_losses(&target, &target, &m, 0.01).map_err(|e| e.to_string())?;
    ensure(same.rgb == 0.0 && same.alpha == 0.0, || format!("identical grids: {same:?}"))?;

    // perturbing only visible voxels leaves the losses at zero
    let mut visible_only = target.clone();
    let mut masked_only = target.clone();
    let mut touched_masked = false;
    for x in 0..40 {
        for y in 0..40 {
            for z in 0..40 {
                let g = if m.is_voxel_masked(x, y, z) { &mut masked_only } else { &mut visible_only };
                if m.is_voxel_masked(x, y, z) && !touched_masked {
                    touched_masked = true;
                    let v = g.get(x, y, z, 3);
                    g.set(x, y, z, 3, v + 0.5);
                } else if !m.is_voxel_masked(x, y, z) {
                    let v = g.get(x, y, z, 0);
                    g.set(x, y, z, 0, v + 0.5);
                }
            }
        }
    }
    let vis = recon_losses(&visible_only, &target, &m, 0.01).map_err(|e| e.to_string())?;
    ensure(vis.rgb == 0.0 && vis.alpha == 0.0, || format!("visible-only change: {vis:?}"))?;
    let msk = recon_losses(&masked_only, &target, &m, 0.01).map_err(|e| e.to_string())?;
    ensure(msk.alpha > 0.0, || format!("masked change not seen: {msk:?}"))?;

    let mut worst: f64 = 0.0;
    for (mse, db) in [(0.01, 20.0), (0.1, 10.0), (0.001, 30.0), (0.25, -10.0 * 0.25f64.log10())] {
        let zeros = VoxelGrid::zeros([2, 2, 2], 4, Aabb::cube(1.0)).map_err(|e| e.to_string())?;
        let mut off = zeros.clone();
        off.data_mut().iter_mut().for_each(|v| *v = f64::sqrt(mse));
        let p = psnr3d(&off, &zeros).map_err(|e| e.to_string())?;
        worst = worst.max((p - db).abs());
    }
    ensure(worst <= 1e-9, || format!("psnr error {worst:.2e}"))?;
    Ok(format!("250/1000 visible, loss zero iff masked voxels match, psnr error {worst:.1e}"))
}

/// Fraction of box `a` that lies inside box `b`, from one jittered sample
/// per cell of an `n³` lattice over `a`.
fn mc_intersection(a: &OrientedBox3, b: &OrientedBox3, n: usize, r: &mut ChaCha8Rng) -> f64 {
    let (c, s) = (a.yaw.cos(), a.yaw.sin());
    let mut inside = 0usize;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let u = [
                    (i as f64 + r.random::<f64>()) / n as f64 - 0.5,
                    (j as f64 + r.random::<f64>()) / n as f64 - 0.5,
                    (k as f64 + r.random::<f64>()) / n as f64 - 0.5,
                ];
                let lx = u[0] * a.size.x;
                let ly = u[1] * a.size.y;
                let p =
                    Vec3::new(a.center.x + c * lx - s * ly, a.center.y + s * lx + c * ly, a.center.z + u[2] * a.size.z);
                if b.contains(p) {
                    inside += 1;
                }
            }
        }
    }
    a.volume() * inside as f64 / (n * n * n) as f64
}

fn random_box(r: &mut ChaCha8Rng) -> OrientedBox3 {
    OrientedBox3::new(
        Vec3::new(r.random_range(-0.3..0.3), r.random_range(-0.3..0.3), r.random_range(-0.2..0.2)),
        Vec3::new(r.random_range(0.3..1.0), r.random_range(0.3..1.0), r.random_range(0.3..1.0)),
        r.random_range(-3.1..3.1),
    )
}

fn criterion_6() -> Outcome {
    // module identities
    let o = vec![Vec3::ZERO];
    ensure(chamfer(&o, &[Vec3::X]).ok() == Some(2.0), || "chamfer origin/x".into())?;
    ensure(chamfer(&o, &o).ok() == Some(0.0), || "chamfer identical".into())?;
    let unit = OrientedBox3::new(Vec3::ZERO, Vec3::splat(1.0), 0.0);
    let shifted = OrientedBox3::new(Vec3::new(0.5, 0.0, 0.0), Vec3::splat(1.0), 0.0);
    ensure((iou3d(&unit, &shifted) - 1.0 / 3.0).abs() < 1e-12, || "iou offset cubes".into())?;
    ensure(iou3d(&unit, &unit) == 1.0, || "iou identical".into())?;
    let gts = vec![unit, OrientedBox3::new(Vec3::new(5.0, 0.0, 0.0), Vec3::splat(1.0), 0.0)];
    let preds =
        vec![unit.with_score(0.9), OrientedBox3::new(Vec3::new(-5.0, 0.0, 0.0), Vec3::splat(1.0), 0.0).with_score(0.1)];
    let ap = detection_ap(&preds, &gts, 0.5).map_err(|e| e.to_string())?;
    ensure(ap.ap == 0.5 && ap.recall == 0.5, || format!("hand AP case {ap:?}"))?;
    ensure(average_precision(&[], 2).ap == 0.0, || "empty AP".into())?;
    let id = PoseRecord::new(Rotation3::identity(), Vec3::ZERO);
    let rz = PoseRecord::new(Rotation3::rot_z(30f64.to_radians()), Vec3::ZERO);
    let (deg, _) = pose_errors(&rz, &id, None).map_err(|e| e.to_string())?;
    ensure((deg - 30.0).abs() < 1e-9, || format!("Rz(30) error {deg}"))?;
    let ry = PoseRecord::new(Rotation3::rot_y(73f64.to_radians()), Vec3::ZERO);
    let (deg, _) = pose_errors(&ry, &id, Some(Vec3::Y)).map_err(|e| e.to_string())?;
    ensure(deg.abs() < 1e-9, || format!("symmetric Ry(73) error {deg}"))?;
    let pap = pose_ap(&[id], &[id], 5.0, 5.0, &Default::default()).map_err(|e| e.to_string())?;
    ensure(pap == 1.0, || "perfect pose AP".into())?;
    let vm = voxel_label_metrics(&[1, 1, 1, 1], &[0, 0, 1, 1], 2).map_err(|e| e.to_string())?;
    ensure(vm.acc == 0.5 && vm.macc == 0.5 && vm.miou == 0.25, || format!("voxel metrics {vm:?}"))?;
    let reference = vec![Vec3::ZERO, Vec3::new(10.0, 0.0, 0.0)];
    let t = Trajectory {
        positions: reference.clone(),
        reference: reference.clone(),
        goal: reference[1],
        success_threshold: 3.0,
    };
    let nm = nav_metrics(&t).map_err(|e| e.to_string())?;
    ensure(nm.sr == 1.0 && nm.spl == 1.0 && nm.ndtw == 1.0 && nm.ne == 0.0, || format!("nav identity {nm:?}"))?;
    let detour = Trajectory {
        positions: vec![Vec3::ZERO, Vec3::new(5.0, 5.0 * 3f64.sqrt(), 0.0), Vec3::new(10.0, 0.0, 0.0)],
        ..t.clone()
    };
    let nm = nav_metrics(&detour).map_err(|e| e.to_string())?;
    ensure((nm.spl - 0.5).abs() < 1e-12, || format!("detour SPL {}", nm.spl))?;

    // Monte Carlo oracle
    let start = Instant::now();
    let mut r = rng(6);
    let mut worst: f64 = 0.0;
    let mut overlapping = 0;
    for _ in 0..100 {
        let (a, b) = (random_box(&mut r), random_box(&mut r));
        let inter = mc_intersection(&a, &b, 100, &mut r);
        let oracle = inter / (a.volume() + b.volume() - inter);
        if oracle > 0.0 {
            overlapping += 1;
        }
        worst = worst.max((iou3d(&a, &b) - oracle).abs());
    }
    let mc_time = start.elapsed().as_secs_f64();
    ensure(worst <= 1e-3, || format!("IoU vs Monte Carlo {worst:.2e}"))?;
    ensure(mc_time < 60.0, || format!("Monte Carlo took {mc_time:.1}s"))?;

    // symmetric pose invariance
    let mut worst_sym: f64 = 0.0;
    for _ in 0..200 {
        let axis = Vec3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))
            .normalized()
            .unwrap_or(Vec3::Y);
        let rot = |r: &mut ChaCha8Rng| {
            let a = Vec3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
            Rotation3::from_axis_angle(a.normalized().unwrap_or(Vec3::X), r.random_range(0.0..3.0))
        };
        let (rp, rg) = (rot(&mut r), rot(&mut r));
        let spin = Rotation3::from_axis_angle(axis, r.random_range(-3.1..3.1));
        let pred = PoseRecord::new(rp, Vec3::ZERO);
        let gt = PoseRecord::new(rg, Vec3::ZERO);
        let base = pose_errors(&pred, &gt, Some(axis)).map_err(|e| e.to_string())?.0;
        let spun_pred = PoseRecord::new(rp.compose(&spin), Vec3::ZERO);
        let spun_gt = PoseRecord::new(rg.compose(&spin), Vec3::ZERO);
        let e1 = pose_errors(&spun_pred, &gt, Some(axis)).map_err(|e| e.to_string())?.0;
        let e2 = pose_errors(&pred, &spun_gt, Some(axis)).map_err(|e| e.to_string())?.0;
        worst_sym = worst_sym.max((e1 - base).abs()).max((e2 - base).abs());
    }
    ensure(worst_sym <= 1e-9, || format!("symmetric spin changed error by {worst_sym:.2e} deg"))?;
    Ok(format!(
        "identities ok; IoU vs MC max {worst:.1e} over 100 pairs ({overlapping} overlapping, {mc_time:.1}s); spin invariance {worst_sym:.1e}"
    ))
}

fn criterion_7() -> Outcome {
    let mut r = rng(7);
    let sigma = 3.0;
    let mut planted = BTreeSet::new();
    for i in 0..10 {
        for j in 0..10 {
            let u = 20 + 40 * i + r.random_range(-5..=5);
            let v = 20 + 40 * j + r.random_range(-5..=5);
            planted.insert((u as usize, v as usize));
        }
    }
    let centers: Vec<(f64, f64)> = planted.iter().map(|&(u, v)| (u as f64, v as f64)).collect();
    let h = splat_heatmap(&centers, &vec![sigma; centers.len()], (400, 400)).map_err(|e| e.to_string())?;
    let found: BTreeSet<(usize, usize)> = detect_peaks(&h, 0.3).iter().map(|p| (p.u, p.v)).collect();
    ensure(found == planted, || {
        format!(
            "recovered {} of {} centers, {} peaks",
            found.intersection(&planted).count(),
            planted.len(),
            found.len()
        )
    })?;

    // camera 2 m above the floor looking straight down; pixel (7, 4) at depth
    // 1.75 is the point (0.35, 0.175, 0.25), i.e. cell (40 + 3, 40 + 1)
    let k = Intrinsics::new(10.0, 10.0, 5.0, 5.0, 11, 11).map_err(|e| e.to_string())?;
    let pose = Pose::new(Rotation3::rot_x(std::f64::consts::PI), Vec3::new(0.0, 0.0, 2.0));
    let mut depth = vec![0.0; 121];
    let mut sem = vec![0u32; 121];
    depth[4 * 11 + 7] = 1.75;
    sem[4 * 11 + 7] = 2;
    let cfg = SemanticMapConfig { classes: 3, ..Default::default() };
    let m = build_semantic_map(&depth, &sem, &k, &pose, &cfg).map_err(|e| e.to_string())?;
    ensure(m.count_set() == 1 && m.bit(43, 41, 2), || format!("semantic map: {} bits set", m.count_set()))?;

    let mut v = VoxelGrid::zeros([8; 3], 3, Aabb::new(Vec3::new(-1.0, 0.0, 2.0), Vec3::new(1.0, 4.0, 3.0)))
        .map_err(|e| e.to_string())?;
    v.data_mut().iter_mut().for_each(|e| *e = r.random_range(-1.0..1.0));
    let t = collapse_to_triplanes(&v);
    let mut worst: f64 = 0.0;
    for x in 0..8 {
        for y in 0..8 {
            for z in 0..8 {
                let (f, clamped) = sample_triplane(&t, v.voxel_center(x, y, z));
                ensure(!clamped, || "grid node flagged as clamped".into())?;
                for c in 0..3 {
                    let xy: f64 = (0..8).map(|k| v.get(x, y, k, c)).sum::<f64>() / 8.0;
                    let xz: f64 = (0..8).map(|k| v.get(x, k, z, c)).sum::<f64>() / 8.0;
                    let yz: f64 = (0..8).map(|k| v.get(k, y, z, c)).sum::<f64>() / 8.0;
                    for (got, want) in [(f[c], xy), (f[3 + c], xz), (f[6 + c], yz)] {
                        worst = worst.max((got - want).abs());
                    }
                }
            }
        }
    }
    ensure(worst <= 1e-12, || format!("triplane vs axis mean {worst:.2e}"))?;
    Ok(format!("100/100 peaks, semmap cell (43,41), triplane error {worst:.1e}"))
}

fn criterion_8() -> Outcome {
    let near = SolidField::new(
        make_analytic_sdf(&Shape::Sphere { center: Vec3::new(0.0, 0.0, 0.3), radius: 0.2 })
            .map_err(|e| e.to_string())?,
        20.0,
    )
    .map_err(|e| e.to_string())?;
    let far = make_constant_field([0.2, 0.4, 0.9], 0.5).map_err(|e| e.to_string())?;
    let object = make_constant_field([1.0, 0.0, 0.0], 8.0).map_err(|e| e.to_string())?;
    let empty = ConstantField::empty();
    let cfg = RenderConfig { near: 0.05, far: 2.0, n_coarse: 48, ..Default::default() };
    let mut r = rng(8);
    let pruning_box = OrientedBox3::new(Vec3::new(0.0, 0.0, 0.3), Vec3::splat(0.5), 0.4);
    let mut worst: f64 = 0.0;
    let mut visible = 0;
    for _ in 0..500 {
        let d = Vec3::new(r.random_range(-0.15..0.15), r.random_range(-0.15..0.15), 1.0);
        let ray = Ray::new(Vec3::new(0.0, 0.0, -0.5), d).map_err(|e| e.to_string())?;
        let a = render_composed(&object, &near, &far, &[], &ray, &cfg).map_err(|e| e.to_string())?;
        let b = render_ray_nearfar(&near, &far, &ray, &cfg).map_err(|e| e.to_string())?;
        let same =
            a.color.iter().zip(&b.color).all(|(x, y)| x.to_bits() == y.to_bits()) && a.acc.to_bits() == b.acc.to_bits();
        ensure(same, || format!("empty boxes differ: {a:?} vs {b:?}"))?;

        // everything in the near field lies inside the box; with an empty
        // object the ray only sees the far background
        let pruned = render_composed(&empty, &near, &far, &[pruning_box], &ray, &cfg).map_err(|e| e.to_string())?;
        let background = render_ray_nearfar(&empty, &far, &ray, &cfg).map_err(|e| e.to_string())?;
        if (b.acc_near - background.acc_near).abs() > 1e-3 {
            visible += 1;
        }
        for (x, y) in pruned.color.iter().zip(&background.color) {
            worst = worst.max((x - y).abs());
        }
        worst = worst.max((pruned.acc - background.acc).abs());
    }
    ensure(visible > 100, || format!("only {visible} rays see the near content, the pruning check is vacuous"))?;
    ensure(worst <= 1e-12, || format!("pruned vs background {worst:.2e}"))?;
    Ok(format!(
        "500 rays bit-equal with no boxes; pruned vs background {worst:.1e} ({visible} rays hit pruned content)"
    ))
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

struct Run {
    status: Option<i32>,
    stdout: Vec<u8>,
    stderr: String,
}

fn radiant(args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_radiant"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("spawn radiant");
    Run { status: out.status.code(), stdout: out.stdout, stderr: String::from_utf8_lossy(&out.stderr).into_owned() }
}

fn read_json_value(p: &Path) -> Result<Value, String> {
    let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.remove("time_s");
            m.remove("wall_time_s");
            m.values_mut().for_each(strip_timing);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

/// Bytes that must match between runs: raw bytes for binary and text
/// outputs, timing-free JSON for reports.
fn comparable(p: &Path) -> Result<Vec<u8>, String> {
    let bytes = std::fs::read(p).map_err(|e| format!("{}: {e}", p.display()))?;
    if p.extension().is_some_and(|e| e == "json") {
        let mut v: Value = serde_json::from_slice(&bytes).map_err(|e| e.to_string())?;
        strip_timing(&mut v);
        return Ok(v.to_string().into_bytes());
    }
    Ok(bytes)
}

fn write_inputs(dir: &Path) -> Result<(), String> {
    let w = |name: &str, v: Value| std::fs::write(dir.join(name), v.to_string()).map_err(|e| e.to_string());
    let camera = json!({
        "intrinsics": {"fx": 40.0, "fy": 40.0, "cx": 15.5, "cy": 11.5, "width": 32, "height": 24},
        "pose": {"rotation": [1, 0, 0, 0, 1, 0, 0, 0, 1], "translation": [0.0, 0.0, -0.8]}
    });
    let side = json!({
        "intrinsics": {"fx": 40.0, "fy": 40.0, "cx": 15.5, "cy": 11.5, "width": 32, "height": 24},
        "pose": {"rotation": [0, 0, -1, 0, 1, 0, 1, 0, 0], "translation": [0.7, 0.1, 0.2]}
    });
    w("cameras.json", json!([camera, side]))?;
    w(
        "scene.json",
        json!({
            "cameras": [camera, side],
            "near": {"type": "solid", "shape": {"type": "sphere", "center": [0, 0, 0.2], "radius": 0.3}, "sigma": 25.0},
            "far": {"type": "constant", "color": [0.1, 0.3, 0.8], "sigma": 0.8},
            "object": {"type": "constant", "color": [0.9, 0.1, 0.1], "sigma": 10.0},
            "boxes": [{"center": [0.2, 0.0, 0.2], "size": [0.2, 0.2, 0.2], "yaw": 0.3}],
            "config": {"n_coarse": 24, "seed": 5}
        }),
    )?;
    let b =
        |x: f64, s: f64, c: u32| json!({"center": [x, 0, 0], "size": [1, 1, 1], "yaw": 0.2, "class": c, "score": s});
    w("pred_boxes.json", json!({"boxes": [b(0.1, 0.9, 0), b(3.0, 0.5, 1), b(7.0, 0.4, 0)]}))?;
    w("gt_boxes.json", json!({"boxes": [b(0.0, 1.0, 0), b(3.1, 1.0, 1)]}))?;
    let p = |rot: Value, t: f64, s: f64| json!({"rotation": rot, "translation": [t, 0, 0], "class": 1, "score": s});
    let id = json!([1, 0, 0, 0, 1, 0, 0, 0, 1]);
    let c = 0.3f64.cos();
    let s = 0.3f64.sin();
    let ry = json!([c, 0, s, 0, 1, 0, -s, 0, c]);
    w("pred_poses.json", json!({"poses": [p(ry.clone(), 0.01, 0.9), p(id.clone(), 1.2, 0.3)]}))?;
    w(
        "gt_poses.json",
        json!({"poses": [p(id.clone(), 0.0, 1.0), p(id, 1.0, 1.0)], "symmetric_axes": {"1": [0, 1, 0]}}),
    )?;
    w("pred_labels.json", json!({"labels": [0, 1, 1, 2, 2, 2, 0, 1]}))?;
    w("gt_labels.json", json!({"labels": [0, 1, 2, 2, 2, 1, 0, 0]}))?;
    w(
        "trajectories.json",
        json!({"trajectories": [
            {"positions": [[0, 0, 0], [1, 1, 0], [4, 0, 0]], "reference": [[0, 0, 0], [4, 0, 0]], "goal": [4, 0, 0]},
            {"positions": [[0, 0, 0], [0, 2, 0]], "reference": [[0, 0, 0], [0, 9, 0]], "goal": [0, 9, 0]}
        ]}),
    )?;
    let mut depth = vec![0.0; 121];
    let mut sem = vec![0u32; 121];
    for (i, d) in depth.iter_mut().enumerate() {
        *d = 1.0 + (i % 7) as f64 * 0.15;
        sem[i] = (i % 3) as u32;
    }
    w(
        "frame.json",
        json!({
            "camera": {"intrinsics": {"fx": 10.0, "fy": 10.0, "cx": 5.0, "cy": 5.0, "width": 11, "height": 11},
                       "pose": {"rotation": [1, 0, 0, 0, -1, 0, 0, 0, -1], "translation": [0, 0, 2]}},
            "depth": depth, "semantics": sem
        }),
    )?;
    Ok(())
}

/// Every subcommand with its arguments; `{in}` is the input directory and
/// `{out}` the per-run output directory. Outputs are the files compared.
fn cli_cases() -> Vec<(&'static str, Vec<&'static str>, Vec<&'static str>)> {
    vec![
        (
            "voxelize",
            vec![
                "voxelize",
                "--field",
                "union",
                "--dims",
                "24",
                "--cameras",
                "{in}/cameras.json",
                "--out",
                "{out}/grid.nfvg",
            ],
            vec!["grid.nfvg"],
        ),
        (
            "voxelize-pred",
            vec![
                "voxelize",
                "--field",
                "union",
                "--dims",
                "24",
                "--sigma",
                "40",
                "--cameras",
                "{in}/cameras.json",
                "--out",
                "{out}/pred.nfvg",
            ],
            vec!["pred.nfvg"],
        ),
        (
            "extract-surface",
            vec!["extract-surface", "--shape", "union", "--lod-end", "5", "--out", "{out}/surf.ply"],
            vec!["surf.ply", "surf.json"],
        ),
        (
            "extract-surface-dense",
            vec!["extract-surface", "--shape", "box", "--dense", "40", "--out", "{out}/dense.ply"],
            vec!["dense.ply", "dense.json"],
        ),
        (
            "mask",
            vec![
                "mask",
                "--grid",
                "{out}/grid.nfvg",
                "--pred",
                "{out}/pred.nfvg",
                "--patch",
                "4",
                "--seed",
                "9",
                "--out",
                "{out}/masked.nfvg",
                "--mask-out",
                "{out}/mask.json",
            ],
            vec!["masked.nfvg", "mask.json"],
        ),
        (
            "render",
            vec!["render", "--scene", "{in}/scene.json", "--out-dir", "{out}/render"],
            vec!["render/view_000.ppm", "render/view_001.ppm", "render/metrics.json"],
        ),
        (
            "render-grid",
            vec![
                "render",
                "--grid",
                "{out}/grid.nfvg",
                "--width",
                "24",
                "--height",
                "16",
                "--n-coarse",
                "32",
                "--out-dir",
                "{out}/render_grid",
            ],
            vec!["render_grid/view_000.ppm", "render_grid/metrics.json"],
        ),
        (
            "eval-detect",
            vec![
                "eval-detect",
                "--pred",
                "{in}/pred_boxes.json",
                "--gt",
                "{in}/gt_boxes.json",
                "--out",
                "{out}/detect.json",
            ],
            vec!["detect.json"],
        ),
        (
            "eval-pose",
            vec![
                "eval-pose",
                "--pred",
                "{in}/pred_poses.json",
                "--gt",
                "{in}/gt_poses.json",
                "--out",
                "{out}/pose.json",
            ],
            vec!["pose.json"],
        ),
        (
            "eval-voxels",
            vec![
                "eval-voxels",
                "--pred",
                "{in}/pred_labels.json",
                "--gt",
                "{in}/gt_labels.json",
                "--classes",
                "3",
                "--out",
                "{out}/voxels.json",
            ],
            vec!["voxels.json"],
        ),
        (
            "eval-nav",
            vec!["eval-nav", "--trajectory", "{in}/trajectories.json", "--out", "{out}/nav.json"],
            vec!["nav.json"],
        ),
        ("bench-octree", vec!["bench-octree", "--shape", "sphere", "--out", "{out}/bench.json"], vec!["bench.json"]),
        (
            "semmap",
            vec!["semmap", "--frame", "{in}/frame.json", "--classes", "3", "--r", "20", "--out", "{out}/semmap.nfvg"],
            vec!["semmap.nfvg"],
        ),
    ]
}

fn run_cli_suite(input: &Path, out: &Path, threads: &str) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut collected = Vec::new();
    for (name, args, outputs) in cli_cases() {
        let args: Vec<String> =
            args.iter().map(|a| a.replace("{in}", path_str(input)).replace("{out}", path_str(out))).collect();
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let run = radiant(&refs, &[("RADIANT_THREADS", threads)]);
        ensure(run.status == Some(0), || format!("{name} exited {:?}: {}", run.status, run.stderr))?;
        let stdout = String::from_utf8_lossy(&run.stdout).replace(path_str(out), "{out}");
        collected.push((format!("{name}:stdout"), stdout.into_bytes()));
        for o in outputs {
            collected.push((format!("{name}:{o}"), comparable(&out.join(o))?));
        }
    }
    Ok(collected)
}

fn criterion_9() -> Outcome {
    let mut r = rng(9);
    let g = random_rgba_grid(&mut r, [7, 5, 3], Aabb::new(Vec3::new(-1.0, -2.0, 0.5), Vec3::new(1.5, 2.0, 0.75)));
    let bytes = encode_nfvg(&g);
    let back = decode_nfvg(&bytes).map_err(|e| e.to_string())?;
    ensure(encode_nfvg(&back) == bytes, || "NFVG re-encode differs".into())?;
    let twice = decode_nfvg(&encode_nfvg(&back)).map_err(|e| e.to_string())?;
    ensure(twice.data().iter().zip(back.data()).all(|(a, b)| a.to_bits() == b.to_bits()), || {
        "NFVG decode unstable".into()
    })?;

    let f32v = |r: &mut ChaCha8Rng| r.random_range(-2.0f32..2.0) as f64;
    let cloud = PointCloud {
        positions: (0..500).map(|_| Vec3::new(f32v(&mut r), f32v(&mut r), f32v(&mut r))).collect(),
        normals: (0..500).map(|_| Vec3::new(f32v(&mut r), f32v(&mut r), f32v(&mut r))).collect(),
    };
    let text = encode_ply(&cloud).map_err(|e| e.to_string())?;
    let back = decode_ply(&text).map_err(|e| e.to_string())?;
    let bit_eq = |a: &[Vec3], b: &[Vec3]| {
        a.iter().zip(b).all(|(p, q)| p.to_array().iter().zip(q.to_array()).all(|(x, y)| x.to_bits() == y.to_bits()))
    };
    ensure(bit_eq(&cloud.positions, &back.positions) && bit_eq(&cloud.normals, &back.normals), || {
        "PLY round trip changed values".into()
    })?;
    ensure(encode_ply(&back).map_err(|e| e.to_string())? == text, || "PLY re-encode differs".into())?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = dir.path().join("in");
    std::fs::create_dir(&input).map_err(|e| e.to_string())?;
    write_inputs(&input)?;
    let runs: Vec<PathBuf> = ["a", "b", "c"].iter().map(|n| dir.path().join(n)).collect();
    for r in &runs {
        std::fs::create_dir(r).map_err(|e| e.to_string())?;
    }
    let a = run_cli_suite(&input, &runs[0], "4")?;
    let b = run_cli_suite(&input, &runs[1], "4")?;
    let c = run_cli_suite(&input, &runs[2], "1")?;
    for ((name, x), ((_, y), (_, z))) in a.iter().zip(b.iter().zip(&c)) {
        ensure(x == y, || format!("{name} differs between identical runs"))?;
        ensure(x == z, || format!("{name} differs between 4 and 1 threads"))?;
    }
    Ok(format!(
        "NFVG/PLY bit-identical; {} subcommands, {} outputs reproducible across runs and thread counts",
        cli_cases().len(),
        a.len()
    ))
}

fn main() {
    let criteria: [(&str, Check); 9] = [
        ("octree-dense equivalence", criterion_1),
        ("octree efficiency", criterion_2),
        ("compositing conservation and convergence", criterion_3),
        ("grid round trip", criterion_4),
        ("masking exactness", criterion_5),
        ("metric identities and oracles", criterion_6),
        ("projection round trips", criterion_7),
        ("scene-editing consistency", criterion_8),
        ("I/O determinism", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let t = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} PASS {name} ({t:.2}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL {name} ({t:.2}s): {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
