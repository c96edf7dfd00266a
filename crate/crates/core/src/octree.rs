//! Level-of-detail surface extraction from a signed distance field.
//!
//! Starting from a full grid at `lod_start`, cells whose center lies within
//! one cell edge of the surface are kept and split into eight children
//! until `lod_end`; the surviving cell centers are then projected onto the
//! zero level set with `p = x − n·f(x)`. A dense narrow-band extractor is
//! provided as the brute-force reference.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fields::{sdf_normal, SdfField};
use crate::math::{Aabb, Vec3};

pub const MAX_LOD: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LodConfig {
    pub lod_start: u32,
    pub lod_end: u32,
    pub bounds: Aabb,
    /// Keep cells with `sdf < cell` instead of `|sdf| < cell`; this also
    /// keeps the whole interior.
    pub literal_occupancy: bool,
    pub projection_iterations: usize,
}

impl Default for LodConfig {
    fn default() -> Self {
        Self { lod_start: 3, lod_end: 6, bounds: Aabb::cube(1.0), literal_occupancy: false, projection_iterations: 1 }
    }
}

impl LodConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1 <= self.lod_start && self.lod_start <= self.lod_end && self.lod_end <= MAX_LOD) {
            return Err(invalid(format!(
                "need 1 <= lod_start <= lod_end <= {MAX_LOD}, got {}..{}",
                self.lod_start, self.lod_end
            )));
        }
        if !self.bounds.has_volume() {
            return Err(invalid("extraction bounds must have positive volume"));
        }
        if self.projection_iterations == 0 {
            return Err(invalid("projection_iterations must be at least 1"));
        }
        Ok(())
    }

    /// Largest cell edge at `level`.
    pub fn cell_size(&self, level: u32) -> f64 {
        self.bounds.extent().max_element() / (1u64 << level) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSample {
    pub position: Vec3,
    pub normal: Vec3,
    pub sdf_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExtractionStats {
    /// `(level, occupancy evaluations)` in increasing level order.
    pub evals_per_level: Vec<(u32, u64)>,
    pub total_sdf_evals: u64,
    /// Evaluations spent on normals and residuals during projection.
    pub projection_evals: u64,
    pub surface_points: u64,
    /// Points lost to a vanishing gradient during projection.
    pub dropped_points: u64,
    pub no_surface: bool,
    pub wall_time_s: f64,
}

/// Interleaves the low 21 bits of each coordinate, x highest.
pub fn morton3(c: [u32; 3]) -> u64 {
    fn spread(v: u32) -> u64 {
        let mut x = v as u64 & 0x1f_ffff;
        x = (x | x << 32) & 0x1f_0000_0000_ffff;
        x = (x | x << 16) & 0x1f_0000_ff00_00ff;
        x = (x | x << 8) & 0x100f_00f0_0f00_f00f;
        x = (x | x << 4) & 0x10c3_0c30_c30c_30c3;
        x = (x | x << 2) & 0x1249_2492_4924_9249;
        x
    }
    spread(c[0]) << 2 | spread(c[1]) << 1 | spread(c[2])
}

fn cell_center(bounds: &Aabb, level: u32, c: [u32; 3]) -> Vec3 {
    let n = (1u64 << level) as f64;
    let e = bounds.extent();
    let at = |a: usize| bounds.min[a] + (c[a] as f64 + 0.5) * e[a] / n;
    Vec3::new(at(0), at(1), at(2))
}

/// Central-difference step used for normals, relative to the region size.
fn normal_step(bounds: &Aabb) -> f64 {
    1e-5 * bounds.extent().max_element()
}

/// Octree surface extraction. Returns samples in Morton order of their
/// finest-level cells.
pub fn extract_surface<F: SdfField + ?Sized>(f: &F, cfg: &LodConfig) -> Result<(Vec<SurfaceSample>, ExtractionStats)> {
    cfg.validate()?;
    let start = Instant::now();
    let mut stats = ExtractionStats::default();

    let n0 = 1u32 << cfg.lod_start;
    let mut cells: Vec<[u32; 3]> =
        (0..n0).flat_map(|x| (0..n0).flat_map(move |y| (0..n0).map(move |z| [x, y, z]))).collect();
    cells.sort_by_key(|&c| morton3(c));

    let mut kept: Vec<([u32; 3], f64)> = Vec::new();
    for level in cfg.lod_start..=cfg.lod_end {
        let size = cfg.cell_size(level);
        let values: Vec<f64> = cells.par_iter().map(|&c| f.eval(cell_center(&cfg.bounds, level, c))).collect();
        stats.evals_per_level.push((level, cells.len() as u64));
        kept = cells
            .iter()
            .zip(values)
            .filter(|(_, v)| if cfg.literal_occupancy { *v < size } else { v.abs() < size })
            .map(|(c, v)| (*c, v))
            .collect();
        if kept.is_empty() {
            stats.no_surface = true;
            break;
        }
        if level < cfg.lod_end {
            // children of Morton-sorted parents are emitted in Morton order
            cells = kept
                .iter()
                .flat_map(|(c, _)| {
                    (0..8u32).map(move |k| [2 * c[0] + (k >> 2 & 1), 2 * c[1] + (k >> 1 & 1), 2 * c[2] + (k & 1)])
                })
                .collect();
        }
    }
    stats.total_sdf_evals = stats.evals_per_level.iter().map(|e| e.1).sum();

    let points: Vec<Vec3> = if stats.no_surface {
        Vec::new()
    } else {
        kept.iter().map(|(c, _)| cell_center(&cfg.bounds, cfg.lod_end, *c)).collect()
    };
    let h = normal_step(&cfg.bounds);
    let (samples, proj) = project_with_step(f, &points, cfg.projection_iterations, h);
    stats.projection_evals = proj.evals;
    stats.dropped_points = proj.dropped;
    stats.surface_points = samples.len() as u64;
    stats.wall_time_s = start.elapsed().as_secs_f64();
    Ok((samples, stats))
}

/// Brute-force reference: evaluates every cell center of a `resolution³`
/// grid over `bounds`, keeps `|sdf| ≤ band` and projects the survivors.
pub fn dense_extract<F: SdfField + ?Sized>(
    f: &F,
    bounds: &Aabb,
    resolution: usize,
    band: f64,
) -> Result<(Vec<SurfaceSample>, ExtractionStats)> {
    if resolution < 2 {
        return Err(invalid(format!("resolution must be at least 2, got {resolution}")));
    }
    if !(band > 0.0) {
        return Err(invalid(format!("band must be positive, got {band}")));
    }
    if !bounds.has_volume() {
        return Err(invalid("extraction bounds must have positive volume"));
    }
    let start = Instant::now();
    let dims = [resolution; 3];
    let points: Vec<Vec3> = (0..resolution)
        .into_par_iter()
        .flat_map_iter(|x| {
            (0..resolution).flat_map(move |y| {
                (0..resolution).filter_map(move |z| {
                    let p = crate::grid::voxel_center(bounds, dims, [x, y, z]);
                    (f.eval(p).abs() <= band).then_some(p)
                })
            })
        })
        .collect();
    let evals = (resolution as u64).pow(3);
    let (samples, proj) = project_with_step(f, &points, 1, normal_step(bounds));
    let stats = ExtractionStats {
        evals_per_level: vec![(0, evals)],
        total_sdf_evals: evals,
        projection_evals: proj.evals,
        surface_points: samples.len() as u64,
        dropped_points: proj.dropped,
        no_surface: samples.is_empty(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((samples, stats))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ProjectionStats {
    pub evals: u64,
    pub dropped: u64,
}

/// Applies `p ← p − n(p)·f(p)` `iterations` times to each point. Points
/// where the gradient vanishes are dropped and counted.
pub fn project_to_surface<F: SdfField + ?Sized>(
    f: &F,
    points: &[Vec3],
    iterations: usize,
) -> Result<(Vec<SurfaceSample>, ProjectionStats)> {
    if iterations == 0 {
        return Err(invalid("iterations must be at least 1"));
    }
    Ok(project_with_step(f, points, iterations, normal_step(&f.bounds())))
}

fn project_with_step<F: SdfField + ?Sized>(
    f: &F,
    points: &[Vec3],
    iterations: usize,
    h: f64,
) -> (Vec<SurfaceSample>, ProjectionStats) {
    // per step: value + 6 for the normal; final residual and normal: 7 more
    let per_point = 7 * iterations as u64 + 7;
    let projected: Vec<Option<SurfaceSample>> = points
        .par_iter()
        .map(|&x| {
            let mut p = x;
            for _ in 0..iterations {
                let n = sdf_normal(f, p, h).ok()?;
                p = p - n * f.eval(p);
            }
            let normal = sdf_normal(f, p, h).ok()?;
            Some(SurfaceSample { position: p, normal, sdf_residual: f.eval(p) })
        })
        .collect();
    let dropped = projected.iter().filter(|s| s.is_none()).count() as u64;
    let samples: Vec<SurfaceSample> = projected.into_iter().flatten().collect();
    (samples, ProjectionStats { evals: per_point * points.len() as u64, dropped })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    /// `"ordinary"` or `"octree"`.
    pub grid_type: String,
    /// Grid side for ordinary rows, level of detail for octree rows.
    pub resolution: u32,
    pub input_points: u64,
    pub output_points: u64,
    pub time_s: f64,
    /// Octree rows: input points over the dense grid with the same finest
    /// cell, `(2^lod)^3`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_ratio: Option<f64>,
}

pub const BENCH_DENSE_RESOLUTIONS: [usize; 3] = [40, 50, 60];
pub const BENCH_LODS: [u32; 3] = [5, 6, 7];

/// Point-sampling comparison between ordinary grids and the octree on one
/// field. Dense rows use `band` as the narrow band.
pub fn bench_octree<F: SdfField + ?Sized>(f: &F, bounds: &Aabb, band: f64) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for res in BENCH_DENSE_RESOLUTIONS {
        let (samples, stats) = dense_extract(f, bounds, res, band)?;
        rows.push(BenchRow {
            grid_type: "ordinary".into(),
            resolution: res as u32,
            input_points: stats.total_sdf_evals,
            output_points: samples.len() as u64,
            time_s: stats.wall_time_s,
            eval_ratio: None,
        });
    }
    for lod in BENCH_LODS {
        let cfg = LodConfig { lod_end: lod, bounds: *bounds, ..Default::default() };
        let (samples, stats) = extract_surface(f, &cfg)?;
        let matched = ((1u64 << lod) as f64).powi(3);
        rows.push(BenchRow {
            grid_type: "octree".into(),
            resolution: lod,
            input_points: stats.total_sdf_evals,
            output_points: samples.len() as u64,
            time_s: stats.wall_time_s,
            eval_ratio: Some(stats.total_sdf_evals as f64 / matched),
        });
    }
    Ok(rows)
}
