//! Explicit voxel grids: extraction from radiance fields by
//! direction-averaged querying, scene bounds, and trilinear resampling.
//!
//! Voxel `(x, y, z)` of a grid with `dims = [X, Y, Z]` over `bounds` has its
//! center at `min + (i + 0.5) · extent / dims` per axis. Storage is x-major:
//! `index(x, y, z, c) = ((x·Y + y)·Z + z)·C + c`.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::fields::RadianceField;
use crate::math::{Aabb, Pose, Vec3};
use crate::metrics::OrientedBox3;
use crate::render::alpha_from_sigma;

/// Grid edge length used when none is given.
pub const DEFAULT_GRID_DIM: usize = 160;

/// Dense `X × Y × Z × C` grid of reals with a world-space extent.
///
/// RGBA radiance grids use `C = 4` with opacity in the last channel; the
/// same container carries feature volumes, semantic maps and label grids.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    dims: [usize; 3],
    channels: usize,
    bounds: Aabb,
    data: Vec<f64>,
}

/// The explicit RGBA grid.
pub type VoxelGrid4D = VoxelGrid;

/// Axis-aligned box enclosing a scene.
pub type SceneBounds = Aabb;

impl VoxelGrid {
    pub fn zeros(dims: [usize; 3], channels: usize, bounds: Aabb) -> Result<Self> {
        let len = checked_len(dims, channels)?;
        Self::from_data(dims, channels, bounds, vec![0.0; len])
    }

    pub fn from_data(dims: [usize; 3], channels: usize, bounds: Aabb, data: Vec<f64>) -> Result<Self> {
        let len = checked_len(dims, channels)?;
        if data.len() != len {
            return Err(Error::LengthMismatch(format!(
                "grid {dims:?}x{channels} needs {len} values, got {}",
                data.len()
            )));
        }
        if !bounds.has_volume() {
            return Err(invalid(format!("grid bounds have no volume: {bounds:?}")));
        }
        Ok(Self { dims, channels, bounds, data })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn n_voxels(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn index(&self, x: usize, y: usize, z: usize, c: usize) -> usize {
        ((x * self.dims[1] + y) * self.dims[2] + z) * self.channels + c
    }

    pub fn get(&self, x: usize, y: usize, z: usize, c: usize) -> f64 {
        self.data[self.index(x, y, z, c)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, c: usize, v: f64) {
        let i = self.index(x, y, z, c);
        self.data[i] = v;
    }

    pub fn voxel(&self, x: usize, y: usize, z: usize) -> &[f64] {
        let i = self.index(x, y, z, 0);
        &self.data[i..i + self.channels]
    }

    pub fn cell_size(&self) -> Vec3 {
        let e = self.bounds.extent();
        Vec3::new(e.x / self.dims[0] as f64, e.y / self.dims[1] as f64, e.z / self.dims[2] as f64)
    }

    pub fn voxel_center(&self, x: usize, y: usize, z: usize) -> Vec3 {
        voxel_center(&self.bounds, self.dims, [x, y, z])
    }

    /// Continuous voxel coordinates of a world point (voxel centers at
    /// integers), clamped to the valid index range.
    pub fn continuous_index(&self, p: Vec3) -> [f64; 3] {
        continuous_index(&self.bounds, self.dims, p).0
    }

    /// Trilinear interpolation of all channels at `p` (edge-clamped).
    pub fn trilinear(&self, p: Vec3, out: &mut [f64]) {
        let g = self.continuous_index(p);
        self.trilinear_at_index(g, out);
    }

    pub(crate) fn trilinear_at_index(&self, g: [f64; 3], out: &mut [f64]) {
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        let mut t = [0.0; 3];
        for a in 0..3 {
            let n = self.dims[a];
            if n == 1 {
                continue;
            }
            let i0 = (g[a].floor() as usize).min(n - 2);
            lo[a] = i0;
            hi[a] = i0 + 1;
            t[a] = g[a] - i0 as f64;
        }
        let corner = |bx: bool, by: bool, bz: bool| {
            let pick = |b: bool, a: usize| if b { hi[a] } else { lo[a] };
            self.voxel(pick(bx, 0), pick(by, 1), pick(bz, 2))
        };
        let (c000, c100) = (corner(false, false, false), corner(true, false, false));
        let (c010, c110) = (corner(false, true, false), corner(true, true, false));
        let (c001, c101) = (corner(false, false, true), corner(true, false, true));
        let (c011, c111) = (corner(false, true, true), corner(true, true, true));
        for (c, o) in out.iter_mut().enumerate() {
            let x00 = lerp(c000[c], c100[c], t[0]);
            let x10 = lerp(c010[c], c110[c], t[0]);
            let x01 = lerp(c001[c], c101[c], t[0]);
            let x11 = lerp(c011[c], c111[c], t[0]);
            *o = lerp(lerp(x00, x10, t[1]), lerp(x01, x11, t[1]), t[2]);
        }
    }
}

// Exact at both ends and for equal endpoints.
pub(crate) fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else if t == 1.0 {
        b
    } else {
        a + t * (b - a)
    }
}

fn checked_len(dims: [usize; 3], channels: usize) -> Result<usize> {
    if dims.contains(&0) || channels == 0 {
        return Err(invalid(format!("grid dims {dims:?} and channels {channels} must be non-zero")));
    }
    dims.iter().try_fold(channels, |acc, &d| acc.checked_mul(d)).ok_or_else(|| invalid("grid size overflows"))
}

// Coordinates within 1e-9 of a voxel center are treated as exact, so that
// querying at centers reproduces stored values bit for bit.
fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r
    } else {
        v
    }
}

/// Continuous cell-centered index of `p` clamped to the grid, and whether
/// `p` lay outside `bounds`.
pub(crate) fn continuous_index(bounds: &Aabb, dims: [usize; 3], p: Vec3) -> ([f64; 3], bool) {
    let e = bounds.extent();
    let mut g = [0.0; 3];
    let mut clamped = false;
    for a in 0..3 {
        let v = snap((p[a] - bounds.min[a]) / e[a] * dims[a] as f64 - 0.5);
        g[a] = v.clamp(0.0, (dims[a] - 1) as f64);
        clamped |= !(p[a] >= bounds.min[a] && p[a] <= bounds.max[a]);
    }
    (g, clamped)
}

pub fn voxel_center(bounds: &Aabb, dims: [usize; 3], idx: [usize; 3]) -> Vec3 {
    let e = bounds.extent();
    let c = |a: usize| bounds.min[a] + (idx[a] as f64 + 0.5) * e[a] / dims[a] as f64;
    Vec3::new(c(0), c(1), c(2))
}

/// Axis-aligned box around every camera center and box corner, each side
/// pushed out by `margin × extent` along its axis.
pub fn compute_scene_bounds(cameras: &[Pose], boxes: &[OrientedBox3], margin: f64) -> Result<SceneBounds> {
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(invalid(format!("margin must be non-negative, got {margin}")));
    }
    let points = cameras.iter().map(|c| c.center()).chain(boxes.iter().flat_map(|b| b.corners()));
    let tight = Aabb::from_points(points).ok_or(Error::EmptyScene)?;
    let pad = tight.extent() * margin;
    let out = Aabb::new(tight.min - pad, tight.max + pad);
    if !out.has_volume() {
        return Err(Error::EmptyScene);
    }
    Ok(out)
}

/// Samples `field` at every voxel center, once per direction, converting
/// density to opacity with spacing `delta`, and averages all four channels
/// over the directions.
pub fn sample_grid<F: RadianceField + ?Sized>(
    field: &F,
    bounds: &SceneBounds,
    dims: [usize; 3],
    directions: &[Vec3],
    delta: f64,
) -> Result<VoxelGrid4D> {
    if directions.is_empty() {
        return Err(invalid("at least one viewing direction is required"));
    }
    if !(delta > 0.0) {
        return Err(invalid(format!("delta must be positive, got {delta}")));
    }
    let dirs: Vec<Vec3> = directions
        .iter()
        .map(|d| d.normalized().ok_or_else(|| invalid("zero-length viewing direction")))
        .collect::<Result<_>>()?;
    let mut grid = VoxelGrid::zeros(dims, 4, *bounds)?;
    let slab = dims[1] * dims[2] * 4;
    let n = dirs.len() as f64;
    grid.data.par_chunks_mut(slab).enumerate().try_for_each(|(x, chunk)| -> Result<()> {
        let mut per_channel: [Vec<f64>; 4] = Default::default();
        for y in 0..dims[1] {
            for z in 0..dims[2] {
                let p = voxel_center(bounds, dims, [x, y, z]);
                per_channel.iter_mut().for_each(Vec::clear);
                for d in &dirs {
                    let s = field.eval(p, *d);
                    per_channel[0].push(s.color[0]);
                    per_channel[1].push(s.color[1]);
                    per_channel[2].push(s.color[2]);
                    per_channel[3].push(alpha_from_sigma(s.sigma, delta)?);
                }
                let base = (y * dims[2] + z) * 4;
                for (c, vals) in per_channel.iter_mut().enumerate() {
                    // sorted summation makes the mean independent of direction order;
                    // offsetting by the minimum keeps direction-independent values exact
                    vals.sort_by(f64::total_cmp);
                    let lo = vals[0];
                    chunk[base + c] = lo + vals.iter().map(|v| v - lo).sum::<f64>() / n;
                }
            }
        }
        Ok(())
    })?;
    Ok(grid)
}

/// The six axis directions used when no cameras are supplied.
pub fn axis_directions() -> Vec<Vec3> {
    vec![Vec3::X, -Vec3::X, Vec3::Y, -Vec3::Y, Vec3::Z, -Vec3::Z]
}

/// Trilinear resampling with aligned corners: the first and last voxel
/// centers of every axis map onto each other; bounds are kept.
pub fn resample_grid(g: &VoxelGrid, new_dims: [usize; 3]) -> Result<VoxelGrid> {
    if new_dims.iter().any(|&d| d < 2) {
        return Err(invalid(format!("resampled dims must be at least 2 per axis, got {new_dims:?}")));
    }
    let c = g.channels;
    let mut out = VoxelGrid::zeros(new_dims, c, g.bounds)?;
    let scale: Vec<f64> = (0..3).map(|a| (g.dims[a] as f64 - 1.0) / (new_dims[a] as f64 - 1.0)).collect();
    let slab = new_dims[1] * new_dims[2] * c;
    out.data.par_chunks_mut(slab).enumerate().for_each(|(x, chunk)| {
        for y in 0..new_dims[1] {
            for z in 0..new_dims[2] {
                let gi = [x as f64 * scale[0], y as f64 * scale[1], z as f64 * scale[2]];
                let gi = gi.map(snap);
                let base = (y * new_dims[2] + z) * c;
                g.trilinear_at_index(gi, &mut chunk[base..base + c]);
            }
        }
    });
    Ok(out)
}
