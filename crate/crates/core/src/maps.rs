//! Representations built by projecting between images and the world:
//! top-down semantic maps, center heatmaps, lifted feature volumes and
//! triplanes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{continuous_index, lerp, VoxelGrid};
use crate::math::{backproject_pixel, project_point, Aabb, Intrinsics, Pose, Vec3, MIN_DEPTH};

/// Row-major `height × width × channels` array. Also used for triplane
/// planes, where rows and columns are the two in-plane axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self { height, width, channels, data: vec![0.0; height * width * channels] }
    }

    pub fn from_data(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(invalid("feature map dims must be non-zero"));
        }
        if data.len() != height * width * channels {
            return Err(Error::DimsMismatch(format!("{} values for a {height}x{width}x{channels} map", data.len())));
        }
        Ok(Self { height, width, channels, data })
    }

    pub fn get(&self, row: usize, col: usize) -> &[f64] {
        let i = (row * self.width + col) * self.channels;
        &self.data[i..i + self.channels]
    }

    fn get_mut(&mut self, row: usize, col: usize) -> &mut [f64] {
        let i = (row * self.width + col) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    /// Bilinear sample with integer coordinates at cell centers, clamped
    /// to the valid range.
    pub fn bilinear(&self, row: f64, col: f64) -> Vec<f64> {
        let axis = |g: f64, n: usize| -> (usize, usize, f64) {
            let g = g.clamp(0.0, (n - 1) as f64);
            if n == 1 {
                return (0, 0, 0.0);
            }
            let i0 = (g.floor() as usize).min(n - 2);
            (i0, i0 + 1, g - i0 as f64)
        };
        let (r0, r1, tr) = axis(row, self.height);
        let (c0, c1, tc) = axis(col, self.width);
        let (a, b, c, d) = (self.get(r0, c0), self.get(r0, c1), self.get(r1, c0), self.get(r1, c1));
        (0..self.channels).map(|k| lerp(lerp(a[k], b[k], tc), lerp(c[k], d[k], tc), tr)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SemanticMapConfig {
    /// Half extent in cells; the map is `2r × 2r`.
    pub r: usize,
    pub cell_size: f64,
    pub height_min: f64,
    pub height_max: f64,
    pub classes: usize,
}

impl Default for SemanticMapConfig {
    fn default() -> Self {
        Self { r: 40, cell_size: 0.1, height_min: 0.1, height_max: 1.8, classes: 1 }
    }
}

/// Agent-centered top-down map with world-aligned axes (world up is +z).
/// Cell `(i, j)` covers `x ∈ origin.x + (i − r)·s + [0, s)` and likewise
/// for `j` along y, so the agent sits in cell `(r, r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticMap {
    pub r: usize,
    pub cell_size: f64,
    pub classes: usize,
    pub origin: (f64, f64),
    /// `2r × 2r × K` bits, index `(i·2r + j)·K + k`.
    pub occupancy: Vec<bool>,
    /// Cells observed only as free space.
    pub free: Vec<bool>,
}

impl SemanticMap {
    pub fn side(&self) -> usize {
        2 * self.r
    }

    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let i = ((x - self.origin.0) / self.cell_size).floor() + self.r as f64;
        let j = ((y - self.origin.1) / self.cell_size).floor() + self.r as f64;
        let n = self.side() as f64;
        (i >= 0.0 && j >= 0.0 && i < n && j < n).then_some((i as usize, j as usize))
    }

    pub fn bit(&self, i: usize, j: usize, k: usize) -> bool {
        self.occupancy[(i * self.side() + j) * self.classes + k]
    }

    pub fn count_set(&self) -> usize {
        self.occupancy.iter().filter(|b| **b).count()
    }

    /// Occupancy as a `2r × 2r × 1 × K` grid of 0/1 values.
    pub fn to_grid(&self) -> Result<VoxelGrid> {
        let n = self.side() as f64 * self.cell_size / 2.0;
        let (ox, oy) = self.origin;
        let bounds = Aabb::new(Vec3::new(ox - n, oy - n, 0.0), Vec3::new(ox + n, oy + n, self.cell_size));
        let data = self.occupancy.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        VoxelGrid::from_data([self.side(), self.side(), 1], self.classes, bounds, data)
    }
}

/// Back-projects every pixel with positive depth and marks its class in the
/// cell below it when its world height lies in `[height_min, height_max]`.
/// Other pixels only mark their cell as free; an obstacle anywhere in a
/// cell wins over free space.
pub fn build_semantic_map(
    depth: &[f64],
    semantics: &[u32],
    k: &Intrinsics,
    pose: &Pose,
    cfg: &SemanticMapConfig,
) -> Result<SemanticMap> {
    k.validate()?;
    let n_pix = k.width as usize * k.height as usize;
    if depth.len() != n_pix || semantics.len() != n_pix {
        return Err(Error::DimsMismatch(format!(
            "depth {} and semantics {} for a {}x{} image",
            depth.len(),
            semantics.len(),
            k.width,
            k.height
        )));
    }
    if cfg.r == 0 || !(cfg.cell_size > 0.0) || cfg.classes == 0 || !(cfg.height_min <= cfg.height_max) {
        return Err(invalid("semantic map config needs r > 0, cell_size > 0, classes > 0, height_min <= height_max"));
    }
    let side = 2 * cfg.r;
    let c = pose.center();
    let mut map = SemanticMap {
        r: cfg.r,
        cell_size: cfg.cell_size,
        classes: cfg.classes,
        origin: (c.x, c.y),
        occupancy: vec![false; side * side * cfg.classes],
        free: vec![false; side * side],
    };
    let mut obstacle = vec![false; side * side];
    for (idx, (&d, &class)) in depth.iter().zip(semantics).enumerate() {
        if !(d > MIN_DEPTH) || !d.is_finite() {
            continue;
        }
        if class as usize >= cfg.classes {
            return Err(Error::LabelOutOfRange { label: class, n_classes: cfg.classes as u32 });
        }
        let (u, v) = (idx % k.width as usize, idx / k.width as usize);
        let p = backproject_pixel(k, pose, (u as f64, v as f64), d)?;
        let Some((i, j)) = map.cell_of(p.x, p.y) else { continue };
        let cell = i * side + j;
        if p.z >= cfg.height_min && p.z <= cfg.height_max {
            obstacle[cell] = true;
            map.occupancy[cell * cfg.classes + class as usize] = true;
        } else {
            map.free[cell] = true;
        }
    }
    for (f, o) in map.free.iter_mut().zip(&obstacle) {
        *f &= !o;
    }
    Ok(map)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub height: usize,
    pub width: usize,
    /// Row-major, `v` outer.
    pub values: Vec<f64>,
}

impl Heatmap {
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[v * self.width + u]
    }
}

/// Gaussian width for a box of the given pixel size.
pub fn sigma_from_box(w: f64, h: f64) -> f64 {
    w.max(h) / 6.0
}

/// Per-pixel maximum of one Gaussian per center.
pub fn splat_heatmap(centers: &[(f64, f64)], sigmas: &[f64], dims: (usize, usize)) -> Result<Heatmap> {
    if centers.len() != sigmas.len() {
        return Err(Error::LengthMismatch(format!("{} centers, {} sigmas", centers.len(), sigmas.len())));
    }
    if let Some(s) = sigmas.iter().find(|s| !(**s > 0.0)) {
        return Err(invalid(format!("sigma must be positive, got {s}")));
    }
    let (h, w) = dims;
    let mut values = vec![0.0f64; h * w];
    values.par_chunks_mut(w.max(1)).enumerate().for_each(|(v, row)| {
        for (u, out) in row.iter_mut().enumerate() {
            for ((cu, cv), s) in centers.iter().zip(sigmas) {
                let d2 = (u as f64 - cu).powi(2) + (v as f64 - cv).powi(2);
                *out = (*out).max((-d2 / (2.0 * s * s)).exp());
            }
        }
    });
    Ok(Heatmap { height: h, width: w, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub u: usize,
    pub v: usize,
    pub score: f64,
}

/// Local maxima of a 3×3 window above `threshold`. On plateaus only the
/// lexicographically smallest `(u, v)` survives. Sorted by descending score.
pub fn detect_peaks(h: &Heatmap, threshold: f64) -> Vec<Peak> {
    let mut peaks = Vec::new();
    for v in 0..h.height {
        for u in 0..h.width {
            let s = h.get(u, v);
            if !(s > threshold) {
                continue;
            }
            let mut is_peak = true;
            'scan: for dv in -1i64..=1 {
                for du in -1i64..=1 {
                    let (nu, nv) = (u as i64 + du, v as i64 + dv);
                    if (du, dv) == (0, 0) || nu < 0 || nv < 0 || nu >= h.width as i64 || nv >= h.height as i64 {
                        continue;
                    }
                    let n = h.get(nu as usize, nv as usize);
                    if n > s || (n == s && (nu, nv) < (u as i64, v as i64)) {
                        is_peak = false;
                        break 'scan;
                    }
                }
            }
            if is_peak {
                peaks.push(Peak { u, v, score: s });
            }
        }
    }
    peaks.sort_by(|a, b| b.score.total_cmp(&a.score).then((a.u, a.v).cmp(&(b.u, b.v))));
    peaks
}

/// Feature vectors at the nearest pixel of each center.
pub fn sample_param_map(map: &FeatureMap, centers: &[(f64, f64)]) -> Result<Vec<Vec<f64>>> {
    centers
        .iter()
        .map(|&(u, v)| {
            let (iu, iv) = (u.round(), v.round());
            if !(iu >= 0.0 && iv >= 0.0 && iu < map.width as f64 && iv < map.height as f64) {
                return Err(Error::OutOfBounds(iu as i64, iv as i64));
            }
            Ok(map.get(iv as usize, iu as usize).to_vec())
        })
        .collect()
}

/// Image pixel `(u, v)` in the coordinates of a feature map that covers the
/// image at a different resolution.
fn to_feature_coords(fmap: &FeatureMap, k: &Intrinsics, (u, v): (f64, f64)) -> (f64, f64) {
    let su = fmap.width as f64 / k.width as f64;
    let sv = fmap.height as f64 / k.height as f64;
    ((u + 0.5) * su - 0.5, (v + 0.5) * sv - 0.5)
}

fn inside_image(k: &Intrinsics, (u, v): (f64, f64)) -> bool {
    u >= -0.5 && v >= -0.5 && u <= k.width as f64 - 0.5 && v <= k.height as f64 - 0.5
}

/// Bilinear feature at the projection of `x`; zeros and `false` when the
/// projection misses the image.
pub fn sample_image_feature(fmap: &FeatureMap, k: &Intrinsics, pose: &Pose, x: Vec3) -> Result<(Vec<f64>, bool)> {
    let (px, _) = project_point(k, pose, x)?;
    if !inside_image(k, px) {
        return Ok((vec![0.0; fmap.channels], false));
    }
    let (fu, fv) = to_feature_coords(fmap, k, px);
    Ok((fmap.bilinear(fv, fu), true))
}

/// Voxel grid with one feature vector per cell.
pub type FeatureVolume = VoxelGrid;

/// Gives every voxel center the image feature at its projection; voxels
/// behind the camera or outside the image get zeros.
pub fn lift_features_to_grid(
    fmap: &FeatureMap,
    k: &Intrinsics,
    pose: &Pose,
    bounds: &Aabb,
    dims: [usize; 3],
) -> Result<FeatureVolume> {
    k.validate()?;
    let c = fmap.channels;
    let mut vol = VoxelGrid::zeros(dims, c, *bounds)?;
    let slab = dims[1] * dims[2] * c;
    vol.data_mut().par_chunks_mut(slab).enumerate().for_each(|(x, chunk)| {
        for y in 0..dims[1] {
            for z in 0..dims[2] {
                let p = crate::grid::voxel_center(bounds, dims, [x, y, z]);
                if let Ok((f, true)) = sample_image_feature(fmap, k, pose, p) {
                    let base = (y * dims[2] + z) * c;
                    chunk[base..base + c].copy_from_slice(&f);
                }
            }
        }
    });
    Ok(vol)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriplaneSet {
    /// Rows x, columns y.
    pub xy: FeatureMap,
    /// Rows x, columns z.
    pub xz: FeatureMap,
    /// Rows y, columns z.
    pub yz: FeatureMap,
    pub dims: [usize; 3],
    pub bounds: Aabb,
}

/// Mean of the volume along z, y and x respectively.
pub fn collapse_to_triplanes(v: &FeatureVolume) -> TriplaneSet {
    let [nx, ny, nz] = v.dims();
    let c = v.channels();
    let mut xy = FeatureMap::zeros(nx, ny, c);
    let mut xz = FeatureMap::zeros(nx, nz, c);
    let mut yz = FeatureMap::zeros(ny, nz, c);
    for x in 0..nx {
        for y in 0..ny {
            for z in 0..nz {
                for (k, &f) in v.voxel(x, y, z).iter().enumerate() {
                    xy.get_mut(x, y)[k] += f;
                    xz.get_mut(x, z)[k] += f;
                    yz.get_mut(y, z)[k] += f;
                }
            }
        }
    }
    let scale = |m: &mut FeatureMap, n: usize| m.data.iter_mut().for_each(|e| *e /= n as f64);
    scale(&mut xy, nz);
    scale(&mut xz, ny);
    scale(&mut yz, nx);
    TriplaneSet { xy, xz, yz, dims: v.dims(), bounds: v.bounds() }
}

/// Concatenated `[xy, xz, yz]` bilinear samples at the orthogonal
/// projections of `x`. Points outside the bounds are clamped and flagged
/// with `true`.
pub fn sample_triplane(s: &TriplaneSet, x: Vec3) -> (Vec<f64>, bool) {
    let (g, clamped) = continuous_index(&s.bounds, s.dims, x);
    let mut out = s.xy.bilinear(g[0], g[1]);
    out.extend(s.xz.bilinear(g[0], g[2]));
    out.extend(s.yz.bilinear(g[1], g[2]));
    (out, clamped)
}
