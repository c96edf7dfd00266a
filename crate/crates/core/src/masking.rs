//! 3D patch masking and masked reconstruction losses.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::VoxelGrid4D;
use crate::util::hash_words;

pub const DEFAULT_PATCH_SIZE: usize = 4;
pub const DEFAULT_MASK_RATIO: f64 = 0.75;
/// Reported in place of an infinite PSNR for identical grids.
pub const PSNR_CAP_DB: f64 = 99.0;

/// Split of a voxel grid into cubic `p³` patches, indexed x-major over the
/// patch grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Patchify {
    pub dims: [usize; 3],
    pub patch_size: usize,
    pub patch_dims: [usize; 3],
}

impl Patchify {
    pub fn n_patches(&self) -> usize {
        self.patch_dims.iter().product()
    }

    /// Patch containing voxel `(x, y, z)`.
    pub fn patch_of(&self, x: usize, y: usize, z: usize) -> usize {
        let p = self.patch_size;
        ((x / p) * self.patch_dims[1] + y / p) * self.patch_dims[2] + z / p
    }

    /// First voxel of patch `i`.
    pub fn patch_origin(&self, i: usize) -> [usize; 3] {
        let [_, py, pz] = self.patch_dims;
        let p = self.patch_size;
        [i / (py * pz) * p, (i / pz) % py * p, i % pz * p]
    }
}

pub fn patchify(dims: [usize; 3], p: usize) -> Result<Patchify> {
    if p == 0 || dims.iter().any(|&d| d == 0 || d % p != 0) {
        return Err(Error::IndivisibleDims { dims, patch: p });
    }
    Ok(Patchify { dims, patch_size: p, patch_dims: dims.map(|d| d / p) })
}

/// `round(ratio · n)` with halves rounded up.
pub fn masked_count(n: usize, ratio: f64) -> usize {
    ((ratio * n as f64 + 0.5).floor() as usize).min(n)
}

/// Masks exactly `masked_count(n, ratio)` patches: each patch gets a key
/// hashed from `(seed, index)` and the smallest keys are masked.
pub fn random_mask(n_patches: usize, ratio: f64, seed: u64) -> Result<Vec<bool>> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(invalid(format!("mask ratio must lie in [0, 1], got {ratio}")));
    }
    let k = masked_count(n_patches, ratio);
    let mut order: Vec<(u64, usize)> = (0..n_patches).map(|i| (hash_words(seed, &[i as u64]), i)).collect();
    order.sort_unstable();
    let mut masked = vec![false; n_patches];
    for &(_, i) in &order[..k] {
        masked[i] = true;
    }
    Ok(masked)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchMask {
    pub patch_size: usize,
    pub grid_dims: [usize; 3],
    pub masked: Vec<bool>,
    pub seed: u64,
    pub ratio: f64,
}

/// JSON form: `{p, dims, seed, ratio, masked_indices}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskFile {
    pub p: usize,
    pub dims: [usize; 3],
    pub seed: u64,
    pub ratio: f64,
    pub masked_indices: Vec<usize>,
}

impl PatchMask {
    pub fn generate(dims: [usize; 3], p: usize, ratio: f64, seed: u64) -> Result<Self> {
        let layout = patchify(dims, p)?;
        let masked = random_mask(layout.n_patches(), ratio, seed)?;
        Ok(Self { patch_size: p, grid_dims: dims, masked, seed, ratio })
    }

    pub fn layout(&self) -> Patchify {
        Patchify {
            dims: self.grid_dims,
            patch_size: self.patch_size,
            patch_dims: self.grid_dims.map(|d| d / self.patch_size),
        }
    }

    pub fn n_masked(&self) -> usize {
        self.masked.iter().filter(|m| **m).count()
    }

    pub fn n_visible(&self) -> usize {
        self.masked.len() - self.n_masked()
    }

    pub fn is_voxel_masked(&self, x: usize, y: usize, z: usize) -> bool {
        self.masked[self.layout().patch_of(x, y, z)]
    }

    pub fn to_file(&self) -> MaskFile {
        MaskFile {
            p: self.patch_size,
            dims: self.grid_dims,
            seed: self.seed,
            ratio: self.ratio,
            masked_indices: (0..self.masked.len()).filter(|&i| self.masked[i]).collect(),
        }
    }

    pub fn from_file(f: &MaskFile) -> Result<Self> {
        let layout = patchify(f.dims, f.p)?;
        let mut masked = vec![false; layout.n_patches()];
        for &i in &f.masked_indices {
            *masked.get_mut(i).ok_or_else(|| invalid(format!("patch index {i} out of range")))? = true;
        }
        Ok(Self { patch_size: f.p, grid_dims: f.dims, masked, seed: f.seed, ratio: f.ratio })
    }

    fn check(&self, g: &VoxelGrid4D) -> Result<()> {
        if g.dims() != self.grid_dims {
            return Err(Error::DimsMismatch(format!("grid {:?} vs mask {:?}", g.dims(), self.grid_dims)));
        }
        Ok(())
    }
}

/// Zeroes every channel of every voxel in a masked patch.
pub fn apply_mask(g: &VoxelGrid4D, m: &PatchMask) -> Result<VoxelGrid4D> {
    m.check(g)?;
    let mut out = g.clone();
    let [nx, ny, nz] = g.dims();
    for x in 0..nx {
        for y in 0..ny {
            for z in 0..nz {
                if m.is_voxel_masked(x, y, z) {
                    for c in 0..g.channels() {
                        out.set(x, y, z, c, 0.0);
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconLosses {
    pub rgb: f64,
    pub alpha: f64,
    /// Masked voxels whose target opacity exceeds the floor.
    pub rgb_voxels: usize,
    pub alpha_voxels: usize,
    /// Set when no masked voxel passes the opacity gate; `rgb` is then 0.
    pub empty_rgb_set: bool,
}

/// Mean squared errors over masked voxels: rgb (averaged over the three
/// components) only where the target opacity exceeds `alpha_floor`, alpha
/// everywhere masked.
pub fn recon_losses(pred: &VoxelGrid4D, target: &VoxelGrid4D, m: &PatchMask, alpha_floor: f64) -> Result<ReconLosses> {
    check_pair(pred, target)?;
    m.check(target)?;
    if target.channels() != 4 {
        return Err(Error::DimsMismatch(format!("expected 4 channels, got {}", target.channels())));
    }
    let [nx, ny, nz] = target.dims();
    let (mut rgb_sum, mut alpha_sum) = (0.0, 0.0);
    let (mut rgb_n, mut alpha_n) = (0usize, 0usize);
    for x in 0..nx {
        for y in 0..ny {
            for z in 0..nz {
                if !m.is_voxel_masked(x, y, z) {
                    continue;
                }
                let (p, t) = (pred.voxel(x, y, z), target.voxel(x, y, z));
                alpha_sum += (p[3] - t[3]).powi(2);
                alpha_n += 1;
                if t[3] > alpha_floor {
                    rgb_sum += (0..3).map(|c| (p[c] - t[c]).powi(2)).sum::<f64>();
                    rgb_n += 1;
                }
            }
        }
    }
    Ok(ReconLosses {
        rgb: if rgb_n > 0 { rgb_sum / (3 * rgb_n) as f64 } else { 0.0 },
        alpha: if alpha_n > 0 { alpha_sum / alpha_n as f64 } else { 0.0 },
        rgb_voxels: rgb_n,
        alpha_voxels: alpha_n,
        empty_rgb_set: rgb_n == 0,
    })
}

fn check_pair(a: &VoxelGrid4D, b: &VoxelGrid4D) -> Result<()> {
    if a.dims() != b.dims() || a.channels() != b.channels() {
        return Err(Error::DimsMismatch(format!("{:?}x{} vs {:?}x{}", a.dims(), a.channels(), b.dims(), b.channels())));
    }
    Ok(())
}

/// Mean squared error over all voxels and channels.
pub fn mse3d(pred: &VoxelGrid4D, target: &VoxelGrid4D) -> Result<f64> {
    check_pair(pred, target)?;
    let sum: f64 = pred.data().iter().zip(target.data()).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(sum / pred.data().len() as f64)
}

/// `−10·log10(MSE)`, or [`PSNR_CAP_DB`] when the grids are identical.
pub fn psnr3d(pred: &VoxelGrid4D, target: &VoxelGrid4D) -> Result<f64> {
    let mse = mse3d(pred, target)?;
    Ok(if mse == 0.0 { PSNR_CAP_DB } else { -10.0 * mse.log10() })
}
