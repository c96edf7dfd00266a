//! Signed distance fields and radiance fields.
//!
//! Analytic implementations serve as oracles for the extraction and
//! rendering code; [`GridField`] turns an explicit voxel grid back into a
//! queryable radiance field.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::VoxelGrid;
use crate::math::{Aabb, Rgb, Vec3};

/// Spacing used when converting between density and opacity in grids.
pub const DEFAULT_ALPHA_DELTA: f64 = 0.01;

pub trait SdfField: Sync {
    fn eval(&self, x: Vec3) -> f64;
    fn bounds(&self) -> Aabb;
}

impl<T: SdfField + ?Sized> SdfField for &T {
    fn eval(&self, x: Vec3) -> f64 {
        (**self).eval(x)
    }
    fn bounds(&self) -> Aabb {
        (**self).bounds()
    }
}

/// Shape description accepted by [`make_analytic_sdf`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    Sphere { center: Vec3, radius: f64 },
    Box { center: Vec3, half_extents: Vec3 },
    Union { shapes: Vec<Shape> },
}

/// Exact signed distance to a sphere, a box or a union of those.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticSdf {
    Sphere { center: Vec3, radius: f64 },
    Box { center: Vec3, half_extents: Vec3 },
    Union(Vec<AnalyticSdf>),
}

pub fn make_analytic_sdf(shape: &Shape) -> Result<AnalyticSdf> {
    match shape {
        Shape::Sphere { center, radius } => {
            if !(*radius > 0.0 && radius.is_finite()) || !center.is_finite() {
                return Err(invalid(format!("sphere radius must be positive, got {radius}")));
            }
            Ok(AnalyticSdf::Sphere { center: *center, radius: *radius })
        }
        Shape::Box { center, half_extents } => {
            if !(half_extents.min_element() > 0.0 && half_extents.is_finite()) || !center.is_finite() {
                return Err(invalid(format!("box half extents must be positive, got {half_extents:?}")));
            }
            Ok(AnalyticSdf::Box { center: *center, half_extents: *half_extents })
        }
        Shape::Union { shapes } => {
            if shapes.is_empty() {
                return Err(Error::EmptyUnion);
            }
            Ok(AnalyticSdf::Union(shapes.iter().map(make_analytic_sdf).collect::<Result<_>>()?))
        }
    }
}

impl SdfField for AnalyticSdf {
    fn eval(&self, x: Vec3) -> f64 {
        match self {
            AnalyticSdf::Sphere { center, radius } => (x - *center).norm() - radius,
            AnalyticSdf::Box { center, half_extents } => {
                let q = (x - *center).abs() - *half_extents;
                q.max(Vec3::ZERO).norm() + q.max_element().min(0.0)
            }
            AnalyticSdf::Union(parts) => parts.iter().map(|p| p.eval(x)).fold(f64::INFINITY, f64::min),
        }
    }

    fn bounds(&self) -> Aabb {
        match self {
            AnalyticSdf::Sphere { center, radius } => {
                Aabb::new(*center - Vec3::splat(*radius), *center + Vec3::splat(*radius))
            }
            AnalyticSdf::Box { center, half_extents } => Aabb::new(*center - *half_extents, *center + *half_extents),
            AnalyticSdf::Union(parts) => parts
                .iter()
                .map(|p| p.bounds())
                .reduce(|a, b| Aabb::new(a.min.min(b.min), a.max.max(b.max)))
                .expect("union is non-empty by construction"),
        }
    }
}

/// Unit normal `∇f / |∇f|` by central differences with step `h`.
pub fn sdf_normal<F: SdfField + ?Sized>(f: &F, x: Vec3, h: f64) -> Result<Vec3> {
    if !(h > 0.0) {
        return Err(invalid(format!("finite-difference step must be positive, got {h}")));
    }
    let dx = f.eval(x + Vec3::new(h, 0.0, 0.0)) - f.eval(x - Vec3::new(h, 0.0, 0.0));
    let dy = f.eval(x + Vec3::new(0.0, h, 0.0)) - f.eval(x - Vec3::new(0.0, h, 0.0));
    let dz = f.eval(x + Vec3::new(0.0, 0.0, h)) - f.eval(x - Vec3::new(0.0, 0.0, h));
    let grad = Vec3::new(dx, dy, dz) / (2.0 * h);
    let mag = grad.norm();
    if !(mag >= 1e-8) {
        return Err(Error::VanishingGradient { x: x.x, y: x.y, z: x.z });
    }
    Ok(grad / mag)
}

/// Color and density returned by a radiance-field query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadianceSample {
    pub color: Rgb,
    pub sigma: f64,
}

impl RadianceSample {
    pub const EMPTY: RadianceSample = RadianceSample { color: [0.0; 3], sigma: 0.0 };
}

pub trait RadianceField: Sync {
    /// `d` is a unit viewing direction.
    fn eval(&self, x: Vec3, d: Vec3) -> RadianceSample;
}

impl<T: RadianceField + ?Sized> RadianceField for &T {
    fn eval(&self, x: Vec3, d: Vec3) -> RadianceSample {
        (**self).eval(x, d)
    }
}

impl<T: RadianceField + ?Sized> RadianceField for Box<T> {
    fn eval(&self, x: Vec3, d: Vec3) -> RadianceSample {
        (**self).eval(x, d)
    }
}

fn check_color(color: Rgb) -> Result<()> {
    if color.iter().all(|c| (0.0..=1.0).contains(c)) {
        Ok(())
    } else {
        Err(invalid(format!("color components must lie in [0, 1], got {color:?}")))
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma >= 0.0 && !sigma.is_nan() {
        Ok(())
    } else {
        Err(invalid(format!("density must be non-negative, got {sigma}")))
    }
}

/// Same color and density everywhere, for every direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantField {
    sample: RadianceSample,
}

pub fn make_constant_field(color: Rgb, sigma: f64) -> Result<ConstantField> {
    check_color(color)?;
    check_sigma(sigma)?;
    Ok(ConstantField { sample: RadianceSample { color, sigma } })
}

impl ConstantField {
    pub fn empty() -> Self {
        Self { sample: RadianceSample::EMPTY }
    }
}

impl RadianceField for ConstantField {
    fn eval(&self, _x: Vec3, _d: Vec3) -> RadianceSample {
        self.sample
    }
}

/// Procedural solid: density `sigma` where the SDF is negative, zero
/// elsewhere; color varies linearly with position (`0.5 + 0.5·x`, clamped).
#[derive(Debug, Clone, PartialEq)]
pub struct SolidField {
    pub sdf: AnalyticSdf,
    pub sigma: f64,
}

impl SolidField {
    pub fn new(sdf: AnalyticSdf, sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(Self { sdf, sigma })
    }
}

impl RadianceField for SolidField {
    fn eval(&self, x: Vec3, _d: Vec3) -> RadianceSample {
        if self.sdf.eval(x) <= 0.0 {
            let c = |v: f64| (0.5 + 0.5 * v).clamp(0.0, 1.0);
            RadianceSample { color: [c(x.x), c(x.y), c(x.z)], sigma: self.sigma }
        } else {
            RadianceSample::EMPTY
        }
    }
}

/// Trilinear interpolation of an RGBA grid whose fourth channel is opacity.
///
/// Opacity is mapped back to density with `σ = −ln(1 − α) / Δ`, the exact
/// inverse of the conversion used when the grid was sampled.
#[derive(Debug, Clone)]
pub struct GridField {
    grid: VoxelGrid,
    delta: f64,
}

impl GridField {
    pub fn new(grid: VoxelGrid) -> Result<Self> {
        Self::with_delta(grid, DEFAULT_ALPHA_DELTA)
    }

    pub fn with_delta(grid: VoxelGrid, delta: f64) -> Result<Self> {
        if grid.channels() != 4 {
            return Err(Error::DimsMismatch(format!("grid field needs 4 channels, grid has {}", grid.channels())));
        }
        if !(delta > 0.0) {
            return Err(invalid(format!("delta must be positive, got {delta}")));
        }
        Ok(Self { grid, delta })
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Interpolated `(r, g, b, α)`; zeros outside the grid bounds.
    pub fn eval_rgba(&self, x: Vec3) -> [f64; 4] {
        let mut out = [0.0; 4];
        if self.grid.bounds().contains(x) {
            self.grid.trilinear(x, &mut out);
        }
        out
    }
}

/// Convenience wrapper matching the free-function form of the other fields.
pub fn grid_field_eval(g: &GridField, x: Vec3, d: Vec3) -> RadianceSample {
    g.eval(x, d)
}

impl RadianceField for GridField {
    fn eval(&self, x: Vec3, _d: Vec3) -> RadianceSample {
        let [r, g, b, a] = self.eval_rgba(x);
        let a = a.clamp(0.0, 1.0);
        let sigma = -(-a).ln_1p() / self.delta;
        RadianceSample { color: [r, g, b], sigma }
    }
}
