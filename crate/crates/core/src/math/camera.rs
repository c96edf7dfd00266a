//! Pinhole camera model.
//!
//! Convention: camera +z looks forward, +x right, +y down. A [`Pose`] maps
//! camera coordinates to world coordinates. Pixel `(u, v)` has its center at
//! integer coordinates, so the ray through `(cx, cy)` is the optical axis.

use serde::{Deserialize, Serialize};

use super::{Rotation3, Vec3};
use crate::error::{invalid, Error, Result};

/// Depths at or below this are treated as behind the camera.
pub const MIN_DEPTH: f64 = 1e-9;

/// Rigid camera-to-world transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Rotation3,
    pub translation: Vec3,
}

impl Pose {
    pub fn new(rotation: Rotation3, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self::new(Rotation3::identity(), Vec3::ZERO)
    }

    /// Camera-frame point to world frame.
    pub fn transform_point(&self, p: Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.translation
    }

    /// World-frame point to camera frame.
    pub fn inverse_transform_point(&self, p: Vec3) -> Vec3 {
        self.rotation.inverse().rotate(p - self.translation)
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vec3 {
        self.translation
    }

    /// World-frame direction of the camera's optical axis.
    pub fn forward(&self) -> Vec3 {
        self.rotation.rotate(Vec3::Z)
    }

    /// Camera at `eye` looking at `target`, with world `up` mapping to the
    /// image's upward direction (camera −y).
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3) -> Result<Self> {
        let z = (target - eye).normalized().ok_or_else(|| invalid("look_at target coincides with eye"))?;
        let x = z.cross(up).normalized().ok_or_else(|| invalid("look_at up vector is parallel to view direction"))?;
        let y = z.cross(x);
        let m = nalgebra::Matrix3::new(x.x, y.x, z.x, x.y, y.y, z.y, x.z, y.z, z.z);
        Ok(Self::new(Rotation3::from_matrix(m)?, eye))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let k = Self { fx, fy, cx, cy, width, height };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(invalid(format!("focal lengths must be positive, got ({}, {})", self.fx, self.fy)));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(invalid("principal point must be finite"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(invalid("image size must be at least 1x1"));
        }
        Ok(())
    }
}

/// A camera: intrinsics plus pose. This is the JSON unit used by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub intrinsics: Intrinsics,
    pub pose: Pose,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    direction: Vec3,
}

impl Ray {
    /// Normalizes `direction`.
    pub fn new(origin: Vec3, direction: Vec3) -> Result<Self> {
        let direction = direction.normalized().ok_or_else(|| invalid("ray direction has zero length"))?;
        Ok(Self { origin, direction })
    }

    pub fn direction(&self) -> Vec3 {
        self.direction
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// Projects a world point to `((u, v), depth)`.
pub fn project_point(k: &Intrinsics, pose: &Pose, x: Vec3) -> Result<((f64, f64), f64)> {
    let c = pose.inverse_transform_point(x);
    if c.z <= MIN_DEPTH {
        return Err(Error::NonPositiveDepth(c.z));
    }
    let u = k.fx * c.x / c.z + k.cx;
    let v = k.fy * c.y / c.z + k.cy;
    Ok(((u, v), c.z))
}

/// Lifts a pixel at camera-frame depth `depth` back to the world.
pub fn backproject_pixel(k: &Intrinsics, pose: &Pose, pixel: (f64, f64), depth: f64) -> Result<Vec3> {
    if !(depth > MIN_DEPTH) {
        return Err(Error::NonPositiveDepth(depth));
    }
    let (u, v) = pixel;
    let c = Vec3::new((u - k.cx) / k.fx * depth, (v - k.cy) / k.fy * depth, depth);
    Ok(pose.transform_point(c))
}

/// One ray per pixel, row-major (`v` outer, `u` inner).
pub fn generate_rays(k: &Intrinsics, pose: &Pose) -> Vec<Ray> {
    let mut rays = Vec::with_capacity(k.width as usize * k.height as usize);
    for v in 0..k.height {
        for u in 0..k.width {
            rays.push(pixel_ray(k, pose, (u as f64, v as f64)));
        }
    }
    rays
}

/// Ray from the camera center through pixel `(u, v)`.
pub fn pixel_ray(k: &Intrinsics, pose: &Pose, pixel: (f64, f64)) -> Ray {
    let d = Vec3::new((pixel.0 - k.cx) / k.fx, (pixel.1 - k.cy) / k.fy, 1.0);
    let dir = pose.rotation.rotate(d);
    Ray { origin: pose.center(), direction: dir / dir.norm() }
}
