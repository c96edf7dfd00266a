//! Geometric primitives: vectors, rotations, poses, the pinhole camera and
//! positional encodings.

mod camera;
mod encoding;
mod rotation;
mod vec3;

pub use camera::{
    backproject_pixel, generate_rays, pixel_ray, project_point, Camera, Intrinsics, Pose, Ray, MIN_DEPTH,
};
pub use encoding::{gaussian_pe_kernel, sinusoidal_pe, SquareMatrix};
pub use rotation::{canonicalize_symmetric, svd_plus, Rotation3, ROTATION_TOLERANCE, SVD_DEGENERACY_TOLERANCE};
pub use vec3::{Aabb, Vec3};

pub type Rgb = [f64; 3];
