use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::Vec3;
use crate::error::{invalid, Error, Result};

/// Tolerance on orthonormality and determinant for [`Rotation3`].
pub const ROTATION_TOLERANCE: f64 = 1e-6;

/// Smallest singular value accepted by [`svd_plus`].
pub const SVD_DEGENERACY_TOLERANCE: f64 = 1e-12;

/// A proper rotation in SO(3). Serialized as 9 row-major reals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Rotation3(Matrix3<f64>);

impl Rotation3 {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Validates orthonormality and `det = +1` within [`ROTATION_TOLERANCE`].
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(invalid("rotation has non-finite entries"));
        }
        let gram_err = (m.transpose() * m - Matrix3::identity()).abs().max();
        let det = m.determinant();
        if gram_err > ROTATION_TOLERANCE || (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(invalid(format!("matrix is not a rotation (orthonormality error {gram_err:e}, det {det})")));
        }
        Ok(Self(m))
    }

    pub fn from_row_major(v: &[f64]) -> Result<Self> {
        if v.len() != 9 {
            return Err(Error::LengthMismatch(format!("rotation needs 9 values, got {}", v.len())));
        }
        Self::from_matrix(Matrix3::from_row_slice(v))
    }

    /// Rodrigues rotation by `angle` radians about `axis` (normalized here).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let a = axis.normalized().unwrap_or(Vec3::Z);
        Self(axis_angle_matrix(a, angle))
    }

    pub fn rot_x(angle: f64) -> Self {
        Self::from_axis_angle(Vec3::X, angle)
    }

    pub fn rot_y(angle: f64) -> Self {
        Self::from_axis_angle(Vec3::Y, angle)
    }

    pub fn rot_z(angle: f64) -> Self {
        Self::from_axis_angle(Vec3::Z, angle)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 0)], m[(1, 1)], m[(1, 2)], m[(2, 0)], m[(2, 1)], m[(2, 2)]]
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[(0, 0)] * v.x + m[(0, 1)] * v.y + m[(0, 2)] * v.z,
            m[(1, 0)] * v.x + m[(1, 1)] * v.y + m[(1, 2)] * v.z,
            m[(2, 0)] * v.x + m[(2, 1)] * v.y + m[(2, 2)] * v.z,
        )
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn compose(&self, other: &Rotation3) -> Self {
        Self(self.0 * other.0)
    }

    /// Geodesic angle (radians, in `[0, π]`) of this rotation from identity.
    pub fn angle(&self) -> f64 {
        geodesic_angle(&self.0)
    }

    /// Geodesic distance `angle(selfᵀ · other)`.
    pub fn angle_to(&self, other: &Rotation3) -> f64 {
        geodesic_angle(&(self.0.transpose() * other.0))
    }
}

impl TryFrom<Vec<f64>> for Rotation3 {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::from_row_major(&v)
    }
}

impl From<Rotation3> for Vec<f64> {
    fn from(r: Rotation3) -> Self {
        r.to_row_major().to_vec()
    }
}

fn axis_angle_matrix(a: Vec3, angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    Matrix3::new(
        c + t * a.x * a.x,
        t * a.x * a.y - s * a.z,
        t * a.x * a.z + s * a.y,
        t * a.x * a.y + s * a.z,
        c + t * a.y * a.y,
        t * a.y * a.z - s * a.x,
        t * a.x * a.z - s * a.y,
        t * a.y * a.z + s * a.x,
        c + t * a.z * a.z,
    )
}

// atan2 form stays accurate near 0 and π where acos of the trace does not.
fn geodesic_angle(m: &Matrix3<f64>) -> f64 {
    let sx = m[(2, 1)] - m[(1, 2)];
    let sy = m[(0, 2)] - m[(2, 0)];
    let sz = m[(1, 0)] - m[(0, 1)];
    let sin = 0.5 * (sx * sx + sy * sy + sz * sz).sqrt();
    let cos = 0.5 * (m.trace() - 1.0);
    sin.atan2(cos)
}

/// Nearest rotation to `m` in the Frobenius norm: `U · diag(1, 1, det(UVᵀ)) · Vᵀ`.
pub fn svd_plus(m: &Matrix3<f64>) -> Result<Rotation3> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(invalid("matrix has non-finite entries"));
    }
    let svd = m.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::DegenerateMatrix(0.0)),
    };
    let sv = svd.singular_values;
    let smallest = sv.min();
    if smallest < SVD_DEGENERACY_TOLERANCE {
        return Err(Error::DegenerateMatrix(smallest));
    }
    // The sign correction belongs on the smallest singular direction.
    let k = sv.imin();
    let d = (u * v_t).determinant().signum();
    let mut sigma = Matrix3::identity();
    sigma[(k, k)] = d;
    let r = u * sigma * v_t;
    Rotation3::from_matrix(r)
}

/// Removes the rotation component about `axis` (expressed in the object
/// frame): returns `r · Rot(axis, φ)` for the φ that brings it closest to
/// identity. Objects symmetric about `axis` map to a single canonical pose.
pub fn canonicalize_symmetric(r: &Rotation3, axis: Vec3) -> Result<Rotation3> {
    let a = axis.normalized().ok_or_else(|| invalid("symmetry axis has zero length"))?;
    let m = &r.0;
    // trace(r · Rot(a, φ)) = A cos φ + B sin φ + C
    let av = nalgebra::Vector3::new(a.x, a.y, a.z);
    let ata = av.dot(&(m * av));
    let big_a = m.trace() - ata;
    let skew = Matrix3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0);
    let big_b = (m * skew).trace();
    let phi = big_b.atan2(big_a);
    let out = Rotation3(m * axis_angle_matrix(a, phi));
    Ok(out)
}
