//! Geometry and evaluation toolkit for neural-field style scene
//! representations: analytic fields, octree surface extraction, volume
//! rendering, voxel grids, patch masking, projection maps and metrics.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fields;
pub mod grid;
pub mod io;
pub mod maps;
pub mod masking;
pub mod math;
pub mod metrics;
pub mod octree;
pub mod render;
pub mod util;

pub use error::{Error, Result};
pub use fields::{AnalyticSdf, ConstantField, GridField, RadianceField, RadianceSample, SdfField, Shape, SolidField};
pub use grid::{SceneBounds, VoxelGrid, VoxelGrid4D};
pub use math::{Aabb, Camera, Intrinsics, Pose, Ray, Rgb, Rotation3, Vec3};
pub use metrics::{OrientedBox3, PoseRecord, Trajectory};
pub use octree::{ExtractionStats, LodConfig, SurfaceSample};
pub use render::{RenderConfig, RenderResult};
