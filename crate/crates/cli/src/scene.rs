//! JSON descriptions of fields and scenes accepted by the CLI.

use std::path::{Path, PathBuf};

use radiant_core::fields::{make_analytic_sdf, make_constant_field, ConstantField, GridField, Shape, SolidField};
use radiant_core::io::read_nfvg;
use radiant_core::math::Camera;
use radiant_core::render::RenderConfig;
use radiant_core::{OrientedBox3, RadianceField, Result, Vec3};
use serde::{Deserialize, Serialize};

/// A radiance field by name. Grid paths are resolved relative to the JSON
/// file that mentions them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FieldSpec {
    Empty,
    Constant {
        color: [f64; 3],
        sigma: f64,
    },
    /// Density `sigma` inside the shape with a position-dependent color.
    Solid {
        shape: Shape,
        sigma: f64,
    },
    Grid {
        path: PathBuf,
        #[serde(default = "default_delta")]
        delta: f64,
    },
}

fn default_delta() -> f64 {
    radiant_core::fields::DEFAULT_ALPHA_DELTA
}

impl FieldSpec {
    pub fn build(&self, base: &Path) -> Result<Box<dyn RadianceField>> {
        Ok(match self {
            FieldSpec::Empty => Box::new(ConstantField::empty()),
            FieldSpec::Constant { color, sigma } => Box::new(make_constant_field(*color, *sigma)?),
            FieldSpec::Solid { shape, sigma } => Box::new(SolidField::new(make_analytic_sdf(shape)?, *sigma)?),
            FieldSpec::Grid { path, delta } => {
                let grid = read_nfvg(&base.join(path))?;
                Box::new(GridField::with_delta(grid, *delta)?)
            }
        })
    }
}

/// Scene file for `render`. With a `far` field, cameras must sit inside the
/// unit sphere and rays are split into near and far segments; `object` and
/// `boxes` enable scene editing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneFile {
    pub cameras: Vec<Camera>,
    pub near: FieldSpec,
    #[serde(default)]
    pub far: Option<FieldSpec>,
    #[serde(default)]
    pub object: Option<FieldSpec>,
    #[serde(default)]
    pub boxes: Vec<OrientedBox3>,
    #[serde(default)]
    pub config: RenderConfig,
}

/// Built-in shapes for the geometry subcommands.
pub fn named_shape(name: &str) -> Option<Shape> {
    let sphere = Shape::Sphere { center: Vec3::ZERO, radius: 0.5 };
    match name {
        "sphere" => Some(sphere),
        "box" => Some(Shape::Box { center: Vec3::ZERO, half_extents: Vec3::new(0.4, 0.3, 0.25) }),
        "union" => Some(Shape::Union {
            shapes: vec![
                Shape::Sphere { center: Vec3::new(-0.3, 0.0, 0.0), radius: 0.35 },
                Shape::Box { center: Vec3::new(0.35, 0.1, 0.0), half_extents: Vec3::new(0.25, 0.2, 0.3) },
            ],
        }),
        _ => None,
    }
}
