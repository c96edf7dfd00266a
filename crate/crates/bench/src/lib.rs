//! Shared fixtures for the criterion benchmarks.

use radiant_core::fields::{make_analytic_sdf, AnalyticSdf, Shape};
use radiant_core::Vec3;

pub fn sphere() -> AnalyticSdf {
    make_analytic_sdf(&Shape::Sphere { center: Vec3::ZERO, radius: 0.5 }).expect("valid sphere")
}

pub fn cuboid() -> AnalyticSdf {
    make_analytic_sdf(&Shape::Box { center: Vec3::ZERO, half_extents: Vec3::new(0.4, 0.3, 0.25) }).expect("valid box")
}

pub fn union() -> AnalyticSdf {
    make_analytic_sdf(&Shape::Union {
        shapes: vec![
            Shape::Sphere { center: Vec3::new(-0.3, 0.0, 0.0), radius: 0.35 },
            Shape::Box { center: Vec3::new(0.35, 0.1, 0.0), half_extents: Vec3::new(0.25, 0.2, 0.3) },
        ],
    })
    .expect("valid union")
}

/// Named fixtures in a fixed order.
pub fn fixtures() -> Vec<(&'static str, AnalyticSdf)> {
    vec![("sphere", sphere()), ("box", cuboid()), ("union", union())]
}
