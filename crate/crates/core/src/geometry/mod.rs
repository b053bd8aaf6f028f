//! Parametric jet-interface solids and their mass properties.

mod bracket;
mod params;
mod solid;
pub mod stl;

pub use bracket::{
    build_bracket, jet_mount_frame, part_placement, Drives, FixedValues, GeometryConfig, JetMountFrame, Part, PartShape,
    PartTemplate,
};
pub use params::{GeometryParams, ParamBound, ParamViolation, ANGLE, BOUNDS, DISTANCE, LENGTH, OFFSET};
pub use solid::{
    face_corners, mass_properties, parallel_axis, trilinear, Face, FaceRef, MassProperties, Primitive, Role, Shape, Solid,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("invalid design parameters: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidParams(Vec<ParamViolation>),
    #[error("degenerate primitive: {0}")]
    Degenerate(String),
    #[error("part template cannot realize design: {0}")]
    Template(String),
}
