//! Floating-base multibody model with thrusters: kinematics, centroidal
//! momentum, the thrust momentum-rate law and the flight plant integrator.

mod kinematics;
mod model;
pub mod so3;
mod state;
mod urdf;

pub use kinematics::{forward_kinematics, Kinematics};
pub use model::{JetInterface, Joint, JointGroup, JointKind, Link, Origin, RobotModel, Thruster, DEFAULT_MODEL};
pub use state::{
    centroidal_momentum, hover_thrust, momentum_rate, step, CentroidalMomentum, ControlInput, MomentumFrame, MomentumRate,
    RobotState,
};
pub use urdf::{apply_design, emit_model, load_model, parse_urdf, write_urdf};

use crate::geometry::GeometryError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("model parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("link {0:?} has missing or non-physical inertial data")]
    Inertial(String),
    #[error("{0:?} has a non-unit axis")]
    Axis(String),
    #[error("{0:?} has inconsistent limits")]
    Limits(String),
    #[error("state dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite {0} after integration step")]
    NonFinite(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
