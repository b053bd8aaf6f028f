//! Flight references, the closed-loop run (controller + plant) and the
//! flight objectives.

mod fitness;
mod trajectory;

pub use fitness::{compute_fitness, ErrorAggregation, FitnessVector};
pub use trajectory::{
    make_trajectory, minimum_jerk, Segment, Trajectory, TrajectoryPoint, TrajectorySpec, TRAJECTORY_NAMES,
    VALIDATION_TRAJECTORIES,
};

use std::fmt;
use std::io::Write;

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::controller::{Controller, ControllerError, ControllerGains, QpStatus};
use crate::dynamics::{self, hover_thrust, so3, JointGroup, RobotModel, RobotState};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimulationError {
    #[error("unknown trajectory {0:?}")]
    UnknownTrajectory(String),
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("invalid simulation setting: {0}")]
    Invalid(String),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error("run failed: {0}")]
    FailedRun(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    /// Controller and plant step (s).
    pub dt: f64,
    /// Flight is aborted once the CoM is farther than this from its reference (m).
    pub tracking_limit: f64,
    /// Divergence bound on ‖p_G‖ (m).
    pub divergence_limit: f64,
    pub aggregation: ErrorAggregation,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { dt: 0.01, tracking_limit: 1.0, divergence_limit: 1e3, aggregation: ErrorAggregation::SumThenNorm }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cause", rename_all = "kebab-case")]
pub enum FlightFailure {
    /// No admissible thrusts balance the robot at the start pose.
    CannotHover,
    QpFailure {
        time: f64,
    },
    NonFinite {
        time: f64,
        detail: String,
    },
    Diverged {
        time: f64,
    },
    TrackingLost {
        time: f64,
        error: f64,
    },
}

impl fmt::Display for FlightFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlightFailure::CannotHover => write!(f, "no admissible hover thrust at the start pose"),
            FlightFailure::QpFailure { time } => write!(f, "QP failure at t = {time:.2} s"),
            FlightFailure::NonFinite { time, detail } => write!(f, "non-finite state at t = {time:.2} s: {detail}"),
            FlightFailure::Diverged { time } => write!(f, "CoM diverged at t = {time:.2} s"),
            FlightFailure::TrackingLost { time, error } => write!(f, "tracking lost at t = {time:.2} s ({error:.2} m off)"),
        }
    }
}

impl FlightFailure {
    pub fn kind(&self) -> &'static str {
        match self {
            FlightFailure::CannotHover => "cannot-hover",
            FlightFailure::QpFailure { .. } => "qp-failure",
            FlightFailure::NonFinite { .. } => "non-finite",
            FlightFailure::Diverged { .. } => "diverged",
            FlightFailure::TrackingLost { .. } => "tracking-lost",
        }
    }
}

/// One control period: the state at its start, the references, and the
/// command that was applied.
#[derive(Debug, Clone, PartialEq)]
pub struct LogSample {
    pub time: f64,
    pub p_b: Vector3<f64>,
    /// Base attitude as roll, pitch, yaw.
    pub rpy: Vector3<f64>,
    pub s: DVector<f64>,
    pub v_b: Vector3<f64>,
    pub omega_b: Vector3<f64>,
    /// Applied joint velocity and its postural target ṡ*.
    pub s_dot: DVector<f64>,
    pub s_dot_d: DVector<f64>,
    pub thrust: DVector<f64>,
    pub t_dot: DVector<f64>,
    pub l: Vector3<f64>,
    pub l_d: Vector3<f64>,
    /// Angular momentum and its reference in base axes.
    pub w: Vector3<f64>,
    pub w_d: Vector3<f64>,
    pub p_g: Vector3<f64>,
    pub p_g_d: Vector3<f64>,
    pub qp_status: QpStatus,
    pub active_set: usize,
    pub residual_l: f64,
    pub residual_w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimLog {
    pub trajectory: String,
    pub dt: f64,
    pub torso_dofs: Vec<usize>,
    pub arm_dofs: Vec<usize>,
    pub joint_names: Vec<String>,
    pub thruster_names: Vec<String>,
    pub samples: Vec<LogSample>,
    pub failure: Option<FlightFailure>,
}

impl SimLog {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }

    pub fn csv_header(&self) -> Vec<String> {
        let mut h: Vec<String> = vec!["time".into()];
        let xyz = |p: &str| ["x", "y", "z"].map(|a| format!("{p}_{a}"));
        h.extend(xyz("p_b"));
        h.extend(["roll", "pitch", "yaw"].map(String::from));
        h.extend(self.joint_names.iter().map(|j| format!("s_{j}")));
        h.extend(xyz("v_b"));
        h.extend(xyz("omega_b"));
        h.extend(self.joint_names.iter().map(|j| format!("sdot_{j}")));
        h.extend(self.joint_names.iter().map(|j| format!("sdot_ref_{j}")));
        h.extend(self.thruster_names.iter().map(|t| format!("thrust_{t}")));
        h.extend(self.thruster_names.iter().map(|t| format!("tdot_{t}")));
        for p in ["l", "l_ref", "w", "w_ref", "p_g", "p_g_ref"] {
            h.extend(xyz(p));
        }
        h.extend(["qp_status", "active_set", "residual_l", "residual_w"].map(String::from));
        h
    }

    /// Writes one row per control period with the columns of [`SimLog::csv_header`].
    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "{}", self.csv_header().join(","))?;
        for r in &self.samples {
            let mut row: Vec<String> = vec![format!("{:.2}", r.time)];
            let mut push = |xs: &[f64]| row.extend(xs.iter().map(|x| format!("{x:e}")));
            push(r.p_b.as_slice());
            push(r.rpy.as_slice());
            push(r.s.as_slice());
            push(r.v_b.as_slice());
            push(r.omega_b.as_slice());
            push(r.s_dot.as_slice());
            push(r.s_dot_d.as_slice());
            push(r.thrust.as_slice());
            push(r.t_dot.as_slice());
            for v in [&r.l, &r.l_d, &r.w, &r.w_d, &r.p_g, &r.p_g_d] {
                push(v.as_slice());
            }
            let status = match r.qp_status {
                QpStatus::Success => "success",
                QpStatus::Failure => "failure",
            };
            row.push(status.into());
            row.push(r.active_set.to_string());
            row.push(format!("{:e}", r.residual_l));
            row.push(format!("{:e}", r.residual_w));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Hover start: base at the origin, identity attitude, zero joints and the
/// minimum-norm balancing thrusts.
pub fn hover_start(model: &RobotModel) -> Option<RobotState> {
    let mut st = RobotState::rest(model);
    st.thrust = hover_thrust(model, &st)?;
    st.validate(model).ok()?;
    Some(st)
}

/// Closed-loop flight over the whole trajectory. Failures end the run early
/// and are recorded in the log.
pub fn run_flight(
    model: &RobotModel,
    gains: &ControllerGains,
    trajectory: &Trajectory,
    config: &SimulationConfig,
) -> Result<SimLog, SimulationError> {
    if !(config.dt > 0.0) || !(config.tracking_limit > 0.0) || !(config.divergence_limit > 0.0) {
        return Err(SimulationError::Invalid(format!("{config:?}")));
    }
    let mut controller = Controller::new(model, gains)?;
    let dt = config.dt;
    let n_t = (trajectory.duration() / dt).round() as usize;
    let mut log = SimLog {
        trajectory: trajectory.spec.name.clone(),
        dt,
        torso_dofs: model.group_dofs(JointGroup::Torso),
        arm_dofs: model.group_dofs(JointGroup::Arms),
        joint_names: model.revolute_joints().map(|j| j.name.clone()).collect(),
        thruster_names: model.thrusters.iter().map(|t| t.name.clone()).collect(),
        samples: Vec::with_capacity(n_t),
        failure: None,
    };
    let Some(mut state) = hover_start(model) else {
        log.failure = Some(FlightFailure::CannotHover);
        return Ok(log);
    };
    let start = state.kinematics(model).com;
    let r0 = state.r_b;
    let mass = model.mass();
    for i in 0..n_t {
        let time = i as f64 * dt;
        let reference = trajectory.sample(time, &start, &r0, mass);
        let out = controller.step(model, &state, &reference, dt);
        let p_g = state.kinematics(model).com;
        let next = dynamics::step(model, &state, &out.input, dt);
        log.samples.push(LogSample {
            time,
            p_b: state.p_b,
            rpy: so3::to_rpy(&state.r_b),
            s: state.s.clone(),
            v_b: state.v_b,
            omega_b: state.omega_b,
            s_dot: next.as_ref().map(|n| n.s_dot.clone()).unwrap_or_else(|_| out.input.s_dot.clone()),
            s_dot_d: out.s_dot_ref.clone(),
            thrust: state.thrust.clone(),
            t_dot: out.input.t_dot.clone(),
            l: reference.l_d + out.l_error,
            l_d: reference.l_d,
            w: out.w_d + out.w_error,
            w_d: out.w_d,
            p_g,
            p_g_d: reference.position,
            qp_status: out.status,
            active_set: out.active_set,
            residual_l: out.residual_l,
            residual_w: out.residual_w,
        });
        if out.status == QpStatus::Failure {
            log.failure = Some(FlightFailure::QpFailure { time });
            break;
        }
        state = match next {
            Ok(s) => s,
            Err(e) => {
                log.failure = Some(FlightFailure::NonFinite { time, detail: e.to_string() });
                break;
            }
        };
        let com = state.kinematics(model).com;
        if com.norm() > config.divergence_limit {
            log.failure = Some(FlightFailure::Diverged { time: time + dt });
            break;
        }
        let error = (com - trajectory.sample(time + dt, &start, &r0, mass).position).norm();
        if error > config.tracking_limit {
            log.failure = Some(FlightFailure::TrackingLost { time: time + dt, error });
            break;
        }
    }
    Ok(log)
}
