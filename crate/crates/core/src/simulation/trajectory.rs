use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::SimulationError;
use crate::controller::ReferenceSample;
use crate::dynamics::so3;

/// One flight action. Translations are in metres along the world axes
/// (x forward, z up); yaw angles in degrees, clockwise seen from above
/// being negative about z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Segment {
    Takeoff { height: f64, settling_time: f64 },
    MoveForward { distance: f64, settling_time: f64 },
    MoveBackward { distance: f64, settling_time: f64 },
    MoveDown { distance: f64, settling_time: f64 },
    YawCw { angle_deg: f64, settling_time: f64 },
    YawCcw { angle_deg: f64, settling_time: f64 },
    Combined { translation: [f64; 3], yaw_deg: f64, settling_time: f64 },
}

impl Segment {
    pub fn settling_time(&self) -> f64 {
        match *self {
            Segment::Takeoff { settling_time, .. }
            | Segment::MoveForward { settling_time, .. }
            | Segment::MoveBackward { settling_time, .. }
            | Segment::MoveDown { settling_time, .. }
            | Segment::YawCw { settling_time, .. }
            | Segment::YawCcw { settling_time, .. }
            | Segment::Combined { settling_time, .. } => settling_time,
        }
    }

    pub fn translation(&self) -> Vector3<f64> {
        match *self {
            Segment::Takeoff { height, .. } => Vector3::new(0.0, 0.0, height),
            Segment::MoveForward { distance, .. } => Vector3::new(distance, 0.0, 0.0),
            Segment::MoveBackward { distance, .. } => Vector3::new(-distance, 0.0, 0.0),
            Segment::MoveDown { distance, .. } => Vector3::new(0.0, 0.0, -distance),
            Segment::Combined { translation, .. } => Vector3::from(translation),
            Segment::YawCw { .. } | Segment::YawCcw { .. } => Vector3::zeros(),
        }
    }

    /// Yaw change in radians, counter-clockwise positive.
    pub fn yaw(&self) -> f64 {
        match *self {
            Segment::YawCw { angle_deg, .. } => -angle_deg.to_radians(),
            Segment::YawCcw { angle_deg, .. } => angle_deg.to_radians(),
            Segment::Combined { yaw_deg, .. } => yaw_deg.to_radians(),
            _ => 0.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Segment::Takeoff { .. } => "takeoff",
            Segment::MoveForward { .. } => "move-forward",
            Segment::MoveBackward { .. } => "move-backward",
            Segment::MoveDown { .. } => "move-down",
            Segment::YawCw { .. } => "yaw-cw",
            Segment::YawCcw { .. } => "yaw-ccw",
            Segment::Combined { .. } => "combined",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    pub name: String,
    pub segments: Vec<Segment>,
}

pub const TRAJECTORY_NAMES: [&str; 7] = ["hover", "envelope", "traj1", "traj2", "traj3", "traj4", "traj5"];

/// The five validation trajectories.
pub const VALIDATION_TRAJECTORIES: [&str; 5] = ["traj1", "traj2", "traj3", "traj4", "traj5"];

impl TrajectorySpec {
    pub fn duration(&self) -> f64 {
        self.segments.iter().map(Segment::settling_time).sum()
    }

    /// Shipped envelopes, all 42 s long.
    pub fn named(name: &str) -> Result<Self, SimulationError> {
        use Segment::*;
        let segments = match name {
            "hover" => vec![Combined { translation: [0.0; 3], yaw_deg: 0.0, settling_time: 42.0 }],
            "envelope" => vec![
                Takeoff { height: 1.0, settling_time: 10.0 },
                MoveForward { distance: 1.0, settling_time: 10.0 },
                MoveDown { distance: 0.5, settling_time: 10.0 },
                YawCw { angle_deg: 90.0, settling_time: 12.0 },
            ],
            "traj1" => vec![
                Takeoff { height: 1.0, settling_time: 10.0 },
                MoveForward { distance: 1.0, settling_time: 8.0 },
                MoveDown { distance: 0.3, settling_time: 8.0 },
                MoveBackward { distance: 1.0, settling_time: 8.0 },
                MoveDown { distance: 0.3, settling_time: 8.0 },
            ],
            "traj2" => vec![
                Combined { translation: [0.0, 0.0, 1.0], yaw_deg: -90.0, settling_time: 10.0 },
                MoveForward { distance: 1.0, settling_time: 8.0 },
                YawCcw { angle_deg: 90.0, settling_time: 8.0 },
                MoveBackward { distance: 1.0, settling_time: 8.0 },
                Combined { translation: [0.0, 0.0, -0.5], yaw_deg: 45.0, settling_time: 8.0 },
            ],
            "traj3" => vec![
                Takeoff { height: 1.0, settling_time: 10.0 },
                MoveBackward { distance: 1.0, settling_time: 6.0 },
                MoveDown { distance: 0.3, settling_time: 8.0 },
                MoveForward { distance: 1.0, settling_time: 10.0 },
                MoveDown { distance: 0.3, settling_time: 8.0 },
            ],
            "traj4" => vec![
                Combined { translation: [0.0, 0.0, 1.0], yaw_deg: 90.0, settling_time: 10.0 },
                MoveBackward { distance: 1.0, settling_time: 8.0 },
                YawCw { angle_deg: 90.0, settling_time: 6.0 },
                MoveForward { distance: 1.0, settling_time: 8.0 },
                Combined { translation: [0.0, 0.0, -0.5], yaw_deg: -45.0, settling_time: 10.0 },
            ],
            "traj5" => vec![
                Takeoff { height: 1.0, settling_time: 6.0 },
                YawCcw { angle_deg: 90.0, settling_time: 8.0 },
                MoveForward { distance: 1.0, settling_time: 10.0 },
                Combined { translation: [0.0, 0.0, -0.5], yaw_deg: -90.0, settling_time: 8.0 },
                MoveBackward { distance: 1.0, settling_time: 10.0 },
            ],
            other => return Err(SimulationError::UnknownTrajectory(other.to_string())),
        };
        Ok(Self { name: name.to_string(), segments })
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        if self.segments.is_empty() {
            return Err(SimulationError::InvalidTrajectory(format!("{}: no segments", self.name)));
        }
        for (i, s) in self.segments.iter().enumerate() {
            let t = s.settling_time();
            if !(t > 0.0) || !t.is_finite() {
                return Err(SimulationError::InvalidTrajectory(format!("{}: segment {i} has settling time {t}", self.name)));
            }
            if !s.translation().iter().all(|x| x.is_finite()) || !s.yaw().is_finite() {
                return Err(SimulationError::InvalidTrajectory(format!("{}: segment {i} is not finite", self.name)));
            }
        }
        Ok(())
    }
}

/// Minimum-jerk blend 10τ³ − 15τ⁴ + 6τ⁵ and its first three derivatives
/// with respect to time for a segment of length `t_f`.
pub fn minimum_jerk(t: f64, t_f: f64) -> [f64; 4] {
    let tau = (t / t_f).clamp(0.0, 1.0);
    if t <= 0.0 {
        return [0.0; 4];
    }
    if t >= t_f {
        return [1.0, 0.0, 0.0, 0.0];
    }
    let (t2, t3) = (tau * tau, tau * tau * tau);
    [
        t3 * (10.0 - 15.0 * tau + 6.0 * t2),
        30.0 * t2 * (1.0 - tau).powi(2) / t_f,
        60.0 * tau * (1.0 - tau) * (1.0 - 2.0 * tau) / (t_f * t_f),
        60.0 * (1.0 - 6.0 * tau + 6.0 * t2) / (t_f * t_f * t_f),
    ]
}

/// Position and yaw with derivatives up to jerk at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
    pub jerk: Vector3<f64>,
    pub yaw: f64,
    pub yaw_rate: f64,
    pub yaw_acceleration: f64,
}

/// Reference generator for a validated spec.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub spec: TrajectorySpec,
    starts: Vec<f64>,
}

pub fn make_trajectory(spec: &TrajectorySpec) -> Result<Trajectory, SimulationError> {
    spec.validate()?;
    let mut starts = Vec::with_capacity(spec.segments.len());
    let mut t = 0.0;
    for s in &spec.segments {
        starts.push(t);
        t += s.settling_time();
    }
    Ok(Trajectory { spec: spec.clone(), starts })
}

impl Trajectory {
    pub fn named(name: &str) -> Result<Self, SimulationError> {
        make_trajectory(&TrajectorySpec::named(name)?)
    }

    pub fn duration(&self) -> f64 {
        self.spec.duration()
    }

    /// Offsets relative to the start pose.
    pub fn point(&self, t: f64) -> TrajectoryPoint {
        let mut p = TrajectoryPoint {
            position: Vector3::zeros(),
            velocity: Vector3::zeros(),
            acceleration: Vector3::zeros(),
            jerk: Vector3::zeros(),
            yaw: 0.0,
            yaw_rate: 0.0,
            yaw_acceleration: 0.0,
        };
        for (s, &t0) in self.spec.segments.iter().zip(&self.starts) {
            let [x, v, a, j] = minimum_jerk(t - t0, s.settling_time());
            let (d, psi) = (s.translation(), s.yaw());
            p.position += d * x;
            p.velocity += d * v;
            p.acceleration += d * a;
            p.jerk += d * j;
            p.yaw += psi * x;
            p.yaw_rate += psi * v;
            p.yaw_acceleration += psi * a;
        }
        p
    }

    /// Controller reference at time `t` for a robot of mass `mass` starting
    /// with its CoM at `start` and base attitude `r0`.
    pub fn sample(&self, t: f64, start: &Vector3<f64>, r0: &Matrix3<f64>, mass: f64) -> ReferenceSample {
        let p = self.point(t);
        ReferenceSample {
            position: start + p.position,
            l_d: p.velocity * mass,
            l_dot_d: p.acceleration * mass,
            l_ddot_d: p.jerk * mass,
            r_d: so3::exp(&Vector3::new(0.0, 0.0, p.yaw)) * r0,
            omega_d: Vector3::new(0.0, 0.0, p.yaw_rate),
            omega_dot_d: Vector3::new(0.0, 0.0, p.yaw_acceleration),
        }
    }
}
