use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::kinematics::{forward_kinematics, Kinematics};
use super::model::RobotModel;
use super::{so3, DynamicsError};

/// Configuration q = (p_B, R_B, s), velocity ν = (ṗ_B, ω_B, ṡ) and thrusts.
/// `omega_b` is expressed in the world frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub p_b: Vector3<f64>,
    pub r_b: Matrix3<f64>,
    pub s: DVector<f64>,
    pub v_b: Vector3<f64>,
    pub omega_b: Vector3<f64>,
    pub s_dot: DVector<f64>,
    pub thrust: DVector<f64>,
}

impl RobotState {
    /// Base at the origin, identity attitude, zero joints, velocities and thrusts.
    pub fn rest(model: &RobotModel) -> Self {
        let n = model.dofs();
        Self {
            p_b: Vector3::zeros(),
            r_b: Matrix3::identity(),
            s: DVector::zeros(n),
            v_b: Vector3::zeros(),
            omega_b: Vector3::zeros(),
            s_dot: DVector::zeros(n),
            thrust: DVector::zeros(model.thruster_count()),
        }
    }

    pub fn kinematics(&self, model: &RobotModel) -> Kinematics {
        forward_kinematics(model, &self.p_b, &self.r_b, &self.s)
    }

    /// Checks dimensions, SO(3) membership and the thrust and joint limits.
    pub fn validate(&self, model: &RobotModel) -> Result<(), DynamicsError> {
        let (n, np) = (model.dofs(), model.thruster_count());
        if self.s.len() != n || self.s_dot.len() != n || self.thrust.len() != np {
            return Err(DynamicsError::Dimension(format!(
                "expected {n} joints and {np} thrusters, got s:{} ṡ:{} T:{}",
                self.s.len(),
                self.s_dot.len(),
                self.thrust.len()
            )));
        }
        if so3::orthonormality_error(&self.r_b) > 1e-9 || self.r_b.determinant() <= 0.0 {
            return Err(DynamicsError::Dimension("R_B is not a rotation".into()));
        }
        let (lo, hi) = model.position_limits();
        for (d, &q) in self.s.iter().enumerate() {
            if !(lo[d] <= q && q <= hi[d]) {
                return Err(DynamicsError::Limits(format!("joint {d} at {q}")));
            }
        }
        for (t, &f) in model.thrusters.iter().zip(self.thrust.iter()) {
            if !(t.t_min <= f && f <= t.t_max) {
                return Err(DynamicsError::Limits(format!("{} at {f} N", t.name)));
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.p_b.iter().chain(self.r_b.iter()).chain(self.v_b.iter()).chain(self.omega_b.iter()).all(|x| x.is_finite())
            && self.s.iter().chain(self.s_dot.iter()).chain(self.thrust.iter()).all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentumFrame {
    /// Origin at the CoM, world orientation.
    Inertial,
    /// Origin at the CoM, base orientation.
    Body,
}

/// h = (l, w) about the CoM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CentroidalMomentum {
    pub l: Vector3<f64>,
    pub w: Vector3<f64>,
    pub frame: MomentumFrame,
}

impl CentroidalMomentum {
    pub fn to_body(self, r_b: &Matrix3<f64>) -> Self {
        match self.frame {
            MomentumFrame::Body => self,
            MomentumFrame::Inertial => Self { l: r_b.tr_mul(&self.l), w: r_b.tr_mul(&self.w), frame: MomentumFrame::Body },
        }
    }

    pub fn to_inertial(self, r_b: &Matrix3<f64>) -> Self {
        match self.frame {
            MomentumFrame::Inertial => self,
            MomentumFrame::Body => Self { l: r_b * self.l, w: r_b * self.w, frame: MomentumFrame::Inertial },
        }
    }
}

/// ḣ in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumRate {
    pub l_dot: Vector3<f64>,
    pub w_dot: Vector3<f64>,
}

/// Actuator command u = (Ṫ, ṡ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    pub t_dot: DVector<f64>,
    pub s_dot: DVector<f64>,
}

impl ControlInput {
    pub fn zeros(model: &RobotModel) -> Self {
        Self { t_dot: DVector::zeros(model.thruster_count()), s_dot: DVector::zeros(model.dofs()) }
    }

    /// Stacked as (Ṫ, ṡ).
    pub fn from_stacked(u: &DVector<f64>, np: usize) -> Self {
        Self { t_dot: u.rows(0, np).into_owned(), s_dot: u.rows(np, u.len() - np).into_owned() }
    }
}

pub(crate) fn rate_from_kinematics(kin: &Kinematics, thrust: &DVector<f64>, gravity: f64) -> MomentumRate {
    let mut l_dot = Vector3::new(0.0, 0.0, kin.mass * gravity);
    let mut w_dot = Vector3::zeros();
    for (k, &t) in thrust.iter().enumerate() {
        let f = kin.thruster_axis[k] * t;
        l_dot += f;
        w_dot += (kin.thruster_pos[k] - kin.com).cross(&f);
    }
    MomentumRate { l_dot, w_dot }
}

/// Thrust momentum-rate law: l̇ = m g e₃ + Σ a_k T_k, ẇ = Σ (p_k − p_G) × a_k T_k.
pub fn momentum_rate(model: &RobotModel, state: &RobotState) -> MomentumRate {
    rate_from_kinematics(&state.kinematics(model), &state.thrust, model.gravity)
}

/// Centroidal momentum from the velocity recursion over the link tree.
pub fn centroidal_momentum(model: &RobotModel, state: &RobotState) -> CentroidalMomentum {
    let kin = state.kinematics(model);
    let tree = &model.tree;
    let nl = model.links.len();
    let mut omega = vec![Vector3::zeros(); nl];
    let mut v_origin = vec![Vector3::zeros(); nl];
    omega[tree.root] = state.omega_b;
    v_origin[tree.root] = state.v_b;
    for &j in &tree.order {
        let joint = &model.joints[j];
        let (p, c) = (joint.parent, joint.child);
        let mut w = omega[p];
        if let Some(d) = tree.dof[j] {
            w += kin.axis[d] * state.s_dot[d];
        }
        v_origin[c] = v_origin[p] + omega[p].cross(&(kin.link_pos[c] - kin.link_pos[p]));
        omega[c] = w;
    }
    let mut l = Vector3::zeros();
    let mut w = Vector3::zeros();
    for i in 0..nl {
        let m = model.links[i].inertial.mass;
        let v = v_origin[i] + omega[i].cross(&(kin.link_com[i] - kin.link_pos[i]));
        l += m * v;
        w += kin.link_inertia[i] * omega[i] + m * (kin.link_com[i] - kin.com).cross(&v);
    }
    CentroidalMomentum { l, w, frame: MomentumFrame::Inertial }
}

impl Kinematics {
    /// h from the centroidal maps at this configuration.
    pub fn momentum(&self, state: &RobotState) -> CentroidalMomentum {
        let (l, w) = momentum_from_maps(self, &state.p_b, &state.v_b, &state.omega_b, &state.s_dot);
        CentroidalMomentum { l, w, frame: MomentumFrame::Inertial }
    }
}

/// l = m(ṗ_B + ω×(p_G − p_B) + J_G ṡ), w = I ω + A_s ṡ.
pub(crate) fn momentum_from_maps(
    kin: &Kinematics,
    p_b: &Vector3<f64>,
    v_b: &Vector3<f64>,
    omega: &Vector3<f64>,
    s_dot: &DVector<f64>,
) -> (Vector3<f64>, Vector3<f64>) {
    let l = kin.mass * (v_b + omega.cross(&(kin.com - p_b)) + &kin.j_g * s_dot);
    let w = kin.inertia * omega + &kin.a_s * s_dot;
    (l, w)
}

/// Inverse of [`momentum_from_maps`]: base velocity from (l, w) and ṡ.
pub(crate) fn base_velocity(
    kin: &Kinematics,
    p_b: &Vector3<f64>,
    l: &Vector3<f64>,
    w: &Vector3<f64>,
    s_dot: &DVector<f64>,
) -> Option<(Vector3<f64>, Vector3<f64>)> {
    let omega = kin.inertia.cholesky()?.solve(&(w - &kin.a_s * s_dot));
    let v = l / kin.mass - omega.cross(&(kin.com - p_b)) - &kin.j_g * s_dot;
    Some((v, omega))
}

/// Minimum-norm thrusts cancelling gravity with zero net moment about the
/// CoM, ignoring thrust limits. `None` if no exact balance exists.
pub fn hover_thrust(model: &RobotModel, state: &RobotState) -> Option<DVector<f64>> {
    let kin = state.kinematics(model);
    let np = model.thruster_count();
    let mut a = DMatrix::zeros(6, np);
    for k in 0..np {
        let ak = kin.thruster_axis[k];
        a.fixed_view_mut::<3, 1>(0, k).copy_from(&ak);
        a.fixed_view_mut::<3, 1>(3, k).copy_from(&(kin.thruster_pos[k] - kin.com).cross(&ak));
    }
    let mut b = DVector::zeros(6);
    b[2] = -kin.mass * model.gravity;
    let t = a.clone().svd(true, true).solve(&b, 1e-12).ok()?;
    ((&a * &t - &b).norm() <= 1e-9 * b.norm()).then_some(t)
}

fn clamp_rate(x: f64, rate: f64, lo: f64, hi: f64, dt: f64) -> f64 {
    ((x + rate * dt).clamp(lo, hi) - x) / dt
}

struct Deriv {
    v: Vector3<f64>,
    omega: Vector3<f64>,
    l_dot: Vector3<f64>,
    w_dot: Vector3<f64>,
}

/// Advances the plant by `dt` with fixed-step RK4.
///
/// Joints follow the commanded velocity exactly and thrusts integrate the
/// commanded rate, both saturated by their rate and position limits. The
/// centroidal momentum integrates the momentum-rate law and the base velocity
/// is recovered from it through the locked centroidal inertia.
pub fn step(model: &RobotModel, state: &RobotState, u: &ControlInput, dt: f64) -> Result<RobotState, DynamicsError> {
    let (n, np) = (model.dofs(), model.thruster_count());
    if u.t_dot.len() != np || u.s_dot.len() != n {
        return Err(DynamicsError::Dimension(format!(
            "input has {} thrust rates and {} joint rates",
            u.t_dot.len(),
            u.s_dot.len()
        )));
    }
    if !(dt > 0.0) {
        return Err(DynamicsError::Dimension(format!("time step {dt}")));
    }
    let td = DVector::from_fn(np, |k, _| {
        let t = &model.thrusters[k];
        clamp_rate(state.thrust[k], u.t_dot[k].clamp(t.tdot_min, t.tdot_max), t.t_min, t.t_max, dt)
    });
    let (lo, hi) = model.position_limits();
    let vmax: Vec<f64> = model.revolute_joints().map(|j| j.velocity).collect();
    let sd = DVector::from_fn(n, |d, _| clamp_rate(state.s[d], u.s_dot[d].clamp(-vmax[d], vmax[d]), lo[d], hi[d], dt));

    let kin0 = state.kinematics(model);
    let (l0, w0) = momentum_from_maps(&kin0, &state.p_b, &state.v_b, &state.omega_b, &state.s_dot);

    let eval = |tau: f64, p: &Vector3<f64>, r: &Matrix3<f64>, l: &Vector3<f64>, w: &Vector3<f64>| -> Option<Deriv> {
        let s = &state.s + &sd * tau;
        let thrust = &state.thrust + &td * tau;
        let kin = forward_kinematics(model, p, r, &s);
        let (v, omega) = base_velocity(&kin, p, l, w, &sd)?;
        let rate = rate_from_kinematics(&kin, &thrust, model.gravity);
        Some(Deriv { v, omega, l_dot: rate.l_dot, w_dot: rate.w_dot })
    };
    let singular = || DynamicsError::NonFinite("locked inertia".into());
    let stage = |tau: f64, k: &Deriv| -> Option<Deriv> {
        let p = state.p_b + k.v * tau;
        let r = so3::exp(&(k.omega * tau)) * state.r_b;
        eval(tau, &p, &r, &(l0 + k.l_dot * tau), &(w0 + k.w_dot * tau))
    };
    let k1 = eval(0.0, &state.p_b, &state.r_b, &l0, &w0).ok_or_else(singular)?;
    let k2 = stage(0.5 * dt, &k1).ok_or_else(singular)?;
    let k3 = stage(0.5 * dt, &k2).ok_or_else(singular)?;
    let k4 = stage(dt, &k3).ok_or_else(singular)?;
    let avg = |f: fn(&Deriv) -> Vector3<f64>| (f(&k1) + 2.0 * f(&k2) + 2.0 * f(&k3) + f(&k4)) * (dt / 6.0);

    let p_b = state.p_b + avg(|k| k.v);
    let r_b = so3::orthonormalize(&(so3::exp(&avg(|k| k.omega)) * state.r_b));
    let l = l0 + avg(|k| k.l_dot);
    let w = w0 + avg(|k| k.w_dot);
    let s = DVector::from_fn(n, |d, _| (state.s[d] + sd[d] * dt).clamp(lo[d], hi[d]));
    let thrust = DVector::from_fn(np, |k, _| {
        let t = &model.thrusters[k];
        (state.thrust[k] + td[k] * dt).clamp(t.t_min, t.t_max)
    });
    let kin = forward_kinematics(model, &p_b, &r_b, &s);
    let (v_b, omega_b) = base_velocity(&kin, &p_b, &l, &w, &sd).ok_or_else(singular)?;
    let next = RobotState { p_b, r_b, s, v_b, omega_b, s_dot: sd, thrust };
    if !next.is_finite() {
        return Err(DynamicsError::NonFinite("state".into()));
    }
    Ok(next)
}
