//! Momentum-based flight controller: relative-degree-augmented momentum
//! dynamics, desired closed-loop dynamics and a box-constrained QP allocation
//! over u = (Ṫ, ṡ).

mod jacobians;
mod qp;

pub use jacobians::{momentum_jacobians, MomentumJacobians};
pub use qp::{solve_qp, Bound, QpProblem, QpSolution, QpStatus};

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::dynamics::{so3, ControlInput, RobotModel, RobotState};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ControllerError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("gain {name} is not symmetric positive definite")]
    NotPositiveDefinite { name: &'static str },
    #[error("invalid controller setting: {0}")]
    Invalid(String),
}

/// A gain matrix written as a scalar (times identity), a diagonal or a full matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gain {
    Scalar(f64),
    Diagonal(Vec<f64>),
    Full(Vec<Vec<f64>>),
}

impl Gain {
    /// Resolves to a `dim × dim` symmetric positive-definite matrix.
    pub fn matrix(&self, dim: usize, name: &'static str) -> Result<DMatrix<f64>, ControllerError> {
        self.resolve(dim, name, false)
    }

    fn resolve(&self, dim: usize, name: &'static str, zero_ok: bool) -> Result<DMatrix<f64>, ControllerError> {
        let m = match self {
            Gain::Scalar(k) => DMatrix::identity(dim, dim) * *k,
            Gain::Diagonal(d) if d.len() == dim => DMatrix::from_diagonal(&DVector::from_column_slice(d)),
            Gain::Full(rows) if rows.len() == dim && rows.iter().all(|r| r.len() == dim) => {
                DMatrix::from_fn(dim, dim, |i, j| rows[i][j])
            }
            _ => return Err(ControllerError::Dimension(format!("gain {name} must be {dim}×{dim}"))),
        };
        let symmetric = (&m - m.transpose()).amax() <= 1e-12 * m.amax();
        let definite = (zero_ok && m.amax() == 0.0) || m.clone().cholesky().is_some();
        if dim > 0 && (!symmetric || !definite) {
            return Err(ControllerError::NotPositiveDefinite { name });
        }
        Ok(m)
    }

    fn matrix3(&self, name: &'static str, zero_ok: bool) -> Result<Matrix3<f64>, ControllerError> {
        Ok(self.resolve(3, name, zero_ok)?.fixed_view::<3, 3>(0, 0).into_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerGains {
    /// Linear momentum loop. `ki` may be zero.
    pub kp: Gain,
    pub kd: Gain,
    pub ki: Gain,
    /// Attitude loop: angular momentum, its rate and the SO(3) error.
    pub kp_w: Gain,
    pub kd_w: Gain,
    pub k_r: Gain,
    /// Task weights λ₁ (linear), λ₂ (angular), λ₃ (posture).
    pub lambda: [f64; 3],
    pub k_post: Gain,
    /// Postural reference; zero when absent.
    pub s_ref: Option<Vec<f64>>,
    /// ε added to the QP Hessian diagonal.
    pub regularization: f64,
    /// Anti-windup clamp on each integral channel.
    pub integral_limit: f64,
    /// Caps every input upper bound (actuation-removal hook).
    pub u_max_override: Option<f64>,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            kp: Gain::Scalar(5.0),
            kd: Gain::Scalar(4.0),
            ki: Gain::Scalar(0.5),
            kp_w: Gain::Scalar(5.0),
            kd_w: Gain::Scalar(4.0),
            k_r: Gain::Scalar(5.0),
            lambda: [1.0, 1.0, 0.1],
            k_post: Gain::Scalar(2.0),
            s_ref: None,
            regularization: 1e-9,
            integral_limit: 10.0,
            u_max_override: None,
        }
    }
}

/// Gains resolved against a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedGains {
    pub kp: Matrix3<f64>,
    pub kd: Matrix3<f64>,
    pub ki: Matrix3<f64>,
    pub kp_w: Matrix3<f64>,
    pub kd_w: Matrix3<f64>,
    pub k_r: Matrix3<f64>,
    pub lambda: [f64; 3],
    pub k_post: DMatrix<f64>,
    pub s_ref: DVector<f64>,
    pub regularization: f64,
    pub integral_limit: f64,
    pub u_max_override: Option<f64>,
}

impl ControllerGains {
    pub fn resolve(&self, n: usize) -> Result<ResolvedGains, ControllerError> {
        if !self.lambda.iter().all(|&l| l >= 0.0 && l.is_finite()) || self.lambda.iter().all(|&l| l == 0.0) {
            return Err(ControllerError::Invalid(format!("task weights {:?}", self.lambda)));
        }
        if !(self.regularization > 0.0) || !(self.integral_limit >= 0.0) {
            return Err(ControllerError::Invalid("regularization must be positive, integral limit nonnegative".into()));
        }
        let s_ref = match &self.s_ref {
            None => DVector::zeros(n),
            Some(v) if v.len() == n => DVector::from_column_slice(v),
            Some(v) => return Err(ControllerError::Dimension(format!("s_ref has {} entries for {n} joints", v.len()))),
        };
        Ok(ResolvedGains {
            kp: self.kp.matrix3("kp", false)?,
            kd: self.kd.matrix3("kd", false)?,
            ki: self.ki.matrix3("ki", true)?,
            kp_w: self.kp_w.matrix3("kp_w", false)?,
            kd_w: self.kd_w.matrix3("kd_w", false)?,
            k_r: self.k_r.matrix3("k_r", false)?,
            lambda: self.lambda,
            k_post: self.k_post.matrix(n, "k_post")?,
            s_ref,
            regularization: self.regularization,
            integral_limit: self.integral_limit,
            u_max_override: self.u_max_override,
        })
    }
}

/// l̈* = l̈_d − K_D(l̇ − l̇_d) − K_P(l − l_d) − K_I ∫(l − l_d).
pub fn desired_linear_dynamics(
    l: &Vector3<f64>,
    l_d: &Vector3<f64>,
    l_dot: &Vector3<f64>,
    l_dot_d: &Vector3<f64>,
    l_ddot_d: &Vector3<f64>,
    integral: &Vector3<f64>,
    gains: &ResolvedGains,
) -> Vector3<f64> {
    l_ddot_d - gains.kd * (l_dot - l_dot_d) - gains.kp * (l - l_d) - gains.ki * integral
}

/// Attitude law in base axes:
/// ẅ* = ẇ_d − K_D^w(ẇ − ẇ_d) − K_P^w(w − w_d) − K_R·log(R_dᵀR_B).
#[allow(clippy::too_many_arguments)]
pub fn desired_angular_dynamics(
    r_b: &Matrix3<f64>,
    r_d: &Matrix3<f64>,
    w: &Vector3<f64>,
    w_d: &Vector3<f64>,
    w_dot: &Vector3<f64>,
    w_dot_d: &Vector3<f64>,
    gains: &ResolvedGains,
) -> Vector3<f64> {
    w_dot_d - gains.kd_w * (w_dot - w_dot_d) - gains.kp_w * (w - w_d) - gains.k_r * so3::log(&(r_d.transpose() * r_b))
}

/// Stacks the linear, angular and postural tasks as ½‖W(Mu − β)‖² plus ε‖u‖².
pub fn build_qp(
    jac: &MomentumJacobians,
    l_ddot_star: &Vector3<f64>,
    w_ddot_star: &Vector3<f64>,
    s_dot_star: &DVector<f64>,
    gains: &ResolvedGains,
    lower: DVector<f64>,
    upper: DVector<f64>,
) -> Result<QpProblem, ControllerError> {
    let dim = jac.m_l.ncols();
    let np = jac.dl_dt.ncols();
    let n = dim - np;
    if s_dot_star.len() != n || lower.len() != dim || upper.len() != dim {
        return Err(ControllerError::Dimension(format!(
            "{} joint targets and {}/{} bounds for {np} thrusters and {n} joints",
            s_dot_star.len(),
            lower.len(),
            upper.len()
        )));
    }
    let [l1, l2, l3] = gains.lambda;
    let beta_l = l_ddot_star - jac.l_drift;
    let beta_w = w_ddot_star - jac.tau_drift;
    let mut h = jac.m_l.tr_mul(&jac.m_l) * l1 + jac.m_tau.tr_mul(&jac.m_tau) * l2;
    let mut c = -(jac.m_l.tr_mul(&DVector::from_column_slice(beta_l.as_slice())) * l1
        + jac.m_tau.tr_mul(&DVector::from_column_slice(beta_w.as_slice())) * l2);
    for j in 0..n {
        h[(np + j, np + j)] += l3;
        c[np + j] -= l3 * s_dot_star[j];
    }
    for i in 0..dim {
        h[(i, i)] += gains.regularization;
    }
    let h = (&h + h.transpose()) * 0.5;
    let problem = QpProblem { h, c, lower, upper };
    problem.validate()?;
    Ok(problem)
}

/// Box bounds on u = (Ṫ, ṡ): rate limits, tightened so that one step of
/// length `dt` keeps thrusts and joint angles within their limits.
pub fn input_bounds(
    model: &RobotModel,
    state: &RobotState,
    dt: f64,
    u_max_override: Option<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let np = model.thruster_count();
    let mut lower = DVector::zeros(np + model.dofs());
    let mut upper = lower.clone();
    for (k, t) in model.thrusters.iter().enumerate() {
        lower[k] = t.tdot_min.max((t.t_min - state.thrust[k]) / dt);
        upper[k] = t.tdot_max.min((t.t_max - state.thrust[k]) / dt);
    }
    for (d, j) in model.revolute_joints().enumerate() {
        lower[np + d] = (-j.velocity).max((j.lower - state.s[d]) / dt);
        upper[np + d] = j.velocity.min((j.upper - state.s[d]) / dt);
    }
    for i in 0..lower.len() {
        if let Some(cap) = u_max_override {
            upper[i] = upper[i].min(cap);
        }
        lower[i] = lower[i].min(upper[i]);
    }
    (lower, upper)
}

/// One sample of the flight reference. Angular references are given as a
/// world angular velocity and acceleration and converted to momentum through
/// the locked inertia.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSample {
    /// Desired CoM position.
    pub position: Vector3<f64>,
    pub l_d: Vector3<f64>,
    pub l_dot_d: Vector3<f64>,
    pub l_ddot_d: Vector3<f64>,
    pub r_d: Matrix3<f64>,
    pub omega_d: Vector3<f64>,
    pub omega_dot_d: Vector3<f64>,
}

impl ReferenceSample {
    /// Stationary reference at `position` with attitude `r_d`.
    pub fn hold(position: Vector3<f64>, r_d: Matrix3<f64>) -> Self {
        Self {
            position,
            l_d: Vector3::zeros(),
            l_dot_d: Vector3::zeros(),
            l_ddot_d: Vector3::zeros(),
            r_d,
            omega_d: Vector3::zeros(),
            omega_dot_d: Vector3::zeros(),
        }
    }
}

/// Controller output and per-step diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    pub input: ControlInput,
    pub status: QpStatus,
    /// ṡ* postural target.
    pub s_dot_ref: DVector<f64>,
    /// l − l_d and w − w_d (base axes).
    pub l_error: Vector3<f64>,
    pub w_error: Vector3<f64>,
    pub w_d: Vector3<f64>,
    pub active_set: usize,
    /// ‖predicted − desired‖ for the linear and angular tasks.
    pub residual_l: f64,
    pub residual_w: f64,
}

/// Holds the gains and the integral of the linear momentum error.
#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    pub gains: ResolvedGains,
    pub integral: Vector3<f64>,
}

impl Controller {
    pub fn new(model: &RobotModel, gains: &ControllerGains) -> Result<Self, ControllerError> {
        Ok(Self { gains: gains.resolve(model.dofs())?, integral: Vector3::zeros() })
    }

    /// Jacobians → desired dynamics → QP.
    pub fn step(&mut self, model: &RobotModel, state: &RobotState, reference: &ReferenceSample, dt: f64) -> ControlOutput {
        let g = &self.gains;
        let kin = state.kinematics(model);
        let jac = jacobians::jacobians_from(model, state, &kin);
        let h = kin.momentum(state);
        let l_error = h.l - reference.l_d;
        let lim = g.integral_limit;
        self.integral = (self.integral + l_error * dt).map(|x| x.clamp(-lim, lim));
        let l_star =
            desired_linear_dynamics(&h.l, &reference.l_d, &jac.l_dot, &reference.l_dot_d, &reference.l_ddot_d, &self.integral, g);
        let rt = state.r_b.transpose();
        let w_b = rt * h.w;
        let w_d = rt * kin.inertia * reference.omega_d;
        let w_dot_d = rt * kin.inertia * reference.omega_dot_d;
        let w_star = desired_angular_dynamics(&state.r_b, &reference.r_d, &w_b, &w_d, &jac.tau_b, &w_dot_d, g);
        let s_dot_ref = &g.k_post * (&g.s_ref - &state.s);
        let (lower, upper) = input_bounds(model, state, dt, g.u_max_override);
        let np = model.thruster_count();
        let solution = build_qp(&jac, &l_star, &w_star, &s_dot_ref, g, lower, upper).map(|p| solve_qp(&p));
        let (u, status, active_set) = match solution {
            Ok(s) => (s.u.clone(), s.status, s.active_count()),
            Err(_) => (DVector::zeros(np + model.dofs()), QpStatus::Failure, 0),
        };
        let (l_pred, w_pred) = jac.predict(&u);
        ControlOutput {
            input: ControlInput::from_stacked(&u, np),
            status,
            s_dot_ref,
            l_error,
            w_error: w_b - w_d,
            w_d,
            active_set,
            residual_l: (l_pred - l_star).norm(),
            residual_w: (w_pred - w_star).norm(),
        }
    }
}
