use nalgebra::{DVector, Matrix3, Matrix3xX, Vector3};

use crate::dynamics::{so3, Kinematics, RobotModel, RobotState};

/// Derivatives of the momentum rates, used to make l̈ and the body angular
/// channel affine in u = (Ṫ, ṡ).
///
/// The angular channel is τ_B = R_Bᵀ ẇ: the world moment about the CoM in
/// base axes. It depends on the joint angles and thrusts only.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumJacobians {
    pub l_dot: Vector3<f64>,
    pub tau_b: Vector3<f64>,
    /// ∂l̇/∂T: column k is a_k.
    pub dl_dt: Matrix3xX<f64>,
    /// ∂l̇/∂s at fixed base pose.
    pub dl_ds: Matrix3xX<f64>,
    /// ∂l̇/∂ω_B = −S(Σ a_k T_k).
    pub dl_domega: Matrix3<f64>,
    pub dtau_dt: Matrix3xX<f64>,
    pub dtau_ds: Matrix3xX<f64>,
    /// l̈ = m_l·u + l_drift, once ω_B is written in terms of w and ṡ.
    pub m_l: nalgebra::DMatrix<f64>,
    pub l_drift: Vector3<f64>,
    /// τ̇_B = m_tau·u + tau_drift.
    pub m_tau: nalgebra::DMatrix<f64>,
    pub tau_drift: Vector3<f64>,
}

pub fn momentum_jacobians(model: &RobotModel, state: &RobotState) -> MomentumJacobians {
    let kin = state.kinematics(model);
    jacobians_from(model, state, &kin)
}

pub(crate) fn jacobians_from(model: &RobotModel, state: &RobotState, kin: &Kinematics) -> MomentumJacobians {
    let (n, np) = (model.dofs(), model.thruster_count());
    let rt = state.r_b.transpose();
    let t = &state.thrust;
    let mut dl_dt = Matrix3xX::zeros(np);
    let mut dtau_dt = Matrix3xX::zeros(np);
    let mut dl_ds = Matrix3xX::zeros(n);
    let mut dtau_ds = Matrix3xX::zeros(n);
    let mut force = Vector3::zeros();
    let mut moment = Vector3::zeros();
    for k in 0..np {
        let a = kin.thruster_axis[k];
        let r = kin.thruster_pos[k] - kin.com;
        dl_dt.set_column(k, &a);
        dtau_dt.set_column(k, &(rt * r.cross(&a)));
        force += a * t[k];
        moment += r.cross(&a) * t[k];
        for j in 0..n {
            let mut r_dot = -kin.j_g.column(j).into_owned();
            let mut col = Vector3::zeros();
            if kin.moves_thruster(j, k) {
                let z = kin.axis[j];
                r_dot += z.cross(&(kin.thruster_pos[k] - kin.anchor[j]));
                let a_dot = z.cross(&a);
                dl_ds.column_mut(j).axpy(t[k], &a_dot, 1.0);
                col += r.cross(&a_dot);
            }
            col += r_dot.cross(&a);
            dtau_ds.column_mut(j).axpy(t[k], &(rt * col), 1.0);
        }
    }
    let dl_domega = -so3::hat(&force);
    let h = kin.momentum(state);
    let inv = kin.inertia.try_inverse().expect("locked inertia is positive definite");
    let omega_locked = inv * h.w;
    let mut m_l = nalgebra::DMatrix::zeros(3, np + n);
    m_l.view_mut((0, 0), (3, np)).copy_from(&dl_dt);
    m_l.view_mut((0, np), (3, n)).copy_from(&(&dl_ds - dl_domega * inv * &kin.a_s));
    let mut m_tau = nalgebra::DMatrix::zeros(3, np + n);
    m_tau.view_mut((0, 0), (3, np)).copy_from(&dtau_dt);
    m_tau.view_mut((0, np), (3, n)).copy_from(&dtau_ds);
    MomentumJacobians {
        l_dot: Vector3::new(0.0, 0.0, kin.mass * model.gravity) + force,
        tau_b: rt * moment,
        dl_dt,
        dl_ds,
        dl_domega,
        dtau_dt,
        dtau_ds,
        m_l,
        l_drift: dl_domega * omega_locked,
        m_tau,
        tau_drift: Vector3::zeros(),
    }
}

impl MomentumJacobians {
    /// Rates predicted for input `u` stacked as (Ṫ, ṡ).
    pub fn predict(&self, u: &DVector<f64>) -> (Vector3<f64>, Vector3<f64>) {
        let l = &self.m_l * u;
        let tau = &self.m_tau * u;
        (Vector3::new(l[0], l[1], l[2]) + self.l_drift, Vector3::new(tau[0], tau[1], tau[2]) + self.tau_drift)
    }
}
