//! Rotation helpers.

use nalgebra::{Matrix3, Rotation3, Vector3};

/// Skew-symmetric matrix S(v) with S(v)·x = v × x.
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`] on the skew part of `m`.
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) / 2.0
}

/// Rodrigues exponential.
pub fn exp(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let k = hat(phi);
    if theta < 1e-8 {
        return Matrix3::identity() + k + k * k / 2.0;
    }
    Matrix3::identity() + k * (theta.sin() / theta) + k * k * ((1.0 - theta.cos()) / (theta * theta))
}

/// Rotation vector of `r` (angle in [0, π]). Near π the axis is taken from
/// the symmetric part, since the skew part vanishes there.
pub fn log(r: &Matrix3<f64>) -> Vector3<f64> {
    let v = vee(r);
    let sin = v.norm();
    let theta = sin.atan2((r.trace() - 1.0) / 2.0);
    if theta < 1e-6 {
        return v * (1.0 + theta * theta / 6.0);
    }
    if std::f64::consts::PI - theta > 1e-4 {
        return v * (theta / sin);
    }
    // R ≈ 2aaᵀ − I: pick the best-conditioned column of (R + I)/2
    let b = (r + Matrix3::identity()) / 2.0;
    let i = (0..3).max_by(|&a, &c| b[(a, a)].total_cmp(&b[(c, c)])).unwrap();
    let mut axis = b.column(i) / b[(i, i)].max(1e-300).sqrt();
    axis.normalize_mut();
    // orientation of the axis from the (small) skew part when available
    if axis.dot(&vee(r)) < 0.0 {
        axis = -axis;
    }
    axis * theta
}

/// Nearest rotation matrix (polar decomposition).
pub fn orthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut d = Matrix3::identity();
    if (u * vt).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    u * d * vt
}

/// URDF fixed-axis roll-pitch-yaw: R = Rz(yaw)·Ry(pitch)·Rx(roll).
pub fn from_rpy(rpy: &Vector3<f64>) -> Matrix3<f64> {
    *Rotation3::from_euler_angles(rpy.x, rpy.y, rpy.z).matrix()
}

pub fn to_rpy(r: &Matrix3<f64>) -> Vector3<f64> {
    let (roll, pitch, yaw) = Rotation3::from_matrix_unchecked(*r).euler_angles();
    Vector3::new(roll, pitch, yaw)
}

/// ‖RᵀR − I‖ (Frobenius).
pub fn orthonormality_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rz(a: f64) -> Matrix3<f64> {
        *Rotation3::from_axis_angle(&Vector3::z_axis(), a).matrix()
    }

    #[test]
    fn yaw_log() {
        let v = log(&rz(std::f64::consts::FRAC_PI_2));
        assert!((v - Vector3::new(0.0, 0.0, std::f64::consts::FRAC_PI_2)).norm() < 1e-14);
    }

    #[test]
    fn log_at_pi() {
        let axis = Vector3::new(1.0, 2.0, -2.0).normalize();
        let r = exp(&(axis * std::f64::consts::PI));
        let v = log(&r);
        assert!((v.norm() - std::f64::consts::PI).abs() < 1e-7);
        assert!((exp(&v) - r).norm() < 1e-7);
    }

    #[test]
    fn exp_matches_nalgebra() {
        let phi = Vector3::new(0.3, -1.2, 0.7);
        let r = Rotation3::from_scaled_axis(phi);
        assert!((exp(&phi) - r.matrix()).norm() < 1e-14);
    }

    #[test]
    fn rpy_convention() {
        let rpy = Vector3::new(0.1, -0.4, 2.0);
        let expected = rz(2.0)
            * Rotation3::from_axis_angle(&Vector3::y_axis(), -0.4).matrix()
            * Rotation3::from_axis_angle(&Vector3::x_axis(), 0.1).matrix();
        assert!((from_rpy(&rpy) - expected).norm() < 1e-15);
        assert!((to_rpy(&from_rpy(&rpy)) - rpy).norm() < 1e-14);
    }

    proptest! {
        #[test]
        fn exp_log_round_trip(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0, s in 0.0f64..3.1) {
            let v = Vector3::new(x, y, z);
            prop_assume!(v.norm() > 1e-3);
            let phi = v.normalize() * s;
            prop_assert!((log(&exp(&phi)) - phi).norm() < 1e-9);
            prop_assert!(orthonormality_error(&exp(&phi)) < 1e-14);
        }

        #[test]
        fn orthonormalize_repairs_drift(x in -1.0f64..1.0, y in -1.0f64..1.0, e in -1e-6f64..1e-6) {
            let r = exp(&Vector3::new(x, y, 0.2)) + Matrix3::repeat(e);
            let q = orthonormalize(&r);
            prop_assert!(orthonormality_error(&q) < 1e-14);
            prop_assert!(q.determinant() > 0.0);
        }
    }
}
