#![allow(dead_code)]

use jetdesign::dynamics::{so3, RobotModel, RobotState};
use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Uniformly random state within joint and thrust limits.
pub fn random_state(m: &RobotModel, rng: &mut ChaCha8Rng) -> RobotState {
    let mut st = RobotState::rest(m);
    let (lo, hi) = m.position_limits();
    let mut v3 = |s: f64| Vector3::new(rng.gen_range(-s..s), rng.gen_range(-s..s), rng.gen_range(-s..s));
    st.p_b = v3(2.0);
    st.r_b = so3::exp(&v3(3.0));
    st.v_b = v3(1.0);
    st.omega_b = v3(1.0);
    for d in 0..m.dofs() {
        st.s[d] = rng.gen_range(lo[d]..hi[d]);
        st.s_dot[d] = rng.gen_range(-1.0..1.0);
    }
    for k in 0..m.thruster_count() {
        st.thrust[k] = rng.gen_range(0.0..250.0);
    }
    st
}
