mod common;

use approx::assert_relative_eq;
use common::random_state;
use jetdesign::controller::*;
use jetdesign::dynamics::{self, so3, ControlInput, RobotModel, RobotState};
use nalgebra::{DMatrix, DVector, Matrix3, Matrix3xX, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn model() -> RobotModel {
    RobotModel::default_model()
}

fn gains(m: &RobotModel) -> ResolvedGains {
    ControllerGains::default().resolve(m.dofs()).unwrap()
}

fn rel_err(a: &Matrix3xX<f64>, b: &Matrix3xX<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// Central differences of the momentum rates, all at the given thrusts.
fn fd_blocks(m: &RobotModel, st: &RobotState, h: f64) -> [Matrix3xX<f64>; 5] {
    let (n, np) = (m.dofs(), m.thruster_count());
    let rates = |s: &RobotState| {
        let r = dynamics::momentum_rate(m, s);
        (r.l_dot, s.r_b.transpose() * r.w_dot)
    };
    let mut dl_dt = Matrix3xX::zeros(np);
    let mut dtau_dt = Matrix3xX::zeros(np);
    for k in 0..np {
        let (mut p, mut q) = (st.clone(), st.clone());
        p.thrust[k] += h;
        q.thrust[k] -= h;
        let ((lp, tp), (lq, tq)) = (rates(&p), rates(&q));
        dl_dt.set_column(k, &((lp - lq) / (2.0 * h)));
        dtau_dt.set_column(k, &((tp - tq) / (2.0 * h)));
    }
    let mut dl_ds = Matrix3xX::zeros(n);
    let mut dtau_ds = Matrix3xX::zeros(n);
    for j in 0..n {
        let (mut p, mut q) = (st.clone(), st.clone());
        p.s[j] += h;
        q.s[j] -= h;
        let ((lp, tp), (lq, tq)) = (rates(&p), rates(&q));
        dl_ds.set_column(j, &((lp - lq) / (2.0 * h)));
        dtau_ds.set_column(j, &((tp - tq) / (2.0 * h)));
    }
    let mut dl_domega = Matrix3xX::zeros(3);
    for i in 0..3 {
        let (mut p, mut q) = (st.clone(), st.clone());
        let e = Vector3::ith(i, h);
        p.r_b = so3::exp(&e) * st.r_b;
        q.r_b = so3::exp(&-e) * st.r_b;
        dl_domega.set_column(i, &((rates(&p).0 - rates(&q).0) / (2.0 * h)));
    }
    [dl_dt, dl_ds, dl_domega, dtau_dt, dtau_ds]
}

#[test]
fn jacobians_match_finite_differences() {
    let m = model();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let st = random_state(&m, &mut rng);
        let j = momentum_jacobians(&m, &st);
        let dl_domega = Matrix3xX::from_column_slice(j.dl_domega.as_slice());
        let analytic = [&j.dl_dt, &j.dl_ds, &dl_domega, &j.dtau_dt, &j.dtau_ds];
        for (a, f) in analytic.into_iter().zip(fd_blocks(&m, &st, 1e-6)) {
            worst = worst.max(rel_err(a, &f));
        }
    }
    assert!(worst <= 1e-5, "worst relative error {worst:e}");
}

#[test]
fn thrust_columns_are_jet_axes() {
    let m = model();
    let st = random_state(&m, &mut ChaCha8Rng::seed_from_u64(102));
    let j = momentum_jacobians(&m, &st);
    let kin = st.kinematics(&m);
    for k in 0..m.thruster_count() {
        assert_eq!(j.dl_dt.column(k).into_owned(), kin.thruster_axis[k]);
        assert_relative_eq!(j.dl_dt.column(k).norm(), 1.0, epsilon = 1e-14);
    }
}

#[test]
fn zero_thrust_has_no_drift() {
    let m = model();
    let mut st = random_state(&m, &mut ChaCha8Rng::seed_from_u64(103));
    st.thrust.fill(0.0);
    let j = momentum_jacobians(&m, &st);
    assert_eq!(j.l_drift, Vector3::zeros());
    assert_eq!(j.tau_drift, Vector3::zeros());
}

#[test]
fn affine_prediction_matches_the_plant() {
    let m = model();
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let dt = 1e-5;
    for _ in 0..20 {
        let mut st = random_state(&m, &mut rng);
        st.thrust.iter_mut().for_each(|t| *t = t.clamp(10.0, 240.0));
        st.s.iter_mut().for_each(|s| *s *= 0.5);
        let u = ControlInput {
            t_dot: DVector::from_fn(4, |_, _| rng.gen_range(-20.0..20.0)),
            s_dot: DVector::from_fn(5, |_, _| rng.gen_range(-0.9..0.9)),
        };
        // the plant's ν follows the commanded joint rates
        st.s_dot = u.s_dot.clone();
        let j = momentum_jacobians(&m, &st);
        let stacked = DVector::from_iterator(9, u.t_dot.iter().chain(u.s_dot.iter()).copied());
        let (l_pred, tau_pred) = j.predict(&stacked);
        let next = dynamics::step(&m, &st, &u, dt).unwrap();
        let j1 = momentum_jacobians(&m, &next);
        let l_fd = (j1.l_dot - j.l_dot) / dt;
        let tau_fd = (j1.tau_b - j.tau_b) / dt;
        assert!((l_fd - l_pred).norm() <= 1e-3 * l_pred.norm().max(1.0), "{l_fd} vs {l_pred}");
        assert!((tau_fd - tau_pred).norm() <= 1e-3 * tau_pred.norm().max(1.0), "{tau_fd} vs {tau_pred}");
    }
}

#[test]
fn linear_law_examples() {
    let m = model();
    let g = gains(&m);
    let z = Vector3::zeros();
    let l_dd = Vector3::new(0.3, -0.2, 1.0);
    let l = Vector3::new(1.0, 2.0, 3.0);
    assert_eq!(desired_linear_dynamics(&l, &l, &l, &l, &l_dd, &z, &g), l_dd);
    let unit = ControllerGains { kp: Gain::Scalar(1.0), kd: Gain::Scalar(0.0), ki: Gain::Scalar(0.0), ..Default::default() };
    let mut g1 = gains(&m);
    let r = unit.resolve(5);
    assert!(r.is_err(), "kd must be positive definite");
    g1.kp = Matrix3::identity();
    g1.kd = Matrix3::zeros();
    g1.ki = Matrix3::zeros();
    assert_eq!(desired_linear_dynamics(&Vector3::x(), &z, &z, &z, &z, &z, &g1), Vector3::new(-1.0, 0.0, 0.0));
}

fn random_spd(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    let a = Matrix3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
    a * a.transpose() + Matrix3::identity() * 0.1
}

fn random_v(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    Vector3::from_fn(|_, _| rng.gen_range(-5.0..5.0))
}

#[test]
fn linear_law_matches_formula() {
    let m = model();
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    for _ in 0..100 {
        let mut g = gains(&m);
        g.kp = random_spd(&mut rng);
        g.kd = random_spd(&mut rng);
        g.ki = random_spd(&mut rng);
        let [l, ld, l1, l1d, l2d, int] = [(); 6].map(|_| random_v(&mut rng));
        let got = desired_linear_dynamics(&l, &ld, &l1, &l1d, &l2d, &int, &g);
        for i in 0..3 {
            let mut e = l2d[i];
            for j in 0..3 {
                e -= g.kd[(i, j)] * (l1[j] - l1d[j]) + g.kp[(i, j)] * (l[j] - ld[j]) + g.ki[(i, j)] * int[j];
            }
            assert!((got[i] - e).abs() <= 1e-12 * e.abs().max(1.0));
        }
    }
}

#[test]
fn angular_law_examples() {
    let m = model();
    let g = gains(&m);
    let r = so3::exp(&Vector3::new(0.2, -0.1, 0.7));
    let (w, wd) = (Vector3::new(1.0, 2.0, 3.0), Vector3::new(-0.5, 0.1, 0.0));
    assert_eq!(desired_angular_dynamics(&r, &r, &w, &w, &wd, &wd, &g), wd);
    let mut unit = g.clone();
    unit.kp_w = Matrix3::identity();
    unit.kd_w = Matrix3::identity();
    unit.k_r = Matrix3::identity() * 5.0;
    let yaw = so3::exp(&Vector3::new(0.0, 0.0, std::f64::consts::FRAC_PI_2));
    let z = Vector3::zeros();
    let got = desired_angular_dynamics(&yaw, &Matrix3::identity(), &z, &z, &z, &z, &unit);
    assert_relative_eq!(got.z, -std::f64::consts::FRAC_PI_2 * 5.0, epsilon = 1e-12);
    assert!(got.xy().norm() < 1e-12);
}

#[test]
fn angular_law_matches_formula() {
    let m = model();
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    for _ in 0..100 {
        let mut g = gains(&m);
        g.kp_w = random_spd(&mut rng);
        g.kd_w = random_spd(&mut rng);
        g.k_r = random_spd(&mut rng);
        let rb = so3::exp(&random_v(&mut rng).map(|x| x * 0.3));
        let rd = so3::exp(&random_v(&mut rng).map(|x| x * 0.3));
        let [w, wd, w1, w1d] = [(); 4].map(|_| random_v(&mut rng));
        let got = desired_angular_dynamics(&rb, &rd, &w, &wd, &w1, &w1d, &g);
        // rotation error through the quaternion of R_dᵀ R_B
        let q = nalgebra::UnitQuaternion::from_matrix(&(rd.transpose() * rb));
        let err = q.scaled_axis();
        let expect = w1d - g.kd_w * (w1 - w1d) - g.kp_w * (w - wd) - g.k_r * err;
        assert!((got - expect).norm() <= 1e-12 * expect.norm().max(1.0), "{:e}", (got - expect).norm());
    }
}

fn loose_bounds(dim: usize) -> (DVector<f64>, DVector<f64>) {
    (DVector::from_element(dim, -1e3), DVector::from_element(dim, 1e3))
}

#[test]
fn postural_task_alone() {
    let m = model();
    let st = random_state(&m, &mut ChaCha8Rng::seed_from_u64(107));
    let mut g = gains(&m);
    g.lambda = [0.0, 0.0, 0.1];
    let j = momentum_jacobians(&m, &st);
    let s_star = DVector::from_fn(5, |i, _| 0.1 * i as f64 - 0.2);
    let (lo, hi) = loose_bounds(9);
    let sol = solve_qp(&build_qp(&j, &Vector3::x(), &Vector3::y(), &s_star, &g, lo, hi).unwrap());
    assert_eq!(sol.status, QpStatus::Success);
    assert!(sol.u.rows(0, 4).amax() <= 1e-12);
    assert!((sol.u.rows(4, 5) - &s_star).amax() <= 1e-8);
}

#[test]
fn hessian_is_symmetric_psd_and_stacks_the_tasks() {
    let m = model();
    let g = gains(&m);
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    for _ in 0..100 {
        let st = random_state(&m, &mut rng);
        let j = momentum_jacobians(&m, &st);
        let (ls, ws) = (random_v(&mut rng), random_v(&mut rng));
        let ss = DVector::from_fn(5, |_, _| rng.gen_range(-1.0..1.0));
        let (lo, hi) = loose_bounds(9);
        let qp = build_qp(&j, &ls, &ws, &ss, &g, lo, hi).unwrap();
        assert_eq!(qp.h, qp.h.transpose());
        assert!(qp.h.clone().symmetric_eigenvalues().min() >= 0.0);
        // hand-stacked oracle
        let mut mm = DMatrix::zeros(11, 9);
        let mut beta = DVector::zeros(11);
        let mut wsq = DVector::zeros(11);
        for r in 0..3 {
            for c in 0..9 {
                mm[(r, c)] = j.m_l[(r, c)];
                mm[(r + 3, c)] = j.m_tau[(r, c)];
            }
            beta[r] = ls[r] - j.l_drift[r];
            beta[r + 3] = ws[r] - j.tau_drift[r];
            wsq[r] = g.lambda[0];
            wsq[r + 3] = g.lambda[1];
        }
        for d in 0..5 {
            mm[(6 + d, 4 + d)] = 1.0;
            beta[6 + d] = ss[d];
            wsq[6 + d] = g.lambda[2];
        }
        let w2 = DMatrix::from_diagonal(&wsq);
        let h = mm.transpose() * &w2 * &mm + DMatrix::identity(9, 9) * g.regularization;
        let c = -(mm.transpose() * &w2 * &beta);
        assert!((&qp.h - &h).amax() <= 1e-9 * h.amax());
        assert!((&qp.c - &c).amax() <= 1e-9 * c.amax().max(1.0));
    }
}

#[test]
fn build_qp_rejects_dimension_mismatch() {
    let m = model();
    let j = momentum_jacobians(&m, &RobotState::rest(&m));
    let (lo, hi) = loose_bounds(9);
    let z = Vector3::zeros();
    assert!(matches!(build_qp(&j, &z, &z, &DVector::zeros(4), &gains(&m), lo, hi), Err(ControllerError::Dimension(_))));
}

fn qp1(h: f64, c: f64, lo: f64, hi: f64) -> QpProblem {
    QpProblem {
        h: DMatrix::from_element(1, 1, h),
        c: DVector::from_element(1, c),
        lower: DVector::from_element(1, lo),
        upper: DVector::from_element(1, hi),
    }
}

#[test]
fn one_dimensional_clamped_minimizer() {
    // (u − 3)² = u² − 6u + 9 → H = 2, c = −6
    let s = solve_qp(&qp1(2.0, -6.0, 0.0, 2.0));
    assert_eq!(s.status, QpStatus::Success);
    assert_eq!(s.u[0], 2.0);
    assert_eq!(s.active, vec![Bound::Upper]);
}

#[test]
fn interior_optimum_is_newton_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let a = DMatrix::from_fn(6, 6, |_, _| rng.gen_range(-1.0..1.0));
    let h = &a * a.transpose() + DMatrix::identity(6, 6);
    let c = DVector::from_fn(6, |_, _| rng.gen_range(-1.0..1.0));
    let (lower, upper) = (DVector::from_element(6, -10.0), DVector::from_element(6, 10.0));
    let expect = -h.clone().cholesky().unwrap().solve(&c);
    let s = solve_qp(&QpProblem { h, c, lower, upper });
    assert_eq!(s.status, QpStatus::Success);
    assert!((s.u - expect).amax() <= 1e-10);
}

struct Random9 {
    problem: QpProblem,
}

fn random_problem(rng: &mut ChaCha8Rng) -> Random9 {
    let n = 9;
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let h = a.transpose() * &a + DMatrix::identity(n, n) * 0.05;
    let c = DVector::from_fn(n, |_, _| rng.gen_range(-5.0..5.0));
    let lower = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..0.0));
    let upper = DVector::from_fn(n, |_, _| rng.gen_range(0.0..2.0));
    Random9 { problem: QpProblem { h, c, lower, upper } }
}

/// Accelerated projected gradient run to a fixed point.
fn projected_gradient(p: &QpProblem) -> DVector<f64> {
    let l = p.h.clone().symmetric_eigenvalues().max();
    let mut x = p.project(&DVector::zeros(p.dim()));
    let mut y = x.clone();
    let mut t = 1.0f64;
    for _ in 0..200_000 {
        let next = p.project(&(&y - p.gradient(&y) / l));
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &next + (&next - &x) * ((t - 1.0) / t_next);
        let moved = (&next - &x).amax();
        x = next;
        t = t_next;
        if moved < 1e-15 {
            break;
        }
    }
    x
}

#[test]
fn active_set_beats_projected_gradient_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(110);
    let mut worst_kkt = 0.0f64;
    for _ in 0..500 {
        let Random9 { problem } = random_problem(&mut rng);
        let s = solve_qp(&problem);
        assert_eq!(s.status, QpStatus::Success);
        let oracle = projected_gradient(&problem);
        assert!(problem.objective(&s.u) <= problem.objective(&oracle) + 1e-8);
        assert!(s.stationarity <= 1e-8);
        worst_kkt = worst_kkt.max(problem.kkt_residual(&s.u, &s.active));
        for i in 0..9 {
            match s.active[i] {
                Bound::Lower => assert_eq!(s.u[i], problem.lower[i]),
                Bound::Upper => assert_eq!(s.u[i], problem.upper[i]),
                Bound::Free => assert!(problem.lower[i] <= s.u[i] && s.u[i] <= problem.upper[i]),
            }
        }
    }
    assert!(worst_kkt <= 1e-8, "{worst_kkt:e}");
}

#[test]
fn qp_failure_is_a_status() {
    let mut bad = qp1(-1.0, 0.0, -1.0, 1.0);
    assert_eq!(solve_qp(&bad).status, QpStatus::Failure);
    bad = qp1(1.0, f64::NAN, -1.0, 1.0);
    assert_eq!(solve_qp(&bad).status, QpStatus::Failure);
    bad = qp1(1.0, 0.0, 1.0, -1.0);
    assert_eq!(solve_qp(&bad).status, QpStatus::Failure);
}

proptest! {
    #[test]
    fn qp_solution_is_scale_invariant(seed in 0u64..10_000, alpha in 1e-3f64..1e3) {
        let Random9 { problem } = random_problem(&mut ChaCha8Rng::seed_from_u64(seed));
        let scaled = QpProblem { h: &problem.h * alpha, c: &problem.c * alpha, ..problem.clone() };
        let (a, b) = (solve_qp(&problem), solve_qp(&scaled));
        prop_assert_eq!(a.active, b.active);
        prop_assert!((a.u - b.u).amax() <= 1e-10);
    }
}

fn hover(m: &RobotModel) -> RobotState {
    let mut st = RobotState::rest(m);
    st.thrust = dynamics::hover_thrust(m, &st).unwrap();
    st
}

#[test]
fn hover_needs_no_input() {
    let m = model();
    let st = hover(&m);
    let mut c = Controller::new(&m, &ControllerGains::default()).unwrap();
    let out = c.step(&m, &st, &ReferenceSample::hold(st.kinematics(&m).com, Matrix3::identity()), 0.01);
    assert_eq!(out.status, QpStatus::Success);
    let norm = (out.input.t_dot.norm_squared() + out.input.s_dot.norm_squared()).sqrt();
    assert!(norm <= 1e-6, "{norm:e}");
}

#[test]
fn climb_reference_raises_thrust() {
    let m = model();
    let st = hover(&m);
    let mut c = Controller::new(&m, &ControllerGains::default()).unwrap();
    let mut r = ReferenceSample::hold(st.kinematics(&m).com, Matrix3::identity());
    r.l_d = Vector3::new(0.0, 0.0, 0.5 * m.mass());
    let out = c.step(&m, &st, &r, 0.01);
    assert_eq!(out.status, QpStatus::Success);
    assert!(out.input.t_dot.sum() > 0.0, "{}", out.input.t_dot);
    let again = Controller::new(&m, &ControllerGains::default()).unwrap().step(&m, &st, &r, 0.01);
    assert_eq!(again, out);
}

#[test]
fn invalid_gains_are_rejected() {
    let bad = ControllerGains { kp: Gain::Diagonal(vec![1.0, -1.0, 1.0]), ..Default::default() };
    assert!(matches!(bad.resolve(5), Err(ControllerError::NotPositiveDefinite { name: "kp" })));
    let bad = ControllerGains { k_post: Gain::Diagonal(vec![1.0; 3]), ..Default::default() };
    assert!(matches!(bad.resolve(5), Err(ControllerError::Dimension(_))));
    let bad = ControllerGains { lambda: [0.0; 3], ..Default::default() };
    assert!(bad.resolve(5).is_err());
    let full = ControllerGains {
        kp: Gain::Full(vec![vec![2.0, 0.5, 0.0], vec![0.5, 2.0, 0.0], vec![0.0, 0.0, 1.0]]),
        ..Default::default()
    };
    assert!(full.resolve(5).is_ok());
    let json: ControllerGains = serde_json::from_str(r#"{"kp": [1, 2, 3], "ki": 0}"#).unwrap();
    assert!(json.resolve(5).is_ok());
}

/// Closed-loop linear-momentum error after a 0.1 kg·m/s push along x at hover.
fn perturbed_hover(gains: &ControllerGains, seconds: f64) -> Vec<f64> {
    let m = model();
    let mut st = hover(&m);
    let reference = ReferenceSample::hold(st.kinematics(&m).com, Matrix3::identity());
    st.v_b.x += 0.1 / m.mass();
    let mut c = Controller::new(&m, gains).unwrap();
    let dt = 0.01;
    let mut errors = Vec::new();
    for _ in 0..(seconds / dt).round() as usize {
        let out = c.step(&m, &st, &reference, dt);
        assert_eq!(out.status, QpStatus::Success);
        st = dynamics::step(&m, &st, &out.input, dt).unwrap();
        errors.push(dynamics::centroidal_momentum(&m, &st).l.norm());
    }
    errors
}

#[test]
fn hover_is_locally_stable_without_integral_action() {
    let g = ControllerGains { ki: Gain::Scalar(0.0), ..Default::default() };
    let e = perturbed_hover(&g, 5.0);
    assert!(e[e.len() - 1] < 1e-3, "{:e}", e[e.len() - 1]);
}

#[test]
fn default_gains_follow_the_third_order_prediction() {
    // x = ∫l̃: x⃛ + 4ẍ + 5ẋ + 0.5x = 0, ẋ(0) = 0.1; the slow root ≈ −0.109 s⁻¹ dominates
    let e = perturbed_hover(&ControllerGains::default(), 30.0);
    let at = |t: f64| e[(t / 0.01).round() as usize - 1];
    assert!(at(5.0) < 1e-2, "{:e}", at(5.0));
    assert!((at(5.0) - 5.93e-3).abs() < 1.5e-3, "{:e}", at(5.0));
    assert!(at(30.0) < 1e-3, "{:e}", at(30.0));
    assert!(e.iter().all(|x| x.is_finite() && *x < 0.2));
}
