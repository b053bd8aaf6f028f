//! Finite-element checks against closed forms and structural properties.

use jetdesign::geometry::{Face, FaceRef, GeometryConfig, GeometryParams, Part, Primitive, Role, Shape, Solid};
use jetdesign::structural::{
    analyze_part, assemble, generate_mesh, max_stress_away_from_clamp, solve_static, structural_gate, write_csv, Material,
    StructuralConfig,
};
use nalgebra::{Isometry3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Beam along x clamped at x = 0, loaded over its free end face.
fn cantilever(length: f64, width: f64, height: f64) -> Solid {
    let size = Vector3::new(length, width, height);
    Solid {
        primitives: vec![Primitive::new(Shape::Box { size }, Isometry3::translation(length / 2.0, 0.0, 0.0), Role::Other)],
        density: 2810.0,
        mount_face: FaceRef { primitive: 0, face: Face::UMin },
        seat_face: FaceRef { primitive: 0, face: Face::UMax },
    }
}

/// Euler–Bernoulli root stress of an end-loaded rectangular cantilever.
fn beam_root_stress(force: f64, length: f64, width: f64, height: f64) -> f64 {
    let second_moment = width * height.powi(3) / 12.0;
    force * length * (height / 2.0) / second_moment
}

#[test]
fn cantilever_matches_beam_theory() {
    let (l, b, h, f) = (0.1, 0.01, 0.01, 100.0);
    let expected = beam_root_stress(f, l, b, h);
    assert!((expected - 6.0 * f * l / (b * h * h)).abs() < 1e-6 * expected);
    let mesh = generate_mesh(&cantilever(l, b, h), 0.00125).unwrap();
    let r = solve_static(&mesh, &Material::ERGAL, f, &-Vector3::z()).unwrap();
    let rel = (r.sigma_max - expected).abs() / expected;
    assert!(rel < 0.10, "sigma_max {:.2} MPa vs {:.2} MPa", r.sigma_max / 1e6, expected / 1e6);
}

#[test]
fn cantilever_tip_deflection_matches_beam_theory() {
    let (l, b, h, f) = (0.1, 0.01, 0.01, 100.0);
    let mesh = generate_mesh(&cantilever(l, b, h), 0.00125).unwrap();
    let r = solve_static(&mesh, &Material::ERGAL, f, &-Vector3::z()).unwrap();
    let tip: f64 = mesh.loaded_faces.iter().flatten().map(|&n| r.displacement[n].z).fold(0.0, f64::min);
    let expected = f * l.powi(3) / (3.0 * Material::ERGAL.youngs_modulus * b * h.powi(3) / 12.0);
    // constant-strain tetrahedra are stiff in bending
    assert!(-tip < expected && -tip > 0.8 * expected, "tip {tip:e} vs {expected:e}");
}

#[test]
fn zero_load_is_unstressed() {
    let mesh = generate_mesh(&cantilever(0.05, 0.01, 0.01), 0.0025).unwrap();
    let r = solve_static(&mesh, &Material::ERGAL, 0.0, &Vector3::z()).unwrap();
    assert!(r.displacement.iter().all(|u| *u == Vector3::zeros()));
    assert_eq!(r.sigma_max, 0.0);
    assert!(r.safety_factor.is_unbounded());
}

#[test]
fn response_is_linear_in_load() {
    let mesh = generate_mesh(&cantilever(0.05, 0.01, 0.01), 0.0025).unwrap();
    let dir = Vector3::new(0.3, -0.2, 1.0);
    let base = solve_static(&mesh, &Material::ERGAL, 100.0, &dir).unwrap();
    let scale = base.displacement.iter().map(|u| u.amax()).fold(0.0, f64::max);
    for alpha in [0.5, 2.0, 10.0] {
        let r = solve_static(&mesh, &Material::ERGAL, 100.0 * alpha, &dir).unwrap();
        for (u, u0) in r.displacement.iter().zip(&base.displacement) {
            assert!((u - u0 * alpha).amax() <= 1e-10 * alpha * scale);
        }
        for (s, s0) in r.von_mises.iter().zip(&base.von_mises) {
            assert!((s - s0 * alpha).abs() <= 1e-10 * alpha * base.sigma_max);
        }
    }
}

#[test]
fn clamped_stiffness_is_positive_definite() {
    let mesh = generate_mesh(&cantilever(0.04, 0.01, 0.01), 0.0025).unwrap();
    let (k, _) = assemble(&mesh, &Material::ERGAL);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut kd = vec![0.0; k.n];
    for _ in 0..20 {
        let d: Vec<f64> = (0..k.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        k.mul_into(&d, &mut kd);
        let energy: f64 = d.iter().zip(&kd).map(|(a, b)| a * b).sum();
        assert!(energy > 0.0);
    }
    // symmetry of the assembled operator
    let a: Vec<f64> = (0..k.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..k.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (mut ka, mut kb) = (vec![0.0; k.n], vec![0.0; k.n]);
    k.mul_into(&a, &mut ka);
    k.mul_into(&b, &mut kb);
    let (x, y): (f64, f64) = (b.iter().zip(&ka).map(|(p, q)| p * q).sum(), a.iter().zip(&kb).map(|(p, q)| p * q).sum());
    assert!((x - y).abs() < 1e-9 * x.abs().max(y.abs()));
}

#[test]
fn smaller_contact_area_lowers_safety_factor() {
    let mut last = f64::INFINITY;
    for width in [0.012, 0.010, 0.008, 0.006] {
        let mesh = generate_mesh(&cantilever(0.06, width, 0.01), 0.0015).unwrap();
        let r = solve_static(&mesh, &Material::ERGAL, 100.0, &-Vector3::z()).unwrap();
        let sf = r.safety_factor.value();
        assert!(sf < last, "width {width}: SF {sf} not below {last}");
        last = sf;
    }
}

#[test]
fn baseline_passes_gate() {
    let r = structural_gate(&GeometryParams::BASELINE, &GeometryConfig::default(), &StructuralConfig::default());
    assert!(r.error.is_none(), "{:?}", r.error);
    assert!(r.feasible, "SF {}", r.sf);
    assert_eq!(r.parts.len(), 2);
}

#[test]
fn thin_part_fails_gate() {
    let cfg = StructuralConfig { thickness_override: Some(0.004), mesh_edge: 0.002, ..Default::default() };
    let r = structural_gate(&GeometryParams::BASELINE, &GeometryConfig::default(), &cfg);
    assert!(r.error.is_none(), "{:?}", r.error);
    assert!(!r.feasible && r.sf.value() < 10.0);
}

#[test]
fn mesh_failure_is_infeasible_with_cause() {
    let cfg = StructuralConfig { mesh_edge: 0.01, ..Default::default() };
    let r = structural_gate(&GeometryParams::BASELINE, &GeometryConfig::default(), &cfg);
    assert!(!r.feasible);
    assert!(r.error.unwrap().contains("target edge"));
}

#[test]
fn gate_stress_converges_on_baseline() {
    let cfg = StructuralConfig::default();
    let geometry = GeometryConfig::default();
    let n = cfg.convergence_edges.len();
    let (coarse, fine) = (cfg.convergence_edges[n - 2], cfg.convergence_edges[n - 1]);
    for part in Part::ALL {
        let stress = |edge| {
            let (mesh, r) = analyze_part(&GeometryParams::BASELINE, part, &geometry, &cfg, edge).unwrap();
            max_stress_away_from_clamp(&mesh, &r)
        };
        let (a, b) = (stress(coarse), stress(fine));
        assert!((b - a).abs() / b < 0.05, "{}: {a:e} -> {b:e}", part.name());
    }
}

#[test]
fn csv_dump_has_all_rows() {
    let mesh = generate_mesh(&cantilever(0.02, 0.01, 0.01), 0.005).unwrap();
    let r = solve_static(&mesh, &Material::ERGAL, 10.0, &Vector3::z()).unwrap();
    let mut buf = Vec::new();
    write_csv(&mesh, &r, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("node,")).count(), mesh.nodes.len());
    assert_eq!(text.lines().filter(|l| l.starts_with("element,")).count(), mesh.elements.len());
}
