//! Linear tet4 statics: assembly, Jacobi-preconditioned CG, element stresses.

use nalgebra::{Matrix3, Matrix6, SMatrix, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::mesh::{tet_volume, triangle_area, FemMesh};
use super::{safety_factor, Material, SafetyFactor, StructuralError};

type BMatrix = SMatrix<f64, 6, 12>;

/// Symmetric sparse matrix in compressed-row form (full pattern stored).
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate (row, col) triplets.
    pub fn from_triplets(n: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(t.len() / 4);
        let mut vals: Vec<f64> = Vec::with_capacity(t.len() / 4);
        let mut last = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *yi = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| (self.row_ptr[i]..self.row_ptr[i + 1]).find(|&k| self.cols[k] == i).map_or(0.0, |k| self.vals[k]))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` for SPD `A` with Jacobi-preconditioned CG.
pub fn conjugate_gradient(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, CgReport), StructuralError> {
    let n = a.n;
    let mut x = vec![0.0; n];
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok((x, CgReport { iterations: 0, relative_residual: 0.0 }));
    }
    let diag = a.diagonal();
    if diag.iter().any(|&d| !(d > 0.0)) {
        return Err(StructuralError::Singular);
    }
    let inv: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv).map(|(r, m)| r * m).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        a.mul_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(StructuralError::Singular);
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let res = dot(&r, &r).sqrt() / bnorm;
        if !res.is_finite() {
            return Err(StructuralError::Singular);
        }
        if res <= tol {
            return Ok((x, CgReport { iterations: it, relative_residual: res }));
        }
        for i in 0..n {
            z[i] = r[i] * inv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(StructuralError::NotConverged { iterations: max_iter, residual: dot(&r, &r).sqrt() / bnorm })
}

/// Isotropic elasticity matrix (Voigt order xx, yy, zz, yz, xz, xy; engineering shear).
pub fn elasticity(m: &Material) -> Matrix6<f64> {
    let (e, nu) = (m.youngs_modulus, m.poisson_ratio);
    let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let mu = e / (2.0 * (1.0 + nu));
    let mut d = Matrix6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            d[(i, j)] = lambda;
        }
        d[(i, i)] += 2.0 * mu;
        d[(i + 3, i + 3)] = mu;
    }
    d
}

/// Strain-displacement matrix and volume of a linear tetrahedron.
pub fn strain_matrix(p: &[nalgebra::Point3<f64>; 4]) -> (BMatrix, f64) {
    let j = Matrix3::from_columns(&[p[1] - p[0], p[2] - p[0], p[3] - p[0]]);
    let jinv = j.try_inverse().expect("non-degenerate tetrahedron");
    // gradients of barycentric shape functions 1..3 are the rows of J⁻¹
    let mut grads = [Vector3::zeros(); 4];
    for a in 0..3 {
        grads[a + 1] = jinv.row(a).transpose();
    }
    grads[0] = -(grads[1] + grads[2] + grads[3]);
    let mut b = BMatrix::zeros();
    for (a, g) in grads.iter().enumerate() {
        let c = 3 * a;
        b[(0, c)] = g.x;
        b[(1, c + 1)] = g.y;
        b[(2, c + 2)] = g.z;
        b[(3, c + 1)] = g.z;
        b[(3, c + 2)] = g.y;
        b[(4, c)] = g.z;
        b[(4, c + 2)] = g.x;
        b[(5, c)] = g.y;
        b[(5, c + 1)] = g.x;
    }
    (b, tet_volume(p))
}

pub fn von_mises(s: &Vector6<f64>) -> f64 {
    let (xx, yy, zz, yz, xz, xy) = (s[0], s[1], s[2], s[3], s[4], s[5]);
    (0.5 * ((xx - yy).powi(2) + (yy - zz).powi(2) + (zz - xx).powi(2)) + 3.0 * (yz * yz + xz * xz + xy * xy)).max(0.0).sqrt()
}

/// Linear-static solution on a mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressResult {
    /// m, per node
    pub displacement: Vec<Vector3<f64>>,
    /// Pa, per element
    pub von_mises: Vec<f64>,
    /// Pa
    pub sigma_max: f64,
    pub safety_factor: SafetyFactor,
    pub cg_iterations: usize,
}

/// Free-DoF numbering: `None` for clamped components.
fn dof_map(mesh: &FemMesh) -> (Vec<Option<usize>>, usize) {
    let mut fixed = vec![false; mesh.nodes.len()];
    for &i in &mesh.fixed_nodes {
        fixed[i] = true;
    }
    let mut map = vec![None; 3 * mesh.nodes.len()];
    let mut n = 0;
    for (node, &f) in fixed.iter().enumerate() {
        if !f {
            for c in 0..3 {
                map[3 * node + c] = Some(n);
                n += 1;
            }
        }
    }
    (map, n)
}

/// Reduced stiffness matrix over free DoFs.
pub fn assemble(mesh: &FemMesh, material: &Material) -> (CsrMatrix, Vec<Option<usize>>) {
    let d = elasticity(material);
    let (map, n) = dof_map(mesh);
    let mut trip = Vec::with_capacity(mesh.elements.len() * 144);
    for (e, el) in mesh.elements.iter().enumerate() {
        let (b, v) = strain_matrix(&mesh.element_points(e));
        let k = b.transpose() * d * b * v;
        let dofs: [Option<usize>; 12] = std::array::from_fn(|i| map[3 * el[i / 3] + i % 3]);
        for (i, di) in dofs.iter().enumerate() {
            let Some(r) = di else { continue };
            for (j, dj) in dofs.iter().enumerate() {
                if let Some(c) = dj {
                    trip.push((*r, *c, k[(i, j)]));
                }
            }
        }
    }
    (CsrMatrix::from_triplets(n, trip), map)
}

/// Consistent nodal forces of a uniform traction totalling `total_load` N
/// along `direction` over the loaded faces.
pub fn load_vector(mesh: &FemMesh, total_load: f64, direction: &Vector3<f64>) -> Vec<Vector3<f64>> {
    let mut f = vec![Vector3::zeros(); mesh.nodes.len()];
    let total_area = mesh.loaded_area();
    for (i, tri) in mesh.loaded_faces.iter().enumerate() {
        let share = total_load * triangle_area(mesh.face_points(i)) / total_area;
        for &n in tri {
            f[n] += direction * (share / 3.0);
        }
    }
    f
}

/// Solves the static problem for a uniform traction on the loaded faces.
pub fn solve_static(
    mesh: &FemMesh,
    material: &Material,
    total_load: f64,
    load_direction: &Vector3<f64>,
) -> Result<StressResult, StructuralError> {
    mesh.validate()?;
    material.validate()?;
    if !(total_load >= 0.0) {
        return Err(StructuralError::NegativeLoad(total_load));
    }
    let dir = load_direction.try_normalize(1e-12).ok_or(StructuralError::NegativeLoad(f64::NAN))?;
    let (k, map) = assemble(mesh, material);
    let nodal = load_vector(mesh, total_load, &dir);
    let mut f = vec![0.0; k.n];
    for (node, fv) in nodal.iter().enumerate() {
        for c in 0..3 {
            if let Some(i) = map[3 * node + c] {
                f[i] = fv[c];
            }
        }
    }
    let cap = (50.0 * (k.n as f64).sqrt()).ceil() as usize;
    let (x, report) = conjugate_gradient(&k, &f, 1e-8, cap)?;
    let displacement: Vec<Vector3<f64>> =
        (0..mesh.nodes.len()).map(|node| Vector3::from_fn(|c, _| map[3 * node + c].map_or(0.0, |i| x[i]))).collect();
    let dm = elasticity(material);
    let von_mises: Vec<f64> = mesh
        .elements
        .iter()
        .enumerate()
        .map(|(e, el)| {
            let (b, _) = strain_matrix(&mesh.element_points(e));
            let u = SMatrix::<f64, 12, 1>::from_fn(|i, _| displacement[el[i / 3]][i % 3]);
            von_mises(&(dm * (b * u)))
        })
        .collect();
    let sigma_max = von_mises.iter().copied().fold(0.0, f64::max);
    Ok(StressResult {
        displacement,
        safety_factor: safety_factor(sigma_max, material),
        von_mises,
        sigma_max,
        cg_iterations: report.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector, Point3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cg_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 30;
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let a = &m * m.transpose() + DMatrix::identity(n, n) * 0.5;
        let b = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let mut trip = Vec::new();
        for i in 0..n {
            for j in 0..n {
                trip.push((i, j, a[(i, j)]));
            }
        }
        let csr = CsrMatrix::from_triplets(n, trip);
        let (x, rep) = conjugate_gradient(&csr, b.as_slice(), 1e-12, 1000).unwrap();
        let exact = a.lu().solve(&b).unwrap();
        assert!(rep.relative_residual <= 1e-12);
        assert!((DVector::from_vec(x) - exact).norm() < 1e-8);
    }

    #[test]
    fn triplets_are_summed() {
        let m = CsrMatrix::from_triplets(2, vec![(1, 0, 1.0), (0, 0, 2.0), (1, 0, 3.0), (1, 1, 5.0)]);
        assert_eq!(m.row_ptr, vec![0, 1, 3]);
        assert_eq!(m.vals, vec![2.0, 4.0, 5.0]);
        assert_eq!(m.diagonal(), vec![2.0, 5.0]);
    }

    #[test]
    fn rigid_motions_are_strain_free() {
        let p = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(0.01, 0.001, 0.0),
            Point3::new(0.002, 0.012, 0.001),
            Point3::new(0.001, 0.002, 0.009),
        ];
        let (b, v) = strain_matrix(&p);
        assert!(v > 0.0);
        let w = Vector3::new(0.3, -0.2, 0.5);
        let t = Vector3::new(1.0, 2.0, 3.0);
        let u = SMatrix::<f64, 12, 1>::from_fn(|i, _| (t + w.cross(&p[i / 3].coords))[i % 3]);
        assert!((b * u).amax() < 1e-12);
    }

    #[test]
    fn uniaxial_stress_von_mises() {
        assert!((von_mises(&Vector6::new(5.0, 0.0, 0.0, 0.0, 0.0, 0.0)) - 5.0).abs() < 1e-12);
        assert!((von_mises(&Vector6::new(0.0, 0.0, 0.0, 0.0, 0.0, 2.0)) - 2.0 * 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(von_mises(&Vector6::repeat(0.0)), 0.0);
    }
}
