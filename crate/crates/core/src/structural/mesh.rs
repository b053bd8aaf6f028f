//! Structured multi-block tetrahedral meshing of block solids.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::StructuralError;
use crate::geometry::{face_corners, trilinear, Face, FaceRef, Solid};

/// Linear tetrahedral mesh of a solid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FemMesh {
    /// m
    pub nodes: Vec<Point3<f64>>,
    /// Positively oriented node quadruples.
    pub elements: Vec<[usize; 4]>,
    /// Clamped nodes (mount face).
    pub fixed_nodes: Vec<usize>,
    /// Triangles of the loaded (jet seat) surface.
    pub loaded_faces: Vec<[usize; 3]>,
}

pub fn tet_volume(p: &[Point3<f64>; 4]) -> f64 {
    (p[1] - p[0]).dot(&(p[2] - p[0]).cross(&(p[3] - p[0]))) / 6.0
}

pub fn triangle_area(p: [Point3<f64>; 3]) -> f64 {
    (p[1] - p[0]).cross(&(p[2] - p[0])).norm() / 2.0
}

impl FemMesh {
    pub fn element_points(&self, e: usize) -> [Point3<f64>; 4] {
        self.elements[e].map(|i| self.nodes[i])
    }

    pub fn face_points(&self, f: usize) -> [Point3<f64>; 3] {
        self.loaded_faces[f].map(|i| self.nodes[i])
    }

    pub fn volume(&self) -> f64 {
        (0..self.elements.len()).map(|e| tet_volume(&self.element_points(e))).sum()
    }

    pub fn loaded_area(&self) -> f64 {
        (0..self.loaded_faces.len()).map(|f| triangle_area(self.face_points(f))).sum()
    }

    /// Checks the mesh invariants.
    pub fn validate(&self) -> Result<(), StructuralError> {
        let n = self.nodes.len();
        let bad = |msg: String| Err(StructuralError::InvalidMesh(msg));
        if self.fixed_nodes.is_empty() {
            return bad("no fixed nodes".into());
        }
        if self.loaded_faces.is_empty() {
            return bad("no loaded faces".into());
        }
        if let Some(e) = self.elements.iter().position(|el| el.iter().any(|&i| i >= n)) {
            return bad(format!("element {e} references a missing node"));
        }
        if self.fixed_nodes.iter().chain(self.loaded_faces.iter().flatten()).any(|&i| i >= n) {
            return bad("boundary set references a missing node".into());
        }
        if let Some(e) = (0..self.elements.len()).find(|&e| !(tet_volume(&self.element_points(e)) > 0.0)) {
            return bad(format!("element {e} has non-positive volume"));
        }
        let mut fixed = vec![false; n];
        for &i in &self.fixed_nodes {
            fixed[i] = true;
        }
        if self.loaded_faces.iter().flatten().any(|&i| fixed[i]) {
            return bad("fixed and loaded sets overlap".into());
        }
        Ok(())
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        parent[ra.max(rb)] = ra.min(rb);
    }
}

fn in_plane_axes(face: Face) -> (usize, usize) {
    match face.fixed_axis().0 {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// Parametric (s, t) of the cyclic face corners returned by `face_corners`.
const FACE_ST: [(usize, usize); 4] = [(0, 0), (1, 0), (1, 1), (0, 1)];

struct Interface {
    blocks: (usize, usize),
    /// Pairs of block axes that must share a subdivision count.
    axes: [(usize, usize); 2],
}

/// Finds a full-face contact between two blocks, or `None`.
fn match_faces(
    ca: &[Point3<f64>; 8],
    fa: Face,
    cb: &[Point3<f64>; 8],
    fb: Face,
    tol: f64,
) -> Result<Option<[(usize, usize); 2]>, StructuralError> {
    let qa = face_corners(ca, fa);
    let qb = face_corners(cb, fb);
    let mut perm = [0usize; 4];
    for (i, p) in qa.iter().enumerate() {
        match qb.iter().position(|q| (p - q).norm() <= tol) {
            Some(j) => perm[i] = j,
            None => return Ok(None),
        }
    }
    let (a0, a1) = in_plane_axes(fa);
    let (b0, b1) = in_plane_axes(fb);
    // A's s-axis runs corner 0 → 1, its t-axis corner 0 → 3
    let (s0, s1, s3) = (FACE_ST[perm[0]], FACE_ST[perm[1]], FACE_ST[perm[3]]);
    let s_to_s = s0.0 != s1.0;
    let (rev_s, rev_t) = if s_to_s { (s0.0 == 1, s0.1 == 1) } else { (s0.1 == 1, s0.0 == 1) };
    debug_assert!(if s_to_s { s0.1 != s3.1 } else { s0.0 != s3.0 });
    if rev_s != rev_t {
        return Err(StructuralError::InconsistentInterface);
    }
    Ok(Some(if s_to_s { [(a0, b0), (a1, b1)] } else { [(a0, b1), (a1, b0)] }))
}

/// Mean edge length of a block along each parametric axis.
fn axis_lengths(c: &[Point3<f64>; 8]) -> Vector3<f64> {
    let mut out = Vector3::zeros();
    for axis in 0..3 {
        let bit = 1 << axis;
        out[axis] = (0..8).filter(|i| i & bit == 0).map(|i| (c[i | bit] - c[i]).norm()).sum::<f64>() / 4.0;
    }
    out
}

/// Spatial hash merging coincident nodes.
struct NodeMerger {
    quantum: f64,
    tol: f64,
    map: HashMap<[i64; 3], Vec<usize>>,
    nodes: Vec<Point3<f64>>,
}

impl NodeMerger {
    fn key(&self, p: &Point3<f64>) -> [i64; 3] {
        [0, 1, 2].map(|i| (p[i] / self.quantum).floor() as i64)
    }

    fn insert(&mut self, p: Point3<f64>) -> usize {
        let k = self.key(&p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = self.map.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        if let Some(&id) = ids.iter().find(|&&id| (self.nodes[id] - p).norm() <= self.tol) {
                            return id;
                        }
                    }
                }
            }
        }
        let id = self.nodes.len();
        self.nodes.push(p);
        self.map.entry(k).or_default().push(id);
        id
    }
}

/// Kuhn split of a hex (corners indexed i + 2j + 4k) into 6 tets sharing the 0–7 diagonal.
const KUHN: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Structured hex grid on each block, merged across matching faces, each
/// hex split into six tetrahedra.
pub fn generate_mesh(solid: &Solid, target_edge: f64) -> Result<FemMesh, StructuralError> {
    solid.validate()?;
    let corners: Vec<[Point3<f64>; 8]> = solid
        .primitives
        .iter()
        .enumerate()
        .map(|(i, p)| p.world_corners().ok_or(StructuralError::Unmeshable(i)))
        .collect::<Result<_, _>>()?;
    let lengths: Vec<Vector3<f64>> = corners.iter().map(axis_lengths).collect();
    let smallest = lengths.iter().map(|l| l.min()).fold(f64::INFINITY, f64::min);
    if !(target_edge > 0.0) || target_edge > smallest / 2.0 * (1.0 + 1e-9) {
        return Err(StructuralError::TooCoarse { target_edge, limit: smallest / 2.0 });
    }
    let (lo, hi) = solid.bounding_box();
    let tol = 1e-9 * (hi - lo).norm().max(1e-3);

    let nb = corners.len();
    let mut interfaces = Vec::new();
    for a in 0..nb {
        for b in a + 1..nb {
            for fa in Face::ALL {
                for fb in Face::ALL {
                    if let Some(axes) = match_faces(&corners[a], fa, &corners[b], fb, tol)? {
                        interfaces.push(Interface { blocks: (a, b), axes });
                    }
                }
            }
        }
    }
    let mut blocks = (0..nb).collect::<Vec<_>>();
    let mut classes = (0..3 * nb).collect::<Vec<_>>();
    for itf in &interfaces {
        union(&mut blocks, itf.blocks.0, itf.blocks.1);
        for (ax, bx) in itf.axes {
            union(&mut classes, 3 * itf.blocks.0 + ax, 3 * itf.blocks.1 + bx);
        }
    }
    if (0..nb).any(|b| find(&mut blocks, b) != find(&mut blocks, 0)) {
        return Err(StructuralError::Disconnected);
    }
    let mut class_n: HashMap<usize, usize> = HashMap::new();
    for b in 0..nb {
        for axis in 0..3 {
            let n = ((lengths[b][axis] / target_edge) - 1e-9).ceil().max(1.0) as usize;
            let c = find(&mut classes, 3 * b + axis);
            let slot = class_n.entry(c).or_insert(1);
            *slot = (*slot).max(n);
        }
    }

    let mut merger = NodeMerger { quantum: 4.0 * tol, tol, map: HashMap::new(), nodes: Vec::new() };
    let mut elements = Vec::new();
    let mut block_nodes = Vec::with_capacity(nb);
    let mut divisions = Vec::with_capacity(nb);
    for b in 0..nb {
        let n = [0, 1, 2].map(|axis| class_n[&find(&mut classes, 3 * b + axis)]);
        let idx = |i: usize, j: usize, k: usize| i + (n[0] + 1) * (j + (n[1] + 1) * k);
        let mut ids = vec![0usize; (n[0] + 1) * (n[1] + 1) * (n[2] + 1)];
        for k in 0..=n[2] {
            for j in 0..=n[1] {
                for i in 0..=n[0] {
                    let p = trilinear(&corners[b], i as f64 / n[0] as f64, j as f64 / n[1] as f64, k as f64 / n[2] as f64);
                    ids[idx(i, j, k)] = merger.insert(p);
                }
            }
        }
        for k in 0..n[2] {
            for j in 0..n[1] {
                for i in 0..n[0] {
                    let hex: [usize; 8] = std::array::from_fn(|c| ids[idx(i + (c & 1), j + (c >> 1 & 1), k + (c >> 2 & 1))]);
                    for perm in KUHN {
                        let mut at = 0usize;
                        let mut tet = [hex[0]; 4];
                        for (slot, axis) in perm.iter().enumerate() {
                            at |= 1 << axis;
                            tet[slot + 1] = hex[at];
                        }
                        let pts = tet.map(|i| merger.nodes[i]);
                        let v = tet_volume(&pts);
                        if v < 0.0 {
                            tet.swap(2, 3);
                        }
                        if v.abs() <= 1e-12 * target_edge.powi(3) {
                            return Err(StructuralError::InvalidMesh(format!("degenerate tetrahedron in block {b}")));
                        }
                        elements.push(tet);
                    }
                }
            }
        }
        block_nodes.push(ids);
        divisions.push(n);
    }

    let face_grid = |fr: FaceRef| -> Vec<Vec<usize>> {
        let n = divisions[fr.primitive];
        let ids = &block_nodes[fr.primitive];
        let (axis, val) = fr.face.fixed_axis();
        let (a, b) = in_plane_axes(fr.face);
        let fixed = if val == 1 { n[axis] } else { 0 };
        (0..=n[a])
            .map(|ia| {
                (0..=n[b])
                    .map(|ib| {
                        let mut ijk = [0usize; 3];
                        ijk[axis] = fixed;
                        ijk[a] = ia;
                        ijk[b] = ib;
                        ids[ijk[0] + (n[0] + 1) * (ijk[1] + (n[1] + 1) * ijk[2])]
                    })
                    .collect()
            })
            .collect()
    };
    let mut fixed_nodes: Vec<usize> = face_grid(solid.mount_face).into_iter().flatten().collect();
    fixed_nodes.sort_unstable();
    fixed_nodes.dedup();
    let seat = face_grid(solid.seat_face);
    let mut loaded_faces = Vec::new();
    for ia in 0..seat.len() - 1 {
        for ib in 0..seat[0].len() - 1 {
            let (p00, p10, p11, p01) = (seat[ia][ib], seat[ia + 1][ib], seat[ia + 1][ib + 1], seat[ia][ib + 1]);
            loaded_faces.push([p00, p10, p11]);
            loaded_faces.push([p00, p11, p01]);
        }
    }
    let mesh = FemMesh { nodes: merger.nodes, elements, fixed_nodes, loaded_faces };
    mesh.validate()?;
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_bracket, GeometryConfig, GeometryParams, Part, Primitive, Role, Shape};
    use nalgebra::{Isometry3, Translation3, UnitQuaternion};

    fn cube_solid(size: Vector3<f64>) -> Solid {
        let pose = Isometry3::from_parts(Translation3::from(size / 2.0), UnitQuaternion::identity());
        Solid {
            primitives: vec![Primitive::new(Shape::Box { size }, pose, Role::Other)],
            density: 2810.0,
            mount_face: FaceRef { primitive: 0, face: Face::UMin },
            seat_face: FaceRef { primitive: 0, face: Face::UMax },
        }
    }

    #[test]
    fn unit_cube_counts() {
        let m = generate_mesh(&cube_solid(Vector3::repeat(1.0)), 0.5).unwrap();
        assert_eq!(m.elements.len(), 48);
        assert_eq!(m.nodes.len(), 27);
        assert_eq!(m.fixed_nodes.len(), 9);
        assert_eq!(m.loaded_faces.len(), 8);
        assert!((m.volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_coarse_rejected() {
        let err = generate_mesh(&cube_solid(Vector3::new(1.0, 1.0, 0.2)), 0.2).unwrap_err();
        assert!(matches!(err, StructuralError::TooCoarse { .. }));
    }

    /// Area of element faces used by exactly one element.
    fn boundary_area(m: &FemMesh) -> f64 {
        let mut faces: HashMap<[usize; 3], usize> = HashMap::new();
        for el in &m.elements {
            for skip in 0..4 {
                let mut f = [0usize; 3];
                for (slot, i) in (0..4).filter(|&i| i != skip).enumerate() {
                    f[slot] = el[i];
                }
                f.sort_unstable();
                *faces.entry(f).or_default() += 1;
            }
        }
        assert!(faces.values().all(|&c| c <= 2));
        faces.iter().filter(|(_, &c)| c == 1).map(|(f, _)| triangle_area(f.map(|i| m.nodes[i]))).sum()
    }

    /// Area of block faces not glued to another block.
    fn exposed_area(s: &Solid) -> f64 {
        let cs: Vec<_> = s.primitives.iter().map(|p| p.world_corners().unwrap()).collect();
        let mut area = 0.0;
        for (b, c) in cs.iter().enumerate() {
            for f in Face::ALL {
                let glued = cs
                    .iter()
                    .enumerate()
                    .any(|(o, co)| o != b && Face::ALL.iter().any(|&g| matches!(match_faces(c, f, co, g, 1e-12), Ok(Some(_)))));
                if !glued {
                    area += s.face_area(FaceRef { primitive: b, face: f });
                }
            }
        }
        area
    }

    #[test]
    fn bracket_meshes_are_valid_and_crack_free() {
        let cfg = GeometryConfig::default();
        for p in [GeometryParams::BASELINE, GeometryParams::new(79, 40, 120, 150), GeometryParams::new(1, 100, 80, 50)] {
            for part in Part::ALL {
                let s = build_bracket(&p, part, &cfg).unwrap();
                let m = generate_mesh(&s, 0.003).unwrap();
                assert!((m.volume() - s.volume()).abs() < 1e-12 * s.volume().max(1.0) + 1e-15);
                assert!((m.loaded_area() - s.face_area(s.seat_face)).abs() < 1e-12);
                // any crack between blocks would expose extra interior faces
                let (b, e) = (boundary_area(&m), exposed_area(&s));
                assert!((b - e).abs() < 1e-9 * e, "{p} {}: {b} vs {e}", part.name());
            }
        }
    }

    #[test]
    fn refinement_multiplies_elements_by_about_eight() {
        let s = cube_solid(Vector3::new(0.04, 0.02, 0.02));
        let a = generate_mesh(&s, 0.004).unwrap().elements.len() as f64;
        let b = generate_mesh(&s, 0.002).unwrap().elements.len() as f64;
        assert!((b / a - 8.0).abs() < 0.5);
    }

    #[test]
    fn cylinders_are_not_meshable() {
        let mut s = cube_solid(Vector3::repeat(1.0));
        s.primitives.push(Primitive::new(Shape::Cylinder { radius: 0.1, height: 0.2 }, Isometry3::identity(), Role::Other));
        assert!(matches!(generate_mesh(&s, 0.1), Err(StructuralError::Unmeshable(1))));
    }
}
