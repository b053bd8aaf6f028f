use nalgebra::{Isometry3, Matrix3, Point3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Shape of a primitive in its own frame.
///
/// Boxes are centred on the origin. Cylinders run along local z and are
/// centred on the origin. A `QuadPrism` is a convex quadrilateral profile in
/// the local x-z plane (counter-clockwise with x right and z up) extruded
/// symmetrically along local y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    Box { size: Vector3<f64> },
    Cylinder { radius: f64, height: f64 },
    QuadPrism { profile: [Vector2<f64>; 4], depth: f64 },
}

/// What a primitive does in the bracket. Used for meshing and inspection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Mount,
    Extrusion,
    Standoff,
    Plate,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub shape: Shape,
    pub pose: Isometry3<f64>,
    pub role: Role,
}

/// One face of a hexahedral block, in parametric terms (u, v, w) ∈ [0, 1]³.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Face {
    UMin,
    UMax,
    VMin,
    VMax,
    WMin,
    WMax,
}

impl Face {
    pub const ALL: [Face; 6] = [Face::UMin, Face::UMax, Face::VMin, Face::VMax, Face::WMin, Face::WMax];

    /// Axis held fixed on this face and its value (0 or 1).
    pub fn fixed_axis(&self) -> (usize, usize) {
        match self {
            Face::UMin => (0, 0),
            Face::UMax => (0, 1),
            Face::VMin => (1, 0),
            Face::VMax => (1, 1),
            Face::WMin => (2, 0),
            Face::WMax => (2, 1),
        }
    }
}

/// A face of one primitive of a solid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaceRef {
    pub primitive: usize,
    pub face: Face,
}

/// Composite solid made of non-overlapping primitives of uniform density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solid {
    pub primitives: Vec<Primitive>,
    /// kg/m³
    pub density: f64,
    /// Face clamped to the host link.
    pub mount_face: FaceRef,
    /// Face in contact with the jet.
    pub seat_face: FaceRef,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassProperties {
    /// kg
    pub mass: f64,
    /// m, in the part frame
    pub com: Vector3<f64>,
    /// kg·m² about the centre of mass, part-frame axes
    pub inertia: Matrix3<f64>,
}

impl MassProperties {
    /// Principal moments (ascending).
    pub fn principal_moments(&self) -> [f64; 3] {
        let eig = self.inertia.symmetric_eigen();
        let mut m = [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]];
        m.sort_by(f64::total_cmp);
        m
    }

    /// Mass properties of the same body seen from another frame: `pose` maps
    /// this body's frame into the target frame.
    pub fn transformed(&self, pose: &Isometry3<f64>) -> Self {
        let r = pose.rotation.to_rotation_matrix();
        Self {
            mass: self.mass,
            com: pose.transform_point(&Point3::from(self.com)).coords,
            inertia: r.matrix() * self.inertia * r.matrix().transpose(),
        }
    }

    /// Aggregates bodies expressed in a common frame (parallel-axis theorem).
    pub fn combine<'a>(parts: impl IntoIterator<Item = &'a MassProperties> + Clone) -> Self {
        let mass: f64 = parts.clone().into_iter().map(|p| p.mass).sum();
        let com = parts.clone().into_iter().map(|p| p.com * p.mass).sum::<Vector3<f64>>() / mass;
        let inertia = parts.into_iter().map(|p| p.inertia + parallel_axis(p.mass, &(p.com - com))).sum();
        Self { mass, com, inertia }
    }

    pub fn is_physical(&self) -> bool {
        if !(self.mass > 0.0) || (self.inertia - self.inertia.transpose()).amax() > 1e-12 * self.inertia.amax() {
            return false;
        }
        let [a, b, c] = self.principal_moments();
        a > 0.0 && a + b >= c * (1.0 - 1e-12)
    }
}

/// Inertia of a point mass `m` displaced by `d`: m(|d|²I − d dᵀ).
pub fn parallel_axis(m: f64, d: &Vector3<f64>) -> Matrix3<f64> {
    m * (Matrix3::identity() * d.norm_squared() - d * d.transpose())
}

/// Area, centroid and second moments (∫x², ∫z², ∫xz) of a simple polygon
/// in the x-z plane via the shoelace formulas.
pub(crate) fn polygon_moments(p: &[Vector2<f64>]) -> (f64, Vector2<f64>, [f64; 3]) {
    let (mut a, mut cx, mut cz, mut ixx, mut izz, mut ixz) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..p.len() {
        let (x0, z0) = (p[i].x, p[i].y);
        let (x1, z1) = (p[(i + 1) % p.len()].x, p[(i + 1) % p.len()].y);
        let cross = x0 * z1 - x1 * z0;
        a += cross;
        cx += (x0 + x1) * cross;
        cz += (z0 + z1) * cross;
        ixx += (x0 * x0 + x0 * x1 + x1 * x1) * cross;
        izz += (z0 * z0 + z0 * z1 + z1 * z1) * cross;
        ixz += (x0 * z1 + 2.0 * x0 * z0 + 2.0 * x1 * z1 + x1 * z0) * cross;
    }
    let area = a / 2.0;
    (area, Vector2::new(cx, cz) / (6.0 * area), [ixx / 12.0, izz / 12.0, ixz / 24.0])
}

impl Shape {
    pub fn volume(&self) -> f64 {
        match self {
            Shape::Box { size } => size.x * size.y * size.z,
            Shape::Cylinder { radius, height } => std::f64::consts::PI * radius * radius * height,
            Shape::QuadPrism { profile, depth } => polygon_moments(profile).0 * depth,
        }
    }

    fn check(&self) -> Result<(), GeometryError> {
        let ok = match self {
            Shape::Box { size } => size.iter().all(|&s| s > 0.0),
            Shape::Cylinder { radius, height } => *radius > 0.0 && *height > 0.0,
            Shape::QuadPrism { profile, depth } => {
                // strictly convex, counter-clockwise
                *depth > 0.0
                    && (0..4).all(|i| {
                        let a = profile[(i + 1) % 4] - profile[i];
                        let b = profile[(i + 2) % 4] - profile[(i + 1) % 4];
                        a.x * b.y - a.y * b.x > 0.0
                    })
            }
        };
        if ok {
            Ok(())
        } else {
            Err(GeometryError::Degenerate(format!("{self:?}")))
        }
    }

    /// Mass properties in the primitive's own frame.
    pub fn mass_properties(&self, density: f64) -> MassProperties {
        match self {
            Shape::Box { size } => {
                let m = density * size.x * size.y * size.z;
                let (a2, b2, c2) = (size.x * size.x, size.y * size.y, size.z * size.z);
                MassProperties {
                    mass: m,
                    com: Vector3::zeros(),
                    inertia: Matrix3::from_diagonal(&Vector3::new(b2 + c2, a2 + c2, a2 + b2)) * (m / 12.0),
                }
            }
            Shape::Cylinder { radius, height } => {
                let m = density * std::f64::consts::PI * radius * radius * height;
                let side = m * (3.0 * radius * radius + height * height) / 12.0;
                MassProperties {
                    mass: m,
                    com: Vector3::zeros(),
                    inertia: Matrix3::from_diagonal(&Vector3::new(side, side, m * radius * radius / 2.0)),
                }
            }
            Shape::QuadPrism { profile, depth } => {
                let (area, c, [sxx, szz, sxz]) = polygon_moments(profile);
                let d = *depth;
                let m = density * area * d;
                let yy = area * d * d * d / 12.0; // ∫∫∫ y² dV
                                                  // about the local origin
                let about_origin = Matrix3::new(
                    density * (d * szz + yy),
                    0.0,
                    -density * d * sxz,
                    0.0,
                    density * d * (sxx + szz),
                    0.0,
                    -density * d * sxz,
                    0.0,
                    density * (d * sxx + yy),
                );
                let com = Vector3::new(c.x, 0.0, c.y);
                MassProperties { mass: m, com, inertia: about_origin - parallel_axis(m, &com) }
            }
        }
    }

    /// Point membership in the primitive frame (used by inspection tools and oracles).
    pub fn contains(&self, p: &Point3<f64>) -> bool {
        match self {
            Shape::Box { size } => (0..3).all(|i| p[i].abs() <= size[i] / 2.0),
            Shape::Cylinder { radius, height } => p.z.abs() <= height / 2.0 && p.x * p.x + p.y * p.y <= radius * radius,
            Shape::QuadPrism { profile, depth } => {
                p.y.abs() <= depth / 2.0
                    && (0..4).all(|i| {
                        let a = profile[i];
                        let b = profile[(i + 1) % 4];
                        (b.x - a.x) * (p.z - a.y) - (b.y - a.y) * (p.x - a.x) >= 0.0
                    })
            }
        }
    }

    /// The eight block corners, indexed `i + 2j + 4k` for parametric
    /// coordinates (i, j, k) ∈ {0,1}³. `None` for shapes that are not blocks.
    pub fn block_corners(&self) -> Option<[Point3<f64>; 8]> {
        let mut out = [Point3::origin(); 8];
        match self {
            Shape::Box { size } => {
                for (idx, c) in out.iter_mut().enumerate() {
                    let s = |bit: usize, len: f64| if idx >> bit & 1 == 1 { len / 2.0 } else { -len / 2.0 };
                    *c = Point3::new(s(0, size.x), s(1, size.y), s(2, size.z));
                }
            }
            Shape::QuadPrism { profile, depth } => {
                // u runs along profile[0]→profile[1], w along profile[0]→profile[3]
                let corner_of = |i: usize, k: usize| match (i, k) {
                    (0, 0) => profile[0],
                    (1, 0) => profile[1],
                    (1, 1) => profile[2],
                    _ => profile[3],
                };
                for (idx, c) in out.iter_mut().enumerate() {
                    let q = corner_of(idx & 1, idx >> 2 & 1);
                    let y = if idx >> 1 & 1 == 1 { depth / 2.0 } else { -depth / 2.0 };
                    *c = Point3::new(q.x, y, q.y);
                }
            }
            Shape::Cylinder { .. } => return None,
        }
        Some(out)
    }
}

/// Trilinear interpolation of block corners at parametric (u, v, w).
pub fn trilinear(corners: &[Point3<f64>; 8], u: f64, v: f64, w: f64) -> Point3<f64> {
    let mut p = Vector3::zeros();
    for (idx, c) in corners.iter().enumerate() {
        let wu = if idx & 1 == 1 { u } else { 1.0 - u };
        let wv = if idx >> 1 & 1 == 1 { v } else { 1.0 - v };
        let ww = if idx >> 2 & 1 == 1 { w } else { 1.0 - w };
        p += c.coords * (wu * wv * ww);
    }
    Point3::from(p)
}

impl Primitive {
    pub fn new(shape: Shape, pose: Isometry3<f64>, role: Role) -> Self {
        Self { shape, pose, role }
    }

    /// Block corners in the part frame.
    pub fn world_corners(&self) -> Option<[Point3<f64>; 8]> {
        self.shape.block_corners().map(|c| c.map(|p| self.pose.transform_point(&p)))
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        self.shape.contains(&self.pose.inverse_transform_point(p))
    }
}

impl Solid {
    pub fn volume(&self) -> f64 {
        self.primitives.iter().map(|p| p.shape.volume()).sum()
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.density > 0.0) {
            return Err(GeometryError::Degenerate(format!("density {}", self.density)));
        }
        self.primitives.iter().try_for_each(|p| p.shape.check())
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        self.primitives.iter().any(|prim| prim.contains(p))
    }

    /// Axis-aligned bounding box (min, max) in the part frame.
    pub fn bounding_box(&self) -> (Point3<f64>, Point3<f64>) {
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for prim in &self.primitives {
            let pts: Vec<Point3<f64>> = match &prim.shape {
                Shape::Cylinder { radius, height } => (0..8)
                    .map(|i| {
                        let s = |b: usize| if i >> b & 1 == 1 { 1.0 } else { -1.0 };
                        prim.pose.transform_point(&Point3::new(s(0) * radius, s(1) * radius, s(2) * height / 2.0))
                    })
                    .collect(),
                _ => prim.world_corners().map(Vec::from).unwrap_or_default(),
            };
            for p in pts {
                for i in 0..3 {
                    lo[i] = lo[i].min(p[i]);
                    hi[i] = hi[i].max(p[i]);
                }
            }
        }
        (lo, hi)
    }

    /// Area of a block face (bilinear quadrilateral; exact for planar faces).
    pub fn face_area(&self, face: FaceRef) -> f64 {
        let Some(c) = self.primitives[face.primitive].world_corners() else {
            return 0.0;
        };
        let q = face_corners(&c, face.face);
        ((q[1] - q[0]).cross(&(q[3] - q[0])).norm() + (q[2] - q[1]).cross(&(q[3] - q[1])).norm()) / 2.0
    }

    /// Outward unit normal of a planar block face.
    pub fn face_normal(&self, face: FaceRef) -> Vector3<f64> {
        let prim = &self.primitives[face.primitive];
        let c = prim.world_corners().expect("block primitive");
        let q = face_corners(&c, face.face);
        let n = (q[2] - q[0]).cross(&(q[3] - q[1])).normalize();
        // orient away from the block centre
        let centre = c.iter().map(|p| p.coords).sum::<Vector3<f64>>() / 8.0;
        let fc = q.iter().map(|p| p.coords).sum::<Vector3<f64>>() / 4.0;
        if n.dot(&(fc - centre)) < 0.0 {
            -n
        } else {
            n
        }
    }

    pub fn face_center(&self, face: FaceRef) -> Point3<f64> {
        let c = self.primitives[face.primitive].world_corners().expect("block primitive");
        Point3::from(face_corners(&c, face.face).iter().map(|p| p.coords).sum::<Vector3<f64>>() / 4.0)
    }
}

/// Corners of a block face in cyclic order.
pub fn face_corners(c: &[Point3<f64>; 8], face: Face) -> [Point3<f64>; 4] {
    let (axis, val) = face.fixed_axis();
    let (a, b) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let idx = |ia: usize, ib: usize| (val << axis) | (ia << a) | (ib << b);
    [c[idx(0, 0)], c[idx(1, 0)], c[idx(1, 1)], c[idx(0, 1)]]
}

/// Exact composite mass properties: closed-form per primitive, then
/// parallel-axis aggregation in the part frame.
pub fn mass_properties(solid: &Solid) -> Result<MassProperties, GeometryError> {
    solid.validate()?;
    if solid.primitives.is_empty() {
        return Err(GeometryError::Degenerate("empty solid".into()));
    }
    let parts: Vec<MassProperties> =
        solid.primitives.iter().map(|p| p.shape.mass_properties(solid.density).transformed(&p.pose)).collect();
    Ok(MassProperties::combine(&parts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Translation3;

    fn boxed(size: Vector3<f64>, at: Vector3<f64>) -> Primitive {
        Primitive::new(Shape::Box { size }, Isometry3::from_parts(Translation3::from(at), Default::default()), Role::Other)
    }

    fn solid_of(primitives: Vec<Primitive>) -> Solid {
        let f = |face| FaceRef { primitive: 0, face };
        Solid { primitives, density: 2810.0, mount_face: f(Face::WMin), seat_face: f(Face::WMax) }
    }

    #[test]
    fn single_box_closed_form() {
        let s = solid_of(vec![boxed(Vector3::new(0.1, 0.2, 0.3), Vector3::zeros())]);
        let mp = mass_properties(&s).unwrap();
        assert_relative_eq!(mp.mass, 16.86, max_relative = 1e-12);
        assert_relative_eq!(mp.inertia[(0, 0)], 16.86 * (0.04 + 0.09) / 12.0, max_relative = 1e-12);
    }

    #[test]
    fn mirrored_boxes_have_centred_com() {
        let size = Vector3::new(0.05, 0.02, 0.01);
        let s = solid_of(vec![boxed(size, Vector3::new(0.1, 0.03, -0.02)), boxed(size, Vector3::new(-0.1, -0.03, 0.02))]);
        let mp = mass_properties(&s).unwrap();
        assert!(mp.com.norm() < 1e-15);
        assert!(mp.is_physical());
    }

    #[test]
    fn degenerate_box_rejected() {
        let s = solid_of(vec![boxed(Vector3::new(0.1, 0.0, 0.1), Vector3::zeros())]);
        assert!(matches!(mass_properties(&s), Err(GeometryError::Degenerate(_))));
    }

    #[test]
    fn rectangular_quad_prism_matches_box() {
        let profile =
            [Vector2::new(-0.02, -0.01), Vector2::new(0.02, -0.01), Vector2::new(0.02, 0.01), Vector2::new(-0.02, 0.01)];
        let prism = Shape::QuadPrism { profile, depth: 0.06 }.mass_properties(1000.0);
        let boxed = Shape::Box { size: Vector3::new(0.04, 0.06, 0.02) }.mass_properties(1000.0);
        assert_relative_eq!(prism.mass, boxed.mass, max_relative = 1e-12);
        assert_relative_eq!(prism.inertia, boxed.inertia, max_relative = 1e-12);
    }

    #[test]
    fn box_face_geometry() {
        let s = solid_of(vec![boxed(Vector3::new(0.1, 0.2, 0.3), Vector3::new(0.0, 0.0, 0.15))]);
        let top = FaceRef { primitive: 0, face: Face::WMax };
        assert_relative_eq!(s.face_area(top), 0.02, max_relative = 1e-12);
        assert_relative_eq!(s.face_normal(top), Vector3::z(), epsilon = 1e-15);
        assert_relative_eq!(s.face_center(top).z, 0.3, epsilon = 1e-15);
        let bottom = FaceRef { primitive: 0, face: Face::WMin };
        assert_relative_eq!(s.face_normal(bottom), -Vector3::z(), epsilon = 1e-15);
    }
}
