//! Procedural jet-interface parts.
//!
//! Every part follows the same template, built in a part frame whose origin
//! is the bottom-centre of the mount face, with z the mount-site normal
//! (standoff axis), x the extrusion direction and y the lateral axis:
//!
//! ```text
//!                 ____ seat plate (tilted by `angle` about y)
//!                /   /
//!               /___/            ↑ z (standoff)
//!              |     \           |
//!              | col. |          |
//!  ____________|______|          +——→ x (extrusion)
//! |pad |  arm  | knee |
//! |____|_______|______|
//! ^ mount face (x = 0, clamped to the host)
//!      <-- length -->
//! ```
//!
//! The seat-plate top centre sits exactly `distance` above the datum plane
//! z = 0, over the knee centre. `offset` does not change the solid; it
//! translates the mount site laterally on the host link.

use nalgebra::{Isometry3, Point3, Translation3, UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::solid::{Face, FaceRef, Primitive, Role, Shape, Solid};
use super::{GeometryError, GeometryParams};

/// The two optimized interfaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Part {
    JetpackBracket,
    ForearmSupport,
}

impl Part {
    pub const ALL: [Part; 2] = [Part::JetpackBracket, Part::ForearmSupport];

    pub fn name(&self) -> &'static str {
        match self {
            Part::JetpackBracket => "jetpack-bracket",
            Part::ForearmSupport => "forearm-support",
        }
    }
}

impl std::str::FromStr for Part {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jetpack-bracket" | "jetpack" => Ok(Part::JetpackBracket),
            "forearm-support" | "forearm" => Ok(Part::ForearmSupport),
            _ => Err(format!("unknown part {s:?}")),
        }
    }
}

/// Which design parameters drive a part. Undriven parameters take the
/// template's fixed values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Drives {
    pub angle: bool,
    pub distance: bool,
    pub offset: bool,
    pub length: bool,
}

/// Values used for parameters a part is not driven by (degrees / mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedValues {
    pub angle_deg: f64,
    pub distance_mm: f64,
    pub offset_mm: f64,
    pub length_mm: f64,
}

/// Dimensions of the procedural part (metres unless noted).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartTemplate {
    /// Lateral width shared by every block.
    pub width: f64,
    /// Extent of the mount pad along x.
    pub pad_length: f64,
    /// Thickness of pad, arm and knee along z.
    pub thickness: f64,
    /// Extent of the knee (column footprint) along x at small tilts.
    pub knee_length: f64,
    /// Seat length at zero tilt; grows as 1/cos(angle) up to `seat_length_max`.
    pub seat_length: f64,
    pub seat_length_max: f64,
    pub plate_thickness: f64,
    /// Offset value (mm) at which the mount site is not translated.
    pub offset_reference_mm: f64,
    pub drives: Drives,
    pub fixed: FixedValues,
}

/// Geometry settings: density plus one template per part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometryConfig {
    /// kg/m³ (7075 aluminium handbook value by default)
    pub density: f64,
    /// Reject designs off the step grid. Disable to evaluate in-bounds
    /// designs such as published ones that do not sit on the grid.
    #[serde(default = "strict_default")]
    pub strict_grid: bool,
    pub jetpack: PartTemplate,
    pub forearm: PartTemplate,
}

fn strict_default() -> bool {
    true
}

impl Default for GeometryConfig {
    fn default() -> Self {
        let base = PartTemplate {
            width: 0.040,
            pad_length: 0.030,
            thickness: 0.012,
            knee_length: 0.024,
            seat_length: 0.032,
            seat_length_max: 0.044,
            plate_thickness: 0.006,
            offset_reference_mm: 100.0,
            drives: Drives { angle: false, distance: false, offset: false, length: false },
            fixed: FixedValues { angle_deg: 0.0, distance_mm: 50.0, offset_mm: 100.0, length_mm: 60.0 },
        };
        Self {
            density: 2810.0,
            strict_grid: true,
            jetpack: PartTemplate { drives: Drives { angle: true, distance: true, ..base.drives }, ..base },
            forearm: PartTemplate { drives: Drives { offset: true, length: true, ..base.drives }, ..base },
        }
    }
}

impl GeometryConfig {
    pub fn template(&self, part: Part) -> &PartTemplate {
        match part {
            Part::JetpackBracket => &self.jetpack,
            Part::ForearmSupport => &self.forearm,
        }
    }

    pub fn template_mut(&mut self, part: Part) -> &mut PartTemplate {
        match part {
            Part::JetpackBracket => &mut self.jetpack,
            Part::ForearmSupport => &mut self.forearm,
        }
    }

    /// SI shape parameters of a part for a design.
    pub fn shape(&self, params: &GeometryParams, part: Part) -> Result<PartShape, GeometryError> {
        let check = if self.strict_grid { params.validate() } else { params.validate_bounds() };
        check.map_err(GeometryError::InvalidParams)?;
        Ok(self.template(part).shape(params))
    }
}

/// Resolved SI parameters of one part (radians, metres).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartShape {
    pub angle: f64,
    pub distance: f64,
    pub lateral_shift: f64,
    pub length: f64,
}

impl PartShape {
    /// Hashable key of the solid (the lateral shift does not change it).
    pub fn solid_key(&self) -> [u64; 3] {
        [self.angle.to_bits(), self.distance.to_bits(), self.length.to_bits()]
    }
}

impl PartTemplate {
    pub fn shape(&self, p: &GeometryParams) -> PartShape {
        let pick = |driven: bool, v: i32, fixed: f64| if driven { v as f64 } else { fixed };
        let angle = pick(self.drives.angle, p.angle, self.fixed.angle_deg);
        let distance = pick(self.drives.distance, p.distance, self.fixed.distance_mm);
        let offset = pick(self.drives.offset, p.offset, self.fixed.offset_mm);
        let length = pick(self.drives.length, p.length, self.fixed.length_mm);
        PartShape {
            angle: angle.to_radians(),
            distance: distance * 1e-3,
            lateral_shift: (offset - self.offset_reference_mm) * 1e-3,
            length: length * 1e-3,
        }
    }

    /// Seat tilt in degrees, exactly as specified.
    pub fn tilt_deg(&self, p: &GeometryParams) -> f64 {
        if self.drives.angle {
            p.angle as f64
        } else {
            self.fixed.angle_deg
        }
    }

    pub fn seat_length(&self, angle: f64) -> f64 {
        (self.seat_length / angle.cos()).min(self.seat_length_max)
    }

    /// Knee (column footprint) length: the template value, narrowed so the
    /// column never overhangs the projected seat.
    pub fn knee_length(&self, angle: f64) -> f64 {
        self.knee_length.min(self.seat_length(angle) * angle.cos())
    }

    /// Plate normal in the part frame: z rotated by `angle` about y.
    pub fn seat_normal(angle: f64) -> Vector3<f64> {
        Vector3::new(angle.sin(), 0.0, angle.cos())
    }

    /// x of the knee centre, over which the seat is centred.
    fn knee_center(&self, s: &PartShape) -> f64 {
        self.pad_length + s.length - self.knee_length(s.angle) / 2.0
    }

    /// Jet mount point (top-centre of the seat plate) in the part frame.
    pub fn seat_point(&self, s: &PartShape) -> Point3<f64> {
        let n = Self::seat_normal(s.angle);
        Point3::new(self.knee_center(s) + self.plate_thickness * n.x, 0.0, s.distance)
    }

    pub fn build(&self, s: &PartShape, density: f64) -> Result<Solid, GeometryError> {
        let (w, t, c) = (self.width, self.thickness, self.knee_length(s.angle));
        let arm = s.length - c;
        if arm <= 0.0 {
            return Err(GeometryError::Template(format!("length {} m shorter than knee {c} m", s.length)));
        }
        let at = |x: f64, z: f64| Isometry3::from_parts(Translation3::new(x, 0.0, z), UnitQuaternion::identity());
        let pad = Primitive::new(
            Shape::Box { size: Vector3::new(self.pad_length, w, t) },
            at(self.pad_length / 2.0, t / 2.0),
            Role::Mount,
        );
        let arm_box = Primitive::new(
            Shape::Box { size: Vector3::new(arm, w, t) },
            at(self.pad_length + arm / 2.0, t / 2.0),
            Role::Extrusion,
        );
        let xk = self.knee_center(s);
        let knee = Primitive::new(Shape::Box { size: Vector3::new(c, w, t) }, at(xk, t / 2.0), Role::Extrusion);

        // plate: box rotated about y so its local z is the seat normal
        let n = Self::seat_normal(s.angle);
        let tangent = Vector3::new(s.angle.cos(), 0.0, -s.angle.sin());
        let ls = self.seat_length(s.angle);
        let tp = self.plate_thickness;
        let seat = self.seat_point(s);
        let bottom_center = seat - n * tp;
        let rot = UnitQuaternion::from_axis_angle(&Vector3::y_axis(), s.angle);
        let plate_pose = Isometry3::from_parts(Translation3::from((seat - n * (tp / 2.0)).coords), rot);
        let plate = Primitive::new(Shape::Box { size: Vector3::new(ls, w, tp) }, plate_pose, Role::Plate);

        // column: quadrilateral prism from the knee top to the plate bottom
        let rear_top = bottom_center - tangent * (ls / 2.0);
        let front_top = bottom_center + tangent * (ls / 2.0);
        let lowest = rear_top.z.min(front_top.z);
        if lowest - t <= 0.0 {
            return Err(GeometryError::Template(format!(
                "seat plate reaches below the arm (lowest edge {lowest:.4} m, arm top {t:.4} m)"
            )));
        }
        let profile = [
            Vector2::new(xk - c / 2.0, t),
            Vector2::new(xk + c / 2.0, t),
            Vector2::new(front_top.x, front_top.z),
            Vector2::new(rear_top.x, rear_top.z),
        ];
        let column = Primitive::new(Shape::QuadPrism { profile, depth: w }, Isometry3::identity(), Role::Standoff);

        let solid = Solid {
            primitives: vec![pad, arm_box, knee, column, plate],
            density,
            mount_face: FaceRef { primitive: 0, face: Face::UMin },
            seat_face: FaceRef { primitive: 4, face: Face::WMax },
        };
        solid.validate()?;
        Ok(solid)
    }
}

/// Builds the procedural part for a design. Deterministic in `params`.
pub fn build_bracket(params: &GeometryParams, part: Part, config: &GeometryConfig) -> Result<Solid, GeometryError> {
    let shape = config.shape(params, part)?;
    config.template(part).build(&shape, config.density)
}

/// Jet attachment in the mount-site frame of the host link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JetMountFrame {
    /// m
    pub position: Vector3<f64>,
    /// Unit thrust direction.
    pub axis: Vector3<f64>,
    /// m², area of the jet seat face
    pub contact_area: f64,
    /// Seat tilt in degrees (as applied, including template-fixed tilts).
    pub tilt_deg: f64,
}

/// Jet position/axis for a design, in the mount-site frame (part frame
/// translated laterally by the offset).
pub fn jet_mount_frame(params: &GeometryParams, part: Part, config: &GeometryConfig) -> Result<JetMountFrame, GeometryError> {
    let shape = config.shape(params, part)?;
    let tpl = config.template(part);
    let seat = tpl.seat_point(&shape);
    Ok(JetMountFrame {
        position: seat.coords + Vector3::y() * shape.lateral_shift,
        axis: PartTemplate::seat_normal(shape.angle),
        contact_area: tpl.seat_length(shape.angle) * tpl.width,
        tilt_deg: tpl.tilt_deg(params),
    })
}

/// Pose of the part frame in the mount-site frame.
pub fn part_placement(params: &GeometryParams, part: Part, config: &GeometryConfig) -> Result<Isometry3<f64>, GeometryError> {
    let shape = config.shape(params, part)?;
    Ok(Isometry3::translation(0.0, shape.lateral_shift, 0.0))
}
