//! URDF-subset reader and writer.
//!
//! Supported: `<link>` with `<inertial>`, `revolute` and `fixed` `<joint>`s
//! (with an optional `group` attribute), plus the extension elements
//! `<gravity g=".."/>`, `<thruster .../>` and `<jet_interface .../>`.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use roxmltree::{Document, Node};

use super::model::{JetInterface, Joint, JointGroup, JointKind, Link, Origin, RobotModel, Thruster};
use super::DynamicsError;
use crate::geometry::{
    build_bracket, jet_mount_frame, mass_properties, part_placement, GeometryConfig, GeometryParams, MassProperties, Part,
};

fn err(node: &Node, msg: impl std::fmt::Display) -> DynamicsError {
    DynamicsError::Parse(format!("<{}> {msg}", node.tag_name().name()))
}

fn attr<'a>(node: &Node<'a, '_>, name: &str) -> Result<&'a str, DynamicsError> {
    node.attribute(name).ok_or_else(|| err(node, format!("missing attribute {name:?}")))
}

fn num(node: &Node, name: &str) -> Result<f64, DynamicsError> {
    let text = attr(node, name)?;
    text.trim().parse().map_err(|_| err(node, format!("{name}={text:?} is not a number")))
}

fn num_or(node: &Node, name: &str, default: f64) -> Result<f64, DynamicsError> {
    if node.attribute(name).is_some() {
        num(node, name)
    } else {
        Ok(default)
    }
}

fn vec3(node: &Node, name: &str) -> Result<Vector3<f64>, DynamicsError> {
    let text = attr(node, name)?;
    let v: Vec<f64> = text
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|_| err(node, format!("{name}={text:?} is not a vector")))?;
    if v.len() != 3 {
        return Err(err(node, format!("{name} needs three components")));
    }
    Ok(Vector3::new(v[0], v[1], v[2]))
}

fn child<'a, 'i>(node: &Node<'a, 'i>, tag: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.has_tag_name(tag))
}

fn origin(node: &Node) -> Result<Origin, DynamicsError> {
    match child(node, "origin") {
        None => Ok(Origin::IDENTITY),
        Some(o) => Ok(Origin {
            xyz: if o.has_attribute("xyz") { vec3(&o, "xyz")? } else { Vector3::zeros() },
            rpy: if o.has_attribute("rpy") { vec3(&o, "rpy")? } else { Vector3::zeros() },
        }),
    }
}

fn parse_link(node: &Node) -> Result<Link, DynamicsError> {
    let name = attr(node, "name")?.to_string();
    let inertial = child(node, "inertial").ok_or_else(|| DynamicsError::Inertial(name.clone()))?;
    let o = origin(&inertial)?;
    let mass = child(&inertial, "mass").ok_or_else(|| DynamicsError::Inertial(name.clone()))?;
    let i = child(&inertial, "inertia").ok_or_else(|| DynamicsError::Inertial(name.clone()))?;
    let (ixx, iyy, izz) = (num(&i, "ixx")?, num(&i, "iyy")?, num(&i, "izz")?);
    let (ixy, ixz, iyz) = (num_or(&i, "ixy", 0.0)?, num_or(&i, "ixz", 0.0)?, num_or(&i, "iyz", 0.0)?);
    let local = Matrix3::new(ixx, ixy, ixz, ixy, iyy, iyz, ixz, iyz, izz);
    let inertia = if o.rpy == Vector3::zeros() {
        local
    } else {
        let r = o.rotation();
        r * local * r.transpose()
    };
    Ok(Link { name, inertial: MassProperties { mass: num(&mass, "value")?, com: o.xyz, inertia } })
}

fn parse_joint(node: &Node, links: &[Link]) -> Result<Joint, DynamicsError> {
    let name = attr(node, "name")?.to_string();
    let kind = match attr(node, "type")? {
        "revolute" => JointKind::Revolute,
        "fixed" => JointKind::Fixed,
        other => return Err(err(node, format!("unsupported joint type {other:?}"))),
    };
    let link_ref = |tag: &str| -> Result<usize, DynamicsError> {
        let c = child(node, tag).ok_or_else(|| err(node, format!("{name}: missing <{tag}>")))?;
        let l = attr(&c, "link")?;
        links.iter().position(|x| x.name == l).ok_or_else(|| err(node, format!("{name}: unknown link {l:?}")))
    };
    let (parent, child_link) = (link_ref("parent")?, link_ref("child")?);
    let group = match node.attribute("group") {
        None => None,
        Some("torso") => Some(JointGroup::Torso),
        Some("arms") => Some(JointGroup::Arms),
        Some(other) => return Err(err(node, format!("unknown group {other:?}"))),
    };
    let mut joint = Joint {
        name,
        kind,
        parent,
        child: child_link,
        origin: origin(node)?,
        axis: Vector3::x(),
        lower: 0.0,
        upper: 0.0,
        velocity: 0.0,
        group,
    };
    if kind == JointKind::Revolute {
        joint.axis = match child(node, "axis") {
            Some(a) => vec3(&a, "xyz")?,
            None => Vector3::x(),
        };
        let lim = child(node, "limit").ok_or_else(|| err(node, format!("{}: missing <limit>", joint.name)))?;
        joint.lower = num(&lim, "lower")?;
        joint.upper = num(&lim, "upper")?;
        joint.velocity = num(&lim, "velocity")?;
    }
    Ok(joint)
}

fn parse_thruster(node: &Node, links: &[Link]) -> Result<Thruster, DynamicsError> {
    let parent_name = attr(node, "parent")?;
    Ok(Thruster {
        name: attr(node, "name")?.to_string(),
        parent: links
            .iter()
            .position(|l| l.name == parent_name)
            .ok_or_else(|| err(node, format!("unknown parent {parent_name:?}")))?,
        position: vec3(node, "xyz")?,
        axis: vec3(node, "axis")?,
        t_min: num(node, "tmin")?,
        t_max: num(node, "tmax")?,
        tdot_min: num(node, "tdotmin")?,
        tdot_max: num(node, "tdotmax")?,
        tilt_deg: num_or(node, "tilt_deg", 0.0)?,
        contact_area: num_or(node, "area", 0.0)?,
    })
}

fn parse_interface(node: &Node, links: &[Link], joints: &[Joint], thrusters: &[Thruster]) -> Result<JetInterface, DynamicsError> {
    let link = attr(node, "link")?;
    let thruster = attr(node, "thruster")?;
    let part: Part = attr(node, "part")?.parse().map_err(|e| err(node, e))?;
    let jet_joint = match node.attribute("jet_joint") {
        None => None,
        Some(j) => Some(joints.iter().position(|x| x.name == j).ok_or_else(|| err(node, format!("unknown joint {j:?}")))?),
    };
    Ok(JetInterface {
        link: links.iter().position(|l| l.name == link).ok_or_else(|| err(node, format!("unknown link {link:?}")))?,
        part,
        side: num(node, "side")?,
        thruster: thrusters
            .iter()
            .position(|t| t.name == thruster)
            .ok_or_else(|| err(node, format!("unknown thruster {thruster:?}")))?,
        jet_joint,
    })
}

/// Parses and validates a model.
pub fn parse_urdf(text: &str) -> Result<RobotModel, DynamicsError> {
    let doc = Document::parse(text).map_err(|e| DynamicsError::Parse(e.to_string()))?;
    let robot = doc.root_element();
    if !robot.has_tag_name("robot") {
        return Err(DynamicsError::Parse("root element must be <robot>".into()));
    }
    let elements = |tag: &'static str| robot.children().filter(move |c| c.has_tag_name(tag));
    let links = elements("link").map(|n| parse_link(&n)).collect::<Result<Vec<_>, _>>()?;
    let joints = elements("joint").map(|n| parse_joint(&n, &links)).collect::<Result<Vec<_>, _>>()?;
    let thrusters = elements("thruster").map(|n| parse_thruster(&n, &links)).collect::<Result<Vec<_>, _>>()?;
    let interfaces =
        elements("jet_interface").map(|n| parse_interface(&n, &links, &joints, &thrusters)).collect::<Result<Vec<_>, _>>()?;
    let gravity = match elements("gravity").next() {
        Some(g) => num(&g, "g")?,
        None => -9.81,
    };
    RobotModel {
        name: robot.attribute("name").unwrap_or("robot").to_string(),
        links,
        joints,
        thrusters,
        interfaces,
        gravity,
        tree: Default::default(),
    }
    .finalize()
}

pub fn load_model(path: impl AsRef<Path>) -> Result<RobotModel, DynamicsError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| DynamicsError::Io(format!("{}: {e}", path.display())))?;
    parse_urdf(&text)
}

fn f(x: f64) -> String {
    format!("{x:?}")
}

fn v(x: &Vector3<f64>) -> String {
    format!("{} {} {}", f(x.x), f(x.y), f(x.z))
}

/// Canonical text form. Numbers use the shortest exact representation, so
/// parsing the output reproduces every field bit for bit.
pub fn write_urdf(model: &RobotModel) -> String {
    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(w, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>");
    let _ = writeln!(w, "<robot name=\"{}\">", model.name);
    let _ = writeln!(w, "  <gravity g=\"{}\"/>", f(model.gravity));
    for l in &model.links {
        let (m, i) = (&l.inertial, &l.inertial.inertia);
        let _ = writeln!(w, "  <link name=\"{}\">", l.name);
        let _ = writeln!(w, "    <inertial>");
        let _ = writeln!(w, "      <origin xyz=\"{}\" rpy=\"0.0 0.0 0.0\"/>", v(&m.com));
        let _ = writeln!(w, "      <mass value=\"{}\"/>", f(m.mass));
        let _ = writeln!(
            w,
            "      <inertia ixx=\"{}\" ixy=\"{}\" ixz=\"{}\" iyy=\"{}\" iyz=\"{}\" izz=\"{}\"/>",
            f(i[(0, 0)]),
            f(i[(0, 1)]),
            f(i[(0, 2)]),
            f(i[(1, 1)]),
            f(i[(1, 2)]),
            f(i[(2, 2)])
        );
        let _ = writeln!(w, "    </inertial>");
        let _ = writeln!(w, "  </link>");
    }
    for j in &model.joints {
        let kind = match j.kind {
            JointKind::Revolute => "revolute",
            JointKind::Fixed => "fixed",
        };
        let group = j.group.map(|g| format!(" group=\"{}\"", g.name())).unwrap_or_default();
        let _ = writeln!(w, "  <joint name=\"{}\" type=\"{kind}\"{group}>", j.name);
        let _ = writeln!(w, "    <parent link=\"{}\"/>", model.links[j.parent].name);
        let _ = writeln!(w, "    <child link=\"{}\"/>", model.links[j.child].name);
        let _ = writeln!(w, "    <origin xyz=\"{}\" rpy=\"{}\"/>", v(&j.origin.xyz), v(&j.origin.rpy));
        if j.kind == JointKind::Revolute {
            let _ = writeln!(w, "    <axis xyz=\"{}\"/>", v(&j.axis));
            let _ = writeln!(w, "    <limit lower=\"{}\" upper=\"{}\" velocity=\"{}\"/>", f(j.lower), f(j.upper), f(j.velocity));
        }
        let _ = writeln!(w, "  </joint>");
    }
    for t in &model.thrusters {
        let _ = writeln!(
            w,
            "  <thruster name=\"{}\" parent=\"{}\" xyz=\"{}\" axis=\"{}\" tmin=\"{}\" tmax=\"{}\" tdotmin=\"{}\" tdotmax=\"{}\" tilt_deg=\"{}\" area=\"{}\"/>",
            t.name,
            model.links[t.parent].name,
            v(&t.position),
            v(&t.axis),
            f(t.t_min),
            f(t.t_max),
            f(t.tdot_min),
            f(t.tdot_max),
            f(t.tilt_deg),
            f(t.contact_area)
        );
    }
    for itf in &model.interfaces {
        let jet = itf.jet_joint.map(|j| format!(" jet_joint=\"{}\"", model.joints[j].name)).unwrap_or_default();
        let _ = writeln!(
            w,
            "  <jet_interface link=\"{}\" part=\"{}\" side=\"{}\" thruster=\"{}\"{jet}/>",
            model.links[itf.link].name,
            itf.part.name(),
            f(itf.side),
            model.thrusters[itf.thruster].name
        );
    }
    let _ = writeln!(w, "</robot>");
    s
}

/// Copy of `model` whose jet interfaces carry the parts of design `params`:
/// bracket inertials, thruster frames, seat areas and jet-body placements.
pub fn apply_design(model: &RobotModel, params: &GeometryParams, geometry: &GeometryConfig) -> Result<RobotModel, DynamicsError> {
    let mut out = model.clone();
    for itf in &model.interfaces {
        let solid = build_bracket(params, itf.part, geometry)?;
        let mut placement = part_placement(params, itf.part, geometry)?;
        placement.translation.vector.y *= itf.side;
        let mut inertial = mass_properties(&solid)?.transformed(&placement);
        inertial.inertia = (inertial.inertia + inertial.inertia.transpose()) * 0.5;
        out.links[itf.link].inertial = inertial;
        let mut frame = jet_mount_frame(params, itf.part, geometry)?;
        frame.position.y *= itf.side;
        let t = &mut out.thrusters[itf.thruster];
        t.position = frame.position;
        t.axis = frame.axis;
        t.tilt_deg = frame.tilt_deg;
        t.contact_area = frame.contact_area;
        if let Some(j) = itf.jet_joint {
            out.joints[j].origin = Origin { xyz: frame.position, rpy: Vector3::new(0.0, frame.tilt_deg.to_radians(), 0.0) };
        }
    }
    out.finalize()
}

/// Writes the model specialised to `params`.
pub fn emit_model(
    model: &RobotModel,
    params: &GeometryParams,
    geometry: &GeometryConfig,
    path: impl AsRef<Path>,
) -> Result<RobotModel, DynamicsError> {
    let designed = apply_design(model, params, geometry)?;
    let path = path.as_ref();
    std::fs::write(path, write_urdf(&designed)).map_err(|e| DynamicsError::Io(format!("{}: {e}", path.display())))?;
    Ok(designed)
}
