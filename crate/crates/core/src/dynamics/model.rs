//! Floating-base kinematic tree with thrusters.

use std::collections::HashMap;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{so3, DynamicsError};
use crate::geometry::{MassProperties, Part};

/// Rigid transform written as URDF `xyz` / `rpy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Origin {
    pub xyz: Vector3<f64>,
    pub rpy: Vector3<f64>,
}

impl Origin {
    pub const IDENTITY: Origin = Origin { xyz: Vector3::new(0.0, 0.0, 0.0), rpy: Vector3::new(0.0, 0.0, 0.0) };

    pub fn rotation(&self) -> Matrix3<f64> {
        so3::from_rpy(&self.rpy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub name: String,
    /// Mass, CoM and inertia about the CoM, in link coordinates.
    pub inertial: MassProperties,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    Revolute,
    Fixed,
}

/// Joint grouping used by the joint-velocity fitness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointGroup {
    Torso,
    Arms,
}

impl JointGroup {
    pub fn name(&self) -> &'static str {
        match self {
            JointGroup::Torso => "torso",
            JointGroup::Arms => "arms",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub name: String,
    pub kind: JointKind,
    pub parent: usize,
    pub child: usize,
    /// Child frame relative to the parent link at zero joint angle.
    pub origin: Origin,
    /// Unit rotation axis in the child frame (revolute only).
    pub axis: Vector3<f64>,
    /// rad
    pub lower: f64,
    pub upper: f64,
    /// rad/s
    pub velocity: f64,
    pub group: Option<JointGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thruster {
    pub name: String,
    pub parent: usize,
    /// Jet application point in the parent link frame.
    pub position: Vector3<f64>,
    /// Unit direction of the force on the robot, parent link frame.
    pub axis: Vector3<f64>,
    /// N
    pub t_min: f64,
    pub t_max: f64,
    /// N/s
    pub tdot_min: f64,
    pub tdot_max: f64,
    pub tilt_deg: f64,
    /// m²
    pub contact_area: f64,
}

/// A parametric part carrying a jet: its link (frame = mount site), the
/// thruster it holds and the fixed joint placing the jet body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetInterface {
    pub link: usize,
    pub part: Part,
    /// +1 or −1: sign of the lateral offset along the site y axis.
    pub side: f64,
    pub thruster: usize,
    pub jet_joint: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotModel {
    pub name: String,
    pub links: Vec<Link>,
    pub joints: Vec<Joint>,
    pub thrusters: Vec<Thruster>,
    pub interfaces: Vec<JetInterface>,
    /// Signed gravity along e₃ (m/s²); negative with e₃ pointing up.
    pub gravity: f64,
    #[serde(skip)]
    pub(crate) tree: Tree,
}

/// Derived topology, rebuilt by [`RobotModel::finalize`].
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct Tree {
    pub root: usize,
    /// Joint indices ordered parents-first.
    pub order: Vec<usize>,
    /// Degree-of-freedom index of each joint (revolute only).
    pub dof: Vec<Option<usize>>,
    /// Revolute joint indices on the path root → link.
    pub link_path: Vec<Vec<usize>>,
    pub origin_rot: Vec<Matrix3<f64>>,
    pub mass: f64,
}

impl RobotModel {
    /// Validates the model and builds the derived topology.
    pub fn finalize(mut self) -> Result<Self, DynamicsError> {
        let nl = self.links.len();
        if nl == 0 {
            return Err(DynamicsError::Topology("model has no links".into()));
        }
        let mut names = HashMap::new();
        for (i, l) in self.links.iter().enumerate() {
            if names.insert(l.name.as_str(), i).is_some() {
                return Err(DynamicsError::Topology(format!("duplicate link {:?}", l.name)));
            }
            let m = &l.inertial;
            if !(m.mass > 0.0) || !m.com.iter().all(|x| x.is_finite()) || !m.is_physical() {
                return Err(DynamicsError::Inertial(l.name.clone()));
            }
        }
        let mut parent_joint = vec![None; nl];
        for (j, joint) in self.joints.iter().enumerate() {
            if joint.parent >= nl || joint.child >= nl || joint.parent == joint.child {
                return Err(DynamicsError::Topology(format!("joint {:?} has invalid links", joint.name)));
            }
            if parent_joint[joint.child].replace(j).is_some() {
                return Err(DynamicsError::Topology(format!("link {:?} has two parents", self.links[joint.child].name)));
            }
            if joint.kind == JointKind::Revolute {
                if (joint.axis.norm() - 1.0).abs() > 1e-9 {
                    return Err(DynamicsError::Axis(joint.name.clone()));
                }
                if !(joint.lower <= joint.upper) || !(joint.velocity >= 0.0) {
                    return Err(DynamicsError::Limits(joint.name.clone()));
                }
            }
        }
        let roots: Vec<usize> = (0..nl).filter(|&i| parent_joint[i].is_none()).collect();
        if roots.len() != 1 {
            let names: Vec<&str> = roots.iter().map(|&i| self.links[i].name.as_str()).collect();
            return Err(DynamicsError::Topology(format!("expected one root link, found {names:?}")));
        }
        let root = roots[0];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); nl];
        for (j, joint) in self.joints.iter().enumerate() {
            children[joint.parent].push(j);
        }
        let mut order = Vec::with_capacity(self.joints.len());
        let mut link_path = vec![Vec::new(); nl];
        let mut visited = vec![false; nl];
        let mut queue = std::collections::VecDeque::from([root]);
        visited[root] = true;
        while let Some(link) = queue.pop_front() {
            for &j in &children[link] {
                let c = self.joints[j].child;
                if visited[c] {
                    return Err(DynamicsError::Topology("kinematic loop".into()));
                }
                visited[c] = true;
                let mut path = link_path[link].clone();
                if self.joints[j].kind == JointKind::Revolute {
                    path.push(j);
                }
                link_path[c] = path;
                order.push(j);
                queue.push_back(c);
            }
        }
        if visited.iter().any(|v| !v) {
            return Err(DynamicsError::Topology("links unreachable from the root".into()));
        }
        let mut dof = vec![None; self.joints.len()];
        let mut n = 0;
        for (j, joint) in self.joints.iter().enumerate() {
            if joint.kind == JointKind::Revolute {
                dof[j] = Some(n);
                n += 1;
            }
        }
        for t in &self.thrusters {
            if t.parent >= nl {
                return Err(DynamicsError::Topology(format!("thruster {:?} has no parent link", t.name)));
            }
            if (t.axis.norm() - 1.0).abs() > 1e-9 {
                return Err(DynamicsError::Axis(t.name.clone()));
            }
            if !(t.t_min <= t.t_max) || !(t.tdot_min <= t.tdot_max) {
                return Err(DynamicsError::Limits(t.name.clone()));
            }
        }
        for itf in &self.interfaces {
            if itf.link >= nl || itf.thruster >= self.thrusters.len() || itf.jet_joint.is_some_and(|j| j >= self.joints.len()) {
                return Err(DynamicsError::Topology("jet interface references a missing element".into()));
            }
        }
        if self.thrusters.is_empty() {
            return Err(DynamicsError::Topology("model has no thrusters".into()));
        }
        let mass = self.links.iter().map(|l| l.inertial.mass).sum();
        let origin_rot = self.joints.iter().map(|j| j.origin.rotation()).collect();
        self.tree = Tree { root, order, dof, link_path, origin_rot, mass };
        Ok(self)
    }

    /// Number of revolute joints.
    pub fn dofs(&self) -> usize {
        self.tree.dof.iter().flatten().count()
    }

    pub fn thruster_count(&self) -> usize {
        self.thrusters.len()
    }

    pub fn mass(&self) -> f64 {
        self.tree.mass
    }

    pub fn root(&self) -> usize {
        self.tree.root
    }

    /// Revolute joints in DoF order.
    pub fn revolute_joints(&self) -> impl Iterator<Item = &Joint> {
        self.joints.iter().filter(|j| j.kind == JointKind::Revolute)
    }

    /// DoF indices belonging to a group.
    pub fn group_dofs(&self, group: JointGroup) -> Vec<usize> {
        self.revolute_joints().enumerate().filter(|(_, j)| j.group == Some(group)).map(|(i, _)| i).collect()
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.name == name)
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    /// Lower and upper position limits in DoF order.
    pub fn position_limits(&self) -> (Vec<f64>, Vec<f64>) {
        self.revolute_joints().map(|j| (j.lower, j.upper)).unzip()
    }

    /// The shipped reference model.
    pub fn default_model() -> Self {
        super::urdf::parse_urdf(DEFAULT_MODEL).expect("shipped model is valid")
    }
}

/// Shipped URDF-subset model text.
pub const DEFAULT_MODEL: &str = include_str!("../../models/jet_humanoid.urdf");
