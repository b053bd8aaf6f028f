use nalgebra::{DVector, Matrix3, Matrix3xX, Vector3};

use super::model::{JointKind, RobotModel};
use super::so3;

/// World-frame kinematic and centroidal quantities at one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Kinematics {
    pub link_rot: Vec<Matrix3<f64>>,
    pub link_pos: Vec<Vector3<f64>>,
    /// World CoM of each link.
    pub link_com: Vec<Vector3<f64>>,
    /// World inertia of each link about its CoM.
    pub link_inertia: Vec<Matrix3<f64>>,
    /// World axis and anchor of each DoF.
    pub axis: Vec<Vector3<f64>>,
    pub anchor: Vec<Vector3<f64>>,
    pub thruster_pos: Vec<Vector3<f64>>,
    /// a_k: unit world direction of thrust k.
    pub thruster_axis: Vec<Vector3<f64>>,
    /// DoF indices moving thruster k.
    pub thruster_dofs: Vec<Vec<usize>>,
    pub mass: f64,
    /// p_G
    pub com: Vector3<f64>,
    /// Locked centroidal inertia about p_G.
    pub inertia: Matrix3<f64>,
    /// Angular momentum per unit joint velocity, at locked base.
    pub a_s: Matrix3xX<f64>,
    /// CoM velocity per unit joint velocity, at locked base.
    pub j_g: Matrix3xX<f64>,
}

/// Forward kinematics and centroidal maps for base pose (`p_b`, `r_b`) and joint angles `s`.
pub fn forward_kinematics(model: &RobotModel, p_b: &Vector3<f64>, r_b: &Matrix3<f64>, s: &DVector<f64>) -> Kinematics {
    let tree = &model.tree;
    let nl = model.links.len();
    let n = model.dofs();
    debug_assert_eq!(s.len(), n);
    let mut link_rot = vec![Matrix3::identity(); nl];
    let mut link_pos = vec![Vector3::zeros(); nl];
    link_rot[tree.root] = *r_b;
    link_pos[tree.root] = *p_b;
    let mut axis = vec![Vector3::zeros(); n];
    let mut anchor = vec![Vector3::zeros(); n];
    for &j in &tree.order {
        let joint = &model.joints[j];
        let (rp, pp) = (link_rot[joint.parent], link_pos[joint.parent]);
        let r_origin = rp * tree.origin_rot[j];
        let p = pp + rp * joint.origin.xyz;
        link_pos[joint.child] = p;
        link_rot[joint.child] = match (joint.kind, tree.dof[j]) {
            (JointKind::Revolute, Some(d)) => {
                axis[d] = r_origin * joint.axis;
                anchor[d] = p;
                r_origin * so3::exp(&(joint.axis * s[d]))
            }
            _ => r_origin,
        };
    }
    let link_com: Vec<_> = (0..nl).map(|i| link_pos[i] + link_rot[i] * model.links[i].inertial.com).collect();
    let link_inertia: Vec<_> = (0..nl).map(|i| link_rot[i] * model.links[i].inertial.inertia * link_rot[i].transpose()).collect();
    let mass = tree.mass;
    let com = (0..nl).map(|i| link_com[i] * model.links[i].inertial.mass).sum::<Vector3<f64>>() / mass;
    let mut inertia = Matrix3::zeros();
    let mut a_s = Matrix3xX::zeros(n);
    let mut j_g = Matrix3xX::zeros(n);
    for i in 0..nl {
        let m = model.links[i].inertial.mass;
        let r = link_com[i] - com;
        inertia += link_inertia[i] + m * (Matrix3::identity() * r.norm_squared() - r * r.transpose());
        for &j in &tree.link_path[i] {
            let d = tree.dof[j].expect("path holds revolute joints");
            let v = axis[d].cross(&(link_com[i] - anchor[d]));
            j_g.column_mut(d).axpy(m / mass, &v, 1.0);
            let h = link_inertia[i] * axis[d] + m * r.cross(&v);
            a_s.column_mut(d).axpy(1.0, &h, 1.0);
        }
    }
    let dof_path = |link: usize| -> Vec<usize> { tree.link_path[link].iter().filter_map(|&j| tree.dof[j]).collect() };
    let thruster_pos = model.thrusters.iter().map(|t| link_pos[t.parent] + link_rot[t.parent] * t.position).collect();
    let thruster_axis = model.thrusters.iter().map(|t| link_rot[t.parent] * t.axis).collect();
    let thruster_dofs = model.thrusters.iter().map(|t| dof_path(t.parent)).collect();
    Kinematics {
        link_rot,
        link_pos,
        link_com,
        link_inertia,
        axis,
        anchor,
        thruster_pos,
        thruster_axis,
        thruster_dofs,
        mass,
        com,
        inertia,
        a_s,
        j_g,
    }
}

impl Kinematics {
    /// Whether DoF `d` moves thruster `k`.
    pub fn moves_thruster(&self, d: usize, k: usize) -> bool {
        self.thruster_dofs[k].contains(&d)
    }
}
