//! Linear-elastic static analysis of the jet-interface parts and the
//! safety-factor gate.

mod mesh;
mod solver;

use std::collections::HashMap;
use std::fmt;
use std::io::{self, Write};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::geometry::{build_bracket, GeometryConfig, GeometryError, GeometryParams, Part, PartTemplate};

pub use mesh::{generate_mesh, tet_volume, triangle_area, FemMesh};
pub use solver::{
    assemble, conjugate_gradient, elasticity, load_vector, solve_static, strain_matrix, von_mises, CgReport, CsrMatrix,
    StressResult,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StructuralError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("primitive {0} is not a hexahedral block and cannot be meshed")]
    Unmeshable(usize),
    #[error("target edge {target_edge} m exceeds the limit {limit} m (half the smallest block dimension)")]
    TooCoarse { target_edge: f64, limit: f64 },
    #[error("blocks share a face with mismatched parametric orientation")]
    InconsistentInterface,
    #[error("blocks do not form a single conforming body")]
    Disconnected,
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
    #[error("load must be a finite non-negative magnitude with a non-zero direction (got {0})")]
    NegativeLoad(f64),
    #[error("stiffness matrix is singular on the free DoFs")]
    Singular,
    #[error("conjugate gradients did not converge in {iterations} iterations (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    /// Pa
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    /// Pa
    pub yield_strength: f64,
}

impl Material {
    /// 7075-T6 aluminium (Ergal).
    pub const ERGAL: Material = Material { youngs_modulus: 71.7e9, poisson_ratio: 0.33, yield_strength: 462e6 };

    pub fn validate(&self) -> Result<(), StructuralError> {
        if self.youngs_modulus > 0.0 && self.poisson_ratio > 0.0 && self.poisson_ratio < 0.5 && self.yield_strength > 0.0 {
            Ok(())
        } else {
            Err(StructuralError::InvalidMaterial(format!("{self:?}")))
        }
    }
}

impl Default for Material {
    fn default() -> Self {
        Self::ERGAL
    }
}

/// σ_y / σ_max, or `Unbounded` for an unstressed part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SafetyFactor {
    Finite(f64),
    Unbounded(Unbounded),
}

/// Serialized as the string `"unbounded"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unbounded {
    Unbounded,
}

impl SafetyFactor {
    pub const UNBOUNDED: SafetyFactor = SafetyFactor::Unbounded(Unbounded::Unbounded);

    /// Numeric value, `+∞` when unbounded.
    pub fn value(&self) -> f64 {
        match self {
            SafetyFactor::Finite(v) => *v,
            SafetyFactor::Unbounded(_) => f64::INFINITY,
        }
    }

    pub fn is_unbounded(&self) -> bool {
        matches!(self, SafetyFactor::Unbounded(_))
    }

    pub fn min(self, other: SafetyFactor) -> SafetyFactor {
        if other.value() < self.value() {
            other
        } else {
            self
        }
    }
}

impl fmt::Display for SafetyFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SafetyFactor::Finite(v) => write!(f, "{v:.4}"),
            SafetyFactor::Unbounded(_) => f.write_str("unbounded"),
        }
    }
}

pub fn safety_factor(sigma_max: f64, material: &Material) -> SafetyFactor {
    if sigma_max > 0.0 {
        SafetyFactor::Finite(material.yield_strength / sigma_max)
    } else {
        SafetyFactor::UNBOUNDED
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StructuralConfig {
    pub material: Material,
    /// N, applied along the jet axis over the seat face
    pub load: f64,
    /// m, mesh edge used by the gate
    pub mesh_edge: f64,
    /// m, coarse-to-fine resolutions for convergence studies
    pub convergence_edges: Vec<f64>,
    pub sf_min: f64,
    /// Evaluate stress only on elements that do not touch the clamp, where
    /// the fully fixed face produces a mesh-dependent corner singularity.
    pub exclude_clamp_adjacent: bool,
    /// m; replaces the arm and plate thickness of both parts (test hook)
    pub thickness_override: Option<f64>,
}

impl Default for StructuralConfig {
    fn default() -> Self {
        Self {
            material: Material::ERGAL,
            load: 250.0,
            mesh_edge: 0.003,
            convergence_edges: vec![0.002, 0.0015, 0.00125],
            sf_min: 10.0,
            exclude_clamp_adjacent: true,
            thickness_override: None,
        }
    }
}

impl StructuralConfig {
    /// Geometry with the thickness hook applied.
    pub fn effective_geometry(&self, geometry: &GeometryConfig) -> GeometryConfig {
        let mut g = *geometry;
        if let Some(t) = self.thickness_override {
            for part in Part::ALL {
                let tpl: &mut PartTemplate = g.template_mut(part);
                tpl.thickness = t;
                tpl.plate_thickness = t;
            }
        }
        g
    }

    /// Maximum stress over the elements the gate evaluates.
    pub fn evaluated_stress(&self, mesh: &FemMesh, result: &StressResult) -> f64 {
        if self.exclude_clamp_adjacent {
            max_stress_away_from_clamp(mesh, result)
        } else {
            result.sigma_max
        }
    }
}

/// Maximum Von Mises stress over elements with no clamped node.
pub fn max_stress_away_from_clamp(mesh: &FemMesh, result: &StressResult) -> f64 {
    let mut fixed = vec![false; mesh.nodes.len()];
    for &i in &mesh.fixed_nodes {
        fixed[i] = true;
    }
    mesh.elements
        .iter()
        .zip(&result.von_mises)
        .filter(|(el, _)| !el.iter().any(|&n| fixed[n]))
        .map(|(_, &v)| v)
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartAnalysis {
    pub part: Part,
    /// Pa, the stress the gate uses
    pub sigma_max: f64,
    /// Pa, maximum over every element
    pub sigma_max_raw: f64,
    pub safety_factor: SafetyFactor,
    pub elements: usize,
}

/// Builds, meshes and solves one part under the jet load.
pub fn analyze_part(
    params: &GeometryParams,
    part: Part,
    geometry: &GeometryConfig,
    config: &StructuralConfig,
    mesh_edge: f64,
) -> Result<(FemMesh, StressResult), StructuralError> {
    let geometry = config.effective_geometry(geometry);
    let solid = build_bracket(params, part, &geometry)?;
    let mesh = generate_mesh(&solid, mesh_edge)?;
    let axis = PartTemplate::seat_normal(geometry.shape(params, part)?.angle);
    let result = solve_static(&mesh, &config.material, config.load, &axis)?;
    Ok((mesh, result))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateResult {
    /// Minimum over both parts.
    pub sf: SafetyFactor,
    pub feasible: bool,
    pub parts: Vec<PartAnalysis>,
    /// Set when meshing or solving failed; the design is then infeasible.
    pub error: Option<String>,
}

/// Structural gate with a per-solid memo. Offset never changes a solid and
/// each part only reads its driven parameters, so many designs share entries.
#[derive(Debug, Default)]
pub struct StructuralGate {
    pub geometry: GeometryConfig,
    pub config: StructuralConfig,
    cache: Mutex<HashMap<(Part, [u64; 3]), Result<PartAnalysis, String>>>,
    solves: Mutex<usize>,
}

impl StructuralGate {
    pub fn new(geometry: GeometryConfig, config: StructuralConfig) -> Self {
        Self { geometry, config, cache: Mutex::default(), solves: Mutex::default() }
    }

    /// Number of FEM solves actually performed.
    pub fn solves(&self) -> usize {
        *self.solves.lock().unwrap()
    }

    fn part(&self, params: &GeometryParams, part: Part) -> Result<PartAnalysis, String> {
        let geometry = self.config.effective_geometry(&self.geometry);
        let key = (part, geometry.shape(params, part).map_err(|e| e.to_string())?.solid_key());
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return hit.clone();
        }
        let out = analyze_part(params, part, &self.geometry, &self.config, self.config.mesh_edge)
            .map(|(mesh, r)| {
                let sigma = self.config.evaluated_stress(&mesh, &r);
                PartAnalysis {
                    part,
                    sigma_max: sigma,
                    sigma_max_raw: r.sigma_max,
                    safety_factor: safety_factor(sigma, &self.config.material),
                    elements: mesh.elements.len(),
                }
            })
            .map_err(|e| e.to_string());
        *self.solves.lock().unwrap() += 1;
        self.cache.lock().unwrap().insert(key, out.clone());
        out
    }

    /// Minimum safety factor over both parts and `feasible = SF ≥ sf_min`.
    pub fn evaluate(&self, params: &GeometryParams) -> GateResult {
        if let Err(v) = params.validate() {
            let e = GeometryError::InvalidParams(v);
            return GateResult { sf: SafetyFactor::Finite(0.0), feasible: false, parts: vec![], error: Some(e.to_string()) };
        }
        let mut parts = Vec::new();
        for part in Part::ALL {
            match self.part(params, part) {
                Ok(a) => parts.push(a),
                Err(e) => {
                    log::warn!("structural gate failed for {params} ({}): {e}", part.name());
                    return GateResult {
                        sf: SafetyFactor::Finite(0.0),
                        feasible: false,
                        parts,
                        error: Some(format!("{}: {e}", part.name())),
                    };
                }
            }
        }
        let sf = parts.iter().map(|p| p.safety_factor).fold(SafetyFactor::UNBOUNDED, SafetyFactor::min);
        GateResult { sf, feasible: sf.value() >= self.config.sf_min, parts, error: None }
    }
}

/// One-shot gate without memoization.
pub fn structural_gate(params: &GeometryParams, geometry: &GeometryConfig, config: &StructuralConfig) -> GateResult {
    StructuralGate::new(*geometry, config.clone()).evaluate(params)
}

/// Writes node and element tables as CSV: `kind,id,...` rows, with
/// displacements per node and Von Mises stress per element.
pub fn write_csv<W: Write>(mesh: &FemMesh, result: &StressResult, mut out: W) -> io::Result<()> {
    let mut fixed = vec![false; mesh.nodes.len()];
    for &i in &mesh.fixed_nodes {
        fixed[i] = true;
    }
    writeln!(out, "kind,id,x,y,z,ux,uy,uz,fixed")?;
    for (i, (p, u)) in mesh.nodes.iter().zip(&result.displacement).enumerate() {
        writeln!(out, "node,{i},{:e},{:e},{:e},{:e},{:e},{:e},{}", p.x, p.y, p.z, u.x, u.y, u.z, fixed[i] as u8)?;
    }
    writeln!(out, "kind,id,n0,n1,n2,n3,von_mises")?;
    for (i, (el, vm)) in mesh.elements.iter().zip(&result.von_mises).enumerate() {
        writeln!(out, "element,{i},{},{},{},{},{vm:e}", el[0], el[1], el[2], el[3])?;
    }
    Ok(())
}
