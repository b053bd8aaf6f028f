use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

use super::{SimLog, SimulationError};

/// Flight objectives: momentum tracking δ_h, joint-velocity tracking δ_ṡ and
/// time-averaged total thrust δ_T (N).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessVector {
    pub delta_h: f64,
    pub delta_sdot: f64,
    pub delta_t: f64,
}

impl FitnessVector {
    pub fn as_array(&self) -> [f64; 3] {
        [self.delta_h, self.delta_sdot, self.delta_t]
    }
}

/// How per-sample errors are aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorAggregation {
    /// |Σᵢ eᵢ|²: errors are summed before taking the norm.
    #[default]
    SumThenNorm,
    /// Σᵢ |eᵢ|²
    SumOfSquaredNorms,
}

fn aggregate(errors: impl Iterator<Item = DVector<f64>>, dim: usize, mode: ErrorAggregation) -> f64 {
    match mode {
        ErrorAggregation::SumThenNorm => errors.fold(DVector::zeros(dim), |acc, e| acc + e).norm_squared(),
        ErrorAggregation::SumOfSquaredNorms => errors.map(|e| e.norm_squared()).sum(),
    }
}

fn v3(v: &Vector3<f64>) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}

fn pick(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

/// δ_h = |Σ l̃|² + |Σ w̃|², δ_ṡ = 2|Σ(ṡ_torso − ṡ_torso^d)|² + |Σ(ṡ_arms − ṡ_arms^d)|²,
/// δ_T = Σ(ΣT_k)/n_t, over every logged sample.
pub fn compute_fitness(log: &SimLog, mode: ErrorAggregation) -> Result<FitnessVector, SimulationError> {
    if let Some(f) = &log.failure {
        return Err(SimulationError::FailedRun(f.to_string()));
    }
    let n_t = log.samples.len();
    if n_t == 0 {
        return Err(SimulationError::FailedRun("empty log".into()));
    }
    let rows = || log.samples.iter();
    let delta_h = aggregate(rows().map(|r| v3(&(r.l - r.l_d))), 3, mode) + aggregate(rows().map(|r| v3(&(r.w - r.w_d))), 3, mode);
    let group = |idx: &[usize]| aggregate(rows().map(|r| pick(&(&r.s_dot - &r.s_dot_d), idx)), idx.len(), mode);
    let delta_sdot = 2.0 * group(&log.torso_dofs) + group(&log.arm_dofs);
    let delta_t = rows().map(|r| r.thrust.sum()).sum::<f64>() / n_t as f64;
    Ok(FitnessVector { delta_h, delta_sdot, delta_t })
}
