use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::nsga::Evaluation;
use crate::controller::ControllerGains;
use crate::dynamics::{apply_design, RobotModel};
use crate::geometry::{GeometryConfig, GeometryParams};
use crate::simulation::{compute_fitness, run_flight, SimulationConfig, Trajectory};
use crate::structural::{SafetyFactor, StructuralConfig, StructuralGate};

/// Maps a design to its evaluation. Called from worker threads.
pub trait Evaluator: Sync {
    fn evaluate(&self, theta: &GeometryParams) -> Evaluation;
}

impl<F: Fn(&GeometryParams) -> Evaluation + Sync> Evaluator for F {
    fn evaluate(&self, theta: &GeometryParams) -> Evaluation {
        self(theta)
    }
}

/// Structural gate, then model generation and a closed-loop flight.
#[derive(Debug)]
pub struct PipelineEvaluator {
    pub gate: StructuralGate,
    pub model: RobotModel,
    pub gains: ControllerGains,
    pub trajectory: Trajectory,
    pub simulation: SimulationConfig,
    /// Replaces the FEM safety factor (test hook).
    pub forced_sf: Option<f64>,
    memo: Mutex<HashMap<GeometryParams, Evaluation>>,
    gate_calls: AtomicUsize,
    flights: AtomicUsize,
}

impl PipelineEvaluator {
    pub fn new(
        model: RobotModel,
        geometry: GeometryConfig,
        structural: StructuralConfig,
        gains: ControllerGains,
        trajectory: Trajectory,
        simulation: SimulationConfig,
    ) -> Self {
        Self {
            gate: StructuralGate::new(geometry, structural),
            model,
            gains,
            trajectory,
            simulation,
            forced_sf: None,
            memo: Mutex::default(),
            gate_calls: AtomicUsize::new(0),
            flights: AtomicUsize::new(0),
        }
    }

    /// Default model, geometry, FEM settings and gains on the given trajectory.
    pub fn with_defaults(trajectory: Trajectory) -> Self {
        Self::new(
            RobotModel::default_model(),
            GeometryConfig::default(),
            StructuralConfig::default(),
            ControllerGains::default(),
            trajectory,
            SimulationConfig::default(),
        )
    }

    pub fn gate_calls(&self) -> usize {
        self.gate_calls.load(Ordering::SeqCst)
    }

    pub fn flights(&self) -> usize {
        self.flights.load(Ordering::SeqCst)
    }

    fn run(&self, theta: &GeometryParams) -> Evaluation {
        self.gate_calls.fetch_add(1, Ordering::SeqCst);
        let sf_min = self.gate.config.sf_min;
        let (sf, feasible, reason) = match self.forced_sf {
            Some(v) => (SafetyFactor::Finite(v), v >= sf_min, None),
            None => {
                let g = self.gate.evaluate(theta);
                (g.sf, g.feasible, g.error)
            }
        };
        if !feasible {
            return Evaluation::gated(sf, sf_min, reason);
        }
        self.flights.fetch_add(1, Ordering::SeqCst);
        let outcome = apply_design(&self.model, theta, &self.gate.geometry)
            .map_err(|e| e.to_string())
            .and_then(|m| run_flight(&m, &self.gains, &self.trajectory, &self.simulation).map_err(|e| e.to_string()))
            .and_then(|log| match &log.failure {
                Some(f) => Err(f.to_string()),
                None => compute_fitness(&log, self.simulation.aggregation).map_err(|e| e.to_string()),
            });
        Evaluation::flown(sf, sf_min, outcome)
    }
}

impl Evaluator for PipelineEvaluator {
    fn evaluate(&self, theta: &GeometryParams) -> Evaluation {
        if let Some(hit) = self.memo.lock().unwrap().get(theta) {
            return hit.clone();
        }
        let out = self.run(theta);
        self.memo.lock().unwrap().insert(*theta, out.clone());
        out
    }
}
