//! Constrained NSGA-II over the design grid.

mod evaluate;
mod nsga;
mod sobol;

use std::collections::{HashMap, HashSet};
use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use evaluate::{Evaluator, PipelineEvaluator};
pub use nsga::{
    assign_rank_and_crowding, constrained_dominates, crowded_cmp, crowding_distance, make_offspring, non_dominated_sort,
    pareto_dominates, polynomial_mutation, sbx, tournament, Evaluation, Individual, QP_PENALTY,
};
pub use sobol::{Sobol, MAX_DIM};

use crate::geometry::{GeometryParams, BOUNDS};

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("invalid optimizer config: {0}")]
    Config(String),
    #[error("no feasible design in the initial population after re-sampling: {0}")]
    NoFeasible(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_probability: f64,
    /// Per-individual chance of mutation.
    pub mutation_probability: f64,
    /// Per-gene chance inside a mutated individual.
    pub mutation_gene_probability: f64,
    pub sbx_eta: f64,
    pub mutation_eta: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            population_size: 25,
            generations: 40,
            crossover_probability: 0.9,
            mutation_probability: 0.25,
            mutation_gene_probability: 0.25,
            sbx_eta: 15.0,
            mutation_eta: 20.0,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        let bad = |m: String| Err(OptimizerError::Config(m));
        if self.population_size < 2 || self.generations < 2 {
            return bad(format!(
                "population_size and generations must be >= 2 (got {}, {})",
                self.population_size, self.generations
            ));
        }
        for (name, p) in [
            ("crossover_probability", self.crossover_probability),
            ("mutation_probability", self.mutation_probability),
            ("mutation_gene_probability", self.mutation_gene_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} outside [0, 1]"));
            }
        }
        for (name, eta) in [("sbx_eta", self.sbx_eta), ("mutation_eta", self.mutation_eta)] {
            if !(eta.is_finite() && eta >= 0.0) {
                return bad(format!("{name} = {eta} must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// Maps a point of the unit cube onto the grid.
pub fn unit_to_params(u: &[f64]) -> GeometryParams {
    let mut v = [0.0; 4];
    for (i, b) in BOUNDS.iter().enumerate() {
        v[i] = b.min as f64 + u[i] * (b.max - b.min) as f64;
    }
    GeometryParams::snap(v)
}

/// The next `n` distinct grid designs from a Sobol stream; the origin is
/// skipped on a fresh stream. Designs in `exclude` are passed over.
pub fn sobol_designs(sobol: &mut Sobol, n: usize, exclude: &HashSet<GeometryParams>) -> Vec<GeometryParams> {
    let mut seen = exclude.clone();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let u = sobol.next_point();
        if u.iter().all(|&x| x == 0.0) {
            continue;
        }
        let p = unit_to_params(&u);
        if seen.insert(p) {
            out.push(p);
        }
    }
    out
}

/// Initial population: the first `population_size` distinct Sobol designs.
pub fn sobol_init(config: &OptimizerConfig) -> Vec<GeometryParams> {
    sobol_designs(&mut Sobol::new(4), config.population_size, &HashSet::new())
}

/// Feasible non-dominated designs among everything evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    pub members: Vec<Individual>,
    pub generations: usize,
    /// Distinct designs evaluated (archive size).
    pub evaluations: usize,
    pub infeasible: usize,
    /// Requests answered from the archive.
    pub memo_hits: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub front: ParetoFront,
    /// Every evaluated design in evaluation order, ranked over the whole archive.
    pub archive: Vec<Individual>,
    pub population: Vec<Individual>,
    /// Survivor designs after each generation (index 0 is the initial population).
    pub history: Vec<Vec<GeometryParams>>,
}

/// Options for [`evolve_with`].
pub struct EvolveHooks<'a> {
    /// Evaluations reused instead of calling the evaluator (resume).
    pub prior: HashMap<GeometryParams, Evaluation>,
    /// Called once per new archive entry, in archive order.
    pub on_evaluated: Box<dyn FnMut(&Individual) + 'a>,
}

impl Default for EvolveHooks<'_> {
    fn default() -> Self {
        Self { prior: HashMap::new(), on_evaluated: Box::new(|_| {}) }
    }
}

struct Archive<'a, E: Evaluator> {
    evaluator: &'a E,
    hooks: EvolveHooks<'a>,
    index: HashMap<GeometryParams, usize>,
    entries: Vec<Individual>,
    memo_hits: usize,
}

impl<E: Evaluator> Archive<'_, E> {
    /// Evaluates what is new in parallel, merging in θ order.
    fn request(&mut self, thetas: &[GeometryParams], generation: usize) -> Vec<Individual> {
        let mut fresh: Vec<GeometryParams> = thetas.iter().filter(|t| !self.index.contains_key(t)).copied().collect();
        fresh.sort_unstable();
        fresh.dedup();
        self.memo_hits += thetas.len() - fresh.len();
        let todo: Vec<GeometryParams> = fresh.iter().filter(|t| !self.hooks.prior.contains_key(t)).copied().collect();
        let done: HashMap<GeometryParams, Evaluation> =
            todo.par_iter().map(|t| (*t, self.evaluator.evaluate(t))).collect::<Vec<_>>().into_iter().collect();
        for t in fresh {
            let eval = done.get(&t).or_else(|| self.hooks.prior.get(&t)).cloned().expect("evaluated");
            let ind = Individual::new(t, eval, generation);
            (self.hooks.on_evaluated)(&ind);
            self.index.insert(t, self.entries.len());
            self.entries.push(ind);
        }
        thetas.iter().map(|t| self.entries[self.index[t]].clone()).collect()
    }
}

fn describe_infeasible(pop: &[Individual]) -> String {
    let mut causes: Vec<(String, usize)> = Vec::new();
    for ind in pop {
        let c = ind.eval.failure.clone().unwrap_or_else(|| "unknown".into());
        let key = c.split(':').next().unwrap_or("").to_string();
        match causes.iter_mut().find(|(k, _)| *k == key) {
            Some(e) => e.1 += 1,
            None => causes.push((key, 1)),
        }
    }
    let best = pop.iter().map(|i| i.eval.sf.value()).fold(0.0, f64::max);
    let list: Vec<String> = causes.iter().map(|(k, n)| format!("{n}x {k}")).collect();
    format!("{} designs, best SF {best:.3}; causes: {}", pop.len(), list.join("; "))
}

/// Rounds of re-drawing before duplicate children are accepted.
pub const DUPLICATE_ROUNDS: usize = 50;

/// Offspring that are new to the archive and distinct from each other,
/// re-drawing duplicates for at most [`DUPLICATE_ROUNDS`] rounds.
pub fn unique_offspring<R: rand::Rng>(
    parents: &[Individual],
    config: &OptimizerConfig,
    rng: &mut R,
    known: impl Fn(&GeometryParams) -> bool,
) -> Vec<GeometryParams> {
    let n = parents.len();
    let mut out = Vec::with_capacity(n);
    let mut taken = HashSet::new();
    let mut spare = Vec::new();
    for _ in 0..DUPLICATE_ROUNDS {
        for c in make_offspring(parents, config, rng) {
            if out.len() < n && !known(&c) && taken.insert(c) {
                out.push(c);
            } else {
                spare.push(c);
            }
        }
        if out.len() == n {
            return out;
        }
    }
    out.extend(spare.into_iter().take(n - out.len()));
    out
}

/// Elitist survival: whole fronts, then the least crowded of the last one.
fn survive(mut combined: Vec<Individual>, n: usize) -> Vec<Individual> {
    let fronts = assign_rank_and_crowding(&mut combined);
    let mut keep = Vec::with_capacity(n);
    for front in fronts {
        if keep.len() + front.len() <= n {
            keep.extend(front);
        } else {
            let mut last = front;
            last.sort_by(|&a, &b| crowded_cmp(&combined[a], &combined[b]));
            keep.extend(last.into_iter().take(n - keep.len()));
        }
        if keep.len() == n {
            break;
        }
    }
    let mut out: Vec<Individual> = keep.into_iter().map(|i| combined[i].clone()).collect();
    assign_rank_and_crowding(&mut out);
    out
}

pub fn evolve<E: Evaluator>(config: &OptimizerConfig, evaluator: &E) -> Result<OptimizationResult, OptimizerError> {
    evolve_with(config, evaluator, EvolveHooks::default())
}

/// NSGA-II with (μ+λ) survival under constrained domination.
pub fn evolve_with<E: Evaluator>(
    config: &OptimizerConfig,
    evaluator: &E,
    hooks: EvolveHooks<'_>,
) -> Result<OptimizationResult, OptimizerError> {
    config.validate()?;
    let n = config.population_size;
    let mut archive = Archive { evaluator, hooks, index: HashMap::new(), entries: Vec::new(), memo_hits: 0 };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut sobol = Sobol::new(4);
    let first = sobol_designs(&mut sobol, n, &HashSet::new());
    let mut pop = archive.request(&first, 0);
    if !pop.iter().any(Individual::feasible) {
        let diag = describe_infeasible(&pop);
        log::warn!("initial population infeasible ({diag}); re-sampling");
        let again = sobol_designs(&mut sobol, n, &first.iter().copied().collect());
        pop = archive.request(&again, 0);
        if !pop.iter().any(Individual::feasible) {
            return Err(OptimizerError::NoFeasible(format!("first draw: {diag}; second draw: {}", describe_infeasible(&pop))));
        }
    }
    assign_rank_and_crowding(&mut pop);
    let mut history = vec![pop.iter().map(|i| i.theta).collect()];

    for g in 1..=config.generations {
        let children = unique_offspring(&pop, config, &mut rng, |t| archive.index.contains_key(t));
        let offspring = archive.request(&children, g);
        let mut seen: HashSet<GeometryParams> = pop.iter().map(|i| i.theta).collect();
        let mut combined = pop;
        combined.extend(offspring.into_iter().filter(|c| seen.insert(c.theta)));
        pop = survive(combined, n);
        history.push(pop.iter().map(|i| i.theta).collect());
        let feasible = pop.iter().filter(|i| i.feasible()).count();
        log::info!("generation {g}: {} evaluated, {feasible}/{n} feasible survivors", archive.entries.len());
    }

    let mut entries = archive.entries;
    assign_rank_and_crowding(&mut entries);
    let members: Vec<Individual> =
        entries.iter().filter(|i| i.rank == Some(0) && i.feasible() && i.eval.objectives.is_some()).cloned().collect();
    let front = ParetoFront {
        members,
        generations: config.generations,
        evaluations: entries.len(),
        infeasible: entries.iter().filter(|i| !i.feasible()).count(),
        memo_hits: archive.memo_hits,
    };
    Ok(OptimizationResult { front, archive: entries, population: pop, history })
}

/// One JSON object per line.
pub fn write_jsonl<W: Write>(individuals: &[Individual], mut out: W) -> io::Result<()> {
    for ind in individuals {
        serde_json::to_writer(&mut out, ind)?;
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_jsonl(text: &str) -> Result<Vec<Individual>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

pub const SUMMARY_HEADER: &str = "angle,distance,offset,length,delta_h,delta_sdot,delta_t,sf,feasible,rank,generation,qp_ok";

/// Flat table for Pareto plots. Missing objectives are empty cells.
pub fn write_summary_csv<W: Write>(individuals: &[Individual], mut out: W) -> io::Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for ind in individuals {
        let t = ind.theta;
        let obj = match ind.objectives() {
            Some([a, b, c]) => format!("{a:?},{b:?},{c:?}"),
            None => ",,".into(),
        };
        let rank = ind.rank.map(|r| r.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{obj},{:?},{},{rank},{},{}",
            t.angle,
            t.distance,
            t.offset,
            t.length,
            ind.eval.sf.value(),
            ind.feasible(),
            ind.generation,
            ind.eval.qp_ok
        )?;
    }
    Ok(())
}
