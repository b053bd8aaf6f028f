use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::OptimizerConfig;
use crate::geometry::{GeometryParams, BOUNDS};
use crate::simulation::FitnessVector;
use crate::structural::SafetyFactor;

/// Violation added for a failed flight, far above any safety-factor shortfall.
pub const QP_PENALTY: f64 = 1e6;

/// Outcome of the evaluation cascade for one design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Absent when the design was gated out or the flight failed.
    pub objectives: Option<FitnessVector>,
    pub sf: SafetyFactor,
    /// False only when a flight was attempted and did not complete.
    pub qp_ok: bool,
    pub simulated: bool,
    pub feasible: bool,
    pub violation: f64,
    pub failure: Option<String>,
}

impl Evaluation {
    /// Design rejected by the structural gate; no flight.
    pub fn gated(sf: SafetyFactor, sf_min: f64, reason: Option<String>) -> Self {
        Self {
            objectives: None,
            sf,
            qp_ok: true,
            simulated: false,
            feasible: false,
            violation: shortfall(sf, sf_min).max(f64::MIN_POSITIVE),
            failure: Some(reason.unwrap_or_else(|| format!("safety factor {:.3} below {sf_min}", sf.value()))),
        }
    }

    /// Design that passed the gate and was flown.
    pub fn flown(sf: SafetyFactor, sf_min: f64, outcome: Result<FitnessVector, String>) -> Self {
        let shortfall = shortfall(sf, sf_min);
        match outcome {
            Ok(f) => Self {
                objectives: Some(f),
                sf,
                qp_ok: true,
                simulated: true,
                feasible: shortfall == 0.0,
                violation: shortfall,
                failure: None,
            },
            Err(cause) => Self {
                objectives: None,
                sf,
                qp_ok: false,
                simulated: true,
                feasible: false,
                violation: shortfall + QP_PENALTY,
                failure: Some(cause),
            },
        }
    }

    /// Feasible design with the given objectives (synthetic evaluators).
    pub fn feasible(objectives: FitnessVector) -> Self {
        Self::flown(SafetyFactor::UNBOUNDED, 0.0, Ok(objectives))
    }
}

fn shortfall(sf: SafetyFactor, sf_min: f64) -> f64 {
    (sf_min - sf.value()).max(0.0)
}

/// A design in a population: its evaluation plus NSGA-II bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub theta: GeometryParams,
    #[serde(flatten)]
    pub eval: Evaluation,
    /// Generation in which the design was first evaluated.
    pub generation: usize,
    pub rank: Option<usize>,
    #[serde(with = "extended")]
    pub crowding: Option<f64>,
}

impl Individual {
    pub fn new(theta: GeometryParams, eval: Evaluation, generation: usize) -> Self {
        Self { theta, eval, generation, rank: None, crowding: None }
    }

    pub fn feasible(&self) -> bool {
        self.eval.feasible
    }

    pub fn objectives(&self) -> Option<[f64; 3]> {
        self.eval.objectives.as_ref().map(FitnessVector::as_array)
    }
}

/// `+∞` is written as the string `"inf"`.
mod extended {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) if x.is_infinite() => s.serialize_some("inf"),
            Some(x) => s.serialize_some(x),
            None => s.serialize_none(),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Option::<Repr>::deserialize(d)? {
            None => Ok(None),
            Some(Repr::Num(x)) => Ok(Some(x)),
            Some(Repr::Text(t)) if t == "inf" => Ok(Some(f64::INFINITY)),
            Some(Repr::Text(t)) => Err(serde::de::Error::custom(format!("bad crowding value {t:?}"))),
        }
    }
}

/// Pareto domination: no worse in every objective, better in one.
pub fn pareto_dominates(a: &[f64; 3], b: &[f64; 3]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
}

/// Deb's constrained domination.
pub fn constrained_dominates(a: &Evaluation, b: &Evaluation) -> bool {
    match (a.feasible, b.feasible) {
        (true, false) => true,
        (false, true) => false,
        (false, false) => a.violation < b.violation,
        (true, true) => match (&a.objectives, &b.objectives) {
            (Some(x), Some(y)) => pareto_dominates(&x.as_array(), &y.as_array()),
            _ => false,
        },
    }
}

/// Fast non-dominated sort. Returns index fronts and writes ranks back.
pub fn non_dominated_sort(pop: &mut [Individual]) -> Vec<Vec<usize>> {
    let n = pop.len();
    let mut dominated: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut count = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            if constrained_dominates(&pop[i].eval, &pop[j].eval) {
                dominated[i].push(j);
                count[j] += 1;
            } else if constrained_dominates(&pop[j].eval, &pop[i].eval) {
                dominated[j].push(i);
                count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            pop[i].rank = Some(fronts.len());
            for &j in &dominated[i] {
                count[j] -= 1;
                if count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each member of `front` (indices into `pop`), in
/// front order. Boundary members get `+∞`; members without objectives get 0.
pub fn crowding_distance(pop: &[Individual], front: &[usize]) -> Vec<f64> {
    let n = front.len();
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let mut dist = vec![0.0; n];
    let scored: Vec<(usize, [f64; 3])> =
        front.iter().enumerate().filter_map(|(k, &i)| pop[i].objectives().map(|o| (k, o))).collect();
    if scored.len() <= 2 {
        for &(k, _) in &scored {
            dist[k] = f64::INFINITY;
        }
        return dist;
    }
    for m in 0..3 {
        let mut order = scored.clone();
        order.sort_by(|a, b| a.1[m].total_cmp(&b.1[m]));
        let (lo, hi) = (order[0].1[m], order[order.len() - 1].1[m]);
        dist[order[0].0] = f64::INFINITY;
        dist[order[order.len() - 1].0] = f64::INFINITY;
        let range = hi - lo;
        if !(range > 0.0) {
            continue;
        }
        for w in order.windows(3) {
            dist[w[1].0] += (w[2].1[m] - w[0].1[m]) / range;
        }
    }
    dist
}

/// Ranks `pop` and assigns crowding distances per front.
pub fn assign_rank_and_crowding(pop: &mut [Individual]) -> Vec<Vec<usize>> {
    let fronts = non_dominated_sort(pop);
    for front in &fronts {
        for (&i, d) in front.iter().zip(crowding_distance(pop, front)) {
            pop[i].crowding = Some(d);
        }
    }
    fronts
}

/// NSGA-II crowded comparison: lower rank, then larger crowding.
pub fn crowded_cmp(a: &Individual, b: &Individual) -> Ordering {
    let rank = |x: &Individual| x.rank.unwrap_or(usize::MAX);
    let crowd = |x: &Individual| x.crowding.unwrap_or(0.0);
    rank(a).cmp(&rank(b)).then_with(|| crowd(b).total_cmp(&crowd(a)))
}

/// Binary tournament on (rank, crowding); ties go to the first draw.
pub fn tournament<'a, R: Rng>(pop: &'a [Individual], rng: &mut R) -> &'a Individual {
    let a = &pop[rng.gen_range(0..pop.len())];
    let b = &pop[rng.gen_range(0..pop.len())];
    if crowded_cmp(b, a) == Ordering::Less {
        b
    } else {
        a
    }
}

fn sbx_pair<R: Rng>(x1: f64, x2: f64, lo: f64, hi: f64, eta: f64, rng: &mut R) -> (f64, f64) {
    if rng.gen::<f64>() > 0.5 || (x1 - x2).abs() <= 1e-14 {
        return (x1, x2);
    }
    let (y1, y2) = if x1 < x2 { (x1, x2) } else { (x2, x1) };
    let u: f64 = rng.gen();
    let betaq = |beta: f64| {
        let alpha = 2.0 - beta.powf(-(eta + 1.0));
        if u <= 1.0 / alpha {
            (u * alpha).powf(1.0 / (eta + 1.0))
        } else {
            (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
        }
    };
    let gap = y2 - y1;
    let c1 = 0.5 * ((y1 + y2) - betaq(1.0 + 2.0 * (y1 - lo) / gap) * gap);
    let c2 = 0.5 * ((y1 + y2) + betaq(1.0 + 2.0 * (hi - y2) / gap) * gap);
    let (c1, c2) = (c1.clamp(lo, hi), c2.clamp(lo, hi));
    if rng.gen::<bool>() {
        (c2, c1)
    } else {
        (c1, c2)
    }
}

/// Simulated binary crossover on the real-relaxed genes.
pub fn sbx<R: Rng>(a: [f64; 4], b: [f64; 4], eta: f64, rng: &mut R) -> ([f64; 4], [f64; 4]) {
    let (mut c1, mut c2) = (a, b);
    for (i, bound) in BOUNDS.iter().enumerate() {
        (c1[i], c2[i]) = sbx_pair(a[i], b[i], bound.min as f64, bound.max as f64, eta, rng);
    }
    (c1, c2)
}

/// Polynomial mutation, each gene with probability `gene_probability`.
pub fn polynomial_mutation<R: Rng>(x: [f64; 4], eta: f64, gene_probability: f64, rng: &mut R) -> [f64; 4] {
    let mut y = x;
    for (i, bound) in BOUNDS.iter().enumerate() {
        if rng.gen::<f64>() >= gene_probability {
            continue;
        }
        let (lo, hi) = (bound.min as f64, bound.max as f64);
        let (d1, d2) = ((y[i] - lo) / (hi - lo), (hi - y[i]) / (hi - lo));
        let u: f64 = rng.gen();
        let pow = 1.0 / (eta + 1.0);
        let dq = if u < 0.5 {
            (2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(eta + 1.0)).powf(pow) - 1.0
        } else {
            1.0 - (2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(eta + 1.0)).powf(pow)
        };
        y[i] = (y[i] + dq * (hi - lo)).clamp(lo, hi);
    }
    y
}

/// `parents.len()` children by tournament, SBX and mutation, snapped to the grid.
pub fn make_offspring<R: Rng>(parents: &[Individual], config: &OptimizerConfig, rng: &mut R) -> Vec<GeometryParams> {
    let n = parents.len();
    let mut children = Vec::with_capacity(n + 1);
    while children.len() < n {
        let a = tournament(parents, rng).theta.as_array().map(f64::from);
        let b = tournament(parents, rng).theta.as_array().map(f64::from);
        let (mut c1, mut c2) =
            if rng.gen::<f64>() < config.crossover_probability { sbx(a, b, config.sbx_eta, rng) } else { (a, b) };
        for c in [&mut c1, &mut c2] {
            if rng.gen::<f64>() < config.mutation_probability {
                *c = polynomial_mutation(*c, config.mutation_eta, config.mutation_gene_probability, rng);
            }
        }
        children.push(GeometryParams::snap(c1));
        children.push(GeometryParams::snap(c2));
    }
    children.truncate(n);
    children
}
