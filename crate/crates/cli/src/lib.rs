//! Command-line front-end: configuration, one subcommand per pipeline stage
//! and file output with manifest headers.

pub mod config;
pub mod output;

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use jetdesign::dynamics::{apply_design, write_urdf};
use jetdesign::geometry::{GeometryConfig, GeometryParams, Part};
use jetdesign::optimizer::{
    constrained_dominates, evolve_with, Evaluation, Evaluator, EvolveHooks, Individual, OptimizerError, PipelineEvaluator,
    SUMMARY_HEADER,
};
use jetdesign::simulation::{compute_fitness, run_flight, FitnessVector, Trajectory};
use jetdesign::structural::{analyze_part, safety_factor, SafetyFactor};
use rayon::prelude::*;
use serde::Serialize;

pub use config::{table2_designs, NamedDesign, RunConfig};
use output::{read_jsonl_rows, Manifest, OutDir};

#[derive(Parser, Debug, Clone)]
#[command(name = "jetdesign", version, about = "Jet-mount co-design: FEM safety gate, flight simulation and NSGA-II")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON run configuration (built-in defaults when omitted)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Random seed, overriding the config
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for evaluation (all cores by default)
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Output directory, overriding the config
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Co-optimize the jet mounts and write archive, front and manifest
    Optimize {
        /// Reuse evaluations from an earlier archive.jsonl
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Fly designs on the validation trajectories and tabulate fitness
    Validate {
        /// Design as angle,distance,offset,length (repeatable; replaces the config list)
        #[arg(long = "design")]
        designs: Vec<GeometryParams>,
        /// Trajectory name (repeatable; replaces the config list)
        #[arg(long = "trajectory")]
        trajectories: Vec<String>,
    },
    /// Run the structural gate on one design and dump nodal/element results
    FemCheck {
        #[arg(long, default_value = "15,42,80,108")]
        design: GeometryParams,
    },
    /// Fly one design on one trajectory and write the log and fitness
    Simulate {
        #[arg(long, default_value = "15,42,80,108")]
        design: GeometryParams,
        /// Trajectory name (the config's optimization trajectory by default)
        #[arg(long)]
        trajectory: Option<String>,
    },
    /// Write the robot model for one design
    ExportModel {
        #[arg(long, default_value = "15,42,80,108")]
        design: GeometryParams,
        /// Destination file (inside the output directory by default)
        #[arg(long)]
        file: Option<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Optimize { .. } => "optimize",
            Command::Validate { .. } => "validate",
            Command::FemCheck { .. } => "fem-check",
            Command::Simulate { .. } => "simulate",
            Command::ExportModel { .. } => "export-model",
        }
    }
}

/// Domain outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    /// Infeasible design, failed flight or no feasible population.
    Failure,
}

/// Exit code: 0 success, 1 domain failure, 2 usage or configuration error.
pub fn run(cli: &Cli) -> u8 {
    match execute(cli) {
        Ok(Status::Success) => 0,
        Ok(Status::Failure) => 1,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

pub fn execute(cli: &Cli) -> Result<Status> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = Some(s);
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            bail!("--jobs must be at least 1");
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().context("cannot start worker pool")?;
    let out = OutDir::create(&cfg.output_dir, Manifest::new(cli.command.name(), &cfg))?;
    pool.install(|| match &cli.command {
        Command::Optimize { resume } => optimize(&cfg, &out, resume.as_deref()),
        Command::Validate { designs, trajectories } => validate(&cfg, &out, designs, trajectories),
        Command::FemCheck { design } => fem_check(&cfg, &out, design),
        Command::Simulate { design, trajectory } => simulate(&cfg, &out, design, trajectory.as_deref()),
        Command::ExportModel { design, file } => export_model(&cfg, &out, design, file.as_deref()),
    })
}

#[derive(Serialize)]
struct Counters {
    generations: usize,
    evaluations: usize,
    infeasible: usize,
    memo_hits: usize,
    fem_solves: usize,
    flights: usize,
    front_size: usize,
}

#[derive(Serialize)]
struct OptimizeReport<'a> {
    config: &'a RunConfig,
    counters: Option<Counters>,
    baseline: Option<Evaluation>,
    dominating_baseline: Vec<GeometryParams>,
    error: Option<String>,
}

fn write_summary(out: &OutDir, name: &str, rows: &[Individual]) -> Result<PathBuf> {
    out.csv(name, |w| {
        let mut buf = Vec::new();
        jetdesign::optimizer::write_summary_csv(rows, &mut buf)?;
        w.write_all(&buf)
    })
}

pub fn optimize(cfg: &RunConfig, out: &OutDir, resume: Option<&Path>) -> Result<Status> {
    let opt = cfg.optimizer_config();
    opt.validate()?;
    let evaluator = PipelineEvaluator::new(
        cfg.robot()?,
        cfg.geometry,
        cfg.structural.clone(),
        cfg.gains.clone(),
        cfg.flight_trajectory()?,
        cfg.simulation.clone(),
    );
    let prior: HashMap<GeometryParams, Evaluation> = match resume {
        Some(p) => read_jsonl_rows::<Individual>(p)?.into_iter().map(|i| (i.theta, i.eval)).collect(),
        None => HashMap::new(),
    };
    if !prior.is_empty() {
        log::info!("resuming with {} stored evaluations", prior.len());
    }
    let mut partial = out.jsonl_writer("archive.jsonl")?;
    let mut write_error: Option<std::io::Error> = None;
    let hooks = EvolveHooks {
        prior,
        on_evaluated: Box::new(|ind| {
            let res = serde_json::to_writer(&mut partial, ind)
                .map_err(std::io::Error::from)
                .and_then(|_| writeln!(partial))
                .and_then(|_| partial.flush());
            if let Err(e) = res {
                write_error.get_or_insert(e);
            }
        }),
    };
    let result = evolve_with(&opt, &evaluator, hooks);
    drop(partial);
    if let Some(e) = write_error {
        return Err(e).context("cannot append to archive.jsonl");
    }
    let res = match result {
        Ok(r) => r,
        Err(OptimizerError::NoFeasible(diag)) => {
            eprintln!("optimization aborted: {diag}");
            let report =
                OptimizeReport { config: cfg, counters: None, baseline: None, dominating_baseline: vec![], error: Some(diag) };
            out.json("manifest.json", &report)?;
            return Ok(Status::Failure);
        }
        Err(e) => return Err(e.into()),
    };
    out.jsonl("archive.jsonl", &res.archive)?;
    out.jsonl("front.jsonl", &res.front.members)?;
    write_summary(out, "archive.csv", &res.archive)?;
    write_summary(out, "front.csv", &res.front.members)?;

    let baseline = GeometryParams::BASELINE;
    let base_eval = cfg.geometry.shape(&baseline, Part::JetpackBracket).is_ok().then(|| evaluator.evaluate(&baseline));
    let dominating: Vec<GeometryParams> = match &base_eval {
        Some(b) => res.front.members.iter().filter(|m| constrained_dominates(&m.eval, b)).map(|m| m.theta).collect(),
        None => vec![],
    };
    let counters = Counters {
        generations: res.front.generations,
        evaluations: res.front.evaluations,
        infeasible: res.front.infeasible,
        memo_hits: res.front.memo_hits,
        fem_solves: evaluator.gate.solves(),
        flights: evaluator.flights(),
        front_size: res.front.members.len(),
    };
    println!(
        "{} designs evaluated ({} infeasible); front of {}; {} dominate the baseline {}",
        counters.evaluations,
        counters.infeasible,
        counters.front_size,
        dominating.len(),
        baseline
    );
    for m in &res.front.members {
        if let Some([h, s, t]) = m.objectives() {
            println!("  {:<20} δ_h {h:10.4}  δ_ṡ {s:10.4}  δ_T {t:9.3}  SF {:.2}", m.theta.to_string(), m.eval.sf.value());
        }
    }
    let report = OptimizeReport {
        config: cfg,
        counters: Some(counters),
        baseline: base_eval,
        dominating_baseline: dominating,
        error: None,
    };
    out.json("manifest.json", &report)?;
    Ok(Status::Success)
}

/// One cell of the validation table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationRow {
    pub design: String,
    pub theta: GeometryParams,
    pub trajectory: String,
    pub fitness: Option<FitnessVector>,
    pub cause: Option<String>,
}

pub const VALIDATION_HEADER: &str = "design,angle,distance,offset,length,trajectory,status,delta_h,delta_sdot,delta_t,cause";

impl ValidationRow {
    pub fn csv(&self) -> String {
        let t = self.theta;
        let (status, obj) = match &self.fitness {
            Some(f) => ("ok", format!("{:?},{:?},{:?}", f.delta_h, f.delta_sdot, f.delta_t)),
            None => ("failed", ",,".into()),
        };
        let cause = self.cause.as_deref().unwrap_or("").replace([',', '\n'], ";");
        format!("{},{},{},{},{},{},{status},{obj},{cause}", self.design, t.angle, t.distance, t.offset, t.length, self.trajectory)
    }
}

/// Flights for every (design, trajectory) pair; failures become rows.
pub fn validation_table(cfg: &RunConfig, designs: &[NamedDesign], trajectories: &[Trajectory]) -> Result<Vec<ValidationRow>> {
    let robot = cfg.robot()?;
    let geometry = GeometryConfig { strict_grid: false, ..cfg.geometry };
    let models: Vec<_> = designs.iter().map(|d| apply_design(&robot, &d.params, &geometry)).collect();
    let cells: Vec<(usize, usize)> = (0..designs.len()).flat_map(|i| (0..trajectories.len()).map(move |j| (i, j))).collect();
    Ok(cells
        .par_iter()
        .map(|&(i, j)| {
            let (d, traj) = (&designs[i], &trajectories[j]);
            let outcome = match &models[i] {
                Err(e) => Err(e.to_string()),
                Ok(m) => match run_flight(m, &cfg.gains, traj, &cfg.simulation) {
                    Err(e) => Err(e.to_string()),
                    Ok(log) => match &log.failure {
                        Some(f) => Err(f.to_string()),
                        None => compute_fitness(&log, cfg.simulation.aggregation).map_err(|e| e.to_string()),
                    },
                },
            };
            let (fitness, cause) = match outcome {
                Ok(f) => (Some(f), None),
                Err(c) => (None, Some(c)),
            };
            ValidationRow { design: d.name.clone(), theta: d.params, trajectory: traj.spec.name.clone(), fitness, cause }
        })
        .collect())
}

pub fn validate(cfg: &RunConfig, out: &OutDir, designs: &[GeometryParams], names: &[String]) -> Result<Status> {
    let designs: Vec<NamedDesign> = if designs.is_empty() {
        cfg.designs.clone()
    } else {
        designs.iter().map(|p| NamedDesign::new(format!("{}-{}-{}-{}", p.angle, p.distance, p.offset, p.length), *p)).collect()
    };
    let names = if names.is_empty() { &cfg.validation_trajectories } else { names };
    if designs.is_empty() || names.is_empty() {
        bail!("validate needs at least one design and one trajectory");
    }
    let trajectories = names.iter().map(|n| Trajectory::named(n)).collect::<Result<Vec<_>, _>>()?;
    let rows = validation_table(cfg, &designs, &trajectories)?;
    let path = out.csv("validation.csv", |w| {
        writeln!(w, "{VALIDATION_HEADER}")?;
        rows.iter().try_for_each(|r| writeln!(w, "{}", r.csv()))
    })?;
    for r in &rows {
        match (&r.fitness, &r.cause) {
            (Some(f), _) => println!(
                "{:<10} {:<6} δ_h {:10.4}  δ_ṡ {:10.4}  δ_T {:9.3}",
                r.design, r.trajectory, f.delta_h, f.delta_sdot, f.delta_t
            ),
            (None, c) => println!("{:<10} {:<6} failed: {}", r.design, r.trajectory, c.as_deref().unwrap_or("")),
        }
    }
    println!("wrote {}", path.display());
    Ok(if rows.iter().all(|r| r.fitness.is_none()) { Status::Failure } else { Status::Success })
}

#[derive(Serialize)]
struct PartReport {
    part: Part,
    sigma_max: f64,
    safety_factor: SafetyFactor,
    elements: usize,
    nodes: usize,
}

#[derive(Serialize)]
struct FemReport {
    design: GeometryParams,
    parts: Vec<PartReport>,
    sf: SafetyFactor,
    sf_min: f64,
    feasible: bool,
    error: Option<String>,
}

pub fn fem_check(cfg: &RunConfig, out: &OutDir, design: &GeometryParams) -> Result<Status> {
    for part in Part::ALL {
        cfg.geometry.shape(design, part).with_context(|| format!("invalid design {design}"))?;
    }
    let s = &cfg.structural;
    s.material.validate()?;
    let mut parts = Vec::new();
    let mut error = None;
    for part in Part::ALL {
        match analyze_part(design, part, &cfg.geometry, s, s.mesh_edge) {
            Ok((mesh, result)) => {
                let sigma = s.evaluated_stress(&mesh, &result);
                out.csv(&format!("fem_{}.csv", part.name()), |w| jetdesign::structural::write_csv(&mesh, &result, w))?;
                parts.push(PartReport {
                    part,
                    sigma_max: sigma,
                    safety_factor: safety_factor(sigma, &s.material),
                    elements: mesh.elements.len(),
                    nodes: mesh.nodes.len(),
                });
            }
            Err(e) => {
                error = Some(format!("{}: {e}", part.name()));
                break;
            }
        }
    }
    let sf = if error.is_some() {
        SafetyFactor::Finite(0.0)
    } else {
        parts.iter().map(|p| p.safety_factor).fold(SafetyFactor::UNBOUNDED, SafetyFactor::min)
    };
    let feasible = error.is_none() && sf.value() >= s.sf_min;
    for p in &parts {
        println!(
            "{:<16} σ_max {:8.3} MPa  SF {:8.3}  ({} elements)",
            p.part.name(),
            p.sigma_max / 1e6,
            p.safety_factor.value(),
            p.elements
        );
    }
    if let Some(e) = &error {
        println!("analysis failed: {e}");
    }
    println!("{design}: SF {:.3} -> {}", sf.value(), if feasible { "feasible" } else { "infeasible" });
    out.json("fem_check.json", &FemReport { design: *design, parts, sf, sf_min: s.sf_min, feasible, error })?;
    Ok(if feasible { Status::Success } else { Status::Failure })
}

#[derive(Serialize)]
struct SimulateReport {
    design: GeometryParams,
    trajectory: String,
    samples: usize,
    fitness: Option<FitnessVector>,
    failure: Option<String>,
}

pub fn simulate(cfg: &RunConfig, out: &OutDir, design: &GeometryParams, trajectory: Option<&str>) -> Result<Status> {
    let traj = Trajectory::named(trajectory.unwrap_or(&cfg.trajectory))?;
    let model = apply_design(&cfg.robot()?, design, &cfg.geometry).with_context(|| format!("invalid design {design}"))?;
    let log = run_flight(&model, &cfg.gains, &traj, &cfg.simulation)?;
    let name = &traj.spec.name;
    out.csv(&format!("sim_{name}.csv"), |mut w| log.write_csv(&mut w))?;
    let fitness = log.failure.is_none().then(|| compute_fitness(&log, cfg.simulation.aggregation)).transpose()?;
    let failure = log.failure.as_ref().map(|f| f.to_string());
    match (&fitness, &failure) {
        (Some(f), _) => println!("{design} on {name}: δ_h {} δ_ṡ {} δ_T {}", f.delta_h, f.delta_sdot, f.delta_t),
        (None, Some(c)) => println!("{design} on {name}: flight failed: {c}"),
        _ => {}
    }
    let report = SimulateReport { design: *design, trajectory: name.clone(), samples: log.samples.len(), fitness, failure };
    out.json(&format!("fitness_{name}.json"), &report)?;
    Ok(if log.failure.is_none() { Status::Success } else { Status::Failure })
}

pub fn export_model(cfg: &RunConfig, out: &OutDir, design: &GeometryParams, file: Option<&Path>) -> Result<Status> {
    let model = apply_design(&cfg.robot()?, design, &cfg.geometry).with_context(|| format!("invalid design {design}"))?;
    let path = match file {
        Some(f) => f.to_path_buf(),
        None => out.path(&format!("model_{}_{}_{}_{}.urdf", design.angle, design.distance, design.offset, design.length)),
    };
    let written = out.urdf(&path, &write_urdf(&model))?;
    println!("wrote {} (mass {:.4} kg)", written.display(), model.mass());
    Ok(Status::Success)
}

/// Header of the optimizer summary tables.
pub const ARCHIVE_CSV_HEADER: &str = SUMMARY_HEADER;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
