use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jetdesign::dynamics::load_model;
use jetdesign::geometry::GeometryParams;
use jetdesign_cli::{table2_designs, RunConfig};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_jetdesign"));
    c.env("RUST_LOG", "warn");
    c
}

fn jetdesign(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_config(dir: &Path, json: &str) -> String {
    let p = dir.join("run.json");
    fs::write(&p, json).unwrap();
    p.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn shipped_configs_load() {
    for name in ["default.json", "smoke.json", "acceptance.json"] {
        let cfg = RunConfig::load(&configs().join(name)).unwrap();
        assert!(cfg.optimizer_config().validate().is_ok(), "{name}");
    }
    let acc = RunConfig::load(&configs().join("acceptance.json")).unwrap();
    assert_eq!((acc.optimizer.population_size, acc.optimizer.generations), (12, 15));
    let smoke = RunConfig::load(&configs().join("smoke.json")).unwrap();
    assert_eq!((smoke.optimizer.population_size, smoke.optimizer.generations), (4, 2));
    assert_eq!(RunConfig::load(&configs().join("default.json")).unwrap().optimizer, RunConfig::default().optimizer);
}

#[test]
fn config_parsing_rules() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), r#"{"optimizer": {"population_size": 6}, "bogus": 1}"#);
    assert!(RunConfig::load(Path::new(&p)).is_err());
    let p = write_config(dir.path(), r#"{"designs": [{"name": "a", "angle": 1, "distance": 47, "offset": 88, "length": 50}]}"#);
    let cfg = RunConfig::load(Path::new(&p)).unwrap();
    assert_eq!(cfg.designs[0].params, GeometryParams::new(1, 47, 88, 50));
    let text = serde_json::to_string(&RunConfig::default()).unwrap();
    assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), RunConfig::default());
}

#[test]
fn config_hash_tracks_results_not_locations() {
    let a = RunConfig::default();
    let b = RunConfig { output_dir: "elsewhere".into(), ..RunConfig::default() };
    assert_eq!(a.hash(), b.hash());
    let c = RunConfig { seed: Some(5), ..RunConfig::default() };
    assert_ne!(a.hash(), c.hash());
    assert_eq!(a.hash().len(), 16);
}

#[test]
fn table2_rows() {
    let d = table2_designs();
    assert_eq!(d.len(), 5);
    assert_eq!(d[0].params, GeometryParams::BASELINE);
    assert_eq!(d[3].params, GeometryParams::new(1, 48, 100, 130));
}

#[test]
fn missing_model_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"model": "no_such_robot.urdf"}"#);
    let o = jetdesign(&["optimize", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no_such_robot.urdf"), "{}", stderr(&o));
}

#[test]
fn bad_arguments_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(jetdesign(&["fem-check", "--design", "0,42,80,108", "--out", out]).status.code(), Some(2));
    assert_eq!(jetdesign(&["fem-check", "--design", "15,42", "--out", out]).status.code(), Some(2));
    assert_eq!(jetdesign(&["validate", "--trajectory", "loop", "--out", out]).status.code(), Some(2));
    assert_eq!(jetdesign(&["simulate", "--trajectory", "nowhere", "--out", out]).status.code(), Some(2));
    assert_eq!(jetdesign(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn smoke_optimize_is_reproducible_and_resumable() {
    let dir = tempfile::tempdir().unwrap();
    let smoke = configs().join("smoke.json");
    let smoke = smoke.to_str().unwrap();
    let run = |sub: &str, extra: &[&str]| {
        let out = dir.path().join(sub);
        let mut args = vec!["optimize", "--config", smoke, "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        let o = jetdesign(&args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        out
    };
    let a = run("a", &[]);
    let b = run("b", &[]);
    for f in ["front.jsonl", "archive.jsonl", "archive.csv", "front.csv"] {
        assert!(a.join(f).is_file(), "{f}");
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let archive = a.join("archive.jsonl");
    let c = run("c", &["--resume", archive.to_str().unwrap()]);
    assert_eq!(fs::read(&archive).unwrap(), fs::read(c.join("archive.jsonl")).unwrap());
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(c.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest["counters"]["flights"].as_u64().unwrap() <= 1);
    assert_eq!(manifest["manifest"]["seed"], 0);
    let fresh: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(fresh["counters"]["evaluations"], manifest["counters"]["evaluations"]);
    assert!(fresh["counters"]["evaluations"].as_u64().unwrap() <= 12);

    let d = run("d", &["--seed", "9"]);
    let header = fs::read_to_string(d.join("archive.jsonl")).unwrap();
    assert!(header.lines().next().unwrap().contains("\"seed\":9"));
}

#[test]
fn every_output_starts_with_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(jetdesign(&["fem-check", "--out", out]).status.code(), Some(0));
    assert_eq!(jetdesign(&["export-model", "--out", out]).status.code(), Some(0));
    let mut seen = 0;
    for e in fs::read_dir(dir.path()).unwrap() {
        let p = e.unwrap().path();
        let text = fs::read_to_string(&p).unwrap();
        let ok = match p.extension().and_then(|x| x.to_str()) {
            Some("csv") => text.starts_with("# jetdesign "),
            Some("json") => text.starts_with("{\n  \"manifest\""),
            Some("urdf") => text.lines().nth(1).unwrap().starts_with("<!-- jetdesign "),
            _ => false,
        };
        assert!(ok, "{} lacks a manifest header", p.display());
        assert!(text.contains("seed=0") || text.contains("\"seed\": 0"), "{}", p.display());
        seen += 1;
    }
    assert_eq!(seen, 4);
}

#[test]
fn fem_check_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = jetdesign(&["fem-check", "--design", "15,42,80,108", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fem_check.json")).unwrap()).unwrap();
    assert_eq!(report["feasible"], true);
    assert!(report["sf"].as_f64().unwrap() >= 10.0);
    let stress = fs::read_to_string(dir.path().join("fem_jetpack-bracket.csv")).unwrap();
    assert!(stress.lines().nth(1).unwrap().starts_with("kind,id"));

    let cfg = write_config(dir.path(), r#"{"structural": {"thickness_override": 0.0015}}"#);
    let o = jetdesign(&["fem-check", "--config", &cfg, "--out", out]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn simulate_writes_full_log_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let o = jetdesign(&["simulate", "--trajectory", "traj1", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        fs::read_to_string(out.join("sim_traj1.csv")).unwrap()
    };
    let a = run("a");
    assert_eq!(a.lines().count(), 4200 + 2);
    assert_eq!(a, run("b"));
    let fit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/fitness_traj1.json")).unwrap()).unwrap();
    assert!(fit["fitness"]["delta_t"].as_f64().unwrap() > 0.0);
}

#[test]
fn simulate_reports_qp_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"gains": {"u_max_override": 0.0}}"#);
    let o = jetdesign(&["simulate", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("flight failed"));
    let fit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fitness_envelope.json")).unwrap()).unwrap();
    assert!(fit["failure"].is_string());
}

#[test]
fn export_model_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("optim3.urdf");
    let f = file.to_str().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(jetdesign(&["export-model", "--design", "1,48,100,130", "--file", f, "--out", out]).status.code(), Some(0));
    let first = fs::read(&file).unwrap();
    let model = load_model(&file).unwrap();
    assert_eq!(model.thrusters.len(), 4);
    assert_eq!(jetdesign(&["export-model", "--design", "1,48,100,130", "--file", f, "--out", out]).status.code(), Some(0));
    assert_eq!(first, fs::read(&file).unwrap());
}

#[test]
fn validate_single_cell_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = jetdesign(&["validate", "--design", "15,42,80,108", "--trajectory", "traj3", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("validation.csv")).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].contains("delta_h,delta_sdot,delta_t"));
    assert!(lines[2].starts_with("15-42-80-108,15,42,80,108,traj3,ok,"));
}
