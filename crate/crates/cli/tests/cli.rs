use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use pucci_lab_cli::output::write_report;
use pucci_lab_cli::run::run_scenario;
use pucci_lab_cli::{parse_scenario, parse_scenario_str, ConfigError, Kind, Status};

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pucci-lab"))
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> =
        fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())).collect();
    v.sort();
    v
}

#[test]
fn shipped_scenarios_parse() {
    let mut count = 0;
    for entry in fs::read_dir(scenarios_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let s = parse_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert_eq!(s.config_digest.len(), 64);
            count += 1;
        }
    }
    assert!(count >= 11);
}

#[test]
fn missing_file_is_a_read_error() {
    assert!(matches!(parse_scenario(Path::new("/nonexistent/x.toml")), Err(ConfigError::Read { .. })));
}

#[test]
fn digest_tracks_config_bytes() {
    let a = parse_scenario_str("name = \"a\"\nkind = \"abp\"\ndimension = 1\n[grid]\nnx = 9\nnt = 10\n").unwrap();
    let b = parse_scenario_str("name = \"a\"\nkind = \"abp\"\ndimension = 1\n\n[grid]\nnx = 9\nnt = 10\n").unwrap();
    assert_ne!(a.config_digest, b.config_digest);
}

#[test]
fn cz_seed_7_is_byte_identical_across_runs() {
    let s = parse_scenario(&scenarios_dir().join("cz_seed7.toml")).unwrap();
    assert_eq!(s.seed, 7);
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let r1 = run_scenario(&s);
    let r2 = run_scenario(&s);
    assert_eq!(r1.status(), Status::Pass, "{:?}", r1.verdict);
    write_report(d1.path(), &r1).unwrap();
    write_report(d2.path(), &r2).unwrap();
    let (a, b) = (read_dir_sorted(d1.path()), read_dir_sorted(d2.path()));
    assert_eq!(a.len(), 2);
    assert_eq!(a, b);
}

#[test]
fn seed_changes_cz_instances() {
    let mut s = parse_scenario(&scenarios_dir().join("cz_seed7.toml")).unwrap();
    let a = run_scenario(&s);
    s.seed = 8;
    let b = run_scenario(&s);
    assert_ne!(a.tables["cz"], b.tables["cz"]);
}

#[test]
fn unit_fixture_has_c0_one() {
    let s = parse_scenario(&scenarios_dir().join("weak_harnack_unit.toml")).unwrap();
    assert_eq!(s.kind, Kind::WeakHarnack);
    let r = run_scenario(&s);
    assert_eq!(r.status(), Status::Pass, "{:?}", r.verdict);
    let wh = &r.reports["weak_harnack"];
    assert_eq!(wh.get("C0"), Some(1.0));
    assert_eq!(wh.get("eps0"), Some(0.5));
}

#[test]
fn convergence_report_has_second_order() {
    let s = parse_scenario(&scenarios_dir().join("convergence_sine.toml")).unwrap();
    let r = run_scenario(&s);
    assert_eq!(r.status(), Status::Pass, "{:?}", r.verdict);
    let order = r.details["observed_order"].as_f64().unwrap();
    assert!(order >= 1.8, "{order}");
}

const PARTITION: &str = r#"
name = "part"
kind = "partition"
dimension = 1
q = 4.0
p = 4.0
[mu]
type = "constant"
value = 1.0
[grid]
nx = 9
nt = 64
"#;

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let pass = write_config(tmp.path(), "pass.toml", PARTITION);
    let config = write_config(tmp.path(), "bad.toml", &PARTITION.replace("q = 4.0", "q = 2.0"));
    let numerical = write_config(tmp.path(), "cfl.toml", &PARTITION.replace("\"part\"", "\"cfl\"").replace("\"partition\"", "\"abp\"").replace("nx = 9", "nx = 65"));

    let code = |args: &[&Path]| bin().arg("run").args(args).arg("--out").arg(&out).status().unwrap().code().unwrap();
    assert_eq!(code(&[&pass]), 0);
    assert_eq!(code(&[&config]), 2);
    assert_eq!(code(&[&numerical]), 3);
    let partial: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("cfl/report.json")).unwrap()).unwrap();
    assert!(partial["error"].as_str().unwrap().contains("CFL"));

    assert_eq!(bin().arg("validate").arg(&pass).status().unwrap().code(), Some(0));
    assert_eq!(bin().arg("validate").arg(&config).status().unwrap().code(), Some(2));
    assert_eq!(bin().arg("report").arg(out.join("part")).status().unwrap().code(), Some(0));
    assert_eq!(bin().arg("report").arg(tmp.path().join("nowhere")).status().unwrap().code(), Some(2));
}

#[test]
fn failing_verdict_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let body = "name = \"strict\"\nkind = \"convergence\"\ndimension = 1\nrefinement_levels = 2\n[thresholds]\nmin_order = 2.5\n[grid]\nnx = 17\nnt = 128\n";
    let cfg = write_config(tmp.path(), "strict.toml", body);
    let status = bin().arg("run").arg(&cfg).arg("--out").arg(tmp.path()).status().unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn env_sets_default_output_and_seed_flag_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "p.toml", PARTITION);
    let out = tmp.path().join("env_out");
    let status = bin().arg("run").arg(&cfg).arg("--seed").arg("42").env("PUCCI_LAB_OUT", &out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("part/report.json")).unwrap()).unwrap();
    assert_eq!(v["seed"], 42);
    assert_eq!(v["schema_version"], 1);
    assert!(v["assumed_constants"]["delta_hat"].is_number());
}

#[test]
fn directory_run_with_jobs_and_refine() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("cfgs");
    fs::create_dir(&dir).unwrap();
    write_config(&dir, "a.toml", PARTITION);
    write_config(&dir, "b.toml", &PARTITION.replace("\"part\"", "\"part2\""));
    let out = tmp.path().join("out");
    let status = bin().arg("run").arg(&dir).arg("--jobs").arg("2").arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("part/report.json").is_file() && out.join("part2/report.json").is_file());

    let status = bin().arg("refine").arg(dir.join("a.toml")).arg("--levels").arg("2").arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("part/report.json")).unwrap()).unwrap();
    assert_eq!(v["reports"]["partition"]["refinement_trace"].as_array().unwrap().len(), 2);
}

#[test]
fn duplicate_names_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path(), "a.toml", PARTITION);
    write_config(tmp.path(), "b.toml", PARTITION);
    let status = bin().arg("run").arg(tmp.path()).arg("--out").arg(tmp.path().join("o")).status().unwrap();
    assert_eq!(status.code(), Some(2));
}
