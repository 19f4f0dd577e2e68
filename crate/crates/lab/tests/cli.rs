use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn minmass(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_minmass"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn minmass")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {:?}", o))
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {:?}", o))
}

fn run_dir(o: &Output) -> PathBuf {
    PathBuf::from(stdout_json(o)["run_dir"].as_str().expect("run_dir"))
}

#[test]
fn ground_reports_the_quintic_soliton() {
    let tmp = tempfile::tempdir().unwrap();
    let o = minmass(tmp.path(), &["ground", "--N", "1", "--sigma", "0.2"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let q0 = stdout_json(&o)["Q0"].as_f64().unwrap();
    assert!((q0 - 1.316074).abs() < 1e-6, "Q0 = {q0}");
    let dir = run_dir(&o);
    for f in ["ground.json", "q.csv", "manifest.json"] {
        assert!(dir.join(f).is_file(), "{f} missing");
    }
    let latest = fs::read_to_string(tmp.path().join("ground/latest")).unwrap();
    assert_eq!(dir.file_name().unwrap().to_str().unwrap(), latest.trim());
}

#[test]
fn validate_needs_a_ground_run() {
    let tmp = tempfile::tempdir().unwrap();
    let o = minmass(tmp.path(), &["validate"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr_json(&o);
    assert_eq!(err["error"], "domain");
    assert!(err["message"].as_str().unwrap().contains("missing ground state"));
}

#[test]
fn validate_passes_after_ground() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(minmass(tmp.path(), &["ground"]).status.code(), Some(0));
    let o = minmass(tmp.path(), &["validate"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(run_dir(&o).join("validate.json")).unwrap()).unwrap();
    assert_eq!(report["failed"].as_array().unwrap().len(), 0);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(minmass(tmp.path(), &["ground", "--bogus", "1"]).status.code(), Some(2));
    assert_eq!(minmass(tmp.path(), &["nonsense"]).status.code(), Some(2));
    assert_eq!(minmass(tmp.path(), &["ground", "--branch", "sideways"]).status.code(), Some(2));
}

#[test]
fn malformed_config_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    for body in ["{\"sigma\": ", "{\"sigmaa\": 0.2}", "{\"sigma\": \"high\"}"] {
        let cfg = tmp.path().join("cfg.json");
        fs::write(&cfg, body).unwrap();
        let o = minmass(tmp.path(), &["ground", "--config", cfg.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{body}");
        assert_eq!(stderr_json(&o)["error"], "usage");
    }
}

#[test]
fn invalid_parameters_are_domain_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let o = minmass(tmp.path(), &["ground", "--N", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["error"], "domain");
    assert!(!tmp.path().join("ground/latest").exists());
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"sigma": 0.1, "grid-n": 4000, "rmax": 24}"#).unwrap();
    let o = minmass(tmp.path(), &["ground", "--config", cfg.to_str().unwrap(), "--sigma", "0.15"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let manifest: Value = serde_json::from_str(&fs::read_to_string(run_dir(&o).join("manifest.json")).unwrap()).unwrap();
    let c = &manifest["config"];
    assert_eq!(c["sigma"].as_f64(), Some(0.15));
    assert_eq!(c["grid-n"].as_u64(), Some(4000));
    assert_eq!(c["rmax"].as_f64(), Some(24.0));
}

#[test]
fn identical_manifests_give_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["profile", "--grid-n", "4000", "--rmax", "24"];
    let (oa, ob) = (minmass(a.path(), &args), minmass(b.path(), &args));
    assert_eq!(oa.status.code(), Some(0), "{oa:?}");
    let (da, db) = (run_dir(&oa), run_dir(&ob));
    assert_eq!(da.file_name(), db.file_name());
    let mut names: Vec<_> = fs::read_dir(&da).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() > 2);
    for name in names.iter().filter(|n| *n != "manifest.json") {
        assert_eq!(fs::read(da.join(name)).unwrap(), fs::read(db.join(name)).unwrap(), "{name:?} differs");
    }
}

#[test]
fn different_seeds_get_different_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["ground", "--grid-n", "4000", "--rmax", "24"];
    let d0 = run_dir(&minmass(tmp.path(), &args));
    let d1 = run_dir(&minmass(tmp.path(), &[&args[..], &["--seed", "7"]].concat()));
    assert_ne!(d0, d1);
}

#[test]
fn floats_carry_seventeen_digits() {
    let tmp = tempfile::tempdir().unwrap();
    let o = minmass(tmp.path(), &["ground", "--grid-n", "4000", "--rmax", "24"]);
    let csv = fs::read_to_string(run_dir(&o).join("q.csv")).unwrap();
    let cell = csv.lines().nth(1).unwrap().split(',').nth(1).unwrap();
    let mantissa = cell.split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17, "{cell}");
}

fn summary_rows(o: &Output) -> Vec<String> {
    let csv = fs::read_to_string(run_dir(o).join("summary.csv")).unwrap();
    csv.lines().map(str::to_string).collect()
}

#[test]
fn empty_sweep_grid_is_an_empty_table() {
    let tmp = tempfile::tempdir().unwrap();
    let o = minmass(tmp.path(), &["sweep", "--sigmas", "", "--C0-over-omega", "1", "--E0s", "1"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    assert_eq!(stdout_json(&o)["cells"], 0);
    assert_eq!(summary_rows(&o).len(), 1);
}

#[test]
fn sweep_collapses_duplicates_and_records_each_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let o = minmass(
        tmp.path(),
        &[
            "sweep", "--sigmas", "0.2,0.2", "--C0-over-omega", "0.5,0.5", "--E0s", "1", "--grid-n", "4000", "--rmax",
            "24", "--max-steps", "20", "--threads", "2",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let rows = summary_rows(&o);
    assert_eq!(rows.len(), 2, "{rows:?}");
    assert!(rows[1].contains("below") && rows[1].contains("bounded"), "{}", rows[1]);
}

#[test]
fn sweep_continues_past_failed_cells() {
    let tmp = tempfile::tempdir().unwrap();
    let o = minmass(
        tmp.path(),
        &[
            "sweep", "--sigmas", "0.2,1.5", "--C0-over-omega", "0.5", "--E0s", "1", "--grid-n", "4000", "--rmax", "24",
            "--max-steps", "20",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    assert_eq!(stdout_json(&o)["failed"], 1);
    let rows = summary_rows(&o);
    assert_eq!(rows.len(), 3);
    assert!(rows[2].contains("failed"));
}
