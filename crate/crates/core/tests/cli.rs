use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dualq(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dualq"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn csv_meta(path: &Path) -> (Value, Vec<String>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let meta = serde_json::from_str(lines.next().unwrap().strip_prefix("# ").unwrap()).unwrap();
    (meta, lines.map(str::to_owned).collect())
}

#[test]
fn help_and_version_succeed() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&dualq(&["--help"], d.path())), 0);
    assert_eq!(code(&dualq(&["--version"], d.path())), 0);
    assert_eq!(code(&dualq(&["squeeze", "--help"], d.path())), 0);
}

#[test]
fn usage_errors_exit_one() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&dualq(&["frobnicate"], d.path())), 1);
    assert_eq!(code(&dualq(&["charge", "--points", "many"], d.path())), 1);
    // no charging transition below Q = n
    let o = dualq(&["charge", "--n", "3", "--q", "2"], d.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("error:"));
    assert_eq!(code(&dualq(&["charge", "--g", "1", "--g-n", "1"], d.path())), 1);
}

#[test]
fn flags_override_file_which_overrides_defaults() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("c.toml"), "n = 3\nq = 5\npoints = 9\n").unwrap();
    let o = dualq(&["charge", "--config", "c.toml", "--points", "4", "-o", "out.csv"], d.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (meta, lines) = csv_meta(&d.path().join("out.csv"));
    let cfg = &meta["config"];
    assert_eq!(cfg["points"], 4);
    assert_eq!(cfg["n"], 3);
    assert_eq!(cfg["q"], 5);
    assert_eq!(cfg["omega0"], 1.0);
    assert_eq!(lines.len(), 1 + 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("resolved config:"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("c.toml"), "n = 2\ncolour = \"blue\"\n").unwrap();
    let o = dualq(&["charge", "--config", "c.toml"], d.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
}

#[test]
fn outputs_embed_provenance_and_cutoffs() {
    let d = tempfile::tempdir().unwrap();
    let o = dualq(&["qfi", "--n", "2", "--q", "4", "--g-n", "0.7", "--points", "5", "-o", "q.json"], d.path());
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("q.json")).unwrap()).unwrap();
    assert_eq!(v["meta"]["model"]["g_n"], 0.7);
    assert_eq!(v["meta"]["model"]["provenance"]["source"], "direct");
    assert_eq!(v["meta"]["basis"]["charge"], 4);
    assert!(v["meta"]["leakage"].is_object());
    assert!(v["meta"].get("seed").is_some());
    let records = v["records"].as_array().unwrap();
    assert_eq!(records.len(), 5);
    let r = &records[2];
    assert_eq!(r["qfi_conventional"].as_f64().unwrap(), 4.0 * r["qfi"].as_f64().unwrap());
}

#[test]
fn protocol_records_its_seed() {
    let d = tempfile::tempdir().unwrap();
    let args = ["protocol", "--n", "2", "--phi", "0.3", "--t-s", "1", "--shots", "1000", "--seed", "17", "-o", "p.csv"];
    assert_eq!(code(&dualq(&args, d.path())), 0);
    let (meta, lines) = csv_meta(&d.path().join("p.csv"));
    assert_eq!(meta["seed"], 17);
    assert_eq!(lines.len(), 2);
}

#[test]
fn leakage_exits_two_and_still_writes() {
    let d = tempfile::tempdir().unwrap();
    let args = [
        "squeeze", "--n", "2", "--g-n", "0.5", "--alpha", "3", "--beta", "0", "--cutoff-a", "47", "--cutoff-b", "4",
        "--t-max", "5", "--points", "5", "-o", "sq.csv",
    ];
    let o = dualq(&args, d.path());
    assert_eq!(code(&o), 2);
    let (meta, lines) = csv_meta(&d.path().join("sq.csv"));
    assert_eq!(meta["leakage"]["contaminated"], true);
    assert!(lines.last().unwrap().ends_with(",true"));
}

#[test]
fn empty_sweep_writes_an_empty_manifest() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("s.toml"), "output_dir = \"runs\"\n").unwrap();
    assert_eq!(code(&dualq(&["sweep", "--config", "s.toml"], d.path())), 0);
    let m: Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("runs/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["jobs"].as_array().unwrap().len(), 0);
}

#[test]
fn sweep_grid_writes_one_file_per_combination() {
    let d = tempfile::tempdir().unwrap();
    let spec = r#"
        [[job]]
        command = "charge"
        output = "c_n{n}_q{q}.csv"
        params = { points = 3 }
        grid = { n = [1, 2], q = [2, 4] }
    "#;
    std::fs::write(d.path().join("s.toml"), spec).unwrap();
    let o = dualq(&["sweep", "--config", "s.toml", "--out-dir", "out", "--workers", "2"], d.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["c_n1_q2.csv", "c_n1_q4.csv", "c_n2_q2.csv", "c_n2_q4.csv"] {
        let (meta, _) = csv_meta(&d.path().join("out").join(name));
        assert_eq!(meta["command"], "charge");
    }
    let m: Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("out/manifest.json")).unwrap()).unwrap();
    let jobs = m["jobs"].as_array().unwrap();
    assert_eq!(jobs.len(), 4);
    assert!(jobs.iter().all(|j| j["status"] == "ok"));
}

#[test]
fn sweep_reports_failed_jobs_in_the_manifest() {
    let d = tempfile::tempdir().unwrap();
    let spec = r#"
        [[job]]
        command = "charge"
        output = "c_q{q}.csv"
        params = { n = 3, points = 3 }
        grid = { q = [1, 3] }
    "#;
    std::fs::write(d.path().join("s.toml"), spec).unwrap();
    assert_eq!(code(&dualq(&["sweep", "--config", "s.toml", "--out-dir", "out"], d.path())), 1);
    let m: Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("out/manifest.json")).unwrap()).unwrap();
    let status: Vec<&str> = m["jobs"].as_array().unwrap().iter().map(|j| j["status"].as_str().unwrap()).collect();
    assert_eq!(status, ["error", "ok"]);
}

#[test]
fn sweep_rejects_colliding_outputs() {
    let d = tempfile::tempdir().unwrap();
    let spec = "[[job]]\ncommand = \"charge\"\noutput = \"same.csv\"\ngrid = { n = [1, 2] }\n";
    std::fs::write(d.path().join("s.toml"), spec).unwrap();
    assert_eq!(code(&dualq(&["sweep", "--config", "s.toml"], d.path())), 1);
    assert!(!d.path().join("same.csv").exists());
}
