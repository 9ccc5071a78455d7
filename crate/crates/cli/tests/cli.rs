// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn oqs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oqs")).args(args).env_remove("OQS_OUT_DIR").output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![sub, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    oqs(&args)
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let (header, rows) = read_csv(path);
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

const L1: &str = r#"
kind = "steady-state"
[model]
L = 1
jx = 0.0
jy = 0.0
jz = 0.0
[noise]
kind = "none"
"#;

const SMALL_2X2: &str = r#"
kind = "steady-state"
seed = 3
[model]
L = 2
g = [0.05, 0.15]
[evolution]
tau = 0.05
T = 20.0
delta_ss = 1e-6
initial = "random-product"
[noise]
kind = "depolarizing"
r = [0.0, 0.02]
"#;

#[test]
fn single_decaying_qubit_relaxes_to_all_down() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "l1.toml", L1);
    let out = tmp.path().join("out");
    let o = run("steady-state", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = column(&out.join("steady-state.csv"), "M");
    assert_eq!(m.len(), 1);
    assert!((m[0] + 1.0).abs() < 1e-10, "M = {}", m[0]);
    let records = fs::read_to_string(out.join("records.jsonl")).unwrap();
    let rec: Value = serde_json::from_str(records.lines().next().unwrap()).unwrap();
    assert_eq!(rec["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(rec["status"], "ok");
    assert!((rec["M_exact"].as_f64().unwrap() + 1.0).abs() < 1e-10);
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", SMALL_2X2);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run("run", &cfg, &a, &["--workers", "1"]).status.success());
    assert!(run("run", &cfg, &b, &["--workers", "4"]).status.success());
    for f in ["steady-state.csv", "records.jsonl"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let o = oqs(&["compare", a.to_str().unwrap(), b.to_str().unwrap(), "--json", "--tol", "0"]);
    assert!(o.status.success());
    let rep: Value = serde_json::from_slice(&o.stdout).unwrap();
    for c in rep["columns"].as_array().unwrap() {
        assert_eq!(c["max_abs"].as_f64().unwrap(), 0.0);
        assert_eq!(c["mismatches"].as_u64().unwrap(), 0);
    }
}

#[test]
fn seed_changes_random_initial_state_only_through_dynamics() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", SMALL_2X2);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run("run", &cfg, &a, &[]).status.success());
    assert!(run("run", &cfg, &b, &["--seed", "99"]).status.success());
    let (ma, mb) = (column(&a.join("steady-state.csv"), "M"), column(&b.join("steady-state.csv"), "M"));
    // unique steady state: the initial state only affects convergence noise
    for (x, y) in ma.iter().zip(&mb) {
        assert!((x - y).abs() < 1e-4, "{x} vs {y}");
    }
    let sa: Value = serde_json::from_str(&fs::read_to_string(a.join("steady-state.json")).unwrap()).unwrap();
    let sb: Value = serde_json::from_str(&fs::read_to_string(b.join("steady-state.json")).unwrap()).unwrap();
    assert_eq!(sb["seed"], 99);
    assert_ne!(sa["config_hash"], sb["config_hash"]);
}

#[test]
fn records_alone_regenerate_the_table() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", SMALL_2X2);
    let out = tmp.path().join("o");
    assert!(run("run", &cfg, &out, &[]).status.success());
    let sidecar: Value = serde_json::from_str(&fs::read_to_string(out.join("steady-state.json")).unwrap()).unwrap();
    let names: Vec<&str> = sidecar["columns"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    let (header, rows) = read_csv(&out.join("steady-state.csv"));
    assert_eq!(&header[2..], names.as_slice());
    let records: Vec<Value> = fs::read_to_string(out.join("records.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(records.len(), rows.len());
    for (rec, row) in records.iter().zip(&rows) {
        assert_eq!(rec["point"].to_string(), row[0]);
        assert_eq!(rec["status"].as_str().unwrap(), row[1]);
        for (name, cell) in names.iter().zip(&row[2..]) {
            match &rec[*name] {
                Value::Number(n) => assert_eq!(n.as_f64().unwrap(), cell.parse::<f64>().unwrap(), "{name}"),
                Value::Bool(b) => assert_eq!(b.to_string(), *cell),
                Value::Null => assert!(cell.is_empty()),
                other => assert_eq!(other.as_str().unwrap(), cell),
            }
        }
    }
}

#[test]
fn engine_deviation_from_oracle_is_first_order_in_tau() {
    let tmp = TempDir::new().unwrap();
    let mut devs = Vec::new();
    for tau in ["0.02", "0.01"] {
        let text = format!(
            "kind = \"steady-state\"\n[model]\nL = 2\ng = 0.1\n[evolution]\ntau = {tau}\nT = 200.0\ndelta_ss = 1e-11\n[noise]\nkind = \"none\"\n"
        );
        let cfg = write_config(tmp.path(), &format!("t{tau}.toml"), &text);
        let out = tmp.path().join(format!("t{tau}"));
        assert!(run("steady-state", &cfg, &out, &[]).status.success());
        let csv = out.join("steady-state.csv");
        let o = oqs(&["compare", csv.to_str().unwrap(), csv.to_str().unwrap(), "--map", "M=M_exact", "--json"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let rep: Value = serde_json::from_slice(&o.stdout).unwrap();
        devs.push(rep["columns"][0]["max_abs"].as_f64().unwrap());
    }
    let ratio = devs[0] / devs[1];
    assert!(devs[1] < 5e-3, "deviation {devs:?}");
    assert!((2.0 / 1.5..=2.0 * 1.5).contains(&ratio), "halving ratio {ratio} from {devs:?}");
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", &format!("{L1}[evolution]\ntua = 0.01\n"));
    let o = run("run", &cfg, &tmp.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("tua") && err.contains("line"), "{err}");
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn subcommand_must_match_kind() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "l1.toml", L1);
    let o = run("g-sweep", &cfg, &tmp.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn per_point_failures_are_recorded_with_exit_3() {
    let tmp = TempDir::new().unwrap();
    let text = r#"
kind = "spectroscopy"
[model]
L = 1
g = [0.1]
[evolution]
T = 1.0
[noise]
r0 = 0.01
"#;
    let cfg = write_config(tmp.path(), "short.toml", text);
    let out = tmp.path().join("o");
    let o = run("spectroscopy", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(3));
    let (_, rows) = read_csv(&out.join("spectroscopy.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][1], "failed");
    let sidecar: Value = serde_json::from_str(&fs::read_to_string(out.join("spectroscopy.json")).unwrap()).unwrap();
    assert_eq!(sidecar["failures"].as_array().unwrap().len(), 1);
}

#[test]
fn compare_rejects_different_kinds() {
    let tmp = TempDir::new().unwrap();
    let a = write_config(tmp.path(), "steady-state.csv", "point,status,M\n0,ok,1.0\n");
    let b = write_config(tmp.path(), "r-sweep.csv", "point,status,M\n0,ok,1.0\n");
    let o = oqs(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn meanfield_phase_reports_critical_points() {
    let tmp = TempDir::new().unwrap();
    let text = r#"
kind = "meanfield-phase"
[model]
L = 3
boundary = "periodic"
g = { start = 0.0, stop = 0.2, n = 21 }
[noise]
r = [0.0, 0.01]
"#;
    let cfg = write_config(tmp.path(), "mf.toml", text);
    let out = tmp.path().join("o");
    let o = run("meanfield-phase", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let sidecar: Value = serde_json::from_str(&fs::read_to_string(out.join("meanfield-phase.json")).unwrap()).unwrap();
    let crit: Vec<f64> = sidecar["summary"]["critical_points"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["critical"].as_f64().unwrap())
        .collect();
    assert!((crit[0] - 0.06959).abs() < 1e-4, "{crit:?}");
    assert!(crit[1] > crit[0]);
    assert_eq!(read_csv(&out.join("meanfield-phase.csv")).1.len(), 42);
}
