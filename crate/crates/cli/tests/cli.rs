//! End-to-end runs of the `hklab` binary: exit-code contract, worked
//! examples, report round trips and determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hklab::dynamics::{parse_decay_csv, DecaySeries, QuasiInvarianceReport};
use hklab::funcineq::{ConstantEstimate, HarnessReport};
use hklab::markov::parse_kernel_csv;
use hklab::space::io::parse_space_json;
use serde_json::Value;
use tempfile::TempDir;

fn hklab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hklab"))
        .current_dir(dir)
        .env_remove("HKLAB_THREADS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn report(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&o.stdout)))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Two-point space at unit distance plus a few measure files.
fn two_point(dir: &TempDir) {
    let o = hklab(dir.path(), &["gen", "two-point", "--distance", "1", "--out", "two.json"]);
    assert_eq!(code(&o), 0);
    write(dir.path(), "half.csv", "0.5\n0.5\n");
    write(dir.path(), "tilt.csv", "0.75\n0.25\n");
    write(dir.path(), "d0.csv", "1\n0\n");
    write(dir.path(), "d1.csv", "0\n1\n");
}

fn dist(dir: &TempDir, mu0: &str, mu1: &str, extra: &[&str]) -> Output {
    let mut args = vec!["dist", "--space", "two.json", "--mu0", mu0, "--mu1", mu1];
    args.extend_from_slice(extra);
    hklab(dir.path(), &args)
}

#[test]
fn dist_identical_measures_he2_is_zero() {
    let dir = TempDir::new().unwrap();
    two_point(&dir);
    let o = dist(&dir, "half.csv", "half.csv", &["--metric", "he2"]);
    assert_eq!(code(&o), 0);
    assert_eq!(report(&o)["result"]["value"], 0.0);
}

#[test]
fn dist_t0b_two_point_example() {
    let dir = TempDir::new().unwrap();
    two_point(&dir);
    let o = dist(&dir, "half.csv", "tilt.csv", &["--metric", "t0b", "--b", "0.6931471805599453"]);
    assert_eq!(code(&o), 0);
    let r = report(&o);
    assert!((r["result"]["value"].as_f64().unwrap() - 0.3125).abs() < 1e-12);
    assert!((r["result"]["normalized"].as_f64().unwrap() - 1.25f64.ln()).abs() < 1e-11);
    // The rounded literal of ln 2 from the worked example.
    let o = dist(&dir, "half.csv", "tilt.csv", &["--metric", "t0b", "--b", "0.693147"]);
    assert!((report(&o)["result"]["value"].as_f64().unwrap() - 0.3125).abs() < 1e-6);
}

#[test]
fn dist_wab_dirac_closed_form() {
    let dir = TempDir::new().unwrap();
    two_point(&dir);
    let o = dist(&dir, "d0.csv", "d1.csv", &["--metric", "wab", "--a", "0.5", "--b", "2"]);
    assert_eq!(code(&o), 0);
    let v = report(&o)["result"]["value"].as_f64().unwrap();
    let closed = (2.0 - 2.0 * 1f64.cos()) / 2.0;
    assert!((v - closed).abs() < 1e-6 * closed, "{v} vs {closed}");
}

#[test]
fn dist_other_metrics() {
    let dir = TempDir::new().unwrap();
    two_point(&dir);
    let o = dist(&dir, "tilt.csv", "half.csv", &["--metric", "w2"]);
    assert_eq!(code(&o), 0);
    assert!((report(&o)["result"]["value"].as_f64().unwrap() - 0.25).abs() < 1e-12);

    let o = dist(&dir, "tilt.csv", "half.csv", &["--metric", "hk"]);
    assert_eq!(code(&o), 0);
    assert_eq!(report(&o)["result"]["solver"]["certified"], true);

    let o = dist(&dir, "half.csv", "tilt.csv", &["--metric", "tab", "--a", "1", "--b", "0.6931471805599453"]);
    assert_eq!(code(&o), 0);
    let r = &report(&o)["result"];
    let (lo, hi) = (r["lower"].as_f64().unwrap(), r["upper"].as_f64().unwrap());
    assert!(0.25 <= lo && lo <= hi, "[{lo}, {hi}]");
    assert_eq!(r["lower_certificate"]["beta0_rule"], "elem-ineq-optimal");
}

#[test]
fn exit_2_on_validation_errors() {
    let dir = TempDir::new().unwrap();
    two_point(&dir);
    write(dir.path(), "heavy.csv", "0.5\n0.6\n");
    write(dir.path(), "three.csv", "0.2\n0.3\n0.5\n");
    write(dir.path(), "text.csv", "0.5\nabc\n");
    write(dir.path(), "broken.json", "{\"points\": [1, 2], \"dist\": [[0, 1], [2, 0]], \"neighbors\": [[1], [0]]}");
    let cases: Vec<Vec<&str>> = vec![
        vec!["dist", "--space", "two.json", "--mu0", "half.csv", "--mu1", "heavy.csv", "--metric", "he2"],
        vec!["dist", "--space", "two.json", "--mu0", "half.csv", "--mu1", "three.csv", "--metric", "he2"],
        vec!["dist", "--space", "two.json", "--mu0", "half.csv", "--mu1", "text.csv", "--metric", "he2"],
        vec!["dist", "--space", "broken.json", "--mu0", "half.csv", "--mu1", "half.csv", "--metric", "he2"],
        vec!["dist", "--space", "missing.json", "--mu0", "half.csv", "--mu1", "half.csv", "--metric", "he2"],
        vec!["dist", "--space", "two.json", "--mu0", "half.csv", "--mu1", "tilt.csv", "--metric", "wab"],
        vec!["dist", "--space", "two.json", "--mu0", "half.csv", "--mu1", "tilt.csv", "--metric", "t0b", "--b", "-1"],
        vec!["dist", "--space", "two.json", "--mu0", "half.csv", "--mu1", "tilt.csv", "--metric", "nope"],
        vec!["dist", "--threads", "0", "--space", "two.json", "--mu0", "half.csv", "--mu1", "tilt.csv", "--metric", "he2"],
    ];
    for args in cases {
        let o = hklab(dir.path(), &args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn exit_3_on_solver_non_convergence() {
    let dir = TempDir::new().unwrap();
    two_point(&dir);
    write(dir.path(), "starved.json", r#"{"sinkhorn_max_iter": 1, "max_newton_nodes": 0}"#);
    for metric in [&["--metric", "hk"][..], &["--metric", "wab", "--a", "0.5", "--b", "2"][..]] {
        let mut extra = metric.to_vec();
        extra.extend_from_slice(&["--let-config", "starved.json"]);
        let o = dist(&dir, "half.csv", "tilt.csv", &extra);
        assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stderr).contains("did not converge"));
    }
    write(dir.path(), "typo.json", r#"{"sinkhorn_max_itr": 1}"#);
    let o = dist(&dir, "half.csv", "tilt.csv", &["--metric", "hk", "--let-config", "typo.json"]);
    assert_eq!(code(&o), 2);
}

/// Heat kernel at t = 0.25 on a coarse lattice plus its space file.
fn heat(dir: &TempDir) {
    let o = hklab(
        dir.path(),
        &["gen", "heat", "--t", "0.25", "--radius", "6", "--spacing", "0.1", "--out", "heat.csv", "--space-out", "grid.json"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn gen_outputs_parse() {
    let dir = TempDir::new().unwrap();
    heat(&dir);
    let space = parse_space_json(&std::fs::read_to_string(dir.path().join("grid.json")).unwrap()).unwrap();
    let k = parse_kernel_csv(&std::fs::read_to_string(dir.path().join("heat.csv")).unwrap()).unwrap();
    assert_eq!(space.n(), 121);
    assert_eq!(k.n(), 121);
    let o = hklab(dir.path(), &["gen", "ou", "--t", "0.5", "--a", "1", "--radius", "3", "--spacing", "0.5"]);
    assert_eq!(parse_kernel_csv(&String::from_utf8(o.stdout).unwrap()).unwrap().n(), 13);
    let o = hklab(dir.path(), &["gen", "cycle", "--n", "12"]);
    assert_eq!(parse_space_json(&String::from_utf8(o.stdout).unwrap()).unwrap().n(), 12);
    let o = hklab(dir.path(), &["gen", "cycle", "--n", "2"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn constants_heat_kernel_and_trivial_kernels() {
    let dir = TempDir::new().unwrap();
    heat(&dir);
    let o = hklab(dir.path(), &["constants", "--space", "grid.json", "--kernel", "heat.csv", "--which", "rpi", "--witness-out", "w.csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&o);
    let est: ConstantEstimate = serde_json::from_value(r["result"]["estimate"].clone()).unwrap();
    let v = est.value.unwrap();
    assert!((v - 2.0).abs() <= 0.2, "rpi {v}");
    assert!(!est.convergence.is_empty());
    // Witness replay and file export.
    assert!((r["result"]["replayed_value"].as_f64().unwrap() - v).abs() < 1e-9 * v);
    let w: Vec<f64> = std::fs::read_to_string(dir.path().join("w.csv")).unwrap().lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(w.len(), 121);
    assert!(dir.path().join("w.csv.manifest.json").exists());

    write(dir.path(), "g3.json", r#"{"coords": [[0], [1], [2]], "metric": "euclidean", "neighbor_radius": 1.5}"#);
    write(dir.path(), "id.csv", "1,0,0\n0,1,0\n0,0,1\n");
    write(dir.path(), "uniform.csv", "0.25,0.5,0.25\n0.25,0.5,0.25\n0.25,0.5,0.25\n");
    let o = hklab(dir.path(), &["constants", "--space", "g3.json", "--kernel", "id.csv", "--which", "rpi"]);
    assert_eq!(code(&o), 0);
    let r = report(&o);
    assert_eq!(r["result"]["absent"], true);
    assert!(r["result"]["estimate"]["value"].is_null());
    let o = hklab(dir.path(), &["constants", "--space", "g3.json", "--kernel", "uniform.csv", "--which", "rpi"]);
    assert_eq!(report(&o)["result"]["estimate"]["value"], 0.0);

    write(dir.path(), "bad.csv", "0.5,0.6,0\n0,1,0\n0,0,1\n");
    let o = hklab(dir.path(), &["constants", "--space", "g3.json", "--kernel", "bad.csv", "--which", "rpi"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn verify_pass_falsify_and_increment() {
    let dir = TempDir::new().unwrap();
    heat(&dir);
    let base = ["verify", "--space", "grid.json", "--kernel", "heat.csv", "--trials", "300", "--dirac-pairs", "20", "--random-pairs", "10"];
    let mut args = base.to_vec();
    args.push("--estimate");
    let o = hklab(dir.path(), &args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&o);
    let reports: Vec<HarnessReport> = serde_json::from_value(r["result"]["reports"].clone()).unwrap();
    assert_eq!(reports.len(), 7);
    assert!(reports.iter().all(|r| r.pass));

    let mut args = base.to_vec();
    args.extend_from_slice(&["--suite", "hkc", "--estimate", "--scale", "0.25"]);
    let o = hklab(dir.path(), &args);
    assert_eq!(code(&o), 1);
    let r = report(&o);
    assert_eq!(r["result"]["pass"], false);
    assert!(r["result"]["reports"][0]["worst_case"].is_object());

    let mut args = base.to_vec();
    args.extend_from_slice(&["--suite", "hkc", "--constant", "0.5"]);
    assert_eq!(code(&hklab(dir.path(), &args)), 1);

    let mut args = base.to_vec();
    args.extend_from_slice(&["--suite", "increment"]);
    assert_eq!(code(&hklab(dir.path(), &args)), 0);

    let mut args = base.to_vec();
    args.extend_from_slice(&["--suite", "whi"]);
    assert_eq!(code(&hklab(dir.path(), &args)), 2, "a constant source is required");

    let mut args = base.to_vec();
    args.extend_from_slice(&["--suite", "whi", "--constant", "1", "--estimate"]);
    assert_eq!(code(&hklab(dir.path(), &args)), 2, "sources are exclusive");
}

#[test]
fn increment_on_random_kernel() {
    let dir = TempDir::new().unwrap();
    let o = hklab(dir.path(), &["gen", "cycle", "--n", "5", "--out", "c5.json"]);
    assert_eq!(code(&o), 0);
    write(
        dir.path(),
        "k.csv",
        "0.1,0.2,0.3,0.4,0\n0,0,1,0,0\n0.2,0.2,0.2,0.2,0.2\n0.5,0,0,0,0.5\n0.05,0.15,0.3,0.25,0.25\n",
    );
    let o = hklab(dir.path(), &["verify", "--space", "c5.json", "--kernel", "k.csv", "--suite", "increment"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

const SMALL_RUN: &str = r#"{"langevin": {"paths": 4000}, "times": [0.25, 0.5, 1]}"#;

#[test]
fn simulate_w2decay_round_trip_and_determinism() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "cfg.json", SMALL_RUN);
    let run = |threads: &str, csv: &str| {
        Command::new(env!("CARGO_BIN_EXE_hklab"))
            .current_dir(dir.path())
            .env("HKLAB_THREADS", threads)
            .args(["simulate", "cfg.json", "--experiment", "w2decay", "--seed", "7", "--csv", csv])
            .output()
            .unwrap()
    };
    let a = run("1", "a.csv");
    let b = run("3", "b.csv");
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    let (ra, rb) = (report(&a), report(&b));
    assert_eq!(ra["result"], rb["result"]);
    assert_eq!(ra["manifest"]["threads"], 1);
    assert_eq!(rb["manifest"]["threads"], 3);
    let csv_a = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read_to_string(dir.path().join("b.csv")).unwrap());

    // The JSON report and the CSV carry the same series.
    let series: DecaySeries = serde_json::from_value(ra["result"].clone()).unwrap();
    let points = parse_decay_csv(&csv_a).unwrap();
    assert_eq!(points.len(), 3);
    for (p, q) in points.iter().zip(&series.points) {
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-11 * x.abs().max(y.abs());
        assert!(close(p.value, q.value) && close(p.envelope, q.envelope) && p.time == q.time);
    }
    // Re-emitting the parsed report gives the same JSON.
    assert_eq!(serde_json::to_value(&series).unwrap(), ra["result"]);

    // Manifest: digests, resolved seed and sidecar.
    let m = &ra["manifest"];
    assert_eq!(m["seed"], 7);
    assert_eq!(m["config"]["resolved"]["langevin"]["seed"], 7);
    let digest = m["inputs"][0]["sha256"].as_str().unwrap();
    assert_eq!(digest.len(), 64);
    let sidecar: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(sidecar["inputs"][0]["sha256"], digest);

    // A different seed changes the numbers.
    let c = hklab(dir.path(), &["simulate", "cfg.json", "--experiment", "w2decay", "--seed", "8"]);
    assert_ne!(report(&c)["result"]["points"], ra["result"]["points"]);
}

#[test]
fn simulate_hedecay_and_falsified_convexity() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "cfg.json", SMALL_RUN);
    let o = hklab(dir.path(), &["simulate", "cfg.json", "--experiment", "hedecay"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    write(dir.path(), "wrong.json", r#"{"langevin": {"paths": 4000, "convexity": 3}}"#);
    let o = hklab(dir.path(), &["simulate", "wrong.json", "--experiment", "w2decay"]);
    assert_eq!(code(&o), 1);
    assert_eq!(report(&o)["result"]["pass"], false);
}

#[test]
fn simulate_quasi_reports_renyi_comparison() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "q.json", r#"{"quasi": {"t": 0.5, "shift": 1, "p_grid": [2]}}"#);
    let o = hklab(dir.path(), &["simulate", "q.json", "--experiment", "quasi", "--report", "q_report.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("q_report.json")).unwrap()).unwrap();
    let r: QuasiInvarianceReport = serde_json::from_value(doc["result"].clone()).unwrap();
    assert_eq!(r.renyi.len(), 1);
    assert!((r.renyi[0].exact - 2f64.exp()).abs() < 1e-9);
    assert!(r.renyi[0].rel_error < 0.01);
    assert!(r.pass);
}

#[test]
fn simulate_config_errors_exit_2_with_field_names() {
    let dir = TempDir::new().unwrap();
    let cases = [
        (r#"{"langevin": {"stpe": 0.01}}"#, "stpe"),
        (r#"{"langevn": {}}"#, "langevn"),
        (r#"{"langevin": {"paths": 10}}"#, "paths"),
        (r#"{"langevin": {"potential": {"quartic": 1}, "paths": 2000}}"#, "reflecting_box"),
        (r#"{"langevin": {"potential": {"user": "x^2/2"}, "paths": 2000}}"#, "gradient_lipschitz"),
        (r#"{"langevin": {"potential": {"user": "x^^2"}, "gradient_lipschitz": 1, "paths": 2000}}"#, "parse"),
        (r#"{"nu0": {"points": [0, 1], "weights": [0.5]}}"#, "weights"),
        (r#"{"quasi": {"t": 0.5, "shift": 1}, "grid": {"radius": 3, "spacing": 0.05}}"#, "grid too small"),
        ("not json", "config"),
    ];
    for (i, (text, needle)) in cases.iter().enumerate() {
        let name = format!("c{i}.json");
        write(dir.path(), &name, text);
        let exp = if text.contains("quasi") { "quasi" } else { "w2decay" };
        let o = hklab(dir.path(), &["simulate", &name, "--experiment", exp]);
        let err = String::from_utf8_lossy(&o.stderr);
        assert_eq!(code(&o), 2, "{text}: {err}");
        assert!(err.contains(needle), "{text}: message '{err}' lacks '{needle}'");
    }
}

#[test]
fn json_numbers_have_at_most_twelve_significant_digits() {
    let dir = TempDir::new().unwrap();
    two_point(&dir);
    let o = dist(&dir, "half.csv", "tilt.csv", &["--metric", "tab", "--a", "0.7", "--b", "1.3"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let doc: Value = serde_json::from_str(&text).unwrap();
    fn walk(v: &Value, out: &mut Vec<f64>) {
        match v {
            Value::Number(n) if n.is_f64() => out.push(n.as_f64().unwrap()),
            Value::Array(a) => a.iter().for_each(|x| walk(x, out)),
            Value::Object(o) => o.values().for_each(|x| walk(x, out)),
            _ => {}
        }
    }
    let mut nums = Vec::new();
    walk(&doc["result"], &mut nums);
    assert!(!nums.is_empty());
    for x in nums {
        let s = format!("{:e}", x);
        let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
        assert!(mantissa.len() <= 12, "{x} has {} digits", mantissa.len());
    }
}
