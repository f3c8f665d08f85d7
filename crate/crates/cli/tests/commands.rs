use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ducharge"));
    c.env_remove("DUCHARGE_MAX_DIM");
    c
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().expect("spawn ducharge")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("bad JSON ({e}): {}", stdout(o)))
}

/// Writes a preset gate file into `dir`.
fn preset(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let mut args = vec!["gate", name];
    args.extend_from_slice(extra);
    let o = run(&args, dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let p = dir.join(format!("{name}.json"));
    std::fs::write(&p, &o.stdout).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_gate_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let fs = preset(d, "fswap", &[]);
    let o = run(&["check-gate", s(&fs)], d);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert_eq!(r["dual_unitary"], true);
    assert!(r["duality_residual"].as_f64().unwrap() < 1e-12);

    let cz = preset(d, "cz", &[]);
    let o = run(&["check-gate", s(&cz)], d);
    assert_eq!(code(&o), 1);
    assert_eq!(json(&o)["unitary"], true);
    assert_eq!(json(&o)["dual_unitary"], false);

    let text = std::fs::read_to_string(&fs).unwrap();
    let cut = d.join("cut.json");
    std::fs::write(&cut, &text[..text.len() / 2]).unwrap();
    assert_eq!(code(&run(&["check-gate", s(&cut)], d)), 2);
    assert_eq!(code(&run(&["check-gate", "missing.json"], d)), 2);
}

#[test]
fn canonical_gate_is_dual_unitary_for_any_coupling() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    for j in ["0.1", "0.785", "2.0"] {
        let g = preset(d, "canonical", &["--j", j]);
        assert_eq!(code(&run(&["check-gate", s(&g)], d)), 0, "J = {j}");
    }
}

fn soliton_count(dir: &Path, name: &str) -> usize {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap();
    v.as_array().unwrap().len()
}

#[test]
fn find_solitons_census() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let fs = preset(d, "fswap", &[]);
    let out = d.to_str().unwrap();

    let o = run(&["--out", out, "find-solitons", s(&fs), "--w", "1"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(soliton_count(d, "solitons_plus_w1.json"), 1);
    let csv = std::fs::read_to_string(d.join("spectrum_plus_w1.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("re,im,abs,width,direction"));
    assert_eq!(lines.count(), 4);

    for dir in ["plus", "minus"] {
        let o = run(&["--out", out, "find-solitons", s(&fs), "--w", "3", "--direction", dir], d);
        assert_eq!(code(&o), 0);
        assert_eq!(soliton_count(d, &format!("solitons_{dir}_w3.json")), 5);
    }

    let rnd = preset(d, "random", &["--j", "0.4"]);
    let o = run(&["--out", out, "find-solitons", s(&rnd), "--w", "3"], d);
    assert_eq!(code(&o), 0);
    assert_eq!(soliton_count(d, "solitons_plus_w3.json"), 0);

    assert_eq!(code(&run(&["find-solitons", s(&fs), "--w", "2"], d)), 2);
    let cz = preset(d, "cz", &[]);
    assert_eq!(code(&run(&["find-solitons", s(&cz), "--w", "1"], d)), 2);
}

#[test]
fn find_solitons_writes_verifiable_charges() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let fs = preset(d, "fswap", &[]);
    let o = run(&["--out", s(d), "find-solitons", s(&fs), "--w", "1", "--L", "4"], d);
    assert_eq!(code(&o), 0);
    let q = d.join("charge_plus_w1_0.json");
    assert!(q.exists(), "{}", stdout(&o));
    let o = run(&["verify-charge", s(&q), s(&fs), "--L", "4"], d);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert_eq!(r["conserved"], true);
    assert_eq!(r["chain_len"], 8);
}

/// Charge file with one single-site operator on each listed site.
fn charge_file(dir: &Path, name: &str, chain_len: usize, sites: &[usize], op: [[[f64; 2]; 2]; 2]) -> PathBuf {
    let terms: Vec<Value> =
        sites.iter().map(|&x| serde_json::json!({ "coeff": [1.0, 0.0], "x": x, "w": 1, "op": op })).collect();
    let body = serde_json::json!({ "chain_len": chain_len, "terms": terms, "provenance": { "kind": "user" } });
    let p = dir.join(name);
    std::fs::write(&p, body.to_string()).unwrap();
    p
}

const Z: [[[f64; 2]; 2]; 2] = [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [-1.0, 0.0]]];

#[test]
fn verify_charge_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let fs = preset(d, "fswap", &[]);

    let even = charge_file(d, "even.json", 8, &[0, 2, 4, 6], Z);
    let o = run(&["verify-charge", s(&even), s(&fs), "--L", "4"], d);
    assert_eq!(code(&o), 0);
    assert!(json(&o)["residual"].as_f64().unwrap() < 1e-12);

    // σz on one site only moves under FSWAP
    let single = charge_file(d, "single.json", 8, &[0], Z);
    let o = run(&["verify-charge", s(&single), s(&fs), "--L", "4"], d);
    assert_eq!(code(&o), 1);
    assert!(json(&o)["residual"].as_f64().unwrap() > 0.5);

    let o = bin()
        .args(["verify-charge", s(&even), s(&fs), "--L", "4"])
        .env("DUCHARGE_MAX_DIM", "16")
        .current_dir(d)
        .output()
        .unwrap();
    assert_eq!(code(&o), 3);

    let big = charge_file(d, "big.json", 40, &[0, 2], Z);
    assert_eq!(code(&run(&["verify-charge", s(&big), s(&fs), "--L", "20"], d)), 3);

    let wrong_len = charge_file(d, "wrong.json", 6, &[0, 2, 4], Z);
    assert_eq!(code(&run(&["verify-charge", s(&wrong_len), s(&fs), "--L", "4"], d)), 2);
}

#[test]
fn theorem1_reports() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let fs = preset(d, "fswap", &[]);
    let o = run(&["theorem1", s(&fs), "--L", "4", "--w-max", "3"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&o);
    assert_eq!(r["oracle_dim"], 12);
    assert_eq!(r["soliton_dim"], 12);
    assert_eq!(r["matched"], true);
    assert_eq!(r["theorem_regime"], false);
    assert!(String::from_utf8_lossy(&o.stderr).contains("note:"));

    let rnd = preset(d, "random", &["--j", "0.3"]);
    let o = run(&["theorem1", s(&rnd), "--L", "4", "--w-max", "3"], d);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert_eq!(r["oracle_dim"], 0);
    assert_eq!(r["soliton_dim"], 0);

    let cz = preset(d, "cz", &[]);
    assert_eq!(code(&run(&["theorem1", s(&cz), "--L", "4", "--w-max", "3"], d)), 2);
}

#[test]
fn scan_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let a = run(&["--seed", "7", "scan", "--count", "2", "--w-max", "1", "--L", "2"], d);
    let b = run(&["--seed", "7", "scan", "--count", "2", "--w-max", "1", "--L", "2"], d);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(stdout(&a), stdout(&b));
    let lines: Vec<String> = stdout(&a).lines().map(str::to_owned).collect();
    assert_eq!(lines[0], "index,seed,j,solitons_plus,solitons_minus,oracle_dim,soliton_charge_dim");
    assert_eq!(lines.len(), 3);
    let row: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(row[1], "7");
    let j: f64 = row[2].parse().unwrap();
    assert!((0.0..std::f64::consts::FRAC_PI_4).contains(&j));

    let c = run(&["--seed", "8", "scan", "--count", "1", "--w-max", "1", "--L", "2"], d);
    assert_ne!(stdout(&c).lines().nth(1), Some(lines[1].as_str()));
    assert_eq!(code(&run(&["scan", "--count", "0"], d)), 2);
}

#[test]
fn pauli_step_moves_majorana() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let fs = preset(d, "fswap", &[]);
    let f0 = d.join("f0.txt");
    std::fs::write(&f0, "# Majorana on site 0\n1 0 0:X tail:0\n").unwrap();
    let o = run(&["pauli-step", s(&f0), s(&fs), "--steps", "3"], d);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "1 0 6:X tail:6");

    let bad = d.join("bad.txt");
    std::fs::write(&bad, "1 0 0:Q\n").unwrap();
    assert_eq!(code(&run(&["pauli-step", s(&bad), s(&fs)], d)), 2);

    let rnd = preset(d, "random", &["--j", "0.3"]);
    assert_eq!(code(&run(&["pauli-step", s(&f0), s(&rnd)], d)), 2);
}

#[test]
fn fswap_demo_passes_and_rejects_bad_gates() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let o = run(&["fswap-demo"], d);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let r = json(&o);
    assert_eq!(r["all_passed"], true);
    assert_eq!(r["soliton_counts"]["plus_w3"], 5);
    assert_eq!(r["soliton_counts"]["minus_w1"], 1);

    let cz = preset(d, "cz", &[]);
    let o = run(&["fswap-demo", "--gate", s(&cz)], d);
    assert_eq!(code(&o), 1);
    assert_eq!(json(&o)["all_passed"], false);

    let garbage = d.join("garbage.json");
    std::fs::write(&garbage, "{\"d\": 2, \"matrix\": [[[1, 0]]]}").unwrap();
    assert_eq!(code(&run(&["fswap-demo", "--gate", s(&garbage)], d)), 2);
    assert_eq!(code(&run(&["fswap-demo", "--w", "4"], d)), 2);
}

#[test]
fn tolerance_is_validated() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&run(&["--tol", "0", "fswap-demo"], tmp.path())), 2);
    assert_eq!(code(&run(&["--tol", "0.5", "fswap-demo"], tmp.path())), 2);
}
