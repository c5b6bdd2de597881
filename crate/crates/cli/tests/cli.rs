use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn varexp(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_varexp"));
    cmd.args(args).env_remove("VAREXP_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_manifest(dir: &Path, name: &str, manifest: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_vec_pretty(manifest).unwrap()).unwrap();
    path
}

fn run_cmd(cmd: &str, manifest: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--manifest", manifest.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    varexp(&args, &[])
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {text}"))
}

fn small_grid() -> Value {
    json!({ "dim": 1, "half_width": 8.0, "points": 2048 })
}

fn verify_manifest(suites: &[&str]) -> Value {
    json!({
        "grid": small_grid(),
        "p": { "kind": "bump", "base": 1.5, "peak": 3.0 },
        "q": { "kind": "constant", "value": 2.0 },
        "weight": { "kind": "constant_s", "s": 0.5 },
        "system": { "jmax": 4 },
        "family_size": 6,
        "suites": suites,
        "seed": 3
    })
}

#[test]
fn norm_of_gaussian_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(
        dir.path(),
        "m.json",
        &json!({
            "grid": small_grid(),
            "p": { "kind": "constant", "value": 2 },
            "input": { "kind": "gaussian" },
            "system": { "jmax": 4 },
            "suites": ["lp", "mixed", "space"]
        }),
    );
    let out = dir.path().join("out");
    let o = run_cmd("norm", &m, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out.join("norms.json"));
    let lp = report["norms"].as_array().unwrap().iter().find(|e| e["name"] == "lp").unwrap()["value"].as_f64().unwrap();
    let oracle = (std::f64::consts::PI / 2.0).powf(0.25);
    assert!((lp - oracle).abs() <= 1e-8 * oracle, "{lp} vs {oracle}");
    let csv = fs::read_to_string(out.join("norms.csv")).unwrap();
    assert!(csv.starts_with("name,value,lower,upper,iterations\n"));
    assert_eq!(csv.lines().count(), 1 + 4);
}

#[test]
fn malformed_manifest_exits_2_with_error_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{ \"grid\": { \"half_width\": 8.0 ").unwrap();
    let o = run_cmd("norm", &path, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "manifest");

    let m = write_manifest(dir.path(), "neg.json", &json!({ "grid": small_grid(), "p": { "kind": "constant", "value": -1.0 }, "suites": ["lp"] }));
    let o = run_cmd("norm", &m, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_json(&o)["message"].as_str().unwrap().len() > 0);
}

#[test]
fn empty_suite_list_is_a_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(dir.path(), "m.json", &json!({ "grid": small_grid(), "suites": [] }));
    let out = dir.path().join("out");
    for cmd in ["norm", "verify"] {
        let o = run_cmd(cmd, &m, &out, &[]);
        assert!(o.status.success());
        assert!(!out.exists());
    }
}

#[test]
fn decompose_gaussian_gives_monotone_error_curve() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(
        dir.path(),
        "m.json",
        &json!({
            "grid": { "dim": 1, "half_width": 16.0, "points": 4096 },
            "system": { "k": 2, "l": 2, "sigma": 0.5, "jmax": 4, "m": 6.0 },
            "input": { "kind": "gaussian", "width": 0.4 }
        }),
    );
    let out = dir.path().join("out");
    let o = run_cmd("decompose", &m, &out, &["--plots"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out.join("decomposition.json"));
    assert_eq!(report["monotone"], true);
    let conv = report["convergence"].as_array().unwrap();
    assert_eq!(conv.len(), 5);
    let first = conv[0]["sup_error"].as_f64().unwrap();
    let last = conv[4]["sup_error"].as_f64().unwrap();
    assert!(last < 1e-3 * first, "{first} -> {last}");
    let rows = fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert_eq!(rows.lines().count(), 6);
    assert!(out.join("convergence.svg").exists());

    let fam = varexp::io::read_atom_family(&out.join("atoms")).unwrap();
    let lam = varexp::io::read_coeff_field(&out.join("coefficients.csv"), Some(4)).unwrap();
    assert_eq!(fam.members.len(), lam.len());
    let back = varexp::decomp::synthesize(&lam, &fam, 4, None).unwrap();
    let f = varexp::GridFunction::from_real_fn(*back.grid(), |x| (-x[0] * x[0] / 0.16).exp());
    assert!(((back.sub(&f).unwrap().max_abs() - last).abs()) <= 1e-9);
}

#[test]
fn decompose_zero_input_writes_empty_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(
        dir.path(),
        "m.json",
        &json!({ "grid": small_grid(), "system": { "jmax": 3 }, "input": { "kind": "zero" } }),
    );
    let out = dir.path().join("out");
    let o = run_cmd("decompose", &m, &out, &["--plots"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let coeffs = fs::read_to_string(out.join("coefficients.csv")).unwrap();
    assert_eq!(coeffs.lines().count(), 1);
    assert_eq!(fs::read_to_string(out.join("convergence.csv")).unwrap().lines().count(), 1);
    assert!(read_json(&out.join("atoms/index.json"))["members"].as_array().unwrap().is_empty());
    assert_eq!(read_json(&out.join("decomposition.json"))["coefficients"], 0);
    assert!(!out.join("convergence.svg").exists());
}

#[test]
fn unresolved_grid_names_required_points() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(
        dir.path(),
        "m.json",
        &json!({ "grid": { "dim": 1, "half_width": 8.0, "points": 512 }, "system": { "jmax": 5 } }),
    );
    let o = run_cmd("decompose", &m, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr_json(&o);
    assert!(err["message"].as_str().unwrap().contains("N = 2048"), "{err}");
}

#[test]
fn unit_ball_suite_passes_on_seeded_family() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(dir.path(), "m.json", &verify_manifest(&["unit_ball", "norm_modular", "mixed_unit_ball"]));
    let out = dir.path().join("out");
    let o = run_cmd("verify", &m, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = read_json(&out.join("summary.json"));
    assert_eq!(summary["passed"], true);
    let csv = fs::read_to_string(out.join("unit_ball.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    let mut cases = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        assert_eq!(&rec[4], "true");
        assert_eq!(&rec[5], "unit ball property of the Luxemburg norm");
        cases += 1;
    }
    assert_eq!(cases, 6);
}

#[test]
fn broken_tolerance_fails_with_witnesses() {
    let dir = tempfile::tempdir().unwrap();
    let mut manifest = verify_manifest(&["unit_ball", "atoms"]);
    manifest["tolerance"] = json!(-2.0);
    let m = write_manifest(dir.path(), "m.json", &manifest);
    let out = dir.path().join("out");
    let o = run_cmd("verify", &m, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    let summary = read_json(&out.join("summary.json"));
    assert_eq!(summary["passed"], false);
    let failures = summary["failures"].as_array().unwrap();
    assert!(!failures.is_empty());
    for f in failures {
        assert!(!f["witness"].as_str().unwrap().is_empty());
        assert!(!f["anchor"].as_str().unwrap().is_empty());
    }
    assert!(failures.iter().any(|f| f["suite"] == "atoms" && f["witness"].as_str().unwrap().starts_with("cube j=")));
}

#[test]
fn unknown_suite_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(dir.path(), "m.json", &verify_manifest(&["unit_ball", "no_such_suite"]));
    let out = dir.path().join("out");
    let o = run_cmd("verify", &m, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "unknown_suite");
    assert!(!out.exists());
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e != "svg"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn same_manifest_and_seed_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let all = ["unit_ball", "holder", "mixed_norm_modular", "mixed_embedding", "nikolskii", "sobolev"];
    let m = write_manifest(dir.path(), "m.json", &verify_manifest(&all));
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert!(run_cmd("verify", &m, &a, &["--plots"]).status.success());
    let o = varexp(&["verify", "--manifest", m.to_str().unwrap(), "--out", b.to_str().unwrap()], &[("VAREXP_THREADS", "1")]);
    assert!(o.status.success());
    assert_eq!(files(&a), files(&b));
    assert_eq!(files(&a).len(), all.len() + 1);

    assert!(run_cmd("verify", &m, &c, &["--seed", "99"]).status.success());
    let summary = read_json(&c.join("summary.json"));
    assert_eq!(summary["seed"], 99);
    assert_ne!(files(&a), files(&c));
    let hash = summary["manifest_sha256"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert_eq!(read_json(&a.join("summary.json"))["manifest_sha256"], hash);
}

#[test]
fn thread_cap_must_be_a_positive_integer() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_manifest(dir.path(), "m.json", &verify_manifest(&["unit_ball"]));
    for bad in ["zero", "0"] {
        let o = varexp(&["verify", "--manifest", m.to_str().unwrap()], &[("VAREXP_THREADS", bad)]);
        assert_eq!(o.status.code(), Some(2));
    }
}

#[test]
fn file_inputs_and_output_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let grid = varexp::Grid::new(1, 8.0, 2048).unwrap();
    let f = varexp::GridFunction::from_real_fn(grid, |x| 2.0 * (-x[0] * x[0]).exp());
    varexp::io::write_grid_function(&dir.path().join("f.csv"), &f).unwrap();
    fs::write(dir.path().join("p.csv"), "x,p\n-8,2\n8,2\n").unwrap();
    let m = write_manifest(
        dir.path(),
        "m.json",
        &json!({
            "grid": small_grid(),
            "p": { "kind": "file", "path": "p.csv" },
            "input": { "kind": "file", "path": "f.csv" },
            "system": { "jmax": 4 },
            "suites": ["lp"],
            "output": "reports"
        }),
    );
    let o = varexp(&["norm", "--manifest", m.to_str().unwrap()], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&dir.path().join("reports/norms.json"));
    let lp = report["norms"][0]["value"].as_f64().unwrap();
    let oracle = 2.0 * (std::f64::consts::PI / 2.0).powf(0.25);
    assert!((lp - oracle).abs() <= 1e-8 * oracle);
}
