//! End-to-end checks of the command-line binary: artifact round trips,
//! rerun determinism and the exit-code contract.

use std::path::Path;
use std::process::{Command, Output};

fn dirmax(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dirmax"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn net_build_is_byte_identical_across_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let a = dirmax(dir.path(), &["--seed", "5", "net", "--dim", "3", "--delta", "0.3", "--out", "a.tsv"]);
    let b = dirmax(dir.path(), &["--seed", "5", "net", "--dim", "3", "--delta", "0.3", "--out", "b.tsv"]);
    assert!(a.status.success() && b.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let fa = std::fs::read(dir.path().join("a.tsv")).unwrap();
    let fb = std::fs::read(dir.path().join("b.tsv")).unwrap();
    assert_eq!(fa, fb, "same seed must give identical artifacts");
    let c = dirmax(dir.path(), &["--seed", "6", "net", "--dim", "3", "--delta", "0.3", "--out", "c.tsv"]);
    assert!(c.status.success());
    let fc = std::fs::read(dir.path().join("c.tsv")).unwrap();
    assert_ne!(fa, fc, "different seed should move the net");
}

#[test]
fn el_emits_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let net = dirmax(dir.path(), &["net", "--dim", "3", "--delta", "0.35", "--out", "n.tsv"]);
    assert!(net.status.success());
    let csv = dirmax(dir.path(), &["el", "--net", "n.tsv", "--lmax", "3", "--out", "el.csv"]);
    assert!(csv.status.success(), "{}", String::from_utf8_lossy(&csv.stderr));
    let text = std::fs::read_to_string(dir.path().join("el.csv")).unwrap();
    assert!(text.starts_with("l,lower,upper,resolution"));
    assert_eq!(text.lines().count(), 5, "header plus l = 0..=3");

    let json = dirmax(dir.path(), &["--format", "json", "el", "--net", "n.tsv", "--lmax", "3", "--out", "el.json"]);
    assert!(json.status.success());
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("el.json")).unwrap()).unwrap();
    let arr = parsed.as_array().unwrap();
    assert_eq!(arr.len(), 4);
    for b in arr {
        assert!(b["lower"].as_u64().unwrap() <= b["upper"].as_u64().unwrap());
    }
}

#[test]
fn apply_then_maxop_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    assert!(dirmax(dir.path(), &["net", "--dim", "2", "--delta", "0.5", "--out", "n.tsv"]).status.success());
    let apply = dirmax(
        dir.path(),
        &["apply", "--direction", "0,1", "--kind", "hilbert", "--gen", "random",
          "--grid", "16", "--dim", "2", "--out", "h.field"],
    );
    assert!(apply.status.success(), "{}", String::from_utf8_lossy(&apply.stderr));
    let maxop = dirmax(
        dir.path(),
        &["maxop", "--kind", "hilbert", "--net", "n.tsv", "--field", "h.field", "--out", "rep.json"],
    );
    assert!(maxop.status.success(), "{}", String::from_utf8_lossy(&maxop.stderr));
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("rep.json")).unwrap()).unwrap();
    let ratio = rep["l2_ratio"].as_f64().unwrap();
    let n = rep["directions"].as_f64().unwrap();
    assert!(ratio > 0.0 && ratio <= n.sqrt() + 1e-9, "ratio {ratio} over {n} directions");
}

#[test]
fn certify_trace_is_auditable_json() {
    let dir = tempfile::tempdir().unwrap();
    assert!(dirmax(dir.path(), &["net", "--dim", "3", "--delta", "0.2", "--out", "n.tsv"]).status.success());
    let out = dirmax(dir.path(), &["certify", "--kind", "t", "--net", "n.tsv", "--out", "tr.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let tr: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("tr.json")).unwrap()).unwrap();
    assert_eq!(tr["kind"], "T");
    assert!(tr["bound"].as_f64().unwrap() > 1.0);
    assert!(tr["root"]["count"].as_u64().unwrap() > 8);
    assert!(stdout(&out).contains("certify: kind=T"));
}

#[test]
fn experiment_runs_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("exp.cfg"),
        "kind=net-scaling\ndim=3\ndeltas=0.4,0.3,0.2,0.15\nseeds=1\ngrid=16\n",
    )
    .unwrap();
    let out = dirmax(dir.path(), &["experiment", "--config", "exp.cfg"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("kind=net-scaling"));
    assert!(dir.path().join("net-scaling.csv").exists());
    assert!(dir.path().join("net-scaling_fit.json").exists());
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    // 0: clean pass.
    let ok = dirmax(dir.path(), &["selftest"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));

    // 1: tolerance failure (impossible slope target on a valid sweep).
    let tol = dirmax(
        dir.path(),
        &["experiment", "--kind", "net-scaling", "--deltas", "0.4,0.3,0.2,0.15",
          "--seeds", "1", "--target", "9.0", "--tolerance", "0.01"],
    );
    assert_eq!(tol.status.code(), Some(1));

    // 2: config error.
    let cfg = dirmax(dir.path(), &["experiment", "--kind", "no-such-kind"]);
    assert_eq!(cfg.status.code(), Some(2), "{}", String::from_utf8_lossy(&cfg.stderr));
    let cfg2 = dirmax(dir.path(), &["net", "--dim", "1", "--delta", "0.3", "--out", "x.tsv"]);
    assert_eq!(cfg2.status.code(), Some(2));

    // 3: numeric/geometry error (duplicate rows violate the declared
    // separation).
    std::fs::write(
        dir.path().join("bad.tsv"),
        "# dim=3 delta=3.0e-1 eta=inf\n1.0\t0.0\t0.0\n1.0\t0.0\t0.0\n",
    )
    .unwrap();
    let bad = dirmax(dir.path(), &["certify", "--kind", "m", "--net", "bad.tsv", "--out", "t.json"]);
    assert_eq!(bad.status.code(), Some(3), "{}", String::from_utf8_lossy(&bad.stderr));
}
