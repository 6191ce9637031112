//! Committed fixtures: regenerate with `ERGOGRAPH_BLESS=1 cargo test -p ergograph-cli --test fixtures`.

mod common;

use common::*;
use serde_json::{json, Value};

fn pretty(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).unwrap();
    s.push('\n');
    s.into_bytes()
}

#[test]
fn attractor_image_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = fixtures().join("small.json");
    let run = ergograph(&["--config", cfg.to_str().unwrap(), "--out", out, "attractor"]);
    assert!(run.code == 0 || run.code == 1, "{}", run.stderr);
    let pgm = std::fs::read(dir.path().join("attractor.pgm")).unwrap();
    check_fixture("attractor_small.pgm", &pgm);

    // re-rendering keeps the cells
    let rendered = dir.path().join("again.pgm");
    let run = ergograph(&[
        "--out",
        out,
        "render",
        dir.path().join("attractor.pgm").to_str().unwrap(),
        "--output",
        rendered.to_str().unwrap(),
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let a = ergograph::geometry::GridSet::from_pgm(&pgm).unwrap();
    let b = ergograph::geometry::GridSet::from_pgm(&std::fs::read(rendered).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn lyapunov_estimate_matches_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let run = ergograph(&["--out", dir.path().to_str().unwrap(), "lyapunov"]);
    assert_eq!(run.code, 0, "{}", run.stdout);
    let j = read_json(&dir.path().join("lyapunov.json"));
    let r = report(&j, "lyapunov_top");
    let fx = json!({
        "seed": j["seed"],
        "starts": r["samples"],
        "n": stat(r, "n"),
        "lambda1": j["lambda1"],
        "ci95": j["ci95"],
    });
    check_fixture("lyapunov_default.json", &pretty(&fx));
}

#[test]
fn covering_search_matches_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let run = ergograph(&["--out", dir.path().to_str().unwrap(), "covering"]);
    assert_eq!(run.code, 0, "{}", run.stdout);
    let j = read_json(&dir.path().join("covering.json"));
    let fx = json!({ "seed": j["seed"], "family": j["family"] });
    check_fixture("covering_default.json", &pretty(&fx));
}
