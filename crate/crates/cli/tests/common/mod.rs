#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

pub const BIN: &str = env!("CARGO_BIN_EXE_ergograph");

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Set to regenerate the committed fixtures instead of comparing with them.
pub fn blessing() -> bool {
    std::env::var_os("ERGOGRAPH_BLESS").is_some_and(|v| !v.is_empty())
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn ergograph(args: &[&str]) -> Run {
    let out = Command::new(BIN).args(args).env_remove("ERGOGRAPH_THREADS").output().expect("spawn ergograph");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn read_json(path: &Path) -> Value {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn report<'a>(json: &'a Value, name: &str) -> &'a Value {
    json["reports"]
        .as_array()
        .and_then(|rs| rs.iter().find(|r| r["name"] == name))
        .unwrap_or_else(|| panic!("no report {name} in {json}"))
}

pub fn verdict(r: &Value) -> &str {
    r["verdict"].as_str().unwrap_or("?")
}

pub fn stat(r: &Value, key: &str) -> f64 {
    r["stats"][key].as_f64().unwrap_or(f64::NAN)
}

/// Compares with the fixture, or writes it when blessing.
pub fn check_fixture(name: &str, actual: &[u8]) {
    let path = fixtures().join(name);
    if blessing() {
        fs::write(&path, actual).unwrap();
        return;
    }
    let expected =
        fs::read(&path).unwrap_or_else(|e| panic!("{}: {e} (set ERGOGRAPH_BLESS=1 to create)", path.display()));
    assert!(expected == actual, "{name} differs from the committed fixture");
}
