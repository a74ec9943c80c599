//! Helpers shared by the command-line test suites.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

/// A command for the built binary with the alphabet variable scrubbed, so
/// the ambient environment cannot leak into a test.
pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_nestsim"));
    c.env_remove("NESTSIM_DEFAULT_ALPHABET");
    c
}

/// Runs the binary in `dir` with `args` and waits for it.
pub fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("the binary runs")
}

/// The exit code; the binary never dies to a signal in these tests.
pub fn code(out: &Output) -> i32 {
    out.status.code().expect("the binary exits normally")
}

/// The single JSON line printed on standard output.
pub fn verdict(out: &Output) -> serde_json::Value {
    let text = std::str::from_utf8(&out.stdout).expect("stdout is UTF-8");
    let mut lines = text.lines();
    let line = lines.next().expect("a verdict line is printed");
    assert_eq!(lines.next(), None, "exactly one line is printed");
    serde_json::from_str(line).expect("the verdict line is JSON")
}

pub fn stderr_text(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Writes a fixture file and returns its path.
pub fn write_fixture(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, content).expect("fixture written");
    path
}

/// The initial state declared in the header of an `.aut` file.
pub fn aut_root(path: &Path) -> usize {
    let text = std::fs::read_to_string(path).expect("the model file exists");
    let header = text.lines().next().expect("a header line");
    header
        .trim()
        .strip_prefix("des")
        .map(str::trim)
        .and_then(|r| r.strip_prefix('('))
        .and_then(|r| r.split(',').next())
        .and_then(|n| n.trim().parse().ok())
        .expect("a well-formed header")
}
