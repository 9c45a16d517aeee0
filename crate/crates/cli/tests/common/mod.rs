//! Helpers for driving the `treecp` binary.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

pub fn treecp(dir: &Path, threads: usize, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_treecp"))
        .args(args)
        .current_dir(dir)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .env("TREECP_THREADS", threads.to_string())
        .output()
        .expect("failed to launch treecp")
}

/// Runs `args` and asserts success.
pub fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = treecp(dir, 1, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

/// All files under `dir`, keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                files.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    files
}

/// Runs `args` in two fresh directories with 1 and 8 workers and returns
/// whether every output file is byte-identical.
pub fn identical_across_workers(args: &[&str]) -> bool {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = treecp(a.path(), 1, args);
    let rb = treecp(b.path(), 8, args);
    assert!(ra.status.success(), "{args:?}: {}", String::from_utf8_lossy(&ra.stderr));
    assert!(rb.status.success(), "{args:?}: {}", String::from_utf8_lossy(&rb.stderr));
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    !sa.is_empty() && sa == sb
}

/// CSV rows of a file, skipping the `#` header block.
pub fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

pub fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// One invocation per subcommand at desk-scale budgets.
pub const COMMANDS: [&[&str]; 5] = [
    &["simulate", "--d", "2", "--rates", "0.3,0.5", "--horizon", "50", "--runs", "100", "--seed", "7", "--out", "out"],
    &[
        "estimate", "--rates", "0.4,0.6", "--target", "H", "--runs", "300", "--depth", "2", "--seed", "3", "--out",
        "out",
    ],
    &[
        "phase",
        "--directions",
        "1,1;1,2",
        "--runs",
        "200",
        "--depth",
        "2",
        "--tol",
        "0.2",
        "--population-cap",
        "500",
        "--horizon",
        "30",
        "--out",
        "out",
    ],
    &["report", "--rates", "0.5,0.5", "--runs", "200", "--depth", "2", "--out", "out"],
    &["gw", "--rates", "0.6,0.6", "--runs", "30", "--r", "2", "--generations", "3", "--seed", "5", "--out", "out"],
];
