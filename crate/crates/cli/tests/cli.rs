mod common;

use common::{csv_rows, identical_across_workers, json, ok, treecp, COMMANDS};

#[test]
fn simulate_writes_snapshots_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), COMMANDS[0]);
    let listed = String::from_utf8(out.stdout).unwrap();
    assert!(listed.contains("simulate_snapshots.csv") && listed.contains("simulate_summary.json"));
    let summary = json(&dir.path().join("out/simulate_summary.json"));
    assert_eq!(summary["summary"]["runs"], 100);
    assert_eq!(summary["summary"]["per_run"].as_array().unwrap().len(), 100);
    assert_eq!(summary["header"]["seed"], 7);
    assert_eq!(summary["header"]["config"]["rates"], serde_json::json!([0.3, 0.5]));
    let rows = csv_rows(&dir.path().join("out/simulate_snapshots.csv"));
    assert_eq!(rows[0].join(","), "run,t,population,r_t,R_t,root_infected,n,N_n");
    assert!(rows.len() > 100);
}

#[test]
fn every_output_starts_with_a_header_block() {
    let dir = tempfile::tempdir().unwrap();
    for args in COMMANDS {
        ok(dir.path(), args);
    }
    for entry in std::fs::read_dir(dir.path().join("out")).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        if path.extension().unwrap() == "csv" {
            assert!(text.starts_with("# treecp "), "{}", path.display());
            for key in ["# command: ", "# seed: ", "# wall_clock_unix: 1700000000", "# config: {"] {
                assert!(text.contains(key), "{} lacks {key}", path.display());
            }
        } else {
            let v: serde_json::Value = serde_json::from_str(&text).unwrap();
            let h = &v["header"];
            assert!(h["version"].is_string() && h["config"].is_object() && h["seed"].is_u64(), "{}", path.display());
            assert_eq!(h["wall_clock_unix"], 1700000000u64);
        }
    }
}

#[test]
fn missing_rates_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = treecp(dir.path(), 1, &["simulate", "--d", "2", "--horizon", "50"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing --rates"));
    assert_eq!(treecp(dir.path(), 1, &["simulate", "--rates", "x"]).status.code(), Some(2));
    assert_eq!(treecp(dir.path(), 1, &["frobnicate"]).status.code(), Some(2));
    assert_eq!(treecp(dir.path(), 1, &["estimate", "--rates", "0.5"]).status.code(), Some(2));
    assert_eq!(treecp(dir.path(), 1, &["simulate", "--d", "3", "--rates", "0.5,0.5"]).status.code(), Some(2));
    assert_eq!(treecp(dir.path(), 1, &["report", "--b", "0.5,0.5", "--alpha", "1.5"]).status.code(), Some(2));
}

#[test]
fn rerun_is_byte_identical() {
    assert!(identical_across_workers(COMMANDS[0]));
}

#[test]
fn theta_without_infection_is_zero_and_flagged() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["estimate", "--d", "2", "--rates", "0", "--target", "theta", "--runs", "50", "--out", "out"]);
    let rows = csv_rows(&dir.path().join("out/estimate_theta.csv"));
    assert!(rows.len() > 1);
    for row in &rows[1..] {
        assert_eq!(row[2], "0");
        assert!(!row[8].is_empty(), "{row:?}");
    }
}

#[test]
fn calibrated_weights_are_symmetric() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["estimate", "--d", "2", "--rates", "0.5", "--target", "b", "--runs", "300", "--out", "out"]);
    let rows = csv_rows(&dir.path().join("out/estimate_b.csv"));
    for rho in ["1", "2"] {
        let value = |letter: &str| {
            rows.iter().find(|r| r[1] == format!("rho={rho};n=3;letter={letter}")).map(|r| r[2].clone()).unwrap()
        };
        assert_eq!(value("a1"), value("a1'"));
        assert_eq!(value("a2"), value("a2'"));
    }
}

#[test]
fn malformed_s_grid_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for grid in ["1,0.5", "0,1", "a,b"] {
        let out = treecp(dir.path(), 1, &["estimate", "--rates", "0.5,0.5", "--target", "profile", "--s-grid", grid]);
        assert_eq!(out.status.code(), Some(2), "{grid}");
    }
    assert!(!dir.path().join("treecp-out").exists());
}

#[test]
fn line_rays_have_a_single_boundary() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "phase",
            "--directions",
            "1",
            "--mode",
            "analytic",
            "--runs",
            "200",
            "--depth",
            "2",
            "--tol",
            "0.1",
            "--out",
            "out",
        ],
    );
    let rows = csv_rows(&dir.path().join("out/phase.csv"));
    assert_eq!(rows[1][1], rows[1][4]);
}

#[test]
fn symmetric_rays_give_symmetric_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "phase",
        "--directions",
        "1,2;2,1",
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
    ];
    ok(dir.path(), &args);
    let rows = csv_rows(&dir.path().join("out/phase.csv"));
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[1][1..], rows[2][1..]);
}

#[test]
fn report_equality_case_and_strong_survival() {
    let dir = tempfile::tempdir().unwrap();
    let b = 1.0 / 3f64.sqrt();
    let arg = format!("{b},{b}");
    ok(dir.path(), &["report", "--b", &arg, "--out", "crit"]);
    let r = &json(&dir.path().join("crit/report.json"))["result"]["report"];
    let (delta, omega) = (r["delta"].as_f64().unwrap(), r["delta_omega"].as_f64().unwrap());
    assert!((delta - 0.5 * omega).abs() < 1e-10);
    assert!(r["backscatter_margin"].as_f64().unwrap() >= -1e-10);
    assert!(r["flags"].as_array().unwrap().iter().any(|f| f == "at_criticality"));

    ok(dir.path(), &["report", "--b", "0.9,0.8", "--out", "strong"]);
    let r = &json(&dir.path().join("strong/report.json"))["result"]["report"];
    assert!(r["flags"].as_array().unwrap().iter().any(|f| f == "strong_survival"));
    assert!(r["delta"].is_null());
    assert!(r["backscatter_margin"].as_f64().unwrap() >= 0.0);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"rates": [0.2, 0.4], "runs": 20, "horizon": 10, "seed": 1}"#).unwrap();
    ok(dir.path(), &["simulate", "--config", "cfg.json", "--seed", "9", "--out", "out"]);
    let h = &json(&dir.path().join("out/simulate_summary.json"))["header"];
    assert_eq!(h["seed"], 9);
    assert_eq!(h["config"]["runs"], 20);
    assert_eq!(h["config"]["rates"], serde_json::json!([0.2, 0.4]));

    std::fs::write(&cfg, r#"{"rates": [0.2, 0.4], "bogus": 1}"#).unwrap();
    assert_eq!(treecp(dir.path(), 1, &["simulate", "--config", "cfg.json"]).status.code(), Some(2));
    assert_eq!(treecp(dir.path(), 1, &["simulate", "--config", "nope.json"]).status.code(), Some(4));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("file"), "").unwrap();
    let out = treecp(dir.path(), 1, &["report", "--b", "0.5,0.5", "--out", "file/sub"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn gw_modes_write_trees_and_summaries() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gw", "--q", "0.8,0.7,0.6", "--runs", "4", "--generations", "8", "--out", "bern"]);
    let s = &json(&dir.path().join("bern/gw_summary.json"))["summary"];
    assert_eq!(s["mode"], "bernoulli");
    assert!((s["mean_offspring"].as_f64().unwrap() - 2.1).abs() < 1e-12);
    ok(dir.path(), COMMANDS[4]);
    let s = &json(&dir.path().join("out/gw_summary.json"))["summary"];
    assert_eq!(s["mode"], "extracted");
    assert_eq!(s["labels"].as_array().unwrap().len(), 3);
    let rows = csv_rows(&dir.path().join("out/gw_trees.csv"));
    assert_eq!(rows[0].join(","), "replicate,vertex_id,parent_id,label,generation,word,time");
}
