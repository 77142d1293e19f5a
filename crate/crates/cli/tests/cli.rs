use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn scca(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scca"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = scca(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    scca(dir, args).status.code().expect("exit code")
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn active(sol: &Value, factor: usize, view: usize) -> Vec<u64> {
    sol["factors"][factor]["active"][view]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect()
}

/// Planted two-view data in `dir/sim`.
fn planted(seed: &str) -> TempDir {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["simulate", "--seed", seed, "--out", "sim"]);
    dir
}

const PAIR: [&str; 2] = ["sim/view1.csv", "sim/view2.csv"];
const SPARSE: [&str; 6] = ["--gamma1", "0.4", "--gamma2", "0.4", "--relative", "--no-scale"];

fn args<'a>(head: &[&'a str], tail: &[&'a str]) -> Vec<&'a str> {
    head.iter().chain(tail).copied().collect()
}

#[test]
fn planted_fit_recovers_both_blocks() {
    let dir = planted("3");
    ok(dir.path(), &args(&["scca", PAIR[0], PAIR[1], "--out", "fit"], &SPARSE));
    let sol = json(dir.path().join("fit/solution.json"));
    let truth1: Vec<u64> = (0..50).collect();
    for view in 0..2 {
        let a = active(&sol, 0, view);
        let hits = a.iter().filter(|i| truth1.contains(i)).count();
        assert!(hits >= 45, "view {view}: {hits} of 50 recovered");
        assert!(a.len() <= 55, "view {view}: {} active", a.len());
    }
    assert_eq!(sol["metadata"]["config"]["settings"]["gamma_scale"], "relative");
    assert_eq!(sol["metadata"]["config"]["settings"]["tol"], 1e-8);
}

#[test]
fn zero_penalty_is_dense() {
    let dir = planted("1");
    ok(dir.path(), &["scca", PAIR[0], PAIR[1], "--out", "fit"]);
    let sol = json(dir.path().join("fit/solution.json"));
    assert_eq!(active(&sol, 0, 0).len(), 500);
    assert_eq!(active(&sol, 0, 1).len(), 400);
}

#[test]
fn input_and_usage_errors_exit_one() {
    let dir = planted("1");
    let d = dir.path();
    assert_eq!(code(d, &["scca", "missing.csv", PAIR[1]]), 1);
    assert_eq!(code(d, &["scca", PAIR[0]]), 1);
    assert_eq!(code(d, &["scca", PAIR[0], PAIR[1], "--tol", "0"]), 1);
    assert_eq!(
        code(d, &["scca", PAIR[0], PAIR[1], "--gamma1", "0.1,0.2", "--factors", "3"]),
        1
    );
    assert_eq!(
        code(d, &["mscca", PAIR[0], PAIR[1], "--gamma-matrix", "0,1,1;1,0,1"]),
        1
    );
    assert_eq!(code(d, &["mscca", PAIR[0], PAIR[1], "--gamma-matrix", "0,1;x,0"]), 1);
    assert_eq!(code(d, &["frobnicate"]), 1);
    assert_eq!(code(d, &["--help"]), 0);
}

#[test]
fn empty_support_exits_two() {
    let dir = planted("1");
    let out = scca(dir.path(), &["scca", PAIR[0], PAIR[1], "--gamma2", "1.5", "--relative"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty support"));
}

#[test]
fn two_view_mscca_matches_scca() {
    let dir = planted("5");
    let d = dir.path();
    ok(
        d,
        &args(
            &["scca", PAIR[0], PAIR[1], "--order", "second", "--out", "pair"],
            &SPARSE,
        ),
    );
    ok(
        d,
        &[
            "mscca",
            PAIR[0],
            PAIR[1],
            "--gamma-matrix",
            "0,0.4;0.4,0",
            "--relative",
            "--no-scale",
            "--out",
            "multi",
        ],
    );
    let pair = json(d.join("pair/solution.json"));
    let multi = json(d.join("multi/solution.json"));
    assert_eq!(pair["factors"][0]["active"], multi["factors"][0]["active"]);
}

#[test]
fn three_view_planted_run() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "--model", "three-view", "--seed", "2", "--out", "sim"]);
    ok(
        d,
        &[
            "mscca",
            "sim/view1.csv",
            "sim/view2.csv",
            "sim/view3.csv",
            "--gammas",
            "0.4,0.4,0.4",
            "--relative",
            "--no-scale",
            "--out",
            "fit",
        ],
    );
    let sol = json(d.join("fit/solution.json"));
    let third = active(&sol, 0, 2);
    let planted: Vec<u64> = (0..25).chain(575..600).collect();
    let hits = third.iter().filter(|i| planted.contains(i)).count();
    assert!(hits >= 45, "{hits} of 50");
}

fn write_accessory(dir: &Path, len: usize) {
    let factor = std::fs::read_to_string(dir.join("sim/factor.csv")).unwrap();
    let mut lines: Vec<&str> = factor.lines().collect();
    lines[0] = "y";
    lines.truncate(len + 1);
    std::fs::write(dir.join("y.csv"), lines.join("\n") + "\n").unwrap();
}

#[test]
fn directed_without_alignment_matches_scca() {
    let dir = planted("6");
    let d = dir.path();
    write_accessory(d, 50);
    let abs = ["--gamma1", "0.5", "--gamma2", "0.5", "--no-scale"];
    ok(d, &args(&["scca", PAIR[0], PAIR[1], "--out", "pair"], &abs));
    ok(
        d,
        &args(
            &[
                "dscca", PAIR[0], PAIR[1], "--y", "y.csv", "--eps1", "0", "--eps2", "0", "--out", "dir",
            ],
            &abs,
        ),
    );
    let pair = json(d.join("pair/solution.json"));
    let directed = json(d.join("dir/solution.json"));
    assert_eq!(pair["factors"][0]["active"], directed["factors"][0]["active"]);
}

#[test]
fn directed_modes_and_accessory_checks() {
    let dir = planted("6");
    let d = dir.path();
    write_accessory(d, 50);
    for mode in ["dot", "stacked", "two-stage"] {
        ok(
            d,
            &[
                "dscca", PAIR[0], PAIR[1], "--y", "y.csv", "--mode", mode, "--gamma1", "0.1", "--out", mode,
            ],
        );
        assert!(d.join(mode).join("solution.json").exists());
    }
    ok(
        d,
        &[
            "dscca",
            PAIR[0],
            PAIR[1],
            "--y",
            "y.csv",
            "--mode",
            "reg",
            "--beta",
            "univariate",
            "--out",
            "reg",
        ],
    );
    write_accessory(d, 20);
    assert_eq!(code(d, &["dscca", PAIR[0], PAIR[1], "--y", "y.csv"]), 1);
    assert_eq!(code(d, &["dscca", PAIR[0], PAIR[1], "--y", PAIR[0]]), 1);
}

#[test]
fn tune_is_seeded_and_picks_the_sparse_truth() {
    let dir = planted("8");
    let d = dir.path();
    let base = [
        "tune",
        PAIR[0],
        PAIR[1],
        "--relative",
        "--no-scale",
        "--permutations",
        "10",
        "--seed",
        "4",
        "--fit",
    ];
    ok(d, &args(&base, &["--out", "a", "--jobs", "1"]));
    ok(d, &args(&base, &["--out", "b", "--jobs", "3"]));
    for f in ["tune.json", "solution.json"] {
        assert_eq!(
            std::fs::read(d.join("a").join(f)).unwrap(),
            std::fs::read(d.join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    let report = json(d.join("a/tune.json"));
    assert_eq!(report["report"]["cells"].as_array().unwrap().len(), 16);
    let chosen = report["report"]["chosen"].as_u64().unwrap() as usize;
    assert_eq!(
        report["report"]["cells"][chosen]["params"],
        serde_json::json!([0.4, 0.4])
    );
    let sol = json(d.join("a/solution.json"));
    for view in 0..2 {
        let a = active(&sol, 0, view);
        assert!(a.iter().filter(|&&i| i < 50).count() >= 45);
        assert!(a.len() <= 60, "view {view}: {} active", a.len());
    }
}

#[test]
fn tune_single_cell_and_cross_validation() {
    let dir = planted("9");
    let d = dir.path();
    ok(
        d,
        &[
            "tune",
            PAIR[0],
            PAIR[1],
            "--grid1",
            "0.3",
            "--grid2",
            "0.3",
            "--relative",
            "--permutations",
            "5",
            "--out",
            "one",
        ],
    );
    let one = json(d.join("one/tune.json"));
    assert_eq!(one["report"]["cells"].as_array().unwrap().len(), 1);
    assert_eq!(one["report"]["chosen"], 0);
    ok(
        d,
        &[
            "tune",
            PAIR[0],
            PAIR[1],
            "--method",
            "cv",
            "--folds",
            "4",
            "--grid1",
            "0.2,0.4",
            "--grid2",
            "0.4",
            "--relative",
            "--out",
            "cv",
        ],
    );
    let cv = json(d.join("cv/tune.json"));
    assert_eq!(cv["report"]["method"]["cross_validation"]["folds"], 4);
}

#[test]
fn config_file_fills_in_and_flags_win() {
    let dir = planted("3");
    let d = dir.path();
    std::fs::write(
        d.join("run.toml"),
        "gamma1 = [0.4]\ngamma2 = [0.4]\nrelative = true\nscale = false\ntol = 1e-7\n",
    )
    .unwrap();
    ok(
        d,
        &[
            "scca", PAIR[0], PAIR[1], "--config", "run.toml", "--tol", "1e-9", "--out", "fit",
        ],
    );
    let settings = &json(d.join("fit/solution.json"))["metadata"]["config"]["settings"];
    assert_eq!(settings["gamma1"], serde_json::json!([0.4]));
    assert_eq!(settings["scale"], false);
    assert_eq!(settings["tol"], 1e-9);
    std::fs::write(d.join("bad.toml"), "gamma = 1\n").unwrap();
    assert_eq!(code(d, &["scca", PAIR[0], PAIR[1], "--config", "bad.toml"]), 1);
}

#[test]
fn simulate_shapes_and_determinism() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "--seed", "11", "--out", "a"]);
    ok(d, &["simulate", "--seed", "11", "--out", "b"]);
    for f in ["view1.csv", "view2.csv", "truth1.csv", "truth2.csv", "factor.csv"] {
        assert_eq!(
            std::fs::read(d.join("a").join(f)).unwrap(),
            std::fs::read(d.join("b").join(f)).unwrap()
        );
    }
    let view1 = std::fs::read_to_string(d.join("a/view1.csv")).unwrap();
    let lines: Vec<&str> = view1.lines().collect();
    assert_eq!(lines.len(), 51);
    assert_eq!(lines[1].split(',').count(), 500);
    let view2 = std::fs::read_to_string(d.join("a/view2.csv")).unwrap();
    assert_eq!(view2.lines().nth(1).unwrap().split(',').count(), 400);
}

#[test]
fn sweep_has_one_row_per_replicate_plus_means() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "simulate",
            "--sweep",
            "0,0.1,0.3",
            "--replicates",
            "2",
            "--relative",
            "--gamma1",
            "0.4",
            "--gamma2",
            "0.4",
            "--out",
            "s",
        ],
    );
    let csv = std::fs::read_to_string(d.join("s/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 2 + 3);
}

#[test]
fn report_from_stored_solution() {
    let dir = planted("2");
    let d = dir.path();
    ok(
        d,
        &[
            "scca",
            PAIR[0],
            PAIR[1],
            "--factors",
            "2",
            "--gamma1",
            "0.2",
            "--gamma2",
            "0.2",
            "--relative",
            "--out",
            "fit",
        ],
    );
    let report = ["report", "fit/solution.json", "--views", PAIR[0], PAIR[1]];
    ok(d, &args(&report, &["--out", "r1"]));
    ok(d, &args(&report, &["--out", "r2"]));
    let a = std::fs::read_to_string(d.join("r1/biplot.csv")).unwrap();
    assert_eq!(a, std::fs::read_to_string(d.join("r2/biplot.csv")).unwrap());
    assert!(a.starts_with("entity_id,view,axis1,axis2,kind\n"));
    assert_eq!(a.lines().filter(|l| l.ends_with(",sample")).count(), 100);
    ok(
        d,
        &args(&report, &["--kind", "interp", "--format", "svg", "--out", "r3"]),
    );
    assert!(std::fs::read_to_string(d.join("r3/interp.svg"))
        .unwrap()
        .starts_with("<svg"));
    assert_eq!(
        code(d, &["report", "fit/solution.json", "--views", PAIR[0], PAIR[0]]),
        1
    );

    ok(d, &["scca", PAIR[0], PAIR[1], "--out", "single"]);
    let out = scca(d, &["report", "single/solution.json", "--views", PAIR[0], PAIR[1]]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("factor"));
}
