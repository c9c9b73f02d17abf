use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cpmiss_cli::commands::{audit_rows, predict_intervals, PredictArgs};
use rand::{Rng, SeedableRng};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cpmiss"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const SMALL: &str = r#"
seed = 11
reps = 2
methods = ["cp", "cqr", "cqr_mda_exact", "nexcp", "lcp"]
reference_size = 5000

[dgp]
d = 3

[sizes]
n_train = 60
n_calib = 30
n_test_marginal = 40
n_test_per_group = 5
"#;

#[test]
fn synth_bench_writes_reports_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bench.toml", SMALL);
    let outs: Vec<PathBuf> = ["a", "b", "c"].iter().map(|n| dir.path().join(n)).collect();
    for (out, workers) in outs.iter().zip(["1", "1", "3"]) {
        let o = run(&[
            "synth-bench",
            "--config",
            cfg.to_str().unwrap(),
            "--workers",
            workers,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let csv_a = fs::read(outs[0].join("report.csv")).unwrap();
    assert_eq!(csv_a, fs::read(outs[1].join("report.csv")).unwrap());
    assert_eq!(csv_a, fs::read(outs[2].join("report.csv")).unwrap());
    assert_eq!(
        fs::read(outs[0].join("report.json")).unwrap(),
        fs::read(outs[1].join("report.json")).unwrap()
    );

    let text = String::from_utf8(csv_a).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "method,group,coverage,mean_length,n_points,n_infinite");
    let groups: Vec<&str> = lines[1..]
        .iter()
        .filter(|l| l.starts_with("nexcp,"))
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(groups, ["mar", "[000]", "[001]", "[010]", "[011]", "[100]", "[101]", "[110]"]);
    assert_eq!(lines.len(), 1 + 5 * 8);

    let json: serde_json::Value = serde_json::from_slice(&fs::read(outs[0].join("report.json")).unwrap()).unwrap();
    assert_eq!(json["seed"], 11);
    assert_eq!(json["config"]["reps"], 2);
    assert_eq!(json["rows"].as_array().unwrap().len(), 40);
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bench.toml", SMALL);
    let out = dir.path().join("o");
    let o = run(&[
        "synth-bench",
        "--config",
        cfg.to_str().unwrap(),
        "--methods",
        "cp,lcp",
        "--seed",
        "5",
        "--d",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["seed"], 5);
    let rows = json["rows"].as_array().unwrap();
    // Marginal plus pattern sizes 0..=4, for two methods.
    assert_eq!(rows.len(), 2 * 6);
    assert_eq!(rows[1]["group"], "0");

    let o = run(&[
        "synth-bench",
        "--config",
        cfg.to_str().unwrap(),
        "--methods",
        "cp",
        "--grouping",
        "by_pattern_size",
        "--beta",
        "-1,0.5,2",
        "--maskable-columns",
        "0,2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["dgp"]["beta"], serde_json::json!([-1.0, 0.5, 2.0]));
    assert_eq!(json["config"]["ampute"]["maskable_columns"], serde_json::json!([0, 2]));
    let groups: Vec<&str> = json["rows"].as_array().unwrap().iter().map(|r| r["group"].as_str().unwrap()).collect();
    assert_eq!(groups, ["mar", "0", "1", "2"]);

    let o = run(&["synth-bench", "--config", cfg.to_str().unwrap(), "--grouping", "diagonal"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn dumped_points_recount_to_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bench.toml", SMALL);
    let out = dir.path().join("o");
    let o = run(&["synth-bench", "--config", cfg.to_str().unwrap(), "--dump-points", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let mut points = csv::Reader::from_path(out.join("points.csv")).unwrap();
    let mut tally: std::collections::HashMap<(String, String), (usize, usize)> = Default::default();
    for rec in points.records() {
        let rec = rec.unwrap();
        let y: f64 = rec[4].parse().unwrap();
        let lo: f64 = rec[5].parse().unwrap();
        let hi: f64 = rec[6].parse().unwrap();
        let e = tally.entry((rec[1].to_string(), rec[2].to_string())).or_default();
        e.0 += 1;
        e.1 += usize::from(lo <= y && y <= hi);
    }
    let mut report = csv::Reader::from_path(out.join("report.csv")).unwrap();
    let mut rows = 0;
    for rec in report.records() {
        let rec = rec.unwrap();
        let (n, covered) = tally[&(rec[0].to_string(), rec[1].to_string())];
        assert_eq!(rec[4].parse::<usize>().unwrap(), n);
        assert_eq!(rec[2], format!("{:.6}", covered as f64 / n as f64));
        rows += 1;
    }
    assert_eq!(rows, tally.len());
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "alpha = 3\n");
    let o = run(&["synth-bench", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha"));
    let o = run(&["synth-bench", "--config", "/nonexistent/file.toml"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

fn predict_args(train: &Path, query: &Path, method: &str, alpha: f64) -> PredictArgs {
    PredictArgs {
        train: train.to_path_buf(),
        query: query.to_path_buf(),
        method: method.to_string(),
        alpha,
        rho: 0.99,
        na_token: "NA".into(),
        response: None,
        seed: 0,
        no_shuffle: true,
        out: None,
    }
}

#[test]
fn predict_hand_traced_nexcp() {
    let dir = tempfile::tempdir().unwrap();
    // First four rows fit y = 2x exactly; the fifth calibrates.
    let train = write(dir.path(), "train.csv", "x,y\n0,0\n1,2\n2,4\n3,6\n4,9\n");
    let query = write(dir.path(), "query.csv", "x\n1.5\nNA\n");
    let rows = predict_intervals(&predict_args(&train, &query, "nexcp", 0.6)).unwrap();
    // Same mask: score |9 - 8| = 1 with weight 1 against 1 at infinity.
    assert!((rows[0].center - 3.0).abs() < 1e-12);
    assert!((rows[0].lower - 2.0).abs() < 1e-12 && (rows[0].upper - 4.0).abs() < 1e-12);
    // Missing x: imputed by the training mean 1.5, so the remasked calibration
    // score is |9 - 3| = 6 with weight 0.99; level 0.4 <= 0.99 / 1.99.
    assert!((rows[1].center - 3.0).abs() < 1e-12);
    assert!((rows[1].lower + 3.0).abs() < 1e-12 && (rows[1].upper - 9.0).abs() < 1e-12);
    // At level 0.5 the test-point mass wins.
    let rows = predict_intervals(&predict_args(&train, &query, "nexcp", 0.5)).unwrap();
    assert_eq!(rows[1].upper, f64::INFINITY);
}

#[test]
fn predict_cp_is_centered_on_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("a,b,y\n");
    for i in 0..30 {
        let (a, b) = (i as f64 * 0.5, ((i * 7) % 11) as f64);
        text.push_str(&format!("{a},{b},{}\n", 1.0 + a - 2.0 * b + if i % 2 == 0 { 0.1 } else { -0.1 }));
    }
    let train = write(dir.path(), "train.csv", &text);
    let query = write(dir.path(), "query.csv", "b,a\n3,2\n");
    let rows = predict_intervals(&PredictArgs {
        no_shuffle: false,
        ..predict_args(&train, &query, "cp", 0.2)
    })
    .unwrap();
    assert!((rows[0].center - (1.0 + 2.0 - 6.0)).abs() < 0.1);
    assert!(((rows[0].lower + rows[0].upper) / 2.0 - rows[0].center).abs() < 1e-12);
    assert!(rows[0].flag.is_none());
}

#[test]
fn predict_unprecedented_mask_is_infinite_and_flagged() {
    let dir = tempfile::tempdir().unwrap();
    // The calibration third (last rows) always misses `b`.
    let mut text = String::from("a,b,y\n");
    for i in 0..12 {
        let b = if i >= 8 { "NA".to_string() } else { ((i * 3) % 5).to_string() };
        text.push_str(&format!("{i},{b},{}\n", i * 2));
    }
    let train = write(dir.path(), "train.csv", &text);
    let query = write(dir.path(), "query.csv", "a,b\n1,1\n");
    let out = dir.path().join("iv.csv");
    let o = run(&[
        "predict",
        "--train",
        train.to_str().unwrap(),
        "--query",
        query.to_str().unwrap(),
        "--method",
        "nexcp",
        "--no-shuffle",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[2], "-inf");
    assert_eq!(row[3], "inf");
    assert_eq!(row[4], "no_available_calibration");
}

#[test]
fn predict_user_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let train = write(dir.path(), "train.csv", "a,b,y\n1,2,3\n2,3,4\n3,1,5\n4,4,4\n5,2,1\n6,6,6\n7,1,2\n");
    let bad_query = write(dir.path(), "q.csv", "a,c\n1,2\n");
    let good_query = write(dir.path(), "q2.csv", "a,b\n1,2\n");
    for (q, method) in [(&bad_query, "cp"), (&good_query, "nested")] {
        let o = run(&[
            "predict",
            "--train",
            train.to_str().unwrap(),
            "--query",
            q.to_str().unwrap(),
            "--method",
            method,
        ]);
        assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn predict_warns_on_entirely_missing_column() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("a,b,y\n");
    for i in 0..15 {
        text.push_str(&format!("{i},NA,{}\n", i * 2 + i % 3));
    }
    let train = write(dir.path(), "train.csv", &text);
    let query = write(dir.path(), "query.csv", "a,b\n3,NA\n4,\n");
    let o = run(&[
        "predict",
        "--train",
        train.to_str().unwrap(),
        "--query",
        query.to_str().unwrap(),
        "--method",
        "lcp",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("entirely missing"));
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 3);
}

#[test]
fn audit_counts() {
    let dir = tempfile::tempdir().unwrap();
    let all = write(dir.path(), "all.csv", "y_true,lower,upper,mask\n1,0,2,01\n5,-inf,inf,11\n");
    let rows = audit_rows(&all).unwrap();
    assert!(rows.iter().all(|r| r.coverage == 1.0));
    assert_eq!(rows[2].n_infinite, 1);
    assert_eq!(rows[2].mean_length, None);

    let half = write(dir.path(), "half.csv", "y_true,lower,upper,m1,m2\n1,0,2,0,1\n3,0,2,0,1\n");
    let rows = audit_rows(&half).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].coverage, 0.5);
    assert_eq!(rows[1].group, "[01]");
    assert_eq!(rows[1].mean_length, Some(2.0));
}

#[test]
fn audit_malformed_rows_exit_2_with_lines() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.csv",
        "y_true,lower,upper,mask\n1,0,2,01\nx,0,1,00\n1,3,2,00\n1,0,2,0a\n",
    );
    let o = run(&["audit", "--intervals", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    for line in ["line 3", "line 4", "line 5"] {
        assert!(err.contains(line), "{err}");
    }
    assert!(!err.contains("line 2"), "{err}");
}

#[test]
fn audit_recount_on_large_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = rand::rngs::StdRng::seed_from_u64(3);
    let mut text = String::from("y_true,lower,upper,mask\n");
    let mut expected: std::collections::BTreeMap<String, (usize, usize)> = Default::default();
    for _ in 0..1000 {
        let y: f64 = rng.random_range(-3.0..3.0);
        let lo: f64 = rng.random_range(-3.0..1.0);
        let hi = lo + rng.random_range(0.0..3.0);
        let mask = format!("{}{}{}", rng.random_range(0..2), rng.random_range(0..2), rng.random_range(0..2));
        text.push_str(&format!("{y},{lo},{hi},{mask}\n"));
        let hit = usize::from(lo <= y && y <= hi);
        for key in ["mar".to_string(), format!("[{mask}]")] {
            let e = expected.entry(key).or_default();
            e.0 += 1;
            e.1 += hit;
        }
    }
    let path = write(dir.path(), "fixture.csv", &text);
    let out = dir.path().join("audit.csv");
    let o = run(&["audit", "--intervals", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let mut rdr = csv::Reader::from_path(out).unwrap();
    let mut seen = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let (n, hit) = expected[&rec[0]];
        assert_eq!(rec[1], format!("{:.6}", hit as f64 / n as f64));
        assert_eq!(rec[3].parse::<usize>().unwrap(), n);
        seen += 1;
    }
    assert_eq!(seen, expected.len());
}
