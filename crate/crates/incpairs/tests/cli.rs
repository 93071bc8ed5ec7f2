//! End-to-end checks of the `incpairs` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_incpairs"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().expect("binary runs")
}

fn write_pairs_csv(path: &Path) {
    let mut text = String::from("x1,x2\n");
    for i in 0..24 {
        let a = 3.0 + 0.37 * (i as f64) % 2.0 + 0.05 * i as f64;
        let b = a - 0.2 + 0.11 * ((i * 7) % 5) as f64;
        match i % 6 {
            4 => text.push_str(&format!("{a:.3},NA\n")),
            5 => text.push_str(&format!(",{b:.3}\n")),
            _ => text.push_str(&format!("{a:.3},{b:.3}\n")),
        }
    }
    fs::write(path, text).unwrap();
}

const CONFIG: &str = r#"{
  "laws": ["standard-normal"],
  "rhos": [0.1],
  "sigma_variants": ["sigma1"],
  "sizes": [[8, 4, 4]],
  "deltas": [0.0],
  "methods": ["tml", "norm"],
  "n_sim": 40,
  "B": 200,
  "m": 3,
  "seed": 5
}"#;

/// Everything except the wall-time column.
fn stable_columns(csv_text: &str) -> Vec<Vec<String>> {
    csv_text
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect::<Vec<_>>())
        .map(|mut cols| {
            cols.pop(); // seconds
            cols
        })
        .collect()
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("config.json"), CONFIG).unwrap();
    let out1 = run(
        &["simulate", "config.json", "--out", "a.csv"],
        dir.path(),
    );
    assert!(out1.status.success(), "{out1:?}");
    let out2 = run(
        &["simulate", "config.json", "--out", "b.csv"],
        dir.path(),
    );
    assert!(out2.status.success());
    let a = fs::read_to_string(dir.path().join("a.csv")).unwrap();
    let b = fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert_eq!(stable_columns(&a), stable_columns(&b));
    assert_eq!(a.lines().count(), 3); // header + 2 cells
    assert!(a.starts_with(
        "law,rho,sigma,n1,n2,n3,delta,method,rejection_rate,mc_se,nrmse_mean,degenerate_count,seconds"
    ));
}

#[test]
fn simulate_thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("config.json"), CONFIG).unwrap();
    let out1 = run(
        &["simulate", "config.json", "--out", "a.csv", "--threads", "1"],
        dir.path(),
    );
    assert!(out1.status.success());
    let out2 = run(
        &["simulate", "config.json", "--out", "b.csv", "--threads", "4"],
        dir.path(),
    );
    assert!(out2.status.success());
    let a = fs::read_to_string(dir.path().join("a.csv")).unwrap();
    let b = fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert_eq!(stable_columns(&a), stable_columns(&b));
}

#[test]
fn simulate_rejects_unknown_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let bad = CONFIG.replacen("\"seed\": 5", "\"seed\": 5, \"n_sims\": 7", 1);
    fs::write(dir.path().join("config.json"), bad).unwrap();
    let out = run(&["simulate", "config.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("n_sims"), "{stderr}");
}

#[test]
fn test_subcommand_reports_and_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    write_pairs_csv(&dir.path().join("pairs.csv"));
    let out = run(
        &[
            "test",
            "pairs.csv",
            "--methods",
            "tml,norm,pmm",
            "--m",
            "3",
            "-B",
            "300",
            "--seed",
            "11",
            "--out",
            "report.json",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{out:?}");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(!stdout.contains("t-comp")); // sample has missing rows
    for label in ["tml", "norm", "pmm"] {
        assert!(stdout.contains(label), "{stdout}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["counts"], serde_json::json!([16, 4, 4]));
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for row in rows {
        let p = row["p_two_sided"].as_f64().unwrap();
        assert!(p > 0.0 && p <= 1.0);
    }
}

#[test]
fn test_subcommand_same_seed_same_output() {
    let dir = tempfile::tempdir().unwrap();
    write_pairs_csv(&dir.path().join("pairs.csv"));
    let args = [
        "test",
        "pairs.csv",
        "--methods",
        "tml,rf-mice",
        "--seed",
        "3",
    ];
    let a = run(&args, dir.path());
    let b = run(&args, dir.path());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn missing_input_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["test", "nope.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_subcommand_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_method_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    write_pairs_csv(&dir.path().join("pairs.csv"));
    let out = run(&["test", "pairs.csv", "--methods", "bogus"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn impute_writes_completed_copies_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    write_pairs_csv(&dir.path().join("pairs.csv"));
    let out = run(
        &[
            "impute",
            "pairs.csv",
            "--method",
            "pmm",
            "--m",
            "4",
            "--seed",
            "21",
            "--out",
            "done",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{out:?}");
    let original = fs::read_to_string(dir.path().join("pairs.csv")).unwrap();
    for k in 1..=4 {
        let text =
            fs::read_to_string(dir.path().join(format!("done/pairs_imp{k}.csv"))).unwrap();
        assert_eq!(text.lines().count(), original.lines().count());
        for (i, line) in text.lines().enumerate().skip(1) {
            let cells: Vec<&str> = line.split(',').collect();
            assert!(
                cells.iter().all(|c| c.parse::<f64>().is_ok()),
                "row {i} still has a hole: {line}"
            );
            // observed cells survive imputation verbatim
            let orig: Vec<&str> = original.lines().nth(i).unwrap().split(',').collect();
            for (c, o) in cells.iter().zip(&orig) {
                if !o.is_empty() && !o.eq_ignore_ascii_case("na") {
                    assert_eq!(
                        c.parse::<f64>().unwrap(),
                        o.parse::<f64>().unwrap(),
                        "row {i}"
                    );
                }
            }
        }
    }
    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("done/pairs_manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["m"], 4);
    assert_eq!(manifest["seed"], 21);
    assert_eq!(manifest["draws"].as_array().unwrap().len(), 4);
}

#[test]
fn impute_rejects_tml() {
    let dir = tempfile::tempdir().unwrap();
    write_pairs_csv(&dir.path().join("pairs.csv"));
    let out = run(&["impute", "pairs.csv", "--method", "tml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn reproduce_rejects_unknown_target() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["reproduce", "table9"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("table9"));
}

#[test]
fn reproduce_tiny_scale_prints_reference_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "reproduce",
            "table1",
            "--scale",
            "0.0005",
            "--out",
            "t1.csv",
            "--seed",
            "2",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{out:?}");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("reference"));
    assert!(stdout.contains("rf-mi"));
    let csv_text = fs::read_to_string(dir.path().join("t1.csv")).unwrap();
    assert_eq!(csv_text.lines().count(), 31); // header + 6 rhos x 5 methods
}
