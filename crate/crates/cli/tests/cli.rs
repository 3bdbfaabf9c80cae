use std::process::{Command, Output};

use serde_json::Value;
use zerogap_cli::report::{to_json, ReportRecord};

fn zerogap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zerogap")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("UTF-8 output")
}

fn json(args: &[&str]) -> (Value, i32) {
    let mut full = args.to_vec();
    full.extend(["--format", "json"]);
    let out = zerogap(&full);
    (serde_json::from_str(&stdout(&out)).expect("one JSON document"), code(&out))
}

fn f(v: &Value) -> f64 {
    v.as_f64().expect("number")
}

#[test]
fn check_main_point_holds() {
    let (v, c) = json(&["check", "--u", "0.0909", "--v", "2.13", "--kappa", "8.69"]);
    assert_eq!(c, 0);
    assert_eq!(v["outputs"]["holds"], true);
    let m = f(&v["outputs"]["gap_multiplier"]);
    assert!(m >= 2.766 && (m - 2.7661).abs() < 1e-4, "{m}");
    assert!(f(&v["outputs"]["margin"]) > 1e-6 * f(&v["outputs"]["lhs_a"]).abs());
}

#[test]
fn check_exact_agrees() {
    let (v, c) = json(&["check", "--u", "0.0909", "--v", "2.13", "--kappa", "8.69", "--exact"]);
    assert_eq!(c, 0);
    assert_eq!(v["outputs"]["exact_certified"], true);
    assert_eq!(v["outputs"]["exact_holds"], true);
}

#[test]
fn check_exit_codes() {
    assert_eq!(code(&zerogap(&["check", "--u", "0.0909", "--v", "2.13", "--kappa", "20"])), 1);
    let bad = zerogap(&["check", "--u", "0", "--v", "2", "--kappa", "8"]);
    assert_eq!(code(&bad), 2);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("u = 0"));
    assert_eq!(code(&zerogap(&["check", "--u", "0.5", "--v", "2", "--kappa", "8"])), 2);
    assert_eq!(code(&zerogap(&["check", "--u", "abc", "--v", "2", "--kappa", "8"])), 2);
    assert_eq!(code(&zerogap(&["check", "--v", "2", "--kappa", "8"])), 2);
}

#[test]
fn json_round_trips_byte_identically() {
    for args in [
        vec!["check", "--u", "0.0909", "--v", "2.13", "--kappa", "8.69", "--format", "json"],
        vec!["a3", "--prime-limit", "1000", "--format", "json"],
        vec!["optimize", "--grid", "2x2", "--refine", "1", "--format", "json"],
        vec!["kappa-series", "--coeff", "B", "--order", "3", "--format", "json"],
    ] {
        let text = stdout(&zerogap(&args));
        let record: ReportRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(to_json(&record), text, "{args:?}");
        let x = record.outputs.values().find(|v| v.is_f64()).map(|v| v.as_f64().unwrap());
        if let Some(x) = x {
            assert!(text.contains(&format!("{x:.16e}")), "17 significant digits for {x}");
        }
    }
}

#[test]
fn csv_check_is_one_row() {
    let out = stdout(&zerogap(&["check", "--u", "0.0909", "--v", "2.13", "--kappa", "8.69", "--format", "csv"]));
    let lines: Vec<&str> = out.split("\r\n").filter(|l| !l.is_empty()).collect();
    assert_eq!(lines.len(), 2);
    let header: Vec<&str> = lines[0].split(',').collect();
    let row: Vec<&str> = lines[1].split(',').collect();
    let holds = header.iter().position(|h| *h == "holds").unwrap();
    assert_eq!(row[holds], "true");
}

#[test]
fn table_rows_and_stability() {
    let first = zerogap(&["table"]);
    assert_eq!(code(&first), 0);
    let second = zerogap(&["table"]);
    assert_eq!(first.stdout, second.stdout, "table output must be byte-stable");
    let text = stdout(&first);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    let names: Vec<&str> = rows.iter().map(|r| &r[0]).collect();
    assert_eq!(names, ["main", "hall", "ext-0.4999", "ext-0.55", "ext-0.9999"]);
    let mult = |i: usize| rows[i][5].parse::<f64>().unwrap();
    assert!(mult(0) >= 2.766);
    assert_eq!((mult(1) * 100.0).round() / 100.0, 2.63);
    assert!(mult(2) >= 3.25);
    assert!(mult(3) >= 3.26 - 1e-3);
    assert!(mult(4) >= 3.05 - 1e-3);
    assert!(rows.iter().all(|r| &r[7] == "true"));
    assert_eq!(&rows[3][4], "sup_kappa");
}

#[test]
fn kappa_series_at_u_one() {
    let (v, c) = json(&["kappa-series", "--coeff", "A", "--order", "4", "--u-rational", "1/1"]);
    assert_eq!(c, 0);
    assert_eq!(v["outputs"]["negative_powers"], "0 (exact)");
    assert_eq!(v["outputs"]["a_kappa0_at_u1_equals_42_over_9_factorial"], true);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    // 42/362880 in lowest terms
    assert_eq!(rows[0][2], "1/8640");
}

#[test]
fn kappa_series_half_is_not_half() {
    let out = stdout(&zerogap(&["kappa-series", "--coeff", "A", "--order", "0", "--u-rational", "1/2", "--format", "csv"]));
    let value = out.lines().nth(1).unwrap().split(',').nth(2).unwrap().to_string();
    assert_ne!(value, "1/17280");
    assert!(value.contains('/'));
}

#[test]
fn kappa_series_all_labels_cancel() {
    let out = zerogap(&["kappa-series", "--coeff", "all", "--order", "2"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("negative_powers") && text.contains("0 (exact)"));
    assert_eq!(text.matches("..κ^-1 cancel").count(), 10);
}

#[test]
fn kappa_series_rejects_bad_input() {
    assert_eq!(code(&zerogap(&["kappa-series", "--coeff", "K"])), 2);
    assert_eq!(code(&zerogap(&["kappa-series", "--coeff", "A", "--u-rational", "3/2"])), 2);
    assert_eq!(code(&zerogap(&["kappa-series", "--coeff", "A", "--u-rational", "x"])), 2);
}

#[test]
fn verify_oracle_small_grid() {
    let (v, c) = json(&["verify-oracle", "--kappa-list", "2", "--u-list", "0.05"]);
    assert_eq!(c, 0);
    assert_eq!(v["outputs"]["failures"], 0);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 10);
    for r in rows {
        if r[0] == "D" || r[0] == "E" {
            assert!((f(&r[8]) + 0.5).abs() < 1e-9, "{r:?}");
        }
    }
}

#[test]
fn verify_oracle_guards() {
    assert_eq!(code(&zerogap(&["verify-oracle", "--kappa-list", "0"])), 2);
    let narrow = zerogap(&["verify-oracle", "--kappa-list", "3", "--u-list", "0.05", "--window", "3", "--labels", "A"]);
    assert_eq!(code(&narrow), 2);
    assert!(String::from_utf8_lossy(&narrow.stderr).contains("try --window"));
}

#[test]
fn optimize_degenerate_grid_echoes_seed() {
    let (v, c) = json(&[
        "optimize", "--u-range", "0.0909,0.0909", "--v-range", "2.13,2.13", "--grid", "1x1", "--refine", "0",
    ]);
    assert_eq!(c, 0);
    assert_eq!(f(&v["outputs"]["best_u"]), 0.0909);
    assert_eq!(f(&v["outputs"]["best_v"]), 2.13);
    assert!(f(&v["outputs"]["best_kappa"]) >= 8.69);
    assert_eq!(v["rows"].as_array().unwrap().len(), 1);
}

#[test]
fn optimize_infeasible_and_invalid() {
    let out = zerogap(&["optimize", "--v-range", "40,50", "--grid", "2x2", "--refine", "0"]);
    assert_eq!(code(&out), 1);
    assert_eq!(code(&zerogap(&["optimize", "--u-range", "0.05,0.5"])), 2);
    assert_eq!(code(&zerogap(&["optimize", "--grid", "0x3"])), 2);
}

#[test]
fn a3_values() {
    let (v, c) = json(&["a3", "--prime-limit", "2"]);
    assert_eq!(c, 0);
    assert_eq!(f(&v["outputs"]["partial_product"]), 0.203125);
    let (v, _) = json(&["a3", "--prime-limit", "1000000"]);
    assert!(f(&v["outputs"]["tail_bound"]) < 1e-6);
    let a3 = f(&v["outputs"]["partial_product"]);
    assert!((f(&v["outputs"]["sixth_moment_constant"]) - a3 * 42.0 / 362880.0).abs() < 1e-18);
    assert_eq!(code(&zerogap(&["a3", "--prime-limit", "1"])), 2);
}
