mod schema;

use std::path::{Path, PathBuf};
use std::process::Command as Process;

use clap::Parser;
use serde_json::{Map, Value};

use nibr_cli::input::{read_table, read_table_path, regression_dataset, write_dataset_csv};
use nibr_cli::{run, Cli, OUTPUT_DIR_ENV};
use nibr_core::fixtures::{regression_example, REGRESSION_X, REGRESSION_Y};
use nibr_core::{limiting_nig_from_q, posterior_update};

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name).display().to_string()
}

fn regression() -> String {
    fixture("regression_example.csv")
}

fn fatigue() -> String {
    fixture("fatigue_tests.csv")
}

fn validator() -> schema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/report.schema.json");
    schema::Validator::new(serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap())
}

fn cli(args: &[&str]) -> Cli {
    Cli::try_parse_from(std::iter::once("nibr").chain(args.iter().copied())).unwrap()
}

/// Runs in-process and returns the parsed JSON report.
fn report(args: &[&str]) -> Value {
    let out = run(&cli(args));
    serde_json::from_str(&out.text).unwrap()
}

fn binary() -> Process {
    Process::new(env!("CARGO_BIN_EXE_nibr"))
}

fn sample_commands() -> Vec<Vec<String>> {
    let r = regression();
    let f = fatigue();
    let base = |cmd: &str, extra: &[&str]| {
        let mut v = vec![cmd.to_string(), "--data".into(), r.clone(), "--rows".into(), "1-6".into()];
        v.extend(extra.iter().map(|s| s.to_string()));
        v
    };
    vec![
        base("fit", &[]),
        base("predict", &["--points", "7"]),
        base("predict", &["--at", "0.25;1.5", "--predictive", "mean-response"]),
        base("ls-compare", &["--points", "5"]),
        base("evidence", &["--grid-resolution", "48"]),
        base("compare-priors", &["--holdout", "7"]),
        base("mcmc-check", &["--draws", "6000", "--burn-in", "1000", "--seed", "4"]),
        vec!["fatigue".into(), "--data".into(), f.clone(), "--points".into(), "6".into()],
        vec!["fatigue".into(), "--data".into(), f, "--points".into(), "4".into(), "--draws".into(), "6000".into(), "--burn-in".into(), "500".into()],
        vec!["verify-info".into(), "--draws".into(), "20000".into()],
        vec!["fit".into(), "--data".into(), r.clone(), "--rows".into(), "1-2".into()],
        base("fit", &["--level", "1.5"]),
        vec!["fit".into()],
    ]
}

#[test]
fn every_report_validates_against_the_schema() {
    let v = validator();
    for args in sample_commands() {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = run(&cli(&refs));
        let doc: Value = serde_json::from_str(&out.text).unwrap();
        let errs = v.errors(&doc);
        assert!(errs.is_empty(), "{args:?}: {errs:#?}");
        assert_eq!(out.exit_code == 0, doc.get("error").is_none(), "{args:?}");
        assert_eq!(doc["status"] == "ok", out.exit_code == 0);
    }
}

#[test]
fn schema_rejects_malformed_reports() {
    let v = validator();
    let good = report(&["fit", "--data", &regression(), "--rows", "1-6"]);
    assert!(v.errors(&good).is_empty());

    let mut missing = good.clone();
    missing["result"]["posterior"].as_object_mut().unwrap().remove("alpha_star");
    assert!(!v.errors(&missing).is_empty());

    let mut both = good.clone();
    both["error"] = serde_json::json!({ "kind": "x", "message": "y" });
    assert!(!v.errors(&both).is_empty());

    let mut hidden = good.clone();
    hidden["config"]["mystery"] = Value::Bool(true);
    assert!(!v.errors(&hidden).is_empty());

    let mut bad_level = good;
    bad_level["config"]["level"] = serde_json::json!(1.5);
    assert!(!v.errors(&bad_level).is_empty());
}

#[test]
fn fit_on_six_rows_has_four_degrees_of_freedom() {
    let doc = report(&["fit", "--data", &regression(), "--rows", "1-6", "--q", "2"]);
    assert_eq!(doc["status"], "ok");
    assert_eq!(doc["result"]["marginal_theta"]["dof"].as_f64(), Some(4.0));
    assert_eq!(doc["result"]["marginal_sigma2"]["shape"].as_f64(), Some(2.0));
    assert_eq!(doc["config"]["n"], 6);
    assert_eq!(doc["config"]["k"], 2);
    assert_eq!(doc["result"]["least_squares"]["residual_dof"], 4);
}

#[test]
fn json_numbers_round_trip_exactly() {
    let doc = report(&["fit", "--data", &regression(), "--rows", "1-6"]);
    let data = regression_example().select_rows(&[0, 1, 2, 3, 4, 5]).unwrap();
    let post = posterior_update(&limiting_nig_from_q(2.0, 2), &data).unwrap();
    assert_eq!(doc["result"]["posterior"]["beta_star"].as_f64(), Some(post.beta_star));
    let mu: Vec<f64> = serde_json::from_value(doc["result"]["posterior"]["mu_star"].clone()).unwrap();
    assert_eq!(mu, post.mu_star.iter().copied().collect::<Vec<_>>());
    let out = run(&cli(&["fit", "--data", &regression(), "--rows", "1-6"]));
    assert!(out.text.contains("\"level\": 9.4999999999999996e-1"), "{}", out.text);
}

#[test]
fn singleton_comparison_picks_its_only_exponent() {
    for q in ["0", "3", "4.5"] {
        let doc = report(&["compare-priors", "--data", &regression(), "--rows", "1-6", "--q-list", q]);
        let want: f64 = q.parse().unwrap();
        assert_eq!(doc["result"]["best_fit_q"].as_f64(), Some(want));
        assert_eq!(doc["result"]["best_pred_q"].as_f64(), Some(want));
    }
}

#[test]
fn comparison_prefers_q2_with_one_future_row() {
    let doc = report(&["compare-priors", "--data", &regression(), "--rows", "1-6", "--holdout", "7"]);
    assert_eq!(doc["result"]["best_fit_q"].as_f64(), Some(2.0));
    assert_eq!(doc["result"]["best_pred_q"].as_f64(), Some(2.0));
    assert_eq!(doc["config"]["m"], 1);
    assert_eq!(doc["config"]["sigma_support_source"], "default");
}

#[test]
fn mcmc_check_is_byte_identical_across_runs() {
    let args = ["mcmc-check", "--data", &regression(), "--rows", "1-6", "--draws", "8000", "--burn-in", "1000", "--seed", "11"];
    let a = binary().args(args).output().unwrap();
    let b = binary().args(args).output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let other = binary().args(&args[..args.len() - 1]).arg("12").output().unwrap();
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn exit_status_tracks_the_error_object() {
    let ok = binary().args(["fit", "--data", &regression()]).output().unwrap();
    assert!(ok.status.success());
    let doc: Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert!(doc.get("error").is_none());

    let bad = binary().args(["fit", "--data", &regression(), "--rows", "1-2"]).output().unwrap();
    assert!(!bad.status.success());
    let doc: Value = serde_json::from_slice(&bad.stdout).unwrap();
    assert_eq!(doc["status"], "error");
    assert_eq!(doc["error"]["kind"], "improper_posterior");

    let csv = binary().args(["fit", "--data", &regression(), "--rows", "1-2", "--format", "csv"]).output().unwrap();
    assert!(!csv.status.success());
    let doc: Value = serde_json::from_slice(&csv.stdout).unwrap();
    assert_eq!(doc["error"]["kind"], "improper_posterior");
}

#[test]
fn parse_errors_are_reported_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "x,y\n").unwrap();
    let out = binary().args(["fit", "--data", empty.to_str().unwrap()]).output().unwrap();
    assert!(!out.status.success());
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["error"]["kind"], "parse");
    assert!(doc["error"]["message"].as_str().unwrap().contains("no data rows"));

    let ragged = dir.path().join("ragged.csv");
    std::fs::write(&ragged, "x,y\n0,1\n1,2\n2\n3,4\n").unwrap();
    let doc = report(&["fit", "--data", ragged.to_str().unwrap()]);
    assert_eq!(doc["error"]["line"], 4);

    let text = dir.path().join("text.csv");
    std::fs::write(&text, "x,y\n0,1\n1,abc\n").unwrap();
    let doc = report(&["fit", "--data", text.to_str().unwrap()]);
    assert_eq!(doc["error"]["line"], 3);
    assert!(doc["error"]["message"].as_str().unwrap().contains("abc"));
}

#[test]
fn regression_fixture_parses_to_ten_rows() {
    let table = read_table_path(Path::new(&regression())).unwrap();
    let data = regression_dataset(&table, true).unwrap();
    assert_eq!((data.n(), data.k()), (10, 2));
    assert_eq!(data.design().column(1).iter().copied().collect::<Vec<_>>(), REGRESSION_X.to_vec());
    assert_eq!(data.response().iter().copied().collect::<Vec<_>>(), REGRESSION_Y.to_vec());
}

#[test]
fn dataset_csv_round_trip_is_exact() {
    let data = regression_example();
    let scaled = nibr_core::Dataset::new(data.design() * (1.0 / 3.0), data.response().map(|y| y * std::f64::consts::PI)).unwrap();
    for d in [data, scaled] {
        let mut buf = Vec::new();
        write_dataset_csv(&d, &mut buf).unwrap();
        let back = regression_dataset(&read_table(buf.as_slice()).unwrap(), false).unwrap();
        assert_eq!(back, d);
    }
}

#[test]
fn plot_data_and_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = binary()
        .env(OUTPUT_DIR_ENV, dir.path())
        .args(["predict", "--data", &regression(), "--rows", "1-6", "--points", "4", "--emit-plot", "band.csv", "--output", "report.json"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let plot = std::fs::read_to_string(dir.path().join("band.csv")).unwrap();
    let mut lines = plot.lines();
    assert_eq!(lines.next(), Some("grid_x,center,lower,upper"));
    assert_eq!(lines.count(), 4);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(doc["command"], "predict");

    let sweep = dir.path().join("sweep.csv");
    let doc = report(&["compare-priors", "--data", &regression(), "--rows", "1-6", "--holdout", "7", "--emit-plot", sweep.to_str().unwrap()]);
    assert_eq!(doc["status"], "ok");
    let text = std::fs::read_to_string(&sweep).unwrap();
    assert!(text.starts_with("q,log_evidence,"));
    assert_eq!(text.lines().count(), 7);

    let doc = report(&["fit", "--data", &regression(), "--emit-plot", sweep.to_str().unwrap()]);
    assert_eq!(doc["error"]["kind"], "invalid_config");
}

#[test]
fn csv_format_prints_the_result_table() {
    let out = run(&cli(&["compare-priors", "--data", &regression(), "--rows", "1-6", "--q-list", "1,2", "--format", "csv"]));
    assert_eq!(out.exit_code, 0);
    let lines: Vec<&str> = out.text.lines().collect();
    assert_eq!(lines[0], "q,log_evidence,log_joint_predictive,log_conditional_predictive");
    assert_eq!(lines.len(), 3);
}

#[test]
fn fatigue_report_orders_lives() {
    let doc = report(&["fatigue", "--data", &fatigue()]);
    assert_eq!(doc["status"], "ok");
    assert_eq!(doc["config"]["holdout"], serde_json::json!([6]));
    assert_eq!(doc["config"]["predictive"], "mean-response");
    assert_eq!(doc["result"]["bayes_exceeds_least_squares"], true);
    assert_eq!(doc["result"]["lives"].as_array().unwrap().len(), 50);
    assert_eq!(doc["result"]["comparison"]["best_fit_q"].as_f64(), Some(2.0));
    assert_eq!(doc["result"]["comparison"]["best_pred_q"].as_f64(), Some(2.0));
    assert_eq!(doc["result"]["fit"]["alpha_star"].as_f64(), Some(3.0));

    let wrong = report(&["fatigue", "--data", &regression()]);
    assert_eq!(wrong["error"]["kind"], "parse");
}

/// Flags reproducing a report's resolved configuration.
fn args_from_config(command: &str, config: &Map<String, Value>) -> Vec<String> {
    let num = |v: &Value| v.as_f64().map(|x| x.to_string()).unwrap_or_else(|| v.to_string());
    let list = |v: &Value| v.as_array().unwrap().iter().map(num).collect::<Vec<_>>().join(",");
    let mut args = vec![command.to_string()];
    for (key, v) in config {
        let flag = |name: &str, value: String| vec![format!("--{name}"), value];
        let extra = match key.as_str() {
            "data" => flag("data", v.as_str().unwrap().to_string()),
            "format" | "normalization" | "predictive" => flag(key, v.as_str().unwrap().to_string()),
            "intercept" => flag("intercept", v.to_string()),
            "rows" | "holdout" => flag(key, list(v)),
            "q_list" => flag("q-list", list(v)),
            "q" | "level" | "pof" => flag(key, num(v)),
            "draws" | "seed" | "points" => flag(key, v.to_string()),
            "burn_in" => flag("burn-in", v.to_string()),
            "grid_resolution" => flag("grid-resolution", v.to_string()),
            "sigma_support" => [flag("sigma-min", num(&v[0])), flag("sigma-max", num(&v[1]))].concat(),
            "strain_range" => [flag("strain-min", num(&v[0])), flag("strain-max", num(&v[1]))].concat(),
            "at" => flag("at", v.as_array().unwrap().iter().map(list).collect::<Vec<_>>().join(";")),
            "n" | "k" | "m" | "fit_rows" | "sigma_support_source" | "rng" => vec![],
            other => panic!("config key {other} has no flag"),
        };
        args.extend(extra);
    }
    args
}

#[test]
fn reports_embed_enough_configuration_to_rerun() {
    for args in sample_commands() {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let first = report(&refs);
        if first["status"] != "ok" {
            continue;
        }
        let command = first["command"].as_str().unwrap();
        let rerun_args = args_from_config(command, first["config"].as_object().unwrap());
        let refs: Vec<&str> = rerun_args.iter().map(String::as_str).collect();
        let mut second = report(&refs);
        assert_eq!(first["result"], second["result"], "{rerun_args:?}");
        // provenance of the support differs by construction
        let mut first = first;
        for doc in [&mut first, &mut second] {
            doc["config"].as_object_mut().unwrap().remove("sigma_support_source");
        }
        assert_eq!(first["config"], second["config"], "{rerun_args:?}");
    }
}

#[test]
fn emitted_chain_has_sigma2_column() {
    let dir = tempfile::tempdir().unwrap();
    let path: PathBuf = dir.path().join("chain.csv");
    let doc = report(&[
        "mcmc-check", "--data", &regression(), "--rows", "1-6", "--draws", "3000", "--burn-in", "1000", "--emit-plot",
        path.to_str().unwrap(),
    ]);
    assert_eq!(doc["result"]["retained"], 2000);
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.starts_with("theta_1,theta_2,sigma2\n"));
    assert_eq!(text.lines().count(), 2001);
}
