use std::path::{Path, PathBuf};

use lcqp::oracle::random_lcqp;
use lcqp::problem::{load_problem_file, save_problem, two_corner_example};
use lcqp::ProblemData;
use lcqp_cli::{run, EXIT_INFEASIBLE, EXIT_LIMIT, EXIT_OK, EXIT_USAGE};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

fn lcqp(args: &[&str]) -> Output {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(std::iter::once("lcqp").chain(args.iter().copied()), &mut out, &mut err);
    Output {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn fig1(dir: &TempDir) -> PathBuf {
    let path = dir.path().join("fig1.json");
    save_problem(&two_corner_example(), &path).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_reaches_a_corner() {
    let dir = tempfile::tempdir().unwrap();
    let path = fig1(&dir);
    let o = lcqp(&["solve", s(&path), "--x0", "2,0.5", "--rho0", "1"]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    let report: Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(report["status"], "STATIONARY_POINT");
    assert!((report["objective"].as_f64().unwrap() + 1.0).abs() <= 1e-8);
    assert_eq!(report["certificate"]["holds"], true);
    assert_eq!(report["factorization_count"], 1);
    let x: Vec<f64> = serde_json::from_value(report["x"].clone()).unwrap();
    assert!((x[0] - 1.0).abs() <= 1e-6 && x[1].abs() <= 1e-6, "{x:?}");
}

#[test]
fn solve_writes_the_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = fig1(&dir);
    let out = dir.path().join("report.json");
    let o = lcqp(&["solve", s(&path), "--x0", "-1,-1.5", "--rho0", "1", "--out", s(&out)]);
    assert_eq!(o.code, EXIT_OK);
    assert!(o.stdout.is_empty());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(report["row_origin"], serde_json::json!(["L0", "R0"]));
    assert!(!report["trace"].as_array().unwrap().is_empty());
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = fig1(&dir);
    for args in [
        vec!["solve", s(&path), "--rho0", "-1"],
        vec!["solve", s(&path), "--beta", "1"],
        vec!["solve", s(&path), "--x0", "1,2,3"],
        vec!["solve", s(&path), "--init", "sideways"],
        vec!["solve", "/nonexistent/problem.json"],
        vec!["frobnicate"],
        vec!["bench", "ivocp", "--N", "1", "--runs", "2"],
    ] {
        let o = lcqp(&args);
        assert_eq!(o.code, EXIT_USAGE, "{args:?}");
        assert!(!o.stderr.is_empty());
    }
    let o = lcqp(&["solve", "/nonexistent/problem.json"]);
    assert!(o.stderr.contains("/nonexistent/problem.json"), "{}", o.stderr);
}

#[test]
fn infeasible_problem_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("infeasible.json");
    let mut data = two_corner_example().data().clone();
    data.a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]);
    data.b = DVector::from_vec(vec![1.0, 0.0]);
    save_problem(&data.validate().unwrap(), &path).unwrap();
    let o = lcqp(&["solve", s(&path)]);
    assert_eq!(o.code, EXIT_INFEASIBLE);
    let report: Value = serde_json::from_str(&o.stdout).unwrap();
    assert_eq!(report["status"], "INFEASIBLE");
}

#[test]
fn limits_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = fig1(&dir);
    let o = lcqp(&["solve", s(&path), "--x0", "2,0.5", "--rho-max", "0.05"]);
    assert_eq!(o.code, EXIT_LIMIT);
    assert!(o.stdout.contains("PENALTY_LIMIT"));
    let o = lcqp(&["solve", s(&path), "--x0", "2,0.5", "--rho0", "1", "--max-inner", "1"]);
    assert_eq!(o.code, EXIT_LIMIT);
    assert!(o.stdout.contains("ITERATION_LIMIT"));
}

#[test]
fn init_modes_are_selectable() {
    let dir = tempfile::tempdir().unwrap();
    let path = fig1(&dir);
    let o = lcqp(&["solve", s(&path), "--init", "given"]);
    assert_eq!(o.code, EXIT_USAGE, "given needs an x0");
    let o = lcqp(&["solve", s(&path), "--init", "qp0", "--x0", "2,0.5"]);
    assert_eq!(o.code, EXIT_OK);
}

#[test]
fn check_matches_the_oracle_on_fig1() {
    let dir = tempfile::tempdir().unwrap();
    let path = fig1(&dir);
    let o = lcqp(&["check", s(&path), "--x0", "2,0.5", "--rho0", "1"]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    let report: Value = serde_json::from_str(&o.stdout).unwrap();
    assert!(report["objective_gap"].as_f64().unwrap().abs() <= 1e-8);
    assert_eq!(report["branch_stationary"], true);
    assert_eq!(report["oracle_objective"], -1.0);
}

#[test]
fn check_on_random_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for i in 0..10 {
        let path = dir.path().join(format!("r{i}.json"));
        save_problem(&random_lcqp(&mut rng, 5, 2, 2), &path).unwrap();
        let o = lcqp(&["check", s(&path)]);
        assert_eq!(o.code, EXIT_OK);
        let report: Value = serde_json::from_str(&o.stdout).unwrap();
        let solver = report["solver_objective"].as_f64().unwrap();
        let oracle = report["oracle_objective"].as_f64().unwrap();
        let gap = report["objective_gap"].as_f64().unwrap();
        assert!(solver >= oracle - 1e-8);
        assert!(solver <= oracle + gap + 1e-12);
        assert_eq!(report["branch_stationary"], true);
    }
}

#[test]
fn check_refuses_large_instances() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.json");
    let n = 40;
    let problem = ProblemData::complementarity_only(
        DMatrix::identity(n, n),
        DVector::from_element(n, -1.0),
        DMatrix::identity(n, n).rows(0, 20).into_owned(),
        DMatrix::identity(n, n).rows(20, 20).into_owned(),
    )
    .validate()
    .unwrap();
    save_problem(&problem, &path).unwrap();
    let o = lcqp(&["check", s(&path)]);
    assert_eq!(o.code, EXIT_USAGE);
    assert!(o.stderr.contains("at most 12"), "{}", o.stderr);
}

#[test]
fn bench_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = lcqp(&["bench", "ivocp", "--N", "25", "--runs", "5", "--seed", "7", "--out", s(p)]);
        assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
        assert!(o.stdout.contains("mean phi"));
    }
    let strip = |p: &Path| -> Vec<String> {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                if f.len() == 13 {
                    f.remove(11);
                }
                f.join(",")
            })
            .collect()
    };
    let (la, lb) = (strip(&a), strip(&b));
    assert_eq!(la, lb);
    assert_eq!(la[0], "# lcqp-bench v1");
    assert_eq!(la.len(), 2 + 5);
}

#[test]
fn bench_to_stdout_keeps_the_table_on_stderr() {
    let o = lcqp(&["bench", "ivocp", "--N", "6,4", "--runs", "2", "--seed", "1", "--jobs", "2"]);
    assert_eq!(o.code, EXIT_OK);
    assert!(o.stdout.starts_with("# lcqp-bench v1\n"));
    let rows: Vec<&str> = o.stdout.lines().skip(2).collect();
    assert!(rows[0].starts_with("ivocp-N6-000,"));
    assert!(rows[3].starts_with("ivocp-N4-001,"));
    assert!(o.stderr.contains("mean phi"));
}

#[test]
fn bench_accuracy_at_n100() {
    let mut config = lcqp_cli::BenchConfig::new(vec![100], 100, 5);
    config.jobs = 0;
    let records = lcqp_cli::run_benchmark(&config).unwrap();
    let summary = lcqp_cli::Summary::from_records(&records);
    let row = summary.row(100).unwrap();
    assert_eq!(row.stationary, 100);
    assert!(row.mean_phi <= 1e-10);
    assert!(row.mean_x0_error <= 0.05, "{}", row.mean_x0_error);
}

#[test]
fn emitted_instance_solves() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ivocp.json");
    let o = lcqp(&["emit", "ivocp", "--N", "20", "--guess", "-0.5", "--out", s(&path)]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    let file = load_problem_file(&path).unwrap();
    assert_eq!(file.problem.n(), 61);
    assert_eq!(file.x0.as_ref().unwrap()[0], -0.5);
    let o = lcqp(&["solve", s(&path)]);
    assert_eq!(o.code, EXIT_OK);
}

#[test]
fn help_exits_cleanly() {
    let o = lcqp(&["--help"]);
    assert_eq!(o.code, EXIT_OK);
    assert!(o.stdout.contains("solve"));
}
