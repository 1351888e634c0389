//! One PASS/FAIL line per acceptance criterion. Exits nonzero if any criterion fails.

use std::time::{Duration, Instant};

use lcqp::oracle::{
    branch_stationarity_gap, global_solve_by_enumeration, grid_line_search, line_search_instance,
    random_feasible_qp, random_lcqp, reference_qp_solve,
};
use lcqp::problem::two_corner_example;
use lcqp::qpsolver::StackedConstraints;
use lcqp::solver::{
    optimal_step_length, solve, stationarity_residual, IterationRecord, SolverOptions,
    SolverResult, SolverStatus, StepLength,
};
use lcqp::transcription::{analytic_optimum, build_ivocp, extract_x0, IvocpConfig};
use lcqp::{LcqpProblem, QpWorkspace};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRID_RESOLUTION: f64 = 1e-6;
const GRID_AGREEMENT: f64 = 2e-6;

struct Verdict {
    id: usize,
    name: &'static str,
    failures: Vec<String>,
    detail: String,
}

impl Verdict {
    fn new(id: usize, name: &'static str) -> Self {
        Verdict {
            id,
            name,
            failures: Vec::new(),
            detail: String::new(),
        }
    }

    fn require(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn print(&self) {
        let tag = if self.passed() { "PASS" } else { "FAIL" };
        println!("{tag} criterion {}: {} ({})", self.id, self.name, self.detail);
        for f in self.failures.iter().take(5) {
            println!("    {f}");
        }
        if self.failures.len() > 5 {
            println!("    ... {} more", self.failures.len() - 5);
        }
    }
}

/// Solves whose traces feed the descent and fixed-point criteria.
struct Solved {
    label: String,
    problem: LcqpProblem,
    tol_stationarity: f64,
    result: SolverResult,
}

fn descent_failures(s: &Solved, out: &mut Vec<String>) {
    for it in &s.result.trace.iterations {
        if it.step_norm > 1e-12 && it.step.ell >= 0.0 {
            out.push(format!("{} k={} j={}: ell = {:e}", s.label, it.k, it.j, it.step.ell));
        }
        if it.merit > it.merit_before + 1e-12 * (1.0 + it.merit_before.abs()) {
            out.push(format!(
                "{} k={} j={}: merit {} -> {}",
                s.label, it.k, it.j, it.merit_before, it.merit
            ));
        }
    }
}

fn fixed_point_failures(s: &Solved, out: &mut Vec<String>) -> usize {
    let mut ws = QpWorkspace::new(&s.problem).unwrap();
    let mut checked = 0;
    for rec in s.result.trace.outer.iter().filter(|r| r.converged) {
        let c = s.problem.g() + s.problem.c() * &rec.x * rec.rho;
        let sol = ws.solve(&c).unwrap();
        let moved = (&sol.x - &rec.x).amax();
        if moved > 10.0 * s.tol_stationarity {
            out.push(format!("{} k={}: re-solve moved {moved:e}", s.label, rec.k));
        }
        checked += 1;
    }
    checked
}

fn random_instance(rng: &mut ChaCha8Rng) -> LcqpProblem {
    let n_c = rng.gen_range(1..=3);
    let n = rng.gen_range(2 * n_c..=6);
    let n_a = rng.gen_range(0..=3);
    random_lcqp(rng, n, n_a, n_c)
}

fn fig1_options() -> SolverOptions {
    SolverOptions {
        rho0: 1.0,
        ..Default::default()
    }
}

fn criterion_1(solved: &mut Vec<Solved>) -> Verdict {
    let mut v = Verdict::new(1, "two-corner problem, 100 seeded guesses");
    let problem = two_corner_example();
    let oracle = global_solve_by_enumeration(&problem).unwrap();
    let options = fig1_options();
    let corners = [DVector::from_vec(vec![1.0, 0.0]), DVector::from_vec(vec![0.0, 1.0])];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut elapsed = Duration::ZERO;
    let mut hits = [0usize; 2];
    for run in 0..100 {
        let x0 = DVector::from_fn(2, |_, _| rng.gen_range(-2.0..=2.0));
        let start = Instant::now();
        let result = solve(&problem, &options, Some(&x0)).unwrap();
        elapsed += start.elapsed();
        let dist: Vec<f64> = corners.iter().map(|c| (&result.x - c).amax()).collect();
        let corner = if dist[0] <= dist[1] { 0 } else { 1 };
        hits[corner] += 1;
        v.require(result.status == SolverStatus::StationaryPoint, || {
            format!("run {run}: status {}", result.status)
        });
        v.require(dist[corner] <= 1e-6, || format!("run {run}: x = {:?}", result.x.as_slice()));
        v.require(result.x.amax() > 1e-6, || format!("run {run}: ended at the origin"));
        v.require((result.objective - oracle.objective).abs() <= 1e-8, || {
            format!("run {run}: objective {} vs oracle {}", result.objective, oracle.objective)
        });
        v.require(result.phi <= 1e-10, || format!("run {run}: phi {:e}", result.phi));
        v.require(result.is_certified(), || format!("run {run}: certificate fails"));
        solved.push(Solved {
            label: format!("fig1 run {run}"),
            problem: problem.clone(),
            tol_stationarity: options.tol_stationarity,
            result,
        });
    }
    v.require(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"));
    v.detail = format!(
        "rho0 = 1, corners (1,0)/(0,1) hit {}/{}, oracle {}, {:.3} s",
        hits[0],
        hits[1],
        oracle.objective,
        elapsed.as_secs_f64()
    );
    v
}

fn criterion_2(solved: &mut Vec<Solved>) -> Verdict {
    let mut v = Verdict::new(2, "switched-system benchmark, N = 50, 100 seeded runs");
    let inst = build_ivocp(IvocpConfig::new(50)).unwrap();
    let options = SolverOptions::default();
    let target = analytic_optimum();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut elapsed = Duration::ZERO;
    let (mut sum_phi, mut sum_dist) = (0.0, 0.0);
    let mut not_stationary = 0;
    for run in 0..100 {
        let x0 = inst.forward_simulation(rng.gen_range(-2.0..=2.0));
        let start = Instant::now();
        let result = solve(&inst.problem, &options, Some(&x0)).unwrap();
        elapsed += start.elapsed();
        if result.status != SolverStatus::StationaryPoint {
            not_stationary += 1;
        }
        sum_phi += result.phi;
        sum_dist += (extract_x0(&result, &inst.map).unwrap() - target).abs();
        solved.push(Solved {
            label: format!("N=50 run {run}"),
            problem: inst.problem.clone(),
            tol_stationarity: options.tol_stationarity,
            result,
        });
    }
    let (mean_phi, mean_dist) = (sum_phi / 100.0, sum_dist / 100.0);
    v.require(mean_phi <= 1e-10, || format!("mean complementarity {mean_phi:e} > 1e-10"));
    v.require(mean_dist <= 0.05, || format!("mean |x0 - x0*| = {mean_dist:.5} > 0.05"));
    v.require(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"));
    v.detail = format!(
        "mean phi {mean_phi:.2e}, mean |x0 - x0*| {mean_dist:.5}, {not_stationary} not stationary, {:.2} s",
        elapsed.as_secs_f64()
    );
    v
}

fn criterion_3(solved: &[Solved]) -> Verdict {
    let mut v = Verdict::new(3, "one factorization per solve");
    for s in solved {
        v.require(s.result.factorization_count == 1, || {
            format!("{}: {} factorizations", s.label, s.result.factorization_count)
        });
    }
    v.detail = format!("{} solves", solved.len());
    v
}

fn criterion_4(solved: &mut Vec<Solved>) -> Verdict {
    let mut v = Verdict::new(4, "descent direction and monotone merit");
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let options = SolverOptions::default();
    for i in 0..200 {
        let problem = random_instance(&mut rng);
        let result = solve(&problem, &options, None).unwrap();
        solved.push(Solved {
            label: format!("random {i}"),
            problem,
            tol_stationarity: options.tol_stationarity,
            result,
        });
    }
    let mut failures = Vec::new();
    for s in solved.iter() {
        descent_failures(s, &mut failures);
    }
    v.failures = failures;
    let iterations: usize = solved.iter().map(|s| s.result.trace.iterations.len()).sum();
    v.detail = format!("{iterations} inner iterations over {} solves", solved.len());
    v
}

fn grid_mismatch(
    problem: &LcqpProblem,
    rho: f64,
    x: &DVector<f64>,
    p: &DVector<f64>,
) -> Option<(f64, f64)> {
    let ctx = problem.penalty_context(rho);
    let grid = grid_line_search(problem, &ctx, x, p, GRID_RESOLUTION);
    let step = optimal_step_length(problem, &ctx, x, &(x + p));
    ((step.alpha - grid).abs() > GRID_AGREEMENT).then_some((step.alpha, grid))
}

fn criterion_5() -> Verdict {
    let mut v = Verdict::new(5, "closed-form step length against grid search");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut interior = 0;
    for _ in 0..1000 {
        let gamma = 10f64.powf(rng.gen_range(-2.0..1.0));
        let delta = rng.gen_range(-10.0..10.0);
        let ell = if delta > 0.0 {
            rng.gen_range(-20.0..2.0)
        } else {
            -gamma - rng.gen_range(0.0..10.0)
        };
        let (problem, _, x, p) = line_search_instance(gamma, delta, ell);
        let expected = StepLength::from_components(gamma, delta, ell);
        if expected.alpha > 0.0 && expected.alpha < 1.0 {
            interior += 1;
        }
        if let Some((a, g)) = grid_mismatch(&problem, 1.0, &x, &p) {
            v.failures.push(format!("({gamma}, {delta}, {ell}): {a} vs grid {g}"));
        }
    }

    let mut iterates: Vec<(LcqpProblem, IterationRecord)> = Vec::new();
    let fig = two_corner_example();
    while iterates.len() < 100 {
        let (problem, options, x0) = if iterates.len() % 2 == 0 {
            let x0 = DVector::from_fn(2, |_, _| rng.gen_range(-2.0..2.0));
            (fig.clone(), fig1_options(), Some(x0))
        } else {
            (random_lcqp(&mut rng, 6, 2, 3), SolverOptions::default(), None)
        };
        let result = solve(&problem, &options, x0.as_ref()).unwrap();
        let pick = rng.gen_range(0..3);
        if let Some(rec) = result.trace.iterations.iter().filter(|r| r.step_norm > 1e-4).nth(pick) {
            iterates.push((problem, rec.clone()));
        }
    }
    for (problem, rec) in &iterates {
        if let Some((a, g)) = grid_mismatch(problem, rec.rho, &rec.x, &rec.p) {
            v.failures.push(format!("iterate k={} j={}: {a} vs grid {g}", rec.k, rec.j));
        }
    }
    v.detail = format!("1000 triples ({interior} interior), 100 solver iterates");
    v
}

fn criterion_6(solved: &[Solved]) -> Verdict {
    let mut v = Verdict::new(6, "fixed points and constructed KKT points");
    let mut checked = 0;
    for s in solved {
        checked += fixed_point_failures(s, &mut v.failures);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut built = 0;
    let mut worst = 0.0_f64;
    while built < 50 {
        let base = random_instance(&mut rng);
        let rho = 10f64.powf(rng.gen_range(-2.0..3.0));
        let cons = StackedConstraints::from_problem(&base);
        let x = DVector::from_fn(base.n(), |_, _| {
            if rng.gen_bool(0.5) {
                0.0
            } else {
                rng.gen_range(0.0..0.1)
            }
        });
        let slack = cons.slack(&x);
        if slack.min() < 0.0 {
            continue;
        }
        let y = DVector::from_fn(cons.rows(), |i, _| {
            if slack[i] == 0.0 {
                rng.gen_range(0.0..2.0)
            } else {
                0.0
            }
        });
        let mut data = base.data().clone();
        data.g = cons.matrix.tr_mul(&y) - (base.q() + base.c() * rho) * &x;
        let problem = data.validate().unwrap();
        let res = stationarity_residual(&problem, &problem.penalty_context(rho), &x, &y);
        worst = worst.max(res);
        v.require(res <= 1e-8, || format!("constructed point {built}: residual {res:e}"));
        built += 1;
    }
    v.detail = format!("{checked} converged outer iterates, 50 KKT points (worst {worst:.1e})");
    v
}

fn criterion_7() -> Verdict {
    let mut v = Verdict::new(7, "global oracle and reference QP agreement");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let options = SolverOptions::default();
    let mut worst_gap = 0.0_f64;
    for trial in 0..200 {
        let problem = random_instance(&mut rng);
        let oracle = global_solve_by_enumeration(&problem).unwrap();
        let result = solve(&problem, &options, None).unwrap();
        v.require(result.objective >= oracle.objective - 1e-8, || {
            format!("instance {trial}: {} below oracle {}", result.objective, oracle.objective)
        });
        let gap = branch_stationarity_gap(&problem, &result.x, options.activity_tol).unwrap();
        worst_gap = worst_gap.max(gap);
        v.require(gap <= 1e-6, || format!("instance {trial}: branch gap {gap:e}"));
    }

    let mut worst_qp = 0.0_f64;
    for trial in 0..500 {
        let n = rng.gen_range(1..=8);
        let m = rng.gen_range(0..=12);
        let qp = random_feasible_qp(&mut rng, n, m);
        let (x_ref, _) = reference_qp_solve(&qp.q, &qp.c, &qp.m, &qp.lower).unwrap();
        let cons = StackedConstraints::general(qp.m.clone(), qp.lower.clone());
        let mut ws = QpWorkspace::with_constraints(qp.q.clone(), cons).unwrap();
        let err = (&ws.solve(&qp.c).unwrap().x - &x_ref).amax();
        worst_qp = worst_qp.max(err);
        v.require(err <= 1e-8, || format!("QP {trial}: deviation {err:e}"));
    }
    v.detail = format!(
        "200 instances (worst branch gap {worst_gap:.1e}), 500 QPs (worst {worst_qp:.1e})"
    );
    v
}

fn criterion_8() -> Verdict {
    let mut v = Verdict::new(8, "benchmark CSV determinism");
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for name in ["first.csv", "second.csv"] {
        let path = dir.path().join(name);
        let args = ["lcqp", "bench", "ivocp", "--N", "25", "--runs", "5", "--seed", "7", "--out"];
        let mut sink = Vec::new();
        let code = lcqp_cli::run(
            args.iter().copied().chain([path.to_str().unwrap()]),
            &mut sink,
            &mut Vec::new(),
        );
        v.require(code == 0, || format!("bench exited with {code}"));
        files.push(std::fs::read_to_string(&path).unwrap_or_default());
    }
    let timing = lcqp_cli::bench::WALL_MS_COLUMN;
    let split = |text: &str| -> (Vec<String>, Vec<String>) {
        let mut rest = Vec::new();
        let mut times = Vec::new();
        for line in text.lines() {
            let mut fields: Vec<&str> = line.split(',').collect();
            if fields.len() == lcqp_cli::bench::COLUMNS.len() {
                times.push(fields.remove(timing).to_string());
            }
            rest.push(fields.join(","));
        }
        (rest, times)
    };
    let (a, ta) = split(&files[0]);
    let (b, tb) = split(&files[1]);
    v.require(a.first().map(String::as_str) == Some(lcqp_cli::CSV_HEADER), || {
        "missing schema header".into()
    });
    v.require(a == b, || "CSV contents differ".into());
    for t in ta.iter().skip(1).chain(tb.iter().skip(1)) {
        v.require(t.parse::<f64>().is_ok_and(|x| x >= 0.0), || format!("bad timing field {t}"));
    }
    v.require(ta.first().map(String::as_str) == Some("wall_ms"), || "timing column moved".into());
    v.detail = format!("{} lines compared", a.len());
    v
}

fn main() {
    let start = Instant::now();
    let mut solved = Vec::new();
    let mut verdicts = vec![criterion_1(&mut solved), criterion_2(&mut solved)];
    verdicts.push(criterion_3(&solved));
    verdicts.push(criterion_4(&mut solved));
    verdicts.push(criterion_5());
    verdicts.push(criterion_6(&solved));
    verdicts.push(criterion_7());
    verdicts.push(criterion_8());
    verdicts.sort_by_key(|v| v.id);
    for v in &verdicts {
        v.print();
    }
    let failed = verdicts.iter().filter(|v| !v.passed()).count();
    println!(
        "acceptance: {} passed, {failed} failed in {:.1} s",
        verdicts.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
