use lcqp::oracle::{BranchSide, GlobalSolution};
use lcqp::solver::SolverResult;
use lcqp::{LcqpProblem, RowOrigin};
use nalgebra::DVector;
use serde_json::{json, Value};

fn vec(v: &DVector<f64>) -> Value {
    json!(v.as_slice())
}

fn origin(o: &RowOrigin) -> String {
    match o {
        RowOrigin::General(i) => format!("A{i}"),
        RowOrigin::CompLeft(i) => format!("L{i}"),
        RowOrigin::CompRight(i) => format!("R{i}"),
        RowOrigin::BoxLower(j) => format!("lb{j}"),
        RowOrigin::BoxUpper(j) => format!("ub{j}"),
    }
}

fn branch(b: &[BranchSide]) -> Value {
    let s: String = b
        .iter()
        .map(|side| match side {
            BranchSide::LeftZero => 'L',
            BranchSide::RightZero => 'R',
        })
        .collect();
    json!(s)
}

pub(crate) fn solve_report(problem: &LcqpProblem, r: &SolverResult) -> Value {
    let certificate = r.certificate.as_ref().map(|c| {
        json!({
            "holds": c.holds,
            "lagrangian_residual": c.lagrangian_residual,
            "violated": c.violated.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>(),
            "weakly_active": c.sets.weak,
        })
    });
    let outer: Vec<Value> = r
        .trace
        .outer
        .iter()
        .map(|o| {
            json!({
                "k": o.k,
                "rho": o.rho,
                "inner_iterations": o.inner_iterations,
                "stationarity": o.stationarity,
                "phi": o.phi,
                "converged": o.converged,
            })
        })
        .collect();
    json!({
        "status": r.status.as_str(),
        "n": problem.n(),
        "n_A": problem.n_a(),
        "n_C": problem.n_c(),
        "objective": r.objective,
        "phi": r.phi,
        "stationarity": r.stationarity,
        "rho": r.rho,
        "x": vec(&r.x),
        "y": vec(&r.y),
        "row_origin": r.row_origin.iter().map(origin).collect::<Vec<_>>(),
        "multipliers": {
            "general": vec(&r.multipliers.general),
            "left": vec(&r.multipliers.left),
            "right": vec(&r.multipliers.right),
        },
        "certificate": certificate,
        "iterations": {
            "outer": r.outer_iterations,
            "inner": r.inner_iterations,
            "qp": r.qp_iterations,
        },
        "factorization_count": r.factorization_count,
        "trace": outer,
    })
}

pub(crate) fn check_report(r: &SolverResult, oracle: &GlobalSolution, gap: Option<f64>) -> Value {
    let feasible = gap.is_some();
    let objective_gap = r.objective - oracle.objective;
    json!({
        "status": r.status.as_str(),
        "solver_objective": if feasible { json!(r.objective) } else { Value::Null },
        "oracle_objective": oracle.objective,
        "objective_gap": if feasible { json!(objective_gap) } else { Value::Null },
        "not_below_oracle": feasible && objective_gap >= -1e-8,
        "branch_stationarity_gap": gap,
        "branch_stationary": gap.is_some_and(|g| g <= 1e-6),
        "x": vec(&r.x),
        "oracle_x": vec(&oracle.x),
        "oracle_branch": branch(&oracle.branch),
        "feasible_branches": oracle.branches.iter().filter(|b| b.solution.is_some()).count(),
    })
}
