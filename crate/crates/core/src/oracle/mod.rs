//! Brute-force reference implementations.
//!
//! Nothing here shares code with the active-set subsolver or the SCP loop: QPs are solved by
//! enumerating active sets and solving each KKT system densely, the LCQP global optimum by
//! enumerating every complementarity branch, and the step length by sampling the merit function.
//! Everything is exponential or brute force and only meant for small instances.

mod generate;

pub use generate::{line_search_instance, random_feasible_qp, random_lcqp, RandomQp};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::{LcqpProblem, PenaltyContext};
use crate::qpsolver::{QpWorkspace, StackedConstraints};

/// Largest number of complementarity pairs the branch enumeration accepts.
pub const MAX_BRANCH_PAIRS: usize = 12;
/// Largest number of inequality rows the active-set enumeration accepts.
pub const MAX_ENUMERATION_ROWS: usize = 20;

const KKT_TOL: f64 = 1e-9;

/// Which side of a complementarity pair is pinned to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BranchSide {
    /// `(Lx)_i = 0`, `(Rx)_i >= 0`.
    LeftZero,
    /// `(Rx)_i = 0`, `(Lx)_i >= 0`.
    RightZero,
}

pub type BranchAssignment = Vec<BranchSide>;

/// Outcome of one branch QP.
#[derive(Debug, Clone)]
pub struct BranchReport {
    pub branch: BranchAssignment,
    /// `None` if the branch is infeasible.
    pub solution: Option<(DVector<f64>, f64)>,
}

/// Global LCQP optimum found by enumeration.
#[derive(Debug, Clone)]
pub struct GlobalSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub branch: BranchAssignment,
    pub branches: Vec<BranchReport>,
}

/// Dense reference solve of `min 1/2 x'Qx + c'x  s.t.  M x >= lower` by active-set enumeration.
///
/// Returns `(x, y)` with `Qx + c - M'y = 0`.
pub fn reference_qp_solve(
    q: &DMatrix<f64>,
    c: &DVector<f64>,
    m: &DMatrix<f64>,
    lower: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = q.nrows();
    reference_qp_solve_with_equalities(q, c, &DMatrix::zeros(0, n), &DVector::zeros(0), m, lower)
        .map(|(x, _, y)| (x, y))
}

/// As [`reference_qp_solve`] with additional equality rows `E x = e` that are always active.
///
/// Returns `(x, y_eq, y_ineq)`.
pub fn reference_qp_solve_with_equalities(
    q: &DMatrix<f64>,
    c: &DVector<f64>,
    e: &DMatrix<f64>,
    e_rhs: &DVector<f64>,
    m: &DMatrix<f64>,
    lower: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let n = q.nrows();
    let n_eq = e.nrows();
    let rows = m.nrows();
    if rows > MAX_ENUMERATION_ROWS {
        return Err(Error::InvalidOption {
            name: "rows".into(),
            reason: format!("enumeration supports at most {MAX_ENUMERATION_ROWS} inequality rows"),
        });
    }
    let scale = 1.0 + q.amax() + c.amax() + lower.amax() + e_rhs.amax();

    // Subsets in order of increasing size so the least-degenerate active set is found first.
    let mut subsets: Vec<u32> = (0..(1u32 << rows))
        .filter(|s| (s.count_ones() as usize) + n_eq <= n)
        .collect();
    subsets.sort_by_key(|s| (s.count_ones(), *s));

    for subset in subsets {
        let active: Vec<usize> = (0..rows).filter(|i| subset & (1 << i) != 0).collect();
        let k = n_eq + active.len();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        let mut rhs = DVector::zeros(n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(q);
        for j in 0..n {
            rhs[j] = -c[j];
        }
        for r in 0..k {
            let (row, b) = if r < n_eq {
                (e.row(r).into_owned(), e_rhs[r])
            } else {
                let i = active[r - n_eq];
                (m.row(i).into_owned(), lower[i])
            };
            for j in 0..n {
                kkt[(n + r, j)] = row[j];
                kkt[(j, n + r)] = -row[j];
            }
            rhs[n + r] = b;
        }
        let lu = kkt.clone().full_piv_lu();
        if !lu.is_invertible() {
            continue;
        }
        let Some(sol) = lu.solve(&rhs) else { continue };
        if (&kkt * &sol - &rhs).amax() > 1e-8 * scale {
            continue;
        }
        let x = sol.rows(0, n).into_owned();
        let mult = sol.rows(n, k);
        if (0..active.len()).any(|r| mult[n_eq + r] < -KKT_TOL * scale) {
            continue;
        }
        let slack = m * &x - lower;
        if slack.iter().any(|s| *s < -KKT_TOL * scale) {
            continue;
        }
        let y_eq = mult.rows(0, n_eq).into_owned();
        let mut y = DVector::zeros(rows);
        for (r, &i) in active.iter().enumerate() {
            y[i] = mult[n_eq + r].max(0.0);
        }
        return Ok((x, y_eq, y));
    }
    Err(Error::InfeasibleQp)
}

/// Enumerate all `2^{n_C}` assignments in lexicographic order (`LeftZero` first, pair 0 most
/// significant).
pub fn all_branches(n_c: usize) -> Vec<BranchAssignment> {
    (0..(1usize << n_c))
        .map(|mask| {
            (0..n_c)
                .map(|i| {
                    if mask & (1 << (n_c - 1 - i)) == 0 {
                        BranchSide::LeftZero
                    } else {
                        BranchSide::RightZero
                    }
                })
                .collect()
        })
        .collect()
}

/// Solve the convex QP restricted to one branch. Returns `None` if the branch is infeasible.
pub fn solve_branch(problem: &LcqpProblem, branch: &[BranchSide]) -> Result<Option<DVector<f64>>> {
    let n = problem.n();
    let n_c = problem.n_c();
    if branch.len() != n_c {
        return Err(Error::dims("branch", n_c, branch.len()));
    }
    let zero_row = |i: usize| match branch[i] {
        BranchSide::LeftZero => problem.l().row(i).into_owned(),
        BranchSide::RightZero => problem.r().row(i).into_owned(),
    };
    let free_row = |i: usize| match branch[i] {
        BranchSide::LeftZero => problem.r().row(i).into_owned(),
        BranchSide::RightZero => problem.l().row(i).into_owned(),
    };

    let mut ineq_rows = Vec::new();
    let mut ineq_lower = Vec::new();
    for i in 0..problem.n_a() {
        ineq_rows.push(problem.a().row(i).into_owned());
        ineq_lower.push(problem.b()[i]);
    }
    for i in 0..n_c {
        ineq_rows.push(free_row(i));
        ineq_lower.push(0.0);
    }
    for j in 0..n {
        let mut e = nalgebra::RowDVector::zeros(n);
        if problem.lb()[j].is_finite() {
            e[j] = 1.0;
            ineq_rows.push(e.clone());
            ineq_lower.push(problem.lb()[j]);
        }
        if problem.ub()[j].is_finite() {
            e[j] = -1.0;
            ineq_rows.push(e);
            ineq_lower.push(-problem.ub()[j]);
        }
    }
    let eq_rows: Vec<_> = (0..n_c).map(zero_row).collect();

    let stack = |rows: &[nalgebra::RowDVector<f64>]| {
        if rows.is_empty() {
            DMatrix::zeros(0, n)
        } else {
            DMatrix::from_rows(rows)
        }
    };
    let m = stack(&ineq_rows);
    let lower = DVector::from_vec(ineq_lower);
    let e = stack(&eq_rows);

    let outcome = if m.nrows() <= MAX_ENUMERATION_ROWS {
        reference_qp_solve_with_equalities(
            problem.q(),
            problem.g(),
            &e,
            &DVector::zeros(n_c),
            &m,
            &lower,
        )
        .map(|(x, _, _)| x)
    } else {
        // Too many rows to enumerate: equalities as opposite inequality pairs.
        let neg_e = -&e;
        let all = DMatrix::from_rows(
            &e.row_iter()
                .chain(neg_e.row_iter())
                .chain(m.row_iter())
                .map(|r| r.into_owned())
                .collect::<Vec<_>>(),
        );
        let mut all_lower = DVector::zeros(2 * n_c + lower.len());
        all_lower.rows_mut(2 * n_c, lower.len()).copy_from(&lower);
        let mut ws =
            QpWorkspace::with_constraints(problem.q().clone(), StackedConstraints::general(all, all_lower))?;
        ws.solve(problem.g()).map(|s| s.x)
    };
    match outcome {
        Ok(x) => Ok(Some(x)),
        Err(Error::InfeasibleQp) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Global LCQP optimum by solving the convex QP of every complementarity branch.
pub fn global_solve_by_enumeration(problem: &LcqpProblem) -> Result<GlobalSolution> {
    let n_c = problem.n_c();
    if n_c > MAX_BRANCH_PAIRS {
        return Err(Error::OracleCapExceeded {
            n_c,
            cap: MAX_BRANCH_PAIRS,
        });
    }
    let mut reports = Vec::with_capacity(1 << n_c);
    let mut best: Option<(usize, f64)> = None;
    for (idx, branch) in all_branches(n_c).into_iter().enumerate() {
        let solution = solve_branch(problem, &branch)?.map(|x| {
            let f = problem.objective(&x);
            (x, f)
        });
        if let Some((_, f)) = &solution {
            // First branch wins unless a later one is better beyond rounding.
            let better = match best {
                None => true,
                Some((_, fb)) => *f < fb - 1e-12 * (1.0 + fb.abs()),
            };
            if better {
                best = Some((idx, *f));
            }
        }
        reports.push(BranchReport { branch, solution });
    }
    let (idx, objective) = best.ok_or(Error::AllBranchesInfeasible)?;
    let (x, _) = reports[idx].solution.clone().expect("best branch is feasible");
    Ok(GlobalSolution {
        x,
        objective,
        branch: reports[idx].branch.clone(),
        branches: reports,
    })
}

/// Branch a point lies on: `LeftZero` where `(Lx)_i <= (Rx)_i`.
pub fn branch_of(problem: &LcqpProblem, x: &DVector<f64>) -> BranchAssignment {
    let lx = problem.l() * x;
    let rx = problem.r() * x;
    lx.iter()
        .zip(rx.iter())
        .map(|(l, r)| {
            if l <= r {
                BranchSide::LeftZero
            } else {
                BranchSide::RightZero
            }
        })
        .collect()
}

/// Distance from `x` to the closest branch-QP minimizer among the branches `x` lies on.
///
/// For pairs where both sides are within `activity_tol` of zero either branch is tried.
pub fn branch_stationarity_gap(
    problem: &LcqpProblem,
    x: &DVector<f64>,
    activity_tol: f64,
) -> Result<f64> {
    let lx = problem.l() * x;
    let rx = problem.r() * x;
    let base = branch_of(problem, x);
    let weak: Vec<usize> = (0..problem.n_c())
        .filter(|&i| lx[i].abs() <= activity_tol && rx[i].abs() <= activity_tol)
        .collect();
    let mut best = f64::INFINITY;
    for mask in 0..(1usize << weak.len().min(MAX_BRANCH_PAIRS)) {
        let mut branch = base.clone();
        for (k, &i) in weak.iter().enumerate() {
            branch[i] = if mask & (1 << k) == 0 {
                BranchSide::LeftZero
            } else {
                BranchSide::RightZero
            };
        }
        if let Some(xb) = solve_branch(problem, &branch)? {
            best = best.min((xb - x).amax());
        }
    }
    Ok(best)
}

/// Argmin of `psi(x + alpha p, rho)` over `alpha in {0, res, 2 res, ..., 1}` (least index on ties).
pub fn grid_line_search(
    problem: &LcqpProblem,
    ctx: &PenaltyContext,
    x: &DVector<f64>,
    p: &DVector<f64>,
    resolution: f64,
) -> f64 {
    assert!(resolution > 0.0, "resolution must be positive");
    let steps = (1.0 / resolution).floor() as usize;
    let mut samples: Vec<f64> = (0..=steps).map(|k| k as f64 * resolution).collect();
    if *samples.last().expect("non-empty") < 1.0 {
        samples.push(1.0);
    }
    // psi(x + alpha p) - psi(x) is a quadratic in alpha vanishing at 0. It is pinned down by two
    // evaluations with the dense matrix Q + rho C, written as differences so that they do not
    // cancel against psi(x), then sampled.
    let h = problem.q() + ctx.c() * ctx.rho();
    let diff = |alpha: f64| {
        let step = p * alpha;
        let mid = x + &step * 0.5;
        step.dot(&(&h * mid)) + problem.g().dot(&step)
    };
    let (fh, f1) = (diff(0.5), diff(1.0));
    let interp = |a: f64| {
        // Lagrange basis on {0, 1/2, 1}; the node at 0 carries the value 0.
        -fh * 4.0 * a * (a - 1.0) + f1 * 2.0 * a * (a - 0.5)
    };
    let mut best = (0.0, f64::INFINITY);
    for alpha in samples {
        let val = interp(alpha);
        if val < best.1 {
            best = (alpha, val);
        }
    }
    best.0
}

/// Minimizer of a unimodal `f` on `[lo, hi]` by golden-section search, to interval width `tol`.
pub fn golden_section_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    assert!(lo < hi && tol > 0.0);
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}
