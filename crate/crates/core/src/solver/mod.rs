//! Penalty homotopy with an inner sequential convex programming loop.
//!
//! For a fixed penalty `rho` the merit `psi(x) = 1/2 x'(Q + rho C)x + g'x` is minimized over the
//! polyhedron by repeatedly linearizing the penalty term at the current iterate, solving the
//! resulting strictly convex QP and moving along the step with the exact minimizing step length.
//! When the inner loop is stationary the complementarity residual is checked and `rho` grows by
//! `beta` if it is not small enough.

mod stationarity;
mod step;

use std::time::Instant;

use log::{debug, info, trace};
use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::problem::LcqpProblem;
use crate::qpsolver::{QpWorkspace, RowOrigin, PRIMAL_TOL};

pub use stationarity::{
    check_strong_stationarity, stationarity_residual, stationarity_residual_with, Certificate,
    Multipliers, StationaritySets, Violation, ACTIVITY_TOL,
};
pub use step::{optimal_step_length, subproblem_step_length, StepLength, ZERO_STEP};

/// How the first iterate is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// Minimize the QP without penalty. A supplied `x0` only warm-starts the active set.
    ZeroPenaltyQp,
    /// Start from `x0` if it is feasible. Otherwise start from the QP minimizer with the penalty
    /// linearized at `x0`.
    GivenX0,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub rho0: f64,
    pub beta: f64,
    pub tol_stationarity: f64,
    pub tol_complementarity: f64,
    pub rho_max: f64,
    pub max_inner: usize,
    /// `None` picks [`InitMode::GivenX0`] when `x0` is supplied and
    /// [`InitMode::ZeroPenaltyQp`] otherwise.
    pub init_mode: Option<InitMode>,
    /// Activity tolerance of the strong-stationarity certificate.
    pub activity_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            rho0: 0.01,
            beta: 2.0,
            tol_stationarity: 1e-8,
            tol_complementarity: 1e-10,
            rho_max: 1e8,
            max_inner: 500,
            init_mode: None,
            activity_tol: ACTIVITY_TOL,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, reason: &str| {
            Err(Error::InvalidOption {
                name: name.into(),
                reason: reason.into(),
            })
        };
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return bad("rho0", "must be positive and finite");
        }
        if !(self.beta > 1.0 && self.beta.is_finite()) {
            return bad("beta", "must be greater than 1");
        }
        if !(self.tol_stationarity > 0.0) {
            return bad("tol_stationarity", "must be positive");
        }
        if !(self.tol_complementarity > 0.0) {
            return bad("tol_complementarity", "must be positive");
        }
        if !(self.activity_tol > 0.0) {
            return bad("activity_tol", "must be positive");
        }
        if !(self.rho_max > self.rho0) {
            return bad("rho_max", "must exceed rho0");
        }
        if self.max_inner == 0 {
            return bad("max_inner", "must be at least 1");
        }
        Ok(())
    }

    fn resolve_init(&self, has_x0: bool) -> InitMode {
        self.init_mode.unwrap_or(if has_x0 {
            InitMode::GivenX0
        } else {
            InitMode::ZeroPenaltyQp
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverStatus {
    StationaryPoint,
    PenaltyLimit,
    IterationLimit,
    Infeasible,
}

impl SolverStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverStatus::StationaryPoint => "STATIONARY_POINT",
            SolverStatus::PenaltyLimit => "PENALTY_LIMIT",
            SolverStatus::IterationLimit => "ITERATION_LIMIT",
            SolverStatus::Infeasible => "INFEASIBLE",
        }
    }
}

impl std::fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One inner iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Outer iteration.
    pub k: usize,
    /// Inner iteration within `k`.
    pub j: usize,
    pub rho: f64,
    /// Iterate before the step.
    pub x: DVector<f64>,
    /// `p = x* - x`, with `x*` the subproblem minimizer.
    pub p: DVector<f64>,
    pub step: StepLength,
    /// `|p|_inf`.
    pub step_norm: f64,
    pub merit_before: f64,
    pub merit: f64,
    /// Stationarity residual after the update.
    pub stationarity: f64,
    pub phi: f64,
    pub active_set_changes: usize,
    pub elapsed_secs: f64,
}

/// State at the end of an outer iteration, after the inner loop.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterRecord {
    pub k: usize,
    pub rho: f64,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub stationarity: f64,
    pub phi: f64,
    pub inner_iterations: usize,
    /// `false` when the inner loop hit `max_inner`.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveTrace {
    pub iterations: Vec<IterationRecord>,
    pub outer: Vec<OuterRecord>,
    pub factorization_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub x: DVector<f64>,
    /// QP multipliers of the penalized problem, in stacked row order.
    pub y: DVector<f64>,
    pub row_origin: Vec<RowOrigin>,
    /// LCQP multipliers, with the penalty gradient absorbed into `y_L` and `y_R`.
    pub multipliers: Multipliers,
    pub status: SolverStatus,
    /// `None` when the problem is infeasible or `x` is not complementary within the activity
    /// tolerance.
    pub certificate: Option<Certificate>,
    pub rho: f64,
    pub objective: f64,
    pub phi: f64,
    pub stationarity: f64,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    pub qp_iterations: usize,
    pub factorization_count: usize,
    pub trace: SolveTrace,
}

impl SolverResult {
    pub fn is_certified(&self) -> bool {
        self.certificate.as_ref().is_some_and(|c| c.holds)
    }

    fn infeasible(problem: &LcqpProblem, ws: &QpWorkspace, x0: Option<&DVector<f64>>, rho: f64) -> Self {
        let x = x0.cloned().unwrap_or_else(|| DVector::zeros(problem.n()));
        let y = DVector::zeros(ws.m());
        let origin = ws.constraints().origin.clone();
        SolverResult {
            multipliers: Multipliers::from_stacked(problem, &origin, &y),
            objective: problem.objective(&x),
            phi: problem.complementarity_residual(&x),
            x,
            y,
            row_origin: origin,
            status: SolverStatus::Infeasible,
            certificate: None,
            rho,
            stationarity: f64::INFINITY,
            inner_iterations: 0,
            outer_iterations: 0,
            qp_iterations: 0,
            factorization_count: ws.factorization_count(),
            trace: SolveTrace {
                factorization_count: ws.factorization_count(),
                ..SolveTrace::default()
            },
        }
    }
}

/// Solve an LCQP to a stationary point.
///
/// An infeasible polyhedron is reported through [`SolverStatus::Infeasible`], not as an error.
/// Errors are returned for invalid options, a wrongly sized `x0` and QP subsolver failures after
/// the first solve.
pub fn solve(
    problem: &LcqpProblem,
    options: &SolverOptions,
    x0: Option<&DVector<f64>>,
) -> Result<SolverResult> {
    options.validate()?;
    if let Some(x0) = x0 {
        if x0.len() != problem.n() {
            return Err(Error::dims("x0", problem.n(), x0.len()));
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { field: "x0".into() });
        }
    }
    let start = Instant::now();
    let mut ws = QpWorkspace::new(problem)?;
    let mode = options.resolve_init(x0.is_some());
    let mut qp_iterations = 0;

    let first = match (mode, x0) {
        (InitMode::GivenX0, Some(x0)) if problem.inequality_violation(x0) <= PRIMAL_TOL => {
            Ok((x0.clone(), DVector::zeros(ws.m())))
        }
        (InitMode::GivenX0, Some(x0)) => {
            // Infeasible guess: one linearized QP step from it.
            let c = problem.g() + problem.c() * x0 * options.rho0;
            ws.solve(&c).map(|s| {
                qp_iterations += s.iterations;
                (s.x, s.y)
            })
        }
        (InitMode::GivenX0, None) => {
            return Err(Error::InvalidOption {
                name: "init_mode".into(),
                reason: "GivenX0 requires x0".into(),
            })
        }
        (InitMode::ZeroPenaltyQp, x0) => {
            let warm = match x0 {
                Some(x0) => ws.project(x0).map(|s| qp_iterations += s.iterations),
                None => Ok(()),
            };
            warm.and_then(|_| ws.solve(problem.g())).map(|s| {
                qp_iterations += s.iterations;
                (s.x, s.y)
            })
        }
    };
    let (mut x, mut y) = match first {
        Ok(v) => v,
        Err(Error::InfeasibleQp) => {
            info!("polyhedron is empty");
            return Ok(SolverResult::infeasible(problem, &ws, x0, options.rho0));
        }
        Err(e) => return Err(e),
    };
    debug!("initial point from {mode:?}, objective {:e}", problem.objective(&x));

    let constraints = ws.constraints().clone();
    let mut trace = SolveTrace::default();
    let mut rho = options.rho0;
    let mut k = 0;
    let mut inner_total = 0;
    let (status, stat, phi) = loop {
        let ctx = problem.penalty_context(rho);
        let mut stat = stationarity_residual_with(&constraints, problem, &ctx, &x, &y);
        let mut j = 0;
        let mut converged = true;
        // A small residual alone does not pin x when C is singular; the last QP must also land
        // on x itself.
        let mut step_norm = f64::INFINITY;
        while stat > options.tol_stationarity || step_norm > options.tol_stationarity {
            if j == options.max_inner {
                converged = false;
                break;
            }
            let c = problem.g() + ctx.linearization(&x) * rho;
            let sol = ws.solve(&c)?;
            qp_iterations += sol.iterations;
            let step = subproblem_step_length(problem, &ctx, &x, &sol.x);
            let p = &sol.x - &x;
            step_norm = p.amax();
            let merit_before = ctx.merit(problem, &x);
            let x_before = x.clone();
            x += &p * step.alpha;
            y = sol.y;
            stat = stationarity_residual_with(&constraints, problem, &ctx, &x, &y);
            let record = IterationRecord {
                k,
                j,
                rho,
                x: x_before,
                step_norm,
                p,
                step,
                merit_before,
                merit: ctx.merit(problem, &x),
                stationarity: stat,
                phi: problem.complementarity_residual(&x),
                active_set_changes: sol.active_set_changes,
                elapsed_secs: start.elapsed().as_secs_f64(),
            };
            trace!(
                "k={k} j={j} alpha={:.6e} ell={:.3e} merit={:.12e} stat={stat:.3e}",
                step.alpha,
                step.ell,
                record.merit
            );
            trace.iterations.push(record);
            j += 1;
        }
        inner_total += j;
        let phi = problem.complementarity_residual(&x);
        info!("outer k={k} rho={rho:.3e} inner={j} stat={stat:.3e} phi={phi:.3e}");
        trace.outer.push(OuterRecord {
            k,
            rho,
            x: x.clone(),
            y: y.clone(),
            stationarity: stat,
            phi,
            inner_iterations: j,
            converged,
        });
        if !converged {
            break (SolverStatus::IterationLimit, stat, phi);
        }
        if phi < options.tol_complementarity {
            break (SolverStatus::StationaryPoint, stat, phi);
        }
        let next = rho * options.beta;
        if next > options.rho_max {
            break (SolverStatus::PenaltyLimit, stat, phi);
        }
        rho = next;
        k += 1;
    };

    trace.factorization_count = ws.factorization_count();
    let multipliers =
        Multipliers::from_stacked(problem, &constraints.origin, &y).absorb_penalty(problem, &x, rho);
    let certificate = match check_strong_stationarity(problem, &x, &multipliers, options.activity_tol) {
        Ok(c) => Some(c),
        Err(Error::NotFeasible { .. }) => None,
        Err(e) => return Err(e),
    };
    info!(
        "{status} after {} outer / {inner_total} inner iterations, objective {:e}",
        k + 1,
        problem.objective(&x)
    );
    Ok(SolverResult {
        objective: problem.objective(&x),
        multipliers,
        row_origin: constraints.origin,
        status,
        certificate,
        rho,
        phi,
        stationarity: stat,
        inner_iterations: inner_total,
        outer_iterations: k + 1,
        qp_iterations,
        factorization_count: ws.factorization_count(),
        trace,
        x,
        y,
    })
}
