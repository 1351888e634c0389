//! Outer-loop KKT residual and the strong-stationarity certificate.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::problem::{LcqpProblem, PenaltyContext};
use crate::qpsolver::{RowOrigin, StackedConstraints};

/// Default activity tolerance for classifying complementarity sides as active.
pub const ACTIVITY_TOL: f64 = 1e-6;

/// Full KKT residual of the penalized problem at `(x, y)`, in the infinity norm.
///
/// Concatenates the Lagrangian gradient `(Q + rho C)x + g - M'y`, primal infeasibility
/// `min(Mx - lower, 0)`, dual infeasibility `min(y, 0)` and the products `y_i (Mx - lower)_i`.
/// `y` is in stacked row order (see [`StackedConstraints`]).
pub fn stationarity_residual(
    problem: &LcqpProblem,
    ctx: &PenaltyContext,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> f64 {
    stationarity_residual_with(&StackedConstraints::from_problem(problem), problem, ctx, x, y)
}

/// [`stationarity_residual`] with a prebuilt constraint stack.
pub fn stationarity_residual_with(
    constraints: &StackedConstraints,
    problem: &LcqpProblem,
    ctx: &PenaltyContext,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> f64 {
    let grad = ctx.merit_gradient(problem, x) - constraints.matrix.tr_mul(y);
    let slack = constraints.slack(x);
    let mut worst = grad.amax();
    for (s, v) in slack.iter().zip(y.iter()) {
        worst = worst.max(-s).max(-v).max((s * v).abs());
    }
    worst
}

/// Multipliers split by constraint group.
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    /// `Ax >= b`.
    pub general: DVector<f64>,
    /// `Lx >= 0`.
    pub left: DVector<f64>,
    /// `Rx >= 0`.
    pub right: DVector<f64>,
    /// Box rows, as `(origin, multiplier)` in stacked order.
    pub bounds: Vec<(RowOrigin, f64)>,
}

impl Multipliers {
    pub fn new(general: DVector<f64>, left: DVector<f64>, right: DVector<f64>) -> Self {
        Multipliers {
            general,
            left,
            right,
            bounds: Vec::new(),
        }
    }

    /// Split a stacked multiplier vector by row origin.
    pub fn from_stacked(problem: &LcqpProblem, origin: &[RowOrigin], y: &DVector<f64>) -> Self {
        let mut out = Multipliers::new(
            DVector::zeros(problem.n_a()),
            DVector::zeros(problem.n_c()),
            DVector::zeros(problem.n_c()),
        );
        for (o, &v) in origin.iter().zip(y.iter()) {
            match *o {
                RowOrigin::General(i) => out.general[i] = v,
                RowOrigin::CompLeft(i) => out.left[i] = v,
                RowOrigin::CompRight(i) => out.right[i] = v,
                RowOrigin::BoxLower(_) | RowOrigin::BoxUpper(_) => out.bounds.push((*o, v)),
            }
        }
        out
    }

    /// Map multipliers of the penalized problem at penalty `rho` to LCQP multipliers.
    ///
    /// `rho C x = L'(rho Rx) + R'(rho Lx)`, so the penalty gradient is absorbed into the
    /// complementarity multipliers: `y_L - rho Rx` and `y_R - rho Lx`.
    pub fn absorb_penalty(&self, problem: &LcqpProblem, x: &DVector<f64>, rho: f64) -> Self {
        let lx = problem.l() * x;
        let rx = problem.r() * x;
        Multipliers {
            general: self.general.clone(),
            left: &self.left - rx * rho,
            right: &self.right - lx * rho,
            bounds: self.bounds.clone(),
        }
    }

    /// `Qx + g - A'y_A - L'y_L - R'y_R - (bound terms)`.
    pub fn lagrangian_gradient(&self, problem: &LcqpProblem, x: &DVector<f64>) -> DVector<f64> {
        let mut grad = problem.q() * x + problem.g()
            - problem.a().tr_mul(&self.general)
            - problem.l().tr_mul(&self.left)
            - problem.r().tr_mul(&self.right);
        for (o, v) in &self.bounds {
            match *o {
                RowOrigin::BoxLower(j) => grad[j] -= v,
                RowOrigin::BoxUpper(j) => grad[j] += v,
                _ => unreachable!("only box rows are stored in `bounds`"),
            }
        }
        grad
    }
}

/// Active index sets of the complementarity pairs at a point.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StationaritySets {
    /// `(Lx)_i` active.
    pub left: Vec<usize>,
    /// `(Rx)_i` active.
    pub right: Vec<usize>,
    /// Both sides active.
    pub weak: Vec<usize>,
    /// Only `(Lx)_i` active.
    pub strongly_left: Vec<usize>,
    /// Only `(Rx)_i` active.
    pub strongly_right: Vec<usize>,
    /// Neither side active (only possible within the feasibility tolerance).
    pub inactive: Vec<usize>,
}

impl StationaritySets {
    pub fn classify(problem: &LcqpProblem, x: &DVector<f64>, activity_tol: f64) -> Self {
        let lx = problem.l() * x;
        let rx = problem.r() * x;
        let mut sets = StationaritySets::default();
        for i in 0..problem.n_c() {
            let l_act = lx[i].abs() <= activity_tol;
            let r_act = rx[i].abs() <= activity_tol;
            if l_act {
                sets.left.push(i);
            }
            if r_act {
                sets.right.push(i);
            }
            match (l_act, r_act) {
                (true, true) => sets.weak.push(i),
                (true, false) => sets.strongly_left.push(i),
                (false, true) => sets.strongly_right.push(i),
                (false, false) => sets.inactive.push(i),
            }
        }
        sets
    }
}

/// A failed strong-stationarity condition.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Lagrangian gradient too large.
    Stationarity { residual: f64 },
    /// `min(Ax - b, y_A) != 0` (also used for bound rows, with `row` the stacked bound index).
    GeneralComplementarity { row: usize, value: f64 },
    BoundComplementarity { origin: RowOrigin, value: f64 },
    /// `y_L,i != 0` although only `(Rx)_i` is active.
    LeftMultiplier { pair: usize, value: f64 },
    /// `y_R,i != 0` although only `(Lx)_i` is active.
    RightMultiplier { pair: usize, value: f64 },
    /// Negative multiplier on a weakly active pair.
    WeaklyActiveSign { pair: usize, left: f64, right: f64 },
    /// Neither side active but a multiplier is nonzero.
    InactivePair { pair: usize, left: f64, right: f64 },
}

/// Itemized outcome of [`check_strong_stationarity`].
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub holds: bool,
    pub violated: Vec<Violation>,
    pub sets: StationaritySets,
    pub lagrangian_residual: f64,
}

/// Check the strong-stationarity conditions of the LCQP at `(x, y)`.
///
/// `y` are LCQP multipliers (after [`Multipliers::absorb_penalty`] when they come from the
/// penalized problem). All conditions are checked to `activity_tol`. Fails with
/// [`Error::NotFeasible`] if `x` violates the constraints or complementarity beyond it.
pub fn check_strong_stationarity(
    problem: &LcqpProblem,
    x: &DVector<f64>,
    y: &Multipliers,
    activity_tol: f64,
) -> Result<Certificate> {
    let violation = problem.inequality_violation(x);
    if violation > activity_tol {
        return Err(Error::NotFeasible {
            reason: format!("inequality violated by {violation:e}"),
        });
    }
    let phi = problem.complementarity_residual(x);
    if phi > activity_tol {
        return Err(Error::NotFeasible {
            reason: format!("complementarity product {phi:e}"),
        });
    }

    let sets = StationaritySets::classify(problem, x, activity_tol);
    let mut violated = Vec::new();

    let lagrangian_residual = y.lagrangian_gradient(problem, x).amax();
    if lagrangian_residual > activity_tol {
        violated.push(Violation::Stationarity {
            residual: lagrangian_residual,
        });
    }

    let ax = problem.a() * x;
    for i in 0..problem.n_a() {
        let value = (ax[i] - problem.b()[i]).min(y.general[i]);
        if value.abs() > activity_tol {
            violated.push(Violation::GeneralComplementarity { row: i, value });
        }
    }
    for &(origin, mult) in &y.bounds {
        let slack = match origin {
            RowOrigin::BoxLower(j) => x[j] - problem.lb()[j],
            RowOrigin::BoxUpper(j) => problem.ub()[j] - x[j],
            _ => unreachable!("only box rows are stored in `bounds`"),
        };
        let value = slack.min(mult);
        if value.abs() > activity_tol {
            violated.push(Violation::BoundComplementarity { origin, value });
        }
    }

    for &i in &sets.strongly_right {
        if y.left[i].abs() > activity_tol {
            violated.push(Violation::LeftMultiplier {
                pair: i,
                value: y.left[i],
            });
        }
    }
    for &i in &sets.strongly_left {
        if y.right[i].abs() > activity_tol {
            violated.push(Violation::RightMultiplier {
                pair: i,
                value: y.right[i],
            });
        }
    }
    for &i in &sets.weak {
        if y.left[i] < -activity_tol || y.right[i] < -activity_tol {
            violated.push(Violation::WeaklyActiveSign {
                pair: i,
                left: y.left[i],
                right: y.right[i],
            });
        }
    }
    for &i in &sets.inactive {
        if y.left[i].abs() > activity_tol || y.right[i].abs() > activity_tol {
            violated.push(Violation::InactivePair {
                pair: i,
                left: y.left[i],
                right: y.right[i],
            });
        }
    }

    Ok(Certificate {
        holds: violated.is_empty(),
        violated,
        sets,
        lagrangian_residual,
    })
}
