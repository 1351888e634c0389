use nalgebra::DVector;

use crate::problem::{LcqpProblem, PenaltyContext};

/// Steps with `|p|_inf` at or below this are treated as zero.
pub const ZERO_STEP: f64 = 1e-14;

/// Exact minimizer of the merit function on the segment `x + alpha p`, `alpha in [0, 1]`.
///
/// Along the segment the merit is `1/2 alpha^2 q + alpha ell + psi(x)` with
/// `gamma = p'Qp`, `delta = rho p'Cp`, `q = gamma + delta` and `ell = grad psi(x)' p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLength {
    pub alpha: f64,
    pub gamma: f64,
    pub delta: f64,
    pub q: f64,
    pub ell: f64,
}

impl StepLength {
    /// Closed-form choice from the quadratic coefficients.
    ///
    /// If the penalty adds curvature (`delta > 0`) the minimizer `-ell / q` is clamped to
    /// `[0, 1]`. Otherwise the merit curves less than the convex model, whose minimizer on the
    /// segment is the full step, so the merit is minimized at `alpha = 1` as well.
    pub fn from_components(gamma: f64, delta: f64, ell: f64) -> Self {
        let q = gamma + delta;
        let alpha = if delta > 0.0 {
            (-ell / q).clamp(0.0, 1.0)
        } else {
            1.0
        };
        StepLength {
            alpha,
            gamma,
            delta,
            q,
            ell,
        }
    }

    /// Predicted merit change `1/2 alpha^2 q + alpha ell`.
    pub fn predicted_change(&self) -> f64 {
        0.5 * self.alpha * self.alpha * self.q + self.alpha * self.ell
    }
}

/// Step length from the current iterate `x` towards the subproblem minimizer `x_star`.
pub fn optimal_step_length(
    problem: &LcqpProblem,
    ctx: &PenaltyContext,
    x: &DVector<f64>,
    x_star: &DVector<f64>,
) -> StepLength {
    let p = x_star - x;
    let qp = problem.q() * &p;
    let cp = ctx.c() * &p;
    let gamma = p.dot(&qp);
    let delta = ctx.rho() * p.dot(&cp);
    // x'(Q + rho C)p + g'p, with Q and C symmetric.
    let ell = x.dot(&qp) + ctx.rho() * x.dot(&cp) + problem.g().dot(&p);
    if p.amax() <= ZERO_STEP {
        return StepLength {
            alpha: 0.0,
            gamma,
            delta,
            q: gamma + delta,
            ell,
        };
    }
    StepLength::from_components(gamma, delta, ell)
}

/// [`optimal_step_length`] for a step towards the minimizer of the convex subproblem.
///
/// The subproblem optimality conditions give `ell = -gamma - y'(Mx - lower) <= -gamma` for
/// feasible `x`. Close to convergence both sides are of the order of rounding errors and the
/// computed `ell` can violate the bound, or even come out positive, which would stall the
/// iteration at `alpha = 0`. The bound is enforced here.
pub fn subproblem_step_length(
    problem: &LcqpProblem,
    ctx: &PenaltyContext,
    x: &DVector<f64>,
    x_star: &DVector<f64>,
) -> StepLength {
    let raw = optimal_step_length(problem, ctx, x, x_star);
    if raw.alpha == 0.0 && (x_star - x).amax() <= ZERO_STEP {
        return raw;
    }
    StepLength::from_components(raw.gamma, raw.delta, raw.ell.min(-raw.gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::line_search_instance;

    #[test]
    fn interior_minimizer() {
        let s = StepLength::from_components(2.0, 1.0, -1.5);
        assert_eq!(s.q, 3.0);
        assert_eq!(s.alpha, 0.5);
    }

    #[test]
    fn negative_curvature_takes_full_step() {
        assert_eq!(StepLength::from_components(1.0, -0.3, -2.0).alpha, 1.0);
        assert_eq!(StepLength::from_components(1.0, -5.0, -2.0).alpha, 1.0);
        assert_eq!(StepLength::from_components(1.0, 0.0, -1.0).alpha, 1.0);
    }

    #[test]
    fn minimizer_beyond_segment_is_clamped() {
        // -ell / q = 10 / 3 > 1.
        assert_eq!(StepLength::from_components(1.0, 2.0, -10.0).alpha, 1.0);
    }

    #[test]
    fn zero_step() {
        let (p, ctx, x, _) = line_search_instance(2.0, 1.0, -1.5);
        let s = optimal_step_length(&p, &ctx, &x, &x);
        assert_eq!(s.alpha, 0.0);
    }

    #[test]
    fn components_from_vectors() {
        let (p, ctx, x, d) = line_search_instance(2.0, 1.0, -1.5);
        let s = optimal_step_length(&p, &ctx, &x, &(&x + &d));
        assert_eq!((s.gamma, s.delta, s.q, s.ell), (2.0, 1.0, 3.0, -1.5));
        assert_eq!(s.alpha, 0.5);
    }

    #[test]
    fn merit_decrease_matches_prediction() {
        let (p, ctx, x, d) = line_search_instance(1.5, 0.7, -2.2);
        let s = optimal_step_length(&p, &ctx, &x, &(&x + &d));
        let before = ctx.merit(&p, &x);
        let after = ctx.merit(&p, &(&x + &d * s.alpha));
        assert!((after - before - s.predicted_change()).abs() < 1e-14);
    }

    #[test]
    fn subproblem_step_matches_plain_step_away_from_rounding() {
        use crate::problem::two_corner_example;
        use crate::qpsolver::QpWorkspace;
        let p = two_corner_example();
        let ctx = p.penalty_context(3.0);
        let mut ws = QpWorkspace::new(&p).unwrap();
        for x in [[2.0, 0.5], [0.2, 1.3], [0.0, 0.7]] {
            let x = DVector::from_column_slice(&x);
            let c = p.g() + ctx.linearization(&x) * ctx.rho();
            let sol = ws.solve(&c).unwrap();
            let plain = optimal_step_length(&p, &ctx, &x, &sol.x);
            let guarded = subproblem_step_length(&p, &ctx, &x, &sol.x);
            assert!(plain.ell <= -plain.gamma + 1e-14);
            assert!((plain.alpha - guarded.alpha).abs() < 1e-12);
        }
    }
}
