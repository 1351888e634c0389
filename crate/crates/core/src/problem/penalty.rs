use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::LcqpProblem;

/// Penalty parameter together with the shared complementarity matrix `C`.
#[derive(Debug, Clone)]
pub struct PenaltyContext {
    c: Arc<DMatrix<f64>>,
    rho: f64,
}

impl PenaltyContext {
    pub fn new(problem: &LcqpProblem, rho: f64) -> Self {
        PenaltyContext {
            c: problem.c_shared(),
            rho,
        }
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// Same `C`, different penalty.
    pub fn with_rho(&self, rho: f64) -> Self {
        PenaltyContext {
            c: Arc::clone(&self.c),
            rho,
        }
    }

    /// `1/2 x'Cx`, equal to `phi(x)` up to rounding.
    pub fn half_quadratic(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&*self.c * x))
    }

    /// Linearization vector `d = Cx`.
    pub fn linearization(&self, x: &DVector<f64>) -> DVector<f64> {
        &*self.c * x
    }

    /// Merit `psi(x, rho) = 1/2 x'(Q + rho C)x + g'x`, evaluated without forming `Q + rho C`.
    pub fn merit(&self, problem: &LcqpProblem, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(problem.q() * x)) + problem.g().dot(x) + self.rho * self.half_quadratic(x)
    }

    /// Gradient `(Q + rho C)x + g`.
    pub fn merit_gradient(&self, problem: &LcqpProblem, x: &DVector<f64>) -> DVector<f64> {
        problem.q() * x + problem.g() + self.linearization(x) * self.rho
    }
}
