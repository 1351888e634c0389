//! Optimal control of a switched scalar system, transcribed into an LCQP.
//!
//! ```text
//!     minimize   int_0^2 x(t)^2 dt + (x(2) - 5/3)^2
//!     s.t.       x'(t) = 2 - sgn(x(t)),   x(0) = x0 free
//! ```
//!
//! The state moves with slope 3 while negative and slope 1 while positive. With implicit Euler
//! on `N` steps of length `h = 2/N` the dynamics become `x_k = x_{k-1} + h (3 - 2 y_k)`, where the
//! switch `y_k in [0, 1]` and the negative part `lambda_k` of `x_k` are fixed by
//!
//! ```text
//!     0 <= x_k + lambda_k  _|_  1 - y_k >= 0
//!     0 <= lambda_k        _|_  y_k     >= 0
//! ```
//!
//! The affine side `1 - y_k` equals `(x_k - x_{k-1} - h y_k) / (3h)` on the dynamics, which keeps
//! every complementarity row homogeneous.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::oracle::golden_section_min;
use crate::problem::{LcqpProblem, ProblemData};
use crate::solver::SolverResult;

pub const HORIZON: f64 = 2.0;
pub const TERMINAL_TARGET: f64 = 5.0 / 3.0;
pub const DEFAULT_REGULARIZATION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IvocpConfig {
    pub n_steps: usize,
    /// Diagonal weight on `x_0` and the algebraic variables.
    pub regularization_eps: f64,
}

impl IvocpConfig {
    pub fn new(n_steps: usize) -> Self {
        IvocpConfig {
            n_steps,
            regularization_eps: DEFAULT_REGULARIZATION,
        }
    }

    pub fn step(&self) -> f64 {
        HORIZON / self.n_steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps < 2 {
            return Err(Error::InvalidOption {
                name: "N".into(),
                reason: format!("need at least 2 steps, got {}", self.n_steps),
            });
        }
        if !(self.regularization_eps > 0.0 && self.regularization_eps.is_finite()) {
            return Err(Error::InvalidOption {
                name: "regularization_eps".into(),
                reason: "must be positive and finite".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variable {
    /// `x_k`, `k = 0..=N`.
    State(usize),
    /// `y_k`, `k = 1..=N`.
    Switch(usize),
    /// `lambda_k`, `k = 1..=N`.
    LambdaMinus(usize),
}

/// Layout `[x_0..x_N, y_1..y_N, lambda_1..lambda_N]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariableMap {
    n_steps: usize,
}

impl VariableMap {
    pub fn new(n_steps: usize) -> Self {
        VariableMap { n_steps }
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n(&self) -> usize {
        3 * self.n_steps + 1
    }

    pub fn index_of(&self, var: Variable) -> Option<usize> {
        let n = self.n_steps;
        match var {
            Variable::State(k) if k <= n => Some(k),
            Variable::Switch(k) if (1..=n).contains(&k) => Some(n + k),
            Variable::LambdaMinus(k) if (1..=n).contains(&k) => Some(2 * n + k),
            _ => None,
        }
    }

    pub fn variable_of(&self, index: usize) -> Option<Variable> {
        let n = self.n_steps;
        match index {
            i if i <= n => Some(Variable::State(i)),
            i if i <= 2 * n => Some(Variable::Switch(i - n)),
            i if i <= 3 * n => Some(Variable::LambdaMinus(i - 2 * n)),
            _ => None,
        }
    }

    fn idx(&self, var: Variable) -> usize {
        self.index_of(var).expect("variable within the horizon")
    }

    pub fn states<'a>(&self, x: &'a DVector<f64>) -> &'a [f64] {
        &x.as_slice()[..=self.n_steps]
    }

    pub fn switches<'a>(&self, x: &'a DVector<f64>) -> &'a [f64] {
        &x.as_slice()[self.n_steps + 1..=2 * self.n_steps]
    }

    pub fn lambdas<'a>(&self, x: &'a DVector<f64>) -> &'a [f64] {
        &x.as_slice()[2 * self.n_steps + 1..]
    }
}

/// The transcribed problem with its variable layout.
#[derive(Debug, Clone)]
pub struct IvocpLcqp {
    pub config: IvocpConfig,
    pub problem: LcqpProblem,
    pub map: VariableMap,
    /// Constant `(5/3)^2` dropped from the terminal cost.
    pub objective_offset: f64,
}

impl IvocpLcqp {
    /// Discretized cost, including the dropped constant.
    pub fn total_objective(&self, x: &DVector<f64>) -> f64 {
        self.problem.objective(x) + self.objective_offset
    }

    /// Forward implicit Euler simulation from `x0`, with `y` and `lambda` consistent with it.
    ///
    /// The result satisfies every constraint up to rounding.
    pub fn forward_simulation(&self, x0: f64) -> DVector<f64> {
        let h = self.config.step();
        let map = &self.map;
        let mut x = DVector::zeros(map.n());
        x[0] = x0;
        let mut prev = x0;
        for k in 1..=map.n_steps() {
            let (state, switch) = if prev + h >= 0.0 {
                (prev + h, 1.0)
            } else if prev + 3.0 * h <= 0.0 {
                (prev + 3.0 * h, 0.0)
            } else {
                (0.0, (3.0 * h + prev) / (2.0 * h))
            };
            x[map.idx(Variable::State(k))] = state;
            x[map.idx(Variable::Switch(k))] = switch;
            x[map.idx(Variable::LambdaMinus(k))] = (-state).max(0.0);
            prev = state;
        }
        x
    }

    /// Largest `|x_k - x_{k-1} - h (3 - 2 y_k)|`.
    pub fn dynamics_residual(&self, x: &DVector<f64>) -> f64 {
        let h = self.config.step();
        let xs = self.map.states(x);
        let ys = self.map.switches(x);
        (1..=self.map.n_steps())
            .map(|k| (xs[k] - xs[k - 1] - h * (3.0 - 2.0 * ys[k - 1])).abs())
            .fold(0.0, f64::max)
    }

    /// Root mean square distance of the states to the optimal analytic trajectory.
    pub fn trajectory_rms(&self, x: &DVector<f64>) -> f64 {
        let reference = AnalyticTrajectory::new(analytic_optimum());
        let h = self.config.step();
        let xs = self.map.states(x);
        let sum: f64 = xs
            .iter()
            .enumerate()
            .map(|(k, v)| (v - reference.state(k as f64 * h)).powi(2))
            .sum();
        (sum / xs.len() as f64).sqrt()
    }
}

pub fn build_ivocp(config: IvocpConfig) -> Result<IvocpLcqp> {
    config.validate()?;
    let n_steps = config.n_steps;
    let h = config.step();
    let eps = config.regularization_eps;
    let map = VariableMap::new(n_steps);
    let n = map.n();
    let x = |k| map.idx(Variable::State(k));
    let y = |k| map.idx(Variable::Switch(k));
    let lam = |k| map.idx(Variable::LambdaMinus(k));

    let mut q = DMatrix::from_diagonal_element(n, n, eps);
    for k in 1..=n_steps {
        q[(x(k), x(k))] = 2.0 * h;
    }
    q[(x(n_steps), x(n_steps))] += 2.0;
    let mut g = DVector::zeros(n);
    g[x(n_steps)] = -2.0 * TERMINAL_TARGET;

    let mut a = DMatrix::zeros(2 * n_steps, n);
    let mut b = DVector::zeros(2 * n_steps);
    let mut l = DMatrix::zeros(2 * n_steps, n);
    let mut r = DMatrix::zeros(2 * n_steps, n);
    for k in 1..=n_steps {
        let row = 2 * (k - 1);
        // x_k - x_{k-1} + 2h y_k = 3h
        for (sign, i) in [(1.0, row), (-1.0, row + 1)] {
            a[(i, x(k))] = sign;
            a[(i, x(k - 1))] = -sign;
            a[(i, y(k))] = sign * 2.0 * h;
            b[i] = sign * 3.0 * h;
        }
        l[(row, x(k))] = 1.0;
        l[(row, lam(k))] = 1.0;
        r[(row, x(k))] = 1.0 / (3.0 * h);
        r[(row, x(k - 1))] = -1.0 / (3.0 * h);
        r[(row, y(k))] = -1.0 / 3.0;
        l[(row + 1, lam(k))] = 1.0;
        r[(row + 1, y(k))] = 1.0;
    }

    let problem = ProblemData {
        q,
        g,
        a,
        b,
        l,
        r,
        lb: None,
        ub: None,
    }
    .validate()?;
    Ok(IvocpLcqp {
        config,
        problem,
        map,
        objective_offset: TERMINAL_TARGET * TERMINAL_TARGET,
    })
}

/// `x_0` of a solve of the transcribed problem.
pub fn extract_x0(result: &SolverResult, map: &VariableMap) -> Result<f64> {
    if result.x.len() != map.n() {
        return Err(Error::IndexMapMismatch {
            expected: map.n(),
            found: result.x.len(),
        });
    }
    Ok(result.x[map.idx(Variable::State(0))])
}

/// The unique solution of the switched ODE from `x0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticTrajectory {
    pub x0: f64,
    /// Time at which a negative state reaches zero.
    pub switch_time: Option<f64>,
}

impl AnalyticTrajectory {
    pub fn new(x0: f64) -> Self {
        let switch_time = (x0 < 0.0).then_some(-x0 / 3.0);
        AnalyticTrajectory { x0, switch_time }
    }

    pub fn state(&self, t: f64) -> f64 {
        match self.switch_time {
            Some(ts) if t < ts => self.x0 + 3.0 * t,
            Some(ts) => t - ts,
            None => self.x0 + t,
        }
    }

    pub fn terminal_state(&self) -> f64 {
        self.state(HORIZON)
    }

    /// `int_0^2 x(t)^2 dt + (x(2) - 5/3)^2` in closed form.
    pub fn objective(&self) -> f64 {
        let integral = match self.switch_time {
            // Falling part contributes -x0^3 / 9, the rest rises linearly from 0.
            Some(ts) if ts < HORIZON => -self.x0.powi(3) / 9.0 + (HORIZON - ts).powi(3) / 3.0,
            Some(_) => ((self.x0 + 3.0 * HORIZON).powi(3) - self.x0.powi(3)) / 9.0,
            None => ((self.x0 + HORIZON).powi(3) - self.x0.powi(3)) / 3.0,
        };
        integral + (self.terminal_state() - TERMINAL_TARGET).powi(2)
    }
}

pub fn analytic_objective(x0: f64) -> f64 {
    AnalyticTrajectory::new(x0).objective()
}

/// Minimizer of [`analytic_objective`] on `[-3, 1]`.
pub fn analytic_optimum() -> f64 {
    golden_section_min(analytic_objective, -3.0, 1.0, 1e-10)
}
