//! Strictly convex QP subsolver over the fixed LCQP polyhedron.
//!
//! Solves
//!
//! ```text
//!     minimize    1/2 x' Q x + c' x
//!     subject to  M x >= lower,       M = [A; L; R; box rows]
//! ```
//!
//! for a sequence of linear terms `c`. `Q` is factorized once (`Q = L L'`) when the workspace is
//! created and every solve works in the transformed variable `z = L' x`, where the problem is the
//! projection of `-L^{-1} c` onto `{z : v_i' z >= lower_i}` with `v_i = L^{-1} m_i`.
//!
//! The first solve has no feasible point to start from and runs the Goldfarb-Idnani dual
//! active-set method. Later solves are primal active-set iterations hot-started from the previous
//! primal point and working set. Both methods update the same QR factor of the working set, so
//! the Cholesky factor of `Q` is never recomputed.

mod factor;

use nalgebra::{DMatrix, DVector};

use self::factor::WorkingSetQr;
use crate::error::{Error, Result};
use crate::problem::LcqpProblem;

/// Absolute primal feasibility tolerance.
pub const PRIMAL_TOL: f64 = 1e-10;
/// Dual (multiplier sign) tolerance.
pub const DUAL_TOL: f64 = 1e-10;

/// Residual level (relative) above which a solution is refined.
const REFINE_TOL: f64 = 1e-13;
const MAX_REFINEMENTS: usize = 3;

/// Where a stacked constraint row comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowOrigin {
    /// Row `i` of `Ax >= b`.
    General(usize),
    /// `(Lx)_i >= 0`.
    CompLeft(usize),
    /// `(Rx)_i >= 0`.
    CompRight(usize),
    /// `x_j >= lb_j`.
    BoxLower(usize),
    /// `-x_j >= -ub_j`.
    BoxUpper(usize),
}

/// The feasible polyhedron as a single `M x >= lower` system.
#[derive(Debug, Clone)]
pub struct StackedConstraints {
    pub matrix: DMatrix<f64>,
    pub lower: DVector<f64>,
    pub origin: Vec<RowOrigin>,
}

impl StackedConstraints {
    /// Stack `[A; L; R]` followed by one row per finite bound.
    pub fn from_problem(problem: &LcqpProblem) -> Self {
        let n = problem.n();
        let (n_a, n_c) = (problem.n_a(), problem.n_c());
        let mut rows: Vec<DVector<f64>> = Vec::new();
        let mut lower = Vec::new();
        let mut origin = Vec::new();
        for i in 0..n_a {
            rows.push(problem.a().row(i).transpose());
            lower.push(problem.b()[i]);
            origin.push(RowOrigin::General(i));
        }
        for i in 0..n_c {
            rows.push(problem.l().row(i).transpose());
            lower.push(0.0);
            origin.push(RowOrigin::CompLeft(i));
        }
        for i in 0..n_c {
            rows.push(problem.r().row(i).transpose());
            lower.push(0.0);
            origin.push(RowOrigin::CompRight(i));
        }
        for j in 0..n {
            if problem.lb()[j].is_finite() {
                let mut e = DVector::zeros(n);
                e[j] = 1.0;
                rows.push(e);
                lower.push(problem.lb()[j]);
                origin.push(RowOrigin::BoxLower(j));
            }
        }
        for j in 0..n {
            if problem.ub()[j].is_finite() {
                let mut e = DVector::zeros(n);
                e[j] = -1.0;
                rows.push(e);
                lower.push(-problem.ub()[j]);
                origin.push(RowOrigin::BoxUpper(j));
            }
        }
        let matrix = if rows.is_empty() {
            DMatrix::zeros(0, n)
        } else {
            DMatrix::from_columns(&rows).transpose()
        };
        StackedConstraints {
            matrix,
            lower: DVector::from_vec(lower),
            origin,
        }
    }

    /// Plain `M x >= lower` with every row tagged as a general inequality.
    pub fn general(matrix: DMatrix<f64>, lower: DVector<f64>) -> Self {
        let origin = (0..matrix.nrows()).map(RowOrigin::General).collect();
        StackedConstraints {
            matrix,
            lower,
            origin,
        }
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// `M x - lower`.
    pub fn slack(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x - &self.lower
    }

    /// Index of the row with the given origin.
    pub fn row_of(&self, origin: RowOrigin) -> Option<usize> {
        self.origin.iter().position(|o| *o == origin)
    }
}

/// Primal-dual solution of one QP solve.
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Multipliers in stacked row order, `Qx + c - M'y = 0`, `y >= 0`.
    pub y: DVector<f64>,
    pub iterations: usize,
    pub active_set_changes: usize,
    /// `true` if the solve was hot-started from the previous working set.
    pub hot_started: bool,
}

/// Per-instance solver state: one Cholesky factor of `Q` reused by every solve.
#[derive(Debug, Clone)]
pub struct QpWorkspace {
    n: usize,
    q: DMatrix<f64>,
    constraints: StackedConstraints,
    chol: DMatrix<f64>,
    /// Columns `v_i = L^{-1} m_i`.
    v: DMatrix<f64>,
    v_norms: Vec<f64>,
    qr: WorkingSetQr,
    working: Vec<usize>,
    in_working: Vec<bool>,
    z: Option<DVector<f64>>,
    last_primal: Option<DVector<f64>>,
    last_dual: Option<DVector<f64>>,
    factorization_count: usize,
    refinement_count: usize,
    active_set_changes: usize,
    max_iterations: usize,
}

impl QpWorkspace {
    pub fn new(problem: &LcqpProblem) -> Result<Self> {
        Self::with_constraints(problem.q().clone(), StackedConstraints::from_problem(problem))
    }

    /// Workspace for an arbitrary strictly convex `Q` and constraint system.
    pub fn with_constraints(q: DMatrix<f64>, constraints: StackedConstraints) -> Result<Self> {
        let n = q.nrows();
        if q.ncols() != n {
            return Err(Error::dims("Q", format!("{n}x{n}"), format!("{}x{}", n, q.ncols())));
        }
        if constraints.matrix.ncols() != n {
            return Err(Error::dims("M", n, constraints.matrix.ncols()));
        }
        let m = constraints.rows();
        if constraints.lower.len() != m || constraints.origin.len() != m {
            return Err(Error::dims("lower", m, constraints.lower.len()));
        }
        let mut ws = QpWorkspace {
            n,
            q,
            constraints,
            chol: DMatrix::zeros(n, n),
            v: DMatrix::zeros(n, m),
            v_norms: vec![0.0; m],
            qr: WorkingSetQr::new(n),
            working: Vec::new(),
            in_working: vec![false; m],
            z: None,
            last_primal: None,
            last_dual: None,
            factorization_count: 0,
            refinement_count: 0,
            active_set_changes: 0,
            max_iterations: 50 * (n + m),
        };
        ws.factorize()?;
        Ok(ws)
    }

    fn factorize(&mut self) -> Result<()> {
        let chol = self
            .q
            .clone()
            .cholesky()
            .ok_or(Error::IndefiniteHessian)?;
        self.chol = chol.l();
        let mt = self.constraints.matrix.transpose();
        self.v = self
            .chol
            .solve_lower_triangular(&mt)
            .ok_or(Error::IndefiniteHessian)?;
        self.v_norms = self.v.column_iter().map(|c| c.norm()).collect();
        self.factorization_count += 1;
        Ok(())
    }

    /// Drop the warm start and factorize `Q` again from scratch.
    pub fn reset(&mut self) -> Result<()> {
        self.clear_warm_start();
        self.factorize()
    }

    fn clear_warm_start(&mut self) {
        self.qr.clear();
        self.working.clear();
        self.in_working.iter_mut().for_each(|b| *b = false);
        self.z = None;
    }

    pub fn constraints(&self) -> &StackedConstraints {
        &self.constraints
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.constraints.rows()
    }

    pub fn factorization_count(&self) -> usize {
        self.factorization_count
    }

    pub fn refinement_count(&self) -> usize {
        self.refinement_count
    }

    /// Cumulative number of working-set additions and removals.
    pub fn active_set_changes(&self) -> usize {
        self.active_set_changes
    }

    /// Rows currently in the working set, in factorization order.
    pub fn active_set(&self) -> &[usize] {
        &self.working
    }

    pub fn last_primal(&self) -> Option<&DVector<f64>> {
        self.last_primal.as_ref()
    }

    pub fn last_dual(&self) -> Option<&DVector<f64>> {
        self.last_dual.as_ref()
    }

    /// Minimize `1/2 x'Qx + c'x` over the polyhedron.
    pub fn solve(&mut self, c: &DVector<f64>) -> Result<QpSolution> {
        if c.len() != self.n {
            return Err(Error::dims("c", self.n, c.len()));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { field: "c".into() });
        }
        let zu = -self
            .chol
            .solve_lower_triangular(c)
            .expect("cholesky factor has a nonzero diagonal");
        let changes_before = self.active_set_changes;
        let hot = self.z.is_some();
        let outcome = if hot {
            self.primal_active_set(&zu)
        } else {
            self.dual_active_set(&zu)
        };
        let (z, lambda, iterations) = match outcome {
            Ok(v) => v,
            Err(e) => {
                self.clear_warm_start();
                return Err(e);
            }
        };
        let (x, y) = self.recover(c, z, &lambda);
        self.last_primal = Some(x.clone());
        self.last_dual = Some(y.clone());
        Ok(QpSolution {
            x,
            y,
            iterations,
            active_set_changes: self.active_set_changes - changes_before,
            hot_started: hot,
        })
    }

    /// `Q`-weighted projection of `x0` onto the polyhedron: `min 1/2 (x - x0)'Q(x - x0)`.
    pub fn project(&mut self, x0: &DVector<f64>) -> Result<QpSolution> {
        if x0.len() != self.n {
            return Err(Error::dims("x0", self.n, x0.len()));
        }
        let c = -(&self.q * x0);
        self.solve(&c)
    }

    fn slack_of(&self, i: usize, z: &DVector<f64>) -> f64 {
        self.v.column(i).dot(z) - self.constraints.lower[i]
    }

    /// Equality-constrained minimizer on the current working set and its multipliers.
    fn working_set_minimizer(&self, zu: &DVector<f64>) -> (DVector<f64>, Vec<f64>) {
        let w = self.qr.size();
        let t = self.qr.rotate_in(zu);
        let b: Vec<f64> = self
            .working
            .iter()
            .map(|&i| self.constraints.lower[i])
            .collect();
        let a = self.qr.solve_rt(&b);
        let zhat = self.qr.combine(&a, &t.as_slice()[w..]);
        let rhs: Vec<f64> = (0..w).map(|k| a[k] - t[k]).collect();
        (zhat, self.qr.solve_r(&rhs))
    }

    fn add_working(&mut self, i: usize) -> bool {
        let v = self.v.column(i).into_owned();
        if self.qr.add(&v) {
            self.working.push(i);
            self.in_working[i] = true;
            self.active_set_changes += 1;
            true
        } else {
            false
        }
    }

    fn remove_working(&mut self, k: usize) {
        let i = self.working.remove(k);
        self.in_working[i] = false;
        self.qr.remove(k);
        self.active_set_changes += 1;
    }

    /// Primal active-set iterations from the stored feasible point and working set.
    fn primal_active_set(&mut self, zu: &DVector<f64>) -> Result<(DVector<f64>, Vec<f64>, usize)> {
        let mut z = self.z.clone().expect("hot start requires a primal point");
        let m = self.m();
        let mut skip = vec![false; m];
        for iter in 0..self.max_iterations {
            let (zhat, lambda) = self.working_set_minimizer(zu);
            let p = &zhat - &z;
            let scale = 1.0 + z.amax().max(zhat.amax());
            if p.amax() <= 1e-13 * scale {
                z = zhat;
                // Most negative multiplier, least index on ties.
                let mut drop: Option<(usize, f64)> = None;
                for (k, &l) in lambda.iter().enumerate() {
                    if l < -DUAL_TOL && drop.is_none_or(|(_, best)| l < best) {
                        drop = Some((k, l));
                    }
                }
                match drop {
                    None => return Ok((z, lambda, iter)),
                    Some((k, _)) => {
                        self.remove_working(k);
                        skip.iter_mut().for_each(|s| *s = false);
                        continue;
                    }
                }
            }

            // Ratio test; strict comparison keeps the least index among exact ties.
            let p_norm = p.norm();
            let mut step = 1.0;
            let mut blocking = None;
            for i in 0..m {
                if self.in_working[i] || skip[i] {
                    continue;
                }
                let vp = self.v.column(i).dot(&p);
                if vp >= -1e-12 * self.v_norms[i] * p_norm {
                    continue;
                }
                let t = self.slack_of(i, &z).max(0.0) / -vp;
                if t < step {
                    step = t;
                    blocking = Some(i);
                }
            }
            match blocking {
                None => {
                    z = zhat;
                }
                Some(i) => {
                    if self.add_working(i) {
                        z.axpy(step, &p, 1.0);
                        skip.iter_mut().for_each(|s| *s = false);
                    } else {
                        // Numerically dependent on the working set: cannot block.
                        skip[i] = true;
                    }
                }
            }
            self.z = Some(z.clone());
        }
        Err(Error::IterationLimit {
            limit: self.max_iterations,
        })
    }

    /// Goldfarb-Idnani dual active-set method from the unconstrained minimizer.
    fn dual_active_set(&mut self, zu: &DVector<f64>) -> Result<(DVector<f64>, Vec<f64>, usize)> {
        self.clear_warm_start();
        let m = self.m();
        let n = self.n;
        let mut z = zu.clone();
        let mut u: Vec<f64> = Vec::new();
        let mut iterations = 0;

        loop {
            // Most violated constraint, least index on ties.
            let mut violated: Option<(usize, f64)> = None;
            for i in 0..m {
                if self.in_working[i] {
                    continue;
                }
                let s = self.slack_of(i, &z);
                if s < -PRIMAL_TOL && violated.is_none_or(|(_, best)| s < best) {
                    violated = Some((i, s));
                }
            }
            let Some((p, _)) = violated else {
                self.z = Some(z.clone());
                return Ok((z, u, iterations));
            };
            let vp = self.v.column(p).into_owned();
            let mut u_p = 0.0;

            loop {
                iterations += 1;
                if iterations > self.max_iterations {
                    return Err(Error::IterationLimit {
                        limit: self.max_iterations,
                    });
                }
                let w = self.qr.size();
                let d = self.qr.rotate_in(&vp);
                let tail = &d.as_slice()[w..];
                let tail_sq: f64 = tail.iter().map(|x| x * x).sum();
                let primal_dir = if tail_sq.sqrt() > 1e-12 * self.v_norms[p] {
                    Some(self.qr.combine(&vec![0.0; w], tail))
                } else {
                    None
                };
                let r = self.qr.solve_r(&d.as_slice()[..w]);
                let r_scale = r.iter().fold(1.0_f64, |acc, x| acc.max(x.abs()));

                // Partial step: largest dual step keeping working multipliers non-negative.
                let mut partial = f64::INFINITY;
                let mut leaving = None;
                for k in 0..w {
                    if r[k] > 1e-13 * r_scale {
                        let t = u[k] / r[k];
                        if t < partial {
                            partial = t;
                            leaving = Some(k);
                        }
                    }
                }
                // Full step: makes constraint p active.
                let full = match &primal_dir {
                    Some(_) => -self.slack_of(p, &z) / tail_sq,
                    None => f64::INFINITY,
                };
                let t = partial.min(full);
                if !t.is_finite() {
                    return Err(Error::InfeasibleQp);
                }
                if let Some(dir) = &primal_dir {
                    z.axpy(t, dir, 1.0);
                }
                for k in 0..w {
                    u[k] -= t * r[k];
                }
                u_p += t;

                if full <= partial {
                    if self.add_working(p) {
                        u.push(u_p);
                    } else {
                        debug_assert!(n > 0);
                        return Err(Error::InfeasibleQp);
                    }
                    break;
                }
                let k = leaving.expect("finite partial step has a leaving constraint");
                u.remove(k);
                self.remove_working(k);
            }
        }
    }

    /// Map back to `x`, scatter multipliers and refine against the original KKT system.
    fn recover(
        &mut self,
        c: &DVector<f64>,
        z: DVector<f64>,
        lambda: &[f64],
    ) -> (DVector<f64>, DVector<f64>) {
        let lt = self.chol.transpose();
        let mut x = lt
            .solve_upper_triangular(&z)
            .expect("cholesky factor has a nonzero diagonal");
        let mut lam = lambda.to_vec();
        let w = self.working.len();

        for _ in 0..MAX_REFINEMENTS {
            // rs = Qx + c - A_W' lam, rp = b_W - A_W x
            let mut rs = &self.q * &x + c;
            let mut rp = vec![0.0; w];
            for (k, &i) in self.working.iter().enumerate() {
                let row = self.constraints.matrix.row(i);
                rs.axpy(-lam[k], &row.transpose(), 1.0);
                rp[k] = self.constraints.lower[i] - row.dot(&x.transpose());
            }
            let scale = 1.0 + c.amax() + (&self.q * &x).amax();
            let worst = rs
                .amax()
                .max(rp.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())));
            if worst <= REFINE_TOL * scale {
                break;
            }
            self.refinement_count += 1;
            let f = -self
                .chol
                .solve_lower_triangular(&rs)
                .expect("cholesky factor has a nonzero diagonal");
            let jf = self.qr.rotate_in(&f);
            let a = self.qr.solve_rt(&rp);
            let rhs: Vec<f64> = (0..w).map(|k| a[k] - jf[k]).collect();
            let dlam = self.qr.solve_r(&rhs);
            let corr: Vec<f64> = (0..w).map(|k| a[k] - jf[k]).collect();
            let dz = &f + self.qr.combine(&corr, &vec![0.0; self.n - w]);
            let dx = lt
                .solve_upper_triangular(&dz)
                .expect("cholesky factor has a nonzero diagonal");
            x += dx;
            for k in 0..w {
                lam[k] += dlam[k];
            }
        }

        let mut y = DVector::zeros(self.m());
        for (k, &i) in self.working.iter().enumerate() {
            y[i] = lam[k].max(0.0);
        }
        self.z = Some(&lt * &x);
        (x, y)
    }
}

/// KKT residuals of a QP solution, all in the infinity norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpResiduals {
    pub stationarity: f64,
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl QpResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.dual)
            .max(self.complementarity)
    }
}

/// Residuals of `Qx + c - M'y = 0`, `Mx >= lower`, `y >= 0`, `y_i (Mx - lower)_i = 0`.
pub fn qp_residuals(
    q: &DMatrix<f64>,
    c: &DVector<f64>,
    constraints: &StackedConstraints,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> QpResiduals {
    let grad = q * x + c - constraints.matrix.tr_mul(y);
    let slack = constraints.slack(x);
    QpResiduals {
        stationarity: grad.amax(),
        primal: slack.iter().fold(0.0_f64, |a, s| a.max(-s)),
        dual: y.iter().fold(0.0_f64, |a, v| a.max(-v)),
        complementarity: slack
            .iter()
            .zip(y.iter())
            .fold(0.0_f64, |a, (s, v)| a.max((s * v).abs())),
    }
}
