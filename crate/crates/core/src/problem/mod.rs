//! LCQP data model.
//!
//! A problem is the sextuple `(Q, g, A, b, L, R)` plus optional box bounds:
//!
//! ```text
//!     minimize    1/2 x' Q x + g' x
//!     subject to  A x >= b
//!                 0 <= L x  _|_  R x >= 0
//!                 lb <= x <= ub
//! ```
//!
//! [`ProblemData`] holds raw, unchecked matrices. [`ProblemData::validate`] turns it into an
//! immutable [`LcqpProblem`], which also owns the symmetrized complementarity matrix
//! `C = L'R + R'L` used by the penalty machinery.

mod io;
mod penalty;

pub use io::{load_problem, load_problem_file, problem_to_json, save_problem, save_problem_file, ProblemFile};
pub use penalty::PenaltyContext;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance for the symmetry check on `Q`.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Unvalidated problem matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemData {
    pub q: DMatrix<f64>,
    pub g: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub l: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub lb: Option<DVector<f64>>,
    pub ub: Option<DVector<f64>>,
}

impl ProblemData {
    /// Problem without general inequalities or bounds.
    pub fn complementarity_only(
        q: DMatrix<f64>,
        g: DVector<f64>,
        l: DMatrix<f64>,
        r: DMatrix<f64>,
    ) -> Self {
        let n = q.ncols();
        ProblemData {
            q,
            g,
            a: DMatrix::zeros(0, n),
            b: DVector::zeros(0),
            l,
            r,
            lb: None,
            ub: None,
        }
    }

    pub fn validate(self) -> Result<LcqpProblem> {
        LcqpProblem::from_data(self)
    }
}

/// A validated LCQP. Immutable; cheap to clone.
#[derive(Debug, Clone)]
pub struct LcqpProblem {
    inner: Arc<Inner>,
}

#[derive(Debug)]
struct Inner {
    data: ProblemData,
    lb: DVector<f64>,
    ub: DVector<f64>,
    c: Arc<DMatrix<f64>>,
}

impl PartialEq for LcqpProblem {
    fn eq(&self, other: &Self) -> bool {
        self.inner.data == other.inner.data
    }
}

impl LcqpProblem {
    fn from_data(data: ProblemData) -> Result<Self> {
        let n = data.q.nrows();
        if n == 0 {
            return Err(Error::dims("Q", "at least 1 row", 0));
        }
        check_shape("Q", &data.q, n, n)?;
        check_len("g", &data.g, n)?;
        let n_a = data.a.nrows();
        check_shape("A", &data.a, n_a, n)?;
        check_len("b", &data.b, n_a)?;
        let n_c = data.l.nrows();
        if n_c == 0 {
            return Err(Error::dims("L", "at least 1 row", 0));
        }
        check_shape("L", &data.l, n_c, n)?;
        check_shape("R", &data.r, n_c, n)?;
        if let Some(lb) = &data.lb {
            check_len("lb", lb, n)?;
        }
        if let Some(ub) = &data.ub {
            check_len("ub", ub, n)?;
        }

        check_finite("Q", data.q.iter())?;
        check_finite("g", data.g.iter())?;
        check_finite("A", data.a.iter())?;
        check_finite("b", data.b.iter())?;
        check_finite("L", data.l.iter())?;
        check_finite("R", data.r.iter())?;

        let lb = data
            .lb
            .clone()
            .unwrap_or_else(|| DVector::from_element(n, f64::NEG_INFINITY));
        let ub = data
            .ub
            .clone()
            .unwrap_or_else(|| DVector::from_element(n, f64::INFINITY));
        for j in 0..n {
            if lb[j].is_nan() || lb[j] == f64::INFINITY {
                return Err(Error::NonFinite { field: "lb".into() });
            }
            if ub[j].is_nan() || ub[j] == f64::NEG_INFINITY {
                return Err(Error::NonFinite { field: "ub".into() });
            }
            if lb[j] > ub[j] {
                return Err(Error::InvalidBounds {
                    index: j,
                    lb: lb[j],
                    ub: ub[j],
                });
            }
        }

        let scale = data.q.amax().max(1.0);
        for i in 0..n {
            for j in (i + 1)..n {
                let diff = (data.q[(i, j)] - data.q[(j, i)]).abs();
                if diff > SYMMETRY_TOL * scale {
                    return Err(Error::NonSymmetricHessian { row: i, col: j, diff });
                }
            }
        }
        // Definiteness by factorization success, as the QP subsolver does.
        if data.q.clone().cholesky().is_none() {
            return Err(Error::IndefiniteHessian);
        }

        let lr = data.l.transpose() * &data.r;
        let c = &lr + lr.transpose();

        Ok(LcqpProblem {
            inner: Arc::new(Inner {
                data,
                lb,
                ub,
                c: Arc::new(c),
            }),
        })
    }

    pub fn n(&self) -> usize {
        self.inner.data.q.nrows()
    }

    pub fn n_a(&self) -> usize {
        self.inner.data.a.nrows()
    }

    pub fn n_c(&self) -> usize {
        self.inner.data.l.nrows()
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.inner.data.q
    }

    pub fn g(&self) -> &DVector<f64> {
        &self.inner.data.g
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.inner.data.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.inner.data.b
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.inner.data.l
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.inner.data.r
    }

    /// Lower bounds, `-inf` where unbounded.
    pub fn lb(&self) -> &DVector<f64> {
        &self.inner.lb
    }

    /// Upper bounds, `+inf` where unbounded.
    pub fn ub(&self) -> &DVector<f64> {
        &self.inner.ub
    }

    pub fn has_bounds(&self) -> bool {
        self.inner.data.lb.is_some() || self.inner.data.ub.is_some()
    }

    /// Symmetrized complementarity matrix `C = L'R + R'L`.
    pub fn c(&self) -> &DMatrix<f64> {
        &self.inner.c
    }

    pub(crate) fn c_shared(&self) -> Arc<DMatrix<f64>> {
        Arc::clone(&self.inner.c)
    }

    /// The raw data this problem was validated from.
    pub fn data(&self) -> &ProblemData {
        &self.inner.data
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        debug_assert_eq!(x.len(), self.n());
        0.5 * x.dot(&(self.q() * x)) + self.g().dot(x)
    }

    /// Penalty value `phi(x) = (Lx)'(Rx)`.
    ///
    /// Equals the complementarity residual on the set `Lx >= 0, Rx >= 0`; outside of it the
    /// value may be negative and is returned as is.
    pub fn complementarity_residual(&self, x: &DVector<f64>) -> f64 {
        debug_assert_eq!(x.len(), self.n());
        (self.l() * x).dot(&(self.r() * x))
    }

    /// Checked variant of [`Self::complementarity_residual`].
    pub fn try_complementarity_residual(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.n() {
            return Err(Error::dims("x", self.n(), x.len()));
        }
        Ok(self.complementarity_residual(x))
    }

    /// Largest violation of `Ax >= b`, `Lx >= 0`, `Rx >= 0` and the bounds (0 if feasible).
    pub fn inequality_violation(&self, x: &DVector<f64>) -> f64 {
        let mut worst = 0.0_f64;
        let ax = self.a() * x;
        for i in 0..self.n_a() {
            worst = worst.max(self.b()[i] - ax[i]);
        }
        for v in (self.l() * x).iter().chain((self.r() * x).iter()) {
            worst = worst.max(-v);
        }
        for j in 0..self.n() {
            worst = worst.max(self.lb()[j] - x[j]).max(x[j] - self.ub()[j]);
        }
        worst
    }

    pub fn penalty_context(&self, rho: f64) -> PenaltyContext {
        PenaltyContext::new(self, rho)
    }
}

fn check_shape(field: &str, m: &DMatrix<f64>, rows: usize, cols: usize) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(Error::dims(
            field,
            format!("{rows}x{cols}"),
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(())
}

fn check_len(field: &str, v: &DVector<f64>, len: usize) -> Result<()> {
    if v.len() != len {
        return Err(Error::dims(field, len, v.len()));
    }
    Ok(())
}

fn check_finite<'a>(field: &str, mut vals: impl Iterator<Item = &'a f64>) -> Result<()> {
    if vals.all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            field: field.to_string(),
        })
    }
}

/// The two-variable example with strongly stationary points `(1, 0)` and `(0, 1)` and a
/// Clarke-stationary point at the origin: `Q = 2 I`, `g = (-2, -2)`, `x1 _|_ x2`.
pub fn two_corner_example() -> LcqpProblem {
    ProblemData::complementarity_only(
        DMatrix::identity(2, 2) * 2.0,
        DVector::from_vec(vec![-2.0, -2.0]),
        DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
    )
    .validate()
    .expect("example problem is valid")
}
