//! Random instances for property tests.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::problem::{LcqpProblem, PenaltyContext, ProblemData};

fn uniform_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, half: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-half..half))
}

fn uniform_vector<R: Rng + ?Sized>(rng: &mut R, len: usize, lo: f64, hi: f64) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.gen_range(lo..hi))
}

/// `D'D + I` with `D` uniform on `[-1, 1]`.
fn random_spd<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let d = uniform_matrix(rng, n, n, 1.0);
    let mut q = d.transpose() * d + DMatrix::identity(n, n);
    // Exact symmetry.
    q = (&q + q.transpose()) * 0.5;
    q
}

/// A feasible random LCQP.
///
/// `Q = D'D + I`, `g` uniform on `[-2, 2]`, `A` uniform on `[-1, 1]` with `b <= 0` so the origin
/// is feasible. Each complementarity pair selects two distinct variables with positive scaling.
/// Requires `2 n_c <= n`.
pub fn random_lcqp<R: Rng + ?Sized>(rng: &mut R, n: usize, n_a: usize, n_c: usize) -> LcqpProblem {
    assert!(n_c >= 1 && 2 * n_c <= n, "need 1 <= n_c and 2 n_c <= n");
    let q = random_spd(rng, n);
    let g = uniform_vector(rng, n, -2.0, 2.0);
    let a = uniform_matrix(rng, n_a, n, 1.0);
    let b = uniform_vector(rng, n_a, -1.0, 0.0);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut l = DMatrix::zeros(n_c, n);
    let mut r = DMatrix::zeros(n_c, n);
    for i in 0..n_c {
        l[(i, perm[2 * i])] = rng.gen_range(0.5..2.0);
        r[(i, perm[2 * i + 1])] = rng.gen_range(0.5..2.0);
    }
    ProblemData {
        q,
        g,
        a,
        b,
        l,
        r,
        lb: None,
        ub: None,
    }
    .validate()
    .expect("generated problem is valid")
}

/// A strictly convex QP `min 1/2 x'Qx + c'x  s.t.  M x >= lower`, feasible by construction.
#[derive(Debug, Clone)]
pub struct RandomQp {
    pub q: DMatrix<f64>,
    pub c: DVector<f64>,
    pub m: DMatrix<f64>,
    pub lower: DVector<f64>,
}

/// Rows pass through a random point with slack uniform on `[0, 1]`; roughly a third of the
/// rows have zero slack there, which produces degenerate vertices.
pub fn random_feasible_qp<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> RandomQp {
    let q = random_spd(rng, n);
    let c = uniform_vector(rng, n, -3.0, 3.0);
    let mat = uniform_matrix(rng, m, n, 1.0);
    let point = uniform_vector(rng, n, -1.0, 1.0);
    let slack = DVector::from_fn(m, |_, _| {
        if rng.gen_bool(1.0 / 3.0) {
            0.0
        } else {
            rng.gen_range(0.0..1.0)
        }
    });
    let lower = &mat * point - slack;
    RandomQp {
        q,
        c,
        m: mat,
        lower,
    }
}

/// Two-variable instance whose merit along `p = e_1` from `x = 0` is
/// `1/2 alpha^2 (gamma + delta) + alpha ell`.
///
/// `Q = diag(gamma, 1)`, `L = (1, 0)`, `R = (delta/2, 0)`, `g = (ell, 0)`, `rho = 1`.
pub fn line_search_instance(
    gamma: f64,
    delta: f64,
    ell: f64,
) -> (LcqpProblem, PenaltyContext, DVector<f64>, DVector<f64>) {
    assert!(gamma > 0.0);
    let problem = ProblemData::complementarity_only(
        DMatrix::from_diagonal(&DVector::from_vec(vec![gamma, 1.0])),
        DVector::from_vec(vec![ell, 0.0]),
        DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        DMatrix::from_row_slice(1, 2, &[0.5 * delta, 0.0]),
    )
    .validate()
    .expect("line-search instance is valid");
    let ctx = problem.penalty_context(1.0);
    (
        problem,
        ctx,
        DVector::zeros(2),
        DVector::from_vec(vec![1.0, 0.0]),
    )
}
