//! Dense helpers shared by the selector and the port optimizer.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Gram regularization weight.
pub const GRAM_EPS: f64 = 1e-10;
/// Condition number beyond which a Gram matrix gets regularized.
pub const GRAM_COND_LIMIT: f64 = 1e12;

/// `CN(0, 1)` entries.
pub fn complex_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * s, im * s)
    })
}

fn split(a: &CMatrix) -> (DMatrix<f64>, DMatrix<f64>) {
    (a.map(|v| v.re), a.map(|v| v.im))
}

fn join(re: DMatrix<f64>, im: &DMatrix<f64>) -> CMatrix {
    re.zip_map(im, Complex64::new)
}

/// `a * b`, routed through the real GEMM kernel.
pub fn cmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    join(&ar * &br - &ai * &bi, &(&ar * &bi + &ai * &br))
}

/// `a^H * b`, routed through the real GEMM kernel.
pub fn cmul_adjoint(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    // explicit transposes keep every product on the blocked kernel
    let (art, ait) = (ar.transpose(), ai.transpose());
    join(&art * &br + &ait * &bi, &(&art * &bi - &ait * &br))
}

/// `a * r` for a real `r`.
pub fn cmul_real(a: &CMatrix, r: &DMatrix<f64>) -> CMatrix {
    let (ar, ai) = split(a);
    join(&ar * r, &(&ai * r))
}

/// Orthonormal basis of the column span (thin Householder QR).
pub fn orthonormalize(a: CMatrix) -> CMatrix {
    a.qr().q()
}

/// Orthonormal basis of a tall, well-conditioned block by two CholeskyQR
/// passes; falls back to [`orthonormalize`] when the block is too close to
/// rank deficient for that to stay orthogonal.
pub fn orthonormalize_tall(y: CMatrix) -> CMatrix {
    fn pass(y: &CMatrix) -> Option<CMatrix> {
        let l = cmul_adjoint(y, y).cholesky()?.unpack();
        let l_inv = l.solve_lower_triangular(&CMatrix::identity(y.ncols(), y.ncols()))?;
        let q = cmul(y, &l_inv.adjoint());
        q.iter().all(|v| v.is_finite()).then_some(q)
    }
    let (rows, cols) = y.shape();
    if cols == 0 || cols > rows {
        return orthonormalize(y);
    }
    let q = pass(&y).and_then(|q1| pass(&q1));
    match q {
        Some(q) if orthonormality_error(&q) < 1e-10 => q,
        _ => orthonormalize(y),
    }
}

/// `max |Q^H Q - I|`.
pub fn orthonormality_error(q: &CMatrix) -> f64 {
    let g = cmul_adjoint(q, q);
    let mut worst: f64 = 0.0;
    for r in 0..g.nrows() {
        for c in 0..g.ncols() {
            let target = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((g[(r, c)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Left singular vectors of a wide matrix via the Hermitian eigenproblem of
/// `b b^H`, ordered by decreasing eigenvalue.
pub fn wide_left_singular(b: &CMatrix) -> CMatrix {
    let eig = SymmetricEigen::new(cmul(b, &b.adjoint()));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    CMatrix::from_fn(b.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])])
}

/// Left singular vectors ordered by decreasing singular value.
pub fn sorted_left_singular(a: CMatrix) -> Result<(CMatrix, Vec<f64>)> {
    let (rows, cols) = a.shape();
    let svd = SVD::try_new(a, true, false, f64::EPSILON, 10_000 * (rows + cols).max(10)).ok_or(Error::Numerical {
        what: "SVD did not converge",
        detail: format!("{rows}x{cols} matrix"),
    })?;
    let u = svd.u.expect("requested U");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]).then(i.cmp(&j)));
    let sorted_u = CMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let sv = order.iter().map(|&i| svd.singular_values[i]).collect();
    Ok((sorted_u, sv))
}

/// Columns of `h` listed in `cols`, in that order.
pub fn select_columns(h: &CMatrix, cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(h.nrows(), cols.len(), |r, c| h[(r, cols[c])])
}

/// Maximal linearly independent column subset (sorted), found by pivoted
/// Gram-Schmidt. A column is dependent once its residual norm drops to
/// `rel_tol` times the largest column norm.
pub fn independent_columns(h: &CMatrix, rel_tol: f64) -> Vec<usize> {
    let (m, n) = h.shape();
    let max_norm = h.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    if max_norm == 0.0 {
        return Vec::new();
    }
    let mut residual = h.clone();
    let mut picked = Vec::new();
    let mut used = vec![false; n];
    while picked.len() < m.min(n) {
        let mut best = None;
        let mut best_norm = rel_tol * max_norm;
        for j in (0..n).filter(|&j| !used[j]) {
            let v = residual.column(j).norm();
            if v > best_norm {
                best = Some(j);
                best_norm = v;
            }
        }
        let Some(best) = best else { break };
        used[best] = true;
        picked.push(best);
        let e = residual.column(best) / Complex64::new(best_norm, 0.0);
        for j in (0..n).filter(|&j| !used[j]) {
            let coef = e.dotc(&residual.column(j));
            let update = &e * coef;
            let mut col = residual.column_mut(j);
            col -= update;
        }
    }
    picked.sort_unstable();
    picked
}

/// Outcome of a possibly-regularized symmetric positive semidefinite solve.
#[derive(Clone, Debug)]
pub struct SpdSolve {
    pub x: DVector<f64>,
    pub regularized: bool,
}

/// Solve `g x = a` for a real symmetric PSD `g`.
///
/// When the condition number exceeds [`GRAM_COND_LIMIT`], `GRAM_EPS * trace(g) / n`
/// is added to the diagonal. Returns `None` only if even that fails.
pub fn solve_spd(g: &DMatrix<f64>, a: &DVector<f64>) -> Option<SpdSolve> {
    let n = g.nrows();
    let mut regularized = false;
    let mut work = g.clone();
    if condition_number(g) > GRAM_COND_LIMIT {
        let bump = GRAM_EPS * g.trace() / n as f64;
        if !(bump > 0.0) {
            return None;
        }
        for i in 0..n {
            work[(i, i)] += bump;
        }
        regularized = true;
    }
    let x = match work.clone().cholesky() {
        Some(ch) => ch.solve(a),
        None => work.lu().solve(a)?,
    };
    x.iter().all(|v| v.is_finite()).then_some(SpdSolve { x, regularized })
}

/// Ratio of extreme eigenvalue magnitudes of a real symmetric matrix; infinite if singular.
pub fn condition_number(g: &DMatrix<f64>) -> f64 {
    if g.nrows() == 0 {
        return 1.0;
    }
    let eig = SymmetricEigen::new(g.clone());
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &l in eig.eigenvalues.iter() {
        lo = lo.min(l.abs());
        hi = hi.max(l.abs());
    }
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// `Re{A^H B}` for complex matrices.
pub fn real_inner(a: &CMatrix, b: &CMatrix) -> DMatrix<f64> {
    (a.adjoint() * b).map(|v| v.re)
}
