//! Linear solvers for the Newton correction.

use faer::sparse::{SparseColMat, Triplet};
use faer::prelude::Solve;
use faer::Mat;
use nalgebra::{DMatrix, DVector};

use crate::sparse::SparseMatrix;

/// Solves `a x = b` by LU with partial pivoting; `None` if `a` is singular.
pub(crate) fn dense_solve(a: DMatrix<f64>, b: &[f64]) -> Option<Vec<f64>> {
    let rhs = DVector::from_column_slice(b);
    let x = a.lu().solve(&rhs)?;
    x.iter().all(|v| v.is_finite()).then(|| x.iter().copied().collect())
}

/// Solves `a x = b` by sparse LU; `None` if the factorization fails.
pub(crate) fn sparse_solve(a: &SparseMatrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.n_rows();
    let triplets: Vec<Triplet<usize, usize, f64>> = (0..n)
        .flat_map(|i| a.row(i).iter().map(move |&(j, v)| Triplet::new(i, j, v)))
        .collect();
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets).ok()?;
    let lu = mat.sp_lu().ok()?;
    let mut rhs = Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
    lu.solve_in_place(rhs.as_mut());
    let x: Vec<f64> = (0..n).map(|i| rhs[(i, 0)]).collect();
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct KrylovStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Restarted GMRES with right preconditioning `A M^-1 y = b`, `x = M^-1 y`,
/// where `M^-1` is the diagonal `inv_diag`. Stops once `|b - A x| <= rtol |b|`
/// or after `max_iter` inner iterations; the best iterate is returned either way.
pub(crate) fn gmres(
    apply: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    b: &[f64],
    inv_diag: &[f64],
    rtol: f64,
    restart: usize,
    max_iter: usize,
) -> (Vec<f64>, KrylovStats) {
    let n = b.len();
    let mut x = vec![0.0; n];
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return (x, KrylovStats { iterations: 0, relative_residual: 0.0 });
    }
    let target = rtol * b_norm;
    let mut total = 0;
    let mut r = b.to_vec();
    let mut beta = b_norm;

    while total < max_iter {
        let m = restart.min(max_iter - total);
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut hess = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;

        for k in 0..m {
            let z: Vec<f64> = basis[k].iter().zip(inv_diag).map(|(v, d)| v * d).collect();
            let mut w = apply(&z);
            // modified Gram-Schmidt
            for (j, vj) in basis.iter().enumerate() {
                let hjk = dot(&w, vj);
                hess[j][k] = hjk;
                for (wi, vi) in w.iter_mut().zip(vj) {
                    *wi -= hjk * vi;
                }
            }
            let h_next = norm(&w);
            hess[k + 1][k] = h_next;
            for j in 0..k {
                let tmp = cs[j] * hess[j][k] + sn[j] * hess[j + 1][k];
                hess[j + 1][k] = -sn[j] * hess[j][k] + cs[j] * hess[j + 1][k];
                hess[j][k] = tmp;
            }
            let denom = hess[k][k].hypot(hess[k + 1][k]);
            if denom == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = hess[k][k] / denom;
            sn[k] = hess[k + 1][k] / denom;
            hess[k][k] = denom;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            total += 1;
            if g[k + 1].abs() <= target || h_next == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / h_next).collect());
        }

        // back substitution
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| hess[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / hess[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            for ((xj, vj), dj) in x.iter_mut().zip(&basis[i]).zip(inv_diag) {
                *xj += yi * vj * dj;
            }
        }
        let ax = apply(&x);
        r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        beta = norm(&r);
        if beta <= target || k_used == 0 {
            break;
        }
    }
    (x, KrylovStats { iterations: total, relative_residual: beta / b_norm })
}
