//! Small dense helpers (in `f64`) and a matrix-free GMRES.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// Minimum-norm solution of the symmetric positive semidefinite system
/// `G x = b` (row-major `n x n`). Directions whose eigenvalue in the
/// unit-diagonal scaling falls below `rel_tol` times the largest are dropped.
/// Returns the solution and the numerical rank.
pub fn gram_solve(gram: &[f64], n: usize, rhs: &[f64], rel_tol: f64) -> (Vec<f64>, usize) {
    debug_assert_eq!(gram.len(), n * n);
    let scale: Vec<f64> = (0..n)
        .map(|i| {
            let d = gram[i * n + i];
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let m = DMatrix::from_fn(n, n, |i, j| {
        let x = gram[i * n + j] * scale[i] * scale[j];
        // exact symmetry for the eigensolver
        let y = gram[j * n + i] * scale[i] * scale[j];
        0.5 * (x + y)
    });
    let b = DVector::from_fn(n, |i, _| rhs[i] * scale[i]);
    let eig = SymmetricEigen::new(m);
    let lmax = eig.eigenvalues.iter().fold(0.0_f64, |a, &l| a.max(l.abs()));
    let mut y = DVector::zeros(n);
    let mut rank = 0;
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if lmax > 0.0 && l > rel_tol * lmax {
            rank += 1;
            let q = eig.eigenvectors.column(k);
            y += q * (q.dot(&b) / l);
        }
    }
    ((0..n).map(|i| y[i] * scale[i]).collect(), rank)
}

/// Unrestarted GMRES for `A x = b` with right preconditioner `P`
/// (solves `A P y = b`, returns `x = P y`). Inner products are supplied by
/// the caller so that weighted spaces can be used.
pub struct Gmres {
    pub max_iter: usize,
    pub rel_tol: f64,
}

impl Default for Gmres {
    fn default() -> Self {
        Self {
            max_iter: 200,
            rel_tol: 1e-12,
        }
    }
}

impl Gmres {
    pub fn solve<T: Real>(
        &self,
        b: &[T],
        apply: impl Fn(&[T]) -> Vec<T>,
        precond: impl Fn(&[T]) -> Vec<T>,
        dot: impl Fn(&[T], &[T]) -> T,
    ) -> Result<Vec<T>> {
        let n = b.len();
        let beta = to_f64(dot(b, b)).sqrt();
        if beta == 0.0 {
            return Ok(vec![T::zero(); n]);
        }
        let m = self.max_iter.min(n.max(1));
        let mut basis: Vec<Vec<T>> = vec![b.iter().map(|&x| x / lit::<T>(beta)).collect()];
        let mut precond_basis: Vec<Vec<T>> = Vec::new();
        // Hessenberg in f64, Givens rotations
        let mut hess: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<(f64, f64)> = Vec::new();
        let mut g = vec![beta];
        let mut converged = false;
        for j in 0..m {
            let z = precond(&basis[j]);
            let mut w = apply(&z);
            precond_basis.push(z);
            let mut col = vec![0.0; j + 2];
            // modified Gram-Schmidt, twice for stability
            for _ in 0..2 {
                for (i, q) in basis.iter().enumerate() {
                    let hij = to_f64(dot(&w, q));
                    col[i] += hij;
                    let c = lit::<T>(hij);
                    for (wk, &qk) in w.iter_mut().zip(q) {
                        *wk -= c * qk;
                    }
                }
            }
            let hn = to_f64(dot(&w, &w)).sqrt();
            col[j + 1] = hn;
            for (i, &(c, s)) in cs.iter().enumerate() {
                let (a, bb) = (col[i], col[i + 1]);
                col[i] = c * a + s * bb;
                col[i + 1] = -s * a + c * bb;
            }
            let (a, bb) = (col[j], col[j + 1]);
            let r = a.hypot(bb);
            let (c, s) = if r == 0.0 { (1.0, 0.0) } else { (a / r, bb / r) };
            col[j] = r;
            col[j + 1] = 0.0;
            cs.push((c, s));
            let gj = g[j];
            g[j] = c * gj;
            g.push(-s * gj);
            hess.push(col);
            if g[j + 1].abs() <= self.rel_tol * beta || hn == 0.0 {
                converged = true;
                break;
            }
            basis.push(w.iter().map(|&x| x / lit::<T>(hn)).collect());
        }
        let k = hess.len();
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut acc = g[i];
            for jj in i + 1..k {
                acc -= hess[jj][i] * y[jj];
            }
            y[i] = acc / hess[i][i];
        }
        let residual = g[k].abs() / beta;
        if !converged && residual > self.rel_tol.sqrt() {
            return Err(Error::LinearSolve(format!(
                "GMRES stalled after {k} iterations at relative residual {residual:e}"
            )));
        }
        let mut x = vec![T::zero(); n];
        for (yi, z) in y.iter().zip(&precond_basis) {
            let c = lit::<T>(*yi);
            for (xk, &zk) in x.iter_mut().zip(z) {
                *xk += c * zk;
            }
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_solve_full_rank() {
        let g = [4.0, 1.0, 1.0, 3.0];
        let (x, rank) = gram_solve(&g, 2, &[1.0, 2.0], 1e-12);
        assert_eq!(rank, 2);
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-14);
        assert!((x[0] + 3.0 * x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gram_solve_rank_deficient_is_min_norm_in_scaled_variables() {
        // vectors e and 2e: Gram [[1,2],[2,4]]
        let g = [1.0, 2.0, 2.0, 4.0];
        let (x, rank) = gram_solve(&g, 2, &[1.0, 2.0], 1e-10);
        assert_eq!(rank, 1);
        assert!((x[0] + 2.0 * x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gmres_solves_nonsymmetric_system() {
        let a = [[4.0, 1.0, 0.0], [2.0, 5.0, 1.0], [0.0, -1.0, 3.0]];
        let b = [1.0, 2.0, 3.0];
        let apply = |x: &[f64]| (0..3).map(|i| (0..3).map(|j| a[i][j] * x[j]).sum()).collect();
        let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum();
        let x = Gmres::default()
            .solve(&b, apply, |x: &[f64]| x.iter().map(|v| v / 4.0).collect(), dot)
            .unwrap();
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a[i][j] * x[j]).sum::<f64>() - b[i];
            assert!(r.abs() < 1e-12);
        }
    }
}
