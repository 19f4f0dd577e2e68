//! Tridiagonal and bordered solvers, a preconditioned conjugate-gradient
//! routine for near-singular self-adjoint operators, and dense symmetric
//! eigenvalues.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Tridiagonal matrix with `lower[i] = A[i+1][i]` and `upper[i] = A[i][i+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal<T> {
    pub lower: Vec<T>,
    pub diag: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Scalar> Tridiagonal<T> {
    pub fn new(lower: Vec<T>, diag: Vec<T>, upper: Vec<T>) -> Self {
        assert_eq!(lower.len() + 1, diag.len());
        assert_eq!(upper.len() + 1, diag.len());
        Tridiagonal { lower, diag, upper }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let n = self.len();
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.lower[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.upper[i] * x[i + 1];
            }
            y.push(acc);
        }
        y
    }

    /// Scale row `i` by `s[i]`.
    pub fn scale_rows(&mut self, s: &[f64]) {
        let n = self.len();
        for i in 0..n {
            self.diag[i] = self.diag[i].scale(s[i]);
            if i + 1 < n {
                self.upper[i] = self.upper[i].scale(s[i]);
                self.lower[i] = self.lower[i].scale(s[i + 1]);
            }
        }
    }

    pub fn add_diag(&mut self, d: &[T]) {
        for (a, b) in self.diag.iter_mut().zip(d) {
            *a += *b;
        }
    }

    /// Thomas factorization without pivoting.
    pub fn factor(&self) -> Result<TridiagonalLu<T>> {
        let n = self.len();
        let mut mult = vec![T::zero(); n];
        let mut pivot = vec![T::zero(); n];
        let scale = self.diag.iter().map(|d| d.magnitude()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        pivot[0] = self.diag[0];
        for i in 1..n {
            if pivot[i - 1].magnitude() <= 1e-300 * scale {
                return Err(Error::Singular { what: "tridiagonal factorization", detail: pivot[i - 1].magnitude() / scale });
            }
            let m = self.lower[i - 1] / pivot[i - 1];
            mult[i] = m;
            pivot[i] = self.diag[i] - m * self.upper[i - 1];
        }
        if pivot[n - 1].magnitude() <= 1e-300 * scale {
            return Err(Error::Singular { what: "tridiagonal factorization", detail: pivot[n - 1].magnitude() / scale });
        }
        let min_pivot = pivot.iter().map(|p| p.magnitude()).fold(f64::INFINITY, f64::min);
        Ok(TridiagonalLu { mult, pivot, upper: self.upper.clone(), min_pivot_ratio: min_pivot / scale })
    }

    pub fn solve(&self, rhs: &[T]) -> Result<Vec<T>> {
        Ok(self.factor()?.solve(rhs))
    }
}

#[derive(Debug, Clone)]
pub struct TridiagonalLu<T> {
    mult: Vec<T>,
    pivot: Vec<T>,
    upper: Vec<T>,
    min_pivot_ratio: f64,
}

impl<T: Scalar> TridiagonalLu<T> {
    /// Smallest pivot relative to the largest diagonal entry; a cheap
    /// conditioning indicator.
    pub fn min_pivot_ratio(&self) -> f64 {
        self.min_pivot_ratio
    }

    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [T]) {
        let n = self.pivot.len();
        for i in 1..n {
            let prev = x[i - 1];
            x[i] -= self.mult[i] * prev;
        }
        x[n - 1] /= self.pivot[n - 1];
        for i in (0..n - 1).rev() {
            let next = x[i + 1];
            x[i] = (x[i] - self.upper[i] * next) / self.pivot[i];
        }
    }
}

/// Solve the small dense system `m x = b` by Gaussian elimination with
/// partial pivoting.
pub fn solve_dense(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let k = b.len();
    let scale = m.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap_or(core::cmp::Ordering::Equal))
            .unwrap_or(col);
        if !(m[piv][col].abs() > 1e-14 * scale) {
            return Err(Error::Singular { what: "dense border system", detail: m[piv][col].abs() / scale });
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..k {
            let f = m[row][col] / m[col][col];
            let (upper, lower) = m.split_at_mut(row);
            for (dst, &v) in lower[0][col..k].iter_mut().zip(&upper[col][col..k]) {
                *dst -= f * v;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for row in (0..k).rev() {
        let mut acc = b[row];
        for c in row + 1..k {
            acc -= m[row][c] * x[c];
        }
        x[row] = acc / m[row][row];
    }
    Ok(x)
}

/// Solve `[M, B; Cᵀ, 0] (x, y) = (f, g)` for an invertible tridiagonal `M`,
/// `B = [b_1 … b_k]` and constraint rows `c_j` given as weighted vectors (so
/// that `c_jᵀ x` is the intended pairing).
pub fn bordered_solve(
    m: &TridiagonalLu<f64>,
    border: &[Vec<f64>],
    constraints: &[Vec<f64>],
    f: &[f64],
    g: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = border.len();
    assert_eq!(constraints.len(), k);
    let x0 = m.solve(f);
    let z: Vec<Vec<f64>> = border.iter().map(|b| m.solve(b)).collect();
    let mut schur = vec![vec![0.0; k]; k];
    let mut rhs = vec![0.0; k];
    for (i, c) in constraints.iter().enumerate() {
        for (j, zj) in z.iter().enumerate() {
            schur[i][j] = dot(c, zj);
        }
        rhs[i] = dot(c, &x0) - g[i];
    }
    let y = solve_dense(schur, rhs)?;
    let mut x = x0;
    for (zj, yj) in z.iter().zip(&y) {
        for (xi, zi) in x.iter_mut().zip(zj) {
            *xi -= yj * zi;
        }
    }
    Ok((x, y))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned conjugate gradients for `A x = b`, with `A` self-adjoint
/// and positive definite in the inner product `⟨u, v⟩ = Σ w_i u_i v_i`.
pub fn pcg(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precondition: impl Fn(&[f64]) -> Vec<f64>,
    weights: &[f64],
    b: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let wdot = |u: &[f64], v: &[f64]| -> f64 { u.iter().zip(v).zip(weights).map(|((a, b), w)| a * b * w).sum() };
    let n = b.len();
    let bnorm = wdot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = wdot(&r, &z);
    let mut res = 1.0;
    for _ in 0..max_iter {
        let ap = apply(&p);
        let pap = wdot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Singular { what: "conjugate gradients", detail: pap });
        }
        let a = rz / pap;
        for i in 0..n {
            x[i] += a * p[i];
            r[i] -= a * ap[i];
        }
        res = wdot(&r, &r).sqrt() / bnorm;
        if res <= rel_tol {
            return Ok(x);
        }
        z = precondition(&r);
        let rz_new = wdot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence { what: "conjugate gradients", iterations: max_iter, residual: res })
}

/// Smallest eigenvalue of the symmetric matrix `S` restricted to the
/// Euclidean orthogonal complement of `span(constraints)`.
pub fn constrained_min_eigenvalue(s: &DMatrix<f64>, constraints: &[Vec<f64>]) -> Result<f64> {
    let n = s.nrows();
    // orthonormal basis of the constraint span
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for c in constraints {
        let mut v = DVector::from_column_slice(c);
        for q in &basis {
            let proj = q.dot(&v);
            v -= q * proj;
        }
        let nv = v.norm();
        if nv > 1e-12 {
            basis.push(v / nv);
        }
    }
    let mut m = s.clone();
    if !basis.is_empty() {
        let k = basis.len();
        let u = DMatrix::from_columns(&basis);
        let su = s * &u;
        let utsu = u.transpose() * &su;
        // P S P with P = I − U Uᵀ
        m -= &su * u.transpose();
        m -= &u * su.transpose();
        m += &u * &utsu * u.transpose();
        // lift the constrained directions far above the spectrum of interest
        let lift = s.diagonal().iter().map(|x| x.abs()).fold(1.0, f64::max) * 10.0 + 1.0;
        m += &u * u.transpose() * lift;
        debug_assert_eq!(m.nrows(), n);
        let _ = k;
    }
    // symmetrize against rounding
    let mt = m.transpose();
    m = (m + mt) * 0.5;
    let eig = m
        .try_symmetric_eigen(1e-13, 10_000)
        .ok_or(Error::NoConvergence { what: "symmetric eigensolver", iterations: 10_000, residual: f64::NAN })?;
    Ok(eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn thomas_solves_real_and_complex() {
        let n = 50;
        let t = Tridiagonal::new(vec![-1.0; n - 1], vec![2.5; n], vec![-1.2; n - 1]);
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = t.apply(&x);
        let y = t.solve(&b).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
        let tc = Tridiagonal::new(
            vec![Complex64::new(-1.0, 0.1); n - 1],
            vec![Complex64::new(2.0, 0.5); n],
            vec![Complex64::new(-1.0, 0.1); n - 1],
        );
        let xc: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let yc = tc.solve(&tc.apply(&xc)).unwrap();
        for (a, b) in xc.iter().zip(&yc) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn singular_tridiagonal_detected() {
        let t = Tridiagonal::new(vec![1.0; 2], vec![1.0, 1.0, 1.0], vec![1.0; 2]);
        assert!(matches!(t.factor(), Err(Error::Singular { .. })));
    }

    #[test]
    fn bordered_matches_dense() {
        let n = 6;
        let t = Tridiagonal::new(vec![-1.0; n - 1], vec![3.0; n], vec![-1.0; n - 1]);
        let b = vec![1.0, 2.0, 0.0, -1.0, 0.5, 0.3];
        let c = vec![0.2, 0.1, 1.0, 1.0, -0.4, 0.0];
        let f = vec![1.0, 0.0, -2.0, 0.5, 0.0, 1.0];
        let (x, y) = bordered_solve(&t.factor().unwrap(), core::slice::from_ref(&b), core::slice::from_ref(&c), &f, &[0.7]).unwrap();
        let tx = t.apply(&x);
        for i in 0..n {
            assert!((tx[i] + y[0] * b[i] - f[i]).abs() < 1e-12);
        }
        assert!((dot(&c, &x) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn dense_solve_pivots() {
        let x = solve_dense(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![2.0, 3.0]).unwrap();
        assert_eq!(x, vec![3.0, 2.0]);
    }

    #[test]
    fn constrained_eigen_on_diagonal() {
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 2.0, 3.0]));
        assert!((constrained_min_eigenvalue(&s, &[]).unwrap() + 1.0).abs() < 1e-12);
        let e = constrained_min_eigenvalue(&s, &[vec![1.0, 0.0, 0.0]]).unwrap();
        assert!((e - 2.0).abs() < 1e-12);
    }

    #[test]
    fn pcg_solves_spd() {
        let n = 40;
        let w = vec![0.5; n];
        let t = Tridiagonal::new(vec![-1.0; n - 1], vec![2.2; n], vec![-1.0; n - 1]);
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let b = t.apply(&x);
        let sol = pcg(|v| t.apply(v), |v| v.to_vec(), &w, &b, 1e-13, 500).unwrap();
        for (a, b) in x.iter().zip(&sol) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
