use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix, Real};

use super::qr::norm2;

const MAX_SWEEPS: usize = 60;

/// `B = U diag(s) V^T` with `s` non-negative and descending.
#[derive(Debug, Clone, PartialEq)]
pub struct Svd<T> {
    pub u: Matrix<T>,
    pub s: Vec<T>,
    pub v: Matrix<T>,
}

impl<T: Real> Svd<T> {
    pub fn reconstruct(&self) -> Matrix<T> {
        let mut us = self.u.clone();
        for (j, &sj) in self.s.iter().enumerate() {
            for x in us.col_mut(j) {
                *x = *x * sj;
            }
        }
        us.matmul(&self.v.transpose()).expect("conforming factors")
    }

    /// Keeps the leading `k` triplets.
    pub fn truncate(&self, k: usize) -> Self {
        let k = k.min(self.s.len());
        Svd { u: self.u.columns(0, k), s: self.s[..k].to_vec(), v: self.v.columns(0, k) }
    }
}

/// SVD of a wide `p x n` matrix (`p <= n`) by one-sided Jacobi on `B^T`.
///
/// Returns `U: p x p`, `s: p`, `V: n x p`.
pub fn svd_small<T: Real>(b: &Matrix<T>) -> Result<Svd<T>> {
    let (p, n) = b.shape();
    if p > n {
        return Err(Error::shape("svd_small", format!("need rows <= cols, got {p}x{n}")));
    }
    match b.count_non_finite() {
        0 => {}
        count => return Err(Error::NonFinite { context: "svd input", count }),
    }
    let mut w = b.transpose();
    let mut rot = Matrix::<T>::identity(p);
    let tol = T::epsilon() * T::of(n as f64);

    let mut converged = p < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        // Columns below `n eps * max norm` carry only rounding noise; every rotation
        // against a large column refreshes that noise, so they are left alone.
        let big = (0..p).map(|j| dot(w.col(j), w.col(j))).fold(T::zero(), |m, x| m.max(x));
        let noise = big * tol * tol;
        for i in 0..p {
            for j in i + 1..p {
                let (wi, wj) = two_cols(&mut w, i, j);
                let alpha = dot(wi, wi);
                let beta = dot(wj, wj);
                let gamma = dot(wi, wj);
                if alpha.min(beta) <= noise || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::of(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(wi, wj, c, s);
                let (ri, rj) = two_cols(&mut rot, i, j);
                rotate(ri, rj, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::NotConverged("one-sided Jacobi SVD"));
    }

    let sigma: Vec<T> = (0..p).map(|j| norm2(w.col(j))).collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| sigma[y].partial_cmp(&sigma[x]).expect("finite singular values"));

    let smax = sigma.iter().fold(T::zero(), |m, &x| m.max(x));
    let negligible = smax * T::epsilon() * T::of(1e-3);
    let mut u = Matrix::<T>::zeros(p, p);
    let mut v = Matrix::<T>::zeros(n, p);
    let mut s = Vec::with_capacity(p);
    let mut pending = Vec::new();
    for (k, &src) in order.iter().enumerate() {
        u.col_mut(k).copy_from_slice(rot.col(src));
        let sk = sigma[src];
        if sk > negligible {
            for (dst, &x) in v.col_mut(k).iter_mut().zip(w.col(src)) {
                *dst = x / sk;
            }
            s.push(sk);
        } else {
            pending.push(k);
            s.push(T::zero());
        }
    }
    complete_basis(&mut v, &pending);
    Ok(Svd { u, s, v })
}

fn two_cols<T>(m: &mut Matrix<T>, i: usize, j: usize) -> (&mut [T], &mut [T])
where
    T: Real,
{
    debug_assert!(i < j);
    let rows = m.rows();
    let (lo, hi) = m.as_mut_slice().split_at_mut(j * rows);
    (&mut lo[i * rows..(i + 1) * rows], &mut hi[..rows])
}

fn rotate<T: Real>(x: &mut [T], y: &mut [T], c: T, s: T) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

/// Fills the listed columns of `v` with unit vectors orthogonal to all other columns.
fn complete_basis<T: Real>(v: &mut Matrix<T>, pending: &[usize]) {
    let n = v.rows();
    let mut filled: Vec<usize> = (0..v.cols()).filter(|c| !pending.contains(c)).collect();
    let mut candidate = 0;
    for &k in pending {
        while candidate < n {
            let mut x = vec![T::zero(); n];
            x[candidate] = T::one();
            candidate += 1;
            for _ in 0..2 {
                for &f in &filled {
                    let col = v.col(f);
                    let h = dot(col, &x);
                    for (xi, &ci) in x.iter_mut().zip(col) {
                        *xi = *xi - h * ci;
                    }
                }
            }
            let nx = norm2(&x);
            if nx > T::of(0.5) {
                for (dst, xi) in v.col_mut(k).iter_mut().zip(x) {
                    *dst = xi / nx;
                }
                filled.push(k);
                break;
            }
        }
    }
}

/// Singular values of any matrix, descending.
pub fn singular_values<T: Real>(a: &Matrix<T>) -> Result<Vec<T>> {
    if a.rows() <= a.cols() {
        Ok(svd_small(a)?.s)
    } else {
        Ok(svd_small(&a.transpose())?.s)
    }
}
