use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix, Real};

/// Euclidean norm with scaling, safe against overflow for large entries.
pub(crate) fn norm2<T: Real>(x: &[T]) -> T {
    let scale = x.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if scale == T::zero() || !scale.is_finite() {
        return scale;
    }
    let s: T = x
        .iter()
        .map(|&v| {
            let r = v / scale;
            r * r
        })
        .sum();
    scale * s.sqrt()
}

/// Reflector `I - tau v v^T` with `v[0] = 1` that maps `x` to `beta e_1`, `beta <= 0` when `x[0] >= 0`.
fn householder<T: Real>(x: &mut [T]) -> (T, T) {
    let alpha = x[0];
    let norm = norm2(x);
    if norm == T::zero() {
        return (T::zero(), T::zero());
    }
    let beta = if alpha >= T::zero() { -norm } else { norm };
    let v0 = alpha - beta;
    for v in x[1..].iter_mut() {
        *v = *v / v0;
    }
    x[0] = T::one();
    ((beta - alpha) / beta, beta)
}

fn apply_reflector<T: Real>(v: &[T], tau: T, col: &mut [T]) {
    if tau == T::zero() {
        return;
    }
    let w = dot(v, col) * tau;
    for (c, &vi) in col.iter_mut().zip(v) {
        *c = *c - w * vi;
    }
}

fn check_finite<T: Real>(a: &Matrix<T>, context: &'static str) -> Result<()> {
    match a.count_non_finite() {
        0 => Ok(()),
        count => Err(Error::NonFinite { context, count }),
    }
}

/// Thin Householder QR of an `m x n` matrix with `m >= n`.
///
/// `R` has a non-negative diagonal, which makes the factorisation unique for full-rank input.
pub fn qr<T: Real>(a: &Matrix<T>) -> Result<(Matrix<T>, Matrix<T>)> {
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::shape("qr", format!("need rows >= cols, got {m}x{n}")));
    }
    check_finite(a, "qr input")?;
    let mut w = a.clone();
    let mut taus = vec![T::zero(); n];
    let mut r = Matrix::<T>::zeros(n, n);
    for j in 0..n {
        let (tau, beta) = householder(&mut w.col_mut(j)[j..]);
        taus[j] = tau;
        r[(j, j)] = beta;
        let (head, tail) = w.as_mut_slice().split_at_mut((j + 1) * m);
        let v = &head[j * m + j..(j + 1) * m];
        for col in tail.chunks_mut(m) {
            apply_reflector(v, tau, &mut col[j..]);
        }
    }
    for j in 0..n {
        for i in 0..j {
            r[(i, j)] = w[(i, j)];
        }
    }
    let mut q = Matrix::<T>::from_fn(m, n, |i, j| if i == j { T::one() } else { T::zero() });
    for j in (0..n).rev() {
        let v = &w.col(j)[j..];
        for c in j..n {
            apply_reflector(v, taus[j], &mut q.col_mut(c)[j..]);
        }
    }
    for j in 0..n {
        if r[(j, j)] < T::zero() {
            for c in j..n {
                r[(j, c)] = -r[(j, c)];
            }
            for x in q.col_mut(j) {
                *x = -*x;
            }
        }
    }
    Ok((q, r))
}

/// Diagonal of `R` from a column-pivoted Householder QR, in decreasing magnitude.
pub fn pivoted_r_diagonal(a: &Matrix<f64>) -> Result<Vec<f64>> {
    check_finite(a, "pivoted QR input")?;
    let (m, n) = a.shape();
    let mut w = a.clone();
    let steps = m.min(n);
    let mut diag = Vec::with_capacity(steps);
    for j in 0..steps {
        let pivot =
            (j..n).max_by(|&x, &y| norm2(&w.col(x)[j..]).total_cmp(&norm2(&w.col(y)[j..]))).expect("non-empty range");
        if pivot != j {
            let (lo, hi) = w.as_mut_slice().split_at_mut(pivot * m);
            lo[j * m..(j + 1) * m].swap_with_slice(&mut hi[..m]);
        }
        let (tau, beta) = householder(&mut w.col_mut(j)[j..]);
        diag.push(beta.abs());
        let (head, tail) = w.as_mut_slice().split_at_mut((j + 1) * m);
        let v = &head[j * m + j..(j + 1) * m];
        for col in tail.chunks_mut(m) {
            apply_reflector(v, tau, &mut col[j..]);
        }
    }
    Ok(diag)
}

/// Number of pivots above `rel_tol * |R_00|`.
pub fn numerical_rank(a: &Matrix<f64>, rel_tol: f64) -> Result<usize> {
    let d = pivoted_r_diagonal(a)?;
    let top = d.first().copied().unwrap_or(0.0);
    Ok(d.iter().filter(|&&x| x > rel_tol * top).count())
}
