//! Dense kernels used by the randomized algorithms: QR, a small SVD, tensors.

mod qr;
mod svd;
mod tensor;

pub use qr::{numerical_rank, pivoted_r_diagonal, qr};
pub use svd::{singular_values, svd_small, Svd};
pub use tensor::Tensor;

use crate::error::Result;
use crate::matrix::{Matrix, Real};

/// `(A A^T)^q A`, with the Gram matrix formed once and applied `q` times from the left.
pub fn power_scheme<T: Real>(a: &Matrix<T>, q: u32) -> Result<Matrix<T>> {
    if q == 0 {
        return Ok(a.clone());
    }
    let gram = a.matmul(&a.transpose())?;
    let mut y = a.clone();
    for _ in 0..q {
        y = gram.matmul(&y)?;
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_scheme_basics() {
        let a = Matrix::<f64>::from_fn(3, 2, |i, j| (i + j) as f64);
        assert_eq!(power_scheme(&a, 0).unwrap(), a);
        let q = Matrix::<f64>::identity(3).columns(0, 2);
        assert_eq!(power_scheme(&q, 1).unwrap(), q);
        let d = Matrix::<f64>::diag(&[2.0, 0.5]);
        let s = singular_values(&power_scheme(&d, 2).unwrap()).unwrap();
        assert_eq!(s, vec![32.0, 0.03125]);
    }
}
