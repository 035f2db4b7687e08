use crate::error::{Error, Result};
use crate::matrix::{Matrix, Real};

/// Dense N-way array, first index fastest. Modes are numbered from 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    dims: Vec<usize>,
    data: Vec<T>,
}

/// `(prod of extents before mode, extent, prod after mode)`.
fn split_dims(dims: &[usize], mode: usize) -> (usize, usize, usize) {
    let left = dims[..mode].iter().product();
    let right = dims[mode + 1..].iter().product();
    (left, dims[mode], right)
}

impl<T: Real> Tensor<T> {
    pub fn new(dims: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let len: usize = dims.iter().product();
        if dims.is_empty() || len != data.len() {
            return Err(Error::shape("Tensor::new", format!("dims {dims:?} need {len} values, got {}", data.len())));
        }
        Ok(Tensor { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Tensor { dims: dims.to_vec(), data: vec![T::zero(); dims.iter().product()] }
    }

    /// Fills by multi-index.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> T) -> Self {
        let len = dims.iter().product();
        let mut idx = vec![0; dims.len()];
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f(&idx));
            for (k, d) in idx.iter_mut().zip(dims) {
                *k += 1;
                if *k < *d {
                    break;
                }
                *k = 0;
            }
        }
        Tensor { dims: dims.to_vec(), data }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, idx: &[usize]) -> T {
        let mut lin = 0;
        for (k, (&i, &d)) in idx.iter().zip(&self.dims).enumerate().rev() {
            debug_assert!(i < d, "index {i} out of range in mode {k}");
            lin = lin * d + i;
        }
        self.data[lin]
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor { dims: self.dims.clone(), data: self.data.iter().map(|&x| U::of(x.f64())).collect() }
    }

    pub fn to_f64(&self) -> Tensor<f64> {
        self.cast()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.f64() * x.f64()).sum::<f64>().sqrt()
    }

    pub fn count_non_finite(&self) -> usize {
        self.data.iter().filter(|x| !x.is_finite()).count()
    }

    fn check_mode(&self, mode: usize, op: &'static str) -> Result<()> {
        if mode >= self.dims.len() {
            return Err(Error::shape(op, format!("mode {mode} of an order-{} tensor", self.dims.len())));
        }
        Ok(())
    }

    /// Mode-`mode` unfolding, `I_mode x prod_{k != mode} I_k`.
    ///
    /// Column index runs over the remaining modes in ascending order, first fastest.
    pub fn unfold(&self, mode: usize) -> Result<Matrix<T>> {
        self.check_mode(mode, "unfold")?;
        let (left, extent, right) = split_dims(&self.dims, mode);
        let mut out = Matrix::zeros(extent, left * right);
        for r in 0..right {
            for a in 0..extent {
                let src = &self.data[left * (a + extent * r)..left * (a + extent * r + 1)];
                for (l, &x) in src.iter().enumerate() {
                    out[(a, l + left * r)] = x;
                }
            }
        }
        Ok(out)
    }

    /// Inverse of [`Tensor::unfold`].
    pub fn fold(m: &Matrix<T>, mode: usize, dims: &[usize]) -> Result<Self> {
        if mode >= dims.len() {
            return Err(Error::shape("fold", format!("mode {mode} with dims {dims:?}")));
        }
        let (left, extent, right) = split_dims(dims, mode);
        if m.shape() != (extent, left * right) {
            return Err(Error::shape(
                "fold",
                format!("matrix {:?} does not unfold dims {dims:?} at mode {mode}", m.shape()),
            ));
        }
        let mut data = vec![T::zero(); dims.iter().product()];
        for r in 0..right {
            for a in 0..extent {
                for l in 0..left {
                    data[l + left * (a + extent * r)] = m[(a, l + left * r)];
                }
            }
        }
        Ok(Tensor { dims: dims.to_vec(), data })
    }

    /// `T x_mode M` for `M: I_mode x J`: the mode extent becomes `J`.
    ///
    /// Equals `fold(M^T unfold(T, mode))`.
    pub fn mode_contract(&self, m: &Matrix<T>, mode: usize) -> Result<Self> {
        self.check_mode(mode, "mode_contract")?;
        let (left, extent, right) = split_dims(&self.dims, mode);
        if m.rows() != extent {
            return Err(Error::shape(
                "mode_contract",
                format!("matrix {:?} against mode {mode} of extent {extent}", m.shape()),
            ));
        }
        let j = m.cols();
        let mut dims = self.dims.clone();
        dims[mode] = j;
        let mut data = vec![T::zero(); left * j * right];
        for r in 0..right {
            for b in 0..j {
                let dst = &mut data[left * (b + j * r)..left * (b + j * r + 1)];
                for a in 0..extent {
                    let coef = m[(a, b)];
                    if coef == T::zero() {
                        continue;
                    }
                    let src = &self.data[left * (a + extent * r)..left * (a + extent * r + 1)];
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d = *d + coef * s;
                    }
                }
            }
        }
        Ok(Tensor { dims, data })
    }

    /// Elementwise difference.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::shape("Tensor::sub", format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect();
        Ok(Tensor { dims: self.dims.clone(), data })
    }
}
