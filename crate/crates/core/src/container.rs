//! A small binary container for matrix and tensor fixtures.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    4 bytes  "MPRP"
//! version  u8       1
//! storage  u8       0 = f32, 1 = f64, 2 = FP16 bit patterns
//! layout   u8       0 = column-major (first index fastest), 1 = row-major
//! rank     u8       number of dimensions
//! dims     u64 x rank
//! payload  element size x prod(dims)
//! ```

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::floatfmt::FloatFormat;
use crate::linalg::Tensor;
use crate::matrix::{Matrix, Real};

const MAGIC: &[u8; 4] = b"MPRP";
const VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Storage {
    F32,
    F64,
    Fp16,
}

impl Storage {
    fn tag(self) -> u8 {
        match self {
            Storage::F32 => 0,
            Storage::F64 => 1,
            Storage::Fp16 => 2,
        }
    }

    fn from_tag(t: u8) -> Result<Self> {
        match t {
            0 => Ok(Storage::F32),
            1 => Ok(Storage::F64),
            2 => Ok(Storage::Fp16),
            _ => Err(Error::Container(format!("unknown storage tag {t}"))),
        }
    }

    fn width(self) -> usize {
        match self {
            Storage::F32 => 4,
            Storage::F64 => 8,
            Storage::Fp16 => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    ColumnMajor,
    RowMajor,
}

/// Decoded contents: dims and column-major values widened to `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Array {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
    pub storage: Storage,
}

impl Array {
    pub fn from_matrix<T: Real>(m: &Matrix<T>, storage: Storage) -> Self {
        Array { dims: vec![m.rows(), m.cols()], data: m.as_slice().iter().map(|x| x.f64()).collect(), storage }
    }

    pub fn from_tensor<T: Real>(t: &Tensor<T>, storage: Storage) -> Self {
        Array { dims: t.dims().to_vec(), data: t.as_slice().iter().map(|x| x.f64()).collect(), storage }
    }

    pub fn to_matrix<T: Real>(&self) -> Result<Matrix<T>> {
        if self.dims.len() != 2 {
            return Err(Error::Container(format!("expected a matrix, found rank {}", self.dims.len())));
        }
        Matrix::new(self.dims[0], self.dims[1], self.data.iter().map(|&x| T::of(x)).collect())
    }

    pub fn to_tensor<T: Real>(&self) -> Result<Tensor<T>> {
        Tensor::new(self.dims.clone(), self.data.iter().map(|&x| T::of(x)).collect())
    }
}

/// Position in column-major storage of the `k`-th element in row-major order.
fn row_major_order(dims: &[usize]) -> Vec<usize> {
    let len: usize = dims.iter().product();
    let mut strides = vec![1usize; dims.len()];
    for d in 1..dims.len() {
        strides[d] = strides[d - 1] * dims[d - 1];
    }
    let mut idx = vec![0usize; dims.len()];
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(idx.iter().zip(&strides).map(|(i, s)| i * s).sum());
        for d in (0..dims.len()).rev() {
            idx[d] += 1;
            if idx[d] < dims[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    out
}

pub fn encode(array: &Array, layout: Layout) -> Result<Vec<u8>> {
    let len: usize = array.dims.iter().product();
    if len != array.data.len() || array.dims.len() > u8::MAX as usize {
        return Err(Error::Container("dims do not match payload".into()));
    }
    let mut out = Vec::with_capacity(8 + 8 * array.dims.len() + len * array.storage.width());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(array.storage.tag());
    out.push(matches!(layout, Layout::RowMajor) as u8);
    out.push(array.dims.len() as u8);
    for &d in &array.dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    let order: Box<dyn Iterator<Item = usize>> = match layout {
        Layout::ColumnMajor => Box::new(0..len),
        Layout::RowMajor => Box::new(row_major_order(&array.dims).into_iter()),
    };
    for k in order {
        let x = array.data[k];
        match array.storage {
            Storage::F32 => out.extend_from_slice(&(x as f32).to_le_bytes()),
            Storage::F64 => out.extend_from_slice(&x.to_le_bytes()),
            Storage::Fp16 => {
                if !FloatFormat::FP16.is_representable(x) {
                    return Err(Error::Container(format!("{x:e} is not an FP16 value")));
                }
                out.extend_from_slice(&(FloatFormat::FP16.encode(x) as u16).to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<Array> {
    let bad = |what: &str| Error::Container(what.to_string());
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(bad("missing magic header"));
    }
    if bytes[4] != VERSION {
        return Err(Error::Container(format!("unsupported version {}", bytes[4])));
    }
    let storage = Storage::from_tag(bytes[5])?;
    let layout = match bytes[6] {
        0 => Layout::ColumnMajor,
        1 => Layout::RowMajor,
        t => return Err(Error::Container(format!("unknown layout flag {t}"))),
    };
    let rank = bytes[7] as usize;
    let header = 8 + 8 * rank;
    if bytes.len() < header {
        return Err(bad("truncated dims"));
    }
    let dims: Vec<usize> =
        bytes[8..header].chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")) as usize).collect();
    let len = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or_else(|| bad("dims overflow"))?;
    let w = storage.width();
    if bytes.len() != header + len * w {
        return Err(Error::Container(format!("payload has {} bytes, expected {}", bytes.len() - header, len * w)));
    }
    let values = bytes[header..].chunks_exact(w).map(|c| match storage {
        Storage::F32 => f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64,
        Storage::F64 => f64::from_le_bytes(c.try_into().expect("8 bytes")),
        Storage::Fp16 => FloatFormat::FP16.decode(u16::from_le_bytes(c.try_into().expect("2 bytes")) as u64),
    });
    let data = match layout {
        Layout::ColumnMajor => values.collect(),
        Layout::RowMajor => {
            let mut data = vec![0.0; len];
            for (k, x) in row_major_order(&dims).into_iter().zip(values) {
                data[k] = x;
            }
            data
        }
    };
    Ok(Array { dims, data, storage })
}

pub fn write_to(w: &mut impl Write, array: &Array, layout: Layout) -> Result<()> {
    let bytes = encode(array, layout)?;
    w.write_all(&bytes).map_err(|e| Error::Container(e.to_string()))
}

pub fn read_from(r: &mut impl Read) -> Result<Array> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::Container(e.to_string()))?;
    decode(&bytes)
}
