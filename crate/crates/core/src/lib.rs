//! Mixed-precision random projection.
//!
//! The crate is organised bottom-up:
//!
//! * [`floatfmt`]: arbitrary `eXmY` formats, scalar rounding and the statistics of
//!   Gaussian values stored in them.
//! * [`tcemu`]: a bit-exact model of the Tensor-Core `m16n8k8` multiply-accumulate
//!   (exact products, 25-bit truncating accumulator, RZ output).
//! * [`mpgemm`]: split-precision GEMM (SHGEMM, TCEC-SGEMM, plain low-precision GEMM)
//!   on top of the emulator, plus reference GEMMs and error metrics.
//! * [`randgen`]: seeded Gaussian and sparse-sign random matrices.
//! * [`linalg`]: dense QR, small SVD, tensors and mode products.
//! * [`randnla`]: randomized SVD and random-projection HOSVD.
//! * [`testmats`]: input generators with known spectra.
//! * [`theory`]: Monte-Carlo checks of the expectations behind the error bound.
//! * [`experiments`]: the accuracy studies, returned as plain rows.
//! * [`container`]: a small binary format for matrix and tensor fixtures.

pub mod container;
pub mod error;
pub mod experiments;
pub mod floatfmt;
pub mod linalg;
pub mod matrix;
pub mod mpgemm;
pub mod randgen;
pub mod randnla;
pub mod tcemu;
pub mod testmats;
pub mod theory;

pub use error::{Error, Result};
pub use floatfmt::{FloatFormat, RoundingMode};
pub use linalg::Tensor;
pub use matrix::{Matrix, Real};
pub use tcemu::FragmentPrecision;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
