//! Fredholm theory for non-symmetric kernels on quadrature grids.
//!
//! A kernel `N(y, z)` and a quadrature rule for `μ` are turned into a
//! [`nystrom::DiscreteOperator`], which the decomposition modules consume.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fredholm;
pub mod io;
pub mod jordanforms;
pub mod kernelgallery;
pub mod linalg;
pub mod measure;
pub mod nystrom;
pub mod operator_svd;
pub mod par;
pub mod powermethods;
pub mod spectral;

pub use error::{FredError, Result};
