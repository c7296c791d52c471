//! Magnitude and maximum diversity of finite and compact positive definite
//! metric spaces.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod diversity;
pub mod error;
pub mod generate;
pub mod io;
pub mod linalg;
pub mod magnitude;
pub mod metric;
pub mod negtype;

pub use error::{MagError, Result};
pub use generate::{generate, Family, LpExponent, SpaceSpec};
pub use metric::FiniteMetricSpace;
