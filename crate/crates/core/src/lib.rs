// `!(x > 0.0)` is used deliberately so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificates;
pub mod dynamics;
pub mod error;
pub mod estimation;
pub mod filter;
pub mod geometry;
pub mod harness;
pub mod verification;

pub use error::{Error, Result};
