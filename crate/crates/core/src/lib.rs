//! Dilation-invariant comparison of persistence diagrams.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub(crate) mod assignment;
pub mod barycenter;
pub mod bench;
pub mod bottleneck;
pub mod diagram;
pub mod dilation;
pub mod error;
pub mod logshift;
mod matching;
pub mod metric_spaces;
pub mod retrieval;
pub mod table;
pub mod vr;

pub use error::{Error, Result};
