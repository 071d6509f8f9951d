//! Distributed predefined-time zero-gradient-sum optimization.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod costs;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod oracle;
pub mod sim;

pub use error::{Error, Result};
