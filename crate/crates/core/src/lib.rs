//! Renormalized energies for the boundary blow-up Liouville problem, Whitney
//! partitions of unity and weighted Hardy-Trudinger inequalities.

// `!(x <= cap)` is the NaN-rejecting form throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod energy;
pub mod error;
pub mod geometry;
pub mod hardy;
pub mod solver;
pub mod whitney;

pub use error::{Error, Result};
