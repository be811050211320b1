//! Numerical laboratory for the Dirichlet-to-Neumann map of the conductivity
//! equation in three dimensions and the boundary-determination estimates
//! built on it.

// NaN-rejecting guards are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod density;
pub mod dtn;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod fit;
pub mod geometry;
pub mod kernels;
pub mod linalg;
pub mod liouville;
pub mod recovery;
pub mod trace;
pub mod vec3;

pub use error::{LabError, Result, StageExt};
