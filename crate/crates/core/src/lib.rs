//! Solow-Polasky diversity on finite planar point sets, exhaustive subset
//! selection, and the reduction from geometric unit-disk independent set.
//!
//! ```
//! use spdiv::{diversity::{sp_of_subset, KernelParams}, geometry::{Point2, PointSet}};
//!
//! let x = PointSet::floating(vec![Point2::new(0.0, 0.0), Point2::new(3.0, 0.0)]).unwrap();
//! let sp = sp_of_subset(&x, &[0, 1], &KernelParams::new(1.0).unwrap()).unwrap();
//! assert!((sp.sp_value - 2.0 / (1.0 + (-3.0f64).exp())).abs() < 1e-12);
//! ```
//!
//! With the default `parallel` feature, subset enumeration runs on the
//! current rayon pool; without it everything is sequential.

// `!(x > 0.0)` style checks are meant to reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod diversity;
pub mod geometry;
pub mod linalg;
pub mod pointfile;
pub mod reduction;
pub mod solvers;
pub mod subsets;

pub use diversity::{KernelParams, SimilarityMatrix, Weighting};
pub use geometry::{Point2, PointSet};
pub use subsets::Execution;
