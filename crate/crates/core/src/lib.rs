//! Numerical laboratory for degenerate Monge-Ampère equations on convex
//! domains: a monotone wide-stencil solver, boundary-section geometry and
//! closed-form oracles.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analytic;
pub mod domain;
pub mod error;
pub mod field;
pub mod fit;
pub mod grid;
pub mod report;
pub mod section;
pub mod solver;

pub use domain::{ConvexDomain, Shape};
pub use error::{LabError, Result};
pub use field::{build_field, Layout, NodeKind, RealFn, ScalarField};
pub use grid::{Grid, GridSpec};
pub use report::{MonitorReport, VerifyReport};
