//! Monotone wide-stencil solver for `det D²u = f`.

pub mod config;
pub mod dirichlet;
pub mod eigen;
pub mod operator;
pub mod stencil;

pub use config::{RhsMode, RhsSpec, SolverConfig, SweepOrder};
pub use dirichlet::{
    discrete_ma_operator, residual_report, solve_dirichlet, solve_dirichlet_from, SolveReport,
};
pub use eigen::{solve_eigen, solve_eigen_interval, solve_eigen_with, EigenOptions, EigenSolution};
