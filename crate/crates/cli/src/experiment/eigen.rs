//! `eigen`: the interval reduction against `π²/4`, and the disk eigenvalue
//! on refined grids with the two-sided distance comparison.

use std::f64::consts::PI;

use malab_core::solver::{solve_eigen_interval, solve_eigen_with, EigenOptions, SolverConfig};
use malab_core::{ConvexDomain, Grid, LabError, ScalarField, Shape};
use serde::{Deserialize, Serialize};

use super::Outcome;
use crate::error::CliResult;
use crate::output::{Artifact, Csv};

pub const REQUIRED: &[&str] = &[
    "interval_error",
    "disk_spread",
    "distance_ratio",
    "unconverged",
];
pub const METRICS: &[&str] = &[
    "interval_error",
    "interval_lambda",
    "disk_spread",
    "disk_lambda_finest",
    "distance_ratio",
    "unconverged",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub interval_nodes: usize,
    pub interval_tol: f64,
    pub disk_cells: Vec<usize>,
    pub center: Vec<f64>,
    pub radius: f64,
    /// Residual tolerance of every inner Dirichlet solve.
    pub tol: f64,
    pub tol_lambda: f64,
    pub max_outer: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            interval_nodes: 512,
            interval_tol: 1e-12,
            disk_cells: vec![32, 64, 128],
            center: vec![0.0, 1.0],
            radius: 1.0,
            tol: 1e-8,
            tol_lambda: 1e-7,
            max_outer: 500,
        }
    }
}

impl Params {
    pub fn validate(&self) -> Result<(), LabError> {
        if self.disk_cells.len() < 2 {
            return Err(LabError::Config("need at least two disk grids".into()));
        }
        if self.center.len() != 2 {
            return Err(LabError::Config(
                "disk center must have two coordinates".into(),
            ));
        }
        Ok(())
    }
}

/// `(min, max)` of `|u|/d_∂Ω` over interior nodes at distance at least one
/// grid spacing from the boundary.
pub fn distance_bounds(field: &ScalarField) -> CliResult<(f64, f64)> {
    let g = field.grid();
    let h = g.spacing();
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for i in field.layout().interior_nodes() {
        let x = g.coords(i);
        let d = field.domain().boundary_distance(&x)?;
        if d < h {
            continue;
        }
        let r = field.value(i).abs() / d;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    if !lo.is_finite() {
        return Err(
            LabError::InsufficientData("no nodes one spacing inside the disk".into()).into(),
        );
    }
    Ok((lo, hi))
}

pub fn run(p: &Params) -> CliResult<Outcome> {
    let mut out = Outcome::default();
    let (lambda1, _, _) = solve_eigen_interval(p.interval_nodes, p.interval_tol, p.max_outer)?;
    out.metric("interval_lambda", lambda1);
    out.metric("interval_error", (lambda1 - PI * PI / 4.0).abs());

    let shape = Shape::Ball {
        center: p.center.clone(),
        radius: p.radius,
    };
    let marked = vec![p.center[0], p.center[1] - p.radius];
    let domain = ConvexDomain::with_marked_point(2, shape, marked, None)?;
    let cfg = SolverConfig {
        tol_residual: p.tol,
        ..Default::default()
    };
    let opts = EigenOptions {
        tol_lambda: p.tol_lambda,
        max_outer: p.max_outer,
        initial: None,
    };
    let mut csv = Csv::new(&[
        "cells",
        "h",
        "lambda",
        "outer_iterations",
        "converged",
        "ratio_min",
        "ratio_max",
    ]);
    let mut lambdas = Vec::new();
    let mut unconverged = 0usize;
    let mut last_ratio = f64::NAN;
    for &cells in &p.disk_cells {
        let g = Grid::covering(&domain, cells)?;
        let sol = solve_eigen_with(&domain, &g, 2, &cfg, &opts)?;
        let (lo, hi) = distance_bounds(&sol.field)?;
        unconverged += usize::from(!sol.report.converged);
        csv.row(&[
            cells.into(),
            g.spacing().into(),
            sol.lambda.into(),
            sol.report.iterations.into(),
            sol.report.converged.into(),
            lo.into(),
            hi.into(),
        ]);
        lambdas.push(sol.lambda);
        last_ratio = hi / lo;
    }
    let (lo, hi) = lambdas
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    out.metric("disk_spread", (hi - lo) / lo);
    out.metric("disk_lambda_finest", lambdas[lambdas.len() - 1]);
    out.metric("distance_ratio", last_ratio);
    out.metric("unconverged", unconverged as f64);
    out.artifacts.push(Artifact::csv("eigen.csv", &csv));
    Ok(out)
}
