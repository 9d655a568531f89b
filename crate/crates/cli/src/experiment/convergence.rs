//! `dirichlet-convergence`: the `α = 0` quadratic problem on a square and
//! the half-ball problem with `U₀` data on a sequence of grids.

use malab_core::analytic::ClosedForm;
use malab_core::fit::fit_loglog;
use malab_core::solver::SolverConfig;
use malab_core::LabError;
use serde::{Deserialize, Serialize};

use super::{sup_error, Context, Outcome};
use crate::config::{
    BoundaryConfig, BoundaryKind, DomainConfig, GridConfig, ProblemConfig, RhsConfig, RhsModeConfig,
};
use crate::error::CliResult;
use crate::output::{Artifact, Csv};

pub const REQUIRED: &[&str] = &["quadratic_error_ratio", "convergence_slope", "unconverged"];
pub const METRICS: &[&str] = &[
    "quadratic_error_ratio",
    "convergence_slope",
    "unconverged",
    "finest_error",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub alpha: f64,
    pub cells: Vec<usize>,
    pub tol: f64,
    pub quadratic_cells: usize,
    pub stencil_width: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            alpha: 1.0,
            cells: vec![64, 128, 256],
            tol: 1e-10,
            quadratic_cells: 32,
            stencil_width: 2,
        }
    }
}

impl Params {
    pub fn validate(&self) -> Result<(), LabError> {
        if self.cells.len() < 2 {
            return Err(LabError::Config(
                "need at least two grids for a slope".into(),
            ));
        }
        Ok(())
    }

    fn solver(&self) -> SolverConfig {
        SolverConfig {
            tol_residual: self.tol,
            stencil_width: self.stencil_width,
            ..Default::default()
        }
    }
}

fn quad(x: &[f64]) -> f64 {
    0.5 * x.iter().map(|v| v * v).sum::<f64>()
}

pub fn run(p: &Params, ctx: &Context) -> CliResult<Outcome> {
    let mut out = Outcome::default();
    let mut csv = Csv::new(&[
        "problem",
        "cells",
        "h",
        "sup_error",
        "residual_sup",
        "iterations",
        "converged",
    ]);
    let mut unconverged = 0usize;

    let square = DomainConfig::box_domain(2, 1.0, 2.0);
    let quadratic = ProblemConfig {
        domain: square,
        grid: GridConfig::cells(p.quadratic_cells),
        rhs: RhsConfig::degenerate(0.0),
        solver: p.solver(),
        boundary: BoundaryConfig::of(BoundaryKind::Quadratic),
    };
    let s = ctx.solve(&quadratic)?;
    let h = s.field.grid().spacing();
    let err = sup_error(&s.field, quad);
    unconverged += usize::from(!s.report.converged);
    csv.row(&[
        "quadratic".into(),
        p.quadratic_cells.into(),
        h.into(),
        err.into(),
        s.report.residual_sup.into(),
        s.report.iterations.into(),
        s.report.converged.into(),
    ]);
    out.metric("quadratic_error_ratio", err / (h * h));

    let u0 = ClosedForm::u0(2, p.alpha);
    let (mut hs, mut errs) = (Vec::new(), Vec::new());
    for &cells in &p.cells {
        let problem = ProblemConfig {
            domain: DomainConfig::half_ball(2, 1.0),
            grid: GridConfig::cells(cells),
            rhs: RhsConfig {
                mode: RhsModeConfig::HalfSpacePower,
                ..RhsConfig::degenerate(p.alpha)
            },
            solver: p.solver(),
            boundary: BoundaryConfig::of(BoundaryKind::U0Trace),
        };
        let s = ctx.solve(&problem)?;
        let h = s.field.grid().spacing();
        let err = sup_error(&s.field, |x| u0.value(x));
        unconverged += usize::from(!s.report.converged);
        csv.row(&[
            "u0-half-ball".into(),
            cells.into(),
            h.into(),
            err.into(),
            s.report.residual_sup.into(),
            s.report.iterations.into(),
            s.report.converged.into(),
        ]);
        hs.push(h);
        errs.push(err);
    }
    out.metric("convergence_slope", fit_loglog(&hs, &errs)?.slope);
    out.metric("finest_error", errs[errs.len() - 1]);
    out.metric("unconverged", unconverged as f64);
    out.artifacts.push(Artifact::csv("convergence.csv", &csv));
    Ok(out)
}
