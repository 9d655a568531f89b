//! Damped nonlinear Gauss-Seidel for the Dirichlet problem, with a
//! coarse-to-fine initial guess.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{RhsMode, RhsSpec, SolverConfig, SweepOrder};
use super::operator::{affine_parts, node_solve, operator_value};
use super::stencil::Stencil;
use crate::domain::ConvexDomain;
use crate::error::{LabError, Result};
use crate::field::{axis_cuts, Layout, RealFn, ScalarField};
use crate::grid::{Grid, MIN_NODES_PER_AXIS};
use crate::report::MonitorReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual_sup: f64,
    pub residual_l1: f64,
    pub converged: bool,
    pub convexity_flag: bool,
    pub runtime_ms: f64,
    pub damping: f64,
}

/// Sweeps between residual evaluations.
const CHECK_EVERY: usize = 10;

struct Problem {
    stencil: Stencil,
    rhs: Vec<f64>,
    order: Vec<usize>,
}

impl Problem {
    fn new(layout: &Layout, rhs: Vec<f64>, config: &SolverConfig) -> Self {
        let stencil = Stencil::new(layout, config.stencil_width);
        let order = sweep_order(layout, &stencil, config.sweep_order);
        Problem {
            stencil,
            rhs,
            order,
        }
    }

    fn sweep(&self, work: &mut [f64], parts: &mut [(f64, f64)], omega: f64) {
        let st = &self.stencil;
        for &k in &self.order {
            let idx = st.unknowns[k];
            affine_parts(st.node_entries(k), work, parts);
            let target = node_solve(&st.frames, parts, self.rhs[idx]);
            work[idx] += omega * (target - work[idx]);
        }
    }

    /// `(sup, L¹ with cell volume, argmax node)` of `operator − rhs`.
    fn residual(&self, work: &[f64], parts: &mut [(f64, f64)], cell: f64) -> (f64, f64, usize) {
        let st = &self.stencil;
        let mut sup = 0.0;
        let mut l1 = 0.0;
        let mut arg = st.unknowns.first().copied().unwrap_or(0);
        for (k, &idx) in st.unknowns.iter().enumerate() {
            affine_parts(st.node_entries(k), work, parts);
            let r = (operator_value(&st.frames, parts, work[idx]) - self.rhs[idx]).abs();
            l1 += r * cell;
            if r > sup {
                sup = r;
                arg = idx;
            }
        }
        (sup, l1, arg)
    }
}

fn sweep_order(layout: &Layout, stencil: &Stencil, order: SweepOrder) -> Vec<usize> {
    let all: Vec<usize> = (0..stencil.unknowns.len()).collect();
    match order {
        SweepOrder::Lexicographic => all,
        SweepOrder::RedBlack => {
            let parity = |k: &usize| {
                let m = layout.grid.multi_index(stencil.unknowns[*k]);
                m.iter().sum::<usize>() % 2
            };
            let mut red: Vec<usize> = all.iter().copied().filter(|k| parity(k) == 0).collect();
            red.extend(all.iter().copied().filter(|k| parity(k) == 1));
            red
        }
    }
}

/// Solves `det D²u = rhs` with `u = boundary_trace` on the boundary of the
/// computational region.
pub fn solve_dirichlet(
    domain: &ConvexDomain,
    grid: &Grid,
    rhs: &RhsSpec,
    boundary_trace: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    config: &SolverConfig,
) -> Result<(ScalarField, SolveReport)> {
    solve_dirichlet_from(domain, grid, rhs, Arc::new(boundary_trace), config, None)
}

/// As [`solve_dirichlet`], optionally starting from given node values.
/// Without a start, a solve on the grid of double spacing is interpolated.
pub fn solve_dirichlet_from(
    domain: &ConvexDomain,
    grid: &Grid,
    rhs: &RhsSpec,
    trace: RealFn,
    config: &SolverConfig,
    start: Option<&[f64]>,
) -> Result<(ScalarField, SolveReport)> {
    config.validate()?;
    let t0 = Instant::now();
    let layout = Layout::new(domain, grid)?;
    let f = rhs.sample(&layout)?;
    let problem = Problem::new(&layout, f, config);
    let st = &problem.stencil;

    let mut work = st.work_buffer(&vec![0.0; grid.len()], trace.as_ref());
    let top = work[st.n_nodes..]
        .iter()
        .copied()
        .chain(
            layout
                .kinds
                .iter()
                .enumerate()
                .filter(|(_, k)| **k == crate::field::NodeKind::Boundary)
                .map(|(i, _)| trace(&grid.coords(i))),
        )
        .fold(f64::NEG_INFINITY, f64::max);
    let coarse = match (start, &rhs.mode) {
        (None, RhsMode::DegenerateDistance | RhsMode::Explicit(_)) => {
            coarse_guess(domain, grid, rhs, &trace, config)
        }
        _ => None,
    };
    for i in 0..grid.len() {
        let x = grid.coords(i);
        work[i] = match layout.kinds[i] {
            crate::field::NodeKind::Interior => match (start, &coarse) {
                (Some(s), _) => s[i],
                (None, Some(c)) => c.interpolate(&x).unwrap_or(top),
                (None, None) => top,
            },
            crate::field::NodeKind::Boundary => trace(&x),
            crate::field::NodeKind::Exterior => f64::NAN,
        };
    }
    if !work.iter().enumerate().all(|(i, v)| {
        i >= grid.len() && v.is_finite()
            || i < grid.len()
                && (layout.kinds[i] == crate::field::NodeKind::Exterior || v.is_finite())
    }) {
        return Err(LabError::Input(
            "boundary trace or start is not finite".into(),
        ));
    }

    let cell = grid.spacing().powi(grid.dim() as i32);
    let mut parts = vec![(0.0, 0.0); st.ndirs()];
    let mut omega = config.damping;
    let mut iters = 0;
    let (mut sup, mut l1, _) = problem.residual(&work, &mut parts, cell);
    while sup > config.tol_residual && iters < config.max_iters {
        let n = CHECK_EVERY.min(config.max_iters - iters);
        for _ in 0..n {
            problem.sweep(&mut work, &mut parts, omega);
        }
        iters += n;
        let (s, l, _) = problem.residual(&work, &mut parts, cell);
        if !s.is_finite() {
            break;
        }
        if s > sup && omega > 0.5 {
            omega = 0.5;
        }
        sup = s;
        l1 = l;
    }
    let converged = sup <= config.tol_residual;

    let values = work[..grid.len()].to_vec();
    let cuts = axis_cuts(&layout, &|x: &[f64]| trace(x));
    let field = ScalarField::from_parts(layout, values, cuts)?.with_trace(trace);
    let report = SolveReport {
        iterations: iters,
        residual_sup: sup,
        residual_l1: l1,
        converged,
        convexity_flag: field.convexity_flag(),
        runtime_ms: t0.elapsed().as_secs_f64() * 1e3,
        damping: omega,
    };
    Ok((field, report))
}

/// Solution on the grid with doubled spacing, when that grid still has
/// enough nodes per axis.
fn coarse_guess(
    domain: &ConvexDomain,
    grid: &Grid,
    rhs: &RhsSpec,
    trace: &RealFn,
    config: &SolverConfig,
) -> Option<ScalarField> {
    let counts = grid.counts();
    if counts
        .iter()
        .any(|&c| (c - 1).div_ceil(2) + 1 < 2 * MIN_NODES_PER_AXIS)
    {
        return None;
    }
    let h2 = 2.0 * grid.spacing();
    let lo = grid.lo().to_vec();
    let hi: Vec<f64> = counts
        .iter()
        .zip(&lo)
        .map(|(&c, a)| a + (c - 1).div_ceil(2) as f64 * h2)
        .collect();
    let coarse = Grid::new(h2, &lo, &hi).ok()?;
    solve_dirichlet_from(domain, &coarse, rhs, trace.clone(), config, None)
        .ok()
        .map(|(f, _)| f)
}

/// Monotone operator at one interior node of a field. Crossings off the
/// grid axes take their values from the field's trace.
pub fn discrete_ma_operator(
    field: &ScalarField,
    node: usize,
    config: &SolverConfig,
) -> Result<f64> {
    let layout = field.layout();
    if layout.kinds.get(node) != Some(&crate::field::NodeKind::Interior) {
        return Err(LabError::Input(format!("node {node} is not interior")));
    }
    let st = Stencil::for_nodes(layout, config.stencil_width, vec![node]);
    let work = st.work_buffer(field.values(), &|x| field.trace_value(x));
    let mut parts = vec![(0.0, 0.0); st.ndirs()];
    affine_parts(st.node_entries(0), &work, &mut parts);
    Ok(operator_value(&st.frames, &parts, work[node]))
}

/// Sup and L¹ norms of `operator − rhs` over the interior nodes.
pub fn residual_report(
    field: &ScalarField,
    rhs: &RhsSpec,
    config: &SolverConfig,
) -> Result<MonitorReport> {
    let layout = field.layout();
    let f = rhs.sample(layout)?;
    let st = Stencil::new(layout, config.stencil_width);
    let work = st.work_buffer(field.values(), &|x| field.trace_value(x));
    let mut parts = vec![(0.0, 0.0); st.ndirs()];
    let g = field.grid();
    let cell = g.spacing().powi(g.dim() as i32);
    let mut rep = MonitorReport::new("residual");
    let mut l1 = 0.0;
    for (k, &idx) in st.unknowns.iter().enumerate() {
        affine_parts(st.node_entries(k), &work, &mut parts);
        let r = (operator_value(&st.frames, &parts, work[idx]) - f[idx]).abs();
        l1 += r * cell;
        rep.observe(r, &g.coords(idx));
    }
    let sup = rep.max_value;
    Ok(rep
        .with_context("sup", sup)
        .with_context("l1", l1)
        .with_context("nodes", st.unknowns.len() as f64))
}
