//! Inverse-type iteration for `(det D²u)^{1/n} = λ|u|`, `u = 0` on the boundary.
//!
//! One step solves `det D²ũ = λₖⁿ|uₖ|ⁿ` with zero data. If `uₖ` were an
//! eigenfunction with eigenvalue `λ`, then `ũ = (λₖ/λ) uₖ`, so the estimate is
//! `λₖ₊₁ = λₖ · sup|uₖ| / sup|ũ|` followed by `uₖ₊₁ = ũ / sup|ũ|`.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;

use super::config::{RhsMode, RhsSpec, SolverConfig};
use super::dirichlet::{solve_dirichlet_from, SolveReport};
use crate::domain::{ConvexDomain, Shape};
use crate::error::{LabError, Result};
use crate::field::{Layout, NodeKind, ScalarField};
use crate::grid::Grid;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenOptions {
    /// Stop when `|λₖ₊₁ − λₖ| ≤ tol_lambda · λₖ₊₁`.
    pub tol_lambda: f64,
    pub max_outer: usize,
    /// Starting node values; `−d_∂Ω` when absent. Only the shape matters.
    pub initial: Option<Vec<f64>>,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol_lambda: 1e-7,
            max_outer: 500,
            initial: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenSolution {
    pub lambda: f64,
    pub field: ScalarField,
    pub report: SolveReport,
    /// `λ` after every outer step.
    pub history: Vec<f64>,
}

fn check_uniformly_convex(domain: &ConvexDomain) -> Result<()> {
    match domain.shape() {
        Shape::Ball { .. } => Ok(()),
        Shape::Superellipse { exponent, .. } if *exponent > 1.0 && *exponent <= 2.0 => Ok(()),
        s => Err(LabError::Precondition(format!(
            "eigen iteration needs a ball or a superellipse with exponent in (1, 2], got {s:?}"
        ))),
    }
}

fn sup_abs(layout: &Layout, v: &[f64]) -> f64 {
    layout
        .interior_nodes()
        .map(|i| v[i].abs())
        .fold(0.0, f64::max)
}

/// Eigenvalue and negative convex eigenfunction normalized to `sup|u| = 1`.
pub fn solve_eigen(
    domain: &ConvexDomain,
    grid: &Grid,
    n: usize,
    config: &SolverConfig,
) -> Result<EigenSolution> {
    solve_eigen_with(domain, grid, n, config, &EigenOptions::default())
}

pub fn solve_eigen_with(
    domain: &ConvexDomain,
    grid: &Grid,
    n: usize,
    config: &SolverConfig,
    opts: &EigenOptions,
) -> Result<EigenSolution> {
    if n != domain.dim() {
        return Err(LabError::Input(format!(
            "dimension {n} does not match the domain dimension {}",
            domain.dim()
        )));
    }
    check_uniformly_convex(domain)?;
    let t0 = Instant::now();
    let layout = Layout::new(domain, grid)?;
    let mut u = match &opts.initial {
        Some(v) if v.len() == grid.len() => v.clone(),
        Some(_) => {
            return Err(LabError::Input(
                "initial guess does not match the grid".into(),
            ))
        }
        None => {
            let mut v = vec![0.0; grid.len()];
            for i in layout.interior_nodes() {
                v[i] = -domain.boundary_distance(&grid.coords(i))?;
            }
            v
        }
    };
    let s = sup_abs(&layout, &u);
    if !(s > 0.0) || !s.is_finite() {
        return Err(LabError::Input(
            "initial guess vanishes on the interior".into(),
        ));
    }
    for i in 0..u.len() {
        u[i] = if layout.kinds[i] == NodeKind::Interior {
            u[i] / s
        } else {
            0.0
        };
    }

    let zero: crate::field::RealFn = Arc::new(|_| 0.0);
    let mut lambda = 1.0;
    let mut history = Vec::new();
    let mut converged = false;
    let mut last: Option<(ScalarField, SolveReport)> = None;
    for _ in 0..opts.max_outer {
        let rhs = RhsSpec {
            alpha: 0.0,
            g: Arc::new(|_| 1.0),
            mode: RhsMode::Eigen {
                lambda,
                previous: Arc::new(u.clone()),
            },
        };
        let (field, rep) =
            solve_dirichlet_from(domain, grid, &rhs, zero.clone(), config, Some(&u))?;
        let s = sup_abs(&layout, field.values());
        if !(s > 0.0) || !s.is_finite() {
            return Err(LabError::Input("iterate vanished".into()));
        }
        let next = lambda / s;
        history.push(next);
        for i in layout.interior_nodes() {
            u[i] = field.values()[i] / s;
        }
        let done = (next - lambda).abs() <= opts.tol_lambda * next && rep.converged;
        lambda = next;
        last = Some((field, rep));
        if done {
            converged = true;
            break;
        }
    }
    let (field, inner) =
        last.ok_or_else(|| LabError::Config("max_outer must be positive".into()))?;
    let field =
        ScalarField::from_parts(field.layout().clone(), u, field.cuts().to_vec())?.with_trace(zero);
    let report = SolveReport {
        iterations: history.len(),
        residual_sup: inner.residual_sup,
        residual_l1: inner.residual_l1,
        converged,
        convexity_flag: field.convexity_flag(),
        runtime_ms: t0.elapsed().as_secs_f64() * 1e3,
        damping: inner.damping,
    };
    Ok(EigenSolution {
        lambda,
        field,
        report,
        history,
    })
}

/// One-dimensional reduction `u'' = λ|u|` on `(−1, 1)` with `nodes` grid
/// points including the endpoints. Returns `(λ, u, outer iterations)`.
pub fn solve_eigen_interval(
    nodes: usize,
    tol: f64,
    max_outer: usize,
) -> Result<(f64, Vec<f64>, usize)> {
    if nodes < 8 {
        return Err(LabError::Resolution(format!(
            "{nodes} nodes, need at least 8"
        )));
    }
    let m = nodes - 2;
    let h = 2.0 / (nodes - 1) as f64;
    let x = |i: usize| -1.0 + (i + 1) as f64 * h;
    let mut u: Vec<f64> = (0..m).map(|i| -(1.0 - x(i).abs())).collect();
    let s = u.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    u.iter_mut().for_each(|v| *v /= s);
    let mut lambda = 1.0;
    for it in 1..=max_outer {
        // (ũ[i-1] − 2ũ[i] + ũ[i+1]) / h² = λ|u[i]|, zero ends; Thomas algorithm.
        let rhs = DVector::from_iterator(m, u.iter().map(|v| lambda * v.abs() * h * h));
        let sol = solve_tridiagonal(m, &rhs);
        let s = sol.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let next = lambda / s;
        u = sol.iter().map(|v| v / s).collect();
        let done = (next - lambda).abs() <= tol * next;
        lambda = next;
        if done {
            let mut full = vec![0.0];
            full.extend(u);
            full.push(0.0);
            return Ok((lambda, full, it));
        }
    }
    Err(LabError::Config(format!(
        "eigen iteration did not settle in {max_outer} steps"
    )))
}

/// Solves the `[1, −2, 1]` system.
fn solve_tridiagonal(m: usize, d: &DVector<f64>) -> Vec<f64> {
    let mut c = vec![0.0; m];
    let mut r = vec![0.0; m];
    c[0] = 1.0 / -2.0;
    r[0] = d[0] / -2.0;
    for i in 1..m {
        let den = -2.0 - c[i - 1];
        c[i] = 1.0 / den;
        r[i] = (d[i] - r[i - 1]) / den;
    }
    let mut out = vec![0.0; m];
    out[m - 1] = r[m - 1];
    for i in (0..m - 1).rev() {
        out[i] = r[i] - c[i] * out[i + 1];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_reduction_matches_cosine() {
        let (lambda, u, _) = solve_eigen_interval(512, 1e-12, 1000).unwrap();
        let exact = std::f64::consts::PI.powi(2) / 4.0;
        assert!((lambda - exact).abs() < 1e-3, "{lambda}");
        let h = 2.0 / 511.0;
        for (i, v) in u.iter().enumerate() {
            let x = -1.0 + i as f64 * h;
            assert!((v + (std::f64::consts::PI * x / 2.0).cos()).abs() < 1e-3);
        }
    }

    #[test]
    fn half_ball_is_rejected() {
        let d = ConvexDomain::new(2, Shape::HalfBall { radius: 1.0 }).unwrap();
        let g = Grid::covering(&d, 16).unwrap();
        assert!(matches!(
            solve_eigen(&d, &g, 2, &SolverConfig::default()),
            Err(LabError::Precondition(_))
        ));
    }
}
