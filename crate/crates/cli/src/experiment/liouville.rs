//! `liouville-2d`: Dirichlet problems on the boxes `[−L, L] × [0, L]`
//! with growth-compliant and with non-uniqueness boundary data, compared
//! with `U₀` on a fixed inner window.

use malab_core::analytic::ClosedForm;
use malab_core::solver::{solve_dirichlet, RhsSpec, SolverConfig};
use malab_core::{Grid, LabError, ScalarField};
use serde::{Deserialize, Serialize};

use super::{Context, Outcome};
use crate::config::DomainConfig;
use crate::error::CliResult;
use crate::output::{Artifact, Csv};

pub const REQUIRED: &[&str] = &["case1_min_decay", "case2_min_gap_fraction", "case2_trend"];
pub const METRICS: &[&str] = &[
    "case1_min_decay",
    "case2_min_gap_fraction",
    "case2_trend",
    "exact_gap",
    "unconverged",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub alpha: f64,
    pub lengths: Vec<f64>,
    pub spacing: f64,
    /// `[[x1_lo, x2_lo], [x1_hi, x2_hi]]`.
    pub window: [[f64; 2]; 2],
    /// `δ` in the growth-compliant datum `U₀ + δ min(x_n, 1)`.
    pub perturbation: f64,
    /// Minimal distance from the window to the far sides of every box.
    pub boundary_layer: f64,
    pub tol: f64,
    pub stencil_width: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            alpha: 1.0,
            lengths: vec![2.0, 4.0, 8.0],
            spacing: 0.125,
            window: [[-1.0, 0.0], [1.0, 1.0]],
            perturbation: 1.0,
            boundary_layer: 1.0,
            tol: 1e-9,
            stencil_width: 2,
        }
    }
}

impl Params {
    pub fn validate(&self) -> Result<(), LabError> {
        if self.lengths.len() < 2
            || self
                .lengths
                .windows(2)
                .any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater))
        {
            return Err(LabError::Config(
                "lengths must increase and number at least two".into(),
            ));
        }
        let [lo, hi] = self.window;
        if !(lo[0] < hi[0] && lo[1] < hi[1] && lo[1] >= 0.0) {
            return Err(LabError::Config(format!(
                "invalid window {:?}",
                self.window
            )));
        }
        let reach = lo[0].abs().max(hi[0].abs());
        for &l in &self.lengths {
            if l - reach < self.boundary_layer || l - hi[1] < self.boundary_layer {
                return Err(LabError::Config(format!(
                    "window {:?} is within the boundary layer {} of the box with L = {l}",
                    self.window, self.boundary_layer
                )));
            }
        }
        Ok(())
    }

    fn in_window(&self, x: &[f64]) -> bool {
        let [lo, hi] = self.window;
        (0..2).all(|d| x[d] >= lo[d] - 1e-12 && x[d] <= hi[d] + 1e-12)
    }

    /// `max |a − b|` over the interior nodes in the window.
    fn window_sup(
        &self,
        field: &ScalarField,
        a: impl Fn(usize, &[f64]) -> f64,
        b: impl Fn(&[f64]) -> f64,
    ) -> f64 {
        let g = field.grid();
        field
            .layout()
            .interior_nodes()
            .filter_map(|i| {
                let x = g.coords(i);
                self.in_window(&x).then(|| (a(i, &x) - b(&x)).abs())
            })
            .fold(0.0, f64::max)
    }
}

pub fn run(p: &Params, _ctx: &Context) -> CliResult<Outcome> {
    p.validate()?;
    let u0 = ClosedForm::u0(2, p.alpha);
    let nu = ClosedForm::non_uniqueness(2, p.alpha);
    let cfg = SolverConfig {
        tol_residual: p.tol,
        stencil_width: p.stencil_width,
        ..Default::default()
    };
    let rhs = RhsSpec::half_space_power(2, p.alpha);
    let mut csv = Csv::new(&[
        "case",
        "length",
        "h",
        "deviation",
        "iterations",
        "converged",
    ]);
    let mut devs = [Vec::new(), Vec::new()];
    let mut unconverged = 0usize;
    let mut gap: f64 = 0.0;
    for case in [1usize, 2] {
        for &l in &p.lengths {
            let domain = DomainConfig::box_domain(2, l, l).build()?;
            let grid = Grid::new(p.spacing, &[-l, 0.0], &[l, l])?;
            let delta = p.perturbation;
            let (field, rep) = if case == 1 {
                solve_dirichlet(
                    &domain,
                    &grid,
                    &rhs,
                    move |x| u0.value(x) + delta * x[1].min(1.0),
                    &cfg,
                )?
            } else {
                solve_dirichlet(&domain, &grid, &rhs, move |x| nu.value(x), &cfg)?
            };
            let dev = p.window_sup(&field, |i, _| field.value(i), |x| u0.value(x));
            if case == 2 {
                gap = gap.max(p.window_sup(&field, |_, x| nu.value(x), |x| u0.value(x)));
            }
            unconverged += usize::from(!rep.converged);
            csv.row(&[
                case.into(),
                l.into(),
                grid.spacing().into(),
                dev.into(),
                rep.iterations.into(),
                rep.converged.into(),
            ]);
            devs[case - 1].push(dev);
        }
    }
    let mut out = Outcome::default();
    let decay = devs[0]
        .windows(2)
        .map(|w| w[0] / w[1])
        .fold(f64::INFINITY, f64::min);
    out.metric("case1_min_decay", decay);
    let c2 = &devs[1];
    out.metric("exact_gap", gap);
    out.metric(
        "case2_min_gap_fraction",
        c2.iter().fold(f64::INFINITY, |a, &d| a.min(d)) / gap,
    );
    out.metric("case2_trend", c2[0] / c2[c2.len() - 1]);
    out.metric("unconverged", unconverged as f64);
    out.artifacts.push(Artifact::csv("liouville.csv", &csv));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_inside_the_boundary_layer_is_rejected() {
        let p = Params {
            lengths: vec![1.5, 4.0],
            ..Default::default()
        };
        assert!(matches!(p.validate(), Err(LabError::Config(_))));
        assert!(Params::default().validate().is_ok());
    }

    #[test]
    fn short_run_reports_the_exact_gap() {
        let p = Params {
            lengths: vec![2.0, 3.0],
            spacing: 0.25,
            tol: 1e-8,
            ..Default::default()
        };
        let out = run(&p, &Context::default()).unwrap();
        // N − U₀ = x₂⁴/12 − x₁² x₂ / (2(1 + x₂)) at α = 1, over the window nodes
        let mut oracle: f64 = 0.0;
        for i in -4..=4 {
            for j in 1..=4 {
                let (x, y) = (0.25 * i as f64, 0.25 * j as f64);
                oracle = oracle.max((y.powi(4) / 12.0 - x * x * y / (2.0 * (1.0 + y))).abs());
            }
        }
        assert!(
            (out.metrics["exact_gap"] - oracle).abs() < 1e-12,
            "{:?}",
            out.metrics
        );
        assert_eq!(out.metrics["unconverged"], 0.0);
    }
}
