//! `monitors`: normal-derivative ratio, Pogorelov series, level-set
//! Pogorelov series, growth envelope and tangent-cone profile.

use malab_core::analytic::{levelset_pogorelov_series, ClosedForm, ExplicitSmooth, Patch};
use malab_core::section::{
    compute_section, growth_envelope, normal_derivative_monitor, pogorelov_monitor,
    pogorelov_series, supporting_slope, tangent_cone_profile, ConeProfile,
};
use malab_core::{build_field, ConvexDomain, Grid, MonitorReport, Shape};
use serde::{Deserialize, Serialize};

use super::{prepare_half_ball, Context, Ladder, Outcome};
use crate::config::DomainConfig;
use crate::error::CliResult;
use crate::output::{Artifact, Csv};

pub const REQUIRED: &[&str] = &[
    "normal_derivative_ratio",
    "u0_normal_derivative_error",
    "pogorelov_log_slope_abs",
    "pogorelov_ball",
    "levelset_log_slope_abs",
];
pub const METRICS: &[&str] = &[
    "normal_derivative_ratio",
    "u0_normal_derivative_error",
    "pogorelov_log_slope_abs",
    "pogorelov_ball",
    "levelset_log_slope_abs",
    "growth_envelope",
    "tangent_cone_min",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub alpha: f64,
    pub cells: usize,
    pub tol: f64,
    pub t_max: f64,
    /// Radius of the neighbourhood of the marked point where the normal
    /// derivative and the growth envelope are monitored.
    pub radius: f64,
    pub heights: Ladder,
    /// Direction of the pure second derivative in the Pogorelov product.
    pub direction: Vec<f64>,
    pub u0_cells: usize,
    pub cone_scales: Vec<f64>,
    pub levelset_sigma: f64,
    pub levelset_center: Vec<f64>,
    pub levelset_per_axis: usize,
    pub levelset_radii: Vec<f64>,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            alpha: 1.0,
            cells: 256,
            tol: 1e-7,
            t_max: 0.1,
            radius: 0.25,
            heights: Ladder {
                h_max: 0.1,
                h_min: 0.1 / 64.0,
                factor: 2.0,
            },
            direction: vec![1.0, 0.0],
            u0_cells: 128,
            cone_scales: vec![0.25, 0.125, 0.0625],
            levelset_sigma: 2.0,
            levelset_center: vec![0.0, 0.1],
            levelset_per_axis: 9,
            levelset_radii: vec![0.04, 0.02, 0.01, 0.005, 0.0025],
        }
    }
}

/// Pogorelov product of `(|x|² − 1)/2` on the unit disk in the section
/// `{u < 0.5}` at the center; every direction gives exactly `1/2`.
pub fn ball_example(cells: usize) -> CliResult<MonitorReport> {
    let shape = Shape::Ball {
        center: vec![0.0, 0.0],
        radius: 1.0,
    };
    let d = ConvexDomain::with_marked_point(2, shape, vec![0.0, -1.0], None)?;
    let g = Grid::covering(&d, cells)?;
    let f = build_field(&d, &g, |x| 0.5 * (x[0] * x[0] + x[1] * x[1] - 1.0), |_| 0.0)?;
    let p = supporting_slope(&f, &[0.0, 0.0])?;
    let s = compute_section(&f, &[0.0, 0.0], &p, 0.5)?;
    let mut worst = pogorelov_monitor(&f, &s, &[1.0, 0.0])?;
    for dir in [[0.0, 1.0], [1.0, 1.0]] {
        let r = pogorelov_monitor(&f, &s, &dir)?;
        if (r.max_value - 0.5).abs() > (worst.max_value - 0.5).abs() {
            worst = r;
        }
    }
    Ok(worst)
}

#[derive(Serialize)]
struct MonitorFile<'a> {
    normal_derivative: &'a MonitorReport,
    u0_normal_derivative: &'a MonitorReport,
    pogorelov: &'a MonitorReport,
    pogorelov_ball: &'a MonitorReport,
    levelset_pogorelov: &'a MonitorReport,
    growth: &'a MonitorReport,
    tangent_cone: &'a [ConeProfile],
}

pub fn run(p: &Params, ctx: &Context) -> CliResult<Outcome> {
    let prep = prepare_half_ball(ctx, p.alpha, p.cells, p.tol, p.t_max)?;
    let f = &prep.shifted;
    let mut out = Outcome::default();

    let nd = normal_derivative_monitor(f, p.alpha, p.radius)?;
    out.metric(
        "normal_derivative_ratio",
        nd.max_value / nd.context["bound"],
    );

    let domain = DomainConfig::half_ball(2, 1.0).build()?;
    let grid = Grid::covering(&domain, p.u0_cells)?;
    let u0 = ClosedForm::u0(2, p.alpha);
    let sampled = build_field(&domain, &grid, move |x| u0.value(x), move |x| u0.value(x))?;
    let nd0 = normal_derivative_monitor(&sampled, p.alpha, p.radius)?;
    let bound = nd0.context["bound"];
    let eq = (nd0.max_value / bound - 1.0)
        .abs()
        .max((nd0.context["min_ratio"] / bound - 1.0).abs());
    out.metric("u0_normal_derivative_error", eq);

    let x0 = f.domain().marked_point().to_vec();
    let pog = pogorelov_series(f, &x0, &p.heights.heights(), &p.direction, p.alpha)?;
    out.metric("pogorelov_log_slope_abs", pog.context["log_slope"].abs());
    let ball = ball_example(64)?;
    out.metric("pogorelov_ball", ball.max_value);

    let patch = Patch {
        center: p.levelset_center.clone(),
        radius: p.levelset_radii.first().copied().unwrap_or(0.04),
        per_axis: p.levelset_per_axis,
        bracket: (-0.5, 1.0),
    };
    let ls = levelset_pogorelov_series(
        &ExplicitSmooth::tilted_quadratic(),
        p.levelset_sigma,
        &patch,
        &p.levelset_radii,
    )?;
    out.metric("levelset_log_slope_abs", ls.context["log_slope"].abs());

    let growth = growth_envelope(f, p.radius)?;
    out.metric("growth_envelope", growth.max_value);
    let dirs = vec![vec![1.0], vec![-1.0]];
    let cone = tangent_cone_profile(f, &dirs, &p.cone_scales)?;
    out.metric(
        "tangent_cone_min",
        cone.iter()
            .map(|c| c.gamma_hat)
            .fold(f64::INFINITY, f64::min),
    );

    let mut pcsv = Csv::new(&["h", "normalized_product"]);
    for &(h, v) in &pog.series {
        pcsv.row(&[h.into(), v.into()]);
    }
    let mut lcsv = Csv::new(&["radius", "product"]);
    for &(r, v) in &ls.series {
        lcsv.row(&[r.into(), v.into()]);
    }
    out.artifacts.push(Artifact::csv("pogorelov.csv", &pcsv));
    out.artifacts.push(Artifact::csv("levelset.csv", &lcsv));
    out.artifacts.push(Artifact::json(
        "monitors.json",
        &MonitorFile {
            normal_derivative: &nd,
            u0_normal_derivative: &nd0,
            pogorelov: &pog,
            pogorelov_ball: &ball,
            levelset_pogorelov: &ls,
            growth: &growth,
            tangent_cone: &cone,
        },
    ));
    Ok(out)
}
