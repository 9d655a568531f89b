//! `volume-invariant`: spread of `|S_h|² d_h^α / hⁿ` across a height
//! ladder, and the same ratio for sampled `U₀` against a quadrature oracle.

use malab_core::analytic::ClosedForm;
use malab_core::section::normalize_section;
use malab_core::{build_field, Grid};
use serde::{Deserialize, Serialize};

use super::localization::section_records;
use super::{prepare_half_ball, Context, Ladder, Outcome};
use crate::config::DomainConfig;
use crate::error::CliResult;
use crate::output::{Artifact, Csv};

pub const REQUIRED: &[&str] = &["volume_ratio_spread", "u0_oracle_rel_error"];
pub const METRICS: &[&str] = &[
    "volume_ratio_spread",
    "dh_dn_spread",
    "u0_oracle_rel_error",
    "u0_volume_ratio",
    "u0_oracle_ratio",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub alpha: f64,
    pub cells: usize,
    pub tol: f64,
    pub t_max: f64,
    pub ladder: Ladder,
    /// Height of the `U₀` section compared with the oracle.
    pub oracle_h: f64,
    pub oracle_cells: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            alpha: 1.0,
            cells: 256,
            tol: 1e-7,
            t_max: 0.1,
            ladder: Ladder {
                h_max: 0.1,
                h_min: 0.1 / 128.0,
                factor: 2.0,
            },
            oracle_h: 1e-2,
            oracle_cells: 256,
        }
    }
}

/// `(area, centroid height)` of `{x₁²/2 + c x₂^{2+α} < h, x₂ > 0}` with
/// `c = 1/((1+α)(2+α))`, by the midpoint rule in `x₂`.
pub fn u0_section_oracle(h: f64, alpha: f64) -> (f64, f64) {
    let c = 1.0 / ((1.0 + alpha) * (2.0 + alpha));
    let top = (h / c).powf(1.0 / (2.0 + alpha));
    let m = 200_000;
    let dy = top / m as f64;
    let (mut area, mut moment) = (0.0, 0.0);
    for k in 0..m {
        let y = (k as f64 + 0.5) * dy;
        let w = 2.0 * (2.0 * (h - c * y.powf(2.0 + alpha))).max(0.0).sqrt();
        area += w * dy;
        moment += y * w * dy;
    }
    (area, moment / area)
}

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    hi / lo
}

pub fn run(p: &Params, ctx: &Context) -> CliResult<Outcome> {
    let prep = prepare_half_ball(ctx, p.alpha, p.cells, p.tol, p.t_max)?;
    let records = section_records(&prep.shifted, &p.ladder.heights(), p.alpha)?;
    let mut out = Outcome::default();
    let mut csv = Csv::new(&["h", "measure", "d_h", "d_n", "volume_ratio"]);
    for r in &records {
        csv.row(&[
            r.h.into(),
            r.measure.into(),
            r.d_h.into(),
            r.d_n.into(),
            r.volume_ratio.into(),
        ]);
    }
    out.metric(
        "volume_ratio_spread",
        spread(records.iter().map(|r| r.volume_ratio)),
    );
    out.metric(
        "dh_dn_spread",
        spread(records.iter().map(|r| r.d_h / r.d_n)),
    );

    let domain = DomainConfig::half_ball(2, 1.0).build()?;
    let grid = Grid::covering(&domain, p.oracle_cells)?;
    let u0 = ClosedForm::u0(2, p.alpha);
    let field = build_field(&domain, &grid, move |x| u0.value(x), move |x| u0.value(x))?;
    let rec = normalize_section(&field, &[0.0, 0.0], p.oracle_h, p.alpha)?;
    let (area, dh) = u0_section_oracle(p.oracle_h, p.alpha);
    let exact = area * area * dh.powf(p.alpha) / (p.oracle_h * p.oracle_h);
    out.metric("u0_volume_ratio", rec.volume_ratio);
    out.metric("u0_oracle_ratio", exact);
    out.metric(
        "u0_oracle_rel_error",
        (rec.volume_ratio / exact - 1.0).abs(),
    );
    out.artifacts.push(Artifact::csv("volume.csv", &csv));
    Ok(out)
}
