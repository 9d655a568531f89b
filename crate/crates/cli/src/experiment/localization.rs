//! `localization-scaling`: boundary sections of a solved half-ball field
//! over a height ladder and the fitted growth exponents of their axes.

use malab_core::section::{normalize_section, scaling_fit, NormalizationRecord, ScalingFit};
use malab_core::ScalarField;
use serde::{Deserialize, Serialize};

use super::{prepare_half_ball, Context, Ladder, Outcome};
use crate::error::CliResult;
use crate::output::{Artifact, Cell, Csv};

pub const REQUIRED: &[&str] = &["tangential_slope", "normal_slope", "decades"];
pub const METRICS: &[&str] = &[
    "tangential_slope",
    "normal_slope",
    "dh_slope",
    "decades",
    "r2",
    "max_closure_defect",
    "boundary_normal_slope",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub alpha: f64,
    pub cells: usize,
    pub tol: f64,
    /// Normal range of the fit that removes `b x_n` at the marked point.
    pub t_max: f64,
    pub ladder: Ladder,
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
        }
    }
}

/// Records at the marked point for every height.
pub fn section_records(
    field: &ScalarField,
    heights: &[f64],
    alpha: f64,
) -> CliResult<Vec<NormalizationRecord>> {
    let x0 = field.domain().marked_point().to_vec();
    heights
        .iter()
        .map(|&h| Ok(normalize_section(field, &x0, h, alpha)?))
        .collect()
}

/// `h,tau_1…,d_1…,d_n,d_h,measure,volume_ratio`.
pub fn records_csv(records: &[NormalizationRecord]) -> Csv {
    let k = records.first().map_or(1, |r| r.axes.len());
    let mut header = vec!["h".to_string()];
    header.extend((1..=k).map(|i| format!("tau_{i}")));
    header.extend((1..=k).map(|i| format!("d_{i}")));
    header.extend(["d_n", "d_h", "measure", "volume_ratio"].map(String::from));
    let mut csv = Csv::new(&header);
    for r in records {
        let mut row: Vec<Cell> = vec![r.h.into()];
        row.extend(r.tau.iter().map(|&t| Cell::from(t)));
        row.extend(r.axes.iter().map(|&d| Cell::from(d)));
        row.extend([r.d_n, r.d_h, r.measure, r.volume_ratio].map(Cell::from));
        csv.row(&row);
    }
    csv
}

/// The JSON fit summary next to a records table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub tangential_slope: f64,
    pub normal_slope: f64,
    pub r2: f64,
    pub dh_slope: f64,
    pub decades: f64,
}

impl From<&ScalingFit> for FitSummary {
    fn from(f: &ScalingFit) -> Self {
        FitSummary {
            tangential_slope: f.tangential_slope,
            normal_slope: f.normal_slope,
            r2: f.r2,
            dh_slope: f.dh_slope,
            decades: f.decades,
        }
    }
}

pub fn run(p: &Params, ctx: &Context) -> CliResult<Outcome> {
    let prep = prepare_half_ball(ctx, p.alpha, p.cells, p.tol, p.t_max)?;
    let records = section_records(&prep.shifted, &p.ladder.heights(), p.alpha)?;
    let fit = scaling_fit(&records)?;
    let mut out = Outcome::default();
    out.metric("tangential_slope", fit.tangential_slope);
    out.metric("normal_slope", fit.normal_slope);
    out.metric("dh_slope", fit.dh_slope);
    out.metric("decades", fit.decades);
    out.metric("r2", fit.r2);
    out.metric(
        "max_closure_defect",
        records
            .iter()
            .map(|r| r.closure_defect(p.alpha))
            .fold(0.0, f64::max),
    );
    out.metric("boundary_normal_slope", prep.normal_slope);
    out.artifacts
        .push(Artifact::csv("sections.csv", &records_csv(&records)));
    out.artifacts
        .push(Artifact::json("fit.json", &FitSummary::from(&fit)));
    Ok(out)
}
