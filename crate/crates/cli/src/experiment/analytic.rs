//! `verify-analytic`: closed-form identities, barriers and transforms.

use super::Outcome;
use crate::error::CliResult;
use crate::output::{Artifact, Csv};
use crate::verify::{nonuniqueness_gap, verify_cases, VerifyKind, VerifyOptions};

pub const REQUIRED: &[&str] = &[
    "u0_max_deviation",
    "nonuniqueness_max_deviation",
    "nonuniqueness_gap",
    "barrier_failures",
    "barrier_min_samples",
    "wbar_max_deviation",
    "v_det_deviation",
    "legendre_involution_ratio",
    "partial_legendre_closed_residual",
    "partial_legendre_fd_residual",
    "levelset_gauss_deviation",
];

pub const METRICS: &[&str] = &[
    "u0_max_deviation",
    "nonuniqueness_max_deviation",
    "nonuniqueness_gap",
    "barrier_failures",
    "barrier_min_samples",
    "barrier_min_margin",
    "wbar_max_deviation",
    "v_det_deviation",
    "legendre_involution_ratio",
    "partial_legendre_closed_residual",
    "partial_legendre_fd_residual",
    "levelset_gauss_deviation",
];

pub fn run(opts: &VerifyOptions) -> CliResult<Outcome> {
    let mut out = Outcome::default();
    let mut csv = Csv::new(&[
        "suite",
        "case",
        "dimension",
        "alpha",
        "max_deviation",
        "margin",
        "samples",
        "pass",
    ]);
    let mut failures = 0usize;
    let mut min_samples = usize::MAX;
    let mut min_margin = f64::INFINITY;
    let mut wbar: f64 = 0.0;
    for kind in VerifyKind::ALL {
        let (agg, cases) = verify_cases(kind, opts)?;
        for c in &cases {
            let r = &c.report;
            csv.row(&[
                kind.name().into(),
                r.kind.as_str().into(),
                c.dimension.into(),
                c.alpha.into(),
                r.max_deviation.into(),
                r.margin.into(),
                r.samples.into(),
                r.pass.into(),
            ]);
        }
        match kind {
            VerifyKind::U0 => out.metric("u0_max_deviation", agg.max_deviation),
            VerifyKind::Nonuniqueness => {
                out.metric("nonuniqueness_max_deviation", agg.max_deviation)
            }
            VerifyKind::BarrierW1
            | VerifyKind::BarrierW2
            | VerifyKind::BarrierW3
            | VerifyKind::BarrierV => {
                for c in &cases {
                    if c.report.kind == "wbar-derivatives" {
                        wbar = wbar.max(c.report.max_deviation);
                    } else {
                        min_samples = min_samples.min(c.report.samples);
                        min_margin = min_margin.min(c.report.margin);
                    }
                    failures += usize::from(!c.report.pass);
                }
                if kind == VerifyKind::BarrierV {
                    out.metric("v_det_deviation", agg.max_deviation);
                }
            }
            VerifyKind::Legendre => out.metric("legendre_involution_ratio", agg.max_deviation),
            VerifyKind::PartialLegendre => {
                let worst = |name: &str| {
                    cases
                        .iter()
                        .filter(|c| c.report.kind == name)
                        .map(|c| c.report.max_deviation)
                        .fold(0.0, f64::max)
                };
                out.metric(
                    "partial_legendre_closed_residual",
                    worst("partial-legendre-u0"),
                );
                out.metric("partial_legendre_fd_residual", worst("partial-legendre-fd"));
            }
            VerifyKind::Levelset => out.metric("levelset_gauss_deviation", agg.max_deviation),
        }
    }
    out.metric("nonuniqueness_gap", nonuniqueness_gap());
    out.metric("barrier_failures", failures as f64);
    out.metric("barrier_min_samples", min_samples as f64);
    out.metric("barrier_min_margin", min_margin);
    out.metric("wbar_max_deviation", wbar);
    out.artifacts.push(Artifact::csv("verify.csv", &csv));
    Ok(out)
}
