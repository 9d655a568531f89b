//! Closed-form verification suites behind `verify --kind`.

use malab_core::analytic::closed_form::half_space_samples;
use malab_core::analytic::legendre::closed_form_residual;
use malab_core::analytic::{
    calibrate_w1, gauss_identity_check, involution_check, legendre_full, level_set_graph,
    partial_legendre_2d, verify_barrier, verify_ma_identity, verify_wbar_formulas, BarrierSpec,
    ClosedForm, ExplicitSmooth, Smooth,
};
use malab_core::solver::RhsSpec;
use malab_core::{build_field, ConvexDomain, Grid, Result, Shape, VerifyReport};
use serde::{Deserialize, Serialize};

/// Tolerance for the closed-form identities and traces.
pub const IDENTITY_TOL: f64 = 1e-10;
/// Tolerance for the level-set Gauss identity.
pub const GAUSS_TOL: f64 = 1e-8;

pub const ALPHAS: [f64; 4] = [0.0, 0.5, 1.0, 2.0];
pub const BARRIER_ALPHAS: [f64; 2] = [0.5, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum VerifyKind {
    U0,
    Nonuniqueness,
    BarrierW1,
    BarrierW2,
    BarrierW3,
    BarrierV,
    Legendre,
    PartialLegendre,
    Levelset,
}

impl VerifyKind {
    pub const ALL: [VerifyKind; 9] = [
        VerifyKind::U0,
        VerifyKind::Nonuniqueness,
        VerifyKind::BarrierW1,
        VerifyKind::BarrierW2,
        VerifyKind::BarrierW3,
        VerifyKind::BarrierV,
        VerifyKind::Legendre,
        VerifyKind::PartialLegendre,
        VerifyKind::Levelset,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VerifyKind::U0 => "u0",
            VerifyKind::Nonuniqueness => "nonuniqueness",
            VerifyKind::BarrierW1 => "barrier-w1",
            VerifyKind::BarrierW2 => "barrier-w2",
            VerifyKind::BarrierW3 => "barrier-w3",
            VerifyKind::BarrierV => "barrier-v",
            VerifyKind::Legendre => "legendre",
            VerifyKind::PartialLegendre => "partial-legendre",
            VerifyKind::Levelset => "levelset",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyOptions {
    /// Samples per closed-form identity case.
    pub samples: usize,
    /// Samples per barrier case.
    pub barrier_samples: usize,
    /// Height or `ε` parameter of the `W2`, `W3` and `V` barriers.
    pub barrier_scale: f64,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            samples: 1000,
            barrier_samples: 10_000,
            barrier_scale: 0.01,
            seed: 1,
        }
    }
}

/// One verified case inside a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub dimension: usize,
    pub alpha: f64,
    pub report: VerifyReport,
}

/// Combines case reports: worst deviation and margin, summed samples.
fn aggregate(kind: &str, cases: &[CaseReport]) -> VerifyReport {
    let mut out = VerifyReport {
        kind: kind.to_string(),
        max_deviation: 0.0,
        margin: f64::INFINITY,
        samples: 0,
        pass: true,
        worst_point: None,
    };
    for c in cases {
        let r = &c.report;
        if r.max_deviation >= out.max_deviation {
            out.max_deviation = r.max_deviation;
            out.worst_point = r.worst_point.clone();
        }
        out.margin = out.margin.min(r.margin);
        out.samples += r.samples;
        out.pass &= r.pass;
    }
    out
}

fn identity_cases(
    make: fn(usize, f64) -> ClosedForm,
    opts: &VerifyOptions,
) -> Result<Vec<CaseReport>> {
    let mut cases = Vec::new();
    for dim in [2, 3] {
        let samples = half_space_samples(dim, opts.samples, opts.seed + dim as u64);
        for alpha in ALPHAS {
            let sol = make(dim, alpha);
            let rep = verify_ma_identity(&sol, &samples)?;
            let dev = rep.max_value.max(rep.context["trace_deviation"]);
            cases.push(CaseReport {
                dimension: dim,
                alpha,
                report: VerifyReport {
                    kind: format!("{:?}", sol.kind),
                    max_deviation: dev,
                    margin: IDENTITY_TOL - dev,
                    samples: samples.len(),
                    pass: dev <= IDENTITY_TOL,
                    worst_point: Some(rep.argmax),
                },
            });
        }
    }
    Ok(cases)
}

fn barrier_cases(kind: VerifyKind, opts: &VerifyOptions) -> Result<Vec<CaseReport>> {
    let mut cases = Vec::new();
    let s = opts.barrier_scale;
    for dim in [2, 3] {
        for alpha in BARRIER_ALPHAS {
            let rhs = RhsSpec::degenerate(alpha);
            let seed = opts.seed + 10 * dim as u64 + (4.0 * alpha) as u64;
            let report = match kind {
                VerifyKind::BarrierW1 => {
                    calibrate_w1(
                        &BarrierSpec::w1(dim, alpha),
                        &rhs,
                        opts.barrier_samples,
                        seed,
                    )?
                    .1
                }
                VerifyKind::BarrierW2 => verify_barrier(
                    &BarrierSpec::w2(dim, alpha, s),
                    &rhs,
                    opts.barrier_samples,
                    seed,
                )?,
                VerifyKind::BarrierW3 => verify_barrier(
                    &BarrierSpec::w3(dim, alpha, s),
                    &rhs,
                    opts.barrier_samples,
                    seed,
                )?,
                VerifyKind::BarrierV => verify_barrier(
                    &BarrierSpec::v(dim, alpha, s),
                    &rhs,
                    opts.barrier_samples,
                    seed,
                )?,
                _ => unreachable!("not a barrier kind"),
            };
            cases.push(CaseReport {
                dimension: dim,
                alpha,
                report,
            });
        }
    }
    if kind == VerifyKind::BarrierW1 {
        // the profile w̄ enters every W1 case through its default exponent
        for dim in [2, 3] {
            let gamma = malab_core::analytic::barrier::default_gamma(dim);
            cases.push(CaseReport {
                dimension: dim,
                alpha: f64::NAN,
                report: verify_wbar_formulas(gamma, opts.samples.max(1000), opts.seed)?,
            });
        }
    }
    Ok(cases)
}

fn box_domain() -> Result<(ConvexDomain, Grid)> {
    let verts = vec![
        vec![-1.0, 0.0],
        vec![1.0, 0.0],
        vec![1.0, 1.0],
        vec![-1.0, 1.0],
    ];
    let d = ConvexDomain::new(
        2,
        Shape::Polytope {
            vertices: verts,
            faces: vec![],
        },
    )?;
    let g = Grid::new(1.0 / 32.0, &[-1.0, 0.0], &[1.0, 1.0])?;
    Ok((d, g))
}

/// Involution of the discrete transform on `U₀` and a skew quadratic;
/// `max_deviation` is reported relative to the interpolation tolerance.
fn legendre_cases() -> Result<Vec<CaseReport>> {
    let (d, g) = box_domain()?;
    let dual = Grid::new(1.0 / 32.0, &[-1.5, -1.0], &[1.5, 1.5])?;
    let u0 = ClosedForm::u0(2, 1.0);
    let fields = [
        build_field(&d, &g, move |x| u0.value(x), move |x| u0.value(x))?,
        build_field(
            &d,
            &g,
            |x| 0.6 * x[0] * x[0] + 0.3 * x[0] * x[1] + 0.5 * x[1] * x[1] + 0.1 * x[0],
            |x| 0.6 * x[0] * x[0] + 0.3 * x[0] * x[1] + 0.5 * x[1] * x[1] + 0.1 * x[0],
        )?,
    ];
    let mut cases = Vec::new();
    for f in &fields {
        let us = legendre_full(f, &dual)?;
        let rep = involution_check(f, &us);
        let tol = rep.context["tolerance"];
        let ratio = rep.max_value / tol;
        cases.push(CaseReport {
            dimension: 2,
            alpha: 1.0,
            report: VerifyReport {
                kind: "legendre-involution".into(),
                max_deviation: ratio,
                margin: 1.0 - ratio,
                samples: f.layout().interior_nodes().count(),
                pass: ratio <= 1.0,
                worst_point: Some(rep.argmax),
            },
        });
    }
    Ok(cases)
}

/// Closed-form residual of both explicit solutions (exact zero expected for
/// `U₀`) and the finite-difference residual of the discrete transform of
/// sampled `U₀`.
fn partial_legendre_cases(opts: &VerifyOptions) -> Result<Vec<CaseReport>> {
    let pts: Vec<(f64, f64)> = (0..opts.samples)
        .map(|k| {
            let t = k as f64 / opts.samples.max(2) as f64;
            (4.0 * t - 2.0, (7.0 * t).fract() * 2.0)
        })
        .collect();
    let mut cases = Vec::new();
    for alpha in ALPHAS {
        let rep = closed_form_residual(&ClosedForm::u0(2, alpha), &pts)?;
        cases.push(CaseReport {
            dimension: 2,
            alpha,
            report: VerifyReport {
                kind: "partial-legendre-u0".into(),
                max_deviation: rep.max_value,
                margin: -rep.max_value,
                samples: pts.len(),
                pass: rep.max_value == 0.0,
                worst_point: Some(rep.argmax),
            },
        });
    }
    let (d, g) = box_domain()?;
    let u0 = ClosedForm::u0(2, 1.0);
    let f = build_field(&d, &g, move |x| u0.value(x), move |x| u0.value(x))?;
    let t = partial_legendre_2d(&f, (0.25, 0.75))?;
    let rep = t.residual_fd(1.0)?;
    cases.push(CaseReport {
        dimension: 2,
        alpha: 1.0,
        report: VerifyReport {
            kind: "partial-legendre-fd".into(),
            max_deviation: rep.max_value,
            margin: GAUSS_TOL - rep.max_value,
            samples: t.p.len() * t.xn.len(),
            pass: rep.max_value <= GAUSS_TOL,
            worst_point: Some(rep.argmax),
        },
    });
    Ok(cases)
}

fn levelset_cases() -> Result<Vec<CaseReport>> {
    let line: Vec<Vec<f64>> = (0..41).map(|k| vec![-0.4 + 0.02 * k as f64]).collect();
    let tilted = ExplicitSmooth::tilted_quadratic();
    let mut cases = Vec::new();
    let mut push = |u: &dyn Smooth, alpha: f64, s: f64, bracket: (f64, f64)| -> Result<()> {
        let graph = level_set_graph(u, s, &line, bracket)?;
        let rep = gauss_identity_check(u, alpha, &graph);
        cases.push(CaseReport {
            dimension: 2,
            alpha,
            report: VerifyReport {
                kind: "levelset-gauss".into(),
                max_deviation: rep.max_value,
                margin: GAUSS_TOL - rep.max_value,
                samples: graph.len(),
                pass: rep.max_value <= GAUSS_TOL,
                worst_point: Some(rep.argmax),
            },
        });
        Ok(())
    };
    push(&tilted, 0.0, 0.5, (-0.9, 3.0))?;
    for alpha in [0.5, 1.0, 2.0] {
        push(&ClosedForm::u0(2, alpha), alpha, 0.2, (0.0, 3.0))?;
    }
    Ok(cases)
}

/// Runs one suite and returns its aggregate with the individual cases.
pub fn verify_cases(
    kind: VerifyKind,
    opts: &VerifyOptions,
) -> Result<(VerifyReport, Vec<CaseReport>)> {
    let cases = match kind {
        VerifyKind::U0 => identity_cases(ClosedForm::u0, opts)?,
        VerifyKind::Nonuniqueness => identity_cases(ClosedForm::non_uniqueness, opts)?,
        VerifyKind::BarrierW1
        | VerifyKind::BarrierW2
        | VerifyKind::BarrierW3
        | VerifyKind::BarrierV => barrier_cases(kind, opts)?,
        VerifyKind::Legendre => legendre_cases()?,
        VerifyKind::PartialLegendre => partial_legendre_cases(opts)?,
        VerifyKind::Levelset => levelset_cases()?,
    };
    Ok((aggregate(kind.name(), &cases), cases))
}

pub fn verify(kind: VerifyKind, opts: &VerifyOptions) -> Result<VerifyReport> {
    verify_cases(kind, opts).map(|r| r.0)
}

/// Smallest `|N − U₀|` at `(1, …, 1)` over the identity exponents.
pub fn nonuniqueness_gap() -> f64 {
    let mut gap = f64::INFINITY;
    for dim in [2, 3] {
        let x = vec![1.0; dim];
        for alpha in ALPHAS {
            let d = ClosedForm::non_uniqueness(dim, alpha).value(&x)
                - ClosedForm::u0(dim, alpha).value(&x);
            gap = gap.min(d.abs());
        }
    }
    gap
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> VerifyOptions {
        VerifyOptions {
            samples: 200,
            barrier_samples: 500,
            ..Default::default()
        }
    }

    #[test]
    fn every_suite_passes_with_few_samples() {
        for kind in VerifyKind::ALL {
            let rep = verify(kind, &quick()).unwrap();
            assert!(rep.pass, "{}: {rep:?}", kind.name());
            assert_eq!(rep.kind, kind.name());
        }
    }

    #[test]
    fn identity_suite_counts_every_case() {
        let (rep, cases) = verify_cases(VerifyKind::U0, &quick()).unwrap();
        assert_eq!(cases.len(), 2 * ALPHAS.len());
        assert_eq!(rep.samples, 200 * cases.len());
        assert!(rep.max_deviation <= IDENTITY_TOL);
    }

    #[test]
    fn gap_is_positive() {
        assert!(nonuniqueness_gap() > 0.01);
    }
}
