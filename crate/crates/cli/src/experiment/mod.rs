//! Experiment kinds run from a manifest. Each kind turns typed parameters
//! into named metrics and CSV/JSON artifacts; acceptance windows from the
//! manifest are applied by the runner.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use malab_core::section::enforce_h2;
use malab_core::solver::{solve_dirichlet, SolveReport};
use malab_core::{LabError, ScalarField};
use serde::{Deserialize, Serialize};

use crate::config::{from_value, ProblemConfig};
use crate::error::CliResult;
use crate::output::Artifact;

pub mod analytic;
pub mod convergence;
pub mod eigen;
pub mod liouville;
pub mod localization;
pub mod monitors;
pub mod volume;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExperimentKind {
    #[serde(rename = "dirichlet-convergence")]
    DirichletConvergence,
    #[serde(rename = "localization-scaling")]
    LocalizationScaling,
    #[serde(rename = "volume-invariant")]
    VolumeInvariant,
    #[serde(rename = "eigen")]
    Eigen,
    #[serde(rename = "monitors")]
    Monitors,
    #[serde(rename = "verify-analytic")]
    VerifyAnalytic,
    #[serde(rename = "liouville-2d")]
    Liouville2d,
}

impl ExperimentKind {
    /// Metrics that must carry an acceptance window.
    pub fn required(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::DirichletConvergence => convergence::REQUIRED,
            ExperimentKind::LocalizationScaling => localization::REQUIRED,
            ExperimentKind::VolumeInvariant => volume::REQUIRED,
            ExperimentKind::Eigen => eigen::REQUIRED,
            ExperimentKind::Monitors => monitors::REQUIRED,
            ExperimentKind::VerifyAnalytic => analytic::REQUIRED,
            ExperimentKind::Liouville2d => liouville::REQUIRED,
        }
    }

    /// Every metric the kind reports.
    pub fn metrics(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::DirichletConvergence => convergence::METRICS,
            ExperimentKind::LocalizationScaling => localization::METRICS,
            ExperimentKind::VolumeInvariant => volume::METRICS,
            ExperimentKind::Eigen => eigen::METRICS,
            ExperimentKind::Monitors => monitors::METRICS,
            ExperimentKind::VerifyAnalytic => analytic::METRICS,
            ExperimentKind::Liouville2d => liouville::METRICS,
        }
    }
}

/// Typed parameters of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Params {
    DirichletConvergence(convergence::Params),
    LocalizationScaling(localization::Params),
    VolumeInvariant(volume::Params),
    Eigen(eigen::Params),
    Monitors(monitors::Params),
    VerifyAnalytic(crate::verify::VerifyOptions),
    Liouville2d(liouville::Params),
}

impl Params {
    /// Parses `value` (missing keys take their defaults) and checks
    /// parameter ranges.
    pub fn parse(kind: ExperimentKind, value: &serde_json::Value, origin: &str) -> CliResult<Self> {
        let empty = serde_json::Value::Object(Default::default());
        let v = if value.is_null() { &empty } else { value };
        let p = match kind {
            ExperimentKind::DirichletConvergence => {
                Params::DirichletConvergence(from_value(v, origin)?)
            }
            ExperimentKind::LocalizationScaling => {
                Params::LocalizationScaling(from_value(v, origin)?)
            }
            ExperimentKind::VolumeInvariant => Params::VolumeInvariant(from_value(v, origin)?),
            ExperimentKind::Eigen => Params::Eigen(from_value(v, origin)?),
            ExperimentKind::Monitors => Params::Monitors(from_value(v, origin)?),
            ExperimentKind::VerifyAnalytic => Params::VerifyAnalytic(from_value(v, origin)?),
            ExperimentKind::Liouville2d => Params::Liouville2d(from_value(v, origin)?),
        };
        p.validate()
            .map_err(|e| crate::CliError::usage(format!("{origin}: {e}")))?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), LabError> {
        match self {
            Params::DirichletConvergence(p) => p.validate(),
            Params::LocalizationScaling(p) => p.ladder.validate(),
            Params::VolumeInvariant(p) => p.ladder.validate(),
            Params::Eigen(p) => p.validate(),
            Params::Monitors(p) => p.heights.validate(),
            Params::VerifyAnalytic(_) => Ok(()),
            Params::Liouville2d(p) => p.validate(),
        }
    }

    pub fn run(&self, ctx: &Context) -> CliResult<Outcome> {
        match self {
            Params::DirichletConvergence(p) => convergence::run(p, ctx),
            Params::LocalizationScaling(p) => localization::run(p, ctx),
            Params::VolumeInvariant(p) => volume::run(p, ctx),
            Params::Eigen(p) => eigen::run(p),
            Params::Monitors(p) => monitors::run(p, ctx),
            Params::VerifyAnalytic(p) => analytic::run(p),
            Params::Liouville2d(p) => liouville::run(p, ctx),
        }
    }
}

/// Metrics and files produced by one experiment.
#[derive(Debug, Default)]
pub struct Outcome {
    pub metrics: BTreeMap<String, f64>,
    pub artifacts: Vec<Artifact>,
}

impl Outcome {
    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }
}

/// `[lo, hi]` with `null` for an open end.
pub type Window = [Option<f64>; 2];

pub fn in_window(value: f64, w: &Window) -> bool {
    value.is_finite() && w[0].is_none_or(|lo| value >= lo) && w[1].is_none_or(|hi| value <= hi)
}

/// Geometric ladder of section heights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ladder {
    pub h_max: f64,
    pub h_min: f64,
    pub factor: f64,
}

impl Ladder {
    pub fn heights(&self) -> Vec<f64> {
        malab_core::section::h_ladder(self.h_max, self.h_min, self.factor)
    }

    pub fn validate(&self) -> Result<(), LabError> {
        if !(self.h_max > self.h_min && self.h_min > 0.0 && self.factor > 1.0) {
            return Err(LabError::Config(format!("invalid ladder {self:?}")));
        }
        Ok(())
    }
}

/// A converged (or best-effort) Dirichlet solve.
pub struct Solved {
    pub field: ScalarField,
    pub report: SolveReport,
}

type Slot = Arc<OnceLock<Result<Arc<Solved>, LabError>>>;

/// Dirichlet solves shared between experiments of one run, keyed by the
/// canonical problem configuration. Concurrent requests for the same key
/// wait for a single solve.
#[derive(Default)]
pub struct Context {
    slots: Mutex<HashMap<String, Slot>>,
}

impl Context {
    pub fn solve(&self, problem: &ProblemConfig) -> CliResult<Arc<Solved>> {
        let built = problem.build()?;
        let slot = {
            let mut map = self.slots.lock().unwrap_or_else(|e| e.into_inner());
            map.entry(problem.key()).or_default().clone()
        };
        let out = slot.get_or_init(|| {
            let (field, report) = solve_dirichlet(
                &built.domain,
                &built.grid,
                &built.rhs,
                move |x: &[f64]| (built.trace)(x),
                &built.solver,
            )?;
            Ok(Arc::new(Solved { field, report }))
        });
        Ok(out.clone()?)
    }
}

/// Solved half-ball field with `|x|²/2` data and `d^α` right-hand side,
/// shifted so the marked point has a zero tangent plane.
pub struct Prepared {
    pub solved: Arc<Solved>,
    pub shifted: ScalarField,
    pub normal_slope: f64,
}

pub fn prepare_half_ball(
    ctx: &Context,
    alpha: f64,
    cells: usize,
    tol: f64,
    t_max: f64,
) -> CliResult<Prepared> {
    let solved = ctx.solve(&ProblemConfig::half_ball(alpha, cells, tol))?;
    if !solved.report.converged {
        return Err(LabError::Precondition(format!(
            "solve did not converge (residual {:e})",
            solved.report.residual_sup
        ))
        .into());
    }
    let (shifted, slope) = enforce_h2(&solved.field, alpha, t_max)?;
    Ok(Prepared {
        normal_slope: slope[slope.len() - 1],
        solved,
        shifted,
    })
}

/// `max |u − exact|` over interior nodes.
pub fn sup_error(field: &ScalarField, exact: impl Fn(&[f64]) -> f64) -> f64 {
    let g = field.grid();
    field
        .layout()
        .interior_nodes()
        .map(|i| (field.value(i) - exact(&g.coords(i))).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows_are_closed_and_reject_nan() {
        let w: Window = [Some(0.45), Some(0.55)];
        assert!(in_window(0.45, &w) && in_window(0.55, &w));
        assert!(!in_window(0.56, &w) && !in_window(f64::NAN, &w));
        assert!(in_window(1e300, &[Some(0.0), None]));
    }

    #[test]
    fn cache_solves_once_per_problem() {
        let ctx = Context::default();
        let p = ProblemConfig::half_ball(1.0, 16, 1e-8);
        let a = ctx.solve(&p).unwrap();
        let b = ctx.solve(&p).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        let c = ctx.solve(&ProblemConfig::half_ball(0.5, 16, 1e-8)).unwrap();
        assert!(!Arc::ptr_eq(&a, &c));
    }

    #[test]
    fn every_required_metric_is_reported() {
        use ExperimentKind::*;
        for k in [
            DirichletConvergence,
            LocalizationScaling,
            VolumeInvariant,
            Eigen,
            Monitors,
            VerifyAnalytic,
            Liouville2d,
        ] {
            for r in k.required() {
                assert!(k.metrics().contains(r), "{k:?}: {r}");
            }
        }
    }
}
