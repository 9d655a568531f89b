//! JSON problem configurations shared by the subcommands and experiments.

use std::path::Path;
use std::sync::Arc;

use malab_core::analytic::ClosedForm;
use malab_core::solver::{RhsSpec, SolverConfig};
use malab_core::{ConvexDomain, Grid, RealFn, Shape};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::expr::Expr;

/// Parses JSON into `T`, reporting the line, column and key path of the
/// first problem.
pub fn parse_json<T: DeserializeOwned>(text: &str, origin: &str) -> CliResult<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner();
        CliError::usage(format!(
            "{origin}: line {} column {}, key `{}`: {inner}",
            inner.line(),
            inner.column(),
            e.path()
        ))
    })
}

/// Typed view of an already parsed JSON value, with the key path on failure.
pub fn from_value<T: DeserializeOwned>(value: &serde_json::Value, origin: &str) -> CliResult<T> {
    serde_path_to_error::deserialize(value)
        .map_err(|e| CliError::usage(format!("{origin}, key `{}`: {}", e.path(), e.inner())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_json(&text, &path.display().to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeKind {
    Slab,
    Ball,
    HalfBall,
    Superellipse,
    Polytope,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semi_axes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub dimension: usize,
    pub shape: ShapeKind,
    #[serde(default)]
    pub params: ShapeParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marked_point: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tangent_ball_radius: Option<f64>,
}

fn need<T: Clone>(v: &Option<T>, key: &str, shape: ShapeKind) -> CliResult<T> {
    v.clone().ok_or_else(|| {
        CliError::usage(format!(
            "domain.params.{key} is required for shape {shape:?}"
        ))
    })
}

impl DomainConfig {
    pub fn half_ball(dimension: usize, radius: f64) -> Self {
        DomainConfig {
            dimension,
            shape: ShapeKind::HalfBall,
            params: ShapeParams {
                radius: Some(radius),
                ..Default::default()
            },
            marked_point: None,
            tangent_ball_radius: None,
        }
    }

    /// `[−L, L]^{n−1} × [0, L]` with the marked point at the origin.
    pub fn box_domain(dimension: usize, half_width: f64, height: f64) -> Self {
        let mut vertices = Vec::new();
        for corner in 0..(1usize << dimension) {
            let v: Vec<f64> = (0..dimension)
                .map(|d| {
                    let hi = (corner >> d) & 1 == 1;
                    match (d + 1 == dimension, hi) {
                        (true, true) => height,
                        (true, false) => 0.0,
                        (false, true) => half_width,
                        (false, false) => -half_width,
                    }
                })
                .collect();
            vertices.push(v);
        }
        DomainConfig {
            dimension,
            shape: ShapeKind::Polytope,
            params: ShapeParams {
                vertices: Some(vertices),
                ..Default::default()
            },
            marked_point: None,
            tangent_ball_radius: None,
        }
    }

    pub fn build(&self) -> CliResult<ConvexDomain> {
        let p = &self.params;
        let k = self.shape;
        let shape = match k {
            ShapeKind::Slab => Shape::Slab {
                height: p.height.unwrap_or(f64::INFINITY),
            },
            ShapeKind::Ball => Shape::Ball {
                center: need(&p.center, "center", k)?,
                radius: need(&p.radius, "radius", k)?,
            },
            ShapeKind::HalfBall => Shape::HalfBall {
                radius: need(&p.radius, "radius", k)?,
            },
            ShapeKind::Superellipse => Shape::Superellipse {
                center: need(&p.center, "center", k)?,
                semi_axes: need(&p.semi_axes, "semi_axes", k)?,
                exponent: need(&p.exponent, "exponent", k)?,
            },
            ShapeKind::Polytope => Shape::Polytope {
                vertices: need(&p.vertices, "vertices", k)?,
                faces: Vec::new(),
            },
        };
        let marked = self
            .marked_point
            .clone()
            .unwrap_or_else(|| vec![0.0; self.dimension]);
        Ok(ConvexDomain::with_marked_point(
            self.dimension,
            shape,
            marked,
            self.tangent_ball_radius,
        )?)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    /// `[lo, hi]` corners; the domain's bounding box when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<[Vec<f64>; 2]>,
    /// Intervals along the widest axis of the bounding box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,
}

impl GridConfig {
    pub fn cells(cells: usize) -> Self {
        GridConfig {
            cells: Some(cells),
            ..Default::default()
        }
    }

    pub fn build(&self, domain: &ConvexDomain) -> CliResult<Grid> {
        match (self.cells, self.spacing) {
            (Some(c), None) if self.bounds.is_none() => Ok(Grid::covering(domain, c)?),
            (None, Some(h)) => {
                let (lo, hi) = match &self.bounds {
                    Some([lo, hi]) => (lo.clone(), hi.clone()),
                    None => domain.bounding_box().ok_or_else(|| {
                        CliError::usage("grid.bounds is required for unbounded domains")
                    })?,
                };
                Ok(Grid::new(h, &lo, &hi)?)
            }
            _ => Err(CliError::usage(
                "grid needs either `cells` alone or `spacing` with optional `bounds`",
            )),
        }
    }
}

/// A constant or an expression in `x1, x2, x3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarSource {
    Constant(f64),
    Expression(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhsModeConfig {
    /// `g · d_∂Ω^α`.
    #[default]
    DegenerateDistance,
    /// `x_n^α`.
    HalfSpacePower,
    /// The expression in `f`.
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhsConfig {
    #[serde(default)]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<ScalarSource>,
    #[serde(default)]
    pub mode: RhsModeConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
}

impl RhsConfig {
    pub fn degenerate(alpha: f64) -> Self {
        RhsConfig {
            alpha,
            g: None,
            mode: RhsModeConfig::DegenerateDistance,
            f: None,
        }
    }

    pub fn build(&self, dim: usize) -> CliResult<RhsSpec> {
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(CliError::usage(format!(
                "rhs.alpha = {} must be finite and >= 0",
                self.alpha
            )));
        }
        let g: RealFn = match &self.g {
            None => Arc::new(|_| 1.0),
            Some(ScalarSource::Constant(c)) => {
                let c = *c;
                Arc::new(move |_| c)
            }
            Some(ScalarSource::Expression(s)) => Expr::parse(s, dim)?.into_fn(),
        };
        Ok(match self.mode {
            RhsModeConfig::DegenerateDistance => RhsSpec {
                g,
                ..RhsSpec::degenerate(self.alpha)
            },
            RhsModeConfig::HalfSpacePower => {
                let a = self.alpha;
                RhsSpec::explicit(a, move |x| g(x) * x[dim - 1].max(0.0).powf(a))
            }
            RhsModeConfig::Explicit => {
                let src = self
                    .f
                    .as_deref()
                    .ok_or_else(|| CliError::usage("rhs.f is required for mode explicit"))?;
                let f = Expr::parse(src, dim)?.into_fn();
                RhsSpec::explicit(self.alpha, move |x| f(x))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BoundaryKind {
    /// `|x|²/2`.
    #[default]
    #[serde(rename = "quadratic")]
    Quadratic,
    /// The model solution with the right-hand side's `α`.
    #[serde(rename = "u0_trace")]
    U0Trace,
    /// The second explicit solution with the same boundary plane trace.
    #[serde(rename = "nonuniqueness_trace")]
    NonUniquenessTrace,
    #[serde(rename = "zero")]
    Zero,
    #[serde(rename = "expression")]
    Expression,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    #[serde(default)]
    pub kind: BoundaryKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expression: Option<String>,
}

impl BoundaryConfig {
    pub fn of(kind: BoundaryKind) -> Self {
        BoundaryConfig {
            kind,
            expression: None,
        }
    }

    pub fn build(&self, dim: usize, alpha: f64) -> CliResult<RealFn> {
        Ok(match self.kind {
            BoundaryKind::Quadratic => {
                Arc::new(|x: &[f64]| 0.5 * x.iter().map(|v| v * v).sum::<f64>())
            }
            BoundaryKind::U0Trace => {
                let u = ClosedForm::u0(dim, alpha);
                Arc::new(move |x: &[f64]| u.value(x))
            }
            BoundaryKind::NonUniquenessTrace => {
                let u = ClosedForm::non_uniqueness(dim, alpha);
                Arc::new(move |x: &[f64]| u.value(x))
            }
            BoundaryKind::Zero => Arc::new(|_: &[f64]| 0.0),
            BoundaryKind::Expression => {
                let src = self.expression.as_deref().ok_or_else(|| {
                    CliError::usage("boundary.expression is required for kind expression")
                })?;
                Expr::parse(src, dim)?.into_fn()
            }
        })
    }
}

/// Everything needed for one Dirichlet solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub domain: DomainConfig,
    pub grid: GridConfig,
    pub rhs: RhsConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub boundary: BoundaryConfig,
}

/// A problem turned into core types.
pub struct BuiltProblem {
    pub domain: ConvexDomain,
    pub grid: Grid,
    pub rhs: RhsSpec,
    pub trace: RealFn,
    pub solver: SolverConfig,
}

impl ProblemConfig {
    /// Unit half-ball with `|x|²/2` data and `d^α` right-hand side.
    pub fn half_ball(alpha: f64, cells: usize, tol: f64) -> Self {
        ProblemConfig {
            domain: DomainConfig::half_ball(2, 1.0),
            grid: GridConfig::cells(cells),
            rhs: RhsConfig::degenerate(alpha),
            solver: SolverConfig {
                tol_residual: tol,
                ..Default::default()
            },
            boundary: BoundaryConfig::default(),
        }
    }

    pub fn build(&self) -> CliResult<BuiltProblem> {
        let domain = self.domain.build()?;
        let grid = self.grid.build(&domain)?;
        let dim = domain.dim();
        let rhs = self.rhs.build(dim)?;
        let trace = self.boundary.build(dim, self.rhs.alpha)?;
        self.solver.validate()?;
        Ok(BuiltProblem {
            domain,
            grid,
            rhs,
            trace,
            solver: self.solver.clone(),
        })
    }

    /// Canonical text used as a cache key.
    pub fn key(&self) -> String {
        serde_json::to_string(self).expect("serializable config")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "domain": {"dimension": 2, "shape": "half-ball", "params": {"radius": 1.0}},
        "grid": {"cells": 32},
        "rhs": {"alpha": 1.0, "g": "1 + 0.5 * x1 * x1"},
        "solver": {"tol_residual": 1e-8, "sweep_order": "red-black"},
        "boundary": {"kind": "u0_trace"}
    }"#;

    #[test]
    fn parses_a_full_problem() {
        let p: ProblemConfig = parse_json(SAMPLE, "sample").unwrap();
        assert_eq!(p.solver.tol_residual, 1e-8);
        assert_eq!(p.solver.stencil_width, 2);
        let b = p.build().unwrap();
        assert_eq!(b.domain.dim(), 2);
        assert!(((b.rhs.g)(&[1.0, 0.0]) - 1.5).abs() < 1e-15);
        assert!(((b.trace)(&[0.0, 1.0]) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn errors_carry_position_and_key() {
        let bad = SAMPLE.replace("\"cells\": 32", "\"cells\": \"many\"");
        let e = parse_json::<ProblemConfig>(&bad, "sample").unwrap_err();
        let msg = e.to_string();
        assert!(
            msg.contains("grid.cells") && msg.contains("line 3"),
            "{msg}"
        );
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn missing_shape_parameter_is_usage_error() {
        let bad = SAMPLE.replace("\"radius\": 1.0", "");
        let p: ProblemConfig = parse_json(&bad, "sample").unwrap();
        assert!(matches!(p.build(), Err(CliError::Usage(_))));
    }

    #[test]
    fn box_domain_has_its_corners() {
        let d = DomainConfig::box_domain(2, 4.0, 4.0).build().unwrap();
        assert!(d.contains(&[3.9, 3.9]) && !d.contains(&[4.1, 1.0]));
        assert_eq!(d.bounding_box().unwrap(), (vec![-4.0, 0.0], vec![4.0, 4.0]));
    }
}
