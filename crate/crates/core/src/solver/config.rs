use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::field::Layout;

pub use crate::field::RealFn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SweepOrder {
    #[default]
    Lexicographic,
    RedBlack,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub stencil_width: usize,
    pub max_iters: usize,
    pub tol_residual: f64,
    pub damping: f64,
    pub sweep_order: SweepOrder,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            stencil_width: 2,
            max_iters: 200_000,
            tol_residual: 1e-9,
            damping: 1.0,
            sweep_order: SweepOrder::Lexicographic,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.stencil_width) {
            return Err(LabError::Config(format!(
                "stencil_width {} not in 1..=3",
                self.stencil_width
            )));
        }
        if !(self.tol_residual > 0.0) {
            return Err(LabError::Config("tol_residual must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(LabError::Config("damping must lie in (0, 1]".into()));
        }
        if self.max_iters == 0 {
            return Err(LabError::Config("max_iters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone)]
pub enum RhsMode {
    /// `g(x) · d_∂Ω(x)^α`, with the distance taken at the node.
    DegenerateDistance,
    /// `f(x)` given directly.
    Explicit(RealFn),
    /// `λⁿ |u_prev|ⁿ` with `u_prev` given per grid node.
    Eigen {
        lambda: f64,
        previous: Arc<Vec<f64>>,
    },
}

/// Right-hand side of `det D²u = f`.
#[derive(Clone)]
pub struct RhsSpec {
    pub alpha: f64,
    pub g: RealFn,
    pub mode: RhsMode,
}

impl fmt::Debug for RhsSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mode = match &self.mode {
            RhsMode::DegenerateDistance => "degenerate-distance".to_string(),
            RhsMode::Explicit(_) => "explicit".to_string(),
            RhsMode::Eigen { lambda, .. } => format!("eigen(lambda={lambda})"),
        };
        f.debug_struct("RhsSpec")
            .field("alpha", &self.alpha)
            .field("mode", &mode)
            .finish()
    }
}

impl RhsSpec {
    pub fn degenerate(alpha: f64) -> Self {
        RhsSpec {
            alpha,
            g: Arc::new(|_| 1.0),
            mode: RhsMode::DegenerateDistance,
        }
    }

    pub fn degenerate_with(alpha: f64, g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        RhsSpec {
            alpha,
            g: Arc::new(g),
            mode: RhsMode::DegenerateDistance,
        }
    }

    pub fn explicit(alpha: f64, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        RhsSpec {
            alpha,
            g: Arc::new(|_| 1.0),
            mode: RhsMode::Explicit(Arc::new(f)),
        }
    }

    /// `x_n^α`, the right-hand side solved exactly by `U₀`.
    pub fn half_space_power(dim: usize, alpha: f64) -> Self {
        RhsSpec::explicit(alpha, move |x| x[dim - 1].max(0.0).powf(alpha))
    }

    /// Pointwise value in half-space coordinates, where the boundary
    /// distance is `x_n`.
    pub fn at_point(&self, x: &[f64]) -> Result<f64> {
        let n = x.len();
        match &self.mode {
            RhsMode::DegenerateDistance => Ok((self.g)(x) * x[n - 1].max(0.0).powf(self.alpha)),
            RhsMode::Explicit(f) => Ok(f(x)),
            RhsMode::Eigen { .. } => Err(LabError::Input(
                "eigen right-hand side has no pointwise value".into(),
            )),
        }
    }

    /// Right-hand side sampled on every grid node (zero off the unknowns).
    pub fn sample(&self, layout: &Layout) -> Result<Vec<f64>> {
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(LabError::Input(format!(
                "alpha {} must be finite and >= 0",
                self.alpha
            )));
        }
        let g = &layout.grid;
        let n = g.dim();
        let mut out = vec![0.0; g.len()];
        for idx in layout.interior_nodes() {
            let x = g.coords(idx);
            let v = match &self.mode {
                RhsMode::DegenerateDistance => {
                    let gx = (self.g)(&x);
                    let d = layout.domain.boundary_distance(&x)?;
                    gx * d.powf(self.alpha)
                }
                RhsMode::Explicit(f) => f(&x),
                RhsMode::Eigen { lambda, previous } => {
                    (lambda * previous[idx].abs()).powi(n as i32)
                }
            };
            if !(v >= 0.0) || !v.is_finite() {
                return Err(LabError::Input(format!(
                    "right-hand side {v} at {x:?} is negative or not finite"
                )));
            }
            out[idx] = v;
        }
        Ok(out)
    }
}
