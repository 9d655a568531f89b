//! Level sets `{u = s}` written as graphs `x_n = −v(x', s)` over the
//! tangential variables, with implicit derivatives of `v`.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::closed_form::{det_small, ClosedForm};
use crate::error::{LabError, Result};
use crate::fit::fit_loglog;
use crate::report::MonitorReport;

/// Bisection tolerance on `x_n`.
pub const ROOT_TOL: f64 = 1e-12;
/// Points per line used by the monotonicity check.
const MONOTONE_PROBES: usize = 64;
/// Offset for the tangential second differences of `v`.
const CONVEXITY_STEP: f64 = 1e-3;

/// A function with exact first and second derivatives.
pub trait Smooth: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn hessian(&self, x: &[f64]) -> DMatrix<f64>;
}

impl Smooth for ClosedForm {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        ClosedForm::value(self, x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        ClosedForm::gradient(self, x)
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        ClosedForm::hessian(self, x)
    }
}

type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type HessFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// A smooth function given by explicit value, gradient and Hessian closures.
#[derive(Clone)]
pub struct ExplicitSmooth {
    pub dim: usize,
    pub value: ValueFn,
    pub gradient: GradFn,
    pub hessian: HessFn,
}

impl Smooth for ExplicitSmooth {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.gradient)(x)
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        (self.hessian)(x)
    }
}

impl ExplicitSmooth {
    /// `x₁²/2 + x₂ + x₂²/2` in the plane.
    pub fn tilted_quadratic() -> Self {
        ExplicitSmooth {
            dim: 2,
            value: Arc::new(|x| 0.5 * x[0] * x[0] + x[1] + 0.5 * x[1] * x[1]),
            gradient: Arc::new(|x| vec![x[0], 1.0 + x[1]]),
            hessian: Arc::new(|_| DMatrix::identity(2, 2)),
        }
    }

    /// `|x − c|²/2`.
    pub fn radial(center: Vec<f64>) -> Self {
        let n = center.len();
        let c1 = center.clone();
        ExplicitSmooth {
            dim: n,
            value: Arc::new(move |x| {
                0.5 * x
                    .iter()
                    .zip(&c1)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            }),
            gradient: Arc::new(move |x| x.iter().zip(&center).map(|(a, b)| a - b).collect()),
            hessian: Arc::new(move |_| DMatrix::identity(n, n)),
        }
    }
}

/// One point of the level-set graph with the derivatives of `v` in the
/// variables `(x', s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSample {
    pub xprime: Vec<f64>,
    pub s: f64,
    pub v: f64,
    /// `(v_1, …, v_{n-1}, v_s)`.
    pub grad: Vec<f64>,
    /// Hessian of `v` in `(x', s)`, row-major.
    pub hess: Vec<f64>,
    /// `u_n` at `(x', −v)`.
    pub u_n: f64,
}

impl GraphSample {
    pub fn point(&self) -> Vec<f64> {
        let mut x = self.xprime.clone();
        x.push(-self.v);
        x
    }

    pub fn hessian(&self) -> DMatrix<f64> {
        let n = self.grad.len();
        DMatrix::from_row_slice(n, n, &self.hess)
    }
}

fn with_xn(xprime: &[f64], xn: f64) -> Vec<f64> {
    let mut x = xprime.to_vec();
    x.push(xn);
    x
}

/// Root `x_n ∈ bracket` of `u(x', x_n) = s`, after checking that `u` is
/// strictly increasing along the line.
fn solve_line(u: &dyn Smooth, xprime: &[f64], s: f64, bracket: (f64, f64)) -> Result<f64> {
    let (a, b) = bracket;
    let mut prev = u.value(&with_xn(xprime, a));
    for k in 1..=MONOTONE_PROBES {
        let t = a + (b - a) * k as f64 / MONOTONE_PROBES as f64;
        let cur = u.value(&with_xn(xprime, t));
        if !(cur > prev) {
            return Err(LabError::Monotonicity(format!(
                "u does not increase along x_n at x' = {xprime:?} near x_n = {t}"
            )));
        }
        prev = cur;
    }
    let (mut lo, mut hi) = (a, b);
    if u.value(&with_xn(xprime, lo)) > s || u.value(&with_xn(xprime, hi)) < s {
        return Err(LabError::Input(format!(
            "level {s} not attained on x' = {xprime:?} in {bracket:?}"
        )));
    }
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        if u.value(&with_xn(xprime, mid)) < s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `v` and its derivatives at one `(x', s)` from the implicit relation
/// `u(x', −v) = s`.
pub fn graph_sample(
    u: &dyn Smooth,
    xprime: &[f64],
    s: f64,
    bracket: (f64, f64),
) -> Result<GraphSample> {
    let n = u.dim();
    if xprime.len() + 1 != n {
        return Err(LabError::Input("x' must have n − 1 components".into()));
    }
    let xn = solve_line(u, xprime, s, bracket)?;
    let x = with_xn(xprime, xn);
    let du = u.gradient(&x);
    let d2u = u.hessian(&x);
    let un = du[n - 1];
    // v_b = (u_b [b tangential] − δ_{b s}) / u_n
    let grad: Vec<f64> = (0..n)
        .map(|b| if b < n - 1 { du[b] / un } else { -1.0 / un })
        .collect();
    let mut hess = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            let tang_ab = if a < n - 1 && b < n - 1 {
                d2u[(a, b)]
            } else {
                0.0
            };
            let first = if b < n - 1 {
                tang_ab - d2u[(b, n - 1)] * grad[a]
            } else {
                0.0
            };
            let una = if a < n - 1 { d2u[(n - 1, a)] } else { 0.0 };
            hess[a * n + b] = (first - (una - d2u[(n - 1, n - 1)] * grad[a]) * grad[b]) / un;
        }
    }
    Ok(GraphSample {
        xprime: xprime.to_vec(),
        s,
        v: -xn,
        grad,
        hess,
        u_n: un,
    })
}

/// Graph samples of `{u = s}` over the given tangential points. Asserts
/// convexity of `v` in `x'` through second differences.
pub fn level_set_graph(
    u: &dyn Smooth,
    s: f64,
    xprimes: &[Vec<f64>],
    bracket: (f64, f64),
) -> Result<Vec<GraphSample>> {
    let mut out = Vec::with_capacity(xprimes.len());
    for xp in xprimes {
        let g = graph_sample(u, xp, s, bracket)?;
        for a in 0..xp.len() {
            let mut p = xp.clone();
            let mut m = xp.clone();
            p[a] += CONVEXITY_STEP;
            m[a] -= CONVEXITY_STEP;
            let vp = -solve_line(u, &p, s, bracket)?;
            let vm = -solve_line(u, &m, s, bracket)?;
            let second = (vp + vm - 2.0 * g.v) / (CONVEXITY_STEP * CONVEXITY_STEP);
            if second < -1e-4 * (1.0 + g.hess[a * (xp.len() + 1) + a].abs()) {
                return Err(LabError::Precondition(format!(
                    "level-set graph is not convex at x' = {xp:?}"
                )));
            }
        }
        out.push(g);
    }
    Ok(out)
}

/// Relative deviations in the identities
/// `u_n^α det D²u = |v_s|^{-(n+2+α)} det D²v` and
/// `K = det D(∇u/W) = ν_{n+1}^{n+2} det D²u = (−ν_n)^{n+2} det D²v`
/// with `W = (1 + |∇u|²)^{1/2}` and `ν = W^{-1}(−∇u, 1)`.
pub fn gauss_identity_check(u: &dyn Smooth, alpha: f64, samples: &[GraphSample]) -> MonitorReport {
    let mut rep = MonitorReport::new("levelset-gauss-identity");
    let n = u.dim() as i32;
    for g in samples {
        let x = g.point();
        let du = u.gradient(&x);
        let d2u = u.hessian(&x);
        let det_u = det_small(&d2u);
        let det_v = det_small(&g.hessian());
        let vs = g.grad[g.grad.len() - 1];
        let lhs = g.u_n.powf(alpha) * det_u;
        let rhs = vs.abs().powf(-(n as f64 + 2.0 + alpha)) * det_v;

        let w2: f64 = 1.0 + du.iter().map(|a| a * a).sum::<f64>();
        let w = w2.sqrt();
        let p = nalgebra::DVector::from_vec(du.clone());
        let shape =
            (DMatrix::identity(n as usize, n as usize) - &p * p.transpose() / w2) * &d2u / w;
        let k_def = det_small(&shape);
        let k_u = w.powi(-(n + 2)) * det_u;
        let k_v = (g.u_n / w).powi(n + 2) * det_v;

        let rel = |a: f64, b: f64| {
            let scale = a.abs().max(b.abs());
            if scale == 0.0 {
                0.0
            } else {
                (a - b).abs() / scale
            }
        };
        let dev = rel(lhs, rhs).max(rel(k_def, k_u)).max(rel(k_v, k_u));
        rep.observe(dev, &x);
    }
    rep.with_context("samples", samples.len() as f64)
}

/// Square patch of `(x', s)` samples centered at `center` (last entry `s`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub center: Vec<f64>,
    pub radius: f64,
    pub per_axis: usize,
    /// Search interval for `x_n` on every line.
    pub bracket: (f64, f64),
}

impl Patch {
    pub fn samples(&self) -> Vec<Vec<f64>> {
        let n = self.center.len();
        let k = self.per_axis.max(2);
        let total = k.pow(n as u32);
        (0..total)
            .map(|mut flat| {
                (0..n)
                    .map(|d| {
                        let i = flat % k;
                        flat /= k;
                        self.center[d] + self.radius * (2.0 * i as f64 / (k - 1) as f64 - 1.0)
                    })
                    .collect()
            })
            .collect()
    }
}

/// `max v₁₁ |u − σ x_n|` over the patch points where `u − σ x_n < 0`, with
/// `|u − σ x_n| = |s + σ v|` on the graph. Context: `max_u_n`, `max_abs_v1`.
pub fn levelset_pogorelov_monitor(
    u: &dyn Smooth,
    sigma: f64,
    patch: &Patch,
) -> Result<MonitorReport> {
    let n = u.dim();
    if patch.center.len() != n {
        return Err(LabError::Input("patch center must be (x', s)".into()));
    }
    let mut rep = MonitorReport::new("levelset-pogorelov");
    let (mut max_un, mut max_v1, mut used) = (0.0f64, 0.0f64, 0usize);
    for y in patch.samples() {
        let g = graph_sample(u, &y[..n - 1], y[n - 1], patch.bracket)?;
        let w = g.s + sigma * g.v;
        if !(w < 0.0) {
            continue;
        }
        used += 1;
        rep.observe(g.hess[0] * w.abs(), &y);
        max_un = max_un.max(g.u_n);
        max_v1 = max_v1.max(g.grad[0].abs());
    }
    if used == 0 {
        return Err(LabError::Precondition(
            "u − σ x_n is nonnegative on the whole patch".into(),
        ));
    }
    Ok(rep
        .with_context("max_u_n", max_un)
        .with_context("max_abs_v1", max_v1)
        .with_context("samples", used as f64))
}

/// Monitor over patches of decreasing radius; context `log_slope` is the
/// fitted exponent of the monitor against the radius.
pub fn levelset_pogorelov_series(
    u: &dyn Smooth,
    sigma: f64,
    patch: &Patch,
    radii: &[f64],
) -> Result<MonitorReport> {
    let mut rep = MonitorReport::new("levelset-pogorelov-series");
    for &r in radii {
        let p = Patch {
            radius: r,
            ..patch.clone()
        };
        let m = levelset_pogorelov_monitor(u, sigma, &p)?;
        rep.observe(m.max_value, &[r]);
        rep.series.push((r, m.max_value));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = rep.series.iter().copied().unzip();
    let fit = fit_loglog(&xs, &ys)?;
    Ok(rep.with_context("log_slope", fit.slope))
}
