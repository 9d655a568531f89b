//! Explicit lower and upper barriers for boundary localization, with exact
//! Hessians and sampled verification of their comparison inequalities.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::closed_form::{det_small, ClosedForm};
use super::hyperdual::{second_partial, HyperDual};
use crate::error::{LabError, Result};
use crate::report::VerifyReport;
use crate::solver::RhsSpec;

/// Relative tolerance for exact-formula cross checks.
const FORMULA_TOL: f64 = 1e-10;

/// `min(0.1, 1/(2n))`.
pub fn default_gamma(dim: usize) -> f64 {
    0.1f64.min(1.0 / (2.0 * dim as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BarrierKind {
    /// `c' w̄(|x'|, C' x_n)` with `w̄(r, y) = r² (1 − (y r^{-3/2})^γ)⁺`.
    W1 {
        c_prime: f64,
        big_c: f64,
        gamma: f64,
    },
    /// `c' h [|x'|²/h + x_n²/h^{3/2}] + t x_n` on `{|x'| ≤ C' h^{1/2}, 0 ≤ x_n ≤ C' h^{3/4}}`.
    /// `mu` is the boundary separation constant used in the trace check.
    W2 {
        c_prime: f64,
        h: f64,
        t: f64,
        big_c: f64,
        mu: f64,
    },
    /// `c h [Σ (x_i/d_i)² + (x_n/d_h)²] + t x_n` on `{Σ (x_i/d_i)² ≤ 1, 0 ≤ x_n ≤ d_h}`.
    W3 {
        c: f64,
        h: f64,
        d: Vec<f64>,
        d_h: f64,
        t: f64,
    },
    /// `(1+ε)/2 |x'|² + (1+ε)^{1-n} x_n^{2+α}/((2+α)(1+α)) − ε x_n` on
    /// the cylinder `{|x'| ≤ c1, 0 ≤ x_n ≤ 1}`.
    V { eps: f64, c1: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierSpec {
    #[serde(flatten)]
    pub kind: BarrierKind,
    pub alpha: f64,
    pub dim: usize,
}

/// `w̄` and its derivatives at `(r, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WbarDerivatives {
    pub value: f64,
    pub r: f64,
    pub y: f64,
    pub rr: f64,
    pub ry: f64,
    pub yy: f64,
}

impl WbarDerivatives {
    pub fn det(&self) -> f64 {
        self.rr * self.yy - self.ry * self.ry
    }
}

/// Closed-form derivatives of `w̄` where `t = y r^{-3/2} ∈ (0, 1)`.
pub fn wbar_derivatives(r: f64, y: f64, gamma: f64) -> WbarDerivatives {
    let t = y * r.powf(-1.5);
    let g = 1.0 - t.powf(gamma);
    let tg = t.powf(gamma);
    WbarDerivatives {
        value: r * r * g,
        r: r * (2.0 * g + 1.5 * gamma * tg),
        y: -gamma * r.sqrt() * t.powf(gamma - 1.0),
        rr: 2.0 * g + 1.5 * gamma * (3.0 - 1.5 * gamma) * tg,
        ry: r.powf(-0.5) * gamma * t.powf(gamma - 1.0) * (-2.0 + 1.5 * gamma),
        yy: gamma * (1.0 - gamma) * t.powf(gamma - 2.0) / r,
    }
}

fn wbar_dual(r: HyperDual, y: HyperDual, gamma: f64) -> HyperDual {
    let t = y / r.powf(1.5);
    r * r * (HyperDual::constant(1.0) - t.powf(gamma)).max0()
}

/// Derivatives of `w̄` by forward-mode automatic differentiation.
pub fn wbar_autodiff(r: f64, y: f64, gamma: f64) -> WbarDerivatives {
    let f = |a, b| wbar_dual(a, b, gamma);
    let (value, dr, _, rr) = second_partial(f, r, y, 0, 0);
    let (_, _, dy, yy) = second_partial(f, r, y, 1, 1);
    let (_, _, _, ry) = second_partial(f, r, y, 0, 1);
    WbarDerivatives {
        value,
        r: dr,
        y: dy,
        rr,
        ry,
        yy,
    }
}

/// `γ² [(1−γ)(3/2)(3 − 3γ/2) − (2 − 3γ/2)²]`, the lower constant in
/// `det D²_{r,y} w̄ ≥ c₀ r^{-1} t^{2γ−2}`.
pub fn wbar_det_constant(gamma: f64) -> f64 {
    gamma * gamma * ((1.0 - gamma) * 1.5 * (3.0 - 1.5 * gamma) - (2.0 - 1.5 * gamma).powi(2))
}

fn rel_dev(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Compares the closed-form derivatives of `w̄` with automatic
/// differentiation and checks the determinant lower bound.
pub fn verify_wbar_formulas(gamma: f64, samples: usize, seed: u64) -> Result<VerifyReport> {
    let c0 = wbar_det_constant(gamma);
    if !(gamma > 0.0 && gamma < 1.0) || !(c0 > 0.0) {
        return Err(LabError::Input(format!(
            "gamma {gamma} gives no positive determinant constant"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dev: f64 = 0.0;
    let mut margin = f64::INFINITY;
    let mut worst = None;
    for _ in 0..samples {
        let r: f64 = rng.gen_range(0.05..2.0);
        let t: f64 = rng.gen_range(0.01..0.99);
        let y = t * r.powf(1.5);
        let a = wbar_derivatives(r, y, gamma);
        let b = wbar_autodiff(r, y, gamma);
        let d = [
            rel_dev(a.value, b.value),
            rel_dev(a.r, b.r),
            rel_dev(a.y, b.y),
            rel_dev(a.rr, b.rr),
            rel_dev(a.ry, b.ry),
            rel_dev(a.yy, b.yy),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        if d > dev {
            dev = d;
            worst = Some(vec![r, y]);
        }
        let bound = c0 * t.powf(2.0 * gamma - 2.0) / r;
        margin = margin.min(a.det() / bound - 1.0);
    }
    Ok(VerifyReport {
        kind: "wbar-derivatives".into(),
        max_deviation: dev,
        margin,
        samples,
        pass: dev <= FORMULA_TOL && margin >= 0.0,
        worst_point: worst,
    })
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Uniform point of the `k`-dimensional ball of the given radius.
fn ball_point(rng: &mut ChaCha8Rng, k: usize, radius: f64) -> Vec<f64> {
    loop {
        let p: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if sq(&p) <= 1.0 {
            return p.into_iter().map(|v| v * radius).collect();
        }
    }
}

impl BarrierSpec {
    pub fn w1(dim: usize, alpha: f64) -> Self {
        BarrierSpec {
            kind: BarrierKind::W1 {
                c_prime: 0.1,
                big_c: 1.0,
                gamma: default_gamma(dim),
            },
            alpha,
            dim,
        }
    }

    pub fn w2(dim: usize, alpha: f64, h: f64) -> Self {
        BarrierSpec {
            kind: BarrierKind::W2 {
                c_prime: 0.25,
                h,
                t: 0.0,
                big_c: 1.0,
                mu: 1.0,
            },
            alpha,
            dim,
        }
    }

    /// Axes `d_i = h^{1/2}` and a thin normal extent `d_h = h^{1/(2+α)}/10`.
    pub fn w3(dim: usize, alpha: f64, h: f64) -> Self {
        BarrierSpec {
            kind: BarrierKind::W3 {
                c: 0.1,
                h,
                d: vec![h.sqrt(); dim - 1],
                d_h: 0.1 * h.powf(1.0 / (2.0 + alpha)),
                t: 0.0,
            },
            alpha,
            dim,
        }
    }

    pub fn v(dim: usize, alpha: f64, eps: f64) -> Self {
        BarrierSpec {
            kind: BarrierKind::V { eps, c1: 2.5 },
            alpha,
            dim,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            BarrierKind::W1 { .. } => "barrier-w1",
            BarrierKind::W2 { .. } => "barrier-w2",
            BarrierKind::W3 { .. } => "barrier-w3",
            BarrierKind::V { .. } => "barrier-v",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if self.dim < 2 {
            return Err(LabError::Input("barriers need dimension at least 2".into()));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(LabError::Input(format!(
                "alpha {} must be >= 0",
                self.alpha
            )));
        }
        let ok = match &self.kind {
            BarrierKind::W1 {
                c_prime,
                big_c,
                gamma,
            } => {
                pos(*c_prime)
                    && pos(*big_c)
                    && *gamma > 0.0
                    && self.dim as f64 * gamma < 2.0
                    && *gamma < 1.0
            }
            BarrierKind::W2 {
                c_prime,
                h,
                t,
                big_c,
                mu,
            } => pos(*c_prime) && pos(*h) && *t >= 0.0 && pos(*big_c) && pos(*mu),
            BarrierKind::W3 { c, h, d, d_h, t } => {
                pos(*c)
                    && pos(*h)
                    && d.len() == self.dim - 1
                    && d.iter().all(|v| pos(*v))
                    && pos(*d_h)
                    && *t >= 0.0
            }
            BarrierKind::V { eps, c1 } => pos(*eps) && pos(*c1),
        };
        if ok {
            Ok(())
        } else {
            Err(LabError::Input(format!(
                "invalid barrier parameters {:?}",
                self.kind
            )))
        }
    }

    /// `1/((2+α)(1+α))`.
    fn u0_coeff(&self) -> f64 {
        1.0 / ((2.0 + self.alpha) * (1.0 + self.alpha))
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let n = self.dim;
        let xn = x[n - 1];
        let xp = &x[..n - 1];
        match &self.kind {
            BarrierKind::W1 {
                c_prime,
                big_c,
                gamma,
            } => {
                let r = norm(xp);
                if r == 0.0 {
                    return 0.0;
                }
                let t = (big_c * xn).max(0.0) * r.powf(-1.5);
                c_prime * r * r * (1.0 - t.powf(*gamma)).max(0.0)
            }
            BarrierKind::W2 { c_prime, h, t, .. } => {
                c_prime * h * (sq(xp) / h + xn * xn / h.powf(1.5)) + t * xn
            }
            BarrierKind::W3 { c, h, d, d_h, t } => {
                let s: f64 = xp.iter().zip(d).map(|(a, b)| (a / b).powi(2)).sum();
                c * h * (s + (xn / d_h).powi(2)) + t * xn
            }
            BarrierKind::V { eps, .. } => {
                0.5 * (1.0 + eps) * sq(xp)
                    + (1.0 + eps).powi(1 - n as i32)
                        * self.u0_coeff()
                        * xn.max(0.0).powf(2.0 + self.alpha)
                    - eps * xn
            }
        }
    }

    /// Exact Hessian; for `W1` valid where the barrier is positive.
    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim;
        let xn = x[n - 1];
        let mut m = DMatrix::zeros(n, n);
        match &self.kind {
            BarrierKind::W1 {
                c_prime,
                big_c,
                gamma,
            } => {
                let r = norm(&x[..n - 1]);
                let w = wbar_derivatives(r, big_c * xn, *gamma);
                for i in 0..n - 1 {
                    for j in 0..n - 1 {
                        let p = x[i] * x[j] / (r * r);
                        let delta = if i == j { 1.0 } else { 0.0 };
                        m[(i, j)] = c_prime * (w.rr * p + w.r / r * (delta - p));
                    }
                    m[(i, n - 1)] = c_prime * big_c * w.ry * x[i] / r;
                    m[(n - 1, i)] = m[(i, n - 1)];
                }
                m[(n - 1, n - 1)] = c_prime * big_c * big_c * w.yy;
            }
            BarrierKind::W2 { c_prime, h, .. } => {
                for i in 0..n - 1 {
                    m[(i, i)] = 2.0 * c_prime;
                }
                m[(n - 1, n - 1)] = 2.0 * c_prime / h.sqrt();
            }
            BarrierKind::W3 { c, h, d, d_h, .. } => {
                for i in 0..n - 1 {
                    m[(i, i)] = 2.0 * c * h / (d[i] * d[i]);
                }
                m[(n - 1, n - 1)] = 2.0 * c * h / (d_h * d_h);
            }
            BarrierKind::V { eps, .. } => {
                for i in 0..n - 1 {
                    m[(i, i)] = 1.0 + eps;
                }
                m[(n - 1, n - 1)] = (1.0 + eps).powi(1 - n as i32) * xn.max(0.0).powf(self.alpha);
            }
        }
        m
    }

    /// Determinant from the product structure of the Hessian.
    pub fn det_formula(&self, x: &[f64]) -> f64 {
        let n = self.dim;
        let xn = x[n - 1];
        match &self.kind {
            BarrierKind::W1 {
                c_prime,
                big_c,
                gamma,
            } => {
                let r = norm(&x[..n - 1]);
                let w = wbar_derivatives(r, big_c * xn, *gamma);
                c_prime.powi(n as i32) * big_c * big_c * w.det() * (w.r / r).powi(n as i32 - 2)
            }
            BarrierKind::W2 { c_prime, h, .. } => (2.0 * c_prime).powi(n as i32) / h.sqrt(),
            BarrierKind::W3 { c, h, d, d_h, .. } => {
                let prod: f64 = d.iter().map(|v| v * v).product();
                (2.0 * c * h).powi(n as i32) / (prod * d_h * d_h)
            }
            BarrierKind::V { .. } => xn.max(0.0).powf(self.alpha),
        }
    }

    /// Membership in the set where the comparison inequality is asserted.
    pub fn in_region(&self, x: &[f64]) -> bool {
        let n = self.dim;
        if x.len() != n {
            return false;
        }
        let xn = x[n - 1];
        let xp = &x[..n - 1];
        match &self.kind {
            BarrierKind::W1 { big_c, .. } => {
                let r = norm(xp);
                r > 0.0 && xn > 0.0 && big_c * xn < r.powf(1.5) && norm(x) < 2.0
            }
            BarrierKind::W2 { h, big_c, .. } => {
                norm(xp) <= big_c * h.sqrt() && xn > 0.0 && xn <= big_c * h.powf(0.75)
            }
            BarrierKind::W3 { d, d_h, .. } => {
                xp.iter().zip(d).map(|(a, b)| (a / b).powi(2)).sum::<f64>() <= 1.0
                    && xn > 0.0
                    && xn <= *d_h
            }
            BarrierKind::V { c1, .. } => norm(xp) <= *c1 && xn > 0.0 && xn <= 1.0,
        }
    }

    /// Seeded samples of the comparison region.
    pub fn sample_region(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let n = self.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let x = match &self.kind {
                BarrierKind::W1 { big_c, .. } => {
                    let mut x = ball_point(&mut rng, n - 1, 2.0);
                    let t: f64 = rng.gen_range(1e-6..1.0 - 1e-6);
                    x.push(t * norm(&x).powf(1.5) / big_c);
                    x
                }
                BarrierKind::W2 { h, big_c, .. } => {
                    let mut x = ball_point(&mut rng, n - 1, big_c * h.sqrt());
                    x.push(rng.gen_range(0.0..1.0) * big_c * h.powf(0.75));
                    x
                }
                BarrierKind::W3 { d, d_h, .. } => {
                    let mut x: Vec<f64> = ball_point(&mut rng, n - 1, 1.0)
                        .into_iter()
                        .zip(d)
                        .map(|(a, b)| a * b)
                        .collect();
                    x.push(rng.gen_range(0.0..1.0) * d_h);
                    x
                }
                BarrierKind::V { c1, .. } => {
                    let mut x = ball_point(&mut rng, n - 1, *c1);
                    x.push(rng.gen_range(0.0..1.0));
                    x
                }
            };
            if self.in_region(&x) {
                out.push(x);
            }
        }
        out
    }
}

struct Tally {
    dev: f64,
    margin: f64,
    worst: Option<Vec<f64>>,
}

impl Tally {
    fn new() -> Self {
        Tally {
            dev: 0.0,
            margin: f64::INFINITY,
            worst: None,
        }
    }

    fn slack(&mut self, s: f64, x: &[f64]) {
        if s < self.margin {
            self.margin = s;
            self.worst = Some(x.to_vec());
        }
    }
}

/// Verifies the barrier's comparison inequalities on `count` seeded samples
/// of its region and on the boundary pieces it must dominate or stay below.
pub fn verify_barrier(
    spec: &BarrierSpec,
    rhs: &RhsSpec,
    count: usize,
    seed: u64,
) -> Result<VerifyReport> {
    spec.validate()?;
    let pts = spec.sample_region(count, seed);
    verify_barrier_on(spec, rhs, &pts, seed)
}

/// As [`verify_barrier`] with caller-supplied interior points.
pub fn verify_barrier_on(
    spec: &BarrierSpec,
    rhs: &RhsSpec,
    points: &[Vec<f64>],
    seed: u64,
) -> Result<VerifyReport> {
    spec.validate()?;
    let n = spec.dim;
    if let Some(p) = points.iter().find(|p| !spec.in_region(p)) {
        return Err(LabError::Domain(format!(
            "{p:?} lies outside the validity region of {}",
            spec.name()
        )));
    }
    let mut tally = Tally::new();
    let equality = matches!(spec.kind, BarrierKind::V { .. });
    for x in points {
        let det = det_small(&spec.hessian(x));
        let exact = spec.det_formula(x);
        let f = rhs.at_point(x)?;
        let mut dev = rel_dev(det, exact);
        if equality {
            dev = dev.max(rel_dev(det, f));
        } else {
            tally.slack(det - f, x);
        }
        tally.dev = tally.dev.max(dev);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let extra = points.len().max(1);
    let boundary = match spec.kind {
        BarrierKind::W2 { .. } => extra,
        BarrierKind::V { .. } => 3 * extra,
        _ => 0,
    };
    match &spec.kind {
        BarrierKind::W1 { .. } => {}
        BarrierKind::W2 { h, big_c, mu, .. } => {
            for x in points {
                tally.slack(h - spec.value(x), x);
            }
            // boundary points below the parabola x_n ≤ C'|x'|²
            for _ in 0..extra {
                let mut x = ball_point(&mut rng, n - 1, big_c * h.sqrt());
                let top = (big_c * sq(&x)).min(big_c * h.powf(0.75));
                x.push(rng.gen_range(0.0..=1.0) * top);
                tally.slack(0.5 * mu * sq(&x[..n - 1]) - spec.value(&x), &x);
            }
        }
        BarrierKind::W3 { h, .. } => {
            for x in points {
                tally.slack(h - spec.value(x), x);
            }
        }
        BarrierKind::V { eps, c1 } => {
            let u0 = ClosedForm::u0(n, spec.alpha);
            let c2 = 1.0 + (n as f64 - 1.0) * spec.u0_coeff();
            for _ in 0..extra {
                let mut x = ball_point(&mut rng, n - 1, *c1);
                x.push(0.0);
                tally.slack(spec.value(&x) - u0.value(&x), &x);

                let mut y = ball_point(&mut rng, n - 1, 1.0);
                let r = norm(&y).max(1e-300);
                y.iter_mut().for_each(|v| *v *= c1 / r);
                y.push(rng.gen_range(0.0..=1.0));
                tally.slack(spec.value(&y) - u0.value(&y), &y);

                let mut z = ball_point(&mut rng, n - 1, *c1);
                z.push(1.0);
                tally.slack(spec.value(&z) - (u0.value(&z) - c2 * eps), &z);
            }
        }
    }
    let pass = if equality {
        tally.dev <= 1e-12 && tally.margin >= -1e-12
    } else {
        tally.dev <= FORMULA_TOL && tally.margin >= 0.0
    };
    Ok(VerifyReport {
        kind: spec.name().into(),
        max_deviation: tally.dev,
        margin: tally.margin,
        samples: points.len() + boundary,
        pass,
        worst_point: tally.worst,
    })
}

/// Doubles `C'` from its current value until the `W1` determinant margin is
/// positive on the sample set.
pub fn calibrate_w1(
    spec: &BarrierSpec,
    rhs: &RhsSpec,
    count: usize,
    seed: u64,
) -> Result<(BarrierSpec, VerifyReport)> {
    let mut s = spec.clone();
    for _ in 0..60 {
        let rep = verify_barrier(&s, rhs, count, seed)?;
        if rep.pass {
            return Ok((s, rep));
        }
        match &mut s.kind {
            BarrierKind::W1 { big_c, .. } => *big_c *= 2.0,
            _ => return Err(LabError::Input("calibration applies to w1 only".into())),
        }
    }
    Err(LabError::Precondition(
        "no C' up to 2^60 gives a positive margin".into(),
    ))
}
