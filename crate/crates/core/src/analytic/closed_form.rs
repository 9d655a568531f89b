//! Explicit solutions of `det D²u = x_n^α` in the half-space with boundary
//! trace `|x'|²/2`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{LabError, Result};
use crate::report::MonitorReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedFormKind {
    /// `½|x'|² + x_n^{2+α}/((1+α)(2+α))`.
    U0,
    /// `x₁²/(2(1+x_n)) + ½(x₂²+…+x_{n-1}²) + x_n^{2+α}/((1+α)(2+α)) + x_n^{3+α}/((2+α)(3+α))`,
    /// a second solution with the same trace that grows like `|x|^{3+α}`.
    NonUniqueness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Value,
    Gradient,
    Hessian,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Evaluation {
    Value(f64),
    Gradient(Vec<f64>),
    Hessian(DMatrix<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedForm {
    pub kind: ClosedFormKind,
    pub alpha: f64,
    pub dim: usize,
}

impl ClosedForm {
    pub fn u0(dim: usize, alpha: f64) -> Self {
        ClosedForm {
            kind: ClosedFormKind::U0,
            alpha,
            dim,
        }
    }

    pub fn non_uniqueness(dim: usize, alpha: f64) -> Self {
        ClosedForm {
            kind: ClosedFormKind::NonUniqueness,
            alpha,
            dim,
        }
    }

    /// Checked evaluation; `x_n < 0` is outside the half-space.
    pub fn eval(&self, x: &[f64], order: Order) -> Result<Evaluation> {
        if x.len() != self.dim {
            return Err(LabError::Domain(format!("{x:?} has wrong dimension")));
        }
        if !(x[self.dim - 1] >= 0.0) {
            return Err(LabError::Domain(format!("x_n = {} < 0", x[self.dim - 1])));
        }
        Ok(match order {
            Order::Value => Evaluation::Value(self.value(x)),
            Order::Gradient => Evaluation::Gradient(self.gradient(x)),
            Order::Hessian => Evaluation::Hessian(self.hessian(x)),
        })
    }

    fn coeffs(&self) -> (f64, f64) {
        let a = self.alpha;
        (1.0 / ((1.0 + a) * (2.0 + a)), 1.0 / ((2.0 + a) * (3.0 + a)))
    }

    /// Value with `x_n` clamped at zero.
    pub fn value(&self, x: &[f64]) -> f64 {
        let n = self.dim;
        let a = self.alpha;
        let t = x[n - 1].max(0.0);
        let (c2, c3) = self.coeffs();
        match self.kind {
            ClosedFormKind::U0 => {
                0.5 * x[..n - 1].iter().map(|v| v * v).sum::<f64>() + c2 * t.powf(2.0 + a)
            }
            ClosedFormKind::NonUniqueness => {
                x[0] * x[0] / (2.0 * (1.0 + t))
                    + 0.5 * x[1..n - 1].iter().map(|v| v * v).sum::<f64>()
                    + c2 * t.powf(2.0 + a)
                    + c3 * t.powf(3.0 + a)
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let a = self.alpha;
        let t = x[n - 1].max(0.0);
        let mut g = x.to_vec();
        match self.kind {
            ClosedFormKind::U0 => {
                g[n - 1] = t.powf(1.0 + a) / (1.0 + a);
            }
            ClosedFormKind::NonUniqueness => {
                g[0] = x[0] / (1.0 + t);
                g[n - 1] = -x[0] * x[0] / (2.0 * (1.0 + t).powi(2))
                    + t.powf(1.0 + a) / (1.0 + a)
                    + t.powf(2.0 + a) / (2.0 + a);
            }
        }
        g
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim;
        let a = self.alpha;
        let t = x[n - 1].max(0.0);
        let mut h = DMatrix::identity(n, n);
        match self.kind {
            ClosedFormKind::U0 => {
                h[(n - 1, n - 1)] = t.powf(a);
            }
            ClosedFormKind::NonUniqueness => {
                let s = 1.0 + t;
                h[(0, 0)] = 1.0 / s;
                h[(0, n - 1)] = -x[0] / (s * s);
                h[(n - 1, 0)] = -x[0] / (s * s);
                h[(n - 1, n - 1)] = x[0] * x[0] / (s * s * s) + t.powf(a) + t.powf(1.0 + a);
            }
        }
        h
    }
}

/// Determinant of a small symmetric matrix by cofactor expansion.
pub fn det_small(m: &DMatrix<f64>) -> f64 {
    match m.nrows() {
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        3 => {
            m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
                - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
                + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
        }
        _ => m.clone().determinant(),
    }
}

/// Uniform samples in `[-1,1]^{n-1} × (0, 1]`, seeded.
pub fn half_space_samples(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            x[dim - 1] = rng.gen_range(1e-6..1.0);
            x
        })
        .collect()
}

/// Checks `det D²u = x_n^α` at the samples and `u(x',0) = |x'|²/2` at their
/// projections onto the boundary plane.
pub fn verify_ma_identity(sol: &ClosedForm, samples: &[Vec<f64>]) -> Result<MonitorReport> {
    let n = sol.dim;
    let mut det_rep = MonitorReport::new("ma-identity");
    let mut trace_dev: f64 = 0.0;
    for x in samples {
        if !(x[n - 1] > 0.0) {
            return Err(LabError::Domain(format!("sample {x:?} not in x_n > 0")));
        }
        let h = match sol.eval(x, Order::Hessian)? {
            Evaluation::Hessian(h) => h,
            _ => unreachable!(),
        };
        let dev = (det_small(&h) - x[n - 1].powf(sol.alpha)).abs();
        det_rep.observe(dev, x);
        let mut b = x.clone();
        b[n - 1] = 0.0;
        let q = 0.5 * b[..n - 1].iter().map(|v| v * v).sum::<f64>();
        trace_dev = trace_dev.max((sol.value(&b) - q).abs());
    }
    Ok(det_rep
        .with_context("trace_deviation", trace_dev)
        .with_context("samples", samples.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn u0_value_at_unit_normal() {
        let u = ClosedForm::u0(2, 1.0);
        match u.eval(&[0.0, 1.0], Order::Value).unwrap() {
            Evaluation::Value(v) => assert!((v - 1.0 / 6.0).abs() < 1e-16),
            _ => panic!(),
        }
    }

    #[test]
    fn non_uniqueness_value_at_ones() {
        let u = ClosedForm::non_uniqueness(2, 1.0);
        assert!((u.value(&[1.0, 1.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn u0_hessian_is_diagonal() {
        let h = ClosedForm::u0(3, 1.0).hessian(&[0.3, -0.2, 0.5]);
        let exact = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1.0, 0.5]));
        assert_eq!(h, exact);
    }

    #[test]
    fn negative_normal_coordinate_is_domain_error() {
        let u = ClosedForm::u0(2, 1.0);
        assert!(matches!(
            u.eval(&[0.0, -0.1], Order::Value),
            Err(LabError::Domain(_))
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for sol in [ClosedForm::u0(3, 0.5), ClosedForm::non_uniqueness(3, 2.0)] {
            let x = [0.4, -0.3, 0.7];
            let g = sol.gradient(&x);
            for i in 0..3 {
                let mut p = x;
                let mut m = x;
                p[i] += 1e-6;
                m[i] -= 1e-6;
                let fd = (sol.value(&p) - sol.value(&m)) / 2e-6;
                assert!((fd - g[i]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn identities_hold_for_both_kinds() {
        for alpha in [0.0, 0.5, 1.0, 2.0] {
            for dim in [2, 3] {
                for sol in [
                    ClosedForm::u0(dim, alpha),
                    ClosedForm::non_uniqueness(dim, alpha),
                ] {
                    let s = half_space_samples(dim, 1000, 7);
                    let r = verify_ma_identity(&sol, &s).unwrap();
                    assert!(r.max_value <= 1e-10, "{:?} {}", sol, r.max_value);
                    assert!(r.context["trace_deviation"] <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn alpha_zero_u0_has_unit_determinant() {
        let u = ClosedForm::u0(2, 0.0);
        for x in half_space_samples(2, 50, 1) {
            assert_eq!(det_small(&u.hessian(&x)), 1.0);
        }
    }
}
