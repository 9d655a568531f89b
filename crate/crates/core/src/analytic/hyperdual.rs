//! Hyper-dual numbers `a + b ε₁ + c ε₂ + d ε₁ε₂` with `ε₁² = ε₂² = 0`:
//! exact first and mixed second derivatives by forward evaluation.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperDual {
    pub re: f64,
    pub e1: f64,
    pub e2: f64,
    pub e12: f64,
}

impl HyperDual {
    pub fn constant(v: f64) -> Self {
        HyperDual {
            re: v,
            e1: 0.0,
            e2: 0.0,
            e12: 0.0,
        }
    }

    /// Variable seeded in the given perturbation slots.
    pub fn var(v: f64, d1: bool, d2: bool) -> Self {
        HyperDual {
            re: v,
            e1: if d1 { 1.0 } else { 0.0 },
            e2: if d2 { 1.0 } else { 0.0 },
            e12: 0.0,
        }
    }

    /// Chain rule for a scalar map with value `f`, slope `df`, curvature `d2f`.
    fn lift(self, f: f64, df: f64, d2f: f64) -> Self {
        HyperDual {
            re: f,
            e1: df * self.e1,
            e2: df * self.e2,
            e12: df * self.e12 + d2f * self.e1 * self.e2,
        }
    }

    pub fn powf(self, p: f64) -> Self {
        let a = self.re;
        self.lift(
            a.powf(p),
            p * a.powf(p - 1.0),
            p * (p - 1.0) * a.powf(p - 2.0),
        )
    }

    pub fn sqrt(self) -> Self {
        self.powf(0.5)
    }

    pub fn max0(self) -> Self {
        if self.re > 0.0 {
            self
        } else {
            HyperDual::constant(0.0)
        }
    }
}

impl Add for HyperDual {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        HyperDual {
            re: self.re + o.re,
            e1: self.e1 + o.e1,
            e2: self.e2 + o.e2,
            e12: self.e12 + o.e12,
        }
    }
}

impl Sub for HyperDual {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl Neg for HyperDual {
    type Output = Self;
    fn neg(self) -> Self {
        HyperDual {
            re: -self.re,
            e1: -self.e1,
            e2: -self.e2,
            e12: -self.e12,
        }
    }
}

impl Mul for HyperDual {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        HyperDual {
            re: self.re * o.re,
            e1: self.re * o.e1 + self.e1 * o.re,
            e2: self.re * o.e2 + self.e2 * o.re,
            e12: self.re * o.e12 + self.e1 * o.e2 + self.e2 * o.e1 + self.e12 * o.re,
        }
    }
}

impl Div for HyperDual {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let a = o.re;
        self * o.lift(1.0 / a, -1.0 / (a * a), 2.0 / (a * a * a))
    }
}

impl Mul<f64> for HyperDual {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        HyperDual {
            re: self.re * k,
            e1: self.e1 * k,
            e2: self.e2 * k,
            e12: self.e12 * k,
        }
    }
}

/// `(f, ∂_a f, ∂_b f, ∂_a∂_b f)` of a two-argument function at `(x, y)`,
/// where `a, b ∈ {0, 1}` select the arguments.
pub fn second_partial(
    f: impl Fn(HyperDual, HyperDual) -> HyperDual,
    x: f64,
    y: f64,
    a: usize,
    b: usize,
) -> (f64, f64, f64, f64) {
    let hx = HyperDual::var(x, a == 0, b == 0);
    let hy = HyperDual::var(y, a == 1, b == 1);
    let r = f(hx, hy);
    (r.re, r.e1, r.e2, r.e12)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_derivatives() {
        // f = x³ y², f_xy = 6 x² y
        let f = |x: HyperDual, y: HyperDual| x * x * x * y * y;
        let (v, fx, fy, fxy) = second_partial(f, 1.5, -2.0, 0, 1);
        assert_eq!(v, 1.5f64.powi(3) * 4.0);
        assert!((fx - 3.0 * 2.25 * 4.0).abs() < 1e-12);
        assert!((fy - 1.5f64.powi(3) * -4.0).abs() < 1e-12);
        assert!((fxy - 6.0 * 2.25 * -2.0).abs() < 1e-12);
        let (_, _, _, fxx) = second_partial(f, 1.5, -2.0, 0, 0);
        assert!((fxx - 6.0 * 1.5 * 4.0).abs() < 1e-12);
    }

    #[test]
    fn quotient_and_power() {
        let f = |x: HyperDual, _y: HyperDual| HyperDual::constant(1.0) / x.powf(1.5);
        let (_, d1, _, d2) = second_partial(f, 2.0, 0.0, 0, 0);
        assert!((d1 + 1.5 * 2f64.powf(-2.5)).abs() < 1e-14);
        assert!((d2 - 3.75 * 2f64.powf(-3.5)).abs() < 1e-14);
    }
}
