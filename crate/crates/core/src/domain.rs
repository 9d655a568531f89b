//! Convex domains in two and three dimensions.
//!
//! Every domain is normalized so that its marked boundary point sits at the
//! origin (unless configured otherwise) with inner normal `e_n`, i.e. the
//! region lies in `{x_n > 0}` near the marked point.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Outward unit normal and offset of a polytope face: `normal · x <= offset` inside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Face {
    pub normal: Vec<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// `{0 < x_n < height}`; `height` may be infinite.
    Slab {
        height: f64,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// `B_R(0) ∩ {x_n > 0}`.
    HalfBall {
        radius: f64,
    },
    /// `Σ |(x_i - c_i)/a_i|^p < 1` with `p >= 1`.
    Superellipse {
        center: Vec<f64>,
        semi_axes: Vec<f64>,
        exponent: f64,
    },
    /// Interior of the convex hull of the given vertices.
    Polytope {
        vertices: Vec<Vec<f64>>,
        faces: Vec<Face>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexDomain {
    dim: usize,
    shape: Shape,
    marked_point: Vec<f64>,
    tangent_ball_radius: f64,
}

pub const DEFAULT_TANGENT_RADIUS: f64 = 0.5;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

impl ConvexDomain {
    /// Builds a domain with the marked point at the origin and the default
    /// tangent-ball radius (shrunk if the shape cannot hold it).
    pub fn new(dim: usize, shape: Shape) -> Result<Self> {
        let marked = vec![0.0; dim];
        Self::with_marked_point(dim, shape, marked, None)
    }

    pub fn with_marked_point(
        dim: usize,
        shape: Shape,
        marked_point: Vec<f64>,
        tangent_ball_radius: Option<f64>,
    ) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(LabError::Input(format!("dimension {dim} not in {{2,3}}")));
        }
        if marked_point.len() != dim {
            return Err(LabError::Input("marked point has wrong dimension".into()));
        }
        let shape = validate_shape(dim, shape)?;
        let mut domain = ConvexDomain {
            dim,
            shape,
            marked_point,
            tangent_ball_radius: 0.0,
        };
        let lvl = domain.level(&domain.marked_point).abs();
        if lvl > 1e-9 {
            return Err(LabError::Input(format!(
                "marked point is not on the boundary (level {lvl:e})"
            )));
        }
        match tangent_ball_radius {
            Some(rho) => {
                if !(rho > 0.0) {
                    return Err(LabError::Input(
                        "tangent ball radius must be positive".into(),
                    ));
                }
                domain.tangent_ball_radius = rho;
                if !domain.tangent_ball_fits(rho) {
                    return Err(LabError::Input(format!(
                        "interior tangent ball of radius {rho} does not fit"
                    )));
                }
            }
            None => {
                let mut rho = DEFAULT_TANGENT_RADIUS;
                while !domain.tangent_ball_fits(rho) {
                    rho *= 0.5;
                    if rho < 1e-6 {
                        return Err(LabError::Input(
                            "no interior tangent ball at marked point".into(),
                        ));
                    }
                }
                domain.tangent_ball_radius = rho;
            }
        }
        Ok(domain)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn marked_point(&self) -> &[f64] {
        &self.marked_point
    }

    pub fn tangent_ball_radius(&self) -> f64 {
        self.tangent_ball_radius
    }

    /// Inner normal at the marked point.
    pub fn inner_normal(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.dim];
        e[self.dim - 1] = 1.0;
        e
    }

    /// Signed level function: negative inside, zero on the boundary. It is the
    /// signed distance for every shape except the superellipse.
    pub fn level(&self, x: &[f64]) -> f64 {
        let n = self.dim;
        match &self.shape {
            Shape::Slab { height } => {
                let lo = -x[n - 1];
                if height.is_finite() {
                    lo.max(x[n - 1] - height)
                } else {
                    lo
                }
            }
            Shape::Ball { center, radius } => dist(x, center) - radius,
            Shape::HalfBall { radius } => (norm(x) - radius).max(-x[n - 1]),
            Shape::Superellipse {
                center,
                semi_axes,
                exponent,
            } => {
                let s: f64 = x
                    .iter()
                    .zip(center)
                    .zip(semi_axes)
                    .map(|((xi, ci), ai)| ((xi - ci) / ai).abs().powf(*exponent))
                    .sum();
                s.powf(1.0 / exponent) - 1.0
            }
            Shape::Polytope { faces, .. } => faces
                .iter()
                .map(|f| dot(&f.normal, x) - f.offset)
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.level(x) < 0.0
    }

    /// Euclidean distance from a point of the closure to the boundary.
    pub fn boundary_distance(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(LabError::Domain(format!("point {x:?} has wrong dimension")));
        }
        let lvl = self.level(x);
        if lvl > 1e-12 {
            return Err(LabError::Domain(format!("{x:?} (level {lvl:e})")));
        }
        let d = match &self.shape {
            Shape::Superellipse { .. } => self.superellipse_distance(x),
            _ => -lvl,
        };
        Ok(d.max(0.0))
    }

    fn superellipse_distance(&self, x: &[f64]) -> f64 {
        let Shape::Superellipse {
            center,
            semi_axes,
            exponent,
        } = &self.shape
        else {
            unreachable!()
        };
        let p = *exponent;
        let sp = |c: f64| c.signum() * c.abs().powf(2.0 / p);
        if self.dim == 2 {
            let point = |th: f64| {
                [
                    center[0] + semi_axes[0] * sp(th.cos()),
                    center[1] + semi_axes[1] * sp(th.sin()),
                ]
            };
            let f = |th: f64| dist(x, &point(th));
            let m = 1440;
            let step = std::f64::consts::TAU / m as f64;
            let (mut best, mut best_th) = (f64::INFINITY, 0.0);
            for k in 0..m {
                let th = k as f64 * step;
                let d = f(th);
                if d < best {
                    best = d;
                    best_th = th;
                }
            }
            let (th, d) = golden_min(&f, best_th - step, best_th + step, 1e-13);
            let _ = th;
            d.min(best)
        } else {
            let point = |th: f64, ph: f64| {
                let (ct, st, cp, s_p) = (th.cos(), th.sin(), ph.cos(), ph.sin());
                let cpp = cp.abs().powf(2.0 / p);
                [
                    center[0] + semi_axes[0] * sp(ct) * cpp,
                    center[1] + semi_axes[1] * sp(st) * cpp,
                    center[2] + semi_axes[2] * sp(s_p),
                ]
            };
            let f = |th: f64, ph: f64| dist(x, &point(th, ph));
            let (mt, mp) = (240, 120);
            let (dt, dp) = (
                std::f64::consts::TAU / mt as f64,
                std::f64::consts::PI / mp as f64,
            );
            let (mut best, mut bt, mut bp) = (f64::INFINITY, 0.0, 0.0);
            for i in 0..mt {
                for j in 0..=mp {
                    let th = i as f64 * dt;
                    let ph = -std::f64::consts::FRAC_PI_2 + j as f64 * dp;
                    let d = f(th, ph);
                    if d < best {
                        best = d;
                        bt = th;
                        bp = ph;
                    }
                }
            }
            // pattern search refinement
            let (mut st, mut sph) = (dt, dp);
            while st > 1e-12 {
                let mut improved = false;
                for (a, b) in [(st, 0.0), (-st, 0.0), (0.0, sph), (0.0, -sph)] {
                    let ph =
                        (bp + b).clamp(-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2);
                    let d = f(bt + a, ph);
                    if d < best {
                        best = d;
                        bt += a;
                        bp = ph;
                        improved = true;
                    }
                }
                if !improved {
                    st *= 0.5;
                    sph *= 0.5;
                }
            }
            best
        }
    }

    /// Whether the ball of radius `rho` tangent at the marked point (centered
    /// at `marked + rho e_n`) lies in the closure.
    pub fn tangent_ball_fits(&self, rho: f64) -> bool {
        let mut c = self.marked_point.clone();
        c[self.dim - 1] += rho;
        let tol = 1e-9 * rho.max(1.0);
        sphere_samples(self.dim, 48).iter().all(|u| {
            let x: Vec<f64> = c.iter().zip(u).map(|(ci, ui)| ci + rho * ui).collect();
            self.level(&x) <= tol
        })
    }

    /// Parameter `t ∈ (0, 1]` where the segment `x + t d` leaves the region
    /// described by `level`. Returns 1 when the endpoint is still inside.
    pub fn exit_parameter(level: impl Fn(&[f64]) -> f64, x: &[f64], d: &[f64]) -> f64 {
        let at = |t: f64| -> f64 {
            let y: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + t * b).collect();
            level(&y)
        };
        if at(1.0) < 0.0 {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if at(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-16 {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Axis-aligned box containing the domain, if bounded.
    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = self.dim;
        match &self.shape {
            Shape::Slab { .. } => None,
            Shape::Ball { center, radius } => Some((
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            )),
            Shape::HalfBall { radius } => {
                let mut lo = vec![-radius; n];
                lo[n - 1] = 0.0;
                Some((lo, vec![*radius; n]))
            }
            Shape::Superellipse {
                center, semi_axes, ..
            } => Some((
                center.iter().zip(semi_axes).map(|(c, a)| c - a).collect(),
                center.iter().zip(semi_axes).map(|(c, a)| c + a).collect(),
            )),
            Shape::Polytope { vertices, .. } => {
                let mut lo = vec![f64::INFINITY; n];
                let mut hi = vec![f64::NEG_INFINITY; n];
                for v in vertices {
                    for i in 0..n {
                        lo[i] = lo[i].min(v[i]);
                        hi[i] = hi[i].max(v[i]);
                    }
                }
                Some((lo, hi))
            }
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn golden_min(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Deterministic unit vectors covering the sphere S^{n-1}.
pub(crate) fn sphere_samples(dim: usize, m: usize) -> Vec<Vec<f64>> {
    let tau = std::f64::consts::TAU;
    if dim == 2 {
        (0..m)
            .map(|k| {
                let t = tau * k as f64 / m as f64;
                vec![t.cos(), t.sin()]
            })
            .collect()
    } else {
        let mut out = Vec::new();
        for j in 0..=m / 2 {
            let ph =
                -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * j as f64 / (m / 2) as f64;
            for k in 0..m {
                let t = tau * k as f64 / m as f64;
                out.push(vec![ph.cos() * t.cos(), ph.cos() * t.sin(), ph.sin()]);
            }
        }
        out
    }
}

fn validate_shape(dim: usize, shape: Shape) -> Result<Shape> {
    let bad = |m: &str| Err(LabError::Input(m.to_string()));
    match shape {
        Shape::Slab { height } => {
            if !(height > 0.0) {
                return bad("slab height must be positive");
            }
            Ok(Shape::Slab { height })
        }
        Shape::Ball { center, radius } => {
            if center.len() != dim || !(radius > 0.0) {
                return bad("ball needs a center of matching dimension and positive radius");
            }
            Ok(Shape::Ball { center, radius })
        }
        Shape::HalfBall { radius } => {
            if !(radius > 0.0) {
                return bad("half-ball radius must be positive");
            }
            Ok(Shape::HalfBall { radius })
        }
        Shape::Superellipse {
            center,
            semi_axes,
            exponent,
        } => {
            if center.len() != dim || semi_axes.len() != dim {
                return bad("superellipse center/axes have wrong dimension");
            }
            if semi_axes.iter().any(|a| !(*a > 0.0)) || !(exponent >= 1.0) {
                return bad("superellipse needs positive axes and exponent >= 1");
            }
            Ok(Shape::Superellipse {
                center,
                semi_axes,
                exponent,
            })
        }
        Shape::Polytope { vertices, .. } => {
            let (vertices, faces) = convex_hull(dim, vertices)?;
            Ok(Shape::Polytope { vertices, faces })
        }
    }
}

/// Deduplicates vertices (within 1e-12) and returns hull vertices and faces.
pub fn convex_hull(dim: usize, vertices: Vec<Vec<f64>>) -> Result<(Vec<Vec<f64>>, Vec<Face>)> {
    if vertices.iter().any(|v| v.len() != dim) {
        return Err(LabError::Input(
            "polytope vertex with wrong dimension".into(),
        ));
    }
    let mut uniq: Vec<Vec<f64>> = Vec::new();
    for v in vertices {
        if !uniq.iter().any(|u| dist(u, &v) <= 1e-12) {
            uniq.push(v);
        }
    }
    if uniq.len() < dim + 1 {
        return Err(LabError::Input(
            "polytope needs at least n+1 distinct vertices".into(),
        ));
    }
    let mut faces: Vec<Face> = Vec::new();
    let push_face = |faces: &mut Vec<Face>, normal: Vec<f64>, offset: f64| {
        let dup = faces
            .iter()
            .any(|f| dist(&f.normal, &normal) < 1e-9 && (f.offset - offset).abs() < 1e-9);
        if !dup {
            faces.push(Face { normal, offset });
        }
    };
    let m = uniq.len();
    if dim == 2 {
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                let (a, b) = (&uniq[i], &uniq[j]);
                let e = [b[0] - a[0], b[1] - a[1]];
                let len = (e[0] * e[0] + e[1] * e[1]).sqrt();
                let nrm = vec![e[1] / len, -e[0] / len];
                let off = dot(&nrm, a);
                if uniq.iter().all(|p| dot(&nrm, p) - off <= 1e-12) {
                    push_face(&mut faces, nrm, off);
                }
            }
        }
    } else {
        for i in 0..m {
            for j in (i + 1)..m {
                for k in (j + 1)..m {
                    let (a, b, c) = (&uniq[i], &uniq[j], &uniq[k]);
                    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
                    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
                    let cr = [
                        u[1] * v[2] - u[2] * v[1],
                        u[2] * v[0] - u[0] * v[2],
                        u[0] * v[1] - u[1] * v[0],
                    ];
                    let len = norm(&cr);
                    if len < 1e-12 {
                        continue;
                    }
                    for sgn in [1.0, -1.0] {
                        let nrm: Vec<f64> = cr.iter().map(|c| sgn * c / len).collect();
                        let off = dot(&nrm, a);
                        if uniq.iter().all(|p| dot(&nrm, p) - off <= 1e-12) {
                            push_face(&mut faces, nrm, off);
                        }
                    }
                }
            }
        }
    }
    if faces.len() < dim + 1 {
        return Err(LabError::Input(
            "polytope is degenerate (empty interior)".into(),
        ));
    }
    let hull: Vec<Vec<f64>> = uniq
        .into_iter()
        .filter(|p| {
            faces
                .iter()
                .filter(|f| (dot(&f.normal, p) - f.offset).abs() <= 1e-12)
                .count()
                >= dim
        })
        .collect();
    Ok((hull, faces))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball2() -> ConvexDomain {
        ConvexDomain::new(
            2,
            Shape::Ball {
                center: vec![0.0, 1.0],
                radius: 1.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn ball_center_distance_is_radius() {
        assert!((ball2().boundary_distance(&[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn slab_distance_is_normal_coordinate() {
        let d = ConvexDomain::new(
            2,
            Shape::Slab {
                height: f64::INFINITY,
            },
        )
        .unwrap();
        assert!((d.boundary_distance(&[0.3, 0.2]).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn ball_distance_matches_dense_boundary_sampling() {
        let d = ball2();
        let x = [0.0, 0.5];
        let got = d.boundary_distance(&x).unwrap();
        // oracle: nearest of 200k boundary samples
        let m = 200_000;
        let oracle = (0..m)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / m as f64;
                dist(&x, &[t.cos(), 1.0 + t.sin()])
            })
            .fold(f64::INFINITY, f64::min);
        assert!((got - 0.5).abs() < 1e-15);
        assert!((got - oracle).abs() < 1e-9);
    }

    #[test]
    fn outside_point_is_domain_error() {
        assert!(matches!(
            ball2().boundary_distance(&[0.0, -0.1]),
            Err(LabError::Domain(_))
        ));
    }

    #[test]
    fn polytope_square_faces_and_distance() {
        let d = ConvexDomain::new(
            2,
            Shape::Polytope {
                vertices: vec![
                    vec![-1.0, 0.0],
                    vec![1.0, 0.0],
                    vec![1.0, 2.0],
                    vec![-1.0, 2.0],
                    vec![-1.0, 2.0 + 1e-13],
                    vec![0.0, 0.0],
                ],
                faces: vec![],
            },
        )
        .unwrap();
        let Shape::Polytope { vertices, faces } = d.shape() else {
            panic!()
        };
        assert_eq!(faces.len(), 4);
        assert_eq!(vertices.len(), 4);
        assert!((d.boundary_distance(&[0.5, 0.7]).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn polytope_3d_cube() {
        let mut v = Vec::new();
        for a in [-1.0, 1.0] {
            for b in [-1.0, 1.0] {
                for c in [0.0, 2.0] {
                    v.push(vec![a, b, c]);
                }
            }
        }
        let d = ConvexDomain::new(
            3,
            Shape::Polytope {
                vertices: v,
                faces: vec![],
            },
        )
        .unwrap();
        let Shape::Polytope { faces, .. } = d.shape() else {
            panic!()
        };
        assert_eq!(faces.len(), 6);
        assert!((d.boundary_distance(&[0.2, 0.1, 0.4]).unwrap() - 0.4).abs() < 1e-14);
    }

    #[test]
    fn superellipse_with_p2_is_an_ellipse_disk() {
        let d = ConvexDomain::new(
            2,
            Shape::Superellipse {
                center: vec![0.0, 1.0],
                semi_axes: vec![1.0, 1.0],
                exponent: 2.0,
            },
        )
        .unwrap();
        let got = d.boundary_distance(&[0.3, 0.8]).unwrap();
        let exact = 1.0 - dist(&[0.3, 0.8], &[0.0, 1.0]);
        assert!((got - exact).abs() < 1e-10, "{got} vs {exact}");
    }

    #[test]
    fn superellipse_3d_distance() {
        let d = ConvexDomain::new(
            3,
            Shape::Superellipse {
                center: vec![0.0, 0.0, 1.0],
                semi_axes: vec![1.0, 1.0, 1.0],
                exponent: 2.0,
            },
        )
        .unwrap();
        let got = d.boundary_distance(&[0.1, 0.2, 0.9]).unwrap();
        let exact = 1.0 - dist(&[0.1, 0.2, 0.9], &[0.0, 0.0, 1.0]);
        assert!((got - exact).abs() < 1e-9, "{got} vs {exact}");
    }

    #[test]
    fn half_ball_distance_and_default_tangent_ball() {
        let d = ConvexDomain::new(2, Shape::HalfBall { radius: 1.0 }).unwrap();
        assert_eq!(d.tangent_ball_radius(), 0.5);
        assert!((d.boundary_distance(&[0.0, 0.3]).unwrap() - 0.3).abs() < 1e-15);
        assert!((d.boundary_distance(&[0.0, 0.9]).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn marked_point_must_be_on_boundary() {
        let r = ConvexDomain::new(
            2,
            Shape::Ball {
                center: vec![0.0, 2.0],
                radius: 1.0,
            },
        );
        assert!(r.is_err());
    }

    #[test]
    fn oversized_tangent_ball_rejected() {
        let r = ConvexDomain::with_marked_point(
            2,
            Shape::HalfBall { radius: 1.0 },
            vec![0.0, 0.0],
            Some(0.8),
        );
        assert!(r.is_err());
    }
}
