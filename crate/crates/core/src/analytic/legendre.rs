//! Discrete Legendre transforms by exhaustive maximization.

use std::sync::Arc;

use crate::analytic::closed_form::{ClosedForm, ClosedFormKind};
use crate::domain::{ConvexDomain, Shape};
use crate::error::{LabError, Result};
use crate::field::{Layout, NodeKind, ScalarField};
use crate::grid::Grid;
use crate::report::MonitorReport;

/// Every sample of the primal field: non-exterior nodes and boundary cuts.
pub fn primal_samples(field: &ScalarField) -> Vec<(Vec<f64>, f64)> {
    let g = field.grid();
    let mut out: Vec<(Vec<f64>, f64)> = (0..g.len())
        .filter(|&i| field.kinds()[i] != NodeKind::Exterior)
        .map(|i| (g.coords(i), field.value(i)))
        .collect();
    out.extend(field.cuts().iter().map(|c| (field.cut_point(c), c.value)));
    out
}

/// `max_k (x_k·ξ − u_k)`.
pub fn conjugate_at(samples: &[(Vec<f64>, f64)], xi: &[f64]) -> f64 {
    samples
        .iter()
        .map(|(x, u)| x.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>() - u)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Axis-aligned box domain matching the grid, marked at the center of the
/// bottom face.
fn box_domain(grid: &Grid) -> Result<ConvexDomain> {
    let n = grid.dim();
    let lo = grid.lo().to_vec();
    let hi = grid.hi();
    let vertices: Vec<Vec<f64>> = (0..(1usize << n))
        .map(|c| {
            (0..n)
                .map(|d| if (c >> d) & 1 == 1 { hi[d] } else { lo[d] })
                .collect()
        })
        .collect();
    let mut marked: Vec<f64> = (0..n).map(|d| 0.5 * (lo[d] + hi[d])).collect();
    marked[n - 1] = lo[n - 1];
    ConvexDomain::with_marked_point(
        n,
        Shape::Polytope {
            vertices,
            faces: Vec::new(),
        },
        marked,
        None,
    )
}

/// `u*(ξ) = sup_x (x·ξ − u(x))` on the nodes of `dual`. The returned field
/// carries the exact discrete conjugate as its trace, so it can be evaluated
/// anywhere in the dual box.
pub fn legendre_full(field: &ScalarField, dual: &Grid) -> Result<ScalarField> {
    if !field.convexity_flag() {
        return Err(LabError::Precondition(
            "legendre transform needs a convex field".into(),
        ));
    }
    if dual.dim() != field.dim() {
        return Err(LabError::Input(
            "dual grid dimension differs from the field".into(),
        ));
    }
    let samples = Arc::new(primal_samples(field));
    let layout = Layout::new(&box_domain(dual)?, dual)?;
    let values: Vec<f64> = (0..dual.len())
        .map(|i| conjugate_at(&samples, &dual.coords(i)))
        .collect();
    let trace = move |xi: &[f64]| conjugate_at(&samples, xi);
    Ok(ScalarField::from_parts(layout, values, Vec::new())?.with_trace(Arc::new(trace)))
}

/// Largest dual coordinate magnitude `max |ξ|` over the dual nodes.
fn dual_radius(dual: &ScalarField) -> f64 {
    let g = dual.grid();
    (0..g.len())
        .map(|i| g.coords(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// `u**` at the interior primal nodes compared with `u`; tolerance
/// `2 h |ξ|_max` with `h` the primal spacing.
pub fn involution_check(field: &ScalarField, dual: &ScalarField) -> MonitorReport {
    let dual_samples = primal_samples(dual);
    let g = field.grid();
    let mut rep = MonitorReport::new("legendre-involution");
    let mut signed: f64 = f64::NEG_INFINITY;
    for i in g_interior(field) {
        let x = g.coords(i);
        let back = conjugate_at(&dual_samples, &x);
        rep.observe((field.value(i) - back).abs(), &x);
        signed = signed.max(back - field.value(i));
    }
    let tol = 2.0 * g.spacing() * dual_radius(dual);
    rep.with_context("tolerance", tol)
        .with_context("max_overshoot", signed)
}

fn g_interior(field: &ScalarField) -> impl Iterator<Item = usize> + '_ {
    (0..field.grid().len()).filter(move |&i| field.kinds()[i] == NodeKind::Interior)
}

/// Contact set `K = {u* ≤ tol}` of a conjugate whose primal vanishes with
/// zero gradient at the origin. Reports `ĉ = min −ξ_n/|ξ'|²` over points of
/// `K` with `ξ' ≠ 0` (infinite when `K` lies on the normal axis) and the
/// largest `ξ_n` on `K`.
pub fn contact_set_check(dual: &ScalarField, tol: f64) -> MonitorReport {
    let g = dual.grid();
    let n = g.dim();
    let mut rep = MonitorReport::new("contact-set");
    let mut c_hat = f64::INFINITY;
    let mut count = 0usize;
    for i in 0..g.len() {
        if dual.value(i) > tol {
            continue;
        }
        count += 1;
        let xi = g.coords(i);
        rep.observe(xi[n - 1], &xi);
        let t: f64 = xi[..n - 1].iter().map(|v| v * v).sum();
        if t > 0.0 {
            c_hat = c_hat.min(-xi[n - 1] / t);
        }
    }
    rep.with_context("c_hat", c_hat)
        .with_context("points", count as f64)
}

/// `ū(p, x_n) = sup_{x₁} (p x₁ − u(x₁, x_n))` on the rows `x_n = const`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialLegendre {
    /// Slope grid shared by every row.
    pub p: Vec<f64>,
    pub xn: Vec<f64>,
    /// `values[row][k]` at `(p[k], xn[row])`.
    pub values: Vec<Vec<f64>>,
}

/// Sorted `(x₁, u)` samples of one grid row, including its boundary cuts.
fn row_samples(field: &ScalarField, j: usize) -> Vec<(f64, f64)> {
    let g = field.grid();
    let mut pts: Vec<(f64, f64)> = (0..g.counts()[0])
        .map(|i| g.index(&[i, j]))
        .filter(|&k| field.kinds()[k] != NodeKind::Exterior)
        .map(|k| (g.coords(k)[0], field.value(k)))
        .collect();
    for c in field.cuts().iter().filter(|c| c.axis == 0) {
        if g.multi_index(c.node)[1] == j {
            pts.push((field.cut_point(c)[0], c.value));
        }
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|a, b| (a.0 - b.0).abs() <= 1e-12);
    pts
}

/// Per-row transform on the slope grid `p ∈ h ℤ` strictly inside every
/// selected row's range of difference quotients, so that each supremum is
/// attained in the interior of its row.
pub fn partial_legendre_2d(field: &ScalarField, xn_range: (f64, f64)) -> Result<PartialLegendre> {
    if field.dim() != 2 {
        return Err(LabError::Input(
            "partial transform is two-dimensional".into(),
        ));
    }
    let g = field.grid();
    let h = g.spacing();
    let mut rows = Vec::new();
    let (mut p_lo, mut p_hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for j in 0..g.counts()[1] {
        let y = g.lo()[1] + j as f64 * h;
        if y < xn_range.0 - 1e-12 || y > xn_range.1 + 1e-12 {
            continue;
        }
        let pts = row_samples(field, j);
        if pts.len() < 3 {
            continue;
        }
        let slopes: Vec<f64> = pts
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .collect();
        for w in slopes.windows(2) {
            let scale = 1.0 + w[0].abs().max(w[1].abs());
            if w[1] - w[0] < -1e-10 * scale {
                return Err(LabError::Precondition(format!(
                    "row x_n = {y} is not convex in x₁"
                )));
            }
            if w[1] - w[0] <= 1e-12 * scale {
                return Err(LabError::Multivalued(format!(
                    "flat piece on row x_n = {y}"
                )));
            }
        }
        p_lo = p_lo.max(slopes[0]);
        p_hi = p_hi.min(*slopes.last().unwrap());
        rows.push((y, pts));
    }
    if rows.is_empty() {
        return Err(LabError::InsufficientData(
            "no row in the requested x_n range".into(),
        ));
    }
    let m_lo = (p_lo / h).floor() as i64 + 1;
    let m_hi = (p_hi / h).ceil() as i64 - 1;
    if m_hi < m_lo {
        return Err(LabError::InsufficientData(
            "rows share no interior slope".into(),
        ));
    }
    let p: Vec<f64> = (m_lo..=m_hi).map(|m| m as f64 * h).collect();
    let values = rows
        .iter()
        .map(|(_, pts)| {
            p.iter()
                .map(|&q| {
                    pts.iter()
                        .map(|(x, u)| q * x - u)
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .collect()
        })
        .collect();
    Ok(PartialLegendre {
        p,
        xn: rows.iter().map(|r| r.0).collect(),
        values,
    })
}

impl PartialLegendre {
    /// Central-difference residual of `ū_{x_n x_n} + x_n^α ū_pp` at
    /// interior `(p, x_n)` nodes; rows must be equally spaced.
    pub fn residual_fd(&self, alpha: f64) -> Result<MonitorReport> {
        if self.p.len() < 3 || self.xn.len() < 3 {
            return Err(LabError::InsufficientData(
                "need three slopes and three rows".into(),
            ));
        }
        let dp = self.p[1] - self.p[0];
        let dy = self.xn[1] - self.xn[0];
        if self
            .xn
            .windows(2)
            .any(|w| ((w[1] - w[0]) - dy).abs() > 1e-9 * dy)
        {
            return Err(LabError::Input("rows are not equally spaced".into()));
        }
        let mut rep = MonitorReport::new("partial-legendre-residual-fd");
        for r in 1..self.xn.len() - 1 {
            for k in 1..self.p.len() - 1 {
                let v = &self.values;
                let unn = (v[r + 1][k] - 2.0 * v[r][k] + v[r - 1][k]) / (dy * dy);
                let upp = (v[r][k + 1] - 2.0 * v[r][k] + v[r][k - 1]) / (dp * dp);
                let res = unn + self.xn[r].max(0.0).powf(alpha) * upp;
                rep.observe(res.abs(), &[self.p[k], self.xn[r]]);
            }
        }
        Ok(rep)
    }

    /// Largest deviation from a reference function of `(p, x_n)`.
    pub fn deviation_from(&self, reference: impl Fn(f64, f64) -> f64) -> MonitorReport {
        let mut rep = MonitorReport::new("partial-legendre-deviation");
        for (r, &y) in self.xn.iter().enumerate() {
            for (k, &q) in self.p.iter().enumerate() {
                rep.observe((self.values[r][k] - reference(q, y)).abs(), &[q, y]);
            }
        }
        rep
    }
}

/// Closed-form partial transform of a 2D explicit solution:
/// `(ū, ū_pp, ū_{x_n x_n})` at `(p, x_n)`.
pub fn partial_legendre_closed_form(sol: &ClosedForm, p: f64, xn: f64) -> Result<(f64, f64, f64)> {
    if sol.dim != 2 {
        return Err(LabError::Input(
            "partial transform is two-dimensional".into(),
        ));
    }
    if !(xn >= 0.0) {
        return Err(LabError::Domain(format!("x_n = {xn} < 0")));
    }
    let a = sol.alpha;
    let c2 = 1.0 / ((1.0 + a) * (2.0 + a));
    let xa = xn.powf(a);
    Ok(match sol.kind {
        // x₁(p) = p
        ClosedFormKind::U0 => (0.5 * p * p - c2 * xn.powf(2.0 + a), 1.0, -xa),
        // x₁(p) = p (1 + x_n)
        ClosedFormKind::NonUniqueness => {
            let c3 = 1.0 / ((2.0 + a) * (3.0 + a));
            (
                0.5 * p * p * (1.0 + xn) - c2 * xn.powf(2.0 + a) - c3 * xn.powf(3.0 + a),
                1.0 + xn,
                -xa - xn.powf(1.0 + a),
            )
        }
    })
}

/// `|ū_{x_n x_n} + x_n^α ū_pp|` of the closed-form transform at the samples.
pub fn closed_form_residual(sol: &ClosedForm, samples: &[(f64, f64)]) -> Result<MonitorReport> {
    let mut rep = MonitorReport::new("partial-legendre-residual");
    for &(p, xn) in samples {
        let (_, upp, unn) = partial_legendre_closed_form(sol, p, xn)?;
        rep.observe((unn + xn.powf(sol.alpha) * upp).abs(), &[p, xn]);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::build_field;

    fn square() -> (ConvexDomain, Grid) {
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
                faces: Vec::new(),
            },
        )
        .unwrap();
        let g = Grid::new(1.0 / 16.0, &[-1.0, 0.0], &[1.0, 1.0]).unwrap();
        (d, g)
    }

    #[test]
    fn closed_form_residual_vanishes() {
        let pts: Vec<(f64, f64)> = (0..50)
            .map(|k| (0.1 * k as f64 - 2.0, 0.02 * k as f64))
            .collect();
        let r = closed_form_residual(&ClosedForm::u0(2, 1.0), &pts).unwrap();
        assert_eq!(r.max_value, 0.0);
        let r = closed_form_residual(&ClosedForm::non_uniqueness(2, 1.0), &pts).unwrap();
        assert!(r.max_value < 1e-14);
    }

    #[test]
    fn u0_rows_transform_exactly() {
        let (d, g) = square();
        let u0 = ClosedForm::u0(2, 1.0);
        let f = build_field(&d, &g, move |x| u0.value(x), move |x| u0.value(x)).unwrap();
        let pl = partial_legendre_2d(&f, (0.0, 1.0)).unwrap();
        let dev = pl.deviation_from(|p, y| 0.5 * p * p - y.powi(3) / 6.0);
        assert!(dev.max_value < 1e-14, "{}", dev.max_value);
        assert!(pl.residual_fd(1.0).unwrap().max_value < 1e-9);
    }

    #[test]
    fn flat_rows_are_multivalued() {
        let (d, g) = square();
        let f = build_field(&d, &g, |x| x[1], |x| x[1]).unwrap();
        assert!(matches!(
            partial_legendre_2d(&f, (0.0, 1.0)),
            Err(LabError::Multivalued(_))
        ));
    }

    fn centered_square() -> (ConvexDomain, Grid) {
        let verts = vec![
            vec![-1.0, -1.0],
            vec![1.0, -1.0],
            vec![1.0, 1.0],
            vec![-1.0, 1.0],
        ];
        let shape = Shape::Polytope {
            vertices: verts,
            faces: Vec::new(),
        };
        let d = ConvexDomain::with_marked_point(2, shape, vec![0.0, -1.0], None).unwrap();
        let g = Grid::new(1.0 / 16.0, &[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        (d, g)
    }

    #[test]
    fn quadratic_is_self_dual() {
        let (d, g) = centered_square();
        let q = |x: &[f64]| 0.5 * (x[0] * x[0] + x[1] * x[1]);
        let f = build_field(&d, &g, q, q).unwrap();
        let dual = Grid::new(1.0 / 16.0, &[-0.5, -0.5], &[0.5, 0.5]).unwrap();
        let us = legendre_full(&f, &dual).unwrap();
        for i in 0..dual.len() {
            assert!((us.value(i) - q(&dual.coords(i))).abs() < 1e-14);
        }
    }

    #[test]
    fn involution_on_convex_quadratic() {
        let (d, g) = centered_square();
        let q = |x: &[f64]| 0.8 * x[0] * x[0] + 0.3 * x[0] * x[1] + 0.4 * x[1] * x[1] + 0.1 * x[0];
        let f = build_field(&d, &g, q, q).unwrap();
        let dual = Grid::new(1.0 / 16.0, &[-2.5, -1.5], &[2.5, 1.5]).unwrap();
        let us = legendre_full(&f, &dual).unwrap();
        let rep = involution_check(&f, &us);
        assert!(rep.max_value <= rep.context["tolerance"], "{rep:?}");
        assert!(rep.context["max_overshoot"] <= 1e-12);
    }

    #[test]
    fn u0_contact_set_lies_on_the_normal_axis() {
        let (d, g) = square();
        let u0 = ClosedForm::u0(2, 1.0);
        let f = build_field(&d, &g, move |x| u0.value(x), move |x| u0.value(x)).unwrap();
        let dual = Grid::new(1.0 / 16.0, &[-0.5, -0.5], &[0.5, 0.5]).unwrap();
        let us = legendre_full(&f, &dual).unwrap();
        let k = contact_set_check(&us, 1e-12);
        assert!(k.context["points"] >= 8.0);
        assert!(k.max_value <= 0.0 && k.context["c_hat"] > 0.0);
    }
}
