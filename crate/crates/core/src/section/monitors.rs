//! Diagnostics on solved fields: tangent-cone profiles, growth envelopes,
//! Pogorelov products and the normal-derivative ratio.

use serde::{Deserialize, Serialize};

use super::extract::{value_at, Section};
use super::normalize::normalize_section;
use crate::domain::ConvexDomain;
use crate::error::{LabError, Result};
use crate::field::{NodeKind, ScalarField};
use crate::fit::fit_loglog;
use crate::report::MonitorReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeProfile {
    pub direction: Vec<f64>,
    /// `(λ, u(λ(e, 1))/λ)` in the order given.
    pub samples: Vec<(f64, f64)>,
    /// Linear extrapolation to `λ = 0` from the two smallest scales.
    pub gamma_hat: f64,
}

/// Estimates `γ_u(e) = lim u(λ(e, 1))/λ` at the marked point for each
/// tangential direction `e`.
pub fn tangent_cone_profile(
    field: &ScalarField,
    directions: &[Vec<f64>],
    lambdas: &[f64],
) -> Result<Vec<ConeProfile>> {
    let n = field.dim();
    let hg = field.grid().spacing();
    if lambdas.len() < 2 {
        return Err(LabError::InsufficientData("need two scales".into()));
    }
    if let Some(l) = lambdas.iter().find(|l| !(**l >= 2.0 * hg)) {
        return Err(LabError::Resolution(format!(
            "scale {l} is below two grid cells"
        )));
    }
    let x0 = field.domain().marked_point().to_vec();
    let u0 = value_at(field, &x0).ok_or_else(|| LabError::Domain("marked point outside".into()))?;
    let mut sorted: Vec<f64> = lambdas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (l1, l2) = (sorted[0], sorted[1]);
    directions
        .iter()
        .map(|e| {
            if e.len() != n - 1 {
                return Err(LabError::Input("direction must be tangential".into()));
            }
            let q = |l: f64| -> Result<f64> {
                let mut x: Vec<f64> = e.iter().zip(&x0).map(|(a, b)| b + l * a).collect();
                x.push(x0[n - 1] + l);
                let u = value_at(field, &x)
                    .ok_or_else(|| LabError::Domain(format!("{x:?} outside")))?;
                Ok((u - u0) / l)
            };
            let samples = lambdas
                .iter()
                .map(|&l| Ok((l, q(l)?)))
                .collect::<Result<Vec<_>>>()?;
            let (q1, q2) = (q(l1)?, q(l2)?);
            Ok(ConeProfile {
                direction: e.clone(),
                samples,
                gamma_hat: (l2 * q1 - l1 * q2) / (l2 - l1),
            })
        })
        .collect()
}

/// `max u(x)/|x − x₀|^{4/3}` over nodes with `0 < |x − x₀| ≤ radius`,
/// measured from the marked point with `u(x₀)` subtracted.
pub fn growth_envelope(field: &ScalarField, radius: f64) -> Result<MonitorReport> {
    let g = field.grid();
    let x0 = field.domain().marked_point().to_vec();
    let u0 = value_at(field, &x0).ok_or_else(|| LabError::Domain("marked point outside".into()))?;
    let mut rep = MonitorReport::new("growth");
    for i in 0..g.len() {
        if field.kinds()[i] == NodeKind::Exterior {
            continue;
        }
        let x = g.coords(i);
        let r = x
            .iter()
            .zip(&x0)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        if r <= 1e-12 || r > radius {
            continue;
        }
        rep.observe((field.value(i) - u0) / r.powf(4.0 / 3.0), &x);
    }
    if rep.argmax.is_empty() {
        return Err(LabError::InsufficientData(format!(
            "no nodes within radius {radius}"
        )));
    }
    Ok(rep
        .with_context("exponent", 4.0 / 3.0)
        .with_context("radius", radius)
        .with_context(
            "convexity_flag",
            if field.convexity_flag() { 1.0 } else { 0.0 },
        ))
}

/// Integer stencil vector parallel to a unit direction (entries up to 3).
fn lattice_direction(e: &[f64]) -> Result<Vec<i64>> {
    let n = e.len();
    let norm = e.iter().map(|a| a * a).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(LabError::Input("zero direction".into()));
    }
    let total = 7usize.pow(n as u32);
    let mut best: Option<(usize, Vec<i64>)> = None;
    for k in 0..total {
        let mut r = k;
        let v: Vec<i64> = (0..n)
            .map(|_| {
                let c = (r % 7) as i64 - 3;
                r /= 7;
                c
            })
            .collect();
        let vn = v.iter().map(|c| (c * c) as f64).sum::<f64>().sqrt();
        if vn == 0.0 {
            continue;
        }
        let cos: f64 = v.iter().zip(e).map(|(c, a)| *c as f64 * a).sum::<f64>() / (vn * norm);
        if cos > 1.0 - 1e-12 {
            let len = v.iter().map(|c| c.abs()).sum::<i64>() as usize;
            if best.as_ref().is_none_or(|(l, _)| len < *l) {
                best = Some((len, v));
            }
        }
    }
    best.map(|(_, v)| v)
        .ok_or_else(|| LabError::Input(format!("direction {e:?} is not a lattice direction")))
}

/// Second difference of a field along an integer vector at a node, with a
/// shortened step to the boundary crossing where the neighbour is outside.
fn directional_second(field: &ScalarField, idx: usize, v: &[i64]) -> Option<f64> {
    let g = field.grid();
    let h = g.spacing();
    let x = g.coords(idx);
    let s = v.iter().map(|c| (c * c) as f64).sum::<f64>().sqrt() * h;
    let side = |sign: i64| -> Option<(f64, f64)> {
        let off: Vec<i64> = v.iter().map(|c| sign * c).collect();
        if let Some(j) = g.offset(idx, &off) {
            if field.kinds()[j] != NodeKind::Exterior {
                return Some((1.0, field.value(j)));
            }
        }
        let d: Vec<f64> = off.iter().map(|c| *c as f64 * h).collect();
        let layout = field.layout();
        let t = ConvexDomain::exit_parameter(|y| layout.level(y), &x, &d);
        let p: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
        Some((t, field.trace_value(&p)))
    };
    let (tp, up) = side(1)?;
    let (tm, um) = side(-1)?;
    let u0 = field.value(idx);
    Some(2.0 / ((tp + tm) * s * s) * ((up - u0) / tp + (um - u0) / tm))
}

/// `max ∂_{ee}u · |w|` over interior section nodes, `w = u − plane − h`.
/// Context carries `max |∂_e u|` over the same nodes.
pub fn pogorelov_monitor(
    field: &ScalarField,
    section: &Section,
    direction: &[f64],
) -> Result<MonitorReport> {
    let v = lattice_direction(direction)?;
    let g = field.grid();
    let s = v.iter().map(|c| (c * c) as f64).sum::<f64>().sqrt() * g.spacing();
    let mut rep = MonitorReport::new("pogorelov");
    let mut max_d1: f64 = 0.0;
    for &i in &section.nodes {
        if field.kinds()[i] != NodeKind::Interior {
            continue;
        }
        let x = g.coords(i);
        let w = section.excess_with(&x, field.value(i));
        if w >= 0.0 {
            return Err(LabError::Precondition(format!(
                "w = {w} >= 0 at section node {x:?}"
            )));
        }
        let Some(d2) = directional_second(field, i, &v) else {
            continue;
        };
        rep.observe(d2 * w.abs(), &x);
        let neg: Vec<i64> = v.iter().map(|c| -c).collect();
        if let (Some(a), Some(b)) = (g.offset(i, &v), g.offset(i, &neg)) {
            if field.kinds()[a] != NodeKind::Exterior && field.kinds()[b] != NodeKind::Exterior {
                max_d1 = max_d1.max(((field.value(a) - field.value(b)) / (2.0 * s)).abs());
            }
        }
    }
    if rep.argmax.is_empty() {
        return Err(LabError::TooSmall("section holds no interior nodes".into()));
    }
    Ok(rep.with_context("max_abs_first_derivative", max_d1))
}

/// Pogorelov products in the rescaled variables `u_h(x) = u(A⁻¹D_h x)/h`
/// over a ladder of boundary sections at `x₀`: the series holds
/// `(h, d_1² max ∂_{ee}u|w| / h²)` and the context its log-log slope.
pub fn pogorelov_series(
    field: &ScalarField,
    x0: &[f64],
    heights: &[f64],
    direction: &[f64],
    alpha: f64,
) -> Result<MonitorReport> {
    let n = field.dim();
    let p = vec![0.0; n];
    let mut rep = MonitorReport::new("pogorelov-normalized");
    for &h in heights {
        let rec = normalize_section(field, x0, h, alpha)?;
        let sec = super::extract::compute_section(field, x0, &p, h)?;
        let raw = pogorelov_monitor(field, &sec, direction)?;
        let d1 = rec.axes[0];
        let val = raw.max_value * d1 * d1 / (h * h);
        rep.series.push((h, val));
        rep.observe(val, &raw.argmax);
    }
    let hs: Vec<f64> = rep.series.iter().map(|s| s.0).collect();
    let vs: Vec<f64> = rep.series.iter().map(|s| s.1).collect();
    let slope = fit_loglog(&hs, &vs).map(|f| f.slope).unwrap_or(f64::NAN);
    Ok(rep.with_context("log_slope", slope))
}

/// `max u_n / x_n^{1+α}` over nodes with `x_n ≥ 4 h_grid` and `|x| ≤ radius`,
/// with `u_n` from fourth-order central differences. Context holds the
/// bound `1/(1+α)` and the minimum ratio.
pub fn normal_derivative_monitor(
    field: &ScalarField,
    alpha: f64,
    radius: f64,
) -> Result<MonitorReport> {
    let g = field.grid();
    let n = g.dim();
    let h = g.spacing();
    let x0 = field.domain().marked_point().to_vec();
    let mut rep = MonitorReport::new("normal-derivative");
    let mut min_ratio = f64::INFINITY;
    let mut e = vec![0i64; n];
    for i in field.layout().interior_nodes() {
        let x = g.coords(i);
        let t = x[n - 1] - x0[n - 1];
        let r = x
            .iter()
            .zip(&x0)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        if t < 4.0 * h - 1e-12 || r > radius {
            continue;
        }
        let mut vals = [0.0; 4];
        let mut ok = true;
        for (k, s) in [-2i64, -1, 1, 2].iter().enumerate() {
            e[n - 1] = *s;
            match g.offset(i, &e) {
                Some(j) if field.kinds()[j] != NodeKind::Exterior => vals[k] = field.value(j),
                _ => ok = false,
            }
        }
        if !ok {
            continue;
        }
        let un = (vals[0] - 8.0 * vals[1] + 8.0 * vals[2] - vals[3]) / (12.0 * h);
        let ratio = un / t.powf(1.0 + alpha);
        min_ratio = min_ratio.min(ratio);
        rep.observe(ratio, &x);
    }
    if rep.argmax.is_empty() {
        return Err(LabError::InsufficientData(format!(
            "no nodes with x_n >= 4h within {radius}"
        )));
    }
    Ok(rep
        .with_context("bound", 1.0 / (1.0 + alpha))
        .with_context("min_ratio", min_ratio)
        .with_context("radius", radius))
}

/// Subtracts `u(x₀) + ∇'u(x₀)·x' + b x_n` so the marked point has a zero
/// tangent plane. The tangential gradient comes from boundary values, `b`
/// from a least-squares fit of `b t + a t^{2+α}` to `u(x₀ + t e_n) − u(x₀)`
/// for `0 < t ≤ t_max`. Returns the shifted field and `(∇'u, b)`.
pub fn enforce_h2(field: &ScalarField, alpha: f64, t_max: f64) -> Result<(ScalarField, Vec<f64>)> {
    let g = field.grid();
    let n = g.dim();
    let h = g.spacing();
    let x0 = field.domain().marked_point().to_vec();
    let u0 = value_at(field, &x0).ok_or_else(|| LabError::Domain("marked point outside".into()))?;
    let mut slope = vec![0.0; n];
    for d in 0..n - 1 {
        let mut xp = x0.clone();
        let mut xm = x0.clone();
        xp[d] += h;
        xm[d] -= h;
        let (Some(a), Some(b)) = (value_at(field, &xp), value_at(field, &xm)) else {
            return Err(LabError::Domain(
                "tangential neighbours of the marked point are outside".into(),
            ));
        };
        slope[d] = (a - b) / (2.0 * h);
    }
    let mut rows = Vec::new();
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        if t > t_max + 1e-12 {
            break;
        }
        let mut x = x0.clone();
        x[n - 1] += t;
        if let Some(v) = value_at(field, &x) {
            rows.push((t, v - u0));
        }
        k += 1;
    }
    if rows.len() < 3 {
        return Err(LabError::InsufficientData(
            "fewer than three normal samples".into(),
        ));
    }
    // normal equations for (b, a) with basis (t, t^{2+α})
    let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (t, y) in &rows {
        let p = t.powf(2.0 + alpha);
        s11 += t * t;
        s12 += t * p;
        s22 += p * p;
        r1 += t * y;
        r2 += p * y;
    }
    let det = s11 * s22 - s12 * s12;
    if !(det.abs() > 0.0) {
        return Err(LabError::InsufficientData(
            "normal samples do not determine the fit".into(),
        ));
    }
    let b = (r1 * s22 - r2 * s12) / det;
    slope[n - 1] = b;
    let (sl, base) = (slope.clone(), x0.clone());
    let shifted = field.map(move |x, u| {
        u - u0
            - sl.iter()
                .zip(x.iter().zip(&base))
                .map(|(p, (a, c))| p * (a - c))
                .sum::<f64>()
    })?;
    Ok((shifted, slope))
}
