//! Sublevel sets below a supporting plane and their quadrature.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::domain::{dot, ConvexDomain};
use crate::error::{LabError, Result};
use crate::field::{NodeKind, ScalarField};

/// Sub-cells per axis used for measure and centroid quadrature.
pub const QUADRATURE_SUBDIVISION: usize = 4;

/// `S_h(x₀) = {x : u(x) < u(x₀) + p·(x − x₀) + h}` on a grid field.
#[derive(Debug, Clone)]
pub struct Section {
    pub base: Vec<f64>,
    pub slope: Vec<f64>,
    pub height: f64,
    pub base_value: f64,
    /// Grid nodes (interior or boundary) strictly inside.
    pub nodes: Vec<usize>,
    /// Axis boundary crossings strictly inside.
    pub cut_points: Vec<Vec<f64>>,
    pub measure: f64,
    pub center: Vec<f64>,
    /// `(x* − x₀)·ν` with `ν` the inner normal at the marked point.
    pub d_h: f64,
    field: Arc<ScalarField>,
}

impl Section {
    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    /// `u(x) − u(x₀) − p·(x − x₀) − h`, negative inside.
    pub fn excess(&self, x: &[f64]) -> Option<f64> {
        let u = value_at(&self.field, x)?;
        Some(self.excess_with(x, u))
    }

    pub fn excess_with(&self, x: &[f64], u: f64) -> f64 {
        let lin: f64 = self
            .slope
            .iter()
            .zip(x.iter().zip(&self.base))
            .map(|(p, (a, b))| p * (a - b))
            .sum();
        u - self.base_value - lin - self.height
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.excess(x).is_some_and(|w| w < 0.0)
    }

    /// Every point used as a hull vertex candidate: nodes and cut points.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let g = self.field.grid();
        self.nodes
            .iter()
            .map(|&i| g.coords(i))
            .chain(self.cut_points.iter().cloned())
            .collect()
    }

    /// Bounding box of the section's points widened by `cells` grid cells.
    pub fn search_box(&self, cells: f64) -> (Vec<f64>, Vec<f64>) {
        let h = self.field.grid().spacing();
        let n = self.dim();
        let mut lo = self.base.clone();
        let mut hi = self.base.clone();
        for p in self.points() {
            for d in 0..n {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        for d in 0..n {
            lo[d] -= cells * h;
            hi[d] += cells * h;
        }
        (lo, hi)
    }
}

/// Field value at any point of the closure: nodes and interpolation inside,
/// the trace on the boundary.
pub fn value_at(field: &ScalarField, x: &[f64]) -> Option<f64> {
    let g = field.grid();
    let lvl = field.layout().level(x);
    if lvl > 1e-9 * g.spacing() {
        return None;
    }
    if let Some(i) = g.node_at(x) {
        if field.kinds()[i] != NodeKind::Exterior {
            return Some(field.value(i));
        }
    }
    if lvl > -1e-9 * g.spacing() {
        return Some(field.trace_value(x));
    }
    field.interpolate(x)
}

/// Measure and centroid of `{x in box : inside(x)}` by midpoint quadrature on
/// `QUADRATURE_SUBDIVISION`-refined grid cells.
pub fn box_quadrature(
    lo: &[f64],
    hi: &[f64],
    step: f64,
    inside: impl Fn(&[f64]) -> bool,
) -> (f64, Vec<f64>) {
    let n = lo.len();
    let s = step / QUADRATURE_SUBDIVISION as f64;
    let counts: Vec<usize> = (0..n)
        .map(|d| ((hi[d] - lo[d]) / s).ceil().max(1.0) as usize)
        .collect();
    let vol = s.powi(n as i32);
    let mut mass = 0.0;
    let mut first = vec![0.0; n];
    let total: usize = counts.iter().product();
    let mut x = vec![0.0; n];
    for flat in 0..total {
        let mut r = flat;
        for d in 0..n {
            let k = r % counts[d];
            r /= counts[d];
            x[d] = lo[d] + (k as f64 + 0.5) * s;
        }
        if inside(&x) {
            mass += vol;
            for d in 0..n {
                first[d] += vol * x[d];
            }
        }
    }
    let center = if mass > 0.0 {
        first.iter().map(|v| v / mass).collect()
    } else {
        vec![f64::NAN; n]
    };
    (mass, center)
}

fn check_connected(field: &ScalarField, nodes: &[usize]) -> bool {
    if nodes.len() <= 1 {
        return true;
    }
    let g = field.grid();
    let n = g.dim();
    let mut member = vec![false; g.len()];
    for &i in nodes {
        member[i] = true;
    }
    let mut seen = vec![false; g.len()];
    let mut queue = VecDeque::from([nodes[0]]);
    seen[nodes[0]] = true;
    let mut count = 1;
    let offsets: Vec<Vec<i64>> = (0..3usize.pow(n as u32))
        .map(|mut k| {
            (0..n)
                .map(|_| {
                    let o = (k % 3) as i64 - 1;
                    k /= 3;
                    o
                })
                .collect()
        })
        .filter(|o: &Vec<i64>| o.iter().any(|c| *c != 0))
        .collect();
    while let Some(i) = queue.pop_front() {
        for o in &offsets {
            if let Some(j) = g.offset(i, o) {
                if member[j] && !seen[j] {
                    seen[j] = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
    }
    count == nodes.len()
}

/// Extracts `S_h(x₀)` with supporting slope `p`.
pub fn compute_section(field: &ScalarField, x0: &[f64], p: &[f64], h: f64) -> Result<Section> {
    let g = field.grid();
    let n = g.dim();
    if x0.len() != n || p.len() != n {
        return Err(LabError::Input(
            "base point or slope has the wrong dimension".into(),
        ));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(LabError::Input(format!("height {h} must be positive")));
    }
    let base_value = value_at(field, x0)
        .ok_or_else(|| LabError::Domain(format!("base point {x0:?} outside the domain")))?;
    let mut sec = Section {
        base: x0.to_vec(),
        slope: p.to_vec(),
        height: h,
        base_value,
        nodes: Vec::new(),
        cut_points: Vec::new(),
        measure: 0.0,
        center: vec![0.0; n],
        d_h: 0.0,
        field: Arc::new(field.clone()),
    };
    for i in 0..g.len() {
        if field.kinds()[i] == NodeKind::Exterior {
            continue;
        }
        if sec.excess_with(&g.coords(i), field.value(i)) < 0.0 {
            sec.nodes.push(i);
        }
    }
    for c in field.cuts() {
        let x = field.cut_point(c);
        if sec.excess_with(&x, c.value) < 0.0 {
            sec.cut_points.push(x);
        }
    }
    let hg = g.spacing();
    let span_ok = (0..n).all(|d| {
        let (lo, hi) = sec
            .nodes
            .iter()
            .map(|&i| g.coords(i)[d])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                (a.min(v), b.max(v))
            });
        hi - lo >= 2.0 * hg - 1e-12
    });
    if !span_ok {
        return Err(LabError::TooSmall(format!(
            "section at height {h} spans fewer than two grid cells on some axis"
        )));
    }
    if !check_connected(field, &sec.nodes) {
        return Err(LabError::DegenerateSection(
            "section nodes are disconnected".into(),
        ));
    }
    let (lo, hi) = sec.search_box(2.0);
    let layout = field.layout();
    let (mass, center) = box_quadrature(&lo, &hi, hg, |x| {
        layout.level(x) < 0.0 && sec.excess(x).is_some_and(|w| w < 0.0)
    });
    if !(mass > 0.0) {
        return Err(LabError::TooSmall(format!(
            "section at height {h} has zero measure"
        )));
    }
    let nu = field.domain().inner_normal();
    sec.measure = mass;
    sec.d_h = dot(&center, &nu) - dot(x0, &nu);
    sec.center = center;
    Ok(sec)
}

/// Supporting slope at `x₀`: zero at the marked boundary point, the
/// discrete gradient at an interior node otherwise.
pub fn supporting_slope(field: &ScalarField, x0: &[f64]) -> Result<Vec<f64>> {
    let d: &ConvexDomain = field.domain();
    let g = field.grid();
    let dist: f64 = x0
        .iter()
        .zip(d.marked_point())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if dist <= 1e-9 * g.spacing() {
        return Ok(vec![0.0; g.dim()]);
    }
    let idx = g
        .node_at(x0)
        .filter(|i| field.kinds()[*i] == NodeKind::Interior)
        .ok_or_else(|| {
            LabError::Input(format!(
                "{x0:?} is neither the marked point nor an interior node"
            ))
        })?;
    Ok(field.gradient(idx))
}
