//! Grid functions on a convex domain with a cut-cell boundary trace.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::domain::ConvexDomain;
use crate::error::{LabError, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    /// Unknown of the discrete problem.
    Interior,
    /// Node lying on the boundary; carries the trace value.
    Boundary,
    Exterior,
}

/// Point where a grid line leaves the domain, `x_node + t h e_axis` (or `-`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisCut {
    pub node: usize,
    pub axis: usize,
    pub forward: bool,
    pub t: f64,
    pub value: f64,
}

/// Geometry shared by every field on the same domain and grid.
#[derive(Debug, Clone)]
pub struct Layout {
    pub domain: ConvexDomain,
    pub grid: Grid,
    pub kinds: Vec<NodeKind>,
}

impl Layout {
    pub fn new(domain: &ConvexDomain, grid: &Grid) -> Result<Self> {
        if domain.dim() != grid.dim() {
            return Err(LabError::Input("domain and grid dimensions differ".into()));
        }
        let tol = 1e-9 * grid.spacing();
        let kinds = (0..grid.len())
            .map(|idx| {
                let x = grid.coords(idx);
                let lvl = effective_level(domain, grid, &x);
                if lvl < -tol {
                    NodeKind::Interior
                } else if lvl <= tol {
                    NodeKind::Boundary
                } else {
                    NodeKind::Exterior
                }
            })
            .collect::<Vec<_>>();
        if !kinds.contains(&NodeKind::Interior) {
            return Err(LabError::Resolution("grid has no interior nodes".into()));
        }
        Ok(Layout {
            domain: domain.clone(),
            grid: grid.clone(),
            kinds,
        })
    }

    /// Level function of the computational region `domain ∩ open box`.
    pub fn level(&self, x: &[f64]) -> f64 {
        effective_level(&self.domain, &self.grid, x)
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == NodeKind::Interior)
            .map(|(i, _)| i)
    }

    /// Either a grid node that is interior/boundary, or the exit parameter
    /// `t ∈ (0,1]` along `x + t * h * off`.
    pub fn neighbor(&self, idx: usize, off: &[i64]) -> Neighbor {
        if let Some(j) = self.grid.offset(idx, off) {
            if self.kinds[j] != NodeKind::Exterior {
                return Neighbor::Node(j);
            }
        }
        let x = self.grid.coords(idx);
        let h = self.grid.spacing();
        let d: Vec<f64> = off.iter().map(|o| *o as f64 * h).collect();
        let t = ConvexDomain::exit_parameter(|y| self.level(y), &x, &d);
        let p: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
        Neighbor::Cut { t, point: p }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Neighbor {
    Node(usize),
    Cut { t: f64, point: Vec<f64> },
}

pub fn effective_level(domain: &ConvexDomain, grid: &Grid, x: &[f64]) -> f64 {
    domain.level(x).max(grid.box_level(x))
}

pub type RealFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Values of a function on the nodes of a grid restricted to a domain, plus
/// its boundary trace at grid-line boundary crossings.
#[derive(Clone)]
pub struct ScalarField {
    layout: Layout,
    values: Vec<f64>,
    cuts: Vec<AxisCut>,
    ghost: Vec<f64>,
    convex: bool,
    trace: Option<RealFn>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("grid", &self.layout.grid)
            .field("cuts", &self.cuts.len())
            .field("convex", &self.convex)
            .field("has_trace", &self.trace.is_some())
            .finish()
    }
}

impl ScalarField {
    pub fn from_parts(layout: Layout, values: Vec<f64>, cuts: Vec<AxisCut>) -> Result<Self> {
        if values.len() != layout.grid.len() {
            return Err(LabError::Input("value array does not match grid".into()));
        }
        for (i, k) in layout.kinds.iter().enumerate() {
            if *k != NodeKind::Exterior && !values[i].is_finite() {
                return Err(LabError::Input(format!("non-finite value at node {i}")));
            }
        }
        let mut f = ScalarField {
            layout,
            values,
            cuts,
            ghost: Vec::new(),
            convex: false,
            trace: None,
        };
        f.ghost = f.extend_to_ghosts();
        f.convex = f.check_convexity();
        Ok(f)
    }

    /// Attaches the boundary trace used for stencil crossings off the axes.
    pub fn with_trace(mut self, trace: RealFn) -> Self {
        self.trace = Some(trace);
        self
    }

    pub fn trace(&self) -> Option<&RealFn> {
        self.trace.as_ref()
    }

    /// Boundary value at a crossing point: the stored trace, or the
    /// ghost-extended interpolant when no trace is attached.
    pub fn trace_value(&self, x: &[f64]) -> f64 {
        match &self.trace {
            Some(t) => t(x),
            None => self.interpolate(x).unwrap_or(f64::NAN),
        }
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn domain(&self) -> &ConvexDomain {
        &self.layout.domain
    }

    pub fn grid(&self) -> &Grid {
        &self.layout.grid
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.layout.kinds
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cuts(&self) -> &[AxisCut] {
        &self.cuts
    }

    pub fn convexity_flag(&self) -> bool {
        self.convex
    }

    pub fn dim(&self) -> usize {
        self.layout.grid.dim()
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    /// New field with every value (nodes, cut points and the attached trace)
    /// replaced by `f(x, u)`.
    pub fn map(&self, f: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        let f = Arc::new(f);
        let g = &self.layout.grid;
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                if self.layout.kinds[i] == NodeKind::Exterior {
                    f64::NAN
                } else {
                    f(&g.coords(i), *v)
                }
            })
            .collect();
        let cuts = self
            .cuts
            .iter()
            .map(|c| {
                let p = self.cut_point(c);
                AxisCut {
                    value: f(&p, c.value),
                    ..*c
                }
            })
            .collect();
        let mut out = ScalarField::from_parts(self.layout.clone(), values, cuts)?;
        if let Some(t) = &self.trace {
            let t = t.clone();
            out.trace = Some(Arc::new(move |x: &[f64]| f(x, t(x))));
        }
        Ok(out)
    }

    pub fn cut_point(&self, c: &AxisCut) -> Vec<f64> {
        let mut p = self.layout.grid.coords(c.node);
        let s = if c.forward { 1.0 } else { -1.0 };
        p[c.axis] += s * c.t * self.layout.grid.spacing();
        p
    }

    fn extend_to_ghosts(&self) -> Vec<f64> {
        let grid = &self.layout.grid;
        let kinds = &self.layout.kinds;
        let mut ghost: Vec<f64> = self
            .values
            .iter()
            .zip(kinds)
            .map(|(v, k)| {
                if *k == NodeKind::Exterior {
                    f64::NAN
                } else {
                    *v
                }
            })
            .collect();
        let mut acc = vec![(0.0, 0usize); grid.len()];
        for c in &self.cuts {
            let mut off = [0i64; 3];
            off[c.axis] = if c.forward { 1 } else { -1 };
            if let Some(j) = grid.offset(c.node, &off[..grid.dim()]) {
                if kinds[j] == NodeKind::Exterior {
                    let u = self.values[c.node];
                    acc[j].0 += u + (c.value - u) / c.t;
                    acc[j].1 += 1;
                }
            }
        }
        for (j, (s, n)) in acc.iter().enumerate() {
            if *n > 0 {
                ghost[j] = s / *n as f64;
            }
        }
        // one more ring by averaging assigned neighbours
        let snapshot = ghost.clone();
        for j in 0..grid.len() {
            if !snapshot[j].is_nan() {
                continue;
            }
            let (mut s, mut n) = (0.0, 0);
            for d in 0..grid.dim() {
                for sg in [-1i64, 1] {
                    let mut off = [0i64; 3];
                    off[d] = sg;
                    if let Some(k) = grid.offset(j, &off[..grid.dim()]) {
                        if !snapshot[k].is_nan() {
                            s += snapshot[k];
                            n += 1;
                        }
                    }
                }
            }
            if n > 0 {
                ghost[j] = s / n as f64;
            }
        }
        ghost
    }

    /// Value along an axis from node `idx`: the neighbour node, or the cut.
    fn axis_neighbor(&self, idx: usize, axis: usize, forward: bool) -> Option<(f64, f64)> {
        let g = &self.layout.grid;
        let mut off = [0i64; 3];
        off[axis] = if forward { 1 } else { -1 };
        if let Some(j) = g.offset(idx, &off[..g.dim()]) {
            if self.layout.kinds[j] != NodeKind::Exterior {
                return Some((1.0, self.values[j]));
            }
        }
        self.cuts
            .iter()
            .find(|c| c.node == idx && c.axis == axis && c.forward == forward)
            .map(|c| (c.t, c.value))
    }

    fn check_convexity(&self) -> bool {
        let g = &self.layout.grid;
        let n = g.dim();
        let (lo, hi) = self
            .values
            .iter()
            .zip(&self.layout.kinds)
            .filter(|(_, k)| **k != NodeKind::Exterior)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (v, _)| {
                (a.min(*v), b.max(*v))
            });
        let range = (hi - lo).max(f64::MIN_POSITIVE);
        let tol = 1e-8 * range;
        let h = g.spacing();
        let diag_dirs = crate::solver::stencil::directions(n, 1);
        for idx in self.layout.interior_nodes() {
            let u0 = self.values[idx];
            for axis in 0..n {
                let (Some((tp, up)), Some((tm, um))) = (
                    self.axis_neighbor(idx, axis, true),
                    self.axis_neighbor(idx, axis, false),
                ) else {
                    continue;
                };
                let d2 = 2.0 / (tp + tm) * ((up - u0) / tp + (um - u0) / tm) / (h * h);
                if d2 * h * h < -tol {
                    return false;
                }
            }
            for v in &diag_dirs {
                let neg: Vec<i64> = v.iter().map(|a| -a).collect();
                let (Some(a), Some(b)) = (g.offset(idx, v), g.offset(idx, &neg)) else {
                    continue;
                };
                if self.layout.kinds[a] == NodeKind::Exterior
                    || self.layout.kinds[b] == NodeKind::Exterior
                {
                    continue;
                }
                if self.values[a] + self.values[b] - 2.0 * u0 < -tol {
                    return false;
                }
            }
        }
        true
    }

    /// Multilinear interpolation using ghost-extended values. `None` outside
    /// the closure of the computational region or where ghosts are missing.
    pub fn interpolate(&self, x: &[f64]) -> Option<f64> {
        let g = &self.layout.grid;
        let n = g.dim();
        if self.layout.level(x) > 1e-9 * g.spacing() {
            return None;
        }
        let h = g.spacing();
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for d in 0..n {
            let r = (x[d] - g.lo()[d]) / h;
            let k = (r.floor().max(0.0) as usize).min(g.counts()[d] - 2);
            base[d] = k;
            frac[d] = (r - k as f64).clamp(0.0, 1.0);
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << n) {
            let mut m = [0usize; 3];
            let mut w = 1.0;
            for d in 0..n {
                let bit = (corner >> d) & 1;
                m[d] = base[d] + bit;
                w *= if bit == 1 { frac[d] } else { 1.0 - frac[d] };
            }
            if w == 0.0 {
                continue;
            }
            let v = self.ghost[g.index(&m[..n])];
            if v.is_nan() {
                return None;
            }
            acc += w * v;
        }
        Some(acc)
    }

    /// Central-difference gradient at a node (falls back to the available
    /// side, or a cut, near the boundary).
    pub fn gradient(&self, idx: usize) -> Vec<f64> {
        let g = &self.layout.grid;
        let h = g.spacing();
        let u0 = self.values[idx];
        (0..g.dim())
            .map(|axis| {
                match (
                    self.axis_neighbor(idx, axis, true),
                    self.axis_neighbor(idx, axis, false),
                ) {
                    (Some((tp, up)), Some((tm, um))) => {
                        // second-order on non-uniform spacing
                        let (a, b) = (tp * h, tm * h);
                        (b * b * (up - u0) - a * a * (um - u0)) / (a * b * (a + b))
                    }
                    (Some((tp, up)), None) => (up - u0) / (tp * h),
                    (None, Some((tm, um))) => (u0 - um) / (tm * h),
                    (None, None) => 0.0,
                }
            })
            .collect()
    }

    /// Central second differences at a node at least two cells from the
    /// boundary; mixed terms come from diagonal differences.
    pub fn numerical_hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let g = &self.layout.grid;
        let n = g.dim();
        let h = g.spacing();
        let idx = g
            .node_at(x)
            .ok_or_else(|| LabError::Input(format!("{x:?} is not a grid node")))?;
        let d = self.layout.domain.boundary_distance(x)?;
        if d < 2.0 * h || -g.box_level(x) < 2.0 * h {
            return Err(LabError::NearBoundary(x.to_vec()));
        }
        let val = |off: &[i64]| -> Result<f64> {
            let j = g
                .offset(idx, off)
                .ok_or_else(|| LabError::NearBoundary(x.to_vec()))?;
            if self.layout.kinds[j] == NodeKind::Exterior {
                return Err(LabError::NearBoundary(x.to_vec()));
            }
            Ok(self.values[j])
        };
        let u0 = self.values[idx];
        let mut hess = DMatrix::zeros(n, n);
        let second = |v: &[i64]| -> Result<f64> {
            let neg: Vec<i64> = v.iter().map(|a| -a).collect();
            Ok((val(v)? + val(&neg)? - 2.0 * u0) / (h * h))
        };
        for i in 0..n {
            let mut e = [0i64; 3];
            e[i] = 1;
            hess[(i, i)] = second(&e[..n])?;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let mut e = [0i64; 3];
                e[i] = 1;
                e[j] = 1;
                let dd = second(&e[..n])?;
                let m = 0.5 * (dd - hess[(i, i)] - hess[(j, j)]);
                hess[(i, j)] = m;
                hess[(j, i)] = m;
            }
        }
        Ok(hess)
    }

    /// CSV with columns `i,j[,k],x1,x2[,x3],value` over interior and
    /// boundary nodes.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let g = &self.layout.grid;
        let n = g.dim();
        let header = if n == 2 {
            "i,j,x1,x2,value"
        } else {
            "i,j,k,x1,x2,x3,value"
        };
        writeln!(w, "{header}")?;
        for idx in 0..g.len() {
            if self.layout.kinds[idx] == NodeKind::Exterior {
                continue;
            }
            let m = g.multi_index(idx);
            let x = g.coords(idx);
            let mut line = String::new();
            for d in 0..n {
                line.push_str(&format!("{},", m[d]));
            }
            for xd in &x {
                line.push_str(&format!("{xd:.17e},"));
            }
            line.push_str(&format!("{:.17e}", self.values[idx]));
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Reads node values written by [`ScalarField::write_csv`] onto a layout.
    pub fn read_csv(layout: Layout, text: &str) -> Result<Self> {
        let g = &layout.grid;
        let n = g.dim();
        let mut values = vec![f64::NAN; g.len()];
        for (lineno, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 2 * n + 1 {
                return Err(LabError::Input(format!(
                    "line {}: expected {} columns",
                    lineno + 1,
                    2 * n + 1
                )));
            }
            let mut m = [0usize; 3];
            for d in 0..n {
                m[d] = cols[d]
                    .trim()
                    .parse()
                    .map_err(|e| LabError::Input(format!("line {}: {e}", lineno + 1)))?;
            }
            let v: f64 = cols[2 * n]
                .trim()
                .parse()
                .map_err(|e| LabError::Input(format!("line {}: {e}", lineno + 1)))?;
            values[g.index(&m[..n])] = v;
        }
        ScalarField::from_parts(layout, values, Vec::new())
    }

    /// Little-endian binary: magic, dim, counts, spacing, lo, node values
    /// (NaN on exterior nodes), cut count, cuts.
    pub fn to_binary(&self) -> Vec<u8> {
        let g = &self.layout.grid;
        let mut out = Vec::new();
        out.extend_from_slice(b"MAF1");
        out.extend_from_slice(&(g.dim() as u32).to_le_bytes());
        for c in g.counts() {
            out.extend_from_slice(&(*c as u64).to_le_bytes());
        }
        out.extend_from_slice(&g.spacing().to_le_bytes());
        for l in g.lo() {
            out.extend_from_slice(&l.to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.cuts.len() as u64).to_le_bytes());
        for c in &self.cuts {
            out.extend_from_slice(&(c.node as u64).to_le_bytes());
            out.push(c.axis as u8);
            out.push(c.forward as u8);
            out.extend_from_slice(&c.t.to_le_bytes());
            out.extend_from_slice(&c.value.to_le_bytes());
        }
        out
    }

    pub fn from_binary(layout: Layout, bytes: &[u8]) -> Result<Self> {
        let bad = || LabError::Input("truncated or malformed binary field".into());
        let mut pos = 0usize;
        let mut take = |k: usize| -> Result<&[u8]> {
            let s = bytes.get(pos..pos + k).ok_or_else(bad)?;
            pos += k;
            Ok(s)
        };
        if take(4)? != b"MAF1" {
            return Err(bad());
        }
        let dim = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let g = &layout.grid;
        if dim != g.dim() {
            return Err(LabError::Input("binary field dimension mismatch".into()));
        }
        for d in 0..dim {
            let c = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
            if c != g.counts()[d] {
                return Err(LabError::Input("binary field grid mismatch".into()));
            }
        }
        let f64_at = |s: &[u8]| f64::from_le_bytes(s.try_into().unwrap());
        let _spacing = f64_at(take(8)?);
        for _ in 0..dim {
            take(8)?;
        }
        let mut values = Vec::with_capacity(g.len());
        for _ in 0..g.len() {
            values.push(f64_at(take(8)?));
        }
        let ncuts = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let mut cuts = Vec::with_capacity(ncuts);
        for _ in 0..ncuts {
            let node = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
            let ab = take(2)?;
            let (axis, forward) = (ab[0] as usize, ab[1] != 0);
            let t = f64_at(take(8)?);
            let value = f64_at(take(8)?);
            cuts.push(AxisCut {
                node,
                axis,
                forward,
                t,
                value,
            });
        }
        ScalarField::from_parts(layout, values, cuts)
    }
}

/// Samples `interior_init` at interior nodes and `boundary_trace` at boundary
/// nodes and at the boundary crossings of grid lines.
pub fn build_field(
    domain: &ConvexDomain,
    grid: &Grid,
    interior_init: impl Fn(&[f64]) -> f64,
    boundary_trace: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
) -> Result<ScalarField> {
    let rho = domain.tangent_ball_radius();
    if grid.spacing() > rho / 4.0 {
        return Err(LabError::Resolution(format!(
            "spacing {} exceeds tangent_ball_radius/4 = {}",
            grid.spacing(),
            rho / 4.0
        )));
    }
    let layout = Layout::new(domain, grid)?;
    let values: Vec<f64> = (0..grid.len())
        .map(|i| match layout.kinds[i] {
            NodeKind::Interior => interior_init(&grid.coords(i)),
            NodeKind::Boundary => boundary_trace(&grid.coords(i)),
            NodeKind::Exterior => f64::NAN,
        })
        .collect();
    let cuts = axis_cuts(&layout, &boundary_trace);
    Ok(ScalarField::from_parts(layout, values, cuts)?.with_trace(Arc::new(boundary_trace)))
}

pub(crate) fn axis_cuts(layout: &Layout, trace: &impl Fn(&[f64]) -> f64) -> Vec<AxisCut> {
    let g = &layout.grid;
    let n = g.dim();
    let mut cuts = Vec::new();
    for idx in layout.interior_nodes() {
        for axis in 0..n {
            for forward in [true, false] {
                let mut off = [0i64; 3];
                off[axis] = if forward { 1 } else { -1 };
                if let Neighbor::Cut { t, point } = layout.neighbor(idx, &off[..n]) {
                    cuts.push(AxisCut {
                        node: idx,
                        axis,
                        forward,
                        t,
                        value: trace(&point),
                    });
                }
            }
        }
    }
    cuts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::closed_form::ClosedForm;
    use crate::domain::Shape;

    fn half_ball(cells: usize) -> (ConvexDomain, Grid) {
        let d = ConvexDomain::new(2, Shape::HalfBall { radius: 1.0 }).unwrap();
        let g = Grid::covering(&d, cells).unwrap();
        (d, g)
    }

    #[test]
    fn zero_interior_with_quadratic_trace() {
        let (d, g) = half_ball(32);
        let f = build_field(&d, &g, |_| 0.0, |x| 0.5 * x[0] * x[0]).unwrap();
        for (i, k) in f.kinds().iter().enumerate() {
            let x = g.coords(i);
            match k {
                NodeKind::Interior => assert_eq!(f.value(i), 0.0),
                NodeKind::Boundary => assert_eq!(f.value(i), 0.5 * x[0] * x[0]),
                NodeKind::Exterior => {}
            }
        }
        for c in f.cuts() {
            let p = f.cut_point(c);
            assert!((c.value - 0.5 * p[0] * p[0]).abs() < 1e-15);
            assert!(d.level(&p).abs() < 1e-12);
        }
        assert!(!f.cuts().is_empty());
    }

    #[test]
    fn u0_field_is_flagged_convex() {
        let (d, g) = half_ball(32);
        let u0 = ClosedForm::u0(2, 1.0);
        let f = build_field(&d, &g, |x| u0.value(x), move |x| u0.value(x)).unwrap();
        assert!(f.convexity_flag());
        let bad = build_field(&d, &g, |x| -u0.value(x), move |x| u0.value(x)).unwrap();
        assert!(!bad.convexity_flag());
    }

    #[test]
    fn coarse_grid_is_resolution_error() {
        let d = ConvexDomain::new(2, Shape::HalfBall { radius: 1.0 }).unwrap();
        let g = Grid::new(0.2, &[-1.0, 0.0], &[1.0, 1.4]).unwrap();
        assert!(matches!(
            build_field(&d, &g, |_| 0.0, |_| 0.0),
            Err(LabError::Resolution(_))
        ));
    }

    #[test]
    fn hessian_of_quadratic_is_exact() {
        let (d, g) = half_ball(64);
        let f = build_field(
            &d,
            &g,
            |x| 0.5 * (x[0] * x[0] + x[1] * x[1]),
            |x| 0.5 * (x[0] * x[0] + x[1] * x[1]),
        )
        .unwrap();
        let hs = f.numerical_hessian(&[0.0, 0.5]).unwrap();
        assert!((hs - DMatrix::<f64>::identity(2, 2)).amax() < 1e-10);
    }

    #[test]
    fn hessian_of_u0_matches_closed_form() {
        for cells in [32, 64] {
            let (d, g) = half_ball(cells);
            let u0 = ClosedForm::u0(2, 1.0);
            let f = build_field(&d, &g, |x| u0.value(x), move |x| u0.value(x)).unwrap();
            let hs = f.numerical_hessian(&[0.0, 0.5]).unwrap();
            let exact = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.5]);
            // cubic in x_n: central differences are exact up to rounding
            assert!((hs - exact).amax() < 1e-9);
        }
    }

    #[test]
    fn hessian_near_boundary_is_signalled() {
        let (d, g) = half_ball(32);
        let f = build_field(&d, &g, |_| 0.0, |_| 0.0).unwrap();
        let h = g.spacing();
        assert!(matches!(
            f.numerical_hessian(&[0.0, h]),
            Err(LabError::NearBoundary(_))
        ));
    }

    #[test]
    fn interpolation_reproduces_bilinear_functions() {
        let (d, g) = half_ball(32);
        let lin = |x: &[f64]| 1.0 + 2.0 * x[0] - 0.5 * x[1];
        let f = build_field(&d, &g, lin, lin).unwrap();
        for x in [[0.013, 0.27], [0.5, 0.5], [-0.71, 0.02]] {
            assert!((f.interpolate(&x).unwrap() - lin(&x)).abs() < 1e-12);
        }
        assert!(f.interpolate(&[0.0, -0.1]).is_none());
    }

    #[test]
    fn binary_and_csv_round_trip() {
        let (d, g) = half_ball(16);
        let u0 = ClosedForm::u0(2, 1.0);
        let f = build_field(&d, &g, |x| u0.value(x), move |x| u0.value(x)).unwrap();
        let back = ScalarField::from_binary(f.layout().clone(), &f.to_binary()).unwrap();
        assert_eq!(back.cuts(), f.cuts());
        let mut csv = Vec::new();
        f.write_csv(&mut csv).unwrap();
        let back2 =
            ScalarField::read_csv(f.layout().clone(), std::str::from_utf8(&csv).unwrap()).unwrap();
        for (i, k) in f.kinds().iter().enumerate() {
            if *k != NodeKind::Exterior {
                assert_eq!(back.value(i), f.value(i));
                assert_eq!(back2.value(i), f.value(i));
            }
        }
    }
}
