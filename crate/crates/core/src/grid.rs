use serde::{Deserialize, Serialize};

use crate::domain::ConvexDomain;
use crate::error::{LabError, Result};

/// Uniform Cartesian grid over an axis-aligned box.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    spacing: f64,
    lo: Vec<f64>,
    counts: Vec<usize>,
    strides: Vec<usize>,
}

/// JSON form: `{"spacing": h, "bounds": [[lo...], [hi...]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub spacing: f64,
    pub bounds: [Vec<f64>; 2],
}

pub const MIN_NODES_PER_AXIS: usize = 8;

impl Grid {
    /// Nodes are placed at `lo + k * spacing`; the upper bound is rounded to
    /// the nearest whole number of cells.
    pub fn new(spacing: f64, lo: &[f64], hi: &[f64]) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(LabError::Input(format!(
                "grid spacing {spacing} must be positive"
            )));
        }
        if lo.len() != hi.len() || !(2..=3).contains(&lo.len()) {
            return Err(LabError::Input(
                "grid bounds must have dimension 2 or 3".into(),
            ));
        }
        let mut counts = Vec::with_capacity(lo.len());
        for (a, b) in lo.iter().zip(hi) {
            if !(b > a) {
                return Err(LabError::Input(format!("empty grid extent [{a}, {b}]")));
            }
            let cells = ((b - a) / spacing).round() as usize;
            if cells + 1 < MIN_NODES_PER_AXIS {
                return Err(LabError::Resolution(format!(
                    "{} nodes on an axis, need at least {MIN_NODES_PER_AXIS}",
                    cells + 1
                )));
            }
            counts.push(cells + 1);
        }
        let mut strides = vec![1; counts.len()];
        for d in 1..counts.len() {
            strides[d] = strides[d - 1] * counts[d - 1];
        }
        Ok(Grid {
            spacing,
            lo: lo.to_vec(),
            counts,
            strides,
        })
    }

    pub fn from_spec(spec: &GridSpec) -> Result<Self> {
        Grid::new(spec.spacing, &spec.bounds[0], &spec.bounds[1])
    }

    /// Square-cell grid covering the domain's bounding box with `cells`
    /// intervals along its widest axis.
    pub fn covering(domain: &ConvexDomain, cells: usize) -> Result<Self> {
        let (lo, hi) = domain
            .bounding_box()
            .ok_or_else(|| LabError::Input("unbounded domain needs explicit grid bounds".into()))?;
        let width = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);
        let h = width / cells as f64;
        let hi: Vec<f64> = lo
            .iter()
            .zip(&hi)
            .map(|(a, b)| a + ((b - a) / h).ceil() * h)
            .collect();
        Grid::new(h, &lo, &hi)
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            spacing: self.spacing,
            bounds: [self.lo.clone(), self.hi()],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.counts)
            .map(|(a, c)| a + (*c - 1) as f64 * self.spacing)
            .collect()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, ijk: &[usize]) -> usize {
        ijk.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for d in 0..self.dim() {
            out[d] = idx % self.counts[d];
            idx /= self.counts[d];
        }
        out
    }

    pub fn coords(&self, idx: usize) -> Vec<f64> {
        let m = self.multi_index(idx);
        (0..self.dim())
            .map(|d| self.lo[d] + m[d] as f64 * self.spacing)
            .collect()
    }

    /// Node reached from `idx` by an integer offset, if it is on the grid.
    pub fn offset(&self, idx: usize, off: &[i64]) -> Option<usize> {
        let m = self.multi_index(idx);
        let mut out = 0;
        for d in 0..self.dim() {
            let k = m[d] as i64 + off[d];
            if k < 0 || k >= self.counts[d] as i64 {
                return None;
            }
            out += k as usize * self.strides[d];
        }
        Some(out)
    }

    /// Signed box level: negative strictly inside the box.
    pub fn box_level(&self, x: &[f64]) -> f64 {
        let hi = self.hi();
        (0..self.dim())
            .map(|d| (self.lo[d] - x[d]).max(x[d] - hi[d]))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Node whose coordinates coincide with `x` up to `1e-9 * spacing`.
    pub fn node_at(&self, x: &[f64]) -> Option<usize> {
        let mut m = [0usize; 3];
        for d in 0..self.dim() {
            let r = (x[d] - self.lo[d]) / self.spacing;
            let k = r.round();
            if (r - k).abs() > 1e-9 || k < 0.0 || k as usize >= self.counts[d] {
                return None;
            }
            m[d] = k as usize;
        }
        Some(self.index(&m[..self.dim()]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_round_trips() {
        let g = Grid::new(0.1, &[0.0, 0.0, 0.0], &[1.0, 0.8, 0.7]).unwrap();
        assert_eq!(g.counts(), &[11, 9, 8]);
        for idx in [0, 17, 200, g.len() - 1] {
            let m = g.multi_index(idx);
            assert_eq!(g.index(&m[..3]), idx);
            assert_eq!(g.node_at(&g.coords(idx)), Some(idx));
        }
        assert_eq!(g.offset(0, &[-1, 0, 0]), None);
        assert_eq!(g.offset(0, &[1, 1, 0]), Some(12));
    }

    #[test]
    fn too_few_nodes_rejected() {
        assert!(matches!(
            Grid::new(0.25, &[0.0, 0.0], &[1.0, 1.0]),
            Err(LabError::Resolution(_))
        ));
    }
}
