//! Wide-stencil direction sets, orthogonal frames and per-node coefficients.

use crate::field::{Layout, Neighbor, NodeKind};

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Primitive integer directions with entries in `[-width, width]`, one per
/// line (first nonzero entry positive), ordered by length then lexicographically.
pub fn directions(dim: usize, width: usize) -> Vec<Vec<i64>> {
    let w = width as i64;
    let mut out = Vec::new();
    let mut push = |v: Vec<i64>| {
        let g = v.iter().fold(0, |acc, &c| gcd(acc, c));
        if g != 1 {
            return;
        }
        let first = v.iter().find(|c| **c != 0).copied().unwrap_or(0);
        if first > 0 {
            out.push(v);
        }
    };
    for a in -w..=w {
        for b in -w..=w {
            if dim == 2 {
                push(vec![a, b]);
            } else {
                for c in -w..=w {
                    push(vec![a, b, c]);
                }
            }
        }
    }
    out.sort_by(|x, y| {
        let nx: i64 = x.iter().map(|c| c * c).sum();
        let ny: i64 = y.iter().map(|c| c * c).sum();
        nx.cmp(&ny).then_with(|| y.cmp(x))
    });
    out
}

/// All sets of `dim` mutually orthogonal directions (as sorted index lists).
pub fn frames(dirs: &[Vec<i64>], dim: usize) -> Vec<Vec<usize>> {
    let dot = |a: &[i64], b: &[i64]| -> i64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let m = dirs.len();
    let mut out = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            if dot(&dirs[i], &dirs[j]) != 0 {
                continue;
            }
            if dim == 2 {
                out.push(vec![i, j]);
                continue;
            }
            for k in (j + 1)..m {
                if dot(&dirs[i], &dirs[k]) == 0 && dot(&dirs[j], &dirs[k]) == 0 {
                    out.push(vec![i, j, k]);
                }
            }
        }
    }
    out
}

/// Second difference along one direction at one node:
/// `Δ² = cp·u[p] + cm·u[m] − (cp+cm)·u0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirEntry {
    pub p: u32,
    pub cp: f64,
    pub m: u32,
    pub cm: f64,
}

/// Precomputed stencil for every unknown of a layout. Values are addressed
/// in a work buffer holding all grid nodes followed by the boundary-crossing
/// points of the stencil lines.
#[derive(Debug, Clone)]
pub struct Stencil {
    pub dim: usize,
    pub dirs: Vec<Vec<i64>>,
    pub frames: Vec<Vec<usize>>,
    /// Unknowns (interior node indices) in lexicographic order.
    pub unknowns: Vec<usize>,
    pub entries: Vec<DirEntry>,
    /// Coordinates of the crossing points, in work-buffer order after the nodes.
    pub cut_points: Vec<Vec<f64>>,
    pub n_nodes: usize,
}

impl Stencil {
    pub fn new(layout: &Layout, width: usize) -> Self {
        Self::for_nodes(layout, width, layout.interior_nodes().collect())
    }

    /// Stencil restricted to the given interior nodes.
    pub fn for_nodes(layout: &Layout, width: usize, unknowns: Vec<usize>) -> Self {
        let g = &layout.grid;
        let dim = g.dim();
        let dirs = directions(dim, width);
        let frames = frames(&dirs, dim);
        let n_nodes = g.len();
        let h = g.spacing();
        let mut entries = Vec::with_capacity(unknowns.len() * dirs.len());
        let mut cut_points = Vec::new();
        for &idx in &unknowns {
            for v in &dirs {
                let s2 = v.iter().map(|c| (c * c) as f64).sum::<f64>() * h * h;
                let neg: Vec<i64> = v.iter().map(|c| -c).collect();
                let mut side = |off: &[i64]| -> (u32, f64) {
                    match layout.neighbor(idx, off) {
                        Neighbor::Node(j) => (j as u32, 1.0),
                        Neighbor::Cut { t, point } => {
                            let k = n_nodes + cut_points.len();
                            cut_points.push(point);
                            (k as u32, t)
                        }
                    }
                };
                let (p, tp) = side(v);
                let (m, tm) = side(&neg);
                let cp = 2.0 / (tp * (tp + tm) * s2);
                let cm = 2.0 / (tm * (tp + tm) * s2);
                entries.push(DirEntry { p, cp, m, cm });
            }
        }
        debug_assert!(unknowns
            .iter()
            .all(|&i| layout.kinds[i] == NodeKind::Interior));
        Stencil {
            dim,
            dirs,
            frames,
            unknowns,
            entries,
            cut_points,
            n_nodes,
        }
    }

    pub fn ndirs(&self) -> usize {
        self.dirs.len()
    }

    /// Entries of the `k`-th unknown.
    pub fn node_entries(&self, k: usize) -> &[DirEntry] {
        let d = self.dirs.len();
        &self.entries[k * d..(k + 1) * d]
    }

    /// Work buffer: node values followed by `trace` at the crossing points.
    pub fn work_buffer(&self, node_values: &[f64], trace: &dyn Fn(&[f64]) -> f64) -> Vec<f64> {
        let mut w = node_values.to_vec();
        w.extend(self.cut_points.iter().map(|p| trace(p)));
        w
    }
}
