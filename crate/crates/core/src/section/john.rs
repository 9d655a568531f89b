//! Maximum-volume inscribed ellipsoids of section slices.

use nalgebra::{DMatrix, Matrix2, Matrix5, SymmetricEigen, Vector2, Vector5};

use super::extract::Section;
use crate::domain::{convex_hull, Face};
use crate::error::{LabError, Result};

/// Inscribed ellipsoid `{c + R diag(d) y : |y| ≤ 1}` of a slice, in the
/// tangential coordinates `x'`.
#[derive(Debug, Clone, PartialEq)]
pub struct JohnAxes {
    /// Ascending.
    pub semiaxes: Vec<f64>,
    /// Columns are the axis directions, in the order of `semiaxes`.
    pub rotation: DMatrix<f64>,
    pub center: Vec<f64>,
}

impl JohnAxes {
    /// `|R⁻¹ diag(d)⁻¹ (x − c)|`, the gauge of the ellipsoid about its center.
    pub fn gauge(&self, x: &[f64]) -> f64 {
        let k = self.semiaxes.len();
        (0..k)
            .map(|j| {
                let proj: f64 = (0..k)
                    .map(|i| self.rotation[(i, j)] * (x[i] - self.center[i]))
                    .sum();
                (proj / self.semiaxes[j]).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }
}

pub fn john_interval(a: f64, b: f64) -> JohnAxes {
    JohnAxes {
        semiaxes: vec![0.5 * (b - a).abs()],
        rotation: DMatrix::identity(1, 1),
        center: vec![0.5 * (a + b)],
    }
}

struct Halfspaces {
    normals: Vec<Vector2<f64>>,
    offsets: Vec<f64>,
}

impl Halfspaces {
    fn from_faces(faces: &[Face]) -> Self {
        Halfspaces {
            normals: faces
                .iter()
                .map(|f| Vector2::new(f.normal[0], f.normal[1]))
                .collect(),
            offsets: faces.iter().map(|f| f.offset).collect(),
        }
    }

    /// Slacks `b_i − a_i·c − |B a_i|`; `None` if any is nonpositive.
    fn slacks(&self, th: &Vector5<f64>) -> Option<Vec<f64>> {
        let (c, b) = unpack(th);
        self.normals
            .iter()
            .zip(&self.offsets)
            .map(|(a, off)| {
                let s = off - a.dot(&c) - (b * a).norm();
                (s > 0.0).then_some(s)
            })
            .collect()
    }
}

/// Parameters `(c₀, c₁, B₀₀, B₀₁, B₁₁)`.
fn unpack(th: &Vector5<f64>) -> (Vector2<f64>, Matrix2<f64>) {
    (
        Vector2::new(th[0], th[1]),
        Matrix2::new(th[2], th[3], th[3], th[4]),
    )
}

/// Value, gradient and Hessian of `t log det B + Σ log sᵢ`.
fn barrier(
    hs: &Halfspaces,
    th: &Vector5<f64>,
    t: f64,
) -> Option<(f64, Vector5<f64>, Matrix5<f64>)> {
    let (c, b) = unpack(th);
    let det = b.determinant();
    if !(det > 0.0) || !(b[(0, 0)] > 0.0) {
        return None;
    }
    let bi = b.try_inverse()?;
    let basis = [
        Matrix2::new(1.0, 0.0, 0.0, 0.0),
        Matrix2::new(0.0, 1.0, 1.0, 0.0),
        Matrix2::new(0.0, 0.0, 0.0, 1.0),
    ];
    let mut val = t * det.ln();
    let mut g = Vector5::zeros();
    let mut hm = Matrix5::zeros();
    for p in 0..3 {
        g[2 + p] += t * (bi * basis[p]).trace();
        for q in 0..3 {
            hm[(2 + p, 2 + q)] -= t * (bi * basis[p] * bi * basis[q]).trace();
        }
    }
    for (a, off) in hs.normals.iter().zip(&hs.offsets) {
        let ba = b * a;
        let r = ba.norm();
        let s = off - a.dot(&c) - r;
        if !(s > 0.0) {
            return None;
        }
        val += s.ln();
        // s as a function of θ: −a·c − |J θ_B| + b, with J θ_B = B a
        let jm = nalgebra::Matrix2x3::new(a[0], a[1], 0.0, 0.0, a[0], a[1]);
        let u = if r > 0.0 { ba / r } else { Vector2::zeros() };
        let mut ds = Vector5::zeros();
        ds[0] = -a[0];
        ds[1] = -a[1];
        let dr = jm.transpose() * u;
        for p in 0..3 {
            ds[2 + p] = -dr[p];
        }
        let mut d2s = Matrix5::zeros();
        if r > 0.0 {
            let proj = Matrix2::identity() - u * u.transpose();
            let hr = jm.transpose() * proj * jm / r;
            for p in 0..3 {
                for q in 0..3 {
                    d2s[(2 + p, 2 + q)] = -hr[(p, q)];
                }
            }
        }
        g += ds / s;
        hm += d2s / s - ds * ds.transpose() / (s * s);
    }
    Some((val, g, hm))
}

/// John ellipse of the convex hull of planar points, by a log-barrier
/// interior-point method on `max log det B` subject to
/// `|B aᵢ| + aᵢ·c ≤ bᵢ`.
pub fn john_ellipse_2d(points: &[Vec<f64>]) -> Result<JohnAxes> {
    let (verts, faces) = convex_hull(2, points.to_vec())?;
    let hs = Halfspaces::from_faces(&faces);
    let m = faces.len() as f64;
    let cx = verts.iter().map(|v| v[0]).sum::<f64>() / verts.len() as f64;
    let cy = verts.iter().map(|v| v[1]).sum::<f64>() / verts.len() as f64;
    let c = Vector2::new(cx, cy);
    let r0 = hs
        .normals
        .iter()
        .zip(&hs.offsets)
        .map(|(a, off)| (off - a.dot(&c)) / a.norm())
        .fold(f64::INFINITY, f64::min);
    if !(r0 > 0.0) {
        return Err(LabError::DegenerateSection(
            "slice hull has empty interior".into(),
        ));
    }
    let mut th = Vector5::new(cx, cy, 0.5 * r0, 0.0, 0.5 * r0);
    let mut t = 1.0;
    while m / t > 1e-9 {
        for _ in 0..100 {
            let Some((v0, g, hm)) = barrier(&hs, &th, t) else {
                return Err(LabError::DegenerateSection(
                    "barrier left the feasible set".into(),
                ));
            };
            let Some(step) = (-hm).cholesky().map(|ch| ch.solve(&g)) else {
                break;
            };
            let dec = g.dot(&step);
            if dec < 1e-14 {
                break;
            }
            let mut s = 1.0;
            loop {
                let cand = th + step * s;
                if hs.slacks(&cand).is_some() {
                    if let Some((v1, _, _)) = barrier(&hs, &cand, t) {
                        if v1 >= v0 + 0.25 * s * dec {
                            th = cand;
                            break;
                        }
                    }
                }
                s *= 0.5;
                if s < 1e-12 {
                    break;
                }
            }
            if s < 1e-12 || dec < 1e-12 {
                break;
            }
        }
        t *= 8.0;
    }
    let (c, b) = unpack(&th);
    let eig = SymmetricEigen::new(b);
    let mut idx = [0usize, 1];
    idx.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .total_cmp(&eig.eigenvalues[j])
            .then(i.cmp(&j))
    });
    let semiaxes = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut rot = DMatrix::zeros(2, 2);
    for (col, &i) in idx.iter().enumerate() {
        rot[(0, col)] = eig.eigenvectors[(0, i)];
        rot[(1, col)] = eig.eigenvectors[(1, i)];
    }
    Ok(JohnAxes {
        semiaxes,
        rotation: rot,
        center: vec![c[0], c[1]],
    })
}

/// Boundary of the slice `S_h ∩ {x_n = level}` in tangential coordinates:
/// the two endpoints in 2D, a ray-cast polygon in 3D.
pub fn slice_points(section: &Section, level: f64) -> Result<Vec<Vec<f64>>> {
    let n = section.dim();
    let field = section.field();
    let layout = field.layout();
    let hg = field.grid().spacing();
    let inside = |xt: &[f64]| -> bool {
        let mut x = xt.to_vec();
        x.push(level);
        layout.level(&x) <= 0.0 && section.excess(&x).is_some_and(|w| w < 0.0)
    };
    let (lo, hi) = section.search_box(2.0);
    if level <= lo[n - 1] || level >= hi[n - 1] {
        return Err(LabError::EmptySlice(level));
    }
    let step = hg / 4.0;
    let counts: Vec<usize> = (0..n - 1)
        .map(|d| ((hi[d] - lo[d]) / step).ceil() as usize + 1)
        .collect();
    let mut samples = Vec::new();
    let total: usize = counts.iter().product();
    for flat in 0..total {
        let mut r = flat;
        let xt: Vec<f64> = (0..n - 1)
            .map(|d| {
                let k = r % counts[d];
                r /= counts[d];
                lo[d] + k as f64 * step
            })
            .collect();
        if inside(&xt) {
            samples.push(xt);
        }
    }
    if samples.is_empty() {
        return Err(LabError::EmptySlice(level));
    }
    if samples.len() < 2 * (n - 1) + 1 {
        return Err(LabError::TooSmall(format!(
            "slice at x_n = {level} holds {} samples",
            samples.len()
        )));
    }
    let c: Vec<f64> = (0..n - 1)
        .map(|d| samples.iter().map(|s| s[d]).sum::<f64>() / samples.len() as f64)
        .collect();
    if !inside(&c) {
        return Err(LabError::DegenerateSection(
            "slice centroid is outside the slice".into(),
        ));
    }
    let reach = (0..n - 1).map(|d| hi[d] - lo[d]).fold(0.0, f64::max) * 2.0;
    let ray = |dir: &[f64]| -> Vec<f64> {
        let at = |t: f64| -> Vec<f64> { c.iter().zip(dir).map(|(a, b)| a + t * b).collect() };
        let mut a = 0.0;
        let mut b = step;
        while inside(&at(b)) && b < reach {
            a = b;
            b += step;
        }
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if inside(&at(m)) {
                a = m;
            } else {
                b = m;
            }
        }
        at(0.5 * (a + b))
    };
    if n == 2 {
        Ok(vec![ray(&[-1.0]), ray(&[1.0])])
    } else {
        Ok((0..96)
            .map(|k| {
                let th = std::f64::consts::TAU * k as f64 / 96.0;
                ray(&[th.cos(), th.sin()])
            })
            .collect())
    }
}

/// John ellipsoid of the slice `S_h ∩ {x_n = level}`, with the containment
/// `hull ⊆ (n−1)·E` checked.
pub fn slice_john_axes(section: &Section, level: f64) -> Result<JohnAxes> {
    let n = section.dim();
    let pts = slice_points(section, level)?;
    let axes = if n == 2 {
        john_interval(pts[0][0], pts[1][0])
    } else {
        john_ellipse_2d(&pts)?
    };
    check_containment(&axes, &pts, (n - 1) as f64)?;
    Ok(axes)
}

pub fn check_containment(axes: &JohnAxes, pts: &[Vec<f64>], factor: f64) -> Result<()> {
    let worst = pts.iter().map(|p| axes.gauge(p)).fold(0.0, f64::max);
    if worst > factor * (1.0 + 1e-6) {
        return Err(LabError::DegenerateSection(format!(
            "slice hull leaves the {factor}-dilated ellipsoid (gauge {worst})"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gives_unit_disk() {
        let sq = vec![
            vec![-1.0, -1.0],
            vec![1.0, -1.0],
            vec![1.0, 1.0],
            vec![-1.0, 1.0],
        ];
        let e = john_ellipse_2d(&sq).unwrap();
        assert!((e.semiaxes[0] - 1.0).abs() < 1e-6 && (e.semiaxes[1] - 1.0).abs() < 1e-6);
        assert!(e.center.iter().all(|c| c.abs() < 1e-8));
    }

    #[test]
    fn interval_semiaxis_is_half_length() {
        let e = john_interval(-0.3, 0.3);
        assert_eq!(e.semiaxes, vec![0.3]);
        assert_eq!(e.center, vec![0.0]);
    }

    #[test]
    fn triangle_gives_steiner_inellipse() {
        let tri = vec![vec![0.0, 0.0], vec![3.0, 0.0], vec![0.5, 2.0]];
        let e = john_ellipse_2d(&tri).unwrap();
        // area of the Steiner inellipse is π/(3√3) times the triangle area
        let area = std::f64::consts::PI * e.semiaxes[0] * e.semiaxes[1];
        let expect = std::f64::consts::PI / (3.0 * 3f64.sqrt()) * 3.0;
        assert!((area - expect).abs() < 1e-6 * expect, "{area} {expect}");
        assert!((e.center[0] - 3.5 / 3.0).abs() < 1e-6 && (e.center[1] - 2.0 / 3.0).abs() < 1e-6);
        check_containment(&e, &tri, 2.0).unwrap();
    }
}
