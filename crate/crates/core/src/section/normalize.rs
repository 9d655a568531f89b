//! Sliding normalization of boundary sections and scaling exponents.

use serde::{Deserialize, Serialize};

use super::extract::{box_quadrature, compute_section, supporting_slope, Section};
use super::john::slice_john_axes;
use crate::error::{LabError, Result};
use crate::field::ScalarField;
use crate::fit::fit_loglog;

/// `A x = x − τ x_n` with `τ·e_n = 0`; unit determinant, identity on `{x_n = 0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlidingMap {
    pub tau: Vec<f64>,
}

impl SlidingMap {
    pub fn new(tau: Vec<f64>) -> Result<Self> {
        match tau.last() {
            Some(t) if *t == 0.0 => Ok(SlidingMap { tau }),
            _ => Err(LabError::Input(
                "sliding vector must satisfy τ·e_n = 0".into(),
            )),
        }
    }

    pub fn identity(dim: usize) -> Self {
        SlidingMap {
            tau: vec![0.0; dim],
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let xn = x[x.len() - 1];
        x.iter().zip(&self.tau).map(|(a, t)| a - t * xn).collect()
    }

    pub fn invert(&self, y: &[f64]) -> Vec<f64> {
        let yn = y[y.len() - 1];
        y.iter().zip(&self.tau).map(|(a, t)| a + t * yn).collect()
    }
}

/// `τ = x*'/d_h`, which moves the center of mass onto the normal axis.
pub fn sliding_from_center(section: &Section) -> Result<SlidingMap> {
    if !(section.d_h > 0.0) {
        return Err(LabError::DegenerateSection(format!(
            "d_h = {} is not positive",
            section.d_h
        )));
    }
    let n = section.dim();
    let mut tau: Vec<f64> = (0..n)
        .map(|d| (section.center[d] - section.base[d]) / section.d_h)
        .collect();
    tau[n - 1] = 0.0;
    SlidingMap::new(tau)
}

/// Center of mass of `A(S_h)` recomputed by quadrature on the image set.
pub fn image_center(section: &Section, map: &SlidingMap) -> Vec<f64> {
    let n = section.dim();
    let (lo, hi) = section.search_box(2.0);
    let mut ilo = vec![f64::INFINITY; n];
    let mut ihi = vec![f64::NEG_INFINITY; n];
    for corner in 0..(1usize << n) {
        let x: Vec<f64> = (0..n)
            .map(|d| if (corner >> d) & 1 == 1 { hi[d] } else { lo[d] })
            .collect();
        let y = map.apply(&x);
        for d in 0..n {
            ilo[d] = ilo[d].min(y[d]);
            ihi[d] = ihi[d].max(y[d]);
        }
    }
    let layout = section.field().layout();
    let step = section.field().grid().spacing();
    let (_, c) = box_quadrature(&ilo, &ihi, step, |y| {
        let x = map.invert(y);
        layout.level(&x) < 0.0 && section.excess(&x).is_some_and(|w| w < 0.0)
    });
    c
}

/// `d_n = (hⁿ / ∏ d_i²)^{1/(2+α)}`.
pub fn dn_from_axes(axes: &[f64], h: f64, alpha: f64) -> Result<f64> {
    if axes.iter().any(|d| !(*d > 0.0)) || !(h > 0.0) {
        return Err(LabError::Input("axes and height must be positive".into()));
    }
    let n = axes.len() as i32 + 1;
    let prod: f64 = axes.iter().map(|d| d * d).product();
    Ok((h.powi(n) / prod).powf(1.0 / (2.0 + alpha)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRecord {
    pub h: f64,
    /// Tangential components of the sliding vector.
    pub tau: Vec<f64>,
    /// Slice semiaxes `d_1 ≤ … ≤ d_{n-1}`.
    pub axes: Vec<f64>,
    pub d_n: f64,
    pub d_h: f64,
    pub measure: f64,
    /// `|S_h|² d_h^α / hⁿ`.
    pub volume_ratio: f64,
}

impl NormalizationRecord {
    /// Relative defect of `(∏ d_i²) d_n^{2+α} = hⁿ`.
    pub fn closure_defect(&self, alpha: f64) -> f64 {
        let n = self.axes.len() as i32 + 1;
        let lhs: f64 =
            self.axes.iter().map(|d| d * d).product::<f64>() * self.d_n.powf(2.0 + alpha);
        (lhs / self.h.powi(n) - 1.0).abs()
    }
}

/// Section, sliding, slice John axes at `x_n = d_h` and the closure value.
/// At interior base points no sliding is applied, the slice is taken through
/// the center of mass and `d_h` is the half extent along `e_n`.
pub fn normalize_section(
    field: &ScalarField,
    x0: &[f64],
    h: f64,
    alpha: f64,
) -> Result<NormalizationRecord> {
    let n = field.dim();
    let p = supporting_slope(field, x0)?;
    let sec = compute_section(field, x0, &p, h)?;
    let interior = field.layout().level(x0) < -1e-9 * field.grid().spacing();
    let (map, level, d_h) = if interior {
        let (lo, hi) = sec
            .points()
            .iter()
            .map(|x| x[n - 1])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                (a.min(v), b.max(v))
            });
        (SlidingMap::identity(n), sec.center[n - 1], 0.5 * (hi - lo))
    } else {
        let m = sliding_from_center(&sec)?;
        (m, x0[n - 1] + sec.d_h, sec.d_h)
    };
    // the slice of A(S_h) at x_n = level is a translate of the slice of S_h
    let axes = slice_john_axes(&sec, level)?.semiaxes;
    let d_n = dn_from_axes(&axes, h, alpha)?;
    let rec = NormalizationRecord {
        h,
        tau: map.tau[..n - 1].to_vec(),
        axes,
        d_n,
        d_h,
        measure: sec.measure,
        volume_ratio: sec.measure * sec.measure * d_h.powf(alpha) / h.powi(n as i32),
    };
    if rec.closure_defect(alpha) > 1e-10 {
        return Err(LabError::DegenerateSection(
            "closure identity violated".into(),
        ));
    }
    Ok(rec)
}

/// Geometric ladder `h_max, h_max/factor, …` down to `h_min`.
pub fn h_ladder(h_max: f64, h_min: f64, factor: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut h = h_max;
    while h >= h_min * (1.0 - 1e-12) {
        out.push(h);
        h /= factor;
    }
    out
}

/// Default ladder: factor 2 from 0.25 to `100 h_grid²`.
pub fn default_ladder(grid_spacing: f64) -> Vec<f64> {
    h_ladder(0.25, 100.0 * grid_spacing * grid_spacing, 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    /// Slope of `log d_i` against `log h`, per tangential axis.
    pub tangential_slopes: Vec<f64>,
    /// Mean of the tangential slopes.
    pub tangential_slope: f64,
    /// Slope of `log d_n`.
    pub normal_slope: f64,
    /// Slope of `log d_h`.
    pub dh_slope: f64,
    /// Smallest coefficient of determination among the fits.
    pub r2: f64,
    pub decades: f64,
}

/// Least-squares exponents over at least four records spanning two decades.
pub fn scaling_fit(records: &[NormalizationRecord]) -> Result<ScalingFit> {
    if records.len() < 4 {
        return Err(LabError::InsufficientData(format!(
            "{} records, need 4",
            records.len()
        )));
    }
    let hs: Vec<f64> = records.iter().map(|r| r.h).collect();
    let (lo, hi) = hs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(*v), b.max(*v))
        });
    let decades = (hi / lo).log10();
    if decades < 2.0 - 1e-9 {
        return Err(LabError::InsufficientData(format!(
            "heights span {decades:.3} decades, need 2"
        )));
    }
    let k = records[0].axes.len();
    let mut r2 = f64::INFINITY;
    let mut tangential = Vec::with_capacity(k);
    for i in 0..k {
        let ys: Vec<f64> = records.iter().map(|r| r.axes[i]).collect();
        let f = fit_loglog(&hs, &ys)?;
        r2 = r2.min(f.r2);
        tangential.push(f.slope);
    }
    let fn_ = fit_loglog(&hs, &records.iter().map(|r| r.d_n).collect::<Vec<_>>())?;
    let fh = fit_loglog(&hs, &records.iter().map(|r| r.d_h).collect::<Vec<_>>())?;
    r2 = r2.min(fn_.r2).min(fh.r2);
    Ok(ScalingFit {
        tangential_slope: tangential.iter().sum::<f64>() / k as f64,
        tangential_slopes: tangential,
        normal_slope: fn_.slope,
        dh_slope: fh.slope,
        r2,
        decades,
    })
}
