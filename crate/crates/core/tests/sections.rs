use std::f64::consts::PI;

use malab_core::analytic::ClosedForm;
use malab_core::section::{
    compute_section, growth_envelope, image_center, john_ellipse_2d, normal_derivative_monitor,
    normalize_section, pogorelov_monitor, sliding_from_center, supporting_slope,
    tangent_cone_profile,
};
use malab_core::{build_field, ConvexDomain, Grid, LabError, ScalarField, Shape};

fn half_ball(cells: usize) -> (ConvexDomain, Grid) {
    let d = ConvexDomain::new(2, Shape::HalfBall { radius: 1.0 }).unwrap();
    let g = Grid::covering(&d, cells).unwrap();
    (d, g)
}

fn unit_disk(cells: usize) -> (ConvexDomain, Grid) {
    let shape = Shape::Ball {
        center: vec![0.0, 0.0],
        radius: 1.0,
    };
    let d = ConvexDomain::with_marked_point(2, shape, vec![0.0, -1.0], None).unwrap();
    let g = Grid::covering(&d, cells).unwrap();
    (d, g)
}

fn sampled(
    d: &ConvexDomain,
    g: &Grid,
    u: impl Fn(&[f64]) -> f64 + Clone + Send + Sync + 'static,
) -> ScalarField {
    build_field(d, g, u.clone(), u).unwrap()
}

fn u0_field(cells: usize, alpha: f64) -> ScalarField {
    let (d, g) = half_ball(cells);
    let u0 = ClosedForm::u0(2, alpha);
    sampled(&d, &g, move |x| u0.value(x))
}

/// Area and centroid height of `{x₁²/2 + x₂³/6 < h, x₂ > 0}` by the midpoint rule in `x₂`.
fn u0_section_oracle(h: f64) -> (f64, f64) {
    let top = (6.0 * h).cbrt();
    let m = 200_000;
    let dy = top / m as f64;
    let (mut area, mut moment) = (0.0, 0.0);
    for k in 0..m {
        let y = (k as f64 + 0.5) * dy;
        let w = 2.0 * (2.0 * (h - y.powi(3) / 6.0)).sqrt();
        area += w * dy;
        moment += y * w * dy;
    }
    (area, moment / area)
}

#[test]
fn interior_section_of_quadratic_is_a_ball() {
    let (d, g) = unit_disk(128);
    let f = sampled(&d, &g, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
    let p = supporting_slope(&f, &[0.0, 0.0]).unwrap();
    assert_eq!(p, vec![0.0, 0.0]);
    let s = compute_section(&f, &[0.0, 0.0], &p, 0.02).unwrap();
    let exact = PI * 0.04;
    assert!((s.measure / exact - 1.0).abs() < 0.03, "{}", s.measure);
    for x in s.points() {
        assert!(x[0] * x[0] + x[1] * x[1] < 0.04 + 1e-12);
    }
}

#[test]
fn boundary_section_of_u0_lies_in_the_model_band() {
    let f = u0_field(128, 1.0);
    let h = 0.01;
    let s = compute_section(&f, &[0.0, 0.0], &[0.0, 0.0], h).unwrap();
    for x in s.points() {
        assert!(x[0] * x[0] + x[1].powi(3) < 6.0 * h, "{x:?}");
    }
    let g = f.grid();
    let hg = g.spacing();
    let inner = (0..g.len())
        .filter(|&i| {
            let x = g.coords(i);
            x[1] > 0.0 && x[0] * x[0] / 2.0 + x[1].powi(3) / 6.0 < 0.5 * h
        })
        .count();
    assert!(inner > 10);
    assert!(s.nodes.len() >= inner);
    assert!(s.d_h > 0.0 && s.d_h < (6.0 * h).cbrt() + hg);
}

#[test]
fn height_below_grid_resolution_is_too_small() {
    let f = u0_field(64, 1.0);
    let hg = f.grid().spacing();
    let out = compute_section(&f, &[0.0, 0.0], &[0.0, 0.0], hg * hg / 100.0);
    assert!(matches!(out, Err(LabError::TooSmall(_))));
}

#[test]
fn sliding_vector_is_center_over_height() {
    let f = u0_field(64, 1.0);
    let mut s = compute_section(&f, &[0.0, 0.0], &[0.0, 0.0], 0.05).unwrap();
    s.center = vec![0.2, 0.1];
    s.d_h = 0.1;
    let m = sliding_from_center(&s).unwrap();
    assert!((m.tau[0] - 2.0).abs() < 1e-15);
    let c = m.apply(&s.center);
    assert!(c[0].abs() < 1e-15 && (c[1] - 0.1).abs() < 1e-15);

    s.center = vec![0.0, 0.1];
    assert_eq!(sliding_from_center(&s).unwrap().tau, vec![0.0, 0.0]);

    s.d_h = 0.0;
    assert!(matches!(
        sliding_from_center(&s),
        Err(LabError::DegenerateSection(_))
    ));
}

#[test]
fn slanted_section_is_recentred_by_sliding() {
    let (d, g) = half_ball(128);
    let slant = 0.6;
    let f = sampled(&d, &g, move |x| {
        let y = x[0] - slant * x[1];
        0.5 * y * y + 0.5 * x[1] * x[1]
    });
    let s = compute_section(&f, &[0.0, 0.0], &[0.0, 0.0], 0.02).unwrap();
    assert!(s.center[0] > 0.5 * slant * s.d_h);
    let m = sliding_from_center(&s).unwrap();
    assert!((m.tau[0] - slant).abs() < 0.05, "{:?}", m.tau);
    let c = image_center(&s, &m);
    assert!(c[0].abs() <= g.spacing(), "{c:?}");
}

#[test]
fn sheared_function_has_sheared_sections_of_equal_measure() {
    let (d, g) = half_ball(128);
    let u0 = ClosedForm::u0(2, 1.0);
    let tau = 0.3;
    let f = sampled(&d, &g, move |x| u0.value(x));
    let sheared = sampled(&d, &g, move |x| u0.value(&[x[0] - tau * x[1], x[1]]));
    let h = 0.02;
    let a = compute_section(&f, &[0.0, 0.0], &[0.0, 0.0], h).unwrap();
    let b = compute_section(&sheared, &[0.0, 0.0], &[0.0, 0.0], h).unwrap();
    assert!((a.measure / b.measure - 1.0).abs() < 0.02);
    // S_h(u∘A) = A⁻¹ S_h(u), with A⁻¹ moving x₁ by +τ x_n
    assert!((b.center[0] - (a.center[0] + tau * a.center[1])).abs() < g.spacing());
    assert!((b.center[1] - a.center[1]).abs() < g.spacing());
}

#[test]
fn rectangle_john_axes_match_brute_force() {
    let mut pts = Vec::new();
    for i in 0..=40 {
        for j in 0..=20 {
            pts.push(vec![-2.0 + 0.1 * i as f64, -1.0 + 0.1 * j as f64]);
        }
    }
    let j = john_ellipse_2d(&pts).unwrap();

    // search over centred ellipses with semiaxes (a, b) rotated by θ
    let inside = |a: f64, b: f64, th: f64| {
        (0..360).all(|k| {
            let t = k as f64 * PI / 180.0;
            let (x, y) = (a * t.cos(), b * t.sin());
            let (c, s) = (th.cos(), th.sin());
            (c * x - s * y).abs() <= 2.0 + 1e-12 && (s * x + c * y).abs() <= 1.0 + 1e-12
        })
    };
    let mut best = (0.0, 0.0, 0.0);
    for ia in 1..=50 {
        for ib in 1..=50 {
            let (a, b) = (0.05 * ia as f64, 0.05 * ib as f64);
            if a * b <= best.0 {
                continue;
            }
            if (0..18).any(|k| inside(a, b, k as f64 * PI / 18.0)) {
                best = (a * b, a.min(b), a.max(b));
            }
        }
    }
    assert_eq!((best.1, best.2), (1.0, 2.0));
    assert!((j.semiaxes[0] - best.1).abs() < 1e-3, "{:?}", j.semiaxes);
    assert!((j.semiaxes[1] - best.2).abs() < 1e-3, "{:?}", j.semiaxes);
}

#[test]
fn u0_volume_ratio_matches_quadrature() {
    let f = u0_field(256, 1.0);
    let h = 1e-2;
    let rec = normalize_section(&f, &[0.0, 0.0], h, 1.0).unwrap();
    let (area, dh) = u0_section_oracle(h);
    let exact = area * area * dh / (h * h);
    assert!(
        (rec.volume_ratio / exact - 1.0).abs() < 0.05,
        "{} vs {exact}",
        rec.volume_ratio
    );
    assert!((rec.measure / area - 1.0).abs() < 0.03);
    assert!(rec.closure_defect(1.0) < 1e-10);
}

#[test]
fn interior_normalization_of_quadratics() {
    let (d, g) = unit_disk(128);
    let h = 0.02;
    // u = |x|²: S_h is the ball of radius √h, so every axis equals √h
    let f = sampled(&d, &g, |x| x[0] * x[0] + x[1] * x[1]);
    let rec = normalize_section(&f, &[0.0, 0.0], h, 0.0).unwrap();
    let r = h.sqrt();
    assert!((rec.axes[0] / r - 1.0).abs() < 0.05, "{rec:?}");
    assert!((rec.d_n / r - 1.0).abs() < 0.05);
    assert!((rec.volume_ratio / (PI * PI) - 1.0).abs() < 0.06);

    // u = |x|²/2: radius √(2h), so d_1 = 2 d_n and the ratio is (2π)²
    let f = sampled(&d, &g, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
    let rec = normalize_section(&f, &[0.0, 0.0], h, 0.0).unwrap();
    assert!((rec.axes[0] / (2.0 * rec.d_n) - 1.0).abs() < 0.1);
    assert!((rec.volume_ratio / (4.0 * PI * PI) - 1.0).abs() < 0.06);
}

#[test]
fn normalization_propagates_section_errors() {
    let f = u0_field(64, 1.0);
    let hg = f.grid().spacing();
    let out = normalize_section(&f, &[0.0, 0.0], hg * hg / 100.0, 1.0);
    assert!(matches!(out, Err(LabError::TooSmall(_))));
}

#[test]
fn pogorelov_product_on_the_ball_is_one_half() {
    let (d, g) = unit_disk(64);
    let u = |x: &[f64]| 0.5 * (x[0] * x[0] + x[1] * x[1] - 1.0);
    let f = build_field(&d, &g, u, |_| 0.0).unwrap();
    let p = supporting_slope(&f, &[0.0, 0.0]).unwrap();
    let s = compute_section(&f, &[0.0, 0.0], &p, 0.5).unwrap();
    for dir in [[1.0, 0.0], [0.0, 1.0]] {
        let rep = pogorelov_monitor(&f, &s, &dir).unwrap();
        assert!((rep.max_value - 0.5).abs() < 1e-12, "{}", rep.max_value);
        assert!(rep.argmax.iter().all(|a| a.abs() < 1e-12));
    }
}

#[test]
fn pogorelov_monitor_requires_negative_excess() {
    let (d, g) = unit_disk(32);
    let u = |x: &[f64]| 0.5 * (x[0] * x[0] + x[1] * x[1] - 1.0);
    let f = build_field(&d, &g, u, |_| 0.0).unwrap();
    let mut s = compute_section(&f, &[0.0, 0.0], &[0.0, 0.0], 0.5).unwrap();
    s.height = 0.1;
    assert!(matches!(
        pogorelov_monitor(&f, &s, &[1.0, 0.0]),
        Err(LabError::Precondition(_))
    ));
}

#[test]
fn normal_derivative_of_u0_attains_the_bound() {
    for alpha in [0.0, 0.5, 1.0] {
        let f = u0_field(128, alpha);
        let rep = normal_derivative_monitor(&f, alpha, 0.5).unwrap();
        let bound = 1.0 / (1.0 + alpha);
        assert_eq!(rep.context["bound"], bound);
        assert!(
            (rep.max_value / bound - 1.0).abs() < 0.01,
            "alpha {alpha}: {}",
            rep.max_value
        );
        assert!((rep.context["min_ratio"] / bound - 1.0).abs() < 0.01);
    }
}

#[test]
fn growth_envelope_of_u0_matches_closed_form() {
    let f = u0_field(64, 1.0);
    let u0 = ClosedForm::u0(2, 1.0);
    let radius = 0.5;
    let rep = growth_envelope(&f, radius).unwrap();
    let g = f.grid();
    let oracle = (0..g.len())
        .map(|i| g.coords(i))
        .filter(|x| {
            x[1] >= 0.0 && {
                let r = x[0].hypot(x[1]);
                r > 1e-12 && r <= radius
            }
        })
        .map(|x| u0.value(&x) / x[0].hypot(x[1]).powf(4.0 / 3.0))
        .fold(f64::NEG_INFINITY, f64::max);
    assert!((rep.max_value - oracle).abs() < 1e-14);
    // along the normal axis the ratio is t^{5/3}/6, increasing in t
    let axis: Vec<f64> = (1..=8)
        .map(|k| (k as f64 * 0.0625).powf(5.0 / 3.0) / 6.0)
        .collect();
    assert!(axis.windows(2).all(|w| w[0] < w[1]));
    assert!(rep.max_value >= *axis.last().unwrap());
    assert_eq!(rep.context["convexity_flag"], 1.0);
}

#[test]
fn growth_envelope_of_quadratic_peaks_at_the_edge() {
    let f = u0_field(64, 0.0);
    let (d, g) = half_ball(64);
    let f2 = sampled(&d, &g, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
    let radius = 0.5;
    let rep = growth_envelope(&f2, radius).unwrap();
    let r = rep.argmax[0].hypot(rep.argmax[1]);
    assert!(r > radius - 2.0 * g.spacing());
    assert!(rep.max_value > 0.0);
    assert!(growth_envelope(&f, radius).unwrap().is_finite());
}

#[test]
fn growth_envelope_reports_nonconvex_fields() {
    let (d, g) = half_ball(32);
    let f = sampled(&d, &g, |x| -(x[0] * x[0]) + x[1]);
    let rep = growth_envelope(&f, 0.5).unwrap();
    assert_eq!(rep.context["convexity_flag"], 0.0);
}

#[test]
fn tangent_cone_profiles() {
    let (d, g) = half_ball(128);
    let c = 0.7;
    let cone = sampled(&d, &g, move |x| c * x[0].abs() + x[1] * x[1]);
    let lambdas = [0.25, 0.125, 0.0625];
    let dirs = vec![vec![1.0], vec![-1.0]];
    for p in tangent_cone_profile(&cone, &dirs, &lambdas).unwrap() {
        assert!((p.gamma_hat - c).abs() < 1e-12, "{p:?}");
    }
    let u0 = ClosedForm::u0(2, 1.0);
    let f = sampled(&d, &g, move |x| u0.value(x));
    for p in tangent_cone_profile(&f, &dirs, &lambdas).unwrap() {
        assert!(p.gamma_hat.abs() < 0.01, "{p:?}");
    }
    let tiny = [g.spacing(), 0.1];
    assert!(matches!(
        tangent_cone_profile(&f, &dirs, &tiny),
        Err(LabError::Resolution(_))
    ));
}
