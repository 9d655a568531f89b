use malab_core::{build_field, ConvexDomain, Grid, Shape};
use proptest::prelude::*;

fn domains() -> Vec<ConvexDomain> {
    let square = vec![
        vec![-1.0, 0.0],
        vec![1.0, 0.0],
        vec![1.0, 2.0],
        vec![-1.0, 2.0],
    ];
    vec![
        ConvexDomain::new(
            2,
            Shape::Ball {
                center: vec![0.0, 1.0],
                radius: 1.0,
            },
        )
        .unwrap(),
        ConvexDomain::new(2, Shape::HalfBall { radius: 1.0 }).unwrap(),
        ConvexDomain::new(
            2,
            Shape::Polytope {
                vertices: square,
                faces: vec![],
            },
        )
        .unwrap(),
        ConvexDomain::new(
            2,
            Shape::Superellipse {
                center: vec![0.0, 0.5],
                semi_axes: vec![1.0, 0.5],
                exponent: 4.0,
            },
        )
        .unwrap(),
        ConvexDomain::new(3, Shape::HalfBall { radius: 1.0 }).unwrap(),
    ]
}

/// Maps a point of the unit cube into the domain's bounding box.
fn in_box(d: &ConvexDomain, u: &[f64]) -> Vec<f64> {
    let (lo, hi) = d.bounding_box().unwrap();
    (0..d.dim())
        .map(|k| lo[k] + u[k] * (hi[k] - lo[k]))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn distance_is_one_lipschitz(which in 0usize..5, a in prop::array::uniform3(0.0f64..1.0), b in prop::array::uniform3(0.0f64..1.0)) {
        let d = &domains()[which];
        let (x, y) = (in_box(d, &a), in_box(d, &b));
        prop_assume!(d.contains(&x) && d.contains(&y));
        let gap: f64 = x.iter().zip(&y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let dx = d.boundary_distance(&x).unwrap();
        let dy = d.boundary_distance(&y).unwrap();
        prop_assert!((dx - dy).abs() <= gap + 1e-12);
    }

    #[test]
    fn midpoints_stay_inside(which in 0usize..5, a in prop::array::uniform3(0.0f64..1.0), b in prop::array::uniform3(0.0f64..1.0)) {
        let d = &domains()[which];
        let (x, y) = (in_box(d, &a), in_box(d, &b));
        prop_assume!(d.contains(&x) && d.contains(&y));
        let m: Vec<f64> = x.iter().zip(&y).map(|(p, q)| 0.5 * (p + q)).collect();
        prop_assert!(d.contains(&m));
    }

    #[test]
    fn hessian_of_quadratics_is_exact(c in prop::array::uniform6(-1.0f64..1.0)) {
        let d = ConvexDomain::new(2, Shape::HalfBall { radius: 1.0 }).unwrap();
        let g = Grid::covering(&d, 32).unwrap();
        let q = move |x: &[f64]| c[0] * x[0] * x[0] + c[1] * x[0] * x[1] + c[2] * x[1] * x[1] + c[3] * x[0] + c[4] * x[1] + c[5];
        let f = build_field(&d, &g, q, q).unwrap();
        let h = f.numerical_hessian(&[0.125, 0.5]).unwrap();
        prop_assert!((h[(0, 0)] - 2.0 * c[0]).abs() < 1e-9);
        prop_assert!((h[(0, 1)] - c[1]).abs() < 1e-9);
        prop_assert!((h[(1, 0)] - c[1]).abs() < 1e-9);
        prop_assert!((h[(1, 1)] - 2.0 * c[2]).abs() < 1e-9);
    }
}

#[test]
fn distance_along_the_inner_normal_follows_the_tangent_ball() {
    for d in domains() {
        let n = d.dim();
        let rho = d.tangent_ball_radius();
        let g = Grid::covering(&d, 64).unwrap();
        let nu = d.inner_normal();
        for k in 1..=20 {
            let t = rho * k as f64 / 20.0;
            let x: Vec<f64> = (0..n).map(|i| d.marked_point()[i] + t * nu[i]).collect();
            let dist = d.boundary_distance(&x).unwrap();
            assert!(dist <= t + 1e-12);
            assert!(
                dist >= t.min(2.0 * rho - t) - 10.0 * g.spacing(),
                "{x:?}: {dist}"
            );
        }
    }
}

#[test]
fn marked_point_region_lies_above_the_boundary_plane() {
    for d in domains() {
        let g = Grid::covering(&d, 32).unwrap();
        for i in 0..g.len() {
            let x = g.coords(i);
            if d.contains(&x)
                && x.iter()
                    .zip(d.marked_point())
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    < 0.25
            {
                assert!(x[d.dim() - 1] > -1e-12);
            }
        }
    }
}
