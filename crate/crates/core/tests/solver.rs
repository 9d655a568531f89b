use malab_core::analytic::ClosedForm;
use malab_core::fit::fit_loglog;
use malab_core::solver::{
    discrete_ma_operator, residual_report, solve_dirichlet, solve_eigen_with, EigenOptions,
    RhsSpec, SolverConfig,
};
use malab_core::{build_field, ConvexDomain, Grid, LabError, NodeKind, ScalarField, Shape};
use proptest::prelude::*;

fn half_ball(cells: usize) -> (ConvexDomain, Grid) {
    let d = ConvexDomain::new(2, Shape::HalfBall { radius: 1.0 }).unwrap();
    let g = Grid::covering(&d, cells).unwrap();
    (d, g)
}

fn square() -> ConvexDomain {
    let vertices = vec![
        vec![-1.0, 0.0],
        vec![1.0, 0.0],
        vec![1.0, 2.0],
        vec![-1.0, 2.0],
    ];
    ConvexDomain::new(
        2,
        Shape::Polytope {
            vertices,
            faces: vec![],
        },
    )
    .unwrap()
}

fn quad(x: &[f64]) -> f64 {
    0.5 * x.iter().map(|v| v * v).sum::<f64>()
}

fn sup_error(f: &ScalarField, exact: impl Fn(&[f64]) -> f64) -> f64 {
    f.layout()
        .interior_nodes()
        .map(|i| (f.value(i) - exact(&f.grid().coords(i))).abs())
        .fold(0.0, f64::max)
}

#[test]
fn operator_on_quadratic_is_one_everywhere() {
    let (d, g) = half_ball(32);
    let f = build_field(&d, &g, quad, quad).unwrap();
    let cfg = SolverConfig::default();
    for i in f.layout().interior_nodes() {
        let v = discrete_ma_operator(&f, i, &cfg).unwrap();
        assert!((v - 1.0).abs() < 1e-9, "node {:?}: {v}", g.coords(i));
    }
}

#[test]
fn operator_on_u0_recovers_normal_coordinate() {
    let (d, g) = half_ball(64);
    let u0 = ClosedForm::u0(2, 1.0);
    let f = build_field(&d, &g, move |x| u0.value(x), move |x| u0.value(x)).unwrap();
    let idx = g.node_at(&[0.0, 0.25]).unwrap();
    let h = g.spacing();
    for width in [2, 3] {
        let cfg = SolverConfig {
            stencil_width: width,
            ..Default::default()
        };
        let v = discrete_ma_operator(&f, idx, &cfg).unwrap();
        assert!((v - 0.25).abs() <= h * h, "width {width}: {v}");
    }
}

#[test]
fn operator_clamps_saddles_to_zero() {
    let (d, g) = half_ball(32);
    let saddle = |x: &[f64]| 0.5 * (x[0] * x[0] - x[1] * x[1]);
    let f = build_field(&d, &g, saddle, saddle).unwrap();
    let idx = g.node_at(&[0.0, 0.5]).unwrap();
    assert_eq!(
        discrete_ma_operator(&f, idx, &SolverConfig::default()).unwrap(),
        0.0
    );
}

#[test]
fn operator_rejects_non_interior_nodes() {
    let (d, g) = half_ball(32);
    let f = build_field(&d, &g, quad, quad).unwrap();
    let b = (0..g.len())
        .find(|&i| f.kinds()[i] == NodeKind::Boundary)
        .unwrap();
    assert!(matches!(
        discrete_ma_operator(&f, b, &SolverConfig::default()),
        Err(LabError::Input(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn operator_is_monotone_in_neighbour_values(
        seed in 0u64..10_000,
        dx in -2i64..=2,
        dy in -2i64..=2,
        bump in 1e-4f64..0.5,
    ) {
        prop_assume!(dx != 0 || dy != 0);
        let (d, g) = half_ball(32);
        let noise = move |x: &[f64]| {
            let k = ((x[0] * 977.0 + x[1] * 613.0 + seed as f64).sin() * 43758.5453).fract();
            quad(x) + 1e-3 * k
        };
        let f = build_field(&d, &g, noise, quad).unwrap();
        let cfg = SolverConfig::default();
        let centre = g.node_at(&[0.0, 0.5]).unwrap();
        let nb = g.offset(centre, &[dx, dy]).unwrap();
        let before = discrete_ma_operator(&f, centre, &cfg).unwrap();
        let mut values = f.values().to_vec();
        values[nb] += bump;
        let raised = ScalarField::from_parts(f.layout().clone(), values, f.cuts().to_vec())
            .unwrap()
            .with_trace(std::sync::Arc::new(quad));
        let after = discrete_ma_operator(&raised, centre, &cfg).unwrap();
        prop_assert!(after >= before, "{after} < {before}");
    }
}

#[test]
fn alpha_zero_quadratic_on_square_is_recovered() {
    let d = square();
    let g = Grid::covering(&d, 32).unwrap();
    let cfg = SolverConfig {
        tol_residual: 1e-10,
        ..Default::default()
    };
    let (f, rep) = solve_dirichlet(&d, &g, &RhsSpec::degenerate(0.0), quad, &cfg).unwrap();
    assert!(rep.converged);
    assert!(rep.convexity_flag);
    let h = g.spacing();
    let err = sup_error(&f, quad);
    assert!(err <= 5.0 * h * h, "error {err}");
}

#[test]
fn u0_problem_converges_at_first_order_or_better() {
    let u0 = ClosedForm::u0(2, 1.0);
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for cells in [32, 64, 128] {
        let (d, g) = half_ball(cells);
        let cfg = SolverConfig {
            tol_residual: 1e-10,
            ..Default::default()
        };
        let (f, rep) = solve_dirichlet(
            &d,
            &g,
            &RhsSpec::half_space_power(2, 1.0),
            move |x| u0.value(x),
            &cfg,
        )
        .unwrap();
        assert!(rep.converged, "{cells}: {rep:?}");
        assert!(rep.residual_sup <= cfg.tol_residual);
        hs.push(g.spacing());
        errs.push(sup_error(&f, |x| u0.value(x)));
    }
    let slope = fit_loglog(&hs, &errs).unwrap().slope;
    assert!(slope >= 0.8, "slope {slope}, errors {errs:?}");
}

#[test]
fn negative_rhs_is_input_error() {
    let (d, g) = half_ball(16);
    let rhs = RhsSpec::degenerate_with(1.0, |x| if x[0] > 0.5 { -1.0 } else { 1.0 });
    let out = solve_dirichlet(&d, &g, &rhs, quad, &SolverConfig::default());
    assert!(matches!(out, Err(LabError::Input(_))));
}

#[test]
fn ordered_boundary_data_give_ordered_solutions() {
    let (d, g) = half_ball(32);
    let cfg = SolverConfig {
        tol_residual: 1e-10,
        ..Default::default()
    };
    let rhs = RhsSpec::degenerate(1.0);
    let (lo, _) = solve_dirichlet(&d, &g, &rhs, quad, &cfg).unwrap();
    let upper = |x: &[f64]| quad(x) + 0.05 + 0.1 * x[1] + 0.02 * x[0] * x[0];
    let (hi, _) = solve_dirichlet(&d, &g, &rhs, upper, &cfg).unwrap();
    for i in lo.layout().interior_nodes() {
        assert!(lo.value(i) <= hi.value(i) + 10.0 * cfg.tol_residual);
    }
}

#[test]
fn radial_problem_is_invariant_under_quarter_turns() {
    let d = ConvexDomain::new(
        2,
        Shape::Ball {
            center: vec![0.0, 1.0],
            radius: 1.0,
        },
    )
    .unwrap();
    let g = Grid::covering(&d, 32).unwrap();
    let cfg = SolverConfig {
        tol_residual: 1e-13,
        ..Default::default()
    };
    let centred = |x: &[f64]| 0.5 * (x[0] * x[0] + (x[1] - 1.0).powi(2));
    let (f, rep) = solve_dirichlet(&d, &g, &RhsSpec::degenerate(1.0), centred, &cfg).unwrap();
    assert!(rep.converged);
    for i in f.layout().interior_nodes() {
        let x = g.coords(i);
        let rotated = [-(x[1] - 1.0), 1.0 + x[0]];
        let j = g.node_at(&rotated).unwrap();
        assert!((f.value(i) - f.value(j)).abs() < 1e-9, "{x:?}");
    }
}

#[test]
fn residual_of_zero_field_is_the_rhs() {
    let (d, g) = half_ball(32);
    let f = build_field(&d, &g, |_| 0.0, |_| 0.0).unwrap();
    let rep = residual_report(&f, &RhsSpec::degenerate(0.0), &SolverConfig::default()).unwrap();
    assert_eq!(rep.max_value, 1.0);
    assert_eq!(rep.context["sup"], 1.0);
}

#[test]
fn residual_of_sampled_u0_is_small_away_from_the_boundary() {
    let u0 = ClosedForm::u0(2, 1.0);
    let rhs = RhsSpec::half_space_power(2, 1.0);
    let mut prev = f64::INFINITY;
    for cells in [32, 64] {
        let (d, g) = half_ball(cells);
        let f = build_field(&d, &g, move |x| u0.value(x), move |x| u0.value(x)).unwrap();
        let rep = residual_report(&f, &rhs, &SolverConfig::default()).unwrap();
        assert!(rep.is_finite());
        let h = g.spacing();
        let cfg = SolverConfig::default();
        let away = f
            .layout()
            .interior_nodes()
            .filter(|&i| {
                let x = g.coords(i);
                x[1] >= 0.25 && d.boundary_distance(&x).unwrap() >= 4.0 * h
            })
            .map(|i| (discrete_ma_operator(&f, i, &cfg).unwrap() - g.coords(i)[1]).abs())
            .fold(0.0, f64::max);
        assert!(away <= 10.0 * h * h, "{cells}: {away}");
        assert!(rep.max_value < prev);
        prev = rep.max_value;
    }
}

#[test]
fn converged_solve_meets_its_tolerance() {
    let (d, g) = half_ball(32);
    let cfg = SolverConfig {
        tol_residual: 1e-9,
        ..Default::default()
    };
    let rhs = RhsSpec::degenerate(0.5);
    let (f, rep) = solve_dirichlet(&d, &g, &rhs, quad, &cfg).unwrap();
    let res = residual_report(&f, &rhs, &cfg).unwrap();
    assert!(rep.converged);
    assert!(res.max_value <= cfg.tol_residual, "{}", res.max_value);
}

#[test]
fn eigenvalue_ignores_the_scale_of_the_initial_guess() {
    let d = ConvexDomain::new(
        2,
        Shape::Ball {
            center: vec![0.0, 1.0],
            radius: 1.0,
        },
    )
    .unwrap();
    let g = Grid::covering(&d, 24).unwrap();
    let cfg = SolverConfig {
        tol_residual: 1e-10,
        ..Default::default()
    };
    let guess: Vec<f64> = (0..g.len())
        .map(|i| {
            let x = g.coords(i);
            if d.contains(&x) {
                -d.boundary_distance(&x).unwrap()
            } else {
                0.0
            }
        })
        .collect();
    let opts = EigenOptions {
        initial: Some(guess.clone()),
        ..Default::default()
    };
    let a = solve_eigen_with(&d, &g, 2, &cfg, &opts).unwrap();
    let scaled = EigenOptions {
        initial: Some(guess.iter().map(|v| 10.0 * v).collect()),
        ..Default::default()
    };
    let b = solve_eigen_with(&d, &g, 2, &cfg, &scaled).unwrap();
    assert!(a.report.converged && b.report.converged);
    assert!(a.lambda > 0.0);
    assert!((a.lambda - b.lambda).abs() <= opts.tol_lambda * a.lambda);
    assert!(a
        .field
        .values()
        .iter()
        .zip(b.field.values())
        .all(|(p, q)| (p - q).abs() < 1e-9 || p.is_nan()));
    let min = a
        .field
        .layout()
        .interior_nodes()
        .map(|i| a.field.value(i))
        .fold(0.0, f64::min);
    assert!((min + 1.0).abs() < 1e-12);
}
