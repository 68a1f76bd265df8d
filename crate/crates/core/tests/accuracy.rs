use std::f64::consts::PI;

use fracquench::fracops::{Grid, InitialProfile, ProblemSpec, SourceTerm};
use fracquench::linalg::inf_norm;
use fracquench::quenchlab::{milne_order, restrict_to_coarse};
use fracquench::{PadeStepper, SolverRoute};

/// Integrates a forced problem with fixed τ up to `t_end`.
fn integrate(spec: &ProblemSpec, intervals: usize, tau: f64, t_end: f64, route: SolverRoute) -> Vec<f64> {
    let grid = Grid::new(spec.a, intervals).unwrap();
    let mut stepper = PadeStepper::new(spec, &grid, route).unwrap();
    let mut state = stepper.initial_state();
    let steps = (t_end / tau).round() as usize;
    for _ in 0..steps {
        state = stepper.step(&state, tau).unwrap();
    }
    state.v
}

fn forced(sigma: f64, a: f64, g: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> ProblemSpec {
    let mut spec = ProblemSpec::kawarada(sigma, 1.0, a, 0.0);
    spec.kappa = 2.0;
    spec.source = SourceTerm::forcing(g);
    spec
}

#[test]
fn second_order_in_time_on_a_discrete_eigenvector() {
    // With σ = 2 the operator is the three-point Laplacian, so sin(x) on
    // [0, π] is an exact eigenvector; any error left is temporal.
    let intervals = 40;
    let h = PI / intervals as f64;
    let lambda = -4.0 * (0.5 * h).sin().powi(2) / (h * h);
    let mut spec = forced(2.0, PI, move |x, t| (-1.0 - lambda) * (-t).exp() * x.sin());
    spec.psi = InitialProfile::field(f64::sin);
    let grid = Grid::new(PI, intervals).unwrap();

    let errors: Vec<f64> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&tau| {
            let v = integrate(&spec, intervals, tau, 1.0, SolverRoute::Hessenberg);
            let e: Vec<f64> = v
                .iter()
                .zip(grid.interior())
                .map(|(vk, &x)| vk - (-1.0f64).exp() * x.sin())
                .collect();
            inf_norm(&e)
        })
        .collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 2.0).abs() < 0.1, "temporal order {order}, errors {errors:?}");
    }
}

#[test]
fn fractional_self_convergence_in_time() {
    let a = 2.0;
    let spec = forced(1.5, a, move |x, t| (PI * x / a).sin() * (2.0 * t).cos());
    let runs: Vec<Vec<f64>> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&tau| integrate(&spec, 50, tau, 1.0, SolverRoute::Hessenberg))
        .collect();
    let order = milne_order(&runs[0], &runs[1], &runs[2]);
    assert!((order - 2.0).abs() < 0.15, "order {order}");
}

#[test]
fn second_order_in_space_against_exact_solution() {
    let a = 2.0;
    let k = PI / a;
    let mut spec = forced(2.0, a, move |x, t| (k * k - 1.0) * (-t).exp() * (k * x).sin());
    spec.psi = InitialProfile::field(move |x| (k * x).sin());

    let tau = 5e-4;
    let t_end = 0.5;
    let levels = [20usize, 40, 80];
    let runs: Vec<Vec<f64>> = levels
        .iter()
        .map(|&l| integrate(&spec, l, tau, t_end, SolverRoute::DenseLu))
        .collect();

    let errors: Vec<f64> = levels
        .iter()
        .zip(&runs)
        .map(|(&l, v)| {
            let grid = Grid::new(a, l).unwrap();
            let e: Vec<f64> = v
                .iter()
                .zip(grid.interior())
                .map(|(vk, &x)| vk - (-t_end).exp() * (k * x).sin())
                .collect();
            inf_norm(&e)
        })
        .collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order > 1.9, "spatial order {order}, errors {errors:?}");
    }

    let mid = restrict_to_coarse(&runs[1], 2);
    let fine = restrict_to_coarse(&runs[2], 4);
    let order = milne_order(&runs[0], &mid, &fine);
    assert!(order > 1.9, "milne order {order}");
}

#[test]
fn solver_routes_agree() {
    let spec = ProblemSpec::kawarada(1.7, 1.0, 1.5, 0.4);
    let hess = integrate(&spec, 60, 1e-3, 0.2, SolverRoute::Hessenberg);
    let lu = integrate(&spec, 60, 1e-3, 0.2, SolverRoute::DenseLu);
    let diff: Vec<f64> = hess.iter().zip(&lu).map(|(x, y)| x - y).collect();
    assert!(inf_norm(&diff) < 1e-12 * inf_norm(&lu).max(1.0));
}
