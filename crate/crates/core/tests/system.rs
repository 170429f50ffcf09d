use approx::assert_abs_diff_eq;
use bdie_core::coefficient::CoefficientField;
use bdie_core::geometry::CurveParametrization;
use bdie_core::system::{
    assemble_system, evaluate_u_field, solve, DirichletProblem, Discretization, Discretized, SolveMethod,
    SolverOptions,
};
use bdie_core::verification::{manufactured_case, mean_zero_single_layer_singular_values, CaseParams};
use bdie_core::{BdieError, Vec2};
use std::sync::Arc;

fn laplace_problem(dirichlet: fn(Vec2) -> f64, n: usize) -> DirichletProblem {
    DirichletProblem {
        curve: CurveParametrization::unit_circle(),
        field: CoefficientField::constant(1.0).unwrap(),
        source: Arc::new(|_| 0.0),
        dirichlet: Arc::new(dirichlet),
        disc: Discretization::new(n, 3.0, 0.1),
        compatibility_tol: 1e-8,
    }
}

#[test]
fn sin2_mode_gives_scaled_flux() {
    let problem = laplace_problem(|x| (2.0 * x.angle()).sin(), 64);
    let disc = Discretized::new(&problem).unwrap();
    let sol = solve(&assemble_system(&problem, &disc).unwrap(), &SolverOptions::default()).unwrap();
    for (p, t) in sol.psi.iter().zip(&disc.grid.t) {
        assert_abs_diff_eq!(*p, 2.0 * (2.0 * t).sin(), epsilon = 1e-10);
    }
    assert!(sol.lambda.abs() < 1e-12);
}

#[test]
fn zero_data_gives_zero_solution() {
    let case = manufactured_case("zero", &CaseParams::default()).unwrap();
    let problem = case.problem(&CurveParametrization::unit_circle(), Discretization::new(32, 4.0, 0.2), 1e-8);
    let disc = Discretized::new(&problem).unwrap();
    let sys = assemble_system(&problem, &disc).unwrap();
    let sol = solve(&sys, &SolverOptions::default()).unwrap();
    let biggest = sol.u.iter().chain(&sol.psi).fold(0.0_f64, |m, v| m.max(v.abs()));
    assert!(biggest < 1e-14, "{biggest:e}");
}

#[test]
fn bump_dipole_direct_and_iterative_agree() {
    let case = manufactured_case("bump-dipole", &CaseParams::default()).unwrap();
    let problem = case.problem(&CurveParametrization::unit_circle(), Discretization::new(32, 5.5, 0.2), 1e-8);
    let disc = Discretized::new(&problem).unwrap();
    let sys = assemble_system(&problem, &disc).unwrap();
    let direct = solve(&sys, &SolverOptions::default()).unwrap();
    let iterative = solve(&sys, &SolverOptions { method: SolveMethod::Iterative, ..SolverOptions::default() }).unwrap();
    assert!(iterative.iterations > 0);
    for (a, b) in direct.psi.iter().zip(&iterative.psi) {
        assert_abs_diff_eq!(*a, *b, epsilon = 1e-9);
    }
    let exact = case.psi_exact(&disc.grid);
    let err = direct.psi.iter().zip(&exact).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(err < 1e-4, "{err:e}");
    assert!(direct.mean_psi < 1e-10);
}

#[test]
fn field_evaluation_matches_nodal_unknowns_and_decays() {
    let case = manufactured_case("bump-dipole", &CaseParams::default()).unwrap();
    let problem = case.problem(&CurveParametrization::unit_circle(), Discretization::new(64, 5.5, 0.1), 1e-8);
    let disc = Discretized::new(&problem).unwrap();
    let sol = solve(&assemble_system(&problem, &disc).unwrap(), &SolverOptions::default()).unwrap();
    for k in [0, disc.n_dom() / 2, disc.n_dom() - 1] {
        let y = disc.mesh.nodes[disc.unknowns[k]];
        let u = evaluate_u_field(&sol, &problem, &disc, y).unwrap();
        assert_abs_diff_eq!(u, sol.u[k], epsilon = 1e-9);
    }
    for r in [2.5, 10.0, 40.0] {
        let u = evaluate_u_field(&sol, &problem, &disc, Vec2::new(r, 0.0)).unwrap();
        assert_abs_diff_eq!(u, 1.0 / r, epsilon = 1e-5);
    }
    let inside = evaluate_u_field(&sol, &problem, &disc, Vec2::new(0.2, 0.1));
    assert!(matches!(inside, Err(BdieError::OutsideDomain { .. })));
}

#[test]
fn incompatible_source_is_rejected() {
    let mut problem = laplace_problem(|x| x.angle().cos(), 32);
    problem.source = Arc::new(|x: Vec2| (-x.norm_sq()).exp());
    let disc = Discretized::new(&problem).unwrap();
    let err = assemble_system(&problem, &disc).err().expect("rejected");
    assert_eq!(err.category(), bdie_core::ErrorCategory::Conditions);
}

#[test]
fn single_layer_restricted_to_mean_zero_has_fourier_spectrum() {
    let case = manufactured_case("laplace-dipole", &CaseParams::default()).unwrap();
    let problem = case.problem(&CurveParametrization::unit_circle(), Discretization::new(64, 3.0, 0.2), 1e-8);
    let disc = Discretized::new(&problem).unwrap();
    let s = mean_zero_single_layer_singular_values(&disc.ops, false).unwrap();
    assert_eq!(s.len(), 63);
    assert_abs_diff_eq!(s[0], 0.5, epsilon = 1e-8);
    assert_abs_diff_eq!(*s.last().unwrap(), 1.0 / 64.0, epsilon = 1e-8);
}
