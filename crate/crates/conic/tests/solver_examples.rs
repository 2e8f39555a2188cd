use hfopf_conic::{check_certificate, solve, ConicProblem, Constraint, SolveStatus, SolverSettings, Term};
use nalgebra::DMatrix;

fn unit(d: usize, i: usize, j: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d, d);
    if i == j {
        m[(i, i)] = 1.0;
    } else {
        m[(i, j)] = 0.5;
        m[(j, i)] = 0.5;
    }
    m
}

fn eq(label: &str, rhs: f64, terms: Vec<(usize, DMatrix<f64>)>) -> Constraint {
    Constraint {
        label: label.into(),
        rhs,
        terms: terms.into_iter().map(|(block, matrix)| Term { block, matrix }).collect(),
    }
}

fn scalar(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

#[test]
fn trace_minimization_with_fixed_corner() {
    let mut p = ConicProblem::new(vec![2]);
    p.objective[0] = DMatrix::identity(2, 2);
    p.constraints.push(eq("x11", 1.0, vec![(0, unit(2, 0, 0))]));
    let sol = solve(&p, &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.objective_primal - 1.0).abs() < 1e-7);
    let x = &sol.primal_blocks[0];
    assert!((x[(0, 0)] - 1.0).abs() < 1e-7);
    assert!(x[(1, 1)].abs() < 1e-7 && x[(0, 1)].abs() < 1e-7);
    assert!(check_certificate(&p, &sol).passed());
}

#[test]
fn lp_as_diagonal_sdp() {
    let mut p = ConicProblem::new(vec![1, 1]);
    p.objective[0] = scalar(1.0);
    p.objective[1] = scalar(2.0);
    p.constraints.push(eq("simplex", 1.0, vec![(0, scalar(1.0)), (1, scalar(1.0))]));
    let sol = solve(&p, &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.objective_primal - 1.0).abs() < 1e-7);
    assert!((sol.primal_blocks[0][(0, 0)] - 1.0).abs() < 1e-7);
    assert!(sol.primal_blocks[1][(0, 0)].abs() < 1e-7);
    assert!(sol.residuals.gap <= 1e-8);
}

#[test]
fn contradictory_equalities_are_primal_infeasible() {
    let mut p = ConicProblem::new(vec![2]);
    p.constraints.push(eq("x11=1", 1.0, vec![(0, unit(2, 0, 0))]));
    p.constraints.push(eq("x11=2", 2.0, vec![(0, unit(2, 0, 0))]));
    let sol = solve(&p, &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::PrimalInfeasible);
    let report = check_certificate(&p, &sol);
    assert!(report.passed(), "{report}");
}

#[test]
fn negative_trace_is_primal_infeasible_via_embedding() {
    let mut p = ConicProblem::new(vec![2, 1]);
    p.objective[0] = DMatrix::identity(2, 2);
    p.constraints.push(eq("trace", -1.0, vec![(0, DMatrix::identity(2, 2))]));
    p.constraints.push(eq("s", 1.0, vec![(1, scalar(1.0))]));
    let sol = solve(&p, &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::PrimalInfeasible);
    assert!(sol.dependent_rows.is_empty());
    let report = check_certificate(&p, &sol);
    assert!(report.passed(), "{report}");
}

#[test]
fn unbounded_objective_is_dual_infeasible() {
    // min -x s.t. x - s = 0, x, s >= 0: ray x = s = t.
    let mut p = ConicProblem::new(vec![1, 1]);
    p.objective[0] = scalar(-1.0);
    p.constraints.push(eq("x-s", 0.0, vec![(0, scalar(1.0)), (1, scalar(-1.0))]));
    let sol = solve(&p, &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::DualInfeasible);
    let report = check_certificate(&p, &sol);
    assert!(report.passed(), "{report}");
}

#[test]
fn corrupted_primal_is_flagged() {
    let mut p = ConicProblem::new(vec![2]);
    p.objective[0] = DMatrix::identity(2, 2);
    p.constraints.push(eq("x11", 1.0, vec![(0, unit(2, 0, 0))]));
    let mut sol = solve(&p, &SolverSettings::default()).unwrap();
    sol.primal_blocks[0][(0, 0)] += 1e-3;
    let report = check_certificate(&p, &sol);
    assert!(!report.passed());
    assert!(report.failures().iter().any(|c| c.name == "primal residual"));
}

#[test]
fn redundant_rows_are_reported_and_solved() {
    let mut p = ConicProblem::new(vec![2]);
    p.objective[0] = DMatrix::identity(2, 2);
    p.constraints.push(eq("x11", 1.0, vec![(0, unit(2, 0, 0))]));
    p.constraints.push(eq("2 x11", 2.0, vec![(0, unit(2, 0, 0) * 2.0)]));
    let sol = solve(&p, &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert_eq!(sol.dependent_rows, vec![1]);
    assert!(check_certificate(&p, &sol).passed());
}

#[test]
fn max_iter_is_reported() {
    let mut p = ConicProblem::new(vec![3]);
    p.objective[0] = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0]);
    p.constraints.push(eq("tr", 1.0, vec![(0, DMatrix::identity(3, 3))]));
    let settings = SolverSettings { max_iter: 2, ..SolverSettings::default() };
    let sol = solve(&p, &settings).unwrap();
    assert_eq!(sol.status, SolveStatus::MaxIter);
    assert_eq!(sol.iterations, 2);
}

#[test]
fn min_eigenvalue_problem() {
    // min <C,X> s.t. tr X = 1 has optimum lambda_min(C) = 2 - sqrt(2).
    let mut p = ConicProblem::new(vec![3]);
    p.objective[0] = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0]);
    p.constraints.push(eq("tr", 1.0, vec![(0, DMatrix::identity(3, 3))]));
    let sol = solve(&p, &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    let expect = 2.0 - 2.0_f64.sqrt();
    assert!((sol.objective_primal - expect).abs() < 1e-7 * (1.0 + expect));
    assert!(check_certificate(&p, &sol).passed());
}

#[test]
fn rejects_bad_settings() {
    let mut p = ConicProblem::new(vec![1]);
    p.constraints.push(eq("x", 1.0, vec![(0, scalar(1.0))]));
    let s = SolverSettings { tol_gap: 0.0, ..SolverSettings::default() };
    assert!(solve(&p, &s).is_err());
    let s = SolverSettings { max_iter: 0, ..SolverSettings::default() };
    assert!(solve(&p, &s).is_err());
}
