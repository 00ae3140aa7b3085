use super::*;
use crate::program::{ProgramBuilder, SpanKind};

fn lp_x_ge_one() -> ConicProgram {
    let mut b = ProgramBuilder::new();
    let x = b.add_span(SpanKind::Free, None, 1);
    b.add_objective(x, 1.0);
    b.add_nonneg(&[(x, 1.0)], -1.0);
    b.finish()
}

fn norm_epigraph() -> ConicProgram {
    let mut b = ProgramBuilder::new();
    let t = b.add_span(SpanKind::Free, None, 1);
    b.add_objective(t, 1.0);
    b.add_soc((&[(t, 1.0)], 0.0), &[(vec![], 3.0), (vec![], 4.0)]);
    b.finish()
}

#[test]
fn scalar_lower_bound() {
    let r = solve(&lp_x_ge_one(), &SolveSettings::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.objective - 1.0).abs() < 1e-8);
    assert!((r.primal[0] - 1.0).abs() < 1e-8);
}

#[test]
fn euclidean_norm_epigraph() {
    let r = solve(&norm_epigraph(), &SolveSettings::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.objective - 5.0).abs() < 1e-8, "{}", r.objective);
}

#[test]
fn operator_splitting_agrees_on_small_programs() {
    let settings = SolveSettings {
        algorithm: Algorithm::OperatorSplitting,
        tol_gap: 1e-9,
        tol_feas: 1e-9,
        ..SolveSettings::default()
    };
    for (program, expected) in [(lp_x_ge_one(), 1.0), (norm_epigraph(), 5.0)] {
        let r = solve(&program, &settings).unwrap();
        assert!((r.objective - expected).abs() < 1e-6, "{}", r.objective);
    }
}

#[test]
fn infeasible_program_is_detected() {
    let mut b = ProgramBuilder::new();
    let x = b.add_span(SpanKind::Free, None, 1);
    b.add_objective(x, 1.0);
    b.add_nonneg(&[(x, 1.0)], -2.0);
    b.add_nonneg(&[(x, -1.0)], 1.0);
    let r = solve(&b.finish(), &SolveSettings::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Infeasible);
}

#[test]
fn unbounded_program_is_detected() {
    let mut b = ProgramBuilder::new();
    let x = b.add_span(SpanKind::Free, None, 1);
    b.add_objective(x, -1.0);
    b.add_nonneg(&[(x, 1.0)], 0.0);
    let r = solve(&b.finish(), &SolveSettings::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Unbounded);
}

#[test]
fn check_point_reports_violation() {
    let p = lp_x_ge_one();
    assert_eq!(check_point(&p, &[0.25]).unwrap(), (0.25, 0.75));
    assert!(check_point(&p, &[0.0, 1.0]).is_err());
    let q = norm_epigraph();
    let (_, v) = check_point(&q, &[4.0]).unwrap();
    assert!((v - 1.0).abs() < 1e-15);
}
