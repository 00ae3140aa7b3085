mod common;

use common::*;
use proptest::prelude::*;
use relucvx::matrix::{dot, norm1, norm2};
use relucvx::model::regularized_objective;
use relucvx::program::*;
use relucvx::solver::{check_point, solve_optimal};
use relucvx::trainer::recover_weights;
use relucvx::{Dataset, LossKind, Matrix, Task};

fn solve_value(program: &ConicProgram) -> f64 {
    solve_optimal(program, &settings()).unwrap().objective
}

fn one_point() -> Dataset {
    Dataset::new(Matrix::from_rows(&[vec![1.0]]).unwrap(), vec![1.0], Task::Binary).unwrap()
}

#[test]
fn hinge_variable_count() {
    for (n, d, ps) in [(1, 1, 1), (5, 3, 4), (12, 2, 7)] {
        let data = binary(&mut rng(n as u64), n, d);
        let pats = patterns(&data, ps, 0);
        let program = build_standard(&data, &pats, 0.1, LossKind::HINGE).unwrap();
        assert_eq!(program.var_count, pats.len() * (2 * d + 2) + n);
        program.validate().unwrap();
    }
}

#[test]
fn hinge_zero_point_objective_and_violation() {
    let data = binary(&mut rng(1), 6, 3);
    let pats = patterns(&data, 4, 0);
    let program = build_standard(&data, &pats, 0.1, LossKind::HINGE).unwrap();
    let (obj, viol) = check_point(&program, &vec![0.0; program.var_count]).unwrap();
    assert_eq!((obj, viol), (0.0, 1.0));
    let z = encode_solution(&program, &data, &vec![vec![0.0; 3]; pats.len()], &vec![vec![0.0; 3]; pats.len()]).unwrap();
    let (obj, viol) = check_point(&program, &z).unwrap();
    assert!((obj - 1.0).abs() < 1e-15 && viol == 0.0);
}

#[test]
fn single_point_optimum_matches_grid() {
    let data = one_point();
    let pats = [mask(&[1])];
    let beta = 0.1;
    let program = build_standard(&data, &pats, beta, LossKind::HINGE).unwrap();
    let oracle = grid_min(
        |p| {
            let (v, w) = (p[0], p[1]);
            if v < 0.0 || w < 0.0 {
                return f64::INFINITY;
            }
            (1.0 - (v - w)).max(0.0) + beta * (v.abs() + w.abs())
        },
        2,
        -3.0,
        3.0,
    );
    assert!((solve_value(&program) - oracle).abs() < 1e-4);
    assert!((oracle - 0.1).abs() < 1e-4);
}

fn robust_hinge_oracle(data: &Dataset, pats: &[relucvx::ActivationPattern], beta: f64, eps: f64, norm: PerturbationNorm, z: &[f64]) -> f64 {
    let d = data.d();
    let p = pats.len();
    let v: Vec<&[f64]> = (0..p).map(|i| &z[2 * i * d..(2 * i + 1) * d]).collect();
    let w: Vec<&[f64]> = (0..p).map(|i| &z[(2 * i + 1) * d..(2 * i + 2) * d]).collect();
    for (i, pat) in pats.iter().enumerate() {
        for (k, x) in data.x().iter_rows().enumerate() {
            let sign = pat.sign(k);
            for u in [v[i], w[i]] {
                if sign * dot(x, u) < eps * norm.dual_norm(u) {
                    return f64::INFINITY;
                }
            }
        }
    }
    let n = data.n();
    let mut loss = 0.0;
    for (k, x) in data.x().iter_rows().enumerate() {
        let mut g = vec![0.0; d];
        for (i, pat) in pats.iter().enumerate() {
            if pat.active(k) {
                for j in 0..d {
                    g[j] += v[i][j] - w[i][j];
                }
            }
        }
        loss += (1.0 - data.y()[k] * dot(x, &g) + eps * norm.dual_norm(&g)).max(0.0);
    }
    loss / n as f64 + beta * (0..p).map(|i| norm2(v[i]) + norm2(w[i])).sum::<f64>()
}

#[test]
fn robust_hinge_matches_grid_in_one_dimension() {
    let data = Dataset::new(Matrix::from_rows(&[vec![1.0], vec![-0.5]]).unwrap(), vec![1.0, -1.0], Task::Binary).unwrap();
    let pats = [mask(&[1, 0]), mask(&[0, 1])];
    let (beta, eps) = (0.05, 0.1);
    let program = build_hinge_robust(&data, &pats, beta, &RobustSpec::linf(eps)).unwrap();
    let oracle = grid_min(|z| robust_hinge_oracle(&data, &pats, beta, eps, PerturbationNorm::LInf, z), 4, -3.0, 3.0);
    let value = solve_value(&program);
    assert!((value - oracle).abs() < 1e-3, "{value} vs {oracle}");
}

#[test]
fn l2_ball_matches_grid_with_one_pattern() {
    let data = Dataset::new(
        Matrix::from_rows(&[vec![1.0, 0.3], vec![0.8, -0.4], vec![-0.2, 1.0]]).unwrap(),
        vec![1.0, -1.0, 1.0],
        Task::Binary,
    )
    .unwrap();
    let pats = [mask(&[1, 1, 0])];
    let (beta, eps) = (0.05, 0.1);
    let spec = RobustSpec {
        eps,
        norm: PerturbationNorm::L2,
    };
    let program = build_lp_robust(&data, &pats, beta, &spec).unwrap();
    let oracle = grid_min(|z| robust_hinge_oracle(&data, &pats, beta, eps, PerturbationNorm::L2, z), 4, -3.0, 3.0);
    let value = solve_value(&program);
    assert!((value - oracle).abs() < 1e-3, "{value} vs {oracle}");
}

#[test]
fn hinge_builder_rejects_other_norms_and_regression() {
    let data = binary(&mut rng(2), 4, 2);
    let pats = patterns(&data, 2, 0);
    let l2 = RobustSpec {
        eps: 0.1,
        norm: PerturbationNorm::L2,
    };
    assert!(build_hinge_robust(&data, &pats, 0.1, &l2).is_err());
    let reg = regression(&mut rng(2), 4, 2);
    assert!(build_lp_robust(&reg, &pats, 0.1, &RobustSpec::linf(0.1)).is_err());
    assert!(build_standard(&reg, &pats, 0.1, LossKind::HINGE).is_err());
    assert!(build_standard(&data, &[], 0.1, LossKind::HINGE).is_err());
}

#[test]
fn linf_builders_are_identical() {
    let data = binary(&mut rng(3), 7, 3);
    let pats = patterns(&data, 5, 1);
    let spec = RobustSpec::linf(0.05);
    assert_eq!(
        build_hinge_robust(&data, &pats, 0.1, &spec).unwrap(),
        build_lp_robust(&data, &pats, 0.1, &spec).unwrap()
    );
}

#[test]
fn zero_radius_agrees_with_standard_for_every_norm() {
    for case in 0..5 {
        let mut r = rng(100 + case);
        let data = binary(&mut r, 8, 3);
        let pats = patterns(&data, 6, case);
        let standard = solve_value(&build_standard(&data, &pats, 0.05, LossKind::HINGE).unwrap());
        for norm in [PerturbationNorm::L1, PerturbationNorm::L2, PerturbationNorm::LInf] {
            let robust = solve_value(&build_lp_robust(&data, &pats, 0.05, &RobustSpec { eps: 0.0, norm }).unwrap());
            assert!((robust - standard).abs() <= 1e-6 * (1.0 + standard.abs()), "{norm:?}: {robust} vs {standard}");
        }
        let reg = regression(&mut r, 8, 3);
        let pats = patterns(&reg, 6, case);
        let standard = solve_value(&build_standard(&reg, &pats, 0.05, LossKind::Squared).unwrap());
        let robust = solve_value(&build_squared_robust(&reg, &pats, 0.05, &RobustSpec::linf(0.0)).unwrap());
        assert!((robust - standard).abs() <= 1e-6 * (1.0 + standard.abs()));
    }
}

#[test]
fn squared_zero_targets_have_zero_optimum() {
    let x = matrix(&mut rng(4), 5, 2);
    let data = Dataset::new(x, vec![0.0; 5], Task::Regression).unwrap();
    let pats = patterns(&data, 3, 0);
    let program = build_squared_robust(&data, &pats, 0.1, &RobustSpec::linf(0.0)).unwrap();
    let result = solve_optimal(&program, &settings()).unwrap();
    assert!(result.objective.abs() < 1e-7);
    let zero = encode_solution(&program, &data, &vec![vec![0.0; 2]; pats.len()], &vec![vec![0.0; 2]; pats.len()]).unwrap();
    assert_eq!(check_point(&program, &zero).unwrap(), (0.0, 0.0));
}

fn span(program: &ConicProgram, kind: SpanKind) -> &Span {
    program.spans(kind).next().unwrap()
}

#[test]
fn squared_epigraph_replays_at_optimum() {
    for case in 0..5 {
        let data = regression(&mut rng(200 + case), 9, 3);
        let pats = patterns(&data, 5, case);
        let eps = 0.05 * case as f64;
        let program = build_squared_robust(&data, &pats, 0.01, &RobustSpec::linf(eps)).unwrap();
        let result = solve_optimal(&program, &settings()).unwrap();
        let sol = decode_solution(&program, &result.primal).unwrap();
        let a = result.primal[span(&program, SpanKind::EpiA).start];
        let zs = span(&program, SpanKind::EpiZ);
        let z = &result.primal[zs.start..zs.start + zs.len];
        let preds = sol.predictions(data.x());
        let mut half_sq = 0.0;
        for k in 0..data.n() {
            let r = (preds[k] - data.y()[k]).abs() + eps * norm1(&sol.effective_direction(k));
            assert!(z[k] >= r - 1e-8, "z_{k} = {} below {r}", z[k]);
            half_sq += 0.5 * r * r;
        }
        assert!(z[data.n()] >= (2.0 * a - 0.25).abs() - 1e-8);
        assert!(norm2(z) <= 2.0 * a + 0.25 + 1e-8);
        assert!((a - half_sq).abs() <= 1e-8 * (1.0 + a), "a = {a}, replay {half_sq}");
        if eps == 0.0 {
            let weights = recover_weights(&sol, 1e-10);
            let direct = regularized_objective(&weights, &data, 0.01, LossKind::Squared).unwrap();
            assert!((direct - result.objective).abs() <= 1e-6 * (1.0 + result.objective));
        }
    }
}

#[test]
fn decoded_robust_solutions_hold_at_every_vertex() {
    for case in 0..5 {
        let data = binary(&mut rng(300 + case), 10, 3);
        let pats = patterns(&data, 6, case);
        let eps = 0.1;
        let program = build_hinge_robust(&data, &pats, 0.01, &RobustSpec::linf(eps)).unwrap();
        let sol = decode_solution(&program, &solve_optimal(&program, &settings()).unwrap().primal).unwrap();
        for (i, pat) in sol.patterns.iter().enumerate() {
            for (k, x) in data.x().iter_rows().enumerate() {
                for u in [&sol.v[i], &sol.w[i]] {
                    let closed = pat.sign(k) * dot(x, u) - eps * norm1(u);
                    assert!(closed >= -1e-7, "closed form {closed}");
                    assert!(vertex_min(x, pat.sign(k), u, eps) >= -1e-7);
                }
            }
        }
    }
}

#[test]
fn decode_round_trip_and_objective_replay() {
    let data = binary(&mut rng(5), 6, 2);
    let pats = patterns(&data, 3, 0);
    let program = build_hinge_robust(&data, &pats, 0.2, &RobustSpec::linf(0.1)).unwrap();
    assert_eq!(decode_solution(&program, &vec![0.0; program.var_count]).unwrap().group_norm_sum(), 0.0);
    assert!(decode_solution(&program, &[0.0]).is_err());
    let mut r = rng(6);
    let v: Vec<Vec<f64>> = (0..pats.len()).map(|_| normals(&mut r, 2)).collect();
    let w: Vec<Vec<f64>> = (0..pats.len()).map(|_| normals(&mut r, 2)).collect();
    let z = encode_solution(&program, &data, &v, &w).unwrap();
    let sol = decode_solution(&program, &z).unwrap();
    assert_eq!((sol.v.clone(), sol.w.clone()), (v, w));
    let replay = relucvx::attacks::surrogate_inner_max_value(&sol, &data, 0.1, Some(0.2)).unwrap();
    assert!((replay - sol.objective).abs() <= 1e-10 * (1.0 + replay.abs()));
}

#[test]
fn json_round_trip() {
    let data = regression(&mut rng(7), 5, 2);
    let pats = patterns(&data, 3, 0);
    let program = build_squared_robust(&data, &pats, 0.1, &RobustSpec::linf(0.2)).unwrap();
    assert_eq!(ConicProgram::from_json(&program.to_json().unwrap()).unwrap(), program);
}

#[test]
fn optimum_nondecreasing_in_radius() {
    let data = binary(&mut rng(8), 10, 2);
    let pats = patterns(&data, 6, 0);
    let mut last = f64::NEG_INFINITY;
    for eps in [0.0, 0.05, 0.1, 0.2, 0.4] {
        let value = solve_value(&build_hinge_robust(&data, &pats, 0.01, &RobustSpec::linf(eps)).unwrap());
        assert!(value >= last - 2e-8, "eps {eps}: {value} < {last}");
        last = value;
    }
    let reg = regression(&mut rng(9), 10, 2);
    let mut last = f64::NEG_INFINITY;
    for eps in [0.0, 0.05, 0.1, 0.2] {
        let value = solve_value(&build_squared_robust(&reg, &pats, 0.01, &RobustSpec::linf(eps)).unwrap());
        assert!(value >= last - 2e-8 * (1.0 + value.abs()));
        last = value;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn layout_spans_are_disjoint_and_in_range(seed in 0u64..10_000, n in 1usize..8, d in 1usize..4, ps in 1usize..5, robust in any::<bool>()) {
        let mut r = rng(seed);
        let data = binary(&mut r, n, d);
        let pats = patterns(&data, ps, seed);
        let program = if robust {
            build_hinge_robust(&data, &pats, 0.1, &RobustSpec::linf(0.1)).unwrap()
        } else {
            build_standard(&data, &pats, 0.1, LossKind::HINGE).unwrap()
        };
        let mut owner = vec![false; program.var_count];
        for s in &program.layout {
            for j in s.start..s.start + s.len {
                prop_assert!(j < program.var_count);
                prop_assert!(!owner[j]);
                owner[j] = true;
            }
            if matches!(s.kind, SpanKind::V | SpanKind::W) {
                prop_assert_eq!(s.len, d);
            }
        }
        prop_assert!(program.nonneg.triplets.iter().chain(&program.soc.triplets).all(|t| t.col < program.var_count));
    }

    #[test]
    fn encoded_points_are_feasible_when_constraints_hold(seed in 0u64..10_000, scale in 0.0f64..2.0) {
        // Scaling the patterns' own witness directions keeps every pattern constraint satisfied.
        let mut r = rng(seed);
        let data = regression(&mut r, 6, 2);
        let set = relucvx::patterns::sample_standard(data.x(), &relucvx::patterns::SamplerConfig::standard(3, seed)).unwrap();
        let v: Vec<Vec<f64>> = set.witnesses.iter().map(|w| w.direction.iter().map(|a| scale * a).collect()).collect();
        let w = vec![vec![0.0; 2]; v.len()];
        let program = build_squared_robust(&data, &set.patterns, 0.1, &RobustSpec::linf(0.0)).unwrap();
        let z = encode_solution(&program, &data, &v, &w).unwrap();
        let (obj, viol) = check_point(&program, &z).unwrap();
        prop_assert!(viol <= 1e-12);
        let sol = decode_solution(&program, &z).unwrap();
        let preds = sol.predictions(data.x());
        let half_sq: f64 = preds.iter().zip(data.y()).map(|(p, y)| 0.5 * (p - y) * (p - y)).sum();
        prop_assert!((obj - half_sq - 0.1 * sol.group_norm_sum()).abs() <= 1e-10 * (1.0 + obj));
    }
}
