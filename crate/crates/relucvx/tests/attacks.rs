mod common;

use common::*;
use proptest::prelude::*;
use relucvx::attacks::*;
use relucvx::matrix::dot;
use relucvx::model::forward_row;
use relucvx::patterns::SamplerConfig;
use relucvx::trainer::train_adversarial;
use relucvx::{ConvexSolution, Dataset, LossKind, Matrix, NetworkWeights, Task};

fn random_net(seed: u64, m: usize, d: usize) -> NetworkWeights {
    let mut r = rng(seed);
    let hidden = (0..m).map(|_| normals(&mut r, d)).collect();
    NetworkWeights::new(hidden, normals(&mut r, m)).unwrap()
}

fn loss_at(w: &NetworkWeights, x: &[f64], y: f64, loss: LossKind) -> f64 {
    loss.sample_loss(forward_row(w, x), y)
}

#[test]
fn fgsm_single_neuron_hand_value() {
    let w = NetworkWeights::new(vec![vec![1.0, 0.0]], vec![1.0]).unwrap();
    let x = fgsm(&w, &[0.5, 0.2], 1.0, &AttackConfig::new(0.1, AttackKind::Fgsm), LossKind::HINGE).unwrap();
    assert_eq!(x, vec![0.4, 0.2]);
}

#[test]
fn zero_network_is_fixed_for_every_attack() {
    let w = NetworkWeights::empty();
    let x = [0.3, -1.2, 2.0];
    for kind in [AttackKind::Fgsm, AttackKind::Pgd, AttackKind::HingeClosedForm] {
        for loss in [LossKind::HINGE, LossKind::Squared] {
            let out = attack(&w, &x, 1.0, &AttackConfig::new(0.2, kind), loss).unwrap();
            assert_eq!(out, x);
        }
    }
}

#[test]
fn pgd_dominates_fgsm_for_a_single_neuron() {
    for case in 0..100 {
        let mut r = rng(1300 + case);
        let w = NetworkWeights::new(vec![vec![normal(&mut r)]], vec![normal(&mut r)]).unwrap();
        let x = [normal(&mut r)];
        let y = if case % 2 == 0 { 1.0 } else { -1.0 };
        let eps = 0.05 + 0.5 * normal(&mut r).abs();
        for loss in [LossKind::HINGE, LossKind::Squared] {
            let target = if loss.is_hinge() { y } else { normal(&mut r) };
            let f = fgsm(&w, &x, target, &AttackConfig::new(eps, AttackKind::Fgsm), loss).unwrap();
            let p = pgd(&w, &x, target, &AttackConfig::new(eps, AttackKind::Pgd), loss).unwrap();
            assert!(loss_at(&w, &p, target, loss) >= loss_at(&w, &f, target, loss) - 1e-12, "case {case}");
        }
    }
}

#[test]
fn squared_loss_gradient_sign_matches_finite_differences() {
    let h = 1e-6;
    let mut checked = 0;
    for case in 0..50 {
        let w = random_net(1400 + case, 5, 3);
        let mut r = rng(1500 + case);
        let x = normals(&mut r, 3);
        let y = normal(&mut r);
        if w.hidden.iter().any(|u| dot(&x, u).abs() < 1e-3) {
            continue;
        }
        let g = input_gradient(&w, &x, y, LossKind::Squared);
        for j in 0..3 {
            let (mut a, mut b) = (x.clone(), x.clone());
            a[j] += h;
            b[j] -= h;
            let fd = (loss_at(&w, &a, y, LossKind::Squared) - loss_at(&w, &b, y, LossKind::Squared)) / (2.0 * h);
            // The loss is ½(ŷ − y)², so fd is the gradient itself.
            if fd.abs() > 1e-6 {
                assert_eq!(fd.signum(), g[j].signum(), "case {case} coordinate {j}");
                checked += 1;
            }
        }
    }
    assert!(checked > 50);
}

#[test]
fn closed_form_delta_examples() {
    let mut sol = ConvexSolution::zeros(vec![mask(&[1])], 2, 0.0);
    sol.v[0] = vec![1.0, 0.0];
    sol.w[0] = vec![0.0, 2.0];
    let delta = hinge_worstcase_delta(&sol, &[1.0], 0.1, &[]).unwrap();
    assert_eq!(delta.row(0), &[-0.1, 0.1]);
    let zero = hinge_worstcase_delta(&sol, &[1.0], 0.0, &[]).unwrap();
    assert!(zero.as_slice().iter().all(|v| *v == 0.0));
    let frozen = hinge_worstcase_delta(&sol, &[1.0], 0.1, &[1]).unwrap();
    assert_eq!(frozen.row(0), &[-0.1, 0.0]);
}

#[test]
fn zero_solution_surrogate_is_one() {
    let data = binary(&mut rng(1600), 7, 3);
    let sol = ConvexSolution::zeros(vec![mask(&[1; 7])], 3, 0.0);
    assert_eq!(surrogate_inner_max_value(&sol, &data, 0.3, Some(0.5)).unwrap(), 1.0);
}

#[test]
fn surrogate_value_replays_the_solver_objective() {
    for seed in 0..4 {
        let data = binary(&mut rng(1700 + seed), 12, 3);
        let eps = 0.05 * (seed + 1) as f64;
        let model = train_adversarial(&data, 1e-3, eps, &SamplerConfig::adversarial(10, 10, 3, eps, seed), LossKind::HINGE, &settings()).unwrap();
        let value = surrogate_inner_max_value(&model.convex, &data, eps, Some(1e-3)).unwrap();
        assert!((value - model.meta.solve.objective).abs() <= 1e-7, "{value} vs {}", model.meta.solve.objective);
    }
}

#[test]
fn evaluation_of_the_zero_network() {
    let y = vec![1.0, 1.0, -1.0, 1.0, -1.0];
    let data = Dataset::new(matrix(&mut rng(1800), 5, 2), y, Task::Binary).unwrap();
    let e = evaluate(&NetworkWeights::empty(), &data, &AttackConfig::new(0.2, AttackKind::Pgd), LossKind::HINGE).unwrap();
    assert_eq!((e.clean, e.fgsm, e.pgd), (0.6, 0.6, 0.6));
    assert_eq!((e.clean_loss, e.pgd_loss), (1.0, 1.0));
}

#[test]
fn zero_radius_evaluation_equals_clean() {
    let w = random_net(1900, 6, 2);
    let data = regression(&mut rng(1901), 9, 2);
    let e = evaluate(&w, &data, &AttackConfig::new(0.0, AttackKind::Pgd), LossKind::Squared).unwrap();
    assert_eq!((e.fgsm, e.pgd), (e.clean, e.clean));
    assert_eq!(e.pgd_loss, e.clean_loss);
}

// With the activation pattern held fixed the surrogate is convex in δ, so its
// vertex maximum over nested boxes cannot decrease. The true ReLU loss has no
// such guarantee at vertices only.
#[test]
fn surrogate_vertex_maximum_grows_with_radius() {
    for case in 0..50 {
        let mut r = rng(2000 + case);
        let data = binary(&mut r, 5, 3);
        let mut sol = ConvexSolution::zeros(patterns(&data, 3, case), 3, 0.0);
        for i in 0..sol.patterns.len() {
            sol.v[i] = normals(&mut r, 3);
            sol.w[i] = normals(&mut r, 3);
        }
        for k in 0..5 {
            let mut last = f64::NEG_INFINITY;
            for eps in [0.0, 0.1, 0.2, 0.4, 0.8] {
                let value = surrogate_vertex_max(&sol, &data, eps, k).unwrap();
                assert!(value >= last, "case {case} sample {k} eps {eps}");
                last = value;
            }
        }
    }
}

#[test]
fn vertex_attack_is_the_best_vertex() {
    for case in 0..30 {
        let w = random_net(2100 + case, 4, 3);
        let mut r = rng(2150 + case);
        let x = normals(&mut r, 3);
        let y = if case % 2 == 0 { 1.0 } else { -1.0 };
        let eps = 0.3;
        let xv = vertex_attack(&w, &x, y, &AttackConfig::new(eps, AttackKind::VertexOracle), LossKind::HINGE).unwrap();
        assert!(xv.iter().zip(&x).all(|(a, b)| (a - b).abs() <= eps));
        for bits in 0..8usize {
            let p: Vec<f64> = (0..3).map(|j| if bits >> j & 1 == 1 { x[j] + eps } else { x[j] - eps }).collect();
            assert!(loss_at(&w, &p, y, LossKind::HINGE) <= loss_at(&w, &xv, y, LossKind::HINGE) + 1e-12);
        }
    }
}

#[test]
fn attacks_respect_frozen_columns() {
    let w = random_net(2200, 5, 3);
    let data = binary(&mut rng(2201), 6, 2).with_bias(true);
    for kind in [AttackKind::Fgsm, AttackKind::Pgd, AttackKind::HingeClosedForm, AttackKind::VertexOracle] {
        let out = attack_dataset(&w, &data, &AttackConfig::new(0.3, kind), LossKind::HINGE).unwrap();
        assert!(out.x().iter_rows().all(|row| row[2] == 1.0));
    }
}

#[test]
fn dimension_mismatch_is_an_error() {
    let w = random_net(2300, 2, 3);
    assert!(pgd(&w, &[0.0, 1.0], 1.0, &AttackConfig::new(0.1, AttackKind::Pgd), LossKind::HINGE).is_err());
    let bad = Dataset::new(Matrix::zeros(2, 2), vec![1.0, -1.0], Task::Binary).unwrap();
    assert!(evaluate(&w, &bad, &AttackConfig::new(0.1, AttackKind::Pgd), LossKind::HINGE).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pgd_iterates_stay_in_the_ball(seed in 0u64..100_000, eps in 0.0f64..2.0, squared in any::<bool>(), steps in 1usize..60) {
        let w = random_net(seed, 4, 3);
        let mut r = rng(seed + 1);
        let x: Vec<f64> = normals(&mut r, 3).iter().map(|v| 100.0 * v).collect();
        let loss = if squared { LossKind::Squared } else { LossKind::HINGE };
        let mut config = AttackConfig::new(eps, AttackKind::Pgd);
        config.steps = steps;
        let mut inside = true;
        pgd_with(&w, &x, 1.0, &config, loss, |xt| {
            inside &= xt.iter().zip(&x).all(|(a, b)| (a - b).abs() <= eps);
        }).unwrap();
        prop_assert!(inside);
    }

    #[test]
    fn fgsm_is_one_full_step_of_pgd(seed in 0u64..100_000, eps in 0.0f64..1.0, squared in any::<bool>()) {
        let w = random_net(seed, 5, 2);
        let mut r = rng(seed + 7);
        let x = normals(&mut r, 2);
        let y = normal(&mut r).signum();
        let loss = if squared { LossKind::Squared } else { LossKind::HINGE };
        let mut one = AttackConfig::new(eps, AttackKind::Pgd);
        one.gamma = eps;
        one.steps = 1;
        prop_assert_eq!(
            fgsm(&w, &x, y, &AttackConfig::new(eps, AttackKind::Fgsm), loss).unwrap(),
            pgd(&w, &x, y, &one, loss).unwrap()
        );
    }

    #[test]
    fn closed_form_attains_the_vertex_maximum(seed in 0u64..100_000, d in 1usize..=8, n in 1usize..6, eps in 0.0f64..1.0) {
        let mut r = rng(seed);
        let data = binary(&mut r, n, d);
        let pats = patterns(&data, 3, seed);
        let mut sol = ConvexSolution::zeros(pats, d, 0.0);
        for i in 0..sol.patterns.len() {
            sol.v[i] = normals(&mut r, d);
            sol.w[i] = normals(&mut r, d);
        }
        let delta = hinge_worstcase_delta(&sol, data.y(), eps, &[]).unwrap();
        for k in 0..n {
            let g = sol.effective_direction(k);
            let x: Vec<f64> = data.x().row(k).iter().zip(delta.row(k)).map(|(a, b)| a + b).collect();
            let at_delta = (1.0 - data.y()[k] * dot(&x, &g)).max(0.0);
            let best = surrogate_vertex_max(&sol, &data, eps, k).unwrap();
            prop_assert!((at_delta - best).abs() <= 1e-9 * (1.0 + best));
        }
    }
}
