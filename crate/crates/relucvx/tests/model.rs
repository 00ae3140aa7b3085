mod common;

use common::*;
use relucvx::model::{adversarial_objective_grid_oracle, regularized_objective};
use relucvx::{Dataset, LossKind, Matrix, NetworkWeights, Task};

fn random_net(seed: u64, m: usize, d: usize) -> NetworkWeights {
    let mut r = rng(seed);
    let hidden = (0..m).map(|_| normals(&mut r, d)).collect();
    NetworkWeights::new(hidden, normals(&mut r, m)).unwrap()
}

#[test]
fn regularizer_hand_value() {
    let w = NetworkWeights::new(vec![vec![1.0]], vec![1.0]).unwrap();
    let data = Dataset::new(Matrix::from_rows(&[vec![2.0]]).unwrap(), vec![1.0], Task::Binary).unwrap();
    assert_eq!(regularized_objective(&w, &data, 0.5, LossKind::HINGE).unwrap(), 0.5);
}

#[test]
fn grid_oracle_is_monotone_in_radius() {
    for case in 0..100 {
        let w = random_net(3000 + case, 4, 2);
        let (data, loss) = if case % 2 == 0 {
            (binary(&mut rng(3100 + case), 6, 2), LossKind::HINGE)
        } else {
            (regression(&mut rng(3100 + case), 6, 2), LossKind::Squared)
        };
        let mut last = f64::NEG_INFINITY;
        for eps in [0.0, 0.05, 0.1, 0.2, 0.4, 0.8] {
            let v = adversarial_objective_grid_oracle(&w, &data, 1e-3, eps, loss, 11).unwrap();
            assert!(v >= last - 1e-12, "case {case} eps {eps}: {v} < {last}");
            last = v;
        }
    }
}

#[test]
fn grid_oracle_at_zero_radius_is_the_objective() {
    let w = random_net(3200, 3, 3);
    let data = regression(&mut rng(3201), 7, 3);
    let oracle = adversarial_objective_grid_oracle(&w, &data, 0.1, 0.0, LossKind::Squared, 3).unwrap();
    assert_eq!(oracle, regularized_objective(&w, &data, 0.1, LossKind::Squared).unwrap());
    assert!(adversarial_objective_grid_oracle(&random_net(3203, 3, 4), &binary(&mut rng(3202), 3, 4), 0.1, 0.1, LossKind::HINGE, 3).is_err());
}
