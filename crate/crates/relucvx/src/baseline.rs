//! Non-convex baselines trained by subgradient descent, optionally on
//! FGSM or PGD inputs regenerated once per epoch.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::attacks::{attack, AttackConfig};
use crate::error::{Error, Result};
use crate::matrix::dot;
use crate::model::{regularized_objective, Dataset, LossKind, NetworkWeights};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Batch {
    Full,
    Size(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdConfig {
    pub m: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch: Batch,
    pub seed: u64,
    /// Standard deviation of the initial weights; 1/√d when absent.
    pub init_scale: Option<f64>,
}

impl GdConfig {
    /// Width 2·P_s, learning rate 1e-2, 2000 full-batch epochs.
    pub fn for_patterns(ps: usize, seed: u64) -> Self {
        Self {
            m: 2 * ps,
            epochs: 2000,
            lr: 1e-2,
            batch: Batch::Full,
            seed,
            init_scale: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidArgument("GD width must be >= 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate must be > 0, got {}", self.lr)));
        }
        if self.batch == Batch::Size(0) {
            return Err(Error::InvalidArgument("batch size must be >= 1".into()));
        }
        if let Some(s) = self.init_scale {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::InvalidArgument(format!("init scale must be >= 0, got {s}")));
            }
        }
        Ok(())
    }
}

/// Exact subgradient of the regularized objective with ReLU′(0) = 0 and a
/// zero hinge derivative at margin exactly 1.
pub fn subgradient(weights: &NetworkWeights, data: &Dataset, beta: f64, loss: LossKind) -> Result<NetworkWeights> {
    let yhat = crate::model::forward(weights, data.x())?;
    let n = data.n();
    let mut hidden: Vec<Vec<f64>> = weights.hidden.iter().map(|u| u.iter().map(|v| beta * v).collect()).collect();
    let mut output: Vec<f64> = weights.output.iter().map(|a| beta * a).collect();
    for (k, row) in data.x().iter_rows().enumerate() {
        let y = data.y()[k];
        let dl = match loss {
            LossKind::Hinge { .. } => {
                if 1.0 - y * yhat[k] > 0.0 {
                    -y / n as f64
                } else {
                    0.0
                }
            }
            LossKind::Squared => yhat[k] - y,
        };
        if dl == 0.0 {
            continue;
        }
        for (j, u) in weights.hidden.iter().enumerate() {
            let pre = dot(row, u);
            if pre > 0.0 {
                output[j] += dl * pre;
                let a = weights.output[j];
                for (g, x) in hidden[j].iter_mut().zip(row) {
                    *g += dl * a * x;
                }
            }
        }
    }
    Ok(NetworkWeights { hidden, output })
}

/// u_j ~ N(0, s²I), α_j ~ N(0, s²) from the seed's initialization stream.
pub fn initial_weights(d: usize, config: &GdConfig) -> NetworkWeights {
    let scale = config.init_scale.unwrap_or(1.0 / (d as f64).sqrt());
    let mut hidden = Vec::with_capacity(config.m);
    let mut output = Vec::with_capacity(config.m);
    for j in 0..config.m {
        let mut r = rng::substream(config.seed, rng::GD_INIT, j as u64);
        hidden.push((0..d).map(|_| scale * r.sample::<f64, _>(StandardNormal)).collect());
        output.push(scale * r.sample::<f64, _>(StandardNormal));
    }
    NetworkWeights { hidden, output }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdRun {
    pub weights: NetworkWeights,
    /// Regularized objective on the epoch's training inputs before its update.
    pub objective: Vec<f64>,
}

/// Subgradient descent on the regularized objective. With an adversary, the
/// training inputs are replaced by attacked inputs at the start of every epoch.
pub fn gd_train(
    data: &Dataset,
    beta: f64,
    loss: LossKind,
    config: &GdConfig,
    adversary: Option<&AttackConfig>,
) -> Result<NetworkWeights> {
    Ok(gd_train_traced(data, beta, loss, config, adversary)?.weights)
}

/// [`gd_train`] that also returns the per-epoch objective.
pub fn gd_train_traced(
    data: &Dataset,
    beta: f64,
    loss: LossKind,
    config: &GdConfig,
    adversary: Option<&AttackConfig>,
) -> Result<GdRun> {
    config.validate()?;
    loss.validate()?;
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!("beta must be finite and >= 0, got {beta}")));
    }
    let adversary = adversary.map(|a| a.clone().with_frozen(data.frozen_columns()));
    if let Some(a) = &adversary {
        a.validate()?;
    }
    let mut weights = initial_weights(data.d(), config);
    let mut objective = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..data.n()).collect();
    for epoch in 0..config.epochs {
        let inputs = match &adversary {
            None => data.clone(),
            Some(a) => {
                let mut x = data.x().clone();
                for k in 0..data.n() {
                    let adv = attack(&weights, data.x().row(k), data.y()[k], a, loss)?;
                    x.row_mut(k).copy_from_slice(&adv);
                }
                data.with_x(x)?
            }
        };
        let value = regularized_objective(&weights, &inputs, beta, loss)?;
        if !value.is_finite() {
            return Err(Error::Divergence(epoch));
        }
        objective.push(value);
        match config.batch {
            Batch::Full => step(&mut weights, &inputs, beta, loss, config.lr)?,
            Batch::Size(b) => {
                order.shuffle(&mut rng::substream(config.seed, rng::SHUFFLE, epoch as u64));
                for chunk in order.chunks(b) {
                    step(&mut weights, &inputs.select(chunk), beta, loss, config.lr)?;
                }
            }
        }
    }
    if weights.squared_norm().is_finite() {
        Ok(GdRun { weights, objective })
    } else {
        Err(Error::Divergence(config.epochs))
    }
}

fn step(weights: &mut NetworkWeights, data: &Dataset, beta: f64, loss: LossKind, lr: f64) -> Result<()> {
    let g = subgradient(weights, data, beta, loss)?;
    for (u, gu) in weights.hidden.iter_mut().zip(&g.hidden) {
        for (x, gx) in u.iter_mut().zip(gu) {
            *x -= lr * gx;
        }
    }
    for (a, ga) in weights.output.iter_mut().zip(&g.output) {
        *a -= lr * ga;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::model::Task;

    #[test]
    fn zero_weights_have_zero_hinge_gradient() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.5]]).unwrap();
        let data = Dataset::new(x, vec![1.0, -1.0], Task::Binary).unwrap();
        let net = NetworkWeights::new(vec![vec![0.0, 0.0]; 3], vec![0.0; 3]).unwrap();
        let g = subgradient(&net, &data, 0.1, LossKind::HINGE).unwrap();
        assert!(g.output.iter().all(|&v| v == 0.0));
        assert!(g.hidden.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn regularizer_gradient_is_beta_times_weights() {
        // Every unit is inactive on the data, so only the β-term contributes.
        let x = Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let data = Dataset::new(x, vec![1.0], Task::Binary).unwrap();
        let net = NetworkWeights::new(vec![vec![-1.0, -2.0], vec![-0.5, 0.25]], vec![3.0, -4.0]).unwrap();
        let beta = 0.7;
        let g = subgradient(&net, &data, beta, LossKind::HINGE).unwrap();
        for (gu, u) in g.hidden.iter().zip(&net.hidden) {
            for (a, b) in gu.iter().zip(u) {
                assert_eq!(*a, beta * b);
            }
        }
        for (a, b) in g.output.iter().zip(&net.output) {
            assert_eq!(*a, beta * b);
        }
    }

    #[test]
    fn initialization_is_seeded() {
        let c = GdConfig::for_patterns(3, 11);
        assert_eq!(initial_weights(4, &c), initial_weights(4, &c));
        assert_eq!(initial_weights(4, &c).width(), 6);
        let other = GdConfig { seed: 12, ..c };
        assert_ne!(initial_weights(4, &other), initial_weights(4, &GdConfig::for_patterns(3, 11)));
    }
}
