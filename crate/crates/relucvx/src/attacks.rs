//! Adversarial examples (FGSM, PGD), the closed-form hinge worst case, and
//! vertex-enumeration oracles for the inner maximization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, sgn, Matrix};
use crate::model::{forward_row, predict_class, ConvexSolution, Dataset, LossKind, NetworkWeights, Task};

/// Default number of PGD iterations.
pub const PGD_STEPS: usize = 40;

/// Largest input dimension accepted by vertex enumeration.
pub const MAX_VERTEX_DIM: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Fgsm,
    Pgd,
    /// −ε·sgn(y ∇ŷ) with the activation set fixed at the clean input.
    HingeClosedForm,
    /// Best box vertex for the true network loss.
    VertexOracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub eps: f64,
    /// PGD step size.
    pub gamma: f64,
    pub steps: usize,
    pub kind: AttackKind,
    /// Input coordinates the adversary may not move.
    #[serde(default)]
    pub frozen_columns: Vec<usize>,
}

impl AttackConfig {
    /// γ = ε/30 and 40 PGD steps.
    pub fn new(eps: f64, kind: AttackKind) -> Self {
        Self {
            eps,
            gamma: eps / 30.0,
            steps: PGD_STEPS,
            kind,
            frozen_columns: Vec::new(),
        }
    }

    pub fn with_frozen(mut self, frozen: Vec<usize>) -> Self {
        self.frozen_columns = frozen;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("eps must be >= 0, got {}", self.eps)));
        }
        // A zero radius makes every attack the identity, so γ = ε/30 = 0 is allowed there.
        let gamma_ok = if self.eps == 0.0 { self.gamma >= 0.0 } else { self.gamma > 0.0 };
        if !(gamma_ok && self.gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("PGD step must be > 0, got {}", self.gamma)));
        }
        if self.steps == 0 {
            return Err(Error::InvalidArgument("PGD needs at least one step".into()));
        }
        Ok(())
    }
}

fn check_dims(weights: &NetworkWeights, x: &[f64]) -> Result<()> {
    match weights.input_dim() {
        Some(d) if d != x.len() => Err(Error::Dimension(format!(
            "input has {} entries, network expects {d}",
            x.len()
        ))),
        _ => Ok(()),
    }
}

/// ∇ŷ(x) = Σ_{j: x·u_j ≥ 0} α_j u_j.
fn output_gradient(weights: &NetworkWeights, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    for (u, &a) in weights.hidden.iter().zip(&weights.output) {
        if dot(x, u) >= 0.0 {
            for (gj, uj) in g.iter_mut().zip(u) {
                *gj += a * uj;
            }
        }
    }
    g
}

/// Input gradient of the per-sample loss. The hinge uses its linear branch
/// everywhere, the ζ → 0⁺ limit of the leaky hinge.
pub fn input_gradient(weights: &NetworkWeights, x: &[f64], y: f64, loss: LossKind) -> Vec<f64> {
    let g = output_gradient(weights, x);
    let scale = match loss {
        LossKind::Hinge { .. } => -y,
        LossKind::Squared => forward_row(weights, x) - y,
    };
    g.into_iter().map(|v| scale * v).collect()
}

/// Clamps `xt` to [x − ε, x + ε], then nudges by ulps until |xt − x| ≤ ε also
/// holds after floating-point subtraction.
fn clip_to_ball(xt: &mut [f64], x: &[f64], eps: f64) {
    for (t, &c) in xt.iter_mut().zip(x) {
        *t = t.clamp(c - eps, c + eps);
        while *t - c > eps {
            *t = t.next_down();
        }
        while c - *t > eps {
            *t = t.next_up();
        }
    }
}

/// One signed-gradient ascent step of size `step` followed by projection.
fn ascent_step(weights: &NetworkWeights, xt: &mut [f64], x: &[f64], y: f64, eps: f64, step: f64, config: &AttackConfig, loss: LossKind) {
    let g = input_gradient(weights, xt, y, loss);
    for (j, (t, gj)) in xt.iter_mut().zip(&g).enumerate() {
        if !config.frozen_columns.contains(&j) {
            *t += step * sgn(*gj);
        }
    }
    clip_to_ball(xt, x, eps);
}

/// x + ε·sgn(∇ loss), with sgn(0) = 0.
pub fn fgsm(weights: &NetworkWeights, x: &[f64], y: f64, config: &AttackConfig, loss: LossKind) -> Result<Vec<f64>> {
    config.validate()?;
    check_dims(weights, x)?;
    let mut xt = x.to_vec();
    ascent_step(weights, &mut xt, x, y, config.eps, config.eps, config, loss);
    Ok(xt)
}

/// `steps` iterations of x̃ ← clip(x̃ + γ·sgn(∇ loss)) starting at x̃ = x.
pub fn pgd(weights: &NetworkWeights, x: &[f64], y: f64, config: &AttackConfig, loss: LossKind) -> Result<Vec<f64>> {
    pgd_with(weights, x, y, config, loss, |_| {})
}

/// PGD that reports every iterate to `visit` and returns the last one.
pub fn pgd_with(
    weights: &NetworkWeights,
    x: &[f64],
    y: f64,
    config: &AttackConfig,
    loss: LossKind,
    mut visit: impl FnMut(&[f64]),
) -> Result<Vec<f64>> {
    config.validate()?;
    check_dims(weights, x)?;
    let mut xt = x.to_vec();
    for _ in 0..config.steps {
        ascent_step(weights, &mut xt, x, y, config.eps, config.gamma, config, loss);
        visit(&xt);
    }
    Ok(xt)
}

/// Box vertex of [x − ε, x + ε] maximizing the true per-sample loss.
pub fn vertex_attack(weights: &NetworkWeights, x: &[f64], y: f64, config: &AttackConfig, loss: LossKind) -> Result<Vec<f64>> {
    config.validate()?;
    check_dims(weights, x)?;
    let free: Vec<usize> = (0..x.len()).filter(|j| !config.frozen_columns.contains(j)).collect();
    if free.len() > MAX_VERTEX_DIM {
        return Err(Error::TooLarge(format!(
            "vertex enumeration supports at most {MAX_VERTEX_DIM} free coordinates"
        )));
    }
    let mut best = x.to_vec();
    let mut best_loss = f64::NEG_INFINITY;
    let mut point = x.to_vec();
    for bits in 0..1usize << free.len() {
        for (b, &j) in free.iter().enumerate() {
            point[j] = if bits >> b & 1 == 1 { x[j] + config.eps } else { x[j] - config.eps };
        }
        clip_to_ball(&mut point, x, config.eps);
        let value = loss.sample_loss(forward_row(weights, &point), y);
        if value > best_loss {
            best_loss = value;
            best.copy_from_slice(&point);
        }
    }
    Ok(best)
}

/// Adversarial input for `config.kind`.
pub fn attack(weights: &NetworkWeights, x: &[f64], y: f64, config: &AttackConfig, loss: LossKind) -> Result<Vec<f64>> {
    match config.kind {
        AttackKind::Fgsm => fgsm(weights, x, y, config, loss),
        AttackKind::Pgd => pgd(weights, x, y, config, loss),
        AttackKind::HingeClosedForm => {
            config.validate()?;
            check_dims(weights, x)?;
            let g = output_gradient(weights, x);
            let mut xt = x.to_vec();
            for (j, (t, gj)) in xt.iter_mut().zip(&g).enumerate() {
                if !config.frozen_columns.contains(&j) {
                    *t -= config.eps * sgn(y * gj);
                }
            }
            clip_to_ball(&mut xt, x, config.eps);
            Ok(xt)
        }
        AttackKind::VertexOracle => vertex_attack(weights, x, y, config, loss),
    }
}

/// Attacked copy of the dataset, one adversarial input per row.
pub fn attack_dataset(weights: &NetworkWeights, data: &Dataset, config: &AttackConfig, loss: LossKind) -> Result<Dataset> {
    let config = config.clone().with_frozen(data.frozen_columns());
    let mut x = data.x().clone();
    for k in 0..data.n() {
        let adv = attack(weights, data.x().row(k), data.y()[k], &config, loss)?;
        x.row_mut(k).copy_from_slice(&adv);
    }
    data.with_x(x)
}

/// Row k is −ε·sgn(y_k Σ_i d_ik (v_i − w_i)); frozen columns stay zero.
pub fn hinge_worstcase_delta(solution: &ConvexSolution, y: &[f64], eps: f64, frozen: &[usize]) -> Result<Matrix> {
    let d = solution.v.first().map_or(0, Vec::len);
    if solution.patterns.iter().any(|p| p.len() != y.len()) {
        return Err(Error::Dimension("pattern length differs from the label count".into()));
    }
    let mut delta = Matrix::zeros(y.len(), d);
    for (k, &yk) in y.iter().enumerate() {
        let g = solution.effective_direction(k);
        let row = delta.row_mut(k);
        for j in 0..d {
            if !frozen.contains(&j) {
                row[j] = -eps * sgn(yk * g[j]);
            }
        }
    }
    Ok(delta)
}

fn free_l1(g: &[f64], frozen: &[usize]) -> f64 {
    g.iter()
        .enumerate()
        .filter(|(j, _)| !frozen.contains(j))
        .map(|(_, v)| v.abs())
        .sum()
}

/// Per-sample robust hinge term 1 − y_k x_k·g_k + ε‖g_k‖₁, before the positive part.
pub fn surrogate_margin_terms(solution: &ConvexSolution, data: &Dataset, eps: f64) -> Vec<f64> {
    let frozen = data.frozen_columns();
    (0..data.n())
        .map(|k| {
            let g = solution.effective_direction(k);
            1.0 - data.y()[k] * dot(data.x().row(k), &g) + eps * free_l1(&g, &frozen)
        })
        .collect()
}

/// (1/n) Σ_k (1 − y_k x_k·g_k + ε‖g_k‖₁)_+ plus βΣ(‖v_i‖ + ‖w_i‖) when β is given.
pub fn surrogate_inner_max_value(solution: &ConvexSolution, data: &Dataset, eps: f64, beta: Option<f64>) -> Result<f64> {
    if data.task() != Task::Binary {
        return Err(Error::InvalidData("the hinge surrogate needs binary labels".into()));
    }
    let terms = surrogate_margin_terms(solution, data, eps);
    let mean = terms.iter().map(|t| t.max(0.0)).sum::<f64>() / data.n() as f64;
    Ok(mean + beta.map_or(0.0, |b| b * solution.group_norm_sum()))
}

/// max over the box vertices δ of (1 − y_k (x_k + δ)·g_k)_+ with the patterns held fixed.
pub fn surrogate_vertex_max(solution: &ConvexSolution, data: &Dataset, eps: f64, k: usize) -> Result<f64> {
    let d = data.d();
    let frozen = data.frozen_columns();
    let free: Vec<usize> = (0..d).filter(|j| !frozen.contains(j)).collect();
    if free.len() > MAX_VERTEX_DIM {
        return Err(Error::TooLarge(format!(
            "vertex enumeration supports at most {MAX_VERTEX_DIM} free coordinates"
        )));
    }
    let g = solution.effective_direction(k);
    let x = data.x().row(k);
    let y = data.y()[k];
    let mut point = x.to_vec();
    let mut best = f64::NEG_INFINITY;
    for bits in 0..1usize << free.len() {
        for (b, &j) in free.iter().enumerate() {
            point[j] = if bits >> b & 1 == 1 { x[j] + eps } else { x[j] - eps };
        }
        best = best.max((1.0 - y * dot(&point, &g)).max(0.0));
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub task: Task,
    /// Accuracy for binary tasks, mean squared error for regression.
    pub clean: f64,
    pub fgsm: f64,
    pub pgd: f64,
    /// Mean per-sample loss on clean and PGD inputs.
    pub clean_loss: f64,
    pub pgd_loss: f64,
}

fn score(task: Task, yhat: &[f64], y: &[f64]) -> f64 {
    let n = y.len() as f64;
    match task {
        Task::Binary => yhat.iter().zip(y).filter(|(&p, &t)| predict_class(p) == t).count() as f64 / n,
        Task::Regression => yhat.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n,
    }
}

/// Clean, FGSM and PGD metrics at radius `config.eps`.
pub fn evaluate(weights: &NetworkWeights, data: &Dataset, config: &AttackConfig, loss: LossKind) -> Result<Evaluation> {
    config.validate()?;
    loss.validate()?;
    let config = config.clone().with_frozen(data.frozen_columns());
    let y = data.y();
    let mut clean = Vec::with_capacity(data.n());
    let mut fgsm_out = Vec::with_capacity(data.n());
    let mut pgd_out = Vec::with_capacity(data.n());
    for (k, row) in data.x().iter_rows().enumerate() {
        check_dims(weights, row)?;
        clean.push(forward_row(weights, row));
        fgsm_out.push(forward_row(weights, &fgsm(weights, row, y[k], &config, loss)?));
        pgd_out.push(forward_row(weights, &pgd(weights, row, y[k], &config, loss)?));
    }
    let mean_loss = |out: &[f64]| out.iter().zip(y).map(|(&p, &t)| loss.sample_loss(p, t)).sum::<f64>() / y.len() as f64;
    Ok(Evaluation {
        task: data.task(),
        clean: score(data.task(), &clean, y),
        fgsm: score(data.task(), &fgsm_out, y),
        pgd: score(data.task(), &pgd_out, y),
        clean_loss: mean_loss(&clean),
        pgd_loss: mean_loss(&pgd_out),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn neuron(u: Vec<f64>, a: f64) -> NetworkWeights {
        NetworkWeights::new(vec![u], vec![a]).unwrap()
    }

    #[test]
    fn fgsm_moves_against_the_label_direction() {
        let net = neuron(vec![1.0, 0.0], 1.0);
        let config = AttackConfig::new(0.1, AttackKind::Fgsm);
        let xt = fgsm(&net, &[0.5, 0.2], 1.0, &config, LossKind::HINGE).unwrap();
        assert_eq!(xt, vec![0.4, 0.2]);
    }

    #[test]
    fn zero_network_is_a_fixed_point() {
        let net = NetworkWeights::empty();
        for kind in [AttackKind::Fgsm, AttackKind::Pgd, AttackKind::HingeClosedForm] {
            let config = AttackConfig::new(0.3, kind);
            let x = [0.25, -1.0, 3.0];
            assert_eq!(attack(&net, &x, -1.0, &config, LossKind::Squared).unwrap(), x.to_vec());
        }
    }

    #[test]
    fn clipping_is_exact_in_floating_point() {
        let x = [0.1, 1e6 + 0.3, -7.7];
        let eps = 0.1;
        let mut xt = [x[0] + 0.3, x[1] - 0.3, x[2] + eps];
        clip_to_ball(&mut xt, &x, eps);
        for (t, c) in xt.iter().zip(&x) {
            assert!((t - c).abs() <= eps);
        }
    }

    #[test]
    fn closed_form_delta_matches_hand_value() {
        let p = crate::model::ActivationPattern::new(vec![1]).unwrap();
        let solution = ConvexSolution {
            patterns: vec![p],
            v: vec![vec![1.0, -2.0]],
            w: vec![vec![0.0, 0.0]],
            objective: 0.0,
        };
        let delta = hinge_worstcase_delta(&solution, &[1.0], 0.1, &[]).unwrap();
        assert_eq!(delta.row(0), &[-0.1, 0.1]);
        let zero = hinge_worstcase_delta(&solution, &[1.0], 0.0, &[]).unwrap();
        assert!(zero.row(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn config_validation() {
        assert!(AttackConfig::new(0.0, AttackKind::Pgd).validate().is_ok());
        assert!(AttackConfig::new(-1.0, AttackKind::Pgd).validate().is_err());
        let mut c = AttackConfig::new(0.1, AttackKind::Pgd);
        c.steps = 0;
        assert!(c.validate().is_err());
    }
}
