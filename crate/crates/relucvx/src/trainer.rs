//! End-to-end convex training: sample patterns, build the program, solve,
//! and recover network weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, norm2};
use crate::model::{regularized_objective, ConvexSolution, Dataset, LossKind, NetworkWeights, Task};
use crate::patterns::{sample_adversarial, sample_standard, PatternSet, SamplerConfig};
use crate::program::{
    build_lp_robust, build_squared_robust, build_standard, decode_solution, ConicProgram, RobustSpec,
};
use crate::solver::{self, SolveSettings, SolveStatus};

/// Pattern rows may be violated by this much before the cost equality is
/// considered inapplicable.
pub const CONSTRAINT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Sampled convex program on clean data.
    Standard,
    /// Sampled robust upper-bound program.
    Adversarial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    /// The solver stopped before certifying optimality; weights are still recovered.
    Degraded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub status: SolveStatus,
    pub objective: f64,
    pub gap: f64,
    pub max_violation: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub method: Method,
    pub status: RunStatus,
    pub patterns_requested: usize,
    pub patterns_used: usize,
    pub seed: u64,
    pub eps: f64,
    pub beta: f64,
    pub loss: LossKind,
    pub robust: Option<RobustSpec>,
    pub sampler: SamplerConfig,
    pub settings: SolveSettings,
    pub solve: SolveStats,
    pub zero_tol: f64,
    /// Number of nonzero recovered neurons.
    pub neurons: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub weights: NetworkWeights,
    pub convex: ConvexSolution,
    pub meta: TrainMeta,
}

impl TrainedModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn is_degraded(&self) -> bool {
        self.meta.status == RunStatus::Degraded
    }
}

/// Recovery threshold 1e-8·(1 + largest group norm).
pub fn default_zero_tol(solution: &ConvexSolution) -> f64 {
    let largest = solution
        .v
        .iter()
        .chain(&solution.w)
        .map(|u| norm2(u))
        .fold(0.0, f64::max);
    1e-8 * (1.0 + largest)
}

/// (u, α) = (v/√‖v‖, √‖v‖) for every v_i and (w/√‖w‖, −√‖w‖) for every w_i
/// whose norm exceeds `zero_tol`; smaller groups are dropped.
pub fn recover_weights(solution: &ConvexSolution, zero_tol: f64) -> NetworkWeights {
    let mut hidden = Vec::new();
    let mut output = Vec::new();
    for (v, w) in solution.v.iter().zip(&solution.w) {
        for (u, sign) in [(v, 1.0), (w, -1.0)] {
            let norm = norm2(u);
            if norm > zero_tol && norm.is_finite() {
                let root = norm.sqrt();
                hidden.push(u.iter().map(|x| x / root).collect());
                output.push(sign * root);
            }
        }
    }
    NetworkWeights { hidden, output }
}

/// Standard training: sample patterns on X, solve the sampled convex program.
pub fn train_standard(
    data: &Dataset,
    beta: f64,
    sampler: &SamplerConfig,
    loss: LossKind,
    settings: &SolveSettings,
) -> Result<TrainedModel> {
    let mut sampler = sampler.clone();
    sampler.frozen_columns = data.frozen_columns();
    let set = sample_standard(data.x(), &sampler)?;
    let program = build_standard(data, &set.patterns, beta, loss)?;
    finish(Method::Standard, &program, &set, sampler, beta, loss, None, settings)
}

/// Adversarial training under an ℓ∞ ball of radius `eps`.
pub fn train_adversarial(
    data: &Dataset,
    beta: f64,
    eps: f64,
    sampler: &SamplerConfig,
    loss: LossKind,
    settings: &SolveSettings,
) -> Result<TrainedModel> {
    train_robust(data, beta, &RobustSpec::linf(eps), sampler, loss, settings)
}

/// Adversarial training for any supported perturbation ball. Patterns are
/// sampled on sign-perturbed copies of X with the sampler's P_a and S; the
/// sampler radius is taken from `spec`.
pub fn train_robust(
    data: &Dataset,
    beta: f64,
    spec: &RobustSpec,
    sampler: &SamplerConfig,
    loss: LossKind,
    settings: &SolveSettings,
) -> Result<TrainedModel> {
    loss.validate()?;
    if loss.is_hinge() && data.task() != Task::Binary {
        return Err(Error::InvalidData("hinge training needs binary labels".into()));
    }
    let mut sampler = sampler.clone();
    sampler.eps = spec.eps;
    sampler.frozen_columns = data.frozen_columns();
    let set = sample_adversarial(data.x(), &sampler)?;
    let program = match loss {
        LossKind::Hinge { .. } => build_lp_robust(data, &set.patterns, beta, spec)?,
        LossKind::Squared => build_squared_robust(data, &set.patterns, beta, spec)?,
    };
    finish(Method::Adversarial, &program, &set, sampler, beta, loss, Some(*spec), settings)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    method: Method,
    program: &ConicProgram,
    set: &PatternSet,
    sampler: SamplerConfig,
    beta: f64,
    loss: LossKind,
    robust: Option<RobustSpec>,
    settings: &SolveSettings,
) -> Result<TrainedModel> {
    let result = solver::solve(program, settings)?;
    let status = match result.status {
        SolveStatus::Optimal => RunStatus::Ok,
        SolveStatus::MaxIter => RunStatus::Degraded,
        SolveStatus::Infeasible | SolveStatus::Unbounded => {
            return Err(Error::Solver {
                status: result.status,
                gap: result.gap,
                max_violation: result.max_violation,
            })
        }
    };
    let convex = decode_solution(program, &result.primal)?;
    let zero_tol = default_zero_tol(&convex);
    let weights = recover_weights(&convex, zero_tol);
    Ok(TrainedModel {
        meta: TrainMeta {
            method,
            status,
            patterns_requested: sampler.ps,
            patterns_used: set.len(),
            seed: sampler.seed,
            eps: robust.map_or(0.0, |s| s.eps),
            beta,
            loss,
            robust,
            sampler,
            settings: *settings,
            solve: SolveStats {
                status: result.status,
                objective: result.objective,
                gap: result.gap,
                max_violation: result.max_violation,
                iterations: result.iterations,
            },
            zero_tol,
            neurons: weights.width(),
        },
        weights,
        convex,
    })
}

/// Largest violation of (2D_i − I) X v_i ≥ 0 and (2D_i − I) X w_i ≥ 0.
pub fn pattern_violation(solution: &ConvexSolution, data: &Dataset) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, pattern) in solution.patterns.iter().enumerate() {
        for (k, row) in data.x().iter_rows().enumerate() {
            let s = pattern.sign(k);
            worst = worst.max(-s * dot(row, &solution.v[i]));
            worst = worst.max(-s * dot(row, &solution.w[i]));
        }
    }
    worst
}

/// |ℓ(Σ_i D_i X(v_i − w_i), y) + βΣ(‖v_i‖ + ‖w_i‖) − ℓ(f(X), y) − (β/2)Σ(‖u_j‖² + α_j²)|
/// for the model's convex solution and its recovered network f.
pub fn cost_equality_residual(model: &TrainedModel, data: &Dataset, beta: f64, loss: LossKind) -> Result<f64> {
    let convex = &model.convex;
    if convex.patterns.iter().any(|p| p.len() != data.n()) {
        return Err(Error::Dimension("pattern length differs from the dataset size".into()));
    }
    let violation = pattern_violation(convex, data);
    if violation > CONSTRAINT_TOL {
        return Err(Error::ConstraintViolation(violation));
    }
    let preds = convex.predictions(data.x());
    let lhs = loss.data_loss(&preds, data.y()) + beta * convex.group_norm_sum();
    let rhs = regularized_objective(&model.weights, data, beta, loss)?;
    Ok((lhs - rhs).abs())
}
