//! Shared domain types, the network forward pass, and objective evaluators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, norm2, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Binary,
    Regression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    x: Matrix,
    y: Vec<f64>,
    task: Task,
    bias_appended: bool,
    /// When set, the appended bias column is excluded from perturbations.
    #[serde(default)]
    bias_frozen: bool,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<f64>, task: Task) -> Result<Self> {
        if x.rows() == 0 || x.cols() == 0 {
            return Err(Error::InvalidData(format!(
                "dataset must have n >= 1 and d >= 1, got {}x{}",
                x.rows(),
                x.cols()
            )));
        }
        if y.len() != x.rows() {
            return Err(Error::Dimension(format!(
                "{} targets for {} samples",
                y.len(),
                x.rows()
            )));
        }
        if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite entry".into()));
        }
        if task == Task::Binary {
            if let Some(bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
                return Err(Error::InvalidData(format!(
                    "binary labels must be -1 or +1, found {bad}"
                )));
            }
        }
        Ok(Self {
            x,
            y,
            task,
            bias_appended: false,
            bias_frozen: false,
        })
    }

    /// Appends a constant-one column. With `frozen`, adversaries leave it untouched.
    pub fn with_bias(&self, frozen: bool) -> Self {
        Self {
            x: self.x.with_column(1.0),
            y: self.y.clone(),
            task: self.task,
            bias_appended: true,
            bias_frozen: frozen,
        }
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn bias_appended(&self) -> bool {
        self.bias_appended
    }

    pub fn bias_frozen(&self) -> bool {
        self.bias_appended && self.bias_frozen
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    /// Input dimension excluding an appended bias column.
    pub fn feature_dim(&self) -> usize {
        self.d() - usize::from(self.bias_appended)
    }

    /// Columns that adversarial perturbations may not move.
    pub fn frozen_columns(&self) -> Vec<usize> {
        if self.bias_frozen() {
            vec![self.d() - 1]
        } else {
            Vec::new()
        }
    }

    /// Subset of rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.d());
        for &k in rows {
            data.extend_from_slice(self.x.row(k));
        }
        Self {
            x: Matrix::from_vec(rows.len(), self.d(), data).expect("row subset shape"),
            y: rows.iter().map(|&k| self.y[k]).collect(),
            task: self.task,
            bias_appended: self.bias_appended,
            bias_frozen: self.bias_frozen,
        }
    }

    /// Same targets and flags with a replaced data matrix of identical shape.
    pub fn with_x(&self, x: Matrix) -> Result<Self> {
        if x.rows() != self.n() || x.cols() != self.d() {
            return Err(Error::Dimension(format!(
                "replacement matrix is {}x{}, expected {}x{}",
                x.rows(),
                x.cols(),
                self.n(),
                self.d()
            )));
        }
        if !x.is_finite() {
            return Err(Error::InvalidData("non-finite entry".into()));
        }
        Ok(Self { x, ..self.clone() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkWeights {
    pub hidden: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl NetworkWeights {
    pub fn new(hidden: Vec<Vec<f64>>, output: Vec<f64>) -> Result<Self> {
        if hidden.len() != output.len() {
            return Err(Error::Dimension(format!(
                "{} hidden units but {} output weights",
                hidden.len(),
                output.len()
            )));
        }
        if let Some(d) = hidden.first().map(Vec::len) {
            if hidden.iter().any(|u| u.len() != d) {
                return Err(Error::Dimension("hidden units differ in length".into()));
            }
        }
        let finite = hidden.iter().flatten().chain(&output).all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidData("non-finite weight".into()));
        }
        Ok(Self { hidden, output })
    }

    pub fn empty() -> Self {
        Self {
            hidden: Vec::new(),
            output: Vec::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.output.len()
    }

    /// Input dimension, unknown for an empty network.
    pub fn input_dim(&self) -> Option<usize> {
        self.hidden.first().map(Vec::len)
    }

    /// Σ_j (‖u_j‖² + α_j²).
    pub fn squared_norm(&self) -> f64 {
        self.hidden.iter().map(|u| dot(u, u)).sum::<f64>() + dot(&self.output, &self.output)
    }

    fn check_input(&self, d: usize) -> Result<()> {
        match self.input_dim() {
            Some(k) if k != d => Err(Error::Dimension(format!(
                "network expects {k} inputs, data has {d}"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationPattern {
    pub mask: Vec<u8>,
}

impl ActivationPattern {
    pub fn new(mask: Vec<u8>) -> Result<Self> {
        if mask.iter().any(|&b| b > 1) {
            return Err(Error::InvalidArgument("pattern entries must be 0 or 1".into()));
        }
        Ok(Self { mask })
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn active(&self, k: usize) -> bool {
        self.mask[k] == 1
    }

    /// Entry k of the diagonal of 2D − I.
    pub fn sign(&self, k: usize) -> f64 {
        if self.active(k) {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexSolution {
    pub patterns: Vec<ActivationPattern>,
    pub v: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub objective: f64,
}

impl ConvexSolution {
    /// All-zero solution over the given patterns.
    pub fn zeros(patterns: Vec<ActivationPattern>, d: usize, objective: f64) -> Self {
        let p = patterns.len();
        Self {
            patterns,
            v: vec![vec![0.0; d]; p],
            w: vec![vec![0.0; d]; p],
            objective,
        }
    }

    /// g_k = Σ_i d_ik (v_i − w_i), the effective linear map at sample k.
    pub fn effective_direction(&self, k: usize) -> Vec<f64> {
        let d = self.v.first().map_or(0, Vec::len);
        let mut g = vec![0.0; d];
        for (i, p) in self.patterns.iter().enumerate() {
            if p.active(k) {
                for ((gj, vj), wj) in g.iter_mut().zip(&self.v[i]).zip(&self.w[i]) {
                    *gj += vj - wj;
                }
            }
        }
        g
    }

    /// Σ_i D_i X (v_i − w_i).
    pub fn predictions(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows())
            .map(|k| dot(x.row(k), &self.effective_direction(k)))
            .collect()
    }

    /// Σ_i (‖v_i‖₂ + ‖w_i‖₂).
    pub fn group_norm_sum(&self) -> f64 {
        self.v.iter().chain(&self.w).map(|u| norm2(u)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    /// Hinge loss; `leak` is the leaky slope ζ used only to justify attack gradients.
    Hinge {
        #[serde(default)]
        leak: f64,
    },
    Squared,
}

impl LossKind {
    pub const HINGE: LossKind = LossKind::Hinge { leak: 0.0 };

    pub fn validate(&self) -> Result<()> {
        match *self {
            LossKind::Hinge { leak } if !(0.0..1.0).contains(&leak) => Err(
                Error::InvalidArgument(format!("leaky slope must lie in [0, 1), got {leak}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn is_hinge(&self) -> bool {
        matches!(self, LossKind::Hinge { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Hinge { .. } => "hinge",
            LossKind::Squared => "squared",
        }
    }

    /// Per-sample loss before aggregation.
    pub fn sample_loss(&self, yhat: f64, y: f64) -> f64 {
        match self {
            LossKind::Hinge { .. } => (1.0 - y * yhat).max(0.0),
            LossKind::Squared => 0.5 * (yhat - y) * (yhat - y),
        }
    }

    /// Aggregates per-sample losses: mean for hinge, sum for squared.
    pub fn aggregate(&self, total: f64, n: usize) -> f64 {
        match self {
            LossKind::Hinge { .. } => total / n as f64,
            LossKind::Squared => total,
        }
    }

    /// Data term of the training objective.
    pub fn data_loss(&self, yhat: &[f64], y: &[f64]) -> f64 {
        let total: f64 = yhat.iter().zip(y).map(|(&p, &t)| self.sample_loss(p, t)).sum();
        self.aggregate(total, y.len())
    }
}

/// Network output for one input row.
pub fn forward_row(weights: &NetworkWeights, x: &[f64]) -> f64 {
    weights
        .hidden
        .iter()
        .zip(&weights.output)
        .map(|(u, a)| dot(x, u).max(0.0) * a)
        .sum()
}

/// ŷ = Σ_j (X u_j)_+ α_j.
pub fn forward(weights: &NetworkWeights, x: &Matrix) -> Result<Vec<f64>> {
    weights.check_input(x.cols())?;
    Ok(x.iter_rows().map(|row| forward_row(weights, row)).collect())
}

/// Decision rule: +1 iff ŷ ≥ 0.
pub fn predict_class(yhat: f64) -> f64 {
    if yhat >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta >= 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("beta must be finite and >= 0, got {beta}")))
    }
}

/// Data loss plus (β/2) Σ_j (‖u_j‖² + α_j²).
pub fn regularized_objective(
    weights: &NetworkWeights,
    data: &Dataset,
    beta: f64,
    loss: LossKind,
) -> Result<f64> {
    check_beta(beta)?;
    loss.validate()?;
    let yhat = forward(weights, data.x())?;
    Ok(loss.data_loss(&yhat, data.y()) + 0.5 * beta * weights.squared_norm())
}

/// Lower bound on the adversarial objective: each sample's loss is maximized over
/// the vertices of its ε-box plus a regular interior grid.
pub fn adversarial_objective_grid_oracle(
    weights: &NetworkWeights,
    data: &Dataset,
    beta: f64,
    eps: f64,
    loss: LossKind,
    grid_resolution: usize,
) -> Result<f64> {
    check_beta(beta)?;
    loss.validate()?;
    weights.check_input(data.d())?;
    let d = data.d();
    if d > 3 {
        return Err(Error::TooLarge(format!("grid oracle supports d <= 3, got {d}")));
    }
    if grid_resolution < 2 {
        return Err(Error::InvalidArgument("grid resolution must be >= 2".into()));
    }
    if !(eps >= 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be >= 0, got {eps}")));
    }
    let frozen = data.frozen_columns();
    let offsets = box_offsets(d, eps, grid_resolution, &frozen);
    let mut point = vec![0.0; d];
    let mut total = 0.0;
    for (row, &y) in data.x().iter_rows().zip(data.y()) {
        let mut worst = f64::NEG_INFINITY;
        for delta in &offsets {
            for ((p, x), dx) in point.iter_mut().zip(row).zip(delta) {
                *p = x + dx;
            }
            worst = worst.max(loss.sample_loss(forward_row(weights, &point), y));
        }
        total += worst;
    }
    Ok(loss.aggregate(total, data.n()) + 0.5 * beta * weights.squared_norm())
}

/// Box vertices followed by the `resolution^d` grid over [−ε, ε]^d.
fn box_offsets(d: usize, eps: f64, resolution: usize, frozen: &[usize]) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for bits in 0..1usize << d {
        out.push(
            (0..d)
                .map(|j| if bits >> j & 1 == 1 { eps } else { -eps })
                .collect(),
        );
    }
    let step = 2.0 * eps / (resolution - 1) as f64;
    let total = resolution.pow(d as u32);
    for mut idx in 0..total {
        let mut delta = Vec::with_capacity(d);
        for _ in 0..d {
            delta.push(-eps + step * (idx % resolution) as f64);
            idx /= resolution;
        }
        out.push(delta);
    }
    for delta in &mut out {
        for &j in frozen {
            delta[j] = 0.0;
        }
    }
    out
}
