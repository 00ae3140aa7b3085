//! Conic intermediate representation and the training-program builders.
//!
//! A program minimizes `c·z` subject to `A z + b ≥ 0` (nonnegative rows) and a
//! list of second-order cones `‖t‖₂ ≤ s`, each given by stacked affine rows
//! whose first row is `s`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::norm2;
use crate::model::{ActivationPattern, ConvexSolution, Dataset, LossKind, Task};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Affine map `z ↦ A z + b` in triplet form.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AffineRows {
    pub triplets: Vec<Triplet>,
    pub offset: Vec<f64>,
}

impl AffineRows {
    pub fn len(&self) -> usize {
        self.offset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offset.is_empty()
    }

    /// Evaluates `A z + b`.
    pub fn eval(&self, z: &[f64]) -> Vec<f64> {
        let mut out = self.offset.clone();
        for t in &self.triplets {
            out[t.row] += t.value * z[t.col];
        }
        out
    }

    fn push(&mut self, terms: &[(usize, f64)], constant: f64) -> usize {
        let row = self.offset.len();
        self.triplets.extend(terms.iter().map(|&(col, value)| Triplet { row, col, value }));
        self.offset.push(constant);
        row
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanKind {
    /// v_i.
    V,
    /// w_i.
    W,
    /// b_i ≥ ‖v_i‖₂.
    NormV,
    /// c_i ≥ ‖w_i‖₂.
    NormW,
    /// Dual-norm auxiliaries bounding ‖v_i‖ in robust pattern constraints.
    DualV,
    /// Dual-norm auxiliaries bounding ‖w_i‖ in robust pattern constraints.
    DualW,
    /// Hinge slacks s_k.
    Slack,
    /// Dual-norm auxiliaries bounding ‖Σ_i d_ik (v_i − w_i)‖ per sample.
    SampleDual,
    /// Squared-loss epigraph scalar a.
    EpiA,
    /// Squared-loss epigraph vector z (length n + 1).
    EpiZ,
    /// Variables of programs not built from training data.
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub kind: SpanKind,
    pub pattern: Option<usize>,
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationNorm {
    #[serde(rename = "l1")]
    L1,
    #[serde(rename = "l2")]
    L2,
    #[serde(rename = "linf")]
    LInf,
}

impl PerturbationNorm {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "1" | "l1" => Ok(Self::L1),
            "2" | "l2" => Ok(Self::L2),
            "inf" | "linf" => Ok(Self::LInf),
            _ => Err(Error::InvalidArgument(format!("unsupported norm {text}"))),
        }
    }

    /// Norm of the same vector measured in the dual norm.
    pub fn dual_norm(&self, v: &[f64]) -> f64 {
        match self {
            Self::L1 => crate::matrix::norm_inf(v),
            Self::L2 => norm2(v),
            Self::LInf => crate::matrix::norm1(v),
        }
    }
}

/// Perturbation ball: ‖δ_k‖_p ≤ ε per sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustSpec {
    pub eps: f64,
    pub norm: PerturbationNorm,
}

impl RobustSpec {
    pub fn linf(eps: f64) -> Self {
        Self {
            eps,
            norm: PerturbationNorm::LInf,
        }
    }
}

/// Description of what a program encodes, used when decoding solutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramMeta {
    pub loss: Option<LossKind>,
    pub beta: f64,
    pub robust: Option<RobustSpec>,
    pub n: usize,
    pub d: usize,
    pub patterns: Vec<ActivationPattern>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    pub var_count: usize,
    /// Sparse objective coefficients as (index, value).
    pub objective: Vec<(usize, f64)>,
    pub nonneg: AffineRows,
    /// Rows of all second-order cones, stacked in block order.
    pub soc: AffineRows,
    /// Dimension of each cone block (head row plus tail).
    pub soc_dims: Vec<usize>,
    pub layout: Vec<Span>,
    pub meta: ProgramMeta,
}

impl ConicProgram {
    pub fn objective_value(&self, z: &[f64]) -> f64 {
        self.objective.iter().map(|&(i, c)| c * z[i]).sum()
    }

    pub fn spans(&self, kind: SpanKind) -> impl Iterator<Item = &Span> {
        self.layout.iter().filter(move |s| s.kind == kind)
    }

    pub fn nonneg_count(&self) -> usize {
        self.nonneg.len()
    }

    pub fn soc_row_count(&self) -> usize {
        self.soc.len()
    }

    /// Checks index bounds, finiteness, and cone block bookkeeping.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::MalformedProgram(msg));
        for &(i, c) in &self.objective {
            if i >= self.var_count {
                return bad(format!("objective index {i} out of range"));
            }
            if !c.is_finite() {
                return bad(format!("objective coefficient {c} at index {i}"));
            }
        }
        for (name, rows) in [("nonneg", &self.nonneg), ("soc", &self.soc)] {
            for t in &rows.triplets {
                if t.col >= self.var_count || t.row >= rows.len() {
                    return bad(format!("{name} entry ({}, {}) out of range", t.row, t.col));
                }
                if !t.value.is_finite() {
                    return bad(format!("{name} coefficient {} at ({}, {})", t.value, t.row, t.col));
                }
            }
            if rows.offset.iter().any(|v| !v.is_finite()) {
                return bad(format!("non-finite {name} offset"));
            }
        }
        if self.soc_dims.contains(&0) {
            return bad("empty cone block".into());
        }
        let total: usize = self.soc_dims.iter().sum();
        if total != self.soc.len() {
            return bad(format!(
                "cone blocks cover {total} rows but {} cone rows exist",
                self.soc.len()
            ));
        }
        let mut covered = vec![false; self.var_count];
        for span in &self.layout {
            if span.start + span.len > self.var_count {
                return bad(format!("span {:?} out of range", span.kind));
            }
            for slot in &mut covered[span.start..span.start + span.len] {
                if *slot {
                    return bad(format!("span {:?} overlaps another span", span.kind));
                }
                *slot = true;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let program: Self = serde_json::from_str(text)?;
        program.validate()?;
        Ok(program)
    }
}

/// Incremental construction of a [`ConicProgram`].
#[derive(Debug, Default)]
pub struct ProgramBuilder {
    var_count: usize,
    objective: Vec<(usize, f64)>,
    nonneg: AffineRows,
    soc: AffineRows,
    soc_dims: Vec<usize>,
    layout: Vec<Span>,
    meta: Option<ProgramMeta>,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reserves `len` variables, returning the first index.
    pub fn add_span(&mut self, kind: SpanKind, pattern: Option<usize>, len: usize) -> usize {
        let start = self.var_count;
        self.var_count += len;
        self.layout.push(Span {
            kind,
            pattern,
            start,
            len,
        });
        start
    }

    pub fn add_objective(&mut self, index: usize, coefficient: f64) {
        self.objective.push((index, coefficient));
    }

    /// Adds the row `Σ coef·z[index] + constant ≥ 0`.
    pub fn add_nonneg(&mut self, terms: &[(usize, f64)], constant: f64) -> usize {
        self.nonneg.push(terms, constant)
    }

    /// Adds `‖(t_1, …, t_k)‖₂ ≤ s` where each entry is an affine expression.
    pub fn add_soc(&mut self, head: (&[(usize, f64)], f64), tail: &[(Vec<(usize, f64)>, f64)]) {
        self.soc.push(head.0, head.1);
        for (terms, constant) in tail {
            self.soc.push(terms, *constant);
        }
        self.soc_dims.push(1 + tail.len());
    }

    pub fn set_meta(&mut self, meta: ProgramMeta) {
        self.meta = Some(meta);
    }

    pub fn finish(self) -> ConicProgram {
        ConicProgram {
            var_count: self.var_count,
            objective: self.objective,
            nonneg: self.nonneg,
            soc: self.soc,
            soc_dims: self.soc_dims,
            layout: self.layout,
            meta: self.meta.unwrap_or(ProgramMeta {
                loss: None,
                beta: 0.0,
                robust: None,
                n: 0,
                d: 0,
                patterns: Vec::new(),
            }),
        }
    }
}

/// Hinge: (1/n)Σ s_k + βΣ(b_i + c_i) with s_k ≥ 0 and s_k ≥ 1 − y_k Σ_i d_ik x_k·(v_i − w_i).
/// Squared: a + βΣ(b_i + c_i) with the (a, z) epigraph of ½‖Σ_i D_i X(v_i − w_i) − y‖².
/// Pattern constraints (2D_i − I) X v_i ≥ 0 and likewise for w_i.
pub fn build_standard(
    data: &Dataset,
    patterns: &[ActivationPattern],
    beta: f64,
    loss: LossKind,
) -> Result<ConicProgram> {
    compile(data, patterns, beta, loss, None)
}

/// Robust hinge program under ℓ∞ perturbations of radius ε: the per-sample
/// hinge term gains ε‖Σ_i d_ik (v_i − w_i)‖₁ and pattern constraints become
/// (2D_i − I) X v_i ≥ ε‖v_i‖₁.
pub fn build_hinge_robust(
    data: &Dataset,
    patterns: &[ActivationPattern],
    beta: f64,
    spec: &RobustSpec,
) -> Result<ConicProgram> {
    if spec.norm != PerturbationNorm::LInf {
        return Err(Error::InvalidArgument(
            "robust hinge builder expects an l-infinity perturbation ball".into(),
        ));
    }
    build_lp_robust(data, patterns, beta, spec)
}

/// Robust hinge program for an ℓp ball, p ∈ {1, 2, ∞}, using the dual norm.
pub fn build_lp_robust(
    data: &Dataset,
    patterns: &[ActivationPattern],
    beta: f64,
    spec: &RobustSpec,
) -> Result<ConicProgram> {
    if data.task() != Task::Binary {
        return Err(Error::InvalidData("robust hinge training needs binary labels".into()));
    }
    compile(data, patterns, beta, LossKind::HINGE, Some(*spec))
}

/// Robust squared-loss program: z_k ≥ |Σ_i d_ik x_k·(v_i − w_i) − y_k| + ε‖Σ_i d_ik(v_i − w_i)‖_*,
/// z_{n+1} ≥ |2a − ¼|, ‖z‖₂ ≤ 2a + ¼, robust pattern constraints, objective a + βΣ(b_i + c_i).
pub fn build_squared_robust(
    data: &Dataset,
    patterns: &[ActivationPattern],
    beta: f64,
    spec: &RobustSpec,
) -> Result<ConicProgram> {
    compile(data, patterns, beta, LossKind::Squared, Some(*spec))
}

fn compile(
    data: &Dataset,
    patterns: &[ActivationPattern],
    beta: f64,
    loss: LossKind,
    robust: Option<RobustSpec>,
) -> Result<ConicProgram> {
    if patterns.is_empty() {
        return Err(Error::InvalidArgument("pattern list is empty".into()));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!("beta must be > 0, got {beta}")));
    }
    loss.validate()?;
    let (n, d) = (data.n(), data.d());
    if let Some(p) = patterns.iter().find(|p| p.len() != n) {
        return Err(Error::Dimension(format!(
            "pattern of length {} for {n} samples",
            p.len()
        )));
    }
    if loss.is_hinge() && data.task() != Task::Binary {
        return Err(Error::InvalidData("hinge loss needs binary labels".into()));
    }
    if let Some(spec) = robust {
        if !(spec.eps >= 0.0 && spec.eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("eps must be >= 0, got {}", spec.eps)));
        }
    }
    let frozen = data.frozen_columns();
    let free: Vec<usize> = (0..d).filter(|j| !frozen.contains(j)).collect();
    // With ε = 0 (or nothing perturbable) the robust terms vanish and no
    // auxiliaries are emitted, leaving exactly the standard program.
    let active = robust.filter(|s| s.eps > 0.0 && !free.is_empty());
    let x = data.x();
    let y = data.y();
    let p_count = patterns.len();

    let mut b = ProgramBuilder::new();
    let mut v = Vec::with_capacity(p_count);
    let mut w = Vec::with_capacity(p_count);
    let mut bv = Vec::with_capacity(p_count);
    let mut cw = Vec::with_capacity(p_count);
    for i in 0..p_count {
        v.push(b.add_span(SpanKind::V, Some(i), d));
        w.push(b.add_span(SpanKind::W, Some(i), d));
        bv.push(b.add_span(SpanKind::NormV, Some(i), 1));
        cw.push(b.add_span(SpanKind::NormW, Some(i), 1));
    }
    // Per dual-norm bound: ℓ1 needs one auxiliary per free coordinate, ℓ2 and ℓ∞ one scalar.
    let aux_len = |spec: &RobustSpec| match spec.norm {
        PerturbationNorm::LInf => free.len(),
        PerturbationNorm::L2 | PerturbationNorm::L1 => 1,
    };
    let mut ev = Vec::new();
    let mut ew = Vec::new();
    if let Some(spec) = &active {
        for i in 0..p_count {
            ev.push(b.add_span(SpanKind::DualV, Some(i), aux_len(spec)));
            ew.push(b.add_span(SpanKind::DualW, Some(i), aux_len(spec)));
        }
    }
    let (slack, epi_a, epi_z) = if loss.is_hinge() {
        (b.add_span(SpanKind::Slack, None, n), 0, 0)
    } else {
        let a = b.add_span(SpanKind::EpiA, None, 1);
        (0, a, b.add_span(SpanKind::EpiZ, None, n + 1))
    };
    let sample_aux = active
        .as_ref()
        .map(|spec| b.add_span(SpanKind::SampleDual, None, n * aux_len(spec)));

    // Objective.
    if loss.is_hinge() {
        for k in 0..n {
            b.add_objective(slack + k, 1.0 / n as f64);
        }
    } else {
        b.add_objective(epi_a, 1.0);
    }
    for i in 0..p_count {
        b.add_objective(bv[i], beta);
        b.add_objective(cw[i], beta);
    }

    // Pattern constraints: (2D_i − I) X u ≥ ε‖u‖_* for u ∈ {v_i, w_i}.
    let mut terms: Vec<(usize, f64)> = Vec::new();
    for i in 0..p_count {
        for (start, aux) in [(v[i], ev.get(i)), (w[i], ew.get(i))] {
            for k in 0..n {
                let sign = patterns[i].sign(k);
                terms.clear();
                terms.extend(x.row(k).iter().enumerate().map(|(j, &xv)| (start + j, sign * xv)));
                if let (Some(spec), Some(&a)) = (&active, aux) {
                    push_dual_norm_value(&mut terms, spec, a, free.len(), -spec.eps);
                }
                terms.retain(|t| t.1 != 0.0);
                b.add_nonneg(&terms, 0.0);
            }
        }
    }
    if let Some(spec) = &active {
        for i in 0..p_count {
            for (start, aux) in [(v[i], ev[i]), (w[i], ew[i])] {
                let coords: Vec<Vec<(usize, f64)>> =
                    free.iter().map(|&j| vec![(start + j, 1.0)]).collect();
                add_dual_norm_epigraph(&mut b, spec, aux, &coords);
            }
        }
    }

    // Loss rows. g_k = Σ_i d_ik (v_i − w_i), coordinate j as sparse terms.
    let active_patterns: Vec<Vec<usize>> = (0..n)
        .map(|k| (0..p_count).filter(|&i| patterns[i].active(k)).collect())
        .collect();
    for k in 0..n {
        let mut margin: Vec<(usize, f64)> = Vec::new();
        for &i in &active_patterns[k] {
            for (j, &xv) in x.row(k).iter().enumerate() {
                if xv != 0.0 {
                    margin.push((v[i] + j, xv));
                    margin.push((w[i] + j, -xv));
                }
            }
        }
        let aux = sample_aux.map(|s| s + k * active.as_ref().map_or(0, aux_len));
        if loss.is_hinge() {
            b.add_nonneg(&[(slack + k, 1.0)], 0.0);
            // s_k − 1 + y_k x_k·g_k − ε‖g_k‖_* ≥ 0
            let mut row: Vec<(usize, f64)> = vec![(slack + k, 1.0)];
            row.extend(margin.iter().map(|&(c, val)| (c, y[k] * val)));
            if let (Some(spec), Some(a)) = (&active, aux) {
                push_dual_norm_value(&mut row, spec, a, free.len(), -spec.eps);
            }
            b.add_nonneg(&row, -1.0);
        } else {
            // z_k − ε‖g_k‖_* ∓ (x_k·g_k − y_k) ≥ 0
            for sign in [-1.0, 1.0] {
                let mut row: Vec<(usize, f64)> = vec![(epi_z + k, 1.0)];
                row.extend(margin.iter().map(|&(c, val)| (c, sign * val)));
                if let (Some(spec), Some(a)) = (&active, aux) {
                    push_dual_norm_value(&mut row, spec, a, free.len(), -spec.eps);
                }
                b.add_nonneg(&row, -sign * y[k]);
            }
        }
    }
    if let (Some(spec), Some(sample_aux)) = (&active, sample_aux) {
        for k in 0..n {
            let coords: Vec<Vec<(usize, f64)>> = free
                .iter()
                .map(|&j| {
                    active_patterns[k]
                        .iter()
                        .flat_map(|&i| [(v[i] + j, 1.0), (w[i] + j, -1.0)])
                        .collect()
                })
                .collect();
            add_dual_norm_epigraph(&mut b, spec, sample_aux + k * aux_len(spec), &coords);
        }
    }
    if !loss.is_hinge() {
        // z_{n+1} ≥ |2a − ¼|
        b.add_nonneg(&[(epi_z + n, 1.0), (epi_a, -2.0)], 0.25);
        b.add_nonneg(&[(epi_z + n, 1.0), (epi_a, 2.0)], -0.25);
    }

    // Cones: ‖v_i‖ ≤ b_i, ‖w_i‖ ≤ c_i, then the squared-loss epigraph.
    for i in 0..p_count {
        for (start, norm) in [(v[i], bv[i]), (w[i], cw[i])] {
            let tail: Vec<(Vec<(usize, f64)>, f64)> =
                (0..d).map(|j| (vec![(start + j, 1.0)], 0.0)).collect();
            b.add_soc((&[(norm, 1.0)], 0.0), &tail);
        }
    }
    if !loss.is_hinge() {
        let tail: Vec<(Vec<(usize, f64)>, f64)> =
            (0..=n).map(|k| (vec![(epi_z + k, 1.0)], 0.0)).collect();
        b.add_soc((&[(epi_a, 2.0)], 0.25), &tail);
    }

    b.set_meta(ProgramMeta {
        loss: Some(loss),
        beta,
        robust,
        n,
        d,
        patterns: patterns.to_vec(),
    });
    Ok(b.finish())
}

/// Appends `scale · (value of the dual-norm auxiliary block at `aux`)` to a row.
fn push_dual_norm_value(
    row: &mut Vec<(usize, f64)>,
    spec: &RobustSpec,
    aux: usize,
    free: usize,
    scale: f64,
) {
    match spec.norm {
        PerturbationNorm::LInf => row.extend((0..free).map(|j| (aux + j, scale))),
        PerturbationNorm::L2 | PerturbationNorm::L1 => row.push((aux, scale)),
    }
}

/// Constrains the auxiliary block at `aux` to bound the dual norm of the vector
/// whose coordinates are the given linear expressions.
fn add_dual_norm_epigraph(
    b: &mut ProgramBuilder,
    spec: &RobustSpec,
    aux: usize,
    coords: &[Vec<(usize, f64)>],
) {
    match spec.norm {
        // ℓ1: e_j ≥ |g_j|, summed where used.
        PerturbationNorm::LInf => {
            for (j, expr) in coords.iter().enumerate() {
                for sign in [-1.0, 1.0] {
                    let mut row = vec![(aux + j, 1.0)];
                    row.extend(expr.iter().map(|&(c, val)| (c, sign * val)));
                    b.add_nonneg(&row, 0.0);
                }
            }
        }
        // ℓ∞: e ≥ |g_j| for every j.
        PerturbationNorm::L1 => {
            for expr in coords {
                for sign in [-1.0, 1.0] {
                    let mut row = vec![(aux, 1.0)];
                    row.extend(expr.iter().map(|&(c, val)| (c, sign * val)));
                    b.add_nonneg(&row, 0.0);
                }
            }
        }
        // ℓ2: ‖g‖₂ ≤ e.
        PerturbationNorm::L2 => {
            let tail: Vec<(Vec<(usize, f64)>, f64)> =
                coords.iter().map(|expr| (expr.clone(), 0.0)).collect();
            b.add_soc((&[(aux, 1.0)], 0.0), &tail);
        }
    }
}

/// Extracts (v_i, w_i) from a raw primal vector; the objective is `c·z`.
pub fn decode_solution(program: &ConicProgram, raw: &[f64]) -> Result<ConvexSolution> {
    if raw.len() != program.var_count {
        return Err(Error::Dimension(format!(
            "primal has {} entries, program has {} variables",
            raw.len(),
            program.var_count
        )));
    }
    let p_count = program.meta.patterns.len();
    let d = program.meta.d;
    let mut solution = ConvexSolution::zeros(program.meta.patterns.clone(), d, 0.0);
    for span in &program.layout {
        let target = match (span.kind, span.pattern) {
            (SpanKind::V, Some(i)) if i < p_count => &mut solution.v[i],
            (SpanKind::W, Some(i)) if i < p_count => &mut solution.w[i],
            _ => continue,
        };
        if span.len != d {
            return Err(Error::MalformedProgram(format!(
                "weight span of length {} for d = {d}",
                span.len
            )));
        }
        target.copy_from_slice(&raw[span.start..span.start + span.len]);
    }
    solution.objective = program.objective_value(raw);
    Ok(solution)
}

/// Raw primal vector realizing a given (v_i, w_i) with every auxiliary at its
/// smallest feasible value, so the point is feasible whenever the pattern
/// constraints hold.
pub fn encode_solution(program: &ConicProgram, data: &Dataset, v: &[Vec<f64>], w: &[Vec<f64>]) -> Result<Vec<f64>> {
    let meta = &program.meta;
    if v.len() != meta.patterns.len() || w.len() != meta.patterns.len() {
        return Err(Error::Dimension("one (v, w) pair per pattern is required".into()));
    }
    let solution = ConvexSolution {
        patterns: meta.patterns.clone(),
        v: v.to_vec(),
        w: w.to_vec(),
        objective: 0.0,
    };
    let n = meta.n;
    let frozen = data.frozen_columns();
    let restrict = |u: &[f64]| -> Vec<f64> {
        u.iter()
            .enumerate()
            .filter(|(j, _)| !frozen.contains(j))
            .map(|(_, &x)| x)
            .collect()
    };
    let mut z = vec![0.0; program.var_count];
    let preds = solution.predictions(data.x());
    let dual_value = |g: &[f64]| meta.robust.map_or(0.0, |s| s.norm.dual_norm(&restrict(g)));
    let eps = meta.robust.map_or(0.0, |s| s.eps);
    let mut sq_total = 0.0;
    let mut residuals = vec![0.0; n];
    for k in 0..n {
        let g = solution.effective_direction(k);
        let r = preds[k] - data.y()[k];
        residuals[k] = r.abs() + eps * dual_value(&g);
        sq_total += residuals[k] * residuals[k];
    }
    for span in &program.layout {
        let slot = &mut z[span.start..span.start + span.len];
        match (span.kind, span.pattern) {
            (SpanKind::V, Some(i)) => slot.copy_from_slice(&v[i]),
            (SpanKind::W, Some(i)) => slot.copy_from_slice(&w[i]),
            (SpanKind::NormV, Some(i)) => slot[0] = norm2(&v[i]),
            (SpanKind::NormW, Some(i)) => slot[0] = norm2(&w[i]),
            (SpanKind::DualV | SpanKind::DualW, Some(i)) => {
                let u = if span.kind == SpanKind::DualV { &v[i] } else { &w[i] };
                fill_dual_aux(slot, meta.robust.as_ref(), &restrict(u));
            }
            (SpanKind::SampleDual, _) => {
                let per = span.len / n.max(1);
                for k in 0..n {
                    let g = restrict(&solution.effective_direction(k));
                    fill_dual_aux(&mut slot[k * per..(k + 1) * per], meta.robust.as_ref(), &g);
                }
            }
            (SpanKind::Slack, _) => {
                for k in 0..n {
                    let g = solution.effective_direction(k);
                    let margin = data.y()[k] * preds[k];
                    slot[k] = (1.0 - margin + eps * dual_value(&g)).max(0.0);
                }
            }
            (SpanKind::EpiA, _) => slot[0] = 0.5 * sq_total,
            (SpanKind::EpiZ, _) => {
                slot[..n].copy_from_slice(&residuals);
                slot[n] = (sq_total - 0.25).abs();
            }
            _ => {}
        }
    }
    Ok(z)
}

fn fill_dual_aux(slot: &mut [f64], spec: Option<&RobustSpec>, u: &[f64]) {
    let Some(spec) = spec else { return };
    match spec.norm {
        PerturbationNorm::LInf => {
            for (s, x) in slot.iter_mut().zip(u) {
                *s = x.abs();
            }
        }
        _ => slot[0] = spec.norm.dual_norm(u),
    }
}
