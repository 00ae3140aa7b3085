//! Conic solver for programs with nonnegative-orthant and second-order-cone rows.
//!
//! Programs are converted to the standard form `min cᵀx s.t. s = h − Gx ∈ K`
//! with `G = −A` and `h = b`. The default method is a homogeneous self-dual
//! interior-point method; an operator-splitting method is available for very
//! large instances and as an independent reference.

mod admm;
mod amd;
mod cones;
mod dense;
mod ipm;
mod kkt;
mod ldl;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::norm2;
use crate::program::ConicProgram;

pub use cones::Cones;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    Infeasible,
    Unbounded,
}

impl SolveStatus {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Optimal => "optimal",
            Self::MaxIter => "max_iter",
            Self::Infeasible => "infeasible",
            Self::Unbounded => "unbounded",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    InteriorPoint,
    OperatorSplitting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveSettings {
    /// Relative duality gap tolerance.
    pub tol_gap: f64,
    /// Constraint violation and dual residual tolerance, relative to
    /// 1 + the largest offset and objective coefficient respectively.
    pub tol_feas: f64,
    pub max_iter: usize,
    pub algorithm: Algorithm,
    /// Diagonal regularization of the interior-point KKT system.
    pub static_reg: f64,
    /// Per-iteration progress on stderr.
    #[serde(default)]
    pub verbose: bool,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            tol_gap: 1e-8,
            tol_feas: 1e-8,
            max_iter: 20000,
            algorithm: Algorithm::InteriorPoint,
            static_reg: 1e-9,
            verbose: false,
        }
    }
}

impl SolveSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !ok(self.tol_gap) || !ok(self.tol_feas) || self.max_iter == 0 {
            return Err(Error::InvalidArgument(
                "solver tolerances must be positive and max_iter at least 1".into(),
            ));
        }
        if !(self.static_reg >= 0.0 && self.static_reg.is_finite()) {
            return Err(Error::InvalidArgument("static regularization must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub primal: Vec<f64>,
    pub objective: f64,
    /// Relative duality gap at the returned point.
    pub gap: f64,
    /// Largest cone-row violation of `primal`, as reported by [`check_point`].
    pub max_violation: f64,
    pub iterations: usize,
}

impl SolveResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Sparse matrix in compressed rows.
#[derive(Debug, Clone)]
pub(crate) struct Csr {
    pub rows: usize,
    pub cols: usize,
    pub rowptr: Vec<usize>,
    pub colind: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    /// Builds from (row, col, value) entries, summing duplicates.
    fn from_entries(rows: usize, cols: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.sort_unstable_by_key(|e| (e.0, e.1));
        let mut rowptr = vec![0usize; rows + 1];
        let mut colind = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry") += v;
                continue;
            }
            last = Some((r, c));
            colind.push(c);
            values.push(v);
            rowptr[r + 1] += 1;
        }
        for r in 0..rows {
            rowptr[r + 1] += rowptr[r];
        }
        Self {
            rows,
            cols,
            rowptr,
            colind,
            values,
        }
    }

    /// out = self · x.
    pub fn mul(&self, x: &[f64], out: &mut [f64]) {
        for r in 0..self.rows {
            let mut s = 0.0;
            for p in self.rowptr[r]..self.rowptr[r + 1] {
                s += self.values[p] * x[self.colind[p]];
            }
            out[r] = s;
        }
    }

    /// out = selfᵀ · y.
    pub fn mul_t(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for r in 0..self.rows {
            let yr = y[r];
            if yr == 0.0 {
                continue;
            }
            for p in self.rowptr[r]..self.rowptr[r + 1] {
                out[self.colind[p]] += self.values[p] * yr;
            }
        }
    }
}

/// `min cᵀx s.t. h − Gx ∈ K`.
#[derive(Debug, Clone)]
pub(crate) struct StandardForm {
    pub c: Vec<f64>,
    pub g: Csr,
    pub h: Vec<f64>,
    pub cones: Cones,
}

impl StandardForm {
    pub fn from_program(program: &ConicProgram) -> Self {
        let n = program.var_count;
        let nn = program.nonneg.len();
        let m = nn + program.soc.len();
        let mut c = vec![0.0; n];
        for &(i, v) in &program.objective {
            c[i] += v;
        }
        let mut entries = Vec::with_capacity(program.nonneg.triplets.len() + program.soc.triplets.len());
        for t in &program.nonneg.triplets {
            entries.push((t.row, t.col, -t.value));
        }
        for t in &program.soc.triplets {
            entries.push((nn + t.row, t.col, -t.value));
        }
        let mut h = program.nonneg.offset.clone();
        h.extend_from_slice(&program.soc.offset);
        Self {
            c,
            g: Csr::from_entries(m, n, entries),
            h,
            cones: Cones::new(nn, &program.soc_dims),
        }
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn m(&self) -> usize {
        self.h.len()
    }

    /// Primal violation tolerance, relative to the largest offset.
    pub fn primal_tol(&self, settings: &SolveSettings) -> f64 {
        settings.tol_feas * (1.0 + self.h.iter().fold(0.0f64, |a, v| a.max(v.abs())))
    }
}

fn cone_violation(cones: &Cones, s: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for &v in &s[..cones.nonneg] {
        worst = worst.max(-v);
    }
    for &(o, k) in &cones.soc {
        worst = worst.max(norm2(&s[o + 1..o + k]) - s[o]);
    }
    worst
}

/// Objective `c·z` and the largest violation over all cone rows of `point`.
pub fn check_point(program: &ConicProgram, point: &[f64]) -> Result<(f64, f64)> {
    if point.len() != program.var_count {
        return Err(Error::Dimension(format!(
            "point has {} entries, program has {} variables",
            point.len(),
            program.var_count
        )));
    }
    let nonneg = program.nonneg.eval(point);
    let soc = program.soc.eval(point);
    let mut worst: f64 = 0.0;
    for v in nonneg {
        worst = worst.max(-v);
    }
    let mut offset = 0;
    for &k in &program.soc_dims {
        worst = worst.max(norm2(&soc[offset + 1..offset + k]) - soc[offset]);
        offset += k;
    }
    Ok((program.objective_value(point), worst))
}

/// Primal-dual iterate in standard-form coordinates.
#[derive(Debug, Clone)]
pub(crate) struct RawSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub gap: f64,
    pub iterations: usize,
}

/// Solves the program; deterministic for identical inputs.
pub fn solve(program: &ConicProgram, settings: &SolveSettings) -> Result<SolveResult> {
    program.validate()?;
    settings.validate()?;
    let form = StandardForm::from_program(program);
    let raw = match settings.algorithm {
        Algorithm::InteriorPoint => ipm::solve(&form, settings),
        Algorithm::OperatorSplitting => admm::solve(&form, settings),
    };
    let (objective, max_violation) = check_point(program, &raw.x)?;
    let mut status = raw.status;
    if status == SolveStatus::Optimal && !(raw.gap <= settings.tol_gap && max_violation <= form.primal_tol(settings)) {
        status = SolveStatus::MaxIter;
    }
    Ok(SolveResult {
        status,
        primal: raw.x,
        objective,
        gap: raw.gap,
        max_violation,
        iterations: raw.iterations,
    })
}

/// Like [`solve`] but only `Optimal` results are returned.
pub fn solve_optimal(program: &ConicProgram, settings: &SolveSettings) -> Result<SolveResult> {
    let result = solve(program, settings)?;
    if result.status != SolveStatus::Optimal {
        return Err(Error::Solver {
            status: result.status,
            gap: result.gap,
            max_violation: result.max_violation,
        });
    }
    Ok(result)
}

#[cfg(test)]
mod tests;
