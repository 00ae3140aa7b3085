//! Quasi-definite KKT system `[δI Gᵀ; G −(W² + δI)]` of the interior-point method.

use super::cones::{Cones, Scaling};
use super::dense::PivotRepair;
use super::ldl::{LdlFactor, UpperCsc};
use super::StandardForm;

const DENSE_FRACTION: f64 = 0.5;
const REFINE_STEPS: usize = 10;
const REG_ATTEMPTS: usize = 6;
const REG_BOOST: f64 = 100.0;

pub(crate) struct KktSystem {
    n: usize,
    m: usize,
    matrix: UpperCsc,
    /// First W² entry of each z column.
    wpos: Vec<usize>,
    factor: LdlFactor,
    reg: f64,
    repair: PivotRepair,
    work: Vec<f64>,
    residual: Vec<f64>,
    correction: Vec<f64>,
    tmp_m: Vec<f64>,
    tmp_n: Vec<f64>,
    tmp_w: Vec<f64>,
}

impl KktSystem {
    pub fn new(form: &StandardForm, reg: f64) -> Self {
        let (n, m) = (form.n(), form.m());
        let cones = &form.cones;
        let mut colptr = Vec::with_capacity(n + m + 1);
        let mut rowind = Vec::new();
        colptr.push(0);
        for j in 0..n {
            rowind.push(j);
            colptr.push(rowind.len());
        }
        let mut block_of = vec![None; m];
        for &(o, k) in &cones.soc {
            for a in 0..k {
                block_of[o + a] = Some(o);
            }
        }
        let mut wpos = Vec::with_capacity(m);
        for i in 0..m {
            let g = &form.g;
            rowind.extend_from_slice(&g.colind[g.rowptr[i]..g.rowptr[i + 1]]);
            wpos.push(rowind.len());
            match block_of[i] {
                None => rowind.push(n + i),
                Some(o) => rowind.extend((o..=i).map(|r| n + r)),
            }
            colptr.push(rowind.len());
        }
        let values = vec![0.0; rowind.len()];
        let matrix = UpperCsc {
            n: n + m,
            colptr,
            rowind,
            values,
        };
        let mut signs = vec![1i8; n];
        signs.extend(std::iter::repeat(-1i8).take(m));
        let factor = LdlFactor::analyze(&matrix, &signs, DENSE_FRACTION);
        let mut kkt = Self {
            n,
            m,
            matrix,
            wpos,
            factor,
            reg,
            repair: PivotRepair {
                threshold: 1e-13,
                replacement: 2e-7,
            },
            work: Vec::new(),
            residual: vec![0.0; n + m],
            correction: vec![0.0; n + m],
            tmp_m: vec![0.0; m],
            tmp_n: vec![0.0; n],
            tmp_w: vec![0.0; m],
        };
        kkt.fill_static(form);
        kkt
    }

    fn fill_static(&mut self, form: &StandardForm) {
        let n = self.n;
        for i in 0..self.m {
            let g = &form.g;
            let start = self.matrix.colptr[n + i];
            let len = g.rowptr[i + 1] - g.rowptr[i];
            self.matrix.values[start..start + len].copy_from_slice(&g.values[g.rowptr[i]..g.rowptr[i + 1]]);
        }
    }

    /// Writes −(W² + δI) into the z block and factors. When elimination
    /// overflows or needs pivot repairs, δ is raised by `REG_BOOST` and the
    /// matrix refactored.
    pub fn factor(&mut self, cones: &Cones, scaling: Option<&Scaling>) {
        let mut reg = self.reg;
        for _ in 0..REG_ATTEMPTS {
            self.fill(cones, scaling, reg);
            self.factor.factor(&self.matrix.values, &self.repair);
            if self.factor.repaired == 0 && self.factor.is_finite() {
                return;
            }
            reg = (reg * REG_BOOST).max(1e-10);
        }
    }

    fn fill(&mut self, cones: &Cones, scaling: Option<&Scaling>, reg: f64) {
        for j in 0..self.n {
            self.matrix.values[self.matrix.colptr[j]] = reg;
        }
        for i in 0..cones.nonneg {
            let w = scaling.map_or(1.0, |s| s.nonneg[i] * s.nonneg[i]);
            self.matrix.values[self.wpos[i]] = -(w + reg);
        }
        for (b, &(o, k)) in cones.soc.iter().enumerate() {
            for bcol in 0..k {
                let start = self.wpos[o + bcol];
                for a in 0..=bcol {
                    let w = match scaling {
                        Some(s) => s.soc_sq_entry(b, a, bcol),
                        None => f64::from(u8::from(a == bcol)),
                    };
                    let r = if a == bcol { reg } else { 0.0 };
                    self.matrix.values[start + a] = -(w + r);
                }
            }
        }
    }

    /// Solves `[0 Gᵀ; G −W²] [x; z] = [rx; rz]` with iterative refinement.
    pub fn solve(
        &mut self,
        form: &StandardForm,
        scaling: Option<&Scaling>,
        rhs: &[f64],
        sol: &mut [f64],
    ) {
        let total = self.n + self.m;
        sol.copy_from_slice(rhs);
        self.factor.solve(sol, &mut self.work);
        let scale = 1.0 + rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut last = f64::INFINITY;
        for _ in 0..REFINE_STEPS {
            self.apply_true(form, scaling, sol);
            let mut err = 0.0f64;
            for i in 0..total {
                self.residual[i] = rhs[i] - self.residual[i];
                err = err.max(self.residual[i].abs());
            }
            if err <= 1e-14 * scale || err >= last {
                break;
            }
            last = err;
            self.correction.copy_from_slice(&self.residual);
            self.factor.solve(&mut self.correction, &mut self.work);
            for (s, c) in sol.iter_mut().zip(&self.correction) {
                *s += c;
            }
        }
    }

    /// residual ← K·sol for the unregularized K.
    fn apply_true(&mut self, form: &StandardForm, scaling: Option<&Scaling>, sol: &[f64]) {
        let (n, m) = (self.n, self.m);
        let (x, z) = sol.split_at(n);
        form.g.mul_t(z, &mut self.tmp_n);
        self.residual[..n].copy_from_slice(&self.tmp_n);
        form.g.mul(x, &mut self.tmp_m);
        match scaling {
            Some(s) => s.apply_sq(&form.cones, z, &mut self.tmp_w),
            None => self.tmp_w.copy_from_slice(z),
        }
        for i in 0..m {
            self.residual[n + i] = self.tmp_m[i] - self.tmp_w[i];
        }
    }

    pub fn repaired(&self) -> usize {
        self.factor.repaired
    }
}
