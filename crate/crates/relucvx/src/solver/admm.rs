//! Operator-splitting method for `min cᵀx s.t. Gx + s = h, s ∈ K`.
//!
//! Iterates on an equilibrated copy of the problem:
//! (σI + ρGᵀG) x⁺ = σx − c − ρGᵀ(s − h + y/ρ), relaxed ĝ = αGx⁺ + (1 − α)(h − s),
//! s⁺ = Π_K(h − ĝ − y/ρ), y⁺ = y + ρ(ĝ + s⁺ − h).

use super::cones::Cones;
use super::{cone_violation, Csr, RawSolution, SolveSettings, SolveStatus, StandardForm};
use crate::matrix::{dot, norm2};

const SIGMA: f64 = 1e-6;
const RELAX: f64 = 1.6;
const RUIZ_PASSES: usize = 15;
const ADAPT_EVERY: usize = 50;
const DENSE_LIMIT: usize = 3000;

pub(crate) fn solve(form: &StandardForm, settings: &SolveSettings) -> RawSolution {
    let (n, m) = (form.n(), form.m());
    let scaled = Equilibrated::new(form);
    let g = &scaled.g;
    let mut rho = 0.1;
    let mut system = LinearSystem::new(g, rho);

    let mut x = vec![0.0; n];
    let mut s = vec![0.0; m];
    let mut y = vec![0.0; m];
    let mut gx = vec![0.0; m];
    let mut ghat = vec![0.0; m];
    let mut rhs = vec![0.0; n];
    let mut tmp_m = vec![0.0; m];
    let mut tmp_n = vec![0.0; n];
    let c_norm = form.c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut status = SolveStatus::MaxIter;
    let mut iterations = settings.max_iter;
    let mut gap = f64::INFINITY;

    for iter in 0..settings.max_iter {
        for i in 0..m {
            tmp_m[i] = s[i] - scaled.h[i] + y[i] / rho;
        }
        g.mul_t(&tmp_m, &mut tmp_n);
        for j in 0..n {
            rhs[j] = SIGMA * x[j] - scaled.c[j] - rho * tmp_n[j];
        }
        system.solve(g, &rhs, &mut x);
        g.mul(&x, &mut gx);
        for i in 0..m {
            ghat[i] = RELAX * gx[i] + (1.0 - RELAX) * (scaled.h[i] - s[i]);
            tmp_m[i] = scaled.h[i] - ghat[i] - y[i] / rho;
        }
        project(&form.cones, &mut tmp_m);
        s.copy_from_slice(&tmp_m);
        for i in 0..m {
            y[i] += rho * (ghat[i] + s[i] - scaled.h[i]);
        }

        if iter % 10 == 9 || iter + 1 == settings.max_iter {
            let report = scaled.residuals(form, &x, &s, &y);
            gap = report.gap;
            if report.primal <= form.primal_tol(settings)
                && report.dual <= settings.tol_feas * (1.0 + c_norm)
                && report.gap <= settings.tol_gap
            {
                status = SolveStatus::Optimal;
                iterations = iter + 1;
                break;
            }
            if iter % ADAPT_EVERY == ADAPT_EVERY - 1 {
                let ratio = (report.primal_scaled / report.dual_scaled.max(1e-30)).sqrt();
                if !(0.2..=5.0).contains(&ratio) && ratio.is_finite() {
                    rho = (rho * ratio).clamp(1e-6, 1e6);
                    system = LinearSystem::new(g, rho);
                }
            }
        }
    }
    RawSolution {
        status,
        x: scaled.unscale_x(&x),
        gap,
        iterations,
    }
}

struct Residuals {
    primal: f64,
    dual: f64,
    gap: f64,
    primal_scaled: f64,
    dual_scaled: f64,
}

/// Ruiz-equilibrated problem: x = D x̂, ŝ = E s, ĉ = γ D c.
struct Equilibrated {
    c: Vec<f64>,
    g: Csr,
    h: Vec<f64>,
    d: Vec<f64>,
    e: Vec<f64>,
    cost: f64,
}

impl Equilibrated {
    fn new(form: &StandardForm) -> Self {
        let (n, m) = (form.n(), form.m());
        let mut g = form.g.clone();
        let mut d = vec![1.0; n];
        let mut e = vec![1.0; m];
        for _ in 0..RUIZ_PASSES {
            let mut col = vec![0.0f64; n];
            let mut row = vec![0.0f64; m];
            for r in 0..m {
                for p in g.rowptr[r]..g.rowptr[r + 1] {
                    let v = g.values[p].abs();
                    row[r] = row[r].max(v);
                    col[g.colind[p]] = col[g.colind[p]].max(v);
                }
            }
            // Second-order blocks share one row scale so the cone is preserved.
            for &(o, k) in &form.cones.soc {
                let peak = row[o..o + k].iter().fold(0.0f64, |a, &v| a.max(v));
                row[o..o + k].fill(peak);
            }
            let cs: Vec<f64> = col.iter().map(|&v| if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 }).collect();
            let rs: Vec<f64> = row.iter().map(|&v| if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 }).collect();
            for r in 0..m {
                for p in g.rowptr[r]..g.rowptr[r + 1] {
                    g.values[p] *= rs[r] * cs[g.colind[p]];
                }
            }
            for j in 0..n {
                d[j] *= cs[j];
            }
            for r in 0..m {
                e[r] *= rs[r];
            }
        }
        let c0: Vec<f64> = (0..n).map(|j| form.c[j] * d[j]).collect();
        let cmax = c0.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let cost = if cmax > 0.0 { 1.0 / cmax } else { 1.0 };
        Self {
            c: c0.iter().map(|v| v * cost).collect(),
            h: (0..m).map(|i| form.h[i] * e[i]).collect(),
            g,
            d,
            e,
            cost,
        }
    }

    fn unscale_x(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.d).map(|(a, b)| a * b).collect()
    }

    fn residuals(&self, form: &StandardForm, xs: &[f64], ss: &[f64], ys: &[f64]) -> Residuals {
        let (n, m) = (form.n(), form.m());
        let x = self.unscale_x(xs);
        let s: Vec<f64> = (0..m).map(|i| ss[i] / self.e[i]).collect();
        let y: Vec<f64> = (0..m).map(|i| ys[i] * self.e[i] / self.cost).collect();
        let mut gx = vec![0.0; m];
        form.g.mul(&x, &mut gx);
        let mut gty = vec![0.0; n];
        form.g.mul_t(&y, &mut gty);
        let mut primal = 0.0f64;
        let mut primal_scaled = 0.0f64;
        for i in 0..m {
            let r = gx[i] + s[i] - form.h[i];
            primal = primal.max(r.abs());
            primal_scaled = primal_scaled.max((r * self.e[i]).abs());
        }
        primal = primal.max(cone_violation(&form.cones, &{
            let mut slack = gx.clone();
            for i in 0..m {
                slack[i] = form.h[i] - slack[i];
            }
            slack
        }));
        let mut dual = 0.0f64;
        let mut dual_scaled = 0.0f64;
        for j in 0..n {
            let r = gty[j] + form.c[j];
            dual = dual.max(r.abs());
            dual_scaled = dual_scaled.max((r * self.d[j] * self.cost).abs());
        }
        let pobj = dot(&form.c, &x);
        let dobj = -dot(&form.h, &y);
        Residuals {
            primal,
            dual,
            gap: (pobj - dobj).abs() / pobj.abs().max(1.0),
            primal_scaled,
            dual_scaled,
        }
    }
}

/// Euclidean projection onto K, in place.
fn project(cones: &Cones, v: &mut [f64]) {
    for x in &mut v[..cones.nonneg] {
        *x = x.max(0.0);
    }
    for &(o, k) in &cones.soc {
        let t = v[o];
        let nv = norm2(&v[o + 1..o + k]);
        if nv <= t {
            continue;
        }
        if nv <= -t {
            v[o..o + k].fill(0.0);
            continue;
        }
        let scale = 0.5 * (t + nv);
        v[o] = scale;
        for x in &mut v[o + 1..o + k] {
            *x *= scale / nv;
        }
    }
}

/// σI + ρGᵀG, factored densely for small problems, otherwise solved by
/// Jacobi-preconditioned conjugate gradients.
enum LinearSystem {
    Dense { n: usize, chol: Vec<f64> },
    Iterative { rho: f64, diag: Vec<f64> },
}

impl LinearSystem {
    fn new(g: &Csr, rho: f64) -> Self {
        let n = g.cols;
        if n <= DENSE_LIMIT {
            let mut a = vec![0.0; n * n];
            for r in 0..g.rows {
                let span = g.rowptr[r]..g.rowptr[r + 1];
                for p in span.clone() {
                    let (i, vi) = (g.colind[p], g.values[p]);
                    for q in span.clone() {
                        let j = g.colind[q];
                        if j <= i {
                            a[i * n + j] += rho * vi * g.values[q];
                        }
                    }
                }
            }
            for i in 0..n {
                a[i * n + i] += SIGMA;
            }
            cholesky(&mut a, n);
            Self::Dense { n, chol: a }
        } else {
            let mut diag = vec![SIGMA; n];
            for p in 0..g.values.len() {
                diag[g.colind[p]] += rho * g.values[p] * g.values[p];
            }
            Self::Iterative { rho, diag }
        }
    }

    /// Solves in place; `x` holds the warm start for the iterative variant.
    fn solve(&self, g: &Csr, rhs: &[f64], x: &mut [f64]) {
        match self {
            Self::Dense { n, chol } => {
                x.copy_from_slice(rhs);
                for i in 0..*n {
                    let s = dot(&chol[i * n..i * n + i], &x[..i]);
                    x[i] = (x[i] - s) / chol[i * n + i];
                }
                for i in (0..*n).rev() {
                    x[i] /= chol[i * n + i];
                    let xi = x[i];
                    for j in 0..i {
                        x[j] -= chol[i * n + j] * xi;
                    }
                }
            }
            Self::Iterative { rho, diag } => conjugate_gradient(g, *rho, diag, rhs, x),
        }
    }
}

/// In-place lower Cholesky of a row-major SPD matrix.
fn cholesky(a: &mut [f64], n: usize) {
    for j in 0..n {
        let s = {
            let row = &a[j * n..j * n + j];
            dot(row, row)
        };
        let d = (a[j * n + j] - s).max(1e-300).sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let (top, bottom) = a.split_at_mut(i * n);
            let rj = &top[j * n..j * n + j];
            let ri = &mut bottom[..j + 1];
            let s = dot(&ri[..j], rj);
            ri[j] = (ri[j] - s) / d;
        }
    }
}

fn conjugate_gradient(g: &Csr, rho: f64, diag: &[f64], rhs: &[f64], x: &mut [f64]) {
    let n = x.len();
    let mut gx = vec![0.0; g.rows];
    let mut ap = vec![0.0; n];
    let apply = |v: &[f64], out: &mut [f64], gx: &mut [f64]| {
        g.mul(v, gx);
        g.mul_t(gx, out);
        for j in 0..n {
            out[j] = SIGMA * v[j] + rho * out[j];
        }
    };
    let mut r = vec![0.0; n];
    apply(x, &mut r, &mut gx);
    for j in 0..n {
        r[j] = rhs[j] - r[j];
    }
    let tol = 1e-12 * (1.0 + norm2(rhs));
    let mut zv: Vec<f64> = (0..n).map(|j| r[j] / diag[j]).collect();
    let mut p = zv.clone();
    let mut rz = dot(&r, &zv);
    for _ in 0..(2 * n).max(50) {
        if norm2(&r) <= tol {
            break;
        }
        apply(&p, &mut ap, &mut gx);
        let alpha = rz / dot(&p, &ap);
        for j in 0..n {
            x[j] += alpha * p[j];
            r[j] -= alpha * ap[j];
        }
        for j in 0..n {
            zv[j] = r[j] / diag[j];
        }
        let rz_new = dot(&r, &zv);
        let beta = rz_new / rz;
        rz = rz_new;
        for j in 0..n {
            p[j] = zv[j] + beta * p[j];
        }
    }
}
