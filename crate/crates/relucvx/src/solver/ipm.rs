//! Homogeneous self-dual interior-point method with Nesterov–Todd scaling and
//! Mehrotra predictor-corrector steps.
//!
//! The embedding keeps (x, s, z, τ, κ) with residuals
//! r_x = Gᵀz + cτ, r_z = s + Gx − hτ, r_τ = κ + cᵀx + hᵀz.

use super::cones::{Cones, Scaling};
use super::kkt::KktSystem;
use super::{cone_violation, RawSolution, SolveSettings, SolveStatus, StandardForm};
use crate::matrix::dot;

const STEP_FRACTION: f64 = 0.99;
const INFEASIBILITY_RATIO: f64 = 1e-8;
const STALL_WINDOW: usize = 25;
const MIN_STEP: f64 = 1e-10;

struct Iterate {
    x: Vec<f64>,
    s: Vec<f64>,
    z: Vec<f64>,
    tau: f64,
    kappa: f64,
}

struct Metrics {
    gap: f64,
    dres: f64,
    violation: f64,
}

pub(crate) fn solve(form: &StandardForm, settings: &SolveSettings) -> RawSolution {
    let (n, m) = (form.n(), form.m());
    let cones = &form.cones;
    if m == 0 {
        // No constraints: bounded only if c = 0.
        let status = if form.c.iter().all(|&v| v == 0.0) {
            SolveStatus::Optimal
        } else {
            SolveStatus::Unbounded
        };
        return RawSolution {
            status,
            x: vec![0.0; n],
            gap: 0.0,
            iterations: 0,
        };
    }
    let mut kkt = KktSystem::new(form, settings.static_reg);
    let mut it = initial_point(form, &mut kkt);
    let nu = cones.degree() as f64;
    let c_norm = inf_norm(&form.c);
    let primal_tol = form.primal_tol(settings);

    let mut rx = vec![0.0; n];
    let mut rz = vec![0.0; m];
    let mut tau_col = vec![0.0; n + m];
    let mut lambda = vec![0.0; m];
    let mut ds_vec = vec![0.0; m];
    let mut cross = vec![0.0; m];
    let mut ws = Workspace::new(n, m);
    let mut tmp = vec![0.0; m];
    let mut tmp2 = vec![0.0; m];
    let mut gx = vec![0.0; m];
    let mut gtz = vec![0.0; n];

    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    let mut best_iter = 0usize;
    let mut status = SolveStatus::MaxIter;
    let mut iterations = 0;

    for iter in 0..settings.max_iter {
        iterations = iter;
        // Residuals.
        form.g.mul_t(&it.z, &mut gtz);
        form.g.mul(&it.x, &mut gx);
        for j in 0..n {
            rx[j] = gtz[j] + form.c[j] * it.tau;
        }
        for i in 0..m {
            rz[i] = it.s[i] + gx[i] - form.h[i] * it.tau;
        }
        let cx = dot(&form.c, &it.x);
        let hz = dot(&form.h, &it.z);
        let rtau = it.kappa + cx + hz;

        let metrics = measure(form, &it);
        if settings.verbose {
            eprintln!(
                "{iter:4} gap {:.2e} dres {:.2e} viol {:.2e} tau {:.2e} kappa {:.2e} repaired {}",
                metrics.gap,
                metrics.dres,
                metrics.violation,
                it.tau,
                it.kappa,
                kkt.repaired()
            );
        }
        let merit = [
            metrics.gap / settings.tol_gap,
            metrics.dres / (settings.tol_feas * (1.0 + c_norm)),
            metrics.violation / primal_tol,
        ]
        .into_iter()
        .try_fold(0.0f64, |acc, v| v.is_finite().then(|| acc.max(v)));
        if let Some(merit) = merit.filter(|&m| best.as_ref().map_or(true, |b| m < b.0)) {
            let xbar: Vec<f64> = it.x.iter().map(|v| v / it.tau).collect();
            best = Some((merit, xbar, metrics.gap));
            best_iter = iter;
        }
        if metrics.gap <= settings.tol_gap
            && metrics.dres <= settings.tol_feas * (1.0 + c_norm)
            && metrics.violation <= primal_tol
        {
            status = SolveStatus::Optimal;
            break;
        }
        if it.tau < INFEASIBILITY_RATIO * it.kappa {
            if let Some(certificate) = infeasibility(form, &it, &gx, &gtz, cx, hz, settings.tol_feas) {
                status = certificate;
                break;
            }
        }
        if iter >= best_iter + STALL_WINDOW {
            break;
        }

        let Some(scaling) = Scaling::compute(cones, &it.s, &it.z) else {
            break;
        };
        scaling.apply(cones, &it.z, &mut lambda);
        kkt.factor(cones, Some(&scaling));

        // Direction for the τ column: K [x2; z2] = [−c; h].
        for j in 0..n {
            ws.rhs[j] = -form.c[j];
        }
        ws.rhs[n..].copy_from_slice(&form.h);
        kkt.solve(form, Some(&scaling), &ws.rhs, &mut tau_col);
        let lin = Linearization {
            form,
            scaling: &scaling,
            lambda: &lambda,
            rx: &rx,
            rz: &rz,
            rtau,
            tau_col: &tau_col,
            tau_den: dot(&form.c, &tau_col[..n]) + dot(&form.h, &tau_col[n..]) - it.kappa / it.tau,
            tau: it.tau,
            kappa: it.kappa,
        };

        let mu = (dot(&it.s, &it.z) + it.tau * it.kappa) / (nu + 1.0);

        // Affine predictor: d_s = −λ∘λ, d_k = −τκ.
        cones.jordan(&lambda, &lambda, &mut ds_vec);
        for v in ds_vec.iter_mut() {
            *v = -*v;
        }
        let dk_aff = -it.tau * it.kappa;
        let affine = lin.direction(&mut kkt, &mut ws, &ds_vec, dk_aff, 1.0);
        let alpha_aff = step_length(cones, &it, &affine, 1.0);
        let sigma = (1.0 - alpha_aff).powi(3);

        // Corrector: d_s = −λ∘λ − (W⁻¹Δs_a)∘(WΔz_a) + σμe.
        scaling.apply_inv(cones, &affine.ds, &mut tmp);
        scaling.apply(cones, &affine.dz, &mut tmp2);
        cones.jordan(&tmp, &tmp2, &mut cross);
        cones.jordan(&lambda, &lambda, &mut ds_vec);
        let e = cones.identity();
        for i in 0..m {
            ds_vec[i] = -ds_vec[i] - cross[i] + sigma * mu * e[i];
        }
        let dk = -it.tau * it.kappa - affine.dtau * affine.dkappa + sigma * mu;
        let step = lin.direction(&mut kkt, &mut ws, &ds_vec, dk, 1.0 - sigma);
        let mut alpha = (STEP_FRACTION * step_length(cones, &it, &step, f64::INFINITY)).min(1.0);
        if settings.verbose {
            eprintln!("     step {alpha:.3} affine {alpha_aff:.3} sigma {sigma:.2e} mu {mu:.2e}");
        }
        // Rounding can still land on the cone boundary or produce non-finite
        // values; halve the step until the new iterate is strictly interior.
        let next = loop {
            if !(alpha > MIN_STEP) {
                break None;
            }
            if let Some(next) = advance(cones, &it, &step, alpha) {
                break Some(next);
            }
            alpha *= 0.5;
        };
        let Some(next) = next else {
            break;
        };
        it = next;
        iterations = iter + 1;
    }

    match status {
        SolveStatus::Optimal => {
            let m = measure(form, &it);
            RawSolution {
                status,
                x: it.x.iter().map(|v| v / it.tau).collect(),
                gap: m.gap,
                iterations,
            }
        }
        SolveStatus::Infeasible | SolveStatus::Unbounded => RawSolution {
            status,
            x: it.x.clone(),
            gap: f64::INFINITY,
            iterations,
        },
        SolveStatus::MaxIter => match best {
            Some((_, x, gap)) => RawSolution {
                status,
                x,
                gap,
                iterations,
            },
            None => RawSolution {
                status,
                x: vec![0.0; n],
                gap: f64::INFINITY,
                iterations,
            },
        },
    }
}

struct Direction {
    dx: Vec<f64>,
    ds: Vec<f64>,
    dz: Vec<f64>,
    dtau: f64,
    dkappa: f64,
}

/// Quantities fixed within one iteration that every Newton solve shares.
struct Linearization<'a> {
    form: &'a StandardForm,
    scaling: &'a Scaling,
    lambda: &'a [f64],
    rx: &'a [f64],
    rz: &'a [f64],
    rtau: f64,
    /// Solution of K [x; z] = [−c; h], the τ column of the embedding.
    tau_col: &'a [f64],
    tau_den: f64,
    tau: f64,
    kappa: f64,
}

/// Scratch buffers reused across Newton solves.
struct Workspace {
    rhs: Vec<f64>,
    sol: Vec<f64>,
    q: Vec<f64>,
    wq: Vec<f64>,
    w2dz: Vec<f64>,
}

impl Workspace {
    fn new(n: usize, m: usize) -> Self {
        Self {
            rhs: vec![0.0; n + m],
            sol: vec![0.0; n + m],
            q: vec![0.0; m],
            wq: vec![0.0; m],
            w2dz: vec![0.0; m],
        }
    }
}

impl Linearization<'_> {
    /// Solves the linearized embedding for complementarity targets `d_s`, `d_k`
    /// with residual weight η.
    fn direction(&self, kkt: &mut KktSystem, ws: &mut Workspace, d_s: &[f64], d_k: f64, eta: f64) -> Direction {
        let form = self.form;
        let (n, m) = (form.n(), form.m());
        let cones = &form.cones;
        cones.jordan_solve(self.lambda, d_s, &mut ws.q);
        self.scaling.apply(cones, &ws.q, &mut ws.wq);
        for j in 0..n {
            ws.rhs[j] = -eta * self.rx[j];
        }
        for i in 0..m {
            ws.rhs[n + i] = -eta * self.rz[i] - ws.wq[i];
        }
        kkt.solve(form, Some(self.scaling), &ws.rhs, &mut ws.sol);
        let sol = &ws.sol;
        let num = -eta * self.rtau - dot(&form.c, &sol[..n]) - dot(&form.h, &sol[n..]) - d_k / self.tau;
        let dtau = num / self.tau_den;
        let dx: Vec<f64> = (0..n).map(|j| sol[j] + dtau * self.tau_col[j]).collect();
        let dz: Vec<f64> = (0..m).map(|i| sol[n + i] + dtau * self.tau_col[n + i]).collect();
        self.scaling.apply_sq(cones, &dz, &mut ws.w2dz);
        let ds: Vec<f64> = (0..m).map(|i| ws.wq[i] - ws.w2dz[i]).collect();
        let dkappa = (d_k - self.kappa * dtau) / self.tau;
        Direction {
            dx,
            ds,
            dz,
            dtau,
            dkappa,
        }
    }
}

fn advance(cones: &Cones, it: &Iterate, d: &Direction, alpha: f64) -> Option<Iterate> {
    let axpy = |x: &[f64], dx: &[f64]| -> Vec<f64> { x.iter().zip(dx).map(|(a, b)| a + alpha * b).collect() };
    let next = Iterate {
        x: axpy(&it.x, &d.dx),
        s: axpy(&it.s, &d.ds),
        z: axpy(&it.z, &d.dz),
        tau: it.tau + alpha * d.dtau,
        kappa: it.kappa + alpha * d.dkappa,
    };
    let interior = next.tau > 0.0
        && next.kappa > 0.0
        && next.tau.is_finite()
        && next.kappa.is_finite()
        && next.x.iter().all(|v| v.is_finite())
        && cones.min_eig(&next.s) > 0.0
        && cones.min_eig(&next.z) > 0.0;
    interior.then_some(next)
}

fn step_length(cones: &Cones, it: &Iterate, d: &Direction, cap: f64) -> f64 {
    let mut alpha = cap;
    alpha = alpha.min(cones.max_step(&it.s, &d.ds, alpha));
    alpha = alpha.min(cones.max_step(&it.z, &d.dz, alpha));
    if d.dtau < 0.0 {
        alpha = alpha.min(-it.tau / d.dtau);
    }
    if d.dkappa < 0.0 {
        alpha = alpha.min(-it.kappa / d.dkappa);
    }
    alpha
}

/// CVXOPT-style start: least-norm primal and dual points from the W = I system,
/// shifted into the cone interior.
fn initial_point(form: &StandardForm, kkt: &mut KktSystem) -> Iterate {
    let (n, m) = (form.n(), form.m());
    kkt.factor(&form.cones, None);
    let mut rhs = vec![0.0; n + m];
    let mut sol = vec![0.0; n + m];
    rhs[n..].copy_from_slice(&form.h);
    kkt.solve(form, None, &rhs, &mut sol);
    let x = sol[..n].to_vec();
    let mut s: Vec<f64> = sol[n..].iter().map(|v| -v).collect();
    rhs[n..].fill(0.0);
    for j in 0..n {
        rhs[j] = -form.c[j];
    }
    kkt.solve(form, None, &rhs, &mut sol);
    let mut z = sol[n..].to_vec();
    form.cones.shift_to_interior(&mut s);
    form.cones.shift_to_interior(&mut z);
    Iterate {
        x,
        s,
        z,
        tau: 1.0,
        kappa: 1.0,
    }
}

fn measure(form: &StandardForm, it: &Iterate) -> Metrics {
    let (n, m) = (form.n(), form.m());
    let xbar: Vec<f64> = it.x.iter().map(|v| v / it.tau).collect();
    let zbar: Vec<f64> = it.z.iter().map(|v| v / it.tau).collect();
    let mut slack = vec![0.0; m];
    form.g.mul(&xbar, &mut slack);
    for i in 0..m {
        slack[i] = form.h[i] - slack[i];
    }
    let violation = cone_violation(&form.cones, &slack);
    let mut gtz = vec![0.0; n];
    form.g.mul_t(&zbar, &mut gtz);
    let dres = (0..n).fold(0.0f64, |acc, j| acc.max((gtz[j] + form.c[j]).abs()));
    let pobj = dot(&form.c, &xbar);
    let dobj = -dot(&form.h, &zbar);
    let complementarity = dot(&it.s, &it.z) / (it.tau * it.tau);
    let gap = complementarity.max((pobj - dobj).abs()) / pobj.abs().max(1.0);
    Metrics {
        gap,
        dres,
        violation,
    }
}

fn infeasibility(
    form: &StandardForm,
    it: &Iterate,
    gx: &[f64],
    gtz: &[f64],
    cx: f64,
    hz: f64,
    tol: f64,
) -> Option<SolveStatus> {
    if hz < 0.0 {
        let residual = inf_norm(gtz) / -hz;
        if residual <= tol {
            return Some(SolveStatus::Infeasible);
        }
    }
    if cx < 0.0 {
        let residual = (0..form.m()).fold(0.0f64, |acc, i| acc.max((gx[i] + it.s[i]).abs())) / -cx;
        if residual <= tol {
            return Some(SolveStatus::Unbounded);
        }
    }
    None
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
