//! Nonnegative orthant and second-order cone algebra for the interior-point method.
//!
//! A cone vector stores the orthant block first, then each second-order block
//! `(x_0, x_1)` with the condition `x_0 ≥ ‖x_1‖₂`.

use crate::matrix::dot;

#[derive(Debug, Clone, PartialEq)]
pub struct Cones {
    pub nonneg: usize,
    /// (offset, dimension) of each second-order block.
    pub soc: Vec<(usize, usize)>,
    pub total: usize,
}

impl Cones {
    pub fn new(nonneg: usize, soc_dims: &[usize]) -> Self {
        let mut offset = nonneg;
        let mut soc = Vec::with_capacity(soc_dims.len());
        for &k in soc_dims {
            soc.push((offset, k));
            offset += k;
        }
        Self {
            nonneg,
            soc,
            total: offset,
        }
    }

    /// Barrier degree ν.
    pub fn degree(&self) -> usize {
        self.nonneg + self.soc.len()
    }

    /// Identity element e.
    pub fn identity(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.total];
        e[..self.nonneg].fill(1.0);
        for &(o, _) in &self.soc {
            e[o] = 1.0;
        }
        e
    }

    /// Smallest spectral value over all blocks (positive iff strictly interior).
    pub fn min_eig(&self, v: &[f64]) -> f64 {
        let mut m = v[..self.nonneg].iter().copied().fold(f64::INFINITY, f64::min);
        for &(o, k) in &self.soc {
            m = m.min(v[o] - norm(&v[o + 1..o + k]));
        }
        m
    }

    /// Moves `v` strictly inside the cone when it is not already.
    pub fn shift_to_interior(&self, v: &mut [f64]) {
        let alpha = -self.min_eig(v);
        if alpha >= 0.0 {
            let shift = 1.0 + alpha;
            for x in &mut v[..self.nonneg] {
                *x += shift;
            }
            for &(o, _) in &self.soc {
                v[o] += shift;
            }
        }
    }

    /// Largest α ≤ `cap` with x + α·dx in the cone.
    pub fn max_step(&self, x: &[f64], dx: &[f64], cap: f64) -> f64 {
        let mut alpha = cap;
        for i in 0..self.nonneg {
            if dx[i] < 0.0 {
                alpha = alpha.min(-x[i] / dx[i]);
            }
        }
        for &(o, k) in &self.soc {
            alpha = alpha.min(soc_step(&x[o..o + k], &dx[o..o + k]));
        }
        alpha.max(0.0)
    }

    /// Jordan product u ∘ v.
    pub fn jordan(&self, u: &[f64], v: &[f64], out: &mut [f64]) {
        for i in 0..self.nonneg {
            out[i] = u[i] * v[i];
        }
        for &(o, k) in &self.soc {
            let (u0, u1) = (u[o], &u[o + 1..o + k]);
            let (v0, v1) = (v[o], &v[o + 1..o + k]);
            out[o] = u0 * v0 + dot(u1, v1);
            for j in 1..k {
                out[o + j] = u0 * v[o + j] + v0 * u[o + j];
            }
        }
    }

    /// Solves λ ∘ x = v for x.
    pub fn jordan_solve(&self, lambda: &[f64], v: &[f64], out: &mut [f64]) {
        for i in 0..self.nonneg {
            out[i] = v[i] / lambda[i];
        }
        for &(o, k) in &self.soc {
            let l0 = lambda[o];
            let l1 = &lambda[o + 1..o + k];
            let v1 = &v[o + 1..o + k];
            let nl1 = norm(l1);
            let rho = (l0 - nl1) * (l0 + nl1);
            let x0 = (l0 * v[o] - dot(l1, v1)) / rho;
            out[o] = x0;
            for j in 1..k {
                out[o + j] = (v[o + j] - x0 * lambda[o + j]) / l0;
            }
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Largest α with x + α·dx in the second-order cone, for x strictly interior.
fn soc_step(x: &[f64], dx: &[f64]) -> f64 {
    let (x0, x1) = (x[0], &x[1..]);
    let (d0, d1) = (dx[0], &dx[1..]);
    let nx1 = norm(x1);
    let nd1 = norm(d1);
    // f(α) = (x0 + α d0)² − ‖x1 + α d1‖² = aα² + 2bα + c.
    let a = (d0 - nd1) * (d0 + nd1);
    let b = x0 * d0 - dot(x1, d1);
    let c = ((x0 - nx1) * (x0 + nx1)).max(0.0);
    let disc = b * b - a * c;
    let mut alpha = f64::INFINITY;
    if a < 0.0 || (a > 0.0 && b < 0.0 && disc >= 0.0) {
        let root = c / (-b + disc.max(0.0).sqrt());
        if root.is_finite() && root >= 0.0 {
            alpha = root;
        }
    } else if a == 0.0 && b < 0.0 {
        alpha = -c / (2.0 * b);
    }
    if d0 < 0.0 {
        alpha = alpha.min(-x0 / d0);
    }
    alpha
}

#[derive(Debug, Clone)]
pub struct SocScaling {
    pub eta: f64,
    pub w: Vec<f64>,
}

/// Nesterov–Todd scaling W with W z = W⁻¹ s = λ.
#[derive(Debug, Clone)]
pub struct Scaling {
    pub nonneg: Vec<f64>,
    pub soc: Vec<SocScaling>,
}

impl Scaling {
    /// Scaling for strictly interior (s, z); `None` if either leaves the interior.
    pub fn compute(cones: &Cones, s: &[f64], z: &[f64]) -> Option<Self> {
        let mut nonneg = Vec::with_capacity(cones.nonneg);
        for i in 0..cones.nonneg {
            if !(s[i] > 0.0 && z[i] > 0.0) {
                return None;
            }
            nonneg.push((s[i] / z[i]).sqrt());
        }
        let mut soc = Vec::with_capacity(cones.soc.len());
        for &(o, k) in &cones.soc {
            let (sb, zb) = (&s[o..o + k], &z[o..o + k]);
            let ns1 = norm(&sb[1..]);
            let nz1 = norm(&zb[1..]);
            let s_res = (sb[0] - ns1) * (sb[0] + ns1);
            let z_res = (zb[0] - nz1) * (zb[0] + nz1);
            if !(s_res > 0.0 && z_res > 0.0 && sb[0] > 0.0 && zb[0] > 0.0) {
                return None;
            }
            let (ss, zs) = (s_res.sqrt(), z_res.sqrt());
            let sbar: Vec<f64> = sb.iter().map(|v| v / ss).collect();
            let zbar: Vec<f64> = zb.iter().map(|v| v / zs).collect();
            let gamma = ((1.0 + dot(&sbar, &zbar)) / 2.0).sqrt();
            let mut w = Vec::with_capacity(k);
            w.push((sbar[0] + zbar[0]) / (2.0 * gamma));
            for j in 1..k {
                w.push((sbar[j] - zbar[j]) / (2.0 * gamma));
            }
            // Renormalize so that w0² − ‖w1‖² = 1 holds to working precision.
            let w1n = norm(&w[1..]);
            w[0] = (1.0 + w1n * w1n).sqrt();
            soc.push(SocScaling {
                eta: (s_res / z_res).sqrt().sqrt(),
                w,
            });
        }
        Some(Self { nonneg, soc })
    }

    /// out = W v.
    pub fn apply(&self, cones: &Cones, v: &[f64], out: &mut [f64]) {
        for i in 0..cones.nonneg {
            out[i] = self.nonneg[i] * v[i];
        }
        for (sc, &(o, k)) in self.soc.iter().zip(&cones.soc) {
            hyperbolic(&sc.w, 1.0, sc.eta, &v[o..o + k], &mut out[o..o + k]);
        }
    }

    /// out = W⁻¹ v.
    pub fn apply_inv(&self, cones: &Cones, v: &[f64], out: &mut [f64]) {
        for i in 0..cones.nonneg {
            out[i] = v[i] / self.nonneg[i];
        }
        for (sc, &(o, k)) in self.soc.iter().zip(&cones.soc) {
            hyperbolic(&sc.w, -1.0, 1.0 / sc.eta, &v[o..o + k], &mut out[o..o + k]);
        }
    }

    /// out = W² v.
    pub fn apply_sq(&self, cones: &Cones, v: &[f64], out: &mut [f64]) {
        for i in 0..cones.nonneg {
            out[i] = self.nonneg[i] * self.nonneg[i] * v[i];
        }
        for (sc, &(o, k)) in self.soc.iter().zip(&cones.soc) {
            let w = &sc.w;
            let vb = &v[o..o + k];
            let e2 = sc.eta * sc.eta;
            let wv = dot(w, vb);
            out[o] = e2 * (2.0 * w[0] * wv - vb[0]);
            for j in 1..k {
                out[o + j] = e2 * (2.0 * w[j] * wv + vb[j]);
            }
        }
    }

    /// Entry (a, b) of the W² block of second-order cone `block`.
    pub fn soc_sq_entry(&self, block: usize, a: usize, b: usize) -> f64 {
        let sc = &self.soc[block];
        let j = if a == 0 && b == 0 {
            1.0
        } else if a == b {
            -1.0
        } else {
            0.0
        };
        sc.eta * sc.eta * (2.0 * sc.w[a] * sc.w[b] - j)
    }
}

/// out = η·H(ŵ)·v with H(w) = [w0, w1ᵀ; w1, I + w1w1ᵀ/(1 + w0)], where ŵ = (w0, sign·w1).
fn hyperbolic(w: &[f64], sign: f64, eta: f64, v: &[f64], out: &mut [f64]) {
    let k = w.len();
    let w0 = w[0];
    let w1v = sign * dot(&w[1..], &v[1..]);
    out[0] = eta * (w0 * v[0] + w1v);
    let coef = w1v / (1.0 + w0) + v[0];
    for j in 1..k {
        out[j] = eta * (v[j] + coef * sign * w[j]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cones() -> Cones {
        Cones::new(2, &[3, 1, 4])
    }

    fn interior_point(seed: f64) -> Vec<f64> {
        let c = cones();
        let mut v: Vec<f64> = (0..c.total).map(|i| ((i as f64 + 1.0) * seed).sin()).collect();
        c.shift_to_interior(&mut v);
        v
    }

    #[test]
    fn shift_makes_interior() {
        let c = cones();
        let v = interior_point(1.7);
        assert!(c.min_eig(&v) > 0.0);
    }

    #[test]
    fn scaling_maps_z_to_lambda_and_w_squared_z_to_s() {
        let c = cones();
        let s = interior_point(0.9);
        let z = interior_point(2.3);
        let sc = Scaling::compute(&c, &s, &z).unwrap();
        let mut wz = vec![0.0; c.total];
        let mut winv_s = vec![0.0; c.total];
        let mut w2z = vec![0.0; c.total];
        sc.apply(&c, &z, &mut wz);
        sc.apply_inv(&c, &s, &mut winv_s);
        sc.apply_sq(&c, &z, &mut w2z);
        for i in 0..c.total {
            assert!((wz[i] - winv_s[i]).abs() < 1e-12, "{i}: {} vs {}", wz[i], winv_s[i]);
            assert!((w2z[i] - s[i]).abs() < 1e-12);
        }
        // W W⁻¹ = I.
        let v: Vec<f64> = (0..c.total).map(|i| (i as f64 * 0.37).cos()).collect();
        let mut t = vec![0.0; c.total];
        let mut back = vec![0.0; c.total];
        sc.apply_inv(&c, &v, &mut t);
        sc.apply(&c, &t, &mut back);
        for i in 0..c.total {
            assert!((back[i] - v[i]).abs() < 1e-12);
        }
        // Dense W² entries agree with apply_sq.
        for (b, &(o, k)) in c.soc.iter().enumerate() {
            for a in 0..k {
                let row: f64 = (0..k).map(|j| sc.soc_sq_entry(b, a, j) * z[o + j]).sum();
                assert!((row - s[o + a]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn jordan_solve_inverts_product() {
        let c = cones();
        let lambda = interior_point(1.3);
        let v: Vec<f64> = (0..c.total).map(|i| (i as f64 * 0.71).sin()).collect();
        let mut x = vec![0.0; c.total];
        let mut back = vec![0.0; c.total];
        c.jordan_solve(&lambda, &v, &mut x);
        c.jordan(&lambda, &x, &mut back);
        for i in 0..c.total {
            assert!((back[i] - v[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn step_length_reaches_boundary() {
        let c = cones();
        let x = interior_point(0.4);
        let dx: Vec<f64> = (0..c.total).map(|i| -((i as f64 * 1.9).cos()).abs() - 0.1).collect();
        let alpha = c.max_step(&x, &dx, f64::INFINITY);
        assert!(alpha.is_finite() && alpha > 0.0);
        let at = |t: f64| -> Vec<f64> { x.iter().zip(&dx).map(|(a, b)| a + t * b).collect() };
        assert!(c.min_eig(&at(alpha * (1.0 - 1e-9))) >= -1e-12);
        assert!(c.min_eig(&at(alpha * (1.0 + 1e-6))) < 0.0);
    }

    #[test]
    fn soc_step_unbounded_direction() {
        assert_eq!(soc_step(&[2.0, 1.0], &[1.0, 0.0]), f64::INFINITY);
        let a = soc_step(&[1.0, 0.0], &[0.0, 1.0]);
        assert!((a - 1.0).abs() < 1e-15);
    }
}
