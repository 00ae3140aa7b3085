#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;
use relucvx::patterns::{sample_standard, SamplerConfig};
use relucvx::rng::{substream, StreamRng, INSTANCES};
use relucvx::solver::SolveSettings;
use relucvx::{ActivationPattern, Dataset, Matrix, Task};

pub fn rng(case: u64) -> StreamRng {
    substream(0xC0FFEE, INSTANCES, case)
}

pub fn normal(r: &mut StreamRng) -> f64 {
    r.sample(StandardNormal)
}

pub fn normals(r: &mut StreamRng, len: usize) -> Vec<f64> {
    (0..len).map(|_| normal(r)).collect()
}

pub fn matrix(r: &mut StreamRng, n: usize, d: usize) -> Matrix {
    Matrix::from_vec(n, d, normals(r, n * d)).unwrap()
}

pub fn labels(r: &mut StreamRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| if r.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

pub fn binary(r: &mut StreamRng, n: usize, d: usize) -> Dataset {
    let x = matrix(r, n, d);
    let y = labels(r, n);
    Dataset::new(x, y, Task::Binary).unwrap()
}

pub fn regression(r: &mut StreamRng, n: usize, d: usize) -> Dataset {
    let x = matrix(r, n, d);
    let y = normals(r, n);
    Dataset::new(x, y, Task::Regression).unwrap()
}

pub fn patterns(data: &Dataset, ps: usize, seed: u64) -> Vec<ActivationPattern> {
    sample_standard(data.x(), &SamplerConfig::standard(ps, seed)).unwrap().patterns
}

pub fn mask(bits: &[u8]) -> ActivationPattern {
    ActivationPattern::new(bits.to_vec()).unwrap()
}

pub fn settings() -> SolveSettings {
    SolveSettings::default()
}

/// Coarse-to-fine grid minimization of `f` over a box; `f` returns +∞ off
/// the feasible set.
pub fn grid_min(f: impl Fn(&[f64]) -> f64, dims: usize, lo: f64, hi: f64) -> f64 {
    let points = 41usize;
    let mut center = vec![(lo + hi) / 2.0; dims];
    let mut half = (hi - lo) / 2.0;
    let mut best = f64::INFINITY;
    let mut x = vec![0.0; dims];
    for _ in 0..8 {
        let step = 2.0 * half / (points - 1) as f64;
        let mut arg = center.clone();
        for idx in 0..points.pow(dims as u32) {
            let mut rest = idx;
            for j in 0..dims {
                x[j] = center[j] - half + step * (rest % points) as f64;
                rest /= points;
            }
            let v = f(&x);
            if v < best {
                best = v;
                arg.copy_from_slice(&x);
            }
        }
        center = arg;
        half = 4.0 * step;
    }
    best
}

/// Minimum of (2d_k − 1) (x_k + δ)·v over the 2^d vertices of the ε-box.
pub fn vertex_min(x: &[f64], sign: f64, v: &[f64], eps: f64) -> f64 {
    let d = x.len();
    let mut best = f64::INFINITY;
    for bits in 0..1usize << d {
        let mut s = 0.0;
        for j in 0..d {
            let delta = if bits >> j & 1 == 1 { eps } else { -eps };
            s += (x[j] + delta) * v[j];
        }
        best = best.min(sign * s);
    }
    best
}
