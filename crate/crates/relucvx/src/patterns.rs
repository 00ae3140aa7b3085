//! Sampling, enumeration, and counting of ReLU activation patterns.

use std::collections::HashSet;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};
use crate::model::ActivationPattern;
use crate::program::{ConicProgram, ProgramBuilder, SpanKind};
use crate::rng::{self, StreamRng};
use crate::solver::{self, SolveSettings, SolveStatus};

/// Draw attempts per requested pattern before a sampler gives up.
pub const DRAW_CAP_FACTOR: usize = 50;

/// Default size limit for exhaustive enumeration.
pub const DEFAULT_MAX_ENUMERATION_N: usize = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Target number of distinct patterns.
    pub ps: usize,
    /// Number of directions drawn by adversarial sampling.
    pub pa: usize,
    /// Masks per direction in adversarial sampling (the first uses the clean data).
    pub s: usize,
    pub seed: u64,
    /// Perturbation radius for adversarial sampling.
    pub eps: f64,
    /// Columns left unperturbed when forming perturbed data matrices.
    #[serde(default)]
    pub frozen_columns: Vec<usize>,
}

impl SamplerConfig {
    pub fn standard(ps: usize, seed: u64) -> Self {
        Self {
            ps,
            pa: ps,
            s: 1,
            seed,
            eps: 0.0,
            frozen_columns: Vec::new(),
        }
    }

    pub fn adversarial(ps: usize, pa: usize, s: usize, eps: f64, seed: u64) -> Self {
        Self {
            ps,
            pa,
            s,
            seed,
            eps,
            frozen_columns: Vec::new(),
        }
    }

    fn validate(&self, adversarial: bool) -> Result<()> {
        if self.ps == 0 {
            return Err(Error::InvalidArgument("P_s must be >= 1".into()));
        }
        if adversarial {
            if self.s == 0 || self.pa == 0 {
                return Err(Error::InvalidArgument("P_a and S must be >= 1".into()));
            }
            if self.pa.saturating_mul(self.s) < self.ps {
                return Err(Error::InvalidArgument(format!(
                    "P_a * S = {} is below P_s = {}",
                    self.pa * self.s,
                    self.ps
                )));
            }
            if !(self.eps >= 0.0 && self.eps.is_finite()) {
                return Err(Error::InvalidArgument(format!("eps must be >= 0, got {}", self.eps)));
            }
        }
        Ok(())
    }
}

/// Replay information for a sampled pattern: `mask = [X̄ a ≥ 0]`, where X̄ is X
/// itself or, when `perturbation` is set, X + ε·sgn(R) with R regenerated from
/// the set's seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub direction: Vec<f64>,
    pub perturbation: Option<PerturbationIndex>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationIndex {
    pub direction: usize,
    pub sample: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSet {
    pub seed: u64,
    pub eps: f64,
    /// Masks per direction used when the set was sampled adversarially.
    pub samples_per_direction: usize,
    #[serde(default)]
    pub frozen_columns: Vec<usize>,
    pub requested: usize,
    /// Raw masks generated before stopping.
    pub draws: usize,
    pub patterns: Vec<ActivationPattern>,
    pub witnesses: Vec<Witness>,
}

impl PatternSet {
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// Fewer distinct patterns than requested were found.
    pub fn shortfall(&self) -> usize {
        self.requested.saturating_sub(self.patterns.len())
    }

    /// Recomputes the mask of witness `i`.
    pub fn replay(&self, x: &Matrix, i: usize) -> Result<ActivationPattern> {
        let witness = &self.witnesses[i];
        match witness.perturbation {
            None => pattern_from_direction(x, &witness.direction),
            Some(idx) => {
                let xbar = perturbed_matrix(
                    x,
                    self.eps,
                    &self.frozen_columns,
                    &mut perturbation_stream(self.seed, self.samples_per_direction, idx),
                );
                pattern_from_direction(&xbar, &witness.direction)
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// mask_k = 1 iff x_k·a ≥ 0.
pub fn pattern_from_direction(x: &Matrix, a: &[f64]) -> Result<ActivationPattern> {
    if a.len() != x.cols() {
        return Err(Error::Dimension(format!(
            "direction has {} entries, data has {} columns",
            a.len(),
            x.cols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("direction must be finite".into()));
    }
    Ok(ActivationPattern {
        mask: x.iter_rows().map(|row| u8::from(dot(row, a) >= 0.0)).collect(),
    })
}

fn direction(seed: u64, i: usize, d: usize) -> Vec<f64> {
    let mut r = rng::substream(seed, rng::DIRECTIONS, i as u64);
    (0..d).map(|_| r.sample(StandardNormal)).collect()
}

fn perturbation_stream(seed: u64, s: usize, idx: PerturbationIndex) -> StreamRng {
    rng::substream(seed, rng::PERTURBATIONS, (idx.direction * s + idx.sample) as u64)
}

fn perturbed_matrix(x: &Matrix, eps: f64, frozen: &[usize], r: &mut StreamRng) -> Matrix {
    let mut out = x.clone();
    for k in 0..x.rows() {
        let row = out.row_mut(k);
        for (j, value) in row.iter_mut().enumerate() {
            let z: f64 = r.sample(StandardNormal);
            if !frozen.contains(&j) {
                *value += eps * crate::matrix::sgn(z);
            }
        }
    }
    out
}

struct Collector {
    seen: HashSet<Vec<u8>>,
    patterns: Vec<ActivationPattern>,
    witnesses: Vec<Witness>,
    draws: usize,
}

impl Collector {
    fn new() -> Self {
        Self {
            seen: HashSet::new(),
            patterns: Vec::new(),
            witnesses: Vec::new(),
            draws: 0,
        }
    }

    fn offer(&mut self, pattern: ActivationPattern, witness: Witness) {
        self.draws += 1;
        if self.seen.insert(pattern.mask.clone()) {
            self.patterns.push(pattern);
            self.witnesses.push(witness);
        }
    }

    fn finish(self, config: &SamplerConfig, s: usize) -> PatternSet {
        PatternSet {
            seed: config.seed,
            eps: config.eps,
            samples_per_direction: s,
            frozen_columns: config.frozen_columns.clone(),
            requested: config.ps,
            draws: self.draws,
            patterns: self.patterns,
            witnesses: self.witnesses,
        }
    }
}

/// Draws Gaussian directions until `ps` distinct masks are found or the draw cap is hit.
pub fn sample_standard(x: &Matrix, config: &SamplerConfig) -> Result<PatternSet> {
    config.validate(false)?;
    let mut found = Collector::new();
    for i in 0..DRAW_CAP_FACTOR * config.ps {
        if found.patterns.len() == config.ps {
            break;
        }
        let a = direction(config.seed, i, x.cols());
        let pattern = pattern_from_direction(x, &a)?;
        found.offer(
            pattern,
            Witness {
                direction: a,
                perturbation: None,
            },
        );
    }
    Ok(found.finish(config, 1))
}

/// For each of `pa` directions, the mask on X followed by `s − 1` masks on
/// randomly sign-perturbed copies of X; deduplicated globally and truncated to `ps`.
pub fn sample_adversarial(x: &Matrix, config: &SamplerConfig) -> Result<PatternSet> {
    config.validate(true)?;
    let mut found = Collector::new();
    'directions: for i in 0..config.pa {
        let a = direction(config.seed, i, x.cols());
        for j in 0..config.s {
            if found.patterns.len() == config.ps {
                break 'directions;
            }
            let (pattern, perturbation) = if j == 0 {
                (pattern_from_direction(x, &a)?, None)
            } else {
                let idx = PerturbationIndex {
                    direction: i,
                    sample: j,
                };
                let xbar = perturbed_matrix(
                    x,
                    config.eps,
                    &config.frozen_columns,
                    &mut perturbation_stream(config.seed, config.s, idx),
                );
                (pattern_from_direction(&xbar, &a)?, Some(idx))
            };
            found.offer(
                pattern,
                Witness {
                    direction: a.clone(),
                    perturbation,
                },
            );
        }
    }
    Ok(found.finish(config, config.s))
}

/// Margin LP: maximize t ≤ 1 subject to x_k·u ≥ 0 on active rows, −x_k·u ≥ t on
/// inactive rows, and |u_j| ≤ 1. Variables are (u, t).
fn margin_program(x: &Matrix, mask: &[u8]) -> ConicProgram {
    let d = x.cols();
    let mut b = ProgramBuilder::new();
    let u = b.add_span(SpanKind::Free, None, d);
    let t = b.add_span(SpanKind::Free, None, 1);
    b.add_objective(t, -1.0);
    for (k, &m) in mask.iter().enumerate() {
        let row = x.row(k);
        let mut terms: Vec<(usize, f64)> = Vec::with_capacity(d + 1);
        if m == 1 {
            terms.extend(row.iter().enumerate().map(|(j, &v)| (u + j, v)));
        } else {
            terms.extend(row.iter().enumerate().map(|(j, &v)| (u + j, -v)));
            terms.push((t, -1.0));
        }
        b.add_nonneg(&terms, 0.0);
    }
    for j in 0..d {
        b.add_nonneg(&[(u + j, -1.0)], 1.0);
        b.add_nonneg(&[(u + j, 1.0)], 1.0);
    }
    b.add_nonneg(&[(t, -1.0)], 1.0);
    b.finish()
}

const MARGIN_TOL: f64 = 1e-7;

fn achievable(x: &Matrix, mask: &[u8]) -> Result<bool> {
    if mask.iter().all(|&m| m == 1) {
        return Ok(true);
    }
    let program = margin_program(x, mask);
    let result = solver::solve(&program, &SolveSettings::default())?;
    match result.status {
        SolveStatus::Optimal | SolveStatus::MaxIter => Ok(-result.objective > MARGIN_TOL),
        SolveStatus::Infeasible | SolveStatus::Unbounded => Err(Error::Solver {
            status: result.status,
            gap: result.gap,
            max_violation: result.max_violation,
        }),
    }
}

fn x_rows(x: &Matrix, rows: &[usize]) -> Matrix {
    let mut data = Vec::with_capacity(rows.len() * x.cols());
    for &k in rows {
        data.extend_from_slice(x.row(k));
    }
    Matrix::from_vec(rows.len(), x.cols(), data).expect("row subset shape")
}

/// Every achievable mask of X, in lexicographic order (inactive before active).
///
/// A mask is achievable iff its restriction to the first k rows is achievable on
/// those rows, so candidates are extended row by row and dead prefixes pruned;
/// the result is exactly the set of feasible masks among all 2^n candidates.
pub fn enumerate_all_patterns(x: &Matrix, max_n: usize) -> Result<Vec<ActivationPattern>> {
    let n = x.rows();
    if n > max_n {
        return Err(Error::TooLarge(format!(
            "enumeration over 2^{n} masks exceeds the limit n <= {max_n}"
        )));
    }
    let mut prefixes: Vec<Vec<u8>> = vec![Vec::new()];
    for k in 0..n {
        let head = x_rows(x, &(0..=k).collect::<Vec<_>>());
        let mut next = Vec::with_capacity(prefixes.len() * 2);
        for prefix in &prefixes {
            for bit in [0u8, 1u8] {
                let mut mask = prefix.clone();
                mask.push(bit);
                if achievable(&head, &mask)? {
                    next.push(mask);
                }
            }
        }
        prefixes = next;
    }
    Ok(prefixes
        .into_iter()
        .map(|mask| ActivationPattern { mask })
        .collect())
}

/// Upper bound 2r(e(n−1)/r)^r on the number of patterns for rank-r data.
pub fn pattern_count_bound(n: usize, r: usize) -> Result<f64> {
    if n < 2 || r < 1 {
        return Err(Error::InvalidArgument(format!(
            "pattern bound needs n >= 2 and r >= 1, got n={n}, r={r}"
        )));
    }
    let r_f = r as f64;
    Ok(2.0 * r_f * (std::f64::consts::E * (n - 1) as f64 / r_f).powi(r as i32))
}

/// Smallest integer P_s with P_s ≥ (n+1)/(ψξ) − 1.
pub fn min_sample_count(n: usize, psi: f64, xi: f64) -> Result<usize> {
    let inside = |v: f64| v > 0.0 && v < 1.0;
    if !inside(psi) || !inside(xi) {
        return Err(Error::InvalidArgument(format!(
            "confidence constants must lie in (0, 1), got psi={psi}, xi={xi}"
        )));
    }
    let value = (n as f64 + 1.0) / (psi * xi) - 1.0;
    // Values within rounding of an integer count as that integer.
    let nearest = value.round();
    let count = if (value - nearest).abs() <= 1e-9 * nearest.abs().max(1.0) {
        nearest
    } else {
        value.ceil()
    };
    Ok(count as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(n: usize, d: usize, seed: u64) -> Matrix {
        let mut r = rng::substream(seed, rng::INSTANCES, 1);
        Matrix::from_vec(n, d, (0..n * d).map(|_| r.sample(StandardNormal)).collect()).unwrap()
    }

    #[test]
    fn identity_direction_mask() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(pattern_from_direction(&x, &[1.0, -1.0]).unwrap().mask, vec![1, 0]);
    }

    #[test]
    fn zero_direction_gives_all_ones() {
        let x = random_matrix(6, 3, 2);
        assert_eq!(pattern_from_direction(&x, &[0.0; 3]).unwrap().mask, vec![1; 6]);
    }

    #[test]
    fn direction_mask_matches_scalar_loop() {
        let x = random_matrix(30, 5, 3);
        let a = direction(99, 0, 5);
        let got = pattern_from_direction(&x, &a).unwrap();
        for k in 0..30 {
            let mut s = 0.0;
            for j in 0..5 {
                s += x.get(k, j) * a[j];
            }
            assert_eq!(got.mask[k], u8::from(s >= 0.0));
        }
    }

    #[test]
    fn direction_dimension_mismatch() {
        let x = random_matrix(3, 2, 1);
        assert!(matches!(pattern_from_direction(&x, &[1.0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn single_sample_has_two_patterns() {
        let x = Matrix::from_rows(&[vec![0.7, -0.2]]).unwrap();
        let set = sample_standard(&x, &SamplerConfig::standard(10, 5)).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.shortfall(), 8);
        assert_eq!(set.draws, DRAW_CAP_FACTOR * 10);
    }

    #[test]
    fn sampling_is_deterministic() {
        let x = random_matrix(20, 3, 4);
        let a = sample_standard(&x, &SamplerConfig::standard(25, 17)).unwrap();
        let b = sample_standard(&x, &SamplerConfig::standard(25, 17)).unwrap();
        assert_eq!(a, b);
        let c = sample_standard(&x, &SamplerConfig::standard(25, 18)).unwrap();
        assert_ne!(a.patterns, c.patterns);
    }

    #[test]
    fn witnesses_replay_large_request() {
        let x = random_matrix(40, 2, 5);
        let set = sample_standard(&x, &SamplerConfig::standard(2048, 1)).unwrap();
        // Rank-2 data through the origin admits at most 2n patterns.
        assert!(set.len() <= 80);
        for i in 0..set.len() {
            assert_eq!(set.replay(&x, i).unwrap(), set.patterns[i]);
        }
    }

    #[test]
    fn adversarial_witnesses_replay() {
        let x = random_matrix(25, 3, 6);
        let mut config = SamplerConfig::adversarial(60, 20, 4, 0.3, 8);
        config.frozen_columns = vec![2];
        let set = sample_adversarial(&x, &config).unwrap();
        assert!(set.patterns.iter().any(|_| true));
        assert!(set.witnesses.iter().any(|w| w.perturbation.is_some()));
        for i in 0..set.len() {
            assert_eq!(set.replay(&x, i).unwrap(), set.patterns[i]);
        }
        let json = set.to_json().unwrap();
        assert_eq!(PatternSet::from_json(&json).unwrap(), set);
    }

    #[test]
    fn adversarial_with_zero_eps_matches_standard() {
        let x = random_matrix(15, 2, 7);
        let ps = 12;
        let standard = sample_standard(&x, &SamplerConfig::standard(ps, 3)).unwrap();
        let adv = sample_adversarial(
            &x,
            &SamplerConfig::adversarial(ps, DRAW_CAP_FACTOR * ps, 5, 0.0, 3),
        )
        .unwrap();
        assert_eq!(adv.patterns, standard.patterns);
    }

    #[test]
    fn adversarial_single_sample_is_standard_with_pa_draws() {
        let x = random_matrix(15, 3, 8);
        let pa = 9;
        let adv = sample_adversarial(&x, &SamplerConfig::adversarial(pa, pa, 1, 0.4, 11)).unwrap();
        let mut expected: Vec<Vec<u8>> = Vec::new();
        for i in 0..pa {
            let m = pattern_from_direction(&x, &direction(11, i, 3)).unwrap().mask;
            if !expected.contains(&m) {
                expected.push(m);
            }
        }
        let got: Vec<Vec<u8>> = adv.patterns.iter().map(|p| p.mask.clone()).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn adversarial_config_validation() {
        let x = random_matrix(4, 2, 1);
        assert!(sample_adversarial(&x, &SamplerConfig::adversarial(10, 3, 3, 0.1, 1)).is_err());
        assert!(sample_adversarial(&x, &SamplerConfig::adversarial(5, 3, 3, -0.1, 1)).is_err());
        assert!(sample_standard(&x, &SamplerConfig::standard(0, 1)).is_err());
    }

    #[test]
    fn outputs_have_no_duplicates() {
        let x = random_matrix(12, 2, 9);
        let set = sample_adversarial(&x, &SamplerConfig::adversarial(100, 40, 5, 0.2, 2)).unwrap();
        let unique: HashSet<_> = set.patterns.iter().map(|p| p.mask.clone()).collect();
        assert_eq!(unique.len(), set.len());
        assert!(set.len() <= 100);
    }

    #[test]
    fn enumerate_single_sample() {
        let x = Matrix::from_rows(&[vec![1.5]]).unwrap();
        let all = enumerate_all_patterns(&x, 15).unwrap();
        let masks: Vec<Vec<u8>> = all.into_iter().map(|p| p.mask).collect();
        assert_eq!(masks, vec![vec![0], vec![1]]);
    }

    #[test]
    fn enumerate_orthogonal_rows() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(enumerate_all_patterns(&x, 15).unwrap().len(), 4);
    }

    #[test]
    fn enumerate_rejects_large_n() {
        let x = random_matrix(16, 2, 1);
        assert!(matches!(enumerate_all_patterns(&x, 15), Err(Error::TooLarge(_))));
    }

    /// Masks met by a direction sweeping the circle, including the exact
    /// boundary directions where some x_k·a = 0.
    fn angular_sweep(x: &Matrix) -> HashSet<Vec<u8>> {
        let mut angles: Vec<f64> = Vec::new();
        for row in x.iter_rows() {
            // Directions orthogonal to x_k.
            let base = row[1].atan2(row[0]) + std::f64::consts::FRAC_PI_2;
            angles.push(base);
            angles.push(base + std::f64::consts::PI);
        }
        // The zero direction gives the all-ones mask under the ≥ 0 convention.
        let mut set = HashSet::from([vec![1u8; x.rows()]]);
        let steps = 200_000;
        for t in 0..steps {
            let theta = 2.0 * std::f64::consts::PI * t as f64 / steps as f64;
            let a = [theta.cos(), theta.sin()];
            set.insert(pattern_from_direction(x, &a).unwrap().mask);
        }
        for theta in angles {
            let a = [theta.cos(), theta.sin()];
            // Snap to exact orthogonality for the row that defined the angle.
            let mask: Vec<u8> = x
                .iter_rows()
                .map(|r| {
                    let s = r[0] * a[0] + r[1] * a[1];
                    u8::from(s >= -1e-12)
                })
                .collect();
            set.insert(mask);
        }
        set
    }

    #[test]
    fn enumeration_matches_angular_sweep() {
        let x = random_matrix(8, 2, 10);
        let enumerated: HashSet<Vec<u8>> = enumerate_all_patterns(&x, 15)
            .unwrap()
            .into_iter()
            .map(|p| p.mask)
            .collect();
        assert_eq!(enumerated, angular_sweep(&x));
    }

    #[test]
    fn sampled_patterns_are_enumerated() {
        let x = random_matrix(9, 3, 12);
        let all: HashSet<Vec<u8>> = enumerate_all_patterns(&x, 15)
            .unwrap()
            .into_iter()
            .map(|p| p.mask)
            .collect();
        let set = sample_standard(&x, &SamplerConfig::standard(200, 4)).unwrap();
        for p in &set.patterns {
            assert!(all.contains(&p.mask));
        }
    }

    #[test]
    fn bound_values() {
        assert_eq!(pattern_count_bound(40, 2).unwrap().round(), 11239.0);
        assert!((pattern_count_bound(2, 1).unwrap() - 2.0 * std::f64::consts::E).abs() < 1e-12);
        let direct = pattern_count_bound(10, 3).unwrap();
        let log_form = (6.0f64).ln() + 3.0 * (1.0 + (9.0f64 / 3.0).ln());
        assert!((direct - log_form.exp()).abs() <= 1e-9 * direct);
        assert!(pattern_count_bound(1, 1).is_err());
        assert!(pattern_count_bound(5, 0).is_err());
    }

    #[test]
    fn sample_count_values() {
        assert_eq!(min_sample_count(40, 0.318, 1.0 - 1e-15).unwrap(), 128);
        assert_eq!(min_sample_count(40, 0.318_f64.sqrt(), 0.318_f64.sqrt()).unwrap(), 128);
        assert_eq!(min_sample_count(581, 0.5, 0.5).unwrap(), 2327);
        assert_eq!(min_sample_count(12, 1.0 - 1e-13, 1.0 - 1e-13).unwrap(), 12);
        assert!(min_sample_count(5, 0.0, 0.5).is_err());
        assert!(min_sample_count(5, 0.5, 1.0).is_err());
    }
}
