//! Sparse LDLᵀ factorization of symmetric quasi-definite matrices.
//!
//! The matrix is reordered with [`amd::order`]. Leading nodes are factored with
//! an up-looking sparse algorithm over the elimination tree; the trailing nodes
//! the ordering marks as nearly dense are factored as a dense Schur complement.

use super::amd;
use super::dense::{self, PivotRepair};

const NONE: usize = usize::MAX;

/// Upper triangle (diagonal included) of a symmetric matrix in compressed columns.
#[derive(Debug, Clone, PartialEq)]
pub struct UpperCsc {
    pub n: usize,
    pub colptr: Vec<usize>,
    pub rowind: Vec<usize>,
    pub values: Vec<f64>,
}

impl UpperCsc {
    /// y = A x using both triangles.
    #[cfg(test)]
    pub fn sym_mul(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for c in 0..self.n {
            for p in self.colptr[c]..self.colptr[c + 1] {
                let r = self.rowind[p];
                let v = self.values[p];
                y[r] += v * x[c];
                if r != c {
                    y[c] += v * x[r];
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Lead(usize),
    Cross(usize),
    Tail(usize),
    Diag(usize),
}

/// Ordering, elimination tree, and storage layout; values are supplied per factorization.
#[derive(Debug, Clone)]
pub struct LdlFactor {
    n: usize,
    n1: usize,
    t: usize,
    perm: Vec<usize>,
    /// Destination of every input nonzero.
    slots: Vec<Slot>,
    signs: Vec<i8>,
    // Permuted leading block, strictly upper part by column.
    a_colptr: Vec<usize>,
    a_rowind: Vec<usize>,
    a_vals: Vec<f64>,
    diag: Vec<f64>,
    // Leading rows of each trailing column.
    x_colptr: Vec<usize>,
    x_rowind: Vec<usize>,
    x_vals: Vec<f64>,
    etree: Vec<usize>,
    l_colptr: Vec<usize>,
    l_rowind: Vec<u32>,
    l_vals: Vec<f64>,
    l21_colptr: Vec<usize>,
    l21_rowind: Vec<u32>,
    l21_vals: Vec<f64>,
    d: Vec<f64>,
    dense: Vec<f64>,
    dense_d: Vec<f64>,
    // Workspaces.
    y: Vec<f64>,
    mark: Vec<usize>,
    next: Vec<usize>,
    stack: Vec<usize>,
    path: Vec<usize>,
    pub repaired: usize,
}

impl LdlFactor {
    /// Symbolic analysis of `a`'s pattern. `signs[i]` is the expected sign of pivot i.
    pub fn analyze(a: &UpperCsc, signs: &[i8], dense_fraction: f64) -> Self {
        let n = a.n;
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
        for c in 0..n {
            for p in a.colptr[c]..a.colptr[c + 1] {
                let r = a.rowind[p];
                if r != c {
                    adj[r].push(c as u32);
                    adj[c].push(r as u32);
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        let ordering = amd::order(&adj, dense_fraction);
        drop(adj);
        let perm = ordering.perm;
        let t = ordering.dense_tail;
        let n1 = n - t;
        let mut iperm = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }

        // Classify entries and count per permuted column.
        let nnz = a.rowind.len();
        let mut lead_count = vec![0usize; n1];
        let mut cross_count = vec![0usize; t];
        let mut kinds: Vec<(u8, usize, usize)> = Vec::with_capacity(nnz);
        for c in 0..n {
            for p in a.colptr[c]..a.colptr[c + 1] {
                let (pi, pj) = (iperm[a.rowind[p]], iperm[c]);
                let (r, col) = if pi <= pj { (pi, pj) } else { (pj, pi) };
                let kind = if r == col {
                    0
                } else if col < n1 {
                    lead_count[col] += 1;
                    1
                } else if r < n1 {
                    cross_count[col - n1] += 1;
                    2
                } else {
                    3
                };
                kinds.push((kind, r, col));
            }
        }
        let a_colptr = prefix(&lead_count);
        let x_colptr = prefix(&cross_count);
        let mut a_rowind = vec![0usize; a_colptr[n1]];
        let mut x_rowind = vec![0usize; x_colptr[t]];
        let mut a_fill = a_colptr.clone();
        let mut x_fill = x_colptr.clone();
        let mut slots = Vec::with_capacity(nnz);
        for &(kind, r, col) in &kinds {
            let slot = match kind {
                0 => Slot::Diag(col),
                1 => {
                    let q = a_fill[col];
                    a_fill[col] += 1;
                    a_rowind[q] = r;
                    Slot::Lead(q)
                }
                2 => {
                    let q = x_fill[col - n1];
                    x_fill[col - n1] += 1;
                    x_rowind[q] = r;
                    Slot::Cross(q)
                }
                _ => Slot::Tail((col - n1) * t + (r - n1)),
            };
            slots.push(slot);
        }

        // Elimination tree and column counts of the leading block.
        let mut etree = vec![NONE; n1];
        let mut lnz = vec![0usize; n1];
        let mut mark = vec![NONE; n];
        for k in 0..n1 {
            mark[k] = k;
            for q in a_colptr[k]..a_colptr[k + 1] {
                let mut i = a_rowind[q];
                while mark[i] != k {
                    if etree[i] == NONE {
                        etree[i] = k;
                    }
                    lnz[i] += 1;
                    mark[i] = k;
                    i = etree[i];
                    if i == NONE {
                        break;
                    }
                }
            }
        }
        // Trailing rows of L restricted to leading columns: reach of each cross column.
        let mut l21_count = vec![0usize; n1];
        mark.fill(NONE);
        for tc in 0..t {
            let stamp = n1 + tc;
            for q in x_colptr[tc]..x_colptr[tc + 1] {
                let mut i = x_rowind[q];
                while i != NONE && mark[i] != stamp {
                    mark[i] = stamp;
                    l21_count[i] += 1;
                    i = etree[i];
                }
            }
        }
        let l_colptr = prefix(&lnz);
        let l21_colptr = prefix(&l21_count);
        let mut signs_perm = vec![1i8; n];
        for (new, &old) in perm.iter().enumerate() {
            signs_perm[new] = signs[old];
        }
        Self {
            n,
            n1,
            t,
            perm,
            slots,
            signs: signs_perm,
            a_vals: vec![0.0; a_colptr[n1]],
            a_colptr,
            a_rowind,
            diag: vec![0.0; n],
            x_vals: vec![0.0; x_colptr[t]],
            x_colptr,
            x_rowind,
            etree,
            l_rowind: vec![0; l_colptr[n1]],
            l_vals: vec![0.0; l_colptr[n1]],
            l_colptr,
            l21_rowind: vec![0; l21_colptr[n1]],
            l21_vals: vec![0.0; l21_colptr[n1]],
            l21_colptr,
            d: vec![0.0; n],
            dense: vec![0.0; t * t],
            dense_d: vec![0.0; t],
            y: vec![0.0; n1],
            mark: vec![NONE; n1],
            next: vec![0; n1],
            stack: Vec::new(),
            path: Vec::new(),
            repaired: 0,
        }
    }

    /// Numeric factorization for values laid out like the analyzed matrix.
    pub fn factor(&mut self, values: &[f64], repair: &PivotRepair) {
        debug_assert_eq!(values.len(), self.slots.len());
        self.a_vals.fill(0.0);
        self.x_vals.fill(0.0);
        self.diag.fill(0.0);
        self.dense.fill(0.0);
        for (slot, &v) in self.slots.iter().zip(values) {
            match *slot {
                Slot::Lead(q) => self.a_vals[q] += v,
                Slot::Cross(q) => self.x_vals[q] += v,
                Slot::Diag(k) => self.diag[k] += v,
                Slot::Tail(q) => self.dense[q] += v,
            }
        }
        let mut repaired = 0;
        let n1 = self.n1;
        let t = self.t;
        for k in 0..n1 {
            self.next[k] = self.l_colptr[k];
        }
        for k in 0..n1 {
            self.stack.clear();
            self.mark[k] = k;
            for q in self.a_colptr[k]..self.a_colptr[k + 1] {
                let i = self.a_rowind[q];
                self.y[i] += self.a_vals[q];
                self.push_reach(i, k);
            }
            let mut dk = self.diag[k];
            while let Some(c) = self.stack.pop() {
                let yc = self.y[c];
                self.y[c] = 0.0;
                self.mark[c] = NONE;
                let end = self.next[c];
                for q in self.l_colptr[c]..end {
                    self.y[self.l_rowind[q] as usize] -= self.l_vals[q] * yc;
                }
                let l = yc / self.d[c];
                self.l_rowind[end] = k as u32;
                self.l_vals[end] = l;
                self.next[c] = end + 1;
                dk -= yc * l;
            }
            let (dk, fixed) = repair.apply(dk, self.signs[k]);
            repaired += usize::from(fixed);
            self.d[k] = dk;
        }
        // Trailing rows against leading columns.
        let mut next21: Vec<usize> = self.l21_colptr[..n1].to_vec();
        for tc in 0..t {
            self.stack.clear();
            let stamp = n1 + tc;
            for q in self.x_colptr[tc]..self.x_colptr[tc + 1] {
                let i = self.x_rowind[q];
                self.y[i] += self.x_vals[q];
                self.push_reach(i, stamp);
            }
            while let Some(c) = self.stack.pop() {
                let yc = self.y[c];
                self.y[c] = 0.0;
                self.mark[c] = NONE;
                for q in self.l_colptr[c]..self.next[c] {
                    self.y[self.l_rowind[q] as usize] -= self.l_vals[q] * yc;
                }
                let pos = next21[c];
                self.l21_rowind[pos] = tc as u32;
                self.l21_vals[pos] = yc / self.d[c];
                next21[c] = pos + 1;
            }
        }
        if t > 0 {
            // Diagonal and upper-stored entries become the lower triangle of S.
            for k in 0..t {
                self.dense[k * t + k] += self.diag[n1 + k];
            }
            // Schur complement S −= L21 D L21ᵀ, one leading column at a time.
            for c in 0..n1 {
                let (lo, hi) = (self.l21_colptr[c], self.l21_colptr[c + 1]);
                if lo == hi {
                    continue;
                }
                let dc = self.d[c];
                for a in lo..hi {
                    let ra = self.l21_rowind[a] as usize;
                    let la = self.l21_vals[a] * dc;
                    let row = &mut self.dense[ra * t..ra * t + ra + 1];
                    for b in lo..=a {
                        row[self.l21_rowind[b] as usize] -= la * self.l21_vals[b];
                    }
                }
            }
            let signs = &self.signs[n1..];
            repaired += dense::ldl_lower(&mut self.dense, t, &mut self.dense_d, signs, repair);
            self.d[n1..].copy_from_slice(&self.dense_d);
        }
        self.repaired = repaired;
    }

    /// Whether every stored entry of L and D is finite.
    pub fn is_finite(&self) -> bool {
        let t = self.t;
        let dense_ok = (0..t).all(|r| self.dense[r * t..r * t + r].iter().all(|v| v.is_finite()));
        dense_ok
            && self.d.iter().all(|v| v.is_finite())
            && self.l_vals.iter().all(|v| v.is_finite())
            && self.l21_vals.iter().all(|v| v.is_finite())
    }

    /// Pushes the unvisited etree path from `i` onto the stack, ancestors first.
    fn push_reach(&mut self, i: usize, stamp: usize) {
        self.path.clear();
        let mut j = i;
        while j != NONE && self.mark[j] != stamp {
            self.mark[j] = stamp;
            self.path.push(j);
            j = self.etree[j];
        }
        // Entries popped last must be ancestors, so push the path reversed.
        for &p in self.path.iter().rev() {
            self.stack.push(p);
        }
    }

    /// Solves A x = b in place (original ordering).
    pub fn solve(&self, b: &mut [f64], work: &mut Vec<f64>) {
        let (n, n1, t) = (self.n, self.n1, self.t);
        work.clear();
        work.extend(self.perm.iter().map(|&old| b[old]));
        let x = work.as_mut_slice();
        for c in 0..n1 {
            let xc = x[c];
            if xc == 0.0 {
                continue;
            }
            for q in self.l_colptr[c]..self.l_colptr[c + 1] {
                x[self.l_rowind[q] as usize] -= self.l_vals[q] * xc;
            }
            for q in self.l21_colptr[c]..self.l21_colptr[c + 1] {
                x[n1 + self.l21_rowind[q] as usize] -= self.l21_vals[q] * xc;
            }
        }
        if t > 0 {
            let tail = &mut x[n1..];
            for i in 0..t {
                let s = dense::dot_unrolled(&self.dense[i * t..i * t + i], &tail[..i]);
                tail[i] -= s;
            }
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        if t > 0 {
            let tail = &mut x[n1..];
            for i in (0..t).rev() {
                let xi = tail[i];
                let row = &self.dense[i * t..i * t + i];
                for (xj, l) in tail[..i].iter_mut().zip(row) {
                    *xj -= l * xi;
                }
            }
        }
        for c in (0..n1).rev() {
            let mut s = 0.0;
            for q in self.l_colptr[c]..self.l_colptr[c + 1] {
                s += self.l_vals[q] * x[self.l_rowind[q] as usize];
            }
            for q in self.l21_colptr[c]..self.l21_colptr[c + 1] {
                s += self.l21_vals[q] * x[n1 + self.l21_rowind[q] as usize];
            }
            x[c] -= s;
        }
        for (new, &old) in self.perm.iter().enumerate() {
            b[old] = x[new];
        }
    }
}

fn prefix(counts: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(counts.len() + 1);
    let mut acc = 0;
    out.push(0);
    for &c in counts {
        acc += c;
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Lcg(u64);
    impl Lcg {
        fn next(&mut self) -> f64 {
            self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((self.0 >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        }
    }

    /// Random sparse quasi-definite KKT-like matrix [δI Gᵀ; G −D].
    fn kkt(nx: usize, nz: usize, density: f64, seed: u64) -> (UpperCsc, Vec<i8>) {
        let mut rng = Lcg(seed);
        let n = nx + nz;
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for j in 0..nx {
            cols[j].push((j, 1e-3 + rng.next().abs()));
        }
        for r in 0..nz {
            let c = nx + r;
            for j in 0..nx {
                if rng.next().abs() < density / 2.0 {
                    cols[c].push((j, rng.next()));
                }
            }
            if r > 0 && rng.next() > 0.3 {
                cols[c].push((c - 1, 0.1 * rng.next()));
            }
            cols[c].push((c, -(0.5 + rng.next().abs())));
        }
        let mut colptr = vec![0];
        let mut rowind = Vec::new();
        let mut values = Vec::new();
        for col in &cols {
            for &(r, v) in col {
                rowind.push(r);
                values.push(v);
            }
            colptr.push(rowind.len());
        }
        let mut signs = vec![1i8; nx];
        signs.extend(std::iter::repeat(-1i8).take(nz));
        (UpperCsc { n, colptr, rowind, values }, signs)
    }

    fn check(a: &UpperCsc, signs: &[i8], fraction: f64) -> usize {
        let mut f = LdlFactor::analyze(a, signs, fraction);
        let repair = PivotRepair {
            threshold: 1e-300,
            replacement: 1e-8,
        };
        f.factor(&a.values, &repair);
        assert_eq!(f.repaired, 0);
        let b: Vec<f64> = (0..a.n).map(|i| (i as f64 * 0.77).cos()).collect();
        let mut x = b.clone();
        let mut work = Vec::new();
        f.solve(&mut x, &mut work);
        let mut ax = vec![0.0; a.n];
        a.sym_mul(&x, &mut ax);
        let err = ax.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "residual {err}");
        f.t
    }

    #[test]
    fn sparse_only_factorization() {
        let (a, signs) = kkt(30, 50, 0.1, 1);
        check(&a, &signs, 2.0);
    }

    #[test]
    fn hybrid_factorization() {
        let (a, signs) = kkt(60, 90, 0.3, 2);
        let t = check(&a, &signs, 0.3);
        assert!(t > 0);
    }

    #[test]
    fn fully_dense_factorization() {
        let (a, signs) = kkt(10, 10, 1.0, 3);
        let t = check(&a, &signs, 0.0);
        assert_eq!(t, 20);
    }

    #[test]
    fn refactor_with_new_values() {
        let (mut a, signs) = kkt(25, 40, 0.2, 4);
        let mut f = LdlFactor::analyze(&a, &signs, 0.5);
        let repair = PivotRepair {
            threshold: 1e-300,
            replacement: 1e-8,
        };
        for scale in [1.0, 3.0] {
            for v in a.values.iter_mut() {
                *v *= scale;
            }
            f.factor(&a.values, &repair);
            let b: Vec<f64> = (0..a.n).map(|i| i as f64).collect();
            let mut x = b.clone();
            f.solve(&mut x, &mut Vec::new());
            let mut ax = vec![0.0; a.n];
            a.sym_mul(&x, &mut ax);
            for (p, q) in ax.iter().zip(&b) {
                assert!((p - q).abs() < 1e-8);
            }
        }
    }
}
