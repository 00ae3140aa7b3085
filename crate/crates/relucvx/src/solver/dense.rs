//! Dense LDLᵀ with sign-guided pivot regularization.

/// Pivot repair applied when a diagonal pivot has the wrong sign or is tiny.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PivotRepair {
    pub threshold: f64,
    pub replacement: f64,
}

impl PivotRepair {
    /// Returns the repaired pivot and whether a repair happened.
    pub fn apply(&self, value: f64, sign: i8) -> (f64, bool) {
        let s = f64::from(sign);
        if s * value < self.threshold || !value.is_finite() {
            (s * self.replacement, true)
        } else {
            (value, false)
        }
    }
}

const BLOCK: usize = 48;

/// In-place LDLᵀ of the lower triangle of the row-major `n×n` matrix `a`.
/// On return the strict lower triangle holds L (unit diagonal implied) and `d`
/// holds D. Returns the number of repaired pivots.
pub fn ldl_lower(a: &mut [f64], n: usize, d: &mut [f64], signs: &[i8], repair: &PivotRepair) -> usize {
    debug_assert!(a.len() >= n * n && d.len() >= n && signs.len() >= n);
    let mut repaired = 0;
    let mut wbuf = vec![0.0; BLOCK * n];
    let mut wc = vec![0.0; BLOCK];
    let mut k0 = 0;
    while k0 < n {
        let k1 = (k0 + BLOCK).min(n);
        // W_c = L[c, 0..k0] scaled by D, for the columns of this block.
        for c in k0..k1 {
            let row = &a[c * n..c * n + k0];
            let w = &mut wbuf[(c - k0) * n..(c - k0) * n + k0];
            for ((wj, lj), dj) in w.iter_mut().zip(row).zip(&d[..k0]) {
                *wj = lj * dj;
            }
        }
        if k0 > 0 {
            prefix_update(a, n, k0, k1, &wbuf);
        }
        for c in k0..k1 {
            let mut dc = a[c * n + c];
            for j in k0..c {
                let l = a[c * n + j];
                wc[j - k0] = l * d[j];
                dc -= l * wc[j - k0];
            }
            let (dc, fixed) = repair.apply(dc, signs[c]);
            repaired += usize::from(fixed);
            d[c] = dc;
            let inv = 1.0 / dc;
            for i in c + 1..n {
                let row = &mut a[i * n..i * n + c + 1];
                let mut s = row[c];
                for j in k0..c {
                    s -= row[j] * wc[j - k0];
                }
                row[c] = s * inv;
            }
        }
        k0 = k1;
    }
    repaired
}

/// a[i][c] -= dot(L[i, 0..k0], W_c) for i ≥ k0 and k0 ≤ c < min(k1, i + 1).
fn prefix_update(a: &mut [f64], n: usize, k0: usize, k1: usize, wbuf: &[f64]) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::is_x86_feature_detected!("avx2") && std::is_x86_feature_detected!("fma") {
            // SAFETY: the required CPU features were detected at runtime.
            unsafe { prefix_update_avx2(a, n, k0, k1, wbuf) };
            return;
        }
    }
    prefix_update_generic(a, n, k0, k1, wbuf);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn prefix_update_avx2(a: &mut [f64], n: usize, k0: usize, k1: usize, wbuf: &[f64]) {
    prefix_update_generic(a, n, k0, k1, wbuf);
}

#[inline(always)]
fn prefix_update_generic(a: &mut [f64], n: usize, k0: usize, k1: usize, wbuf: &[f64]) {
    for i in k0..n {
        let (head, tail) = a[i * n..i * n + k1].split_at_mut(k0);
        let cmax = k1.min(i + 1);
        for c in k0..cmax {
            let w = &wbuf[(c - k0) * n..(c - k0) * n + k0];
            tail[c - k0] -= dot_unrolled(head, w);
        }
    }
}

#[inline(always)]
pub fn dot_unrolled(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let chunks = n / 8;
    for k in 0..chunks {
        let pa = &a[k * 8..k * 8 + 8];
        let pb = &b[k * 8..k * 8 + 8];
        for l in 0..8 {
            acc[l] += pa[l] * pb[l];
        }
    }
    let mut s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for k in chunks * 8..n {
        s += a[k] * b[k];
    }
    s
}

/// Solves (L D Lᵀ) x = b in place using a factor from [`ldl_lower`].
#[cfg(test)]
pub fn ldl_solve(a: &[f64], n: usize, d: &[f64], x: &mut [f64]) {
    for i in 0..n {
        let s = dot_unrolled(&a[i * n..i * n + i], &x[..i]);
        x[i] -= s;
    }
    for i in 0..n {
        x[i] /= d[i];
    }
    for i in (0..n).rev() {
        let xi = x[i];
        for j in 0..i {
            x[j] -= a[i * n + j] * xi;
        }
    }
}
