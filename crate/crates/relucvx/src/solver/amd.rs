//! Approximate minimum degree ordering on the quotient graph.
//!
//! Eliminated nodes become elements; a variable's degree is bounded by its
//! remaining variable neighbours plus the external sizes |L_e \ L_p| of its
//! adjacent elements. Elements covered by the new pivot element are absorbed.
//! Elimination stops once the remaining graph is nearly complete; those nodes
//! form a dense trailing block.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

const VAR: u8 = 0;
const ELEMENT: u8 = 1;
const ABSORBED: u8 = 2;
const DENSE: u8 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Ordering {
    /// `perm[new] = old`.
    pub perm: Vec<usize>,
    /// Number of trailing nodes to factor as a dense block.
    pub dense_tail: usize,
}

/// Orders the graph given by symmetric neighbour lists (no self loops).
///
/// `dense_fraction` sets the switch to the dense tail: elimination stops when the
/// smallest degree reaches that fraction of the remaining node count.
pub fn order(adj: &[Vec<u32>], dense_fraction: f64) -> Ordering {
    let n = adj.len();
    let mut status = vec![VAR; n];
    let mut vars: Vec<Vec<u32>> = adj.to_vec();
    let mut elems: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut lvars: Vec<Vec<u32>> = vec![Vec::new(); n];

    // Very dense rows would make every element huge; they go straight to the tail.
    let threshold = 16usize.max((10.0 * (n as f64).sqrt()) as usize);
    let dense: Vec<usize> = (0..n).filter(|&i| vars[i].len() > threshold).collect();
    if !dense.is_empty() {
        for &i in &dense {
            status[i] = DENSE;
        }
        for list in &mut vars {
            list.retain(|&j| status[j as usize] != DENSE);
        }
    }

    let mut degree: Vec<usize> = vars.iter().map(Vec::len).collect();
    let mut heap: BinaryHeap<Reverse<(usize, u32)>> = (0..n)
        .filter(|&i| status[i] == VAR)
        .map(|i| Reverse((degree[i], i as u32)))
        .collect();
    let mut remaining = n - dense.len();
    let mut order = Vec::with_capacity(n);
    let mut flag = vec![0u32; n];
    let mut wstamp = vec![0u32; n];
    let mut wval = vec![0i64; n];
    let mut gen = 0u32;

    while let Some(Reverse((deg, p))) = heap.pop() {
        let p = p as usize;
        if status[p] != VAR || degree[p] != deg {
            continue;
        }
        if remaining > 1 && deg as f64 >= dense_fraction * (remaining - 1) as f64 {
            break;
        }
        gen += 1;
        flag[p] = gen;

        // L_p: variables reachable through p's elements and direct edges.
        let mut lp: Vec<u32> = Vec::new();
        for &e in &elems[p] {
            let e = e as usize;
            if status[e] != ELEMENT {
                continue;
            }
            for &i in &lvars[e] {
                let iu = i as usize;
                if status[iu] == VAR && flag[iu] != gen {
                    flag[iu] = gen;
                    lp.push(i);
                }
            }
            status[e] = ABSORBED;
            lvars[e] = Vec::new();
        }
        for &i in &vars[p] {
            let iu = i as usize;
            if status[iu] == VAR && flag[iu] != gen {
                flag[iu] = gen;
                lp.push(i);
            }
        }
        status[p] = ELEMENT;
        vars[p] = Vec::new();
        elems[p] = Vec::new();
        order.push(p);
        remaining -= 1;

        // wval[e] = |L_e \ L_p| for elements adjacent to L_p.
        for &i in &lp {
            for &e in &elems[i as usize] {
                let e = e as usize;
                if status[e] != ELEMENT {
                    continue;
                }
                if wstamp[e] != gen {
                    wstamp[e] = gen;
                    wval[e] = lvars[e].len() as i64;
                }
                wval[e] -= 1;
            }
        }

        let lp_len = lp.len();
        for &i in &lp {
            let i = i as usize;
            let mut external = 0usize;
            let list = std::mem::take(&mut elems[i]);
            let mut kept = Vec::with_capacity(list.len() + 1);
            for e in list {
                let eu = e as usize;
                if status[eu] != ELEMENT {
                    continue;
                }
                if wval[eu] <= 0 {
                    // L_e ⊆ L_p: element p now represents e.
                    status[eu] = ABSORBED;
                    lvars[eu] = Vec::new();
                    continue;
                }
                external += wval[eu] as usize;
                kept.push(e);
            }
            kept.push(p as u32);
            elems[i] = kept;
            vars[i].retain(|&j| status[j as usize] == VAR && flag[j as usize] != gen);
            let bound = external + vars[i].len() + lp_len - 1;
            let d = bound
                .min(remaining.saturating_sub(1))
                .min(degree[i] + lp_len - 1);
            degree[i] = d;
            heap.push(Reverse((d, i as u32)));
        }
        lvars[p] = lp;
    }

    let lead = order.len();
    order.extend((0..n).filter(|&i| status[i] == VAR));
    order.extend(dense);
    Ordering {
        dense_tail: n - lead,
        perm: order,
    }
}
