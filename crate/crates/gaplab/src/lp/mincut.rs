//! Exact Stoer–Wagner global minimum cut on rational weights.

use num_traits::Zero;

use crate::bits::{self, VSet};
use crate::num::Q;

/// One cut-of-the-phase: the merged vertex group added last.
#[derive(Clone, Debug)]
pub struct PhaseCut {
    pub side: VSet,
    pub value: Q,
}

/// Dense symmetric weight matrix from an edge list (parallel edges summed).
pub fn weight_matrix(n: usize, edges: &[(usize, usize, Q)]) -> Vec<Vec<Q>> {
    let mut w = vec![vec![Q::zero(); n]; n];
    for (u, v, x) in edges {
        if u != v {
            w[*u][*v] += x;
            w[*v][*u] += x;
        }
    }
    w
}

/// Runs every phase of Stoer–Wagner and returns all cuts of the phase; the
/// global minimum is the smallest of them. Maximum-adjacency ties go to the
/// lowest vertex id. `n ≥ 2` is required.
pub fn stoer_wagner_phases(w: &[Vec<Q>]) -> Vec<PhaseCut> {
    let n = w.len();
    let mut w: Vec<Vec<Q>> = w.to_vec();
    let mut group: Vec<VSet> = (0..n).map(bits::bit).collect();
    let mut alive: Vec<usize> = (0..n).collect();
    let mut phases = Vec::with_capacity(n.saturating_sub(1));
    while alive.len() > 1 {
        let k = alive.len();
        let mut added = vec![false; k];
        let mut key = vec![Q::zero(); k];
        let (mut prev, mut last) = (usize::MAX, 0);
        for _ in 0..k {
            let mut best = usize::MAX;
            for i in 0..k {
                if !added[i] && (best == usize::MAX || key[i] > key[best]) {
                    best = i;
                }
            }
            added[best] = true;
            prev = last;
            last = best;
            let b = alive[best];
            for i in 0..k {
                if !added[i] {
                    key[i] += &w[b][alive[i]];
                }
            }
        }
        let (s, t) = (alive[prev], alive[last]);
        phases.push(PhaseCut { side: group[t], value: key[last].clone() });
        group[s] |= group[t];
        for &v in &alive {
            if v != s && v != t {
                let add = w[t][v].clone();
                w[s][v] += &add;
                w[v][s] = w[s][v].clone();
            }
        }
        alive.retain(|&v| v != t);
    }
    phases
}

/// Global minimum cut `(side, value)`; ties keep the earliest phase.
pub fn min_cut(w: &[Vec<Q>]) -> Option<PhaseCut> {
    let mut best: Option<PhaseCut> = None;
    for p in stoer_wagner_phases(w) {
        if best.as_ref().map_or(true, |b| p.value < b.value) {
            best = Some(p);
        }
    }
    best
}

/// Connected components of the positive-weight support, each as a vertex set.
pub fn components(w: &[Vec<Q>]) -> Vec<VSet> {
    let n = w.len();
    let mut seen = 0u64;
    let mut out = Vec::new();
    for s in 0..n {
        if bits::contains(seen, s) {
            continue;
        }
        let mut comp = bits::bit(s);
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for v in 0..n {
                if !bits::contains(comp, v) && w[u][v] > Q::zero() {
                    comp |= bits::bit(v);
                    stack.push(v);
                }
            }
        }
        seen |= comp;
        out.push(comp);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{qi, q};

    fn brute_min(w: &[Vec<Q>]) -> Q {
        let n = w.len();
        let mut best: Option<Q> = None;
        for s in 1..(1u64 << (n - 1)) {
            let mut v = Q::zero();
            for a in 0..n {
                for b in 0..n {
                    if bits::contains(s, a) && !bits::contains(s, b) {
                        v += &w[a][b];
                    }
                }
            }
            if best.as_ref().map_or(true, |b| v < *b) {
                best = Some(v);
            }
        }
        best.unwrap()
    }

    #[test]
    fn petgraph_style_example() {
        let e = |u, v, x| (u, v, qi(x));
        let edges = vec![e(0, 1, 7), e(1, 2, 2), e(2, 3, 8), e(3, 0, 3), e(4, 5, 6), e(5, 6, 1), e(6, 7, 5), e(7, 4, 4), e(1, 4, 1), e(2, 7, 3)];
        let w = weight_matrix(8, &edges);
        let cut = min_cut(&w).unwrap();
        assert_eq!(cut.value, qi(4));
        let side = cut.side & 0xFF;
        assert!(side == 0x0F || side == 0xF0);
    }

    #[test]
    fn matches_brute_force_on_fractional_weights() {
        let edges = vec![(0, 1, q(1, 2)), (1, 2, q(3, 4)), (2, 3, q(1, 3)), (3, 0, q(5, 6)), (0, 2, q(1, 7)), (1, 3, q(2, 5)), (3, 4, q(1, 2)), (4, 0, q(1, 9))];
        let w = weight_matrix(5, &edges);
        assert_eq!(min_cut(&w).unwrap().value, brute_min(&w));
    }
}
