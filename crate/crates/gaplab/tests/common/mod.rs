//! Brute-force oracles shared by the integration tests. Each one is written
//! against definitions only, with no code shared with the library paths it
//! checks.

#![allow(dead_code)]

use std::collections::BTreeSet;

use gaplab::bits::{self, VSet};
use gaplab::harness::{generate_fixture, FixtureKind, FixtureParams};
use gaplab::instance::{Instance, SupportGraph};
use gaplab::num::{self, Q};

/// Subtour LP optimum by a dense LP over every proper cut, solved in `f64`.
pub fn subtour_lp_dense(inst: &Instance) -> f64 {
    use minilp::{ComparisonOp, OptimizationDirection, Problem};
    let n = inst.n;
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let mut var = vec![vec![None; n]; n];
    for u in 0..n {
        for v in u + 1..n {
            var[u][v] = Some(p.add_var(inst.distf(u, v), (0.0, 1.0)));
        }
    }
    let x = |u: usize, v: usize| var[u.min(v)][u.max(v)].unwrap();
    for v in 0..n {
        let row: Vec<_> = (0..n).filter(|&u| u != v).map(|u| (x(u, v), 1.0)).collect();
        p.add_constraint(&row[..], ComparisonOp::Eq, 2.0);
    }
    // Sides avoiding vertex n−1 cover every cut once.
    for s in 1u64..(1 << (n - 1)) {
        if bits::len(s) < 2 || bits::len(s) > n - 2 {
            continue;
        }
        let mut row = Vec::new();
        for u in bits::members(s) {
            for v in (0..n).filter(|v| !bits::contains(s, *v)) {
                row.push((x(u, v), 1.0));
            }
        }
        p.add_constraint(&row[..], ComparisonOp::Ge, 2.0);
    }
    p.solve().expect("dense subtour LP").objective()
}

/// Cheapest Hamiltonian cycle by trying every permutation fixing vertex 0.
pub fn optimal_tour(inst: &Instance) -> f64 {
    fn go(inst: &Instance, path: &mut Vec<usize>, used: &mut [bool], cost: f64, best: &mut f64) {
        if cost >= *best {
            return;
        }
        if path.len() == inst.n {
            *best = best.min(cost + inst.distf(*path.last().unwrap(), 0));
            return;
        }
        for v in 1..inst.n {
            if !used[v] {
                used[v] = true;
                let c = cost + inst.distf(*path.last().unwrap(), v);
                path.push(v);
                go(inst, path, used, c, best);
                path.pop();
                used[v] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    let mut used = vec![false; inst.n];
    used[0] = true;
    go(inst, &mut vec![0], &mut used, 0.0, &mut best);
    best
}

/// Cut value from the edge list, no caching.
pub fn naive_cut(g: &SupportGraph, s: VSet) -> Q {
    g.edges
        .iter()
        .filter(|e| bits::contains(s, e.u) != bits::contains(s, e.v))
        .map(|e| e.x.clone())
        .sum()
}

/// Every root-free side with cut value below (or at, when `closed`) `2 + η`.
pub fn naive_near_min(g: &SupportGraph, eta: &Q, closed: bool) -> BTreeSet<VSet> {
    let thr = num::qi(2) + eta;
    let root = bits::bit(g.u0) | bits::bit(g.v0);
    let mut out = BTreeSet::new();
    for s in 1u64..(1u64 << g.n) {
        if s & root != 0 {
            continue;
        }
        let v = naive_cut(g, s);
        if v < thr || (closed && v == thr) {
            out.insert(s);
        }
    }
    out
}

/// Root-free sides `A, B` cross when `A∩B`, `A∖B`, `B∖A` are all nonempty.
pub fn cross(a: VSet, b: VSet) -> bool {
    a & b != 0 && a & !b != 0 && b & !a != 0
}

/// Connected components of the crossing graph, as sorted side lists.
pub fn crossing_components(sides: &[VSet]) -> Vec<Vec<VSet>> {
    let k = sides.len();
    let mut comp = vec![usize::MAX; k];
    let mut out = Vec::new();
    for start in 0..k {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut stack = vec![start];
        comp[start] = id;
        let mut members = Vec::new();
        while let Some(i) = stack.pop() {
            members.push(sides[i]);
            for j in 0..k {
                if comp[j] == usize::MAX && cross(sides[i], sides[j]) {
                    comp[j] = id;
                    stack.push(j);
                }
            }
        }
        members.sort();
        out.push(members);
    }
    out
}

/// Coarsest partition of `0..n` that every side respects: vertices are
/// grouped by their membership pattern.
pub fn coarsest_partition(sides: &[VSet], n: usize) -> BTreeSet<VSet> {
    let mut classes: std::collections::BTreeMap<Vec<bool>, VSet> = Default::default();
    for v in 0..n {
        let key: Vec<bool> = sides.iter().map(|&s| bits::contains(s, v)).collect();
        *classes.entry(key).or_default() |= bits::bit(v);
    }
    classes.into_values().collect()
}

/// Every spanning tree of a multigraph on `0..n`, as sorted edge indices.
pub fn all_spanning_trees(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    fn find(p: &mut [usize], v: usize) -> usize {
        if p[v] != v {
            let r = find(p, p[v]);
            p[v] = r;
        }
        p[v]
    }
    fn go(n: usize, edges: &[(usize, usize)], i: usize, chosen: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if chosen.len() == n - 1 {
            out.push(chosen.clone());
            return;
        }
        if edges.len() - i < n - 1 - chosen.len() {
            return;
        }
        let mut p: Vec<usize> = (0..n).collect();
        for &c in chosen.iter() {
            let (a, b) = (find(&mut p, edges[c].0), find(&mut p, edges[c].1));
            p[a] = b;
        }
        let (a, b) = (find(&mut p, edges[i].0), find(&mut p, edges[i].1));
        if a != b {
            chosen.push(i);
            go(n, edges, i + 1, chosen, out);
            chosen.pop();
        }
        go(n, edges, i + 1, chosen, out);
    }
    let mut out = Vec::new();
    go(n, edges, 0, &mut Vec::new(), &mut out);
    out
}

/// Every fixture whose split graph has at most `max_n` vertices.
pub fn small_fixtures(max_n: usize) -> Vec<(FixtureKind, SupportGraph, Q)> {
    FixtureKind::ALL
        .iter()
        .filter_map(|&k| {
            let f = generate_fixture(k, &FixtureParams::default()).expect("fixture");
            (f.graph.n <= max_n).then_some((k, f.graph, f.eta))
        })
        .collect()
}

/// Points with two tight clusters, which makes fractional LP optima likely.
pub fn clustered(name: &str, n: usize, seed: u64) -> Instance {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let pts = (0..n)
        .map(|i| {
            let cx = if i % 2 == 0 { 0.0 } else { 40.0 };
            let x: f64 = cx + rng.gen_range(0.0..10.0);
            let y: f64 = rng.gen_range(0.0..10.0);
            ((x * 64.0).round() / 64.0, (y * 64.0).round() / 64.0)
        })
        .collect();
    Instance::from_points(name, pts).expect("points")
}
