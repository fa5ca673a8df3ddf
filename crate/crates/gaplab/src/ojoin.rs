//! Odd-vertex matchings and O-join LP feasibility.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::bits::{self, VSet};
use crate::instance::{Instance, SupportGraph};
use crate::maxent::TreeSample;
use crate::num::{self, Scaled, Q};
use crate::{Error, Result};

pub const DEFAULT_ODD_CAP: usize = 20;
/// Root-free side enumeration bound for O-join verification.
pub const EXHAUSTIVE_LIMIT: usize = 22;
const TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OddSet {
    pub vertices: Vec<usize>,
    pub draw: u64,
}

impl OddSet {
    pub fn mask(&self) -> VSet {
        bits::from_members(self.vertices.iter().copied())
    }
}

/// Vertices of odd degree in `T ∪ {e₀}`.
pub fn odd_vertices(tree: &TreeSample, g: &SupportGraph) -> OddSet {
    let mut odd: VSet = 0;
    for &i in tree.edges.iter().chain(std::iter::once(&g.e0)) {
        let e = &g.edges[i];
        odd ^= bits::bit(e.u) ^ bits::bit(e.v);
    }
    OddSet { vertices: bits::members(odd).collect(), draw: tree.draw }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Matching {
    pub pairs: Vec<(usize, usize)>,
    pub cost: Q,
}

/// Exact minimum perfect matching on the metric closure of `vertices` by
/// bitmask DP over `O(2^k k)` states. `dist` maps a pair to its exact cost.
pub fn min_cost_matching_by(vertices: &[usize], cap: usize, dist: impl Fn(usize, usize) -> Q) -> Result<Matching> {
    let k = vertices.len();
    if k > cap {
        return Err(Error::TooManyOdd { size: k, cap });
    }
    if k % 2 == 1 {
        return Err(Error::BadParams(format!("odd set of odd size {k}")));
    }
    if k == 0 {
        return Ok(Matching { pairs: Vec::new(), cost: Q::zero() });
    }
    let d: Vec<Q> = (0..k * k).map(|t| dist(vertices[t / k], vertices[t % k])).collect();
    let pairs = match Scaled::new(&d) {
        Some(sc) => dp(k, |i, j| sc.num[i * k + j]),
        // Denominators too wide for i128: order by doubles, cost stays exact.
        None => {
            let df: Vec<f64> = d.iter().map(num::to_f64).collect();
            dp(k, |i, j| df[i * k + j])
        }
    };
    let cost = pairs.iter().map(|&(i, j)| d[i * k + j].clone()).sum();
    Ok(Matching { pairs: pairs.into_iter().map(|(i, j)| (vertices[i], vertices[j])).collect(), cost })
}

fn dp<W: Copy + PartialOrd + std::ops::Add<Output = W> + Default>(k: usize, w: impl Fn(usize, usize) -> W) -> Vec<(usize, usize)> {
    let full = (1usize << k) - 1;
    let mut best: Vec<Option<W>> = vec![None; 1 << k];
    let mut choice = vec![0usize; 1 << k];
    best[0] = Some(W::default());
    for mask in 1..=full {
        if mask.count_ones() % 2 == 1 {
            continue;
        }
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut bits = rest;
        while bits != 0 {
            let j = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            if let Some(b) = best[rest & !(1 << j)] {
                let c = b + w(i, j);
                if best[mask].map_or(true, |cur| c < cur) {
                    best[mask] = Some(c);
                    choice[mask] = j;
                }
            }
        }
    }
    let mut pairs = Vec::with_capacity(k / 2);
    let mut mask = full;
    while mask != 0 {
        let i = mask.trailing_zeros() as usize;
        let j = choice[mask];
        pairs.push((i, j));
        mask &= !(1 << i) & !(1 << j);
    }
    pairs
}

/// Matching on support vertices; `u₀` and `v₀` both stand for the pivot.
pub fn min_cost_matching(odd: &OddSet, inst: &Instance, g: &SupportGraph, cap: usize) -> Result<Matching> {
    min_cost_matching_by(&odd.vertices, cap, |a, b| inst.dist(g.origin[a], g.origin[b]).clone())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    HalfX,
    HalfXPlusSlack,
}

/// `y` over `E₀`, indexed by support edge id; `y[e₀] = ∞`.
#[derive(Clone, Debug, PartialEq)]
pub struct OJoinVector {
    pub y: Vec<f64>,
    pub provenance: Provenance,
}

impl OJoinVector {
    pub fn half_x(g: &SupportGraph) -> OJoinVector {
        let mut y: Vec<f64> = g.xf().into_iter().map(|v| v / 2.0).collect();
        y[g.e0] = f64::INFINITY;
        OJoinVector { y, provenance: Provenance::HalfX }
    }

    /// `y = x/2 + shift`, clamped at 0.
    pub fn half_x_plus(g: &SupportGraph, shift: &[f64]) -> OJoinVector {
        let mut y: Vec<f64> = g.xf().iter().zip(shift).map(|(x, s)| (x / 2.0 + s).max(0.0)).collect();
        y[g.e0] = f64::INFINITY;
        OJoinVector { y, provenance: Provenance::HalfXPlusSlack }
    }

    pub fn cut(&self, g: &SupportGraph, s: VSet) -> f64 {
        g.edges
            .iter()
            .zip(&self.y)
            .filter(|(e, _)| bits::contains(s, e.u) != bits::contains(s, e.v))
            .map(|(_, y)| *y)
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OJoinVerdict {
    pub feasible: bool,
    pub violated: Option<VSet>,
    pub odd_sides: usize,
}

/// Checks `y(δ(S)) ≥ 1 − 10⁻⁹` on every side with `|S∩O|` odd. Only sides
/// avoiding `u₀,v₀` are enumerated: sides splitting `e₀` are satisfied by the
/// infinite sentinel and the rest are complements of enumerated ones.
pub fn verify_ojoin_feasible(y: &OJoinVector, odd: &OddSet, g: &SupportGraph) -> Result<OJoinVerdict> {
    let free: Vec<usize> = (0..g.n).filter(|&v| v != g.u0 && v != g.v0).collect();
    if free.len() > EXHAUSTIVE_LIMIT {
        return Err(Error::TooLarge(format!("{} root-free vertices", free.len())));
    }
    if y.y.iter().any(|v| *v < 0.0 || v.is_nan()) {
        return Err(Error::BadParams("y has a negative entry".into()));
    }
    let o = odd.mask();
    let mut inc: Vec<Vec<(usize, f64)>> = vec![Vec::new(); g.n];
    for (e, &w) in g.edges.iter().zip(&y.y) {
        inc[e.u].push((e.v, w));
        inc[e.v].push((e.u, w));
    }
    let mut s: VSet = 0;
    let mut value = 0.0f64;
    let mut odd_sides = 0;
    for step in 1u64..(1u64 << free.len()) {
        let v = free[step.trailing_zeros() as usize];
        // Toggling v changes y(δ(S)) by y(δ(v)) − 2·y(v, S).
        let mut to_s = 0.0;
        let mut all = 0.0;
        for &(u, w) in &inc[v] {
            all += w;
            if bits::contains(s, u) {
                to_s += w;
            }
        }
        if bits::contains(s, v) {
            s &= !bits::bit(v);
            value -= all - 2.0 * to_s;
        } else {
            s |= bits::bit(v);
            value += all - 2.0 * to_s;
        }
        if bits::len(s & o) % 2 == 1 {
            odd_sides += 1;
            if value < 1.0 - TOL && y.cut(g, s) < 1.0 - TOL {
                return Ok(OJoinVerdict { feasible: false, violated: Some(s), odd_sides });
            }
        }
    }
    Ok(OJoinVerdict { feasible: true, violated: None, odd_sides })
}

/// A root-free side is satisfied when it is even in the tree or
/// `y(δ(S)) ≥ 1 − 10⁻⁹`.
pub fn satisfies(y: &OJoinVector, tree: &TreeSample, g: &SupportGraph, s: VSet) -> bool {
    let crossing = tree
        .edges
        .iter()
        .filter(|&&i| bits::contains(s, g.edges[i].u) != bits::contains(s, g.edges[i].v))
        .count();
    crossing % 2 == 0 || y.cut(g, s) >= 1.0 - TOL
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::qi;

    #[test]
    fn pair_and_square() {
        let m = min_cost_matching_by(&[3, 7], 20, |a, b| qi((a + b) as i64)).unwrap();
        assert_eq!(m.pairs, vec![(3, 7)]);
        assert_eq!(m.cost, qi(10));
        let sq = Instance::from_points("sq", vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]).unwrap();
        let m = min_cost_matching_by(&[0, 1, 2, 3], 20, |a, b| sq.dist(a, b).clone()).unwrap();
        assert_eq!(m.cost, qi(2));
        assert!(matches!(min_cost_matching_by(&[0; 22], 20, |_, _| qi(0)), Err(Error::TooManyOdd { size: 22, cap: 20 })));
    }
}
