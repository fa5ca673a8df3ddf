//! Near-minimum cuts of `G/e₀`: exhaustive enumeration, crossing
//! components, atoms, polygon arrangements and left/right classification.
//!
//! Every cut is stored as its side avoiding `u₀,v₀`. Atoms of a component are
//! indexed so that atom 0 holds the root; atom sets are `u64` masks over atom
//! ids and polygon positions.

mod polygon;
mod structure;

use num_traits::Signed;
use serde::Serialize;
use serde_json::json;

use crate::bits::{self, VSet};
use crate::instance::SupportGraph;
use crate::num::{self, qi, Q};
use crate::{Error, Result};

pub use polygon::{arrange_polygon, circular_interval, find_k_cycle, KCycle, Polygon, ARRANGE_BUDGET, KCYCLE_BUDGET};
pub use structure::{
    almost_diagonal_cuts, chain_decomposition, structural_checks, uncrossing_report, FSet, Side, UncrossingReport,
};

/// Root-free side enumeration bound.
pub const EXHAUSTIVE_LIMIT: usize = 24;

/// Mask over atom ids or polygon positions of one component.
pub type AMask = u64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cut {
    pub side: VSet,
    pub value: Q,
}

impl Cut {
    pub fn slack(&self) -> Q {
        &self.value - qi(2)
    }

    pub fn vertices(&self) -> Vec<usize> {
        bits::members(self.side).collect()
    }
}

/// Exact cut values on `u64` sides via integer numerators.
pub struct CutEval {
    ends: Vec<(usize, usize)>,
    num: Vec<i128>,
    den: i128,
}

impl CutEval {
    pub fn new(g: &SupportGraph) -> Result<CutEval> {
        let sc = g.scaled()?;
        Ok(CutEval { ends: g.edges.iter().map(|e| (e.u, e.v)).collect(), num: sc.num, den: sc.den })
    }

    pub fn scaled_value(&self, s: VSet) -> i128 {
        self.ends
            .iter()
            .zip(&self.num)
            .filter(|((u, v), _)| bits::contains(s, *u) != bits::contains(s, *v))
            .map(|(_, w)| *w)
            .sum()
    }

    pub fn value(&self, s: VSet) -> Q {
        self.to_q(self.scaled_value(s))
    }

    /// `x(E(a, b))`.
    pub fn between(&self, a: VSet, b: VSet) -> Q {
        let raw: i128 = self
            .ends
            .iter()
            .zip(&self.num)
            .filter(|((u, v), _)| {
                (bits::contains(a, *u) && bits::contains(b, *v)) || (bits::contains(b, *u) && bits::contains(a, *v))
            })
            .map(|(_, w)| *w)
            .sum();
        self.to_q(raw)
    }

    pub fn to_q(&self, raw: i128) -> Q {
        Q::new(raw.into(), self.den.into())
    }
}

/// Every root-free side `S ≠ ∅` with `x(δ(S)) < 2 + η` (or `≤` when
/// `closed`), sorted by size and then by mask. Values are exact.
pub fn enumerate_near_min_cuts(g: &SupportGraph, eta: &Q, closed: bool) -> Result<Vec<Cut>> {
    let free: Vec<usize> = (0..g.n).filter(|&v| v != g.u0 && v != g.v0).collect();
    if free.len() > EXHAUSTIVE_LIMIT {
        return Err(Error::TooLarge(format!("{} root-free vertices", free.len())));
    }
    if eta.is_negative() {
        return Err(Error::BadParams("eta must be nonnegative".into()));
    }
    let sc = g.scaled()?;
    // value/den < t  <=>  value < t·den; the right side is rounded to an
    // integer bound so the inner loop compares i128s only.
    let t = (qi(2) + eta) * Q::from_integer(sc.den.into());
    let bound: i128 = {
        let fl = num::floor_i128(&t).ok_or_else(|| Error::TooLarge("threshold overflow".into()))?;
        if closed || !t.is_integer() {
            fl
        } else {
            fl - 1
        }
    };
    let mut inc: Vec<Vec<(usize, i128)>> = vec![Vec::new(); g.n];
    for (e, &w) in g.edges.iter().zip(&sc.num) {
        inc[e.u].push((e.v, w));
        inc[e.v].push((e.u, w));
    }
    let mut out = Vec::new();
    let mut s: VSet = 0;
    let mut value: i128 = 0;
    for step in 1u64..(1u64 << free.len()) {
        let v = free[step.trailing_zeros() as usize];
        let (mut all, mut to_s) = (0i128, 0i128);
        for &(u, w) in &inc[v] {
            all += w;
            if bits::contains(s, u) {
                to_s += w;
            }
        }
        if bits::contains(s, v) {
            s &= !bits::bit(v);
            value -= all - 2 * to_s;
        } else {
            s |= bits::bit(v);
            value += all - 2 * to_s;
        }
        if value <= bound {
            out.push(Cut { side: s, value: Q::new(value.into(), sc.den.into()) });
        }
    }
    out.sort_by_key(|c| (bits::len(c.side), c.side));
    Ok(out)
}

/// A maximal connected family of pairwise-crossing cuts with its atoms.
#[derive(Clone, Debug)]
pub struct Component {
    /// Ids into the cut list the component was built from, ascending.
    pub cuts: Vec<usize>,
    /// Crossing graph over local indices.
    pub adjacency: Vec<Vec<usize>>,
    /// `atoms[0]` is the root atom; the others are ordered by lowest vertex.
    pub atoms: Vec<VSet>,
    /// Atom mask of every member cut, by local index.
    pub cut_atoms: Vec<AMask>,
    pub polygon: Option<Polygon>,
}

impl Component {
    pub fn is_singleton(&self) -> bool {
        self.cuts.len() == 1
    }

    pub fn local(&self, cut_id: usize) -> Option<usize> {
        self.cuts.binary_search(&cut_id).ok()
    }

    /// Vertex set of an atom mask.
    pub fn vertices(&self, atoms: AMask) -> VSet {
        bits::members(atoms).fold(0, |s, a| s | self.atoms[a])
    }

    /// Atom mask of a vertex set that is a union of atoms.
    pub fn atom_mask(&self, s: VSet) -> Option<AMask> {
        let mut m = 0;
        for (i, &a) in self.atoms.iter().enumerate() {
            if a & s == a {
                m |= 1 << i;
            } else if a & s != 0 {
                return None;
            }
        }
        Some(m)
    }

    pub fn atom_of(&self, v: usize) -> usize {
        self.atoms.iter().position(|&a| bits::contains(a, v)).expect("atoms partition V")
    }
}

/// Crossing components of `cuts[members]`, ordered by their smallest member.
pub fn build_components(cuts: &[Cut], members: &[usize], n: usize, root: VSet) -> Vec<Component> {
    let k = members.len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); k];
    for i in 0..k {
        for j in i + 1..k {
            if bits::crosses(cuts[members[i]].side, cuts[members[j]].side) {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    let mut comp_of = vec![usize::MAX; k];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for s in 0..k {
        if comp_of[s] != usize::MAX {
            continue;
        }
        let c = groups.len();
        let mut stack = vec![s];
        comp_of[s] = c;
        let mut group = Vec::new();
        while let Some(u) = stack.pop() {
            group.push(u);
            for &w in &adj[u] {
                if comp_of[w] == usize::MAX {
                    comp_of[w] = c;
                    stack.push(w);
                }
            }
        }
        group.sort_unstable();
        groups.push(group);
    }
    groups
        .into_iter()
        .map(|group| {
            let ids: Vec<usize> = group.iter().map(|&i| members[i]).collect();
            let sides: Vec<VSet> = ids.iter().map(|&i| cuts[i].side).collect();
            let atoms = atoms_of(&sides, n, root);
            let local = |i: usize| group.binary_search(&i).expect("same component");
            let adjacency = group.iter().map(|&i| adj[i].iter().map(|&j| local(j)).collect()).collect();
            let cut_atoms = sides
                .iter()
                .map(|&s| atoms.iter().enumerate().filter(|(_, &a)| a & s != 0).fold(0, |m, (i, _)| m | 1 << i))
                .collect();
            Component { cuts: ids, adjacency, atoms, cut_atoms, polygon: None }
        })
        .collect()
}

/// Coarsest partition of `0..n` refining every side; the class of the root
/// comes first and the rest are ordered by lowest vertex.
pub fn atoms_of(sides: &[VSet], n: usize, root: VSet) -> Vec<VSet> {
    let mut classes: Vec<(Vec<bool>, VSet)> = Vec::new();
    for v in 0..n {
        let sig: Vec<bool> = sides.iter().map(|&s| bits::contains(s, v)).collect();
        match classes.iter_mut().find(|(s, _)| *s == sig) {
            Some((_, set)) => *set |= bits::bit(v),
            None => classes.push((sig, bits::bit(v))),
        }
    }
    let mut atoms: Vec<VSet> = classes.into_iter().map(|(_, s)| s).collect();
    atoms.sort_by_key(|&a| (a & root == 0, a.trailing_zeros()));
    atoms
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tag {
    Uncrossed,
    CrossedOneSide,
    CrossedBothSides,
}

/// An item of the relevant family of a one-side polygon: either a member cut
/// or a non-root atom with `x(δ(a)) ≤ 2 + η`, as a position interval
/// `[lo, hi]` with `1 ≤ lo ≤ hi ≤ m−1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Relevant {
    pub lo: usize,
    pub hi: usize,
    pub side: VSet,
    /// Atlas cut id when the item is a near-min cut.
    pub cut: Option<usize>,
}

impl Relevant {
    pub fn is_atom(&self) -> bool {
        self.lo == self.hi
    }
}

#[derive(Clone, Debug)]
pub struct CutAtlas {
    pub eta: Q,
    pub closed: bool,
    pub n: usize,
    pub root: VSet,
    pub cuts: Vec<Cut>,
    pub components: Vec<Component>,
    pub component_of: Vec<usize>,
    pub tags: Vec<Tag>,
    /// Components of the cuts not crossed on both sides, rebuilt and
    /// re-arranged on that family alone.
    pub reduced: Vec<Component>,
    pub reduced_of: Vec<Option<usize>>,
    /// Relevant family per reduced component (non-singletons only).
    pub relevant: Vec<Option<Vec<Relevant>>>,
    pub warnings: Vec<String>,
}

impl CutAtlas {
    pub fn component(&self, cut: usize) -> &Component {
        &self.components[self.component_of[cut]]
    }

    pub fn both_sides(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.cuts.len()).filter(|&i| self.tags[i] == Tag::CrossedBothSides)
    }

    pub fn index_of(&self, side: VSet) -> Option<usize> {
        self.cuts.binary_search_by_key(&(bits::len(side), side), |c| (bits::len(c.side), c.side)).ok()
    }
}

/// Enumerates, decomposes, arranges and classifies in one pass.
pub fn build_atlas(g: &SupportGraph, eta: &Q, closed: bool) -> Result<CutAtlas> {
    let mut warnings = Vec::new();
    if *eta > num::q(1, 10) {
        warnings.push(format!("eta = {} is above 1/10; polygon structure guarantees do not apply", num::format(eta)));
    }
    let cuts = enumerate_near_min_cuts(g, eta, closed)?;
    let all: Vec<usize> = (0..cuts.len()).collect();
    let mut components = build_components(&cuts, &all, g.n, g.root());
    for c in components.iter_mut().filter(|c| !c.is_singleton()) {
        arrange_polygon(c, &cuts)?;
    }
    let mut component_of = vec![0; cuts.len()];
    for (ci, c) in components.iter().enumerate() {
        for &i in &c.cuts {
            component_of[i] = ci;
        }
    }
    let mut atlas = CutAtlas {
        eta: eta.clone(),
        closed,
        n: g.n,
        root: g.root(),
        cuts,
        components,
        component_of,
        tags: Vec::new(),
        reduced: Vec::new(),
        reduced_of: Vec::new(),
        relevant: Vec::new(),
        warnings,
    };
    classify_cuts(&mut atlas, g)?;
    Ok(atlas)
}

/// Assigns tags, then rebuilds the one-side family and its relevant sets.
pub fn classify_cuts(atlas: &mut CutAtlas, g: &SupportGraph) -> Result<()> {
    let mut tags = vec![Tag::Uncrossed; atlas.cuts.len()];
    for c in &atlas.components {
        let Some(poly) = &c.polygon else { continue };
        for (li, &id) in c.cuts.iter().enumerate() {
            let (mut left, mut right) = (false, false);
            for &lj in &c.adjacency[li] {
                if poly.crosses_on_left(c.cut_atoms[lj], c.cut_atoms[li])? {
                    left = true;
                } else {
                    right = true;
                }
            }
            tags[id] = match (left, right) {
                (true, true) => Tag::CrossedBothSides,
                (false, false) => Tag::Uncrossed,
                _ => Tag::CrossedOneSide,
            };
        }
    }
    atlas.tags = tags;
    let members: Vec<usize> = (0..atlas.cuts.len()).filter(|&i| atlas.tags[i] != Tag::CrossedBothSides).collect();
    let mut reduced = build_components(&atlas.cuts, &members, atlas.n, atlas.root);
    let mut reduced_of = vec![None; atlas.cuts.len()];
    let mut relevant = Vec::with_capacity(reduced.len());
    let threshold = qi(2) + &atlas.eta;
    for (ri, c) in reduced.iter_mut().enumerate() {
        for &i in &c.cuts {
            reduced_of[i] = Some(ri);
        }
        if c.is_singleton() {
            relevant.push(None);
            continue;
        }
        arrange_polygon(c, &atlas.cuts)?;
        let poly = c.polygon.as_ref().expect("arranged");
        if !poly.inside.is_empty() || poly.order[0] != 0 {
            atlas.warnings.push(format!("one-side component {ri} has inside atoms or an inside root"));
            relevant.push(None);
            continue;
        }
        let mut items = Vec::new();
        for (li, &id) in c.cuts.iter().enumerate() {
            let (lo, hi) = poly.intervals[li];
            items.push(Relevant { lo, hi, side: atlas.cuts[id].side, cut: Some(id) });
        }
        for pos in 1..poly.order.len() {
            let a = c.atoms[poly.order[pos]];
            if g.cut_value(a) <= threshold {
                items.push(Relevant { lo: pos, hi: pos, side: a, cut: atlas.index_of(a) });
            }
        }
        items.sort_by_key(|r| (r.lo, r.hi));
        relevant.push(Some(items));
    }
    atlas.reduced = reduced;
    atlas.reduced_of = reduced_of;
    atlas.relevant = relevant;
    Ok(())
}

fn component_json(c: &Component, cuts: &[Cut]) -> serde_json::Value {
    let atoms: Vec<Vec<usize>> = c.atoms.iter().map(|&a| bits::members(a).collect()).collect();
    let mut v = json!({
        "cuts": c.cuts,
        "sides": c.cuts.iter().map(|&i| cuts[i].vertices()).collect::<Vec<_>>(),
        "atoms": atoms,
        "root_atom": 0,
    });
    if let Some(p) = &c.polygon {
        v["order"] = json!(p.order);
        v["inside"] = json!(p.inside);
        v["intervals"] = json!(p.intervals.iter().map(|&(lo, hi)| [lo, hi]).collect::<Vec<_>>());
        v["points"] = json!(p.intervals.iter().map(|&(lo, hi)| [p.point_before(lo), hi]).collect::<Vec<_>>());
        v["k_cycles"] = json!(p.witnesses.iter().map(|w| json!({"atom": w.atom, "cuts": w.cuts})).collect::<Vec<_>>());
        v["outside_verified"] = json!(p.outside_verified);
    }
    v
}

impl CutAtlas {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "eta": num::format(&self.eta),
            "closed_threshold": self.closed,
            "n": self.n,
            "root": bits::members(self.root).collect::<Vec<_>>(),
            "cuts": self.cuts.iter().enumerate().map(|(i, c)| json!({
                "id": i,
                "vertices": c.vertices(),
                "value": num::format(&c.value),
                "component": self.component_of[i],
                "tag": self.tags[i],
            })).collect::<Vec<_>>(),
            "components": self.components.iter().map(|c| component_json(c, &self.cuts)).collect::<Vec<_>>(),
            "one_side_components": self.reduced.iter().zip(&self.relevant).map(|(c, r)| {
                let mut v = component_json(c, &self.cuts);
                v["relevant"] = json!(r);
                v
            }).collect::<Vec<_>>(),
            "warnings": self.warnings,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::SupportEdge;
    use crate::num::q;

    /// Cycle `0..n` with `x ≡ 1`; vertex `n` is `v₀` spliced next to `u₀ = 0`.
    pub(crate) fn cycle(n: usize) -> SupportGraph {
        let mut edges = Vec::new();
        let e = |u: usize, v: usize| SupportEdge { u, v, x: qi(1), cost: qi(0) };
        for i in 1..n - 1 {
            edges.push(e(i, i + 1));
        }
        edges.push(e(0, 1));
        edges.push(e(n - 1, n));
        edges.push(e(0, n));
        let e0 = edges.len() - 1;
        let mut origin: Vec<usize> = (0..n).collect();
        origin.push(0);
        SupportGraph::new("cycle", n + 1, edges, e0, origin).unwrap()
    }

    #[test]
    fn four_cycle_intervals() {
        let g = cycle(4);
        assert!(enumerate_near_min_cuts(&g, &qi(0), false).unwrap().is_empty());
        let cuts = enumerate_near_min_cuts(&g, &qi(0), true).unwrap();
        let sides: Vec<Vec<usize>> = cuts.iter().map(|c| c.vertices()).collect();
        assert_eq!(sides, vec![vec![1], vec![2], vec![3], vec![1, 2], vec![2, 3], vec![1, 2, 3]]);
        assert!(cuts.iter().all(|c| c.value == qi(2)));
    }

    #[test]
    fn cycle_atoms_are_vertices_and_arrangement_is_cyclic() {
        let g = cycle(6);
        let atlas = build_atlas(&g, &q(1, 20), false).unwrap();
        let big: Vec<&Component> = atlas.components.iter().filter(|c| !c.is_singleton()).collect();
        assert_eq!(big.len(), 1);
        let c = big[0];
        assert_eq!(c.atoms.len(), 6);
        assert_eq!(c.atoms[0], g.root());
        let p = c.polygon.as_ref().unwrap();
        let order: Vec<VSet> = p.order.iter().map(|&a| c.atoms[a]).collect();
        let expect: Vec<VSet> = std::iter::once(g.root()).chain((1..6).map(bits::bit)).collect();
        assert_eq!(order, expect);
        assert!(p.inside.is_empty());
        let both: Vec<Vec<usize>> = atlas.both_sides().map(|i| atlas.cuts[i].vertices()).collect();
        assert!(both.contains(&vec![2, 3]));
        assert!(!both.contains(&vec![1, 2]));
    }
}
