//! Structural verifiers over a built atlas, the chain order of crossing cuts,
//! and the F-set summary.

use num_traits::One;
use serde::Serialize;

use super::polygon::circular_interval;
use super::{CutAtlas, CutEval, Tag};
use crate::bits::{self, VSet};
use crate::check::Check;
use crate::instance::SupportGraph;
use crate::num::{self, q, qi, Q};
use crate::slack;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Left,
    Right,
}

/// Root-free unions of atoms of component `ci` whose outside projection is a
/// nonempty proper interval, drawn from `pool` (typically the `2η`-near min
/// cuts).
pub fn almost_diagonal_cuts(atlas: &CutAtlas, ci: usize, pool: &[super::Cut]) -> Vec<VSet> {
    let c = &atlas.components[ci];
    let Some(p) = &c.polygon else { return Vec::new() };
    pool.iter()
        .filter_map(|cut| {
            let m = c.atom_mask(cut.side)?;
            (m & 1 == 0 && p.interval(m).is_some()).then_some(cut.side)
        })
        .collect()
}

/// Cuts of component `ci` crossing `s` on `side`, ordered by their
/// intersection with `s`; consecutive intersections must be nested.
pub fn chain_decomposition(atlas: &CutAtlas, ci: usize, s: VSet, side: Side) -> Result<Vec<usize>> {
    let c = &atlas.components[ci];
    let p = c.polygon.as_ref().ok_or_else(|| Error::BadParams("component has no polygon".into()))?;
    let sm = c.atom_mask(s).ok_or_else(|| Error::BadParams("set is not a union of atoms".into()))?;
    let mut chain = Vec::new();
    for (li, &id) in c.cuts.iter().enumerate() {
        if !bits::crosses(atlas.cuts[id].side, s) {
            continue;
        }
        let left = p.crosses_on_left(c.cut_atoms[li], sm)?;
        if left == (side == Side::Left) {
            chain.push(id);
        }
    }
    chain.sort_by_key(|&id| (bits::len(atlas.cuts[id].side & s), id));
    for w in chain.windows(2) {
        let (a, b) = (atlas.cuts[w[0]].side & s, atlas.cuts[w[1]].side & s);
        if !bits::subset(a, b) {
            return Err(Error::ChainViolation(format!(
                "intersections {:?} and {:?} with {:?} are not nested",
                bits::members(a).collect::<Vec<_>>(),
                bits::members(b).collect::<Vec<_>>(),
                bits::members(s).collect::<Vec<_>>()
            )));
        }
    }
    if let Some(&first) = chain.first() {
        let fo = p.outside_count(c.atom_mask(atlas.cuts[first].side & s).unwrap_or(0));
        let min = chain.iter().map(|&id| p.outside_count(c.atom_mask(atlas.cuts[id].side & s).unwrap_or(0))).min();
        if Some(fo) != min {
            return Err(Error::ChainViolation("the extremal crosser does not open the chain".into()));
        }
    }
    Ok(chain)
}

/// Every deterministic structural property of an atlas, one check each.
/// `pool2` holds the `2η`-near min cuts used for the chain order.
pub fn structural_checks(atlas: &CutAtlas, g: &SupportGraph, pool2: &[super::Cut]) -> Result<Vec<Check>> {
    let ev = CutEval::new(g)?;
    let two = qi(2);
    let half = q(1, 2);
    let cuts = &atlas.cuts;
    let slack: Vec<Q> = cuts.iter().map(|c| c.slack()).collect();
    let complement = bits::full(g.n);

    let mut uncross = Check::new("uncrossed-pieces-near-min");
    let mut corners = Check::new("crossing-corner-mass");
    for c in &atlas.components {
        for (li, adj) in c.adjacency.iter().enumerate() {
            for &lj in adj.iter().filter(|&&lj| lj > li) {
                let (ia, ib) = (c.cuts[li], c.cuts[lj]);
                let (a, b) = (cuts[ia].side, cuts[ib].side);
                let bound = &two + &slack[ia] + &slack[ib];
                for piece in [a & b, a | b, a & !b, b & !a] {
                    let v = ev.value(piece);
                    uncross.record(v <= bound, || format!("x(δ({:?})) = {}", bits::members(piece).collect::<Vec<_>>(), num::format(&v)));
                }
                let eps = slack[ia].clone().max(slack[ib].clone());
                let floor = Q::one() - &eps * &half;
                let out = complement & !(a | b);
                for (x, y) in [(a & b, a & !b), (a & b, b & !a), (out, a & !b), (out, b & !a)] {
                    let m = ev.between(x, y);
                    corners.record(m >= floor, || format!("corner mass {} < {}", num::format(&m), num::format(&floor)));
                }
            }
        }
    }

    let mut disjoint = Check::new("disjoint-union-mass");
    let mut nested = Check::new("nested-pair-mass");
    for i in 0..cuts.len() {
        for j in i + 1..cuts.len() {
            let (a, b) = (cuts[i].side, cuts[j].side);
            if a & b == 0 {
                if let Some(u) = atlas.index_of(a | b) {
                    let m = ev.between(a, b);
                    let floor = Q::one() - &slack[u] * &half;
                    disjoint.record(m >= floor, || format!("x(E(A,B)) = {} for cuts {i},{j}", num::format(&m)));
                }
            } else if bits::subset(a, b) || bits::subset(b, a) {
                let (inner, outer) = if bits::subset(a, b) { (a, b) } else { (b, a) };
                let eps = slack[i].clone().max(slack[j].clone());
                let shared = ev.between(inner, complement & !outer);
                let within = ev.between(inner, outer & !inner);
                nested.record(shared <= Q::one() + &eps, || format!("x(δ(A)∩δ(B)) = {} for cuts {i},{j}", num::format(&shared)));
                nested.record(within >= Q::one() - &eps * &half, || format!("x(E(A,B∖A)) = {} for cuts {i},{j}", num::format(&within)));
            }
        }
    }

    let mut members = if atlas.eta <= q(2, 5) { Check::new("atom-unions-are-members") } else { Check::diagnostic("atom-unions-are-members") };
    let mut characterization = Check::new("both-sides-characterization");
    let mut distinct = Check::new("distinct-projections");
    let mut contiguous = Check::new("contiguous-proper-projections");
    let mut crossing = Check::new("crossing-projections-cross");
    let mut cycle_len = Check::diagnostic("k-cycle-length");
    let mut verified = Check::diagnostic("outside-atoms-cycle-free");
    for c in atlas.components.iter().filter(|c| !c.is_singleton()) {
        let p = c.polygon.as_ref().ok_or_else(|| Error::StructureViolation("unarranged component".into()))?;
        let t = c.atoms.len();
        for (id, cut) in cuts.iter().enumerate() {
            if let Some(m) = c.atom_mask(cut.side) {
                let k = bits::len(m);
                if k > 1 && k + 1 < t {
                    members.record(c.local(id).is_some(), || format!("cut {id} is a union of {k} atoms but not a member"));
                }
            }
        }
        let proj: Vec<u64> = c.cut_atoms.iter().map(|&s| p.positions(s)).collect();
        for (li, &pr) in proj.iter().enumerate() {
            contiguous.record(
                bits::len(pr) >= 2 && circular_interval(pr, p.m()).is_some(),
                || format!("cut {} projects to {:#b}", c.cuts[li], pr),
            );
            distinct.record(!proj[..li].contains(&pr), || format!("cut {} repeats a projection", c.cuts[li]));
            for &lj in c.adjacency[li].iter().filter(|&&lj| lj < li) {
                let ok = bits::crosses(pr, proj[lj]) && circular_interval(pr | proj[lj], p.m()).is_some();
                crossing.record(ok, || format!("cuts {} and {} cross but their projections do not", c.cuts[li], c.cuts[lj]));
            }
        }
        for (li, &id) in c.cuts.iter().enumerate() {
            let s = cuts[id].side;
            let crossers: Vec<VSet> = c.adjacency[li].iter().map(|&lj| cuts[c.cuts[lj]].side & !s).collect();
            let witness = crossers.iter().enumerate().any(|(i, &x)| crossers[i + 1..].iter().any(|&y| x & y == 0));
            let both = atlas.tags[id] == Tag::CrossedBothSides;
            characterization.record(witness == both, || format!("cut {id}: tag {:?}, disjoint crossers {witness}", atlas.tags[id]));
        }
        for w in &p.witnesses {
            let bound = num::to_f64(&atlas.eta) * w.cuts.len() as f64;
            cycle_len.record(bound >= 2.0 - 1e-12, || format!("{}-cycle at eta {}", w.cuts.len(), num::format(&atlas.eta)));
        }
        verified.record(p.outside_verified, || "outside atom search ran out of budget".into());
    }

    let mut one_polygon = Check::new("edge-in-one-polygon");
    for (ei, e) in g.edges.iter().enumerate() {
        let count = atlas
            .components
            .iter()
            .filter(|c| !c.is_singleton())
            .filter(|c| {
                let (a, b) = (c.atom_of(e.u), c.atom_of(e.v));
                a != b && a != 0 && b != 0
            })
            .count();
        one_polygon.record(count <= 1, || format!("edge {ei} splits non-root atoms of {count} polygons"));
    }

    let mut reduced = Check::new("one-side-polygons-all-outside");
    for c in atlas.reduced.iter().filter(|c| !c.is_singleton()) {
        let ok = c.polygon.as_ref().is_some_and(|p| p.inside.is_empty() && p.order[0] == 0);
        reduced.record(ok, || format!("one-side component with cuts {:?} has inside atoms", c.cuts));
    }

    let mut chains = if atlas.eta <= q(1, 10) { Check::new("chain-order") } else { Check::diagnostic("chain-order") };
    for ci in 0..atlas.components.len() {
        if atlas.components[ci].is_singleton() {
            continue;
        }
        for s in almost_diagonal_cuts(atlas, ci, pool2) {
            for side in [Side::Left, Side::Right] {
                let r = chain_decomposition(atlas, ci, s, side);
                chains.record(r.is_ok(), || r.err().map(|e| e.to_string()).unwrap_or_default());
            }
        }
    }

    Ok(vec![
        uncross,
        disjoint,
        corners,
        nested,
        members,
        characterization,
        distinct,
        contiguous,
        crossing,
        one_polygon,
        reduced,
        chains,
        cycle_len,
        verified,
    ])
}

#[derive(Clone, Debug, Serialize)]
pub struct FSet {
    pub kind: &'static str,
    pub component: Option<usize>,
    pub edges: Vec<usize>,
    #[serde(with = "crate::num::qser")]
    pub mass: Q,
}

#[derive(Clone, Debug, Serialize)]
pub struct UncrossingReport {
    pub sets: Vec<FSet>,
    /// Largest number of reported sets sharing one edge.
    pub max_edge_count: usize,
}

impl UncrossingReport {
    pub fn min_mass(&self) -> Option<&Q> {
        self.sets.iter().map(|f| &f.mass).min()
    }
}

/// Candidate F-sets: edges between consecutive outside atoms of every
/// polygon, `δ(A) ∖ δ(B)` for every uncrossed cut `A` and the smallest
/// uncrossed cut `B ⊋ A`, and every increase set of the both-sides machinery.
pub fn uncrossing_report(atlas: &CutAtlas, g: &SupportGraph) -> Result<UncrossingReport> {
    let mut sets = Vec::new();
    for (ci, c) in atlas.components.iter().enumerate() {
        let Some(p) = &c.polygon else { continue };
        for i in 0..p.m() {
            let (a, b) = (c.atoms[p.atom_at(i)], c.atoms[p.atom_at(i + 1)]);
            let edges = g.edges_between(a, b);
            sets.push(FSet { kind: "adjacent-atoms", component: Some(ci), mass: g.mass(&edges), edges });
        }
    }
    let uncrossed: Vec<usize> = (0..atlas.cuts.len()).filter(|&i| atlas.tags[i] == Tag::Uncrossed).collect();
    for &i in &uncrossed {
        let a = atlas.cuts[i].side;
        let parent = uncrossed
            .iter()
            .map(|&j| atlas.cuts[j].side)
            .filter(|&b| b != a && bits::subset(a, b))
            .min_by_key(|&b| (bits::len(b), b));
        if let Some(b) = parent {
            let db = slack::delta(g, b);
            let edges: Vec<usize> = slack::delta(g, a).into_iter().filter(|e| db.binary_search(e).is_err()).collect();
            sets.push(FSet { kind: "laminar-difference", component: None, mass: g.mass(&edges), edges });
        }
    }
    for ctx in slack::build_all_point_contexts(atlas, g)? {
        for side in [&ctx.left, &ctx.right].into_iter().flatten() {
            sets.push(FSet {
                kind: "increase",
                component: Some(ctx.component),
                edges: side.increase.clone(),
                mass: side.increase_mass.clone(),
            });
        }
    }
    let mut count = vec![0usize; g.edges.len()];
    for f in &sets {
        for &e in &f.edges {
            count[e] += 1;
        }
    }
    let max_edge_count = count.into_iter().max().unwrap_or(0);
    Ok(UncrossingReport { sets, max_edge_count })
}
