//! Per-point structure of cuts crossed on both sides.
//!
//! Polygon point `i` sits between positions `i` and `i+1`. `L(i)` is the
//! largest both-sides cut whose rightmost outside atom is at position `i`,
//! `R(i)` the largest one whose leftmost outside atom is at `i+1`.

use std::cmp::Reverse;

use num_traits::One;
use serde::Serialize;

use super::{between, delta, difference, intersect, is_subset, union};
use crate::atlas::{AMask, Component, CutAtlas, Polygon, Tag};
use crate::bits::{self, VSet};
use crate::check::Check;
use crate::instance::SupportGraph;
use crate::num::Q;
use crate::{Error, Result};

/// `δ(S)` split into edges explained by `S_L`, by `S_R`, and the rest.
#[derive(Clone, Debug, Serialize)]
pub struct CutPartition {
    pub cut: usize,
    /// `S_L`, atlas id.
    pub left_partner: usize,
    /// `S_R`, atlas id.
    pub right_partner: usize,
    /// `E←(S) = E(S∩S_L, S_L∖S)`.
    pub toward_left: Vec<usize>,
    /// `E→(S) = E(S∩S_R, S_R∖S)`.
    pub toward_right: Vec<usize>,
    /// `E°(S)`.
    pub residue: Vec<usize>,
}

/// One side of a polygon point: `L(p)` with `L_R`, `L^{∩R}`, `L*`, or the
/// mirror image for `R(p)`.
#[derive(Clone, Debug, Serialize)]
pub struct SideContext {
    pub cut: usize,
    /// `L(p)_R` resp. `R(p)_L`.
    pub partner: usize,
    /// `L(p) ∩ L(p)_R` resp. `R(p) ∩ R(p)_L`.
    pub inner: VSet,
    /// `L*(p)` resp. `R*(p)`; `None` when nothing crosses `inner` on that side.
    pub star: Option<usize>,
    /// `E→(L(p))` resp. `E←(R(p))`.
    pub toward: Vec<usize>,
    /// `E°` of the cut.
    pub residue: Vec<usize>,
    /// Edges whose slack rises when the event fires.
    pub increase: Vec<usize>,
    #[serde(with = "crate::num::qser")]
    pub increase_mass: Q,
}

impl SideContext {
    /// The bad event: the tree does not use exactly one `toward` edge, or it
    /// uses a residue edge.
    pub fn fires(&self, in_tree: &[bool]) -> bool {
        let t = self.toward.iter().filter(|&&e| in_tree[e]).count();
        t != 1 || self.residue.iter().any(|&e| in_tree[e])
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PointContext {
    pub component: usize,
    pub point: usize,
    /// Built from `L(p)`; its event is `B→(p)`.
    pub left: Option<SideContext>,
    /// Built from `R(p)`; its event is `B←(p)`.
    pub right: Option<SideContext>,
    /// The largest cut by atom count differs from the one by outside-atom
    /// count on some side of this point.
    pub largest_ambiguous: bool,
}

#[derive(Clone, Debug)]
pub struct ComponentContexts {
    pub component: usize,
    pub partitions: Vec<CutPartition>,
    pub points: Vec<PointContext>,
    pub checks: Vec<Check>,
}

struct View<'a> {
    atlas: &'a CutAtlas,
    c: &'a Component,
    p: &'a Polygon,
    g: &'a SupportGraph,
}

impl View<'_> {
    fn side(&self, li: usize) -> VSet {
        self.atlas.cuts[self.c.cuts[li]].side
    }

    fn atoms(&self, li: usize) -> AMask {
        self.c.cut_atoms[li]
    }

    fn is_both(&self, li: usize) -> bool {
        self.atlas.tags[self.c.cuts[li]] == Tag::CrossedBothSides
    }

    /// The crosser of `li` on the given side minimizing the outside
    /// intersection, then atoms, then vertices, then mask.
    fn extreme_crosser(&self, li: usize, left: bool) -> Result<Option<usize>> {
        let mut best: Option<(usize, (usize, usize, usize, VSet))> = None;
        for &lj in &self.c.adjacency[li] {
            if self.p.crosses_on_left(self.atoms(lj), self.atoms(li))? != left {
                continue;
            }
            let key = (
                self.p.outside_count(self.atoms(lj) & self.atoms(li)),
                bits::len(self.atoms(lj)),
                bits::len(self.side(lj)),
                self.side(lj),
            );
            if best.as_ref().map_or(true, |(_, k)| key < *k) {
                best = Some((lj, key));
            }
        }
        Ok(best.map(|(lj, _)| lj))
    }

    /// Member cut crossing the atom set `inner` on the given side that
    /// maximizes the outside intersection, then atom count, then takes the
    /// lexicographically smallest atom list.
    fn star(&self, inner: AMask, left: bool) -> Result<Option<usize>> {
        let iv = self.c.vertices(inner);
        let mut best: Option<(usize, (Reverse<usize>, Reverse<usize>, Vec<usize>))> = None;
        for lj in 0..self.c.cuts.len() {
            if !bits::crosses(self.side(lj), iv) {
                continue;
            }
            if self.p.crosses_on_left(self.atoms(lj), inner)? != left {
                continue;
            }
            let key = (
                Reverse(self.p.outside_count(self.atoms(lj) & inner)),
                Reverse(bits::len(self.atoms(lj))),
                bits::members(self.atoms(lj)).collect::<Vec<_>>(),
            );
            if best.as_ref().map_or(true, |(_, k)| key < *k) {
                best = Some((lj, key));
            }
        }
        Ok(best.map(|(lj, _)| lj))
    }

    /// Largest both-sides member by atoms, then vertices, then smallest mask,
    /// among those accepted by `pick`; also reports whether the maximizer by
    /// outside-atom count differs.
    fn largest(&self, pick: impl Fn(usize) -> bool) -> (Option<usize>, bool) {
        let cands: Vec<usize> = (0..self.c.cuts.len()).filter(|&li| self.is_both(li) && pick(li)).collect();
        let by_atoms = cands.iter().copied().max_by_key(|&li| (bits::len(self.atoms(li)), bits::len(self.side(li)), Reverse(self.side(li))));
        let by_outside = cands.iter().copied().max_by_key(|&li| {
            (self.p.outside_count(self.atoms(li)), bits::len(self.atoms(li)), bits::len(self.side(li)), Reverse(self.side(li)))
        });
        (by_atoms, by_atoms != by_outside)
    }
}

/// Everything derived from one arranged component, with the inline checks.
pub fn analyze_component(atlas: &CutAtlas, g: &SupportGraph, ci: usize) -> Result<ComponentContexts> {
    let c = &atlas.components[ci];
    let Some(p) = &c.polygon else {
        return Ok(ComponentContexts { component: ci, partitions: Vec::new(), points: Vec::new(), checks: Vec::new() });
    };
    let v = View { atlas, c, p, g };
    let k = c.cuts.len();
    let mut partition_of: Vec<Option<CutPartition>> = vec![None; k];
    for li in (0..k).filter(|&li| v.is_both(li)) {
        let sl = v.extreme_crosser(li, true)?.ok_or_else(|| Error::StructureViolation("both-sides cut lacks a left crosser".into()))?;
        let sr = v.extreme_crosser(li, false)?.ok_or_else(|| Error::StructureViolation("both-sides cut lacks a right crosser".into()))?;
        let s = v.side(li);
        let toward_left = between(g, s & v.side(sl), v.side(sl) & !s);
        let toward_right = between(g, s & v.side(sr), v.side(sr) & !s);
        let residue = difference(&delta(g, s), &union(&toward_left, &toward_right));
        partition_of[li] = Some(CutPartition {
            cut: c.cuts[li],
            left_partner: c.cuts[sl],
            right_partner: c.cuts[sr],
            toward_left,
            toward_right,
            residue,
        });
    }
    let local_of = |id: usize| c.local(id).expect("member");
    let m = p.m();
    let mut points = Vec::new();
    for i in 0..m {
        let (l, amb_l) = v.largest(|li| p.intervals[li].1 == i);
        let (r, amb_r) = v.largest(|li| p.intervals[li].0 == (i + 1) % m);
        let mut left = None;
        if let Some(li) = l {
            let part = partition_of[li].as_ref().expect("both-sides");
            let partner = local_of(part.right_partner);
            let inner = v.atoms(li) & v.atoms(partner);
            let star = v.star(inner, true)?;
            let iv = c.vertices(inner);
            let star_side = star.map_or(0, |s| v.side(s));
            let increase = between(g, iv & !star_side, v.side(partner) & !iv);
            left = Some(SideContext {
                cut: c.cuts[li],
                partner: part.right_partner,
                inner: iv,
                star: star.map(|s| c.cuts[s]),
                toward: part.toward_right.clone(),
                residue: part.residue.clone(),
                increase_mass: g.mass(&increase),
                increase,
            });
        }
        let mut right = None;
        if let Some(li) = r {
            let part = partition_of[li].as_ref().expect("both-sides");
            let partner = local_of(part.left_partner);
            let inner = v.atoms(li) & v.atoms(partner);
            let star = v.star(inner, false)?;
            let iv = c.vertices(inner);
            let star_side = star.map_or(0, |s| v.side(s));
            let increase = between(g, iv & !star_side, v.side(partner) & !iv);
            right = Some(SideContext {
                cut: c.cuts[li],
                partner: part.left_partner,
                inner: iv,
                star: star.map(|s| c.cuts[s]),
                toward: part.toward_left.clone(),
                residue: part.residue.clone(),
                increase_mass: g.mass(&increase),
                increase,
            });
        }
        if left.is_some() || right.is_some() {
            points.push(PointContext { component: ci, point: i, left, right, largest_ambiguous: amb_l || amb_r });
        }
    }
    let partitions: Vec<CutPartition> = partition_of.into_iter().flatten().collect();
    let checks = inline_checks(&v, &partitions, &points);
    Ok(ComponentContexts { component: ci, partitions, points, checks })
}

fn inline_checks(v: &View, parts: &[CutPartition], points: &[PointContext]) -> Vec<Check> {
    let (c, p, atlas) = (v.c, v.p, v.atlas);
    let eta = &atlas.eta;
    let iv = |id: usize| p.intervals[c.local(id).expect("member")];

    let mut shared = Check::new("shared-endpoint-partners");
    for (i, a) in parts.iter().enumerate() {
        for b in &parts[i + 1..] {
            if iv(a.cut).1 == iv(b.cut).1 {
                shared.record(a.right_partner == b.right_partner && a.toward_right == b.toward_right, || {
                    format!("cuts {} and {} share a right point but not E→", a.cut, b.cut)
                });
            }
            if iv(a.cut).0 == iv(b.cut).0 {
                shared.record(a.left_partner == b.left_partner && a.toward_left == b.toward_left, || {
                    format!("cuts {} and {} share a left point but not E←", a.cut, b.cut)
                });
            }
        }
    }

    let mut mass = Check::new("increase-set-mass");
    let mut contained = Check::new("increase-within-toward");
    let floor = Q::one() - eta;
    for pc in points {
        for s in [&pc.left, &pc.right].into_iter().flatten() {
            mass.record(s.increase_mass >= floor, || {
                format!("point {} of component {}: increase mass {}", pc.point, pc.component, crate::num::format(&s.increase_mass))
            });
            contained.record(is_subset(&s.increase, &s.toward), || format!("point {}: increase set leaves E→/E←", pc.point));
        }
    }

    let mut residue = Check::new("residue-covered-by-endpoints");
    let m = p.m();
    for part in parts {
        let (lo, hi) = iv(part.cut);
        let lp = points.iter().find(|pc| pc.point == hi).and_then(|pc| pc.left.as_ref());
        let rp = points.iter().find(|pc| pc.point == (lo + m - 1) % m).and_then(|pc| pc.right.as_ref());
        let ok = match (lp, rp) {
            (Some(l), Some(r)) => is_subset(&part.residue, &union(&l.residue, &r.residue)),
            _ => false,
        };
        residue.record(ok, || format!("cut {}: E° not covered by its endpoint cuts", part.cut));
    }

    let mut disjoint = Check::new("left-right-disjoint");
    for a in parts {
        disjoint.record(intersect(&a.toward_left, &a.toward_right).is_empty(), || format!("cut {}: E← meets E→", a.cut));
        for b in parts {
            let (la, lb) = (c.local(a.cut).expect("member"), c.local(b.cut).expect("member"));
            if a.cut == b.cut || !c.adjacency[la].contains(&lb) {
                continue;
            }
            if let Ok(false) = p.crosses_on_left(c.cut_atoms[lb], c.cut_atoms[la]) {
                disjoint.record(intersect(&a.toward_left, &b.toward_right).is_empty(), || {
                    format!("E←({}) meets E→({}) with the latter crossing on the right", a.cut, b.cut)
                });
            }
        }
    }

    let mut once = Check::new("increase-once-per-direction");
    let ne = v.g.edges.len();
    let (mut right_hits, mut left_hits) = (vec![0usize; ne], vec![0usize; ne]);
    for pc in points {
        if let Some(s) = &pc.left {
            for &e in &s.increase {
                right_hits[e] += 1;
            }
        }
        if let Some(s) = &pc.right {
            for &e in &s.increase {
                left_hits[e] += 1;
            }
        }
    }
    for e in 0..ne {
        once.record(right_hits[e] <= 1 && left_hits[e] <= 1, || {
            format!("edge {e} lies in {} right and {} left increase sets", right_hits[e], left_hits[e])
        });
    }
    vec![shared, mass, contained, residue, disjoint, once]
}

/// Point contexts of one component; any failed inline check is an error.
pub fn build_point_contexts(atlas: &CutAtlas, g: &SupportGraph, ci: usize) -> Result<Vec<PointContext>> {
    let cc = analyze_component(atlas, g, ci)?;
    if let Some(bad) = cc.checks.iter().find(|c| !c.passed()) {
        return Err(Error::StructureViolation(format!("{}: {}", bad.name, bad.failures.join("; "))));
    }
    Ok(cc.points)
}

/// Point contexts over every component, strict.
pub fn build_all_point_contexts(atlas: &CutAtlas, g: &SupportGraph) -> Result<Vec<PointContext>> {
    let mut out = Vec::new();
    for ci in 0..atlas.components.len() {
        if !atlas.components[ci].is_singleton() {
            out.extend(build_point_contexts(atlas, g, ci)?);
        }
    }
    Ok(out)
}
