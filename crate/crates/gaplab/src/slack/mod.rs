//! The slack vector `s*` for one sampled tree and the audit of the O-join
//! guarantees it is meant to provide.
//!
//! Amounts are kept as half-units per edge: `s*_e = α·x_e·h_e/2`. The
//! both-sides rule contributes `h ∈ {0, 2}`, the one-side and triangle rules
//! `h ∈ {0, 1, 2}`, and the two contributions add.

mod contexts;
mod hierarchy;

use num_traits::{One, Signed};
use serde::Serialize;

use crate::atlas::CutAtlas;
use crate::bits::{self, VSet};
use crate::check::Check;
use crate::instance::SupportGraph;
use crate::maxent::TreeSample;
use crate::num::{self, qi, Q};
use crate::ojoin::{self, OddSet, OJoinVector};
use crate::{Error, Result};

pub use contexts::{
    analyze_component, build_all_point_contexts, build_point_contexts, ComponentContexts, CutPartition, PointContext,
    SideContext,
};
pub use hierarchy::{
    build_hierarchy, build_hierarchy_unchecked, map_items, AbcPartition, CutKind, Hierarchy, HierarchyNode,
    OneSidePolygon, Triangle,
};

/// Sorted ids of the edges crossing `s`.
pub fn delta(g: &SupportGraph, s: VSet) -> Vec<usize> {
    g.edges
        .iter()
        .enumerate()
        .filter(|(_, e)| bits::contains(s, e.u) != bits::contains(s, e.v))
        .map(|(i, _)| i)
        .collect()
}

/// Sorted ids of `E(a, b)`.
pub fn between(g: &SupportGraph, a: VSet, b: VSet) -> Vec<usize> {
    g.edges_between(a, b)
}

pub(crate) fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut v: Vec<usize> = a.iter().chain(b).copied().collect();
    v.sort_unstable();
    v.dedup();
    v
}

pub(crate) fn intersect(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().copied().filter(|e| b.binary_search(e).is_ok()).collect()
}

pub(crate) fn difference(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().copied().filter(|e| b.binary_search(e).is_err()).collect()
}

pub(crate) fn is_subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|e| b.binary_search(e).is_ok())
}

/// `β = η / (4 + 2η)`, the largest value with `(1/2 − β)(2 + η) ≥ 1`.
pub fn default_beta(eta: &Q) -> Q {
    eta / (qi(4) + qi(2) * eta)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaMode {
    /// `α = 2β`.
    TwiceBeta,
    /// `α = (2 + η)/(1 − 7η) · β`, enough for the near-cycle constraints.
    Hierarchy,
}

pub fn alpha_for(mode: AlphaMode, eta: &Q, beta: &Q) -> Result<Q> {
    match mode {
        AlphaMode::TwiceBeta => Ok(qi(2) * beta),
        AlphaMode::Hierarchy => {
            let d = Q::one() - qi(7) * eta;
            if !d.is_positive() {
                return Err(Error::BadParams("hierarchy alpha needs eta < 1/7".into()));
            }
            Ok((qi(2) + eta) / d * beta)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    /// `B→(p)`, built from `L(p)`.
    RightBad,
    /// `B←(p)`, built from `R(p)`.
    LeftBad,
    /// Some item mapped to a one-side edge group is odd or unhappy.
    GroupFired,
    Triangle,
}

#[derive(Clone, Debug, Serialize)]
pub struct FiredEvent {
    pub kind: EventKind,
    pub component: usize,
    /// Polygon point, group index, or hierarchy node.
    pub at: usize,
    /// Half-units placed on every edge of `edges`.
    pub halves: u8,
    pub edges: Vec<usize>,
}

/// `s*` for one tree in half-units.
#[derive(Clone, Debug, Serialize)]
pub struct SlackAssignment {
    pub draw: u64,
    pub both: Vec<u8>,
    pub one: Vec<u8>,
    pub events: Vec<FiredEvent>,
}

impl SlackAssignment {
    pub fn halves(&self, e: usize) -> u8 {
        self.both[e] + self.one[e]
    }

    /// `s*_e` as a double.
    pub fn value(&self, g: &SupportGraph, alpha: &Q, e: usize) -> f64 {
        num::to_f64(alpha) * num::to_f64(&g.edges[e].x) * f64::from(self.halves(e)) / 2.0
    }

    pub fn vector(&self, g: &SupportGraph, alpha: &Q) -> Vec<f64> {
        (0..g.edges.len()).map(|e| self.value(g, alpha, e)).collect()
    }
}

/// Everything about `G` the slack rules need, built once per instance.
#[derive(Clone, Debug)]
pub struct SlackEngine {
    pub eta: Q,
    pub beta: Q,
    pub alpha: Q,
    pub mode: AlphaMode,
    pub contexts: Vec<ComponentContexts>,
    pub hierarchy: Hierarchy,
    pub checks: Vec<Check>,
    num: Vec<i128>,
    den: i128,
}

impl SlackEngine {
    /// Strict build: any failed structural check is an error.
    pub fn build(atlas: &CutAtlas, g: &SupportGraph, mode: AlphaMode) -> Result<SlackEngine> {
        let e = Self::build_unchecked(atlas, g, mode)?;
        if let Some(bad) = e.checks.iter().find(|c| c.asserted && !c.passed()) {
            return Err(Error::StructureViolation(format!("{}: {}", bad.name, bad.failures.join("; "))));
        }
        Ok(e)
    }

    pub fn build_unchecked(atlas: &CutAtlas, g: &SupportGraph, mode: AlphaMode) -> Result<SlackEngine> {
        let beta = default_beta(&atlas.eta);
        let alpha = alpha_for(mode, &atlas.eta, &beta)?;
        let mut contexts = Vec::new();
        for ci in 0..atlas.components.len() {
            if atlas.components[ci].polygon.is_some() {
                contexts.push(analyze_component(atlas, g, ci)?);
            }
        }
        let hierarchy = build_hierarchy_unchecked(atlas, g)?;
        let mut checks: Vec<Check> = Vec::new();
        for cc in &contexts {
            for c in &cc.checks {
                match checks.iter_mut().find(|k| k.name == c.name) {
                    Some(k) => k.merge(c),
                    None => checks.push(c.clone()),
                }
            }
        }
        let mut multiplicity = Check::new("edge-in-at-most-four-events");
        let mut hits = vec![0usize; g.edges.len()];
        for pc in contexts.iter().flat_map(|c| &c.points) {
            for s in [&pc.left, &pc.right].into_iter().flatten() {
                for &e in &s.increase {
                    hits[e] += 1;
                }
            }
        }
        for (e, &h) in hits.iter().enumerate() {
            multiplicity.record(h <= 4, || format!("edge {e} is raised by {h} events"));
        }
        checks.push(multiplicity);
        checks.extend(hierarchy.checks.iter().cloned());
        let sc = g.scaled()?;
        Ok(SlackEngine { eta: atlas.eta.clone(), beta, alpha, mode, contexts, hierarchy, checks, num: sc.num, den: sc.den })
    }

    pub fn points(&self) -> impl Iterator<Item = &PointContext> {
        self.contexts.iter().flat_map(|c| &c.points)
    }

    /// `s*` for one tree.
    pub fn assign(&self, tree: &TreeSample, g: &SupportGraph) -> SlackAssignment {
        let in_tree = membership(tree, g);
        let ne = g.edges.len();
        let (mut both, mut one) = (vec![0u8; ne], vec![0u8; ne]);
        let mut events = Vec::new();
        for pc in self.points() {
            for (side, kind) in [(&pc.left, EventKind::RightBad), (&pc.right, EventKind::LeftBad)] {
                let Some(s) = side else { continue };
                if s.fires(&in_tree) {
                    for &e in &s.increase {
                        both[e] = 2;
                    }
                    events.push(FiredEvent { kind, component: pc.component, at: pc.point, halves: 2, edges: s.increase.clone() });
                }
            }
        }
        for p in &self.hierarchy.polygons {
            for (gi, (level, _)) in p.group_levels(&in_tree).into_iter().enumerate() {
                if level == 0 {
                    continue;
                }
                for &e in &p.groups[gi] {
                    one[e] = one[e].max(level);
                }
                events.push(FiredEvent { kind: EventKind::GroupFired, component: p.component, at: gi, halves: level, edges: p.groups[gi].clone() });
            }
        }
        for t in &self.hierarchy.triangles {
            if t.fires(&in_tree) {
                for &e in &t.middle {
                    one[e] = 2;
                }
                events.push(FiredEvent { kind: EventKind::Triangle, component: usize::MAX, at: t.node, halves: 2, edges: t.middle.clone() });
            }
        }
        SlackAssignment { draw: tree.draw, both, one, events }
    }

    /// `Σ_{e∈F} x_e·h_e/2`, exact; `s*(F) = α` times this.
    pub fn units(&self, edges: &[usize], halves: impl Fn(usize) -> u8) -> Q {
        let raw: i128 = edges.iter().map(|&e| self.num[e] * i128::from(halves(e))).sum();
        Q::new(raw.into(), (2 * self.den).into())
    }

    /// Checks every guarantee for one tree. The full O-join test of
    /// `x/2 − βx + s*` runs only when `ojoin_check` is set and is reported,
    /// never asserted.
    pub fn audit(&self, atlas: &CutAtlas, g: &SupportGraph, tree: &TreeSample, ojoin_check: bool) -> Result<TreeAudit> {
        let a = self.assign(tree, g);
        let in_tree = membership(tree, g);
        let half = Q::new(1.into(), 2.into());
        let case1 = (&half - &self.beta) * (qi(2) + &self.eta) >= Q::one();
        let nonneg = a.both.iter().zip(&a.one).all(|(b, o)| b + o <= 4);
        let floor = Q::one() - &self.eta;
        let mut odd_both = Vec::new();
        let mut case3_failures = Vec::new();
        for id in atlas.both_sides() {
            let d = delta(g, atlas.cuts[id].side);
            if hierarchy::count(&d, &in_tree) % 2 == 1 {
                odd_both.push(id);
                if self.units(&d, |e| a.both[e]) < floor {
                    case3_failures.push(id);
                }
            }
        }
        let one_side_failures = self.one_side_failures(g, &a, &in_tree);
        let ojoin_ok = if ojoin_check {
            let beta = num::to_f64(&self.beta);
            let shift: Vec<f64> = g.xf().iter().enumerate().map(|(e, x)| -beta * x + a.value(g, &self.alpha, e)).collect();
            let y = OJoinVector::half_x_plus(g, &shift);
            let odd = OddSet { vertices: bits::members(tree.odd).collect(), draw: tree.draw };
            Some(ojoin::verify_ojoin_feasible(&y, &odd, g)?.feasible)
        } else {
            None
        };
        Ok(TreeAudit { draw: tree.draw, case1, nonneg, odd_both, case3_failures, one_side_failures, ojoin_ok, assignment: a })
    }

    fn one_side_failures(&self, g: &SupportGraph, a: &SlackAssignment, in_tree: &[bool]) -> Vec<String> {
        let floor = Q::one() - qi(7) * &self.eta;
        let mut out = Vec::new();
        for p in &self.hierarchy.polygons {
            let (lh, rh) = (p.left_happy(in_tree), p.right_happy(in_tree));
            for (k, it) in p.items.iter().enumerate() {
                if !p.odd(k, in_tree) {
                    continue;
                }
                let (l, r) = (p.is_leftmost(it), p.is_rightmost(it));
                let owed = (!l && !r) || (l && lh) || (r && rh);
                if owed && self.units(p.item_delta(k), |e| a.one[e]) < floor {
                    out.push(format!("component {} item [{}, {}]", p.component, it.lo, it.hi));
                }
            }
        }
        for t in &self.hierarchy.triangles {
            for (s, happy) in [(t.x, t.left_happy(in_tree)), (t.y, t.right_happy(in_tree))] {
                let d = delta(g, s);
                if happy && hierarchy::count(&d, in_tree) % 2 == 1 && self.units(&d, |e| a.one[e]) < floor {
                    out.push(format!("triangle node {} child {:?}", t.node, bits::members(s).collect::<Vec<_>>()));
                }
            }
        }
        out
    }
}

fn membership(tree: &TreeSample, g: &SupportGraph) -> Vec<bool> {
    let mut v = vec![false; g.edges.len()];
    for &e in &tree.edges {
        v[e] = true;
    }
    v
}

#[derive(Clone, Debug, Serialize)]
pub struct TreeAudit {
    pub draw: u64,
    /// `(1/2 − β)(2 + η) ≥ 1`: sides outside `N_η` are covered by `x/2 − βx`.
    pub case1: bool,
    pub nonneg: bool,
    /// Odd both-sides cuts of this tree.
    pub odd_both: Vec<usize>,
    /// Odd both-sides cuts with `s*(δ(S)) < α(1 − η)`.
    pub case3_failures: Vec<usize>,
    /// One-side and triangle guarantees that failed.
    pub one_side_failures: Vec<String>,
    /// Full O-join feasibility of `x/2 − βx + s*`, when requested.
    pub ojoin_ok: Option<bool>,
    pub assignment: SlackAssignment,
}

impl TreeAudit {
    pub fn asserted_ok(&self) -> bool {
        self.case1 && self.nonneg && self.case3_failures.is_empty() && self.one_side_failures.is_empty()
    }
}

/// Both-sides `s*` lands only on edges joining two distinct non-root atoms
/// of one component.
pub fn support_is_interior(atlas: &CutAtlas, g: &SupportGraph, a: &SlackAssignment) -> bool {
    (0..g.edges.len()).filter(|&e| a.both[e] > 0).all(|e| {
        let (u, v) = (g.edges[e].u, g.edges[e].v);
        atlas.components.iter().filter(|c| !c.is_singleton()).any(|c| {
            let (au, av) = (c.atom_of(u), c.atom_of(v));
            au != 0 && av != 0 && au != av
        })
    })
}
