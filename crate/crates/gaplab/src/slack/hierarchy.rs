//! Laminar hierarchy of uncrossed cuts and one-side polygons, the cut-to-
//! group mapping, and the one-side and triangle slack rules.

use num_traits::One;
use serde::Serialize;

use super::{between, delta, difference};
use crate::atlas::{CutAtlas, Relevant, Tag};
use crate::bits::{self, VSet};
use crate::check::Check;
use crate::instance::SupportGraph;
use crate::num::{self, qi, Q};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutKind {
    /// Union of the non-root atoms of a one-side polygon.
    NearCycle,
    /// Exactly two children.
    Triangle,
    Degree,
}

/// `δ(S)` split as `A ∪ B ∪ C` for near-cycle and triangle cuts.
#[derive(Clone, Debug, Serialize)]
pub struct AbcPartition {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub c: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HierarchyNode {
    pub side: VSet,
    pub kind: CutKind,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub partition: Option<AbcPartition>,
    /// Index into the one-side polygon list for near-cycle cuts.
    pub polygon: Option<usize>,
}

/// A one-side polygon with its relevant items mapped to edge groups.
#[derive(Clone, Debug, Serialize)]
pub struct OneSidePolygon {
    /// Index into the atlas's reduced components.
    pub component: usize,
    /// Atom vertex sets by position; position 0 is the root atom.
    pub atoms: Vec<VSet>,
    pub union: VSet,
    /// `groups[i] = E(a_i, a_{i+1})` for `1 ≤ i ≤ m−2`; `groups[0]` is empty.
    pub groups: Vec<Vec<usize>>,
    pub items: Vec<Relevant>,
    /// Group of every unit of every item: one unit for cuts, two for atoms.
    pub mapping: Vec<Vec<usize>>,
    /// `E(a_1, a_0)`, `E(a_{m−1}, a_0)` and the rest of `δ(a_0)`.
    pub abc: AbcPartition,
    item_delta: Vec<Vec<usize>>,
    /// Edges from an extremal item to the non-root atoms outside it.
    item_happy: Vec<Vec<usize>>,
}

impl OneSidePolygon {
    pub fn m(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_leftmost(&self, it: &Relevant) -> bool {
        it.lo == 1
    }

    pub fn is_rightmost(&self, it: &Relevant) -> bool {
        it.hi == self.m() - 1
    }

    fn doubly_mapped(&self, k: usize, group: usize) -> bool {
        self.items[k].is_atom() && self.mapping[k].iter().all(|&g| g == group)
    }

    /// Whether an extremal item uses exactly one edge toward the rest of the
    /// polygon.
    pub fn happy(&self, k: usize, in_tree: &[bool]) -> bool {
        count(&self.item_happy[k], in_tree) == 1
    }

    pub fn odd(&self, k: usize, in_tree: &[bool]) -> bool {
        count(&self.item_delta[k], in_tree) % 2 == 1
    }

    /// `A_T` odd and `C_T = 0`.
    pub fn left_happy(&self, in_tree: &[bool]) -> bool {
        count(&self.abc.a, in_tree) % 2 == 1 && count(&self.abc.c, in_tree) == 0
    }

    pub fn right_happy(&self, in_tree: &[bool]) -> bool {
        count(&self.abc.b, in_tree) % 2 == 1 && count(&self.abc.c, in_tree) == 0
    }

    pub fn item_delta(&self, k: usize) -> &[usize] {
        &self.item_delta[k]
    }

    /// Group firing levels for one tree: 0 quiet, 1 half, 2 full.
    pub fn group_levels(&self, in_tree: &[bool]) -> Vec<(u8, Vec<usize>)> {
        let mut level = vec![(0u8, Vec::new()); self.groups.len()];
        for (k, it) in self.items.iter().enumerate() {
            let fired = if self.is_leftmost(it) || self.is_rightmost(it) {
                !self.happy(k, in_tree)
            } else {
                self.odd(k, in_tree)
            };
            if !fired {
                continue;
            }
            let mut groups = self.mapping[k].clone();
            groups.dedup();
            for g in groups {
                let strong = !it.is_atom() || self.doubly_mapped(k, g);
                let l = &mut level[g];
                l.0 = l.0.max(if strong { 2 } else { 1 });
                l.1.push(k);
            }
        }
        level
    }
}

/// A triangle `S = X ∪ Y` whose three cuts are all `7η`-near min.
#[derive(Clone, Debug, Serialize)]
pub struct Triangle {
    pub node: usize,
    pub x: VSet,
    pub y: VSet,
    /// `E(X, Y)`.
    pub middle: Vec<usize>,
    pub abc: AbcPartition,
    inner: [(VSet, Vec<usize>); 3],
}

impl Triangle {
    /// Some of `T∩E(X)`, `T∩E(Y)`, `T∩E(S)` is not a spanning tree.
    pub fn fires(&self, in_tree: &[bool]) -> bool {
        self.inner.iter().any(|(s, e)| count(e, in_tree) + 1 != bits::len(*s))
    }

    pub fn left_happy(&self, in_tree: &[bool]) -> bool {
        count(&self.abc.a, in_tree) % 2 == 1
    }

    pub fn right_happy(&self, in_tree: &[bool]) -> bool {
        count(&self.abc.b, in_tree) % 2 == 1
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Hierarchy {
    pub nodes: Vec<HierarchyNode>,
    pub root: usize,
    /// Smallest node holding both ends, for edges avoiding `u₀,v₀`.
    pub edge_parent: Vec<Option<usize>>,
    pub polygons: Vec<OneSidePolygon>,
    pub triangles: Vec<Triangle>,
    pub checks: Vec<Check>,
}

pub(crate) fn count(edges: &[usize], in_tree: &[bool]) -> usize {
    edges.iter().filter(|&&e| in_tree[e]).count()
}

fn edges_within(g: &SupportGraph, s: VSet) -> Vec<usize> {
    g.edges.iter().enumerate().filter(|(_, e)| bits::contains(s, e.u) && bits::contains(s, e.v)).map(|(i, _)| i).collect()
}

/// Builds the hierarchy; failed laminarity or mass checks are an error.
pub fn build_hierarchy(atlas: &CutAtlas, g: &SupportGraph) -> Result<Hierarchy> {
    let h = build_hierarchy_unchecked(atlas, g)?;
    if let Some(bad) = h.checks.iter().find(|c| c.asserted && !c.passed()) {
        return Err(Error::HierarchyViolation(format!("{}: {}", bad.name, bad.failures.join("; "))));
    }
    Ok(h)
}

/// Builds the hierarchy and reports its checks without failing on them.
pub fn build_hierarchy_unchecked(atlas: &CutAtlas, g: &SupportGraph) -> Result<Hierarchy> {
    let all = bits::full(g.n);
    let eps = qi(7) * &atlas.eta;
    let mut polygons = Vec::new();
    for (ri, c) in atlas.reduced.iter().enumerate() {
        let (Some(p), Some(items)) = (&c.polygon, &atlas.relevant[ri]) else { continue };
        let atoms: Vec<VSet> = p.order.iter().map(|&a| c.atoms[a]).collect();
        polygons.push(one_side_polygon(g, ri, atoms, items.clone())?);
    }

    let mut sides: Vec<VSet> = Vec::new();
    for c in atlas.reduced.iter().filter(|c| c.is_singleton()) {
        let id = c.cuts[0];
        debug_assert!(atlas.tags[id] != Tag::CrossedBothSides);
        sides.push(atlas.cuts[id].side);
    }
    for p in &polygons {
        sides.extend(&p.atoms[1..]);
        sides.push(p.union);
    }
    sides.push(all & !g.root());
    for v in (0..g.n).filter(|&v| v != g.u0 && v != g.v0) {
        sides.push(bits::bit(v));
    }
    sides.sort_by_key(|&s| (std::cmp::Reverse(bits::len(s)), s));
    sides.dedup();

    let mut laminar = Check::new("hierarchy-laminar");
    for (i, &a) in sides.iter().enumerate() {
        for &b in &sides[i + 1..] {
            laminar.record(!bits::crosses(a, b), || format!("{:?} crosses {:?}", bits::members(a).collect::<Vec<_>>(), bits::members(b).collect::<Vec<_>>()));
        }
    }
    // Sides are sorted by decreasing size, so the last superset seen is the
    // smallest one.
    let parent: Vec<Option<usize>> =
        (0..sides.len()).map(|i| (0..i).rev().find(|&j| bits::subset(sides[i], sides[j]) && sides[i] != sides[j])).collect();
    let mut children = vec![Vec::new(); sides.len()];
    for (i, p) in parent.iter().enumerate() {
        if let Some(p) = p {
            children[*p].push(i);
        }
    }
    let mut union_check = Check::new("hierarchy-children-cover");
    for (i, ch) in children.iter().enumerate() {
        if !ch.is_empty() {
            let u = ch.iter().fold(0, |u, &c| u | sides[c]);
            union_check.record(u == sides[i], || format!("children of {:?} do not cover it", bits::members(sides[i]).collect::<Vec<_>>()));
        }
    }

    let mut nodes = Vec::with_capacity(sides.len());
    let mut triangles = Vec::new();
    let mut tri_near = Check::diagnostic("triangle-cuts-near-min");
    for (i, &s) in sides.iter().enumerate() {
        let poly = polygons.iter().position(|p| p.union == s);
        let (kind, partition) = if let Some(pi) = poly {
            (CutKind::NearCycle, Some(polygons[pi].abc.clone()))
        } else if children[i].len() == 2 {
            let (x, y) = (sides[children[i][0]], sides[children[i][1]]);
            let abc = AbcPartition { a: between(g, x, all & !x & !y), b: between(g, y, all & !y & !x), c: Vec::new() };
            let limit = qi(2) + &eps;
            let near = [x, y, s].iter().all(|&t| g.cut_value(t) <= limit);
            tri_near.record(near, || format!("triangle {:?} has a cut above 2 + 7η", bits::members(s).collect::<Vec<_>>()));
            if near {
                triangles.push(Triangle {
                    node: i,
                    x,
                    y,
                    middle: between(g, x, y),
                    abc: abc.clone(),
                    inner: [(x, edges_within(g, x)), (y, edges_within(g, y)), (s, edges_within(g, s))],
                });
            }
            (CutKind::Triangle, Some(abc))
        } else {
            (CutKind::Degree, None)
        };
        nodes.push(HierarchyNode { side: s, kind, parent: parent[i], children: children[i].clone(), partition, polygon: poly });
    }
    let root = 0;
    let edge_parent = g
        .edges
        .iter()
        .map(|e| {
            if [e.u, e.v].iter().any(|&v| v == g.u0 || v == g.v0) {
                return None;
            }
            (0..sides.len()).rev().find(|&i| bits::contains(sides[i], e.u) && bits::contains(sides[i], e.v))
        })
        .collect();

    let mut checks = vec![laminar, union_check];
    checks.extend(polygon_mass_checks(g, &polygons, &eps));
    checks.push(tri_near);
    Ok(Hierarchy { nodes, root, edge_parent, polygons, triangles, checks })
}

fn one_side_polygon(g: &SupportGraph, component: usize, atoms: Vec<VSet>, items: Vec<Relevant>) -> Result<OneSidePolygon> {
    let m = atoms.len();
    let a0 = atoms[0];
    let union = atoms[1..].iter().fold(0, |u, &a| u | a);
    let groups: Vec<Vec<usize>> =
        (0..m - 1).map(|i| if i == 0 { Vec::new() } else { between(g, atoms[i], atoms[i + 1]) }).collect();
    let a = between(g, atoms[1], a0);
    let b = between(g, atoms[m - 1], a0);
    let c = difference(&difference(&delta(g, a0), &a), &b);
    let mapping = map_items(&items, m)?;
    let item_delta = items.iter().map(|it| delta(g, it.side)).collect();
    let item_happy = items.iter().map(|it| between(g, it.side, union & !it.side)).collect();
    Ok(OneSidePolygon { component, atoms, union, groups, items, mapping, abc: AbcPartition { a, b, c }, item_delta, item_happy })
}

/// Each group `E(a_i, a_{i+1})` after the polygon's near-cycle bounds.
fn polygon_mass_checks(g: &SupportGraph, polygons: &[OneSidePolygon], eps: &Q) -> Vec<Check> {
    let floor = Q::one() - eps;
    let mut ends = Check::new("near-cycle-end-mass");
    let mut adjacent = Check::new("near-cycle-adjacent-mass");
    let mut rest = Check::new("near-cycle-rest-mass");
    let mut atoms_near = Check::new("near-cycle-atoms-near-min");
    for p in polygons {
        let m = p.m();
        let tag = |what: &str, v: &Q| format!("component {}: {what} = {}", p.component, num::format(v));
        let (xa, xb) = (g.mass(&p.abc.a), g.mass(&p.abc.b));
        ends.record(xa >= floor, || tag("x(A)", &xa));
        ends.record(xb >= floor, || tag("x(B)", &xb));
        for i in 1..m - 1 {
            let v = g.mass(&p.groups[i]);
            adjacent.record(v >= floor, || tag(&format!("x(E(a{i}, a{}))", i + 1), &v));
        }
        let middle = p.atoms[2..m - 1].iter().fold(0, |u, &a| u | a);
        let xc = g.mass(&between(g, middle, p.atoms[0]));
        rest.record(xc <= *eps, || tag("x(C)", &xc));
        for (i, &a) in p.atoms.iter().enumerate() {
            let v = g.cut_value(a);
            atoms_near.record(v <= qi(2) + eps, || tag(&format!("x(δ(a{i}))"), &v));
        }
    }
    vec![ends, adjacent, rest, atoms_near]
}

/// Units of every item onto groups with capacity 4: one unit for a cut onto
/// the group left or right of it, two for an atom onto either neighbor.
/// Solved as a max flow by augmenting paths.
pub fn map_items(items: &[Relevant], m: usize) -> Result<Vec<Vec<usize>>> {
    let ng = m.saturating_sub(1);
    let options = |it: &Relevant| -> Vec<usize> {
        let mut o = Vec::new();
        if it.lo >= 2 {
            o.push(it.lo - 1);
        }
        if it.hi + 2 <= m {
            o.push(it.hi);
        }
        o
    };
    let k = items.len();
    // Nodes: source, items, groups, sink.
    let (src, sink) = (0, 1 + k + ng);
    let n = sink + 1;
    let mut cap = vec![vec![0i32; n]; n];
    let mut demand = 0;
    for (i, it) in items.iter().enumerate() {
        let units = if it.is_atom() { 2 } else { 1 };
        demand += units;
        cap[src][1 + i] = units;
        let opts = options(it);
        if opts.is_empty() {
            return Err(Error::MappingUnavailable(format!("item [{}, {}] has no group", it.lo, it.hi)));
        }
        for gi in opts {
            cap[1 + i][1 + k + gi] = units;
        }
    }
    for gi in 1..ng {
        cap[1 + k + gi][sink] = 4;
    }
    let orig = cap.clone();
    let mut flow = 0;
    loop {
        let mut prev = vec![usize::MAX; n];
        prev[src] = src;
        let mut stack = vec![src];
        while let Some(u) = stack.pop() {
            for v in 0..n {
                if cap[u][v] > 0 && prev[v] == usize::MAX {
                    prev[v] = u;
                    stack.push(v);
                }
            }
        }
        if prev[sink] == usize::MAX {
            break;
        }
        let mut v = sink;
        while v != src {
            let u = prev[v];
            cap[u][v] -= 1;
            cap[v][u] += 1;
            v = u;
        }
        flow += 1;
    }
    if flow < demand {
        return Err(Error::MappingUnavailable(format!("only {flow} of {demand} units fit under capacity 4")));
    }
    Ok((0..k)
        .map(|i| {
            let mut out = Vec::new();
            for gi in 1..ng {
                let used = orig[1 + i][1 + k + gi] - cap[1 + i][1 + k + gi];
                out.extend(std::iter::repeat(gi).take(used.max(0) as usize));
            }
            out
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(lo: usize, hi: usize) -> Relevant {
        Relevant { lo, hi, side: 0, cut: None }
    }

    #[test]
    fn extremal_atoms_are_doubly_mapped() {
        let m = 6;
        let items = vec![item(1, 1), item(1, 2), item(2, 4), item(5, 5)];
        let map = map_items(&items, m).unwrap();
        assert_eq!(map[0], vec![1, 1]);
        assert_eq!(map[1], vec![2]);
        assert_eq!(map[3], vec![4, 4]);
        assert!(map[2] == vec![1] || map[2] == vec![4]);
    }

    #[test]
    fn overfull_group_is_unavailable() {
        let m = 4;
        let items = vec![item(1, 1), item(3, 3), item(1, 2), item(1, 2), item(1, 2)];
        assert!(matches!(map_items(&items, m), Err(Error::MappingUnavailable(_))));
    }
}
