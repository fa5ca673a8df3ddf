//! Synthetic support graphs with a known near-min-cut structure.

use std::str::FromStr;

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::atlas::CutAtlas;
use crate::bits;
use crate::instance::{SupportEdge, SupportGraph};
use crate::num::{q, qi, Q};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixtureKind {
    Cycle,
    WheelFig5,
    Laminar,
    OneSidePolygon,
    LongEdgeFig6,
    EtaCombFig8,
}

impl FixtureKind {
    pub const ALL: [FixtureKind; 6] = [
        FixtureKind::Cycle,
        FixtureKind::WheelFig5,
        FixtureKind::Laminar,
        FixtureKind::OneSidePolygon,
        FixtureKind::LongEdgeFig6,
        FixtureKind::EtaCombFig8,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FixtureKind::Cycle => "cycle",
            FixtureKind::WheelFig5 => "wheel-fig5",
            FixtureKind::Laminar => "laminar",
            FixtureKind::OneSidePolygon => "one-side-polygon",
            FixtureKind::LongEdgeFig6 => "long-edge-fig6",
            FixtureKind::EtaCombFig8 => "eta-comb-fig8",
        }
    }
}

impl FromStr for FixtureKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<FixtureKind> {
        FixtureKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::BadParams(format!("unknown fixture kind {s:?}")))
    }
}

/// Size knob per kind; `None` means the default. `eta` overrides the
/// fixture's recommended threshold.
#[derive(Clone, Debug, Default)]
pub struct FixtureParams {
    pub size: Option<usize>,
    pub eta: Option<Q>,
}

/// The atlas shape a fixture is built to produce.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Signature {
    /// Atom count of every non-singleton crossing component.
    pub atoms: Vec<usize>,
    /// Inside atoms of each of those components, as sorted vertex lists.
    pub inside: Vec<Vec<Vec<usize>>>,
    /// Atom count of every non-singleton component of the one-side family.
    pub one_side_atoms: Vec<usize>,
}

impl Signature {
    pub fn of(atlas: &CutAtlas) -> Signature {
        let big: Vec<_> = atlas.components.iter().filter(|c| !c.is_singleton()).collect();
        Signature {
            atoms: big.iter().map(|c| c.atoms.len()).collect(),
            inside: big
                .iter()
                .map(|c| {
                    let p = c.polygon.as_ref().expect("arranged");
                    p.inside.iter().map(|&a| bits::members(c.atoms[a]).collect()).collect()
                })
                .collect(),
            one_side_atoms: atlas.reduced.iter().filter(|c| !c.is_singleton()).map(|c| c.atoms.len()).collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Fixture {
    pub kind: FixtureKind,
    pub graph: SupportGraph,
    pub eta: Q,
    /// Expected atlas shape at `eta`, when the kind has a fixed one.
    pub golden: Option<Signature>,
}

fn edge(u: usize, v: usize, x: Q) -> SupportEdge {
    SupportEdge { u, v, x, cost: qi(1) }
}

/// Splits `hub` of a graph on `0..n`: edges listed in `to_v0` move to the
/// new vertex `n`, every other hub edge is halved between the two copies.
fn split_hub(name: &str, n: usize, edges: Vec<SupportEdge>, hub: usize, to_v0: &[usize]) -> Result<SupportGraph> {
    let v0 = n;
    let mut out = Vec::new();
    for (i, e) in edges.into_iter().enumerate() {
        if e.u != hub && e.v != hub {
            out.push(e);
            continue;
        }
        let other = if e.u == hub { e.v } else { e.u };
        if to_v0.contains(&i) {
            out.push(SupportEdge { u: other, v: v0, ..e });
        } else if to_v0.is_empty() {
            let half = &e.x / qi(2);
            out.push(SupportEdge { u: other, v: hub, x: half.clone(), cost: e.cost.clone() });
            out.push(SupportEdge { u: other, v: v0, x: half, cost: e.cost });
        } else {
            out.push(e);
        }
    }
    out.push(SupportEdge { u: hub, v: v0, x: qi(1), cost: Q::zero() });
    let e0 = out.len() - 1;
    let mut origin: Vec<usize> = (0..n).collect();
    origin.push(hub);
    SupportGraph::new(name, n + 1, out, e0, origin)
}

/// `x ≡ 1` on the cycle `0..n`; vertex 0 is split with its edge to `n−1`
/// moving to `v₀`.
pub fn cycle(n: usize) -> Result<SupportGraph> {
    if n < 3 {
        return Err(Error::BadParams("cycle needs n >= 3".into()));
    }
    let edges: Vec<SupportEdge> = (0..n).map(|i| edge(i, (i + 1) % n, qi(1))).collect();
    split_hub("cycle", n, edges, 0, &[n - 1])
}

/// Hub 0 joined to rim `1..=r` by spokes `2/r`, rim edges `1 − 1/r`. Rim
/// singletons are min cuts, adjacent rim pairs have value `2 + 2/r` and
/// triples `2 + 4/r`, so at `η = 3/r` the pairs form an `r`-cycle around the
/// hub, which is the only inside atom. Rim vertex 1 is split into `u₀,v₀`.
pub fn wheel(r: usize) -> Result<SupportGraph> {
    if r < 4 {
        return Err(Error::BadParams("wheel needs at least 4 rim vertices".into()));
    }
    let ri = r as i64;
    let mut edges = Vec::new();
    for i in 1..=r {
        edges.push(edge(0, i, q(2, ri)));
    }
    for i in 1..=r {
        edges.push(edge(i, i % r + 1, q(ri - 1, ri)));
    }
    split_hub("wheel-fig5", r + 1, edges, 1, &[])
}

/// Triangular prism with `x ≡ 2/3`, hub 5 split: the near-min cuts are the
/// singletons, one triangle and `V∖{u₀,v₀}`, all pairwise uncrossed.
pub fn laminar() -> Result<SupportGraph> {
    let w = q(2, 3);
    let mut edges = Vec::new();
    for (a, b) in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (0, 3), (1, 4), (2, 5)] {
        edges.push(edge(a, b, w.clone()));
    }
    split_hub("laminar", 6, edges, 5, &[])
}

/// Prism `C_m × K₂` with rungs 1 and rails 1/2; rung 0 is `e₀`. Blocks of
/// consecutive rungs are min cuts; those touching an end of the rung order
/// are crossed on one side only and form an `m`-gon whose root atom is the
/// rung `e₀`.
pub fn ladder(m: usize) -> Result<SupportGraph> {
    if m < 4 {
        return Err(Error::BadParams("ladder needs at least 4 rungs".into()));
    }
    let mut edges = vec![SupportEdge { u: 0, v: m, x: qi(1), cost: Q::zero() }];
    for i in 1..m {
        edges.push(edge(i, m + i, qi(1)));
    }
    for i in 0..m {
        let j = (i + 1) % m;
        edges.push(edge(i, j, q(1, 2)));
        edges.push(edge(m + i, m + j, q(1, 2)));
    }
    SupportGraph::new("one-side-polygon", 2 * m, edges, 0, (0..2 * m).collect())
}

/// Tour rerouted by `moves` 2-opt exchanges: each `(j, k, w)` moves weight
/// `w` from links `(j, j+1)`, `(k, k+1)` onto chords `(j, k)`, `(j+1, k+1)`.
/// Every move keeps all degrees at exactly 2.
fn rerouted_cycle(name: &str, n: usize, moves: &[(usize, usize, Q)]) -> Result<SupportGraph> {
    let mut link: Vec<Q> = vec![qi(1); n];
    let mut chords: Vec<(usize, usize, Q)> = Vec::new();
    for (j, k, w) in moves {
        if !(j + 1 < *k && k + 1 < n) {
            return Err(Error::BadParams(format!("2-opt move ({j}, {k}) out of range")));
        }
        link[*j] -= w;
        link[*k] -= w;
        chords.push((*j, *k, w.clone()));
        chords.push((j + 1, k + 1, w.clone()));
    }
    if link.iter().any(|w| w.is_negative()) {
        return Err(Error::BadParams("2-opt weights overdraw a link".into()));
    }
    let mut edges: Vec<SupportEdge> = Vec::new();
    for (i, w) in link.iter().enumerate().filter(|(_, w)| w.is_positive()) {
        edges.push(edge(i, (i + 1) % n, w.clone()));
    }
    let last = edges.len() - 1;
    for (a, b, w) in chords {
        edges.push(edge(a, b, w));
    }
    split_hub(name, n, edges, 0, &[last])
}

/// One 2-opt move of weight `t` on the cycle `0..m`.
pub fn long_edge(m: usize, j: usize, k: usize, t: Q) -> Result<SupportGraph> {
    rerouted_cycle("long-edge-fig6", m, &[(j, k, t)])
}

/// `k` moves of weight `1/k` that all leave from the link `(1, 2)` and fan
/// out over the next `k` links: afterwards `x(E(1, 2)) = 0` and every pair of
/// consecutive later vertices has cut value `2 + 2/k`.
pub fn eta_comb(k: usize) -> Result<SupportGraph> {
    let p = 1;
    let n = p + k + 3;
    let w = q(1, k as i64);
    let moves: Vec<(usize, usize, Q)> = (1..=k).map(|j| (p, p + 1 + j, w.clone())).collect();
    rerouted_cycle("eta-comb-fig8", n, &moves)
}

pub fn generate_fixture(kind: FixtureKind, params: &FixtureParams) -> Result<Fixture> {
    let (graph, eta, golden) = match kind {
        FixtureKind::Cycle => {
            let n = params.size.unwrap_or(6);
            let g = cycle(n)?;
            let golden = Signature { atoms: vec![n], inside: vec![vec![]], one_side_atoms: vec![n] };
            (g, q(1, 20), Some(golden))
        }
        FixtureKind::WheelFig5 => {
            let r = params.size.unwrap_or(8);
            let g = wheel(r)?;
            // The one-side family is the two rim pairs next to the root and
            // their two complements: atoms root, 2, 3, r−1, r and the rest.
            let golden = (r >= 6).then(|| Signature { atoms: vec![r + 1], inside: vec![vec![vec![0]]], one_side_atoms: vec![6] });
            (g, q(3, r as i64), golden)
        }
        FixtureKind::Laminar => {
            let golden = Signature { atoms: vec![], inside: vec![], one_side_atoms: vec![] };
            (laminar()?, q(1, 20), Some(golden))
        }
        FixtureKind::OneSidePolygon => {
            let m = params.size.unwrap_or(5);
            let golden = Signature { atoms: vec![m], inside: vec![vec![]], one_side_atoms: vec![m] };
            (ladder(m)?, q(1, 20), Some(golden))
        }
        FixtureKind::LongEdgeFig6 => {
            let m = params.size.unwrap_or(10);
            let golden = Signature { atoms: vec![m], inside: vec![vec![]], one_side_atoms: vec![m] };
            (long_edge(m, 2, m - 4, q(1, 60))?, q(1, 20), Some(golden))
        }
        FixtureKind::EtaCombFig8 => {
            let k = params.size.unwrap_or(21);
            // The reduced polygon size was measured at the default size only.
            let golden = params.size.is_none().then(|| Signature { atoms: vec![k + 4], inside: vec![vec![]], one_side_atoms: vec![5] });
            (eta_comb(k)?, q(1, 10), golden)
        }
    };
    let golden = if params.eta.is_some() { None } else { golden };
    Ok(Fixture { kind, graph, eta: params.eta.clone().unwrap_or(eta), golden })
}
