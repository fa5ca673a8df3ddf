//! Slack vector guarantees recomputed from raw assignments, and the
//! hierarchy's laminarity and mass bounds recomputed from `x`.

mod common;

use gaplab::atlas::{self, CutAtlas, Tag};
use gaplab::bits::{self, VSet};
use gaplab::check;
use gaplab::harness::{generate_fixture, sample_trees, FixtureKind, FixtureParams};
use gaplab::instance::SupportGraph;
use gaplab::maxent::{self, TreeSample};
use gaplab::num::{self, q, qi, Q};
use gaplab::ojoin::{self, OJoinVector, OddSet};
use gaplab::slack::{self, AlphaMode, SlackEngine};

struct Setup {
    kind: FixtureKind,
    g: SupportGraph,
    atlas: CutAtlas,
    engine: SlackEngine,
    trees: Vec<TreeSample>,
}

fn mode_for(eta: &Q) -> AlphaMode {
    if slack::alpha_for(AlphaMode::Hierarchy, eta, &slack::default_beta(eta)).is_ok() {
        AlphaMode::Hierarchy
    } else {
        AlphaMode::TwiceBeta
    }
}

fn setup(kind: FixtureKind, eta: Option<Q>, samples: usize) -> Setup {
    let f = generate_fixture(kind, &FixtureParams { size: None, eta }).unwrap();
    let atlas = atlas::build_atlas(&f.graph, &f.eta, false).unwrap();
    let engine = SlackEngine::build(&atlas, &f.graph, mode_for(&f.eta)).unwrap();
    let lam = maxent::fit_support(&f.graph, 1e-9).unwrap();
    let trees = sample_trees(&lam, &f.graph, 17, kind.name(), samples).unwrap();
    Setup { kind, g: f.graph, atlas, engine, trees }
}

fn crossing_edges(g: &SupportGraph, s: VSet) -> Vec<usize> {
    (0..g.edges.len()).filter(|&e| bits::contains(s, g.edges[e].u) != bits::contains(s, g.edges[e].v)).collect()
}

fn parity(g: &SupportGraph, t: &TreeSample, s: VSet) -> usize {
    t.edges.iter().filter(|&&e| bits::contains(s, g.edges[e].u) != bits::contains(s, g.edges[e].v)).count() % 2
}

/// `s*(F)/α` from half-units.
fn units(g: &SupportGraph, f: &[usize], halves: &[u8]) -> Q {
    f.iter().map(|&e| &g.edges[e].x * Q::from_integer(halves[e].into()) / qi(2)).sum()
}

#[test]
fn odd_both_sides_cuts_get_alpha_one_minus_eta() {
    let mut odd_seen = 0;
    for kind in FixtureKind::ALL {
        let s = setup(kind, Some(q(1, 20)), 1500);
        let floor = Q::from_integer(1.into()) - &s.engine.eta;
        for t in &s.trees {
            let a = s.engine.assign(t, &s.g);
            for (i, c) in s.atlas.cuts.iter().enumerate() {
                if s.atlas.tags[i] != Tag::CrossedBothSides || parity(&s.g, t, c.side) == 0 {
                    continue;
                }
                odd_seen += 1;
                assert!(units(&s.g, &crossing_edges(&s.g, c.side), &a.both) >= floor, "{:?} draw {}", s.kind, t.draw);
            }
            let audit = s.engine.audit(&s.atlas, &s.g, t, false).unwrap();
            assert!(audit.asserted_ok(), "{:?} draw {}", s.kind, t.draw);
        }
    }
    assert!(odd_seen > 0);
}

#[test]
fn engine_checks_pass_on_every_fixture() {
    for kind in FixtureKind::ALL {
        let f = generate_fixture(kind, &FixtureParams::default()).unwrap();
        let atlas = atlas::build_atlas(&f.graph, &f.eta, false).unwrap();
        let engine = SlackEngine::build_unchecked(&atlas, &f.graph, mode_for(&f.eta)).unwrap();
        let failed: Vec<_> = engine.checks.iter().filter(|c| !c.passed()).map(|c| &c.name).collect();
        assert!(check::all_pass(&engine.checks), "{kind:?}: {failed:?}");
    }
}

#[test]
fn each_edge_is_raised_by_at_most_one_point_per_direction() {
    for kind in FixtureKind::ALL {
        let f = generate_fixture(kind, &FixtureParams::default()).unwrap();
        let atlas = atlas::build_atlas(&f.graph, &f.eta, false).unwrap();
        let engine = SlackEngine::build(&atlas, &f.graph, mode_for(&f.eta)).unwrap();
        let mut left = vec![0; f.graph.edges.len()];
        let mut right = vec![0; f.graph.edges.len()];
        for pc in engine.points() {
            for (s, count) in [(&pc.left, &mut left), (&pc.right, &mut right)] {
                for &e in s.iter().flat_map(|s| &s.increase) {
                    count[e] += 1;
                }
            }
        }
        for e in 0..f.graph.edges.len() {
            assert!(left[e] <= 1 && right[e] <= 1, "{kind:?} edge {e}: {} + {}", left[e], right[e]);
        }
    }
}

#[test]
fn half_x_minus_beta_x_plus_slack_covers_far_and_odd_both_sides_cuts() {
    let mut odd_sides = 0;
    for kind in FixtureKind::ALL {
        let s = setup(kind, Some(q(1, 20)), 200);
        if s.g.n > 12 {
            continue;
        }
        let (beta, alpha, eta) = (num::to_f64(&s.engine.beta), num::to_f64(&s.engine.alpha), num::to_f64(&s.engine.eta));
        let root = s.g.root();
        for t in &s.trees {
            let a = s.engine.assign(t, &s.g);
            let shift: Vec<f64> = s.g.xf().iter().enumerate().map(|(e, x)| -beta * x + a.value(&s.g, &s.engine.alpha, e)).collect();
            let y = OJoinVector::half_x_plus(&s.g, &shift);
            for side in (1u64..bits::full(s.g.n)).filter(|&v| v & root == 0) {
                let x: f64 = num::to_f64(&common::naive_cut(&s.g, side));
                let both = s.atlas.index_of(side).is_some_and(|i| s.atlas.tags[i] == Tag::CrossedBothSides);
                if x >= 2.0 + eta {
                    assert!(y.cut(&s.g, side) >= 1.0 - 1e-9, "{kind:?}");
                } else if both && parity(&s.g, t, side) == 1 {
                    odd_sides += 1;
                    let raised: f64 = crossing_edges(&s.g, side).iter().map(|&e| a.value(&s.g, &s.engine.alpha, e)).sum();
                    assert!(raised >= alpha * (1.0 - eta) - 1e-12, "{kind:?}");
                }
            }
            // The unshifted vector is always an O-join.
            let odd = OddSet { vertices: bits::members(t.odd).collect(), draw: t.draw };
            assert!(ojoin::verify_ojoin_feasible(&OJoinVector::half_x(&s.g), &odd, &s.g).unwrap().feasible);
        }
    }
    assert!(odd_sides > 0);
}

#[test]
fn one_side_rules_hold_on_sampled_trees() {
    for kind in [FixtureKind::OneSidePolygon, FixtureKind::WheelFig5, FixtureKind::LongEdgeFig6, FixtureKind::EtaCombFig8] {
        let s = setup(kind, None, 1000);
        assert!(!s.engine.hierarchy.polygons.is_empty(), "{kind:?}");
        for t in &s.trees {
            let audit = s.engine.audit(&s.atlas, &s.g, t, false).unwrap();
            assert!(audit.one_side_failures.is_empty(), "{kind:?}: {:?}", audit.one_side_failures);
        }
    }
}

#[test]
fn hierarchy_is_laminar_covered_and_within_mass_bounds() {
    for kind in FixtureKind::ALL {
        let f = generate_fixture(kind, &FixtureParams::default()).unwrap();
        let atlas = atlas::build_atlas(&f.graph, &f.eta, false).unwrap();
        let h = slack::build_hierarchy(&atlas, &f.graph).unwrap();
        let g = &f.graph;
        for (i, a) in h.nodes.iter().enumerate() {
            for b in &h.nodes[i + 1..] {
                assert!(!common::cross(a.side, b.side), "{kind:?}");
            }
            if !a.children.is_empty() {
                let u = a.children.iter().fold(0, |u, &c| u | h.nodes[c].side);
                assert_eq!(u, a.side, "{kind:?}");
            }
        }
        let eps = qi(7) * &f.eta;
        let floor = Q::from_integer(1.into()) - &eps;
        let between = |a: VSet, b: VSet| -> Q {
            g.edges
                .iter()
                .filter(|e| (bits::contains(a, e.u) && bits::contains(b, e.v)) || (bits::contains(a, e.v) && bits::contains(b, e.u)))
                .map(|e| e.x.clone())
                .sum()
        };
        for p in &h.polygons {
            let m = p.atoms.len();
            let a0 = p.atoms[0];
            assert!(between(p.atoms[1], a0) >= floor, "{kind:?}");
            assert!(between(p.atoms[m - 1], a0) >= floor, "{kind:?}");
            for i in 1..m - 1 {
                assert!(between(p.atoms[i], p.atoms[i + 1]) >= floor, "{kind:?}");
            }
            let middle = p.atoms[2..m - 1].iter().fold(0, |u, &a| u | a);
            assert!(between(middle, a0) <= eps, "{kind:?}");
            // The near-cycle node's children are exactly the non-root atoms.
            let node = h.nodes.iter().find(|n| n.side == p.union).unwrap();
            let mut kids: Vec<VSet> = node.children.iter().map(|&c| h.nodes[c].side).collect();
            kids.sort();
            let mut want = p.atoms[1..].to_vec();
            want.sort();
            assert_eq!(kids, want, "{kind:?}");
            // Every group carries at most four units.
            let mut load = vec![0; m];
            for units in &p.mapping {
                for &gi in units {
                    load[gi] += 1;
                }
            }
            assert!(load.iter().all(|&l| l <= 4), "{kind:?}: {load:?}");
        }
    }
}

#[test]
fn ladder_near_cycle_has_the_four_rungs_as_children() {
    let f = generate_fixture(FixtureKind::OneSidePolygon, &FixtureParams::default()).unwrap();
    let atlas = atlas::build_atlas(&f.graph, &f.eta, false).unwrap();
    let h = slack::build_hierarchy(&atlas, &f.graph).unwrap();
    assert_eq!(h.polygons.len(), 1);
    let p = &h.polygons[0];
    assert_eq!(p.atoms.len(), 5);
    for a in &p.atoms[1..] {
        assert_eq!(bits::len(*a), 2, "each non-root atom is one rung");
    }
}
