//! Cutting-plane subtour LP against a dense LP over every cut.

mod common;

use gaplab::bits;
use gaplab::harness::random_euclidean;
use gaplab::instance::Instance;
use gaplab::lp::{self, mincut};
use gaplab::maxent;
use gaplab::num::{self, q, qi, Q};

fn assert_feasible_by_enumeration(sol: &lp::LpSolution) {
    let n = sol.instance.n;
    for v in 0..n {
        assert_eq!(sol.cut_value(bits::bit(v)), qi(2), "degree of {v}");
    }
    for s in 1u64..(1 << (n - 1)) {
        assert!(sol.cut_value(s) >= qi(2), "cut {:?}", bits::members(s).collect::<Vec<_>>());
    }
}

#[test]
fn random_five_point_optimum_passes_full_cut_recheck() {
    for k in 0..5 {
        let inst = random_euclidean(5, 100.0, 11, k).unwrap();
        let sol = lp::solve_subtour_lp(&inst).unwrap();
        assert_feasible_by_enumeration(&sol);
        let dense = common::subtour_lp_dense(&inst);
        assert!((num::to_f64(&sol.objective) - dense).abs() < 1e-6, "{} vs {dense}", num::to_f64(&sol.objective));
    }
}

#[test]
fn regular_pentagon_costs_its_perimeter() {
    let pts: Vec<(f64, f64)> = (0..5)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / 5.0;
            (t.cos(), t.sin())
        })
        .collect();
    let inst = Instance::from_points("pentagon", pts).unwrap();
    let sol = lp::solve_subtour_lp(&inst).unwrap();
    let perimeter: Q = (0..5).map(|i| inst.dist(i, (i + 1) % 5).clone()).sum();
    assert_eq!(sol.objective, perimeter);
    assert!((num::to_f64(&sol.objective) - common::subtour_lp_dense(&inst)).abs() < 1e-9);
    assert!(sol.edges.iter().all(|e| e.x == qi(1)));
}

/// Shortest-path metric of a triangular prism: triangle sides 1, rungs 1/2.
fn half_edge_prism() -> Instance {
    let (t, r) = (qi(1), q(1, 2));
    let mut d = vec![vec![qi(0); 6]; 6];
    for u in 0..6 {
        for v in 0..6 {
            if u == v {
                continue;
            }
            let same = (u < 3) == (v < 3);
            let (a, b) = (u % 3, v % 3);
            d[u][v] = match (same, a == b) {
                (true, _) => t.clone(),
                (false, true) => r.clone(),
                (false, false) => &t + &r,
            };
        }
    }
    Instance::from_matrix("half-edge-prism", d).unwrap()
}

#[test]
fn prism_optimum_is_fractional_halves_and_ones() {
    let inst = half_edge_prism();
    let sol = lp::solve_subtour_lp(&inst).unwrap();
    assert_eq!(sol.objective, q(9, 2));
    assert!((common::subtour_lp_dense(&inst) - 4.5).abs() < 1e-9);
    assert!(sol.edges.iter().all(|e| e.x == q(1, 2) || e.x == qi(1)));
    assert!(sol.edges.iter().any(|e| e.x == q(1, 2)));
    assert!(common::optimal_tour(&inst) > 4.5 + 1e-9);
}

#[test]
fn objective_matches_dense_lp_and_bounds_every_tour() {
    let mut insts: Vec<Instance> = (0..6).map(|k| random_euclidean(7, 50.0, 3, k).unwrap()).collect();
    insts.extend((0..6).map(|k| common::clustered(&format!("clustered-{k}"), 8, k)));
    for inst in &insts {
        let sol = lp::solve_subtour_lp(inst).unwrap();
        let obj = num::to_f64(&sol.objective);
        let dense = common::subtour_lp_dense(inst);
        assert!((obj - dense).abs() < 1e-6 * dense.max(1.0), "{}: {obj} vs {dense}", inst.name);
        assert!(obj <= common::optimal_tour(inst) + 1e-9, "{}", inst.name);
        sol.check_feasible().unwrap();
    }
}

#[test]
fn returned_support_has_no_violated_cut_and_lies_in_tree_polytope() {
    for k in 0..6 {
        let inst = common::clustered("c", 9, 100 + k);
        let sol = lp::solve_subtour_lp(&inst).unwrap();
        assert!(lp::separate_min_cut(inst.n, &sol.weighted_edges()).unwrap().is_none());
        let g = gaplab::instance::split_node(&inst, &sol, 0).unwrap();
        let ids = g.tree_edge_ids();
        let edges: Vec<(usize, usize)> = ids.iter().map(|&i| (g.edges[i].u, g.edges[i].v)).collect();
        let x: Vec<Q> = ids.iter().map(|&i| g.edges[i].x.clone()).collect();
        assert!(maxent::check_spanning_tree_polytope(g.n, &edges, &x).unwrap().member);
    }
}

#[test]
fn separation_finds_the_bridge_of_two_triangles() {
    let mut e: Vec<(usize, usize, Q)> = Vec::new();
    for (a, b) in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)] {
        e.push((a, b, qi(1)));
    }
    e.push((2, 3, qi(1)));
    let (s, v) = lp::separate_min_cut(6, &e).unwrap().expect("bridge");
    assert_eq!(v, qi(1));
    assert!(s == bits::from_members([0, 1, 2]) || s == bits::from_members([3, 4, 5]));
}

#[test]
fn every_fixture_has_min_cut_exactly_two() {
    for (kind, g, _) in common::small_fixtures(64) {
        let w: Vec<(usize, usize, Q)> = g.edges.iter().map(|e| (e.u, e.v, e.x.clone())).collect();
        let cut = mincut::min_cut(&mincut::weight_matrix(g.n, &w)).unwrap();
        assert_eq!(cut.value, qi(2), "{kind:?}");
        if g.n <= 12 {
            let full = bits::full(g.n);
            let best = (1..full).map(|s| common::naive_cut(&g, s)).min().unwrap();
            assert_eq!(best, qi(2), "{kind:?}");
        }
    }
}
