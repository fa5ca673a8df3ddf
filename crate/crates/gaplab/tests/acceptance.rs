//! Acceptance run: one pass/fail line per criterion. Runs without the test
//! harness so every line prints; exits nonzero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::Instant;

use rayon::prelude::*;

use gaplab::atlas::{self, CutAtlas, Side};
use gaplab::bits::{self, VSet};
use gaplab::check;
use gaplab::harness::{self, generate_fixture, random_euclidean, sample_trees, wilson, FixtureKind, FixtureParams, Signature, Verdict};
use gaplab::instance::{self, Instance, SupportGraph};
use gaplab::lp;
use gaplab::maxent::{self, Lambda, TreeSample};
use gaplab::num::{self, q, qi, Q};
use gaplab::ojoin;
use gaplab::slack::{self, AlphaMode, SlackEngine};

const SEED: u64 = 2024;
const MATCHED_TREES: usize = 1_000;
const SAMPLES: usize = 10_000;
/// Two-sided tolerance for means and frequencies, in standard errors.
const SIGMAS: f64 = 4.0;
/// One-sided tolerance for bounded frequencies, in 99% Wilson half-widths.
const WILSON_K: f64 = 3.0;
const MARGINAL_TOL: f64 = 1e-6;
const WOLSEY_TOL: f64 = 1e-9;
const EUCLID_BUDGET_SECS: f64 = 600.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// A solved Euclidean instance with its sampled trees.
struct Solved {
    inst: Instance,
    lp_cost: Q,
    g: SupportGraph,
    lambda: Lambda,
    trees: Vec<TreeSample>,
}

fn euclidean_batch() -> Vec<Solved> {
    let mut insts = Vec::new();
    for n in 6..=14 {
        for k in 0..2 {
            insts.push(random_euclidean(n, 100.0, SEED, k).unwrap());
        }
        insts.push(common::clustered(&format!("clustered-n{n}"), n, SEED + n as u64));
    }
    insts
        .into_par_iter()
        .map(|inst| {
            let sol = lp::solve_subtour_lp(&inst).unwrap();
            let g = instance::split_node(&inst, &sol, 0).unwrap();
            let lambda = maxent::fit_support(&g, MARGINAL_TOL / 10.0).unwrap();
            let trees = sample_trees(&lambda, &g, SEED, &inst.name, SAMPLES).unwrap();
            Solved { inst, lp_cost: sol.objective, g, lambda, trees }
        })
        .collect()
}

fn in_tree(t: &TreeSample, g: &SupportGraph) -> Vec<bool> {
    let mut v = vec![false; g.edges.len()];
    for &e in &t.edges {
        v[e] = true;
    }
    v
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Matching cost per tree over the first `MATCHED_TREES` draws.
fn matchings(s: &Solved) -> Vec<Q> {
    s.trees[..MATCHED_TREES]
        .par_iter()
        .map(|t| {
            let odd = ojoin::odd_vertices(t, &s.g);
            ojoin::min_cost_matching(&odd, &s.inst, &s.g, ojoin::DEFAULT_ODD_CAP).unwrap().cost
        })
        .collect()
}

fn wolsey(batch: &[Solved], matched: &[Vec<Q>], secs: f64) -> Outcome {
    let tol = num::from_f64(WOLSEY_TOL).unwrap();
    let mut worst = f64::NEG_INFINITY;
    let mut violations = 0;
    for (s, ms) in batch.iter().zip(matched) {
        let cap = &s.lp_cost / qi(2) + &tol;
        for m in ms {
            violations += usize::from(*m > cap);
            worst = worst.max(num::to_f64(&(m - &s.lp_cost / qi(2))));
        }
    }
    let fractional = batch.iter().filter(|s| s.g.edges.iter().any(|e| e.x != qi(1))).count();
    outcome(
        violations == 0 && batch.len() >= 20 && secs <= EUCLID_BUDGET_SECS,
        format!(
            "{} instances ({fractional} fractional) x {MATCHED_TREES} trees, max matching - c(x)/2 = {worst:.4}, {violations} violations, {secs:.1}s",
            batch.len()
        ),
    )
}

fn marginals(batch: &[Solved]) -> Outcome {
    let mut worst_fit = 0f64;
    let mut worst_z = 0f64;
    let mut misses = 0;
    for s in batch {
        let m = maxent::tree_marginals(&s.lambda).unwrap();
        let mut freq = vec![0usize; s.g.edges.len()];
        for t in &s.trees {
            for &e in &t.edges {
                freq[e] += 1;
            }
        }
        for (j, &id) in s.lambda.ids.iter().enumerate() {
            let x = num::to_f64(&s.g.edges[id].x);
            worst_fit = worst_fit.max((m[j] - x).abs());
            let sigma = (x * (1.0 - x) / s.trees.len() as f64).sqrt();
            let dev = (freq[id] as f64 / s.trees.len() as f64 - x).abs();
            let z = if sigma > 0.0 { dev / sigma } else if dev == 0.0 { 0.0 } else { f64::INFINITY };
            worst_z = worst_z.max(z);
            misses += usize::from(z > SIGMAS);
        }
    }
    outcome(
        worst_fit <= MARGINAL_TOL && misses == 0,
        format!("max |marginal - x| = {worst_fit:.2e}, worst edge frequency at {worst_z:.2} sigma over {SAMPLES} trees"),
    )
}

fn tree_cost(batch: &[Solved]) -> Outcome {
    let mut worst = 0f64;
    for s in batch {
        let costs: Vec<f64> = s.trees.iter().map(|t| num::to_f64(&s.g.tree_cost(&t.edges)) + num::to_f64(&s.g.edges[s.g.e0].cost)).collect();
        let (m, se) = mean_se(&costs);
        let dev = (m - num::to_f64(&s.lp_cost)).abs();
        worst = worst.max(if se > 0.0 { dev / se } else if dev < 1e-9 { 0.0 } else { f64::INFINITY });
    }
    outcome(worst <= SIGMAS, format!("worst |mean c(T + e0) - c(x)| at {worst:.2} standard errors over {SAMPLES} trees"))
}

fn atlas_oracle() -> Outcome {
    let mut compared = 0;
    let mut problems = Vec::new();
    let mut chains = 0;
    for (kind, g, eta) in common::small_fixtures(12) {
        let a = atlas::build_atlas(&g, &eta, false).unwrap();
        let got: BTreeSet<VSet> = a.cuts.iter().map(|c| c.side).collect();
        if got != common::naive_near_min(&g, &eta, false) {
            problems.push(format!("{}: cut sets differ", kind.name()));
        }
        for c in a.components.iter().filter(|c| !c.is_singleton()) {
            let sides: Vec<VSet> = c.cuts.iter().map(|&i| a.cuts[i].side).collect();
            if c.atoms.iter().copied().collect::<BTreeSet<_>>() != common::coarsest_partition(&sides, g.n) {
                problems.push(format!("{}: atoms differ", kind.name()));
            }
        }
        let pool = atlas::enumerate_near_min_cuts(&g, &(&eta * qi(2)), false).unwrap();
        for ci in 0..a.components.len() {
            for s in atlas::almost_diagonal_cuts(&a, ci, &pool) {
                for side in [Side::Left, Side::Right] {
                    chains += 1;
                    if let Err(e) = atlas::chain_decomposition(&a, ci, s, side) {
                        problems.push(format!("{}: {e}", kind.name()));
                    }
                }
            }
        }
        compared += 1;
    }
    outcome(
        problems.is_empty() && compared > 0,
        format!("{compared} fixtures, {chains} chain decompositions, problems: {problems:?}"),
    )
}

fn wheel_golden() -> Outcome {
    let f = generate_fixture(FixtureKind::WheelFig5, &FixtureParams::default()).unwrap();
    let a = atlas::build_atlas(&f.graph, &f.eta, false).unwrap();
    let big: Vec<_> = a.components.iter().filter(|c| !c.is_singleton()).collect();
    if big.len() != 1 {
        return outcome(false, format!("{} non-singleton components", big.len()));
    }
    let c = big[0];
    let p = c.polygon.as_ref().unwrap();
    let rim: Vec<usize> = p.order.iter().map(|&id| c.atoms[id].trailing_zeros() as usize).collect();
    let start = rim.iter().position(|&v| v == 1).unwrap_or(0);
    let walk: Vec<usize> = (1..p.m()).map(|k| rim[(start + k) % p.m()]).collect();
    let mut back = walk.clone();
    back.reverse();
    let rim_order = walk == [2, 3, 4, 5, 6, 7, 8] || back == [2, 3, 4, 5, 6, 7, 8];
    let hub_inside = p.inside.len() == 1 && c.atoms[p.inside[0]] == bits::bit(0);
    let witness = p.witnesses.iter().find(|w| Some(&w.atom) == p.inside.first()).map_or(0, |w| w.cuts.len());
    let golden = Some(Signature::of(&a)) == f.golden;
    outcome(
        golden && p.m() == 8 && rim_order && hub_inside && witness == 8,
        format!("{} outside atoms in order {rim:?}, inside atoms {}, witness cycle length {witness}, golden signature {golden}", p.m(), p.inside.len()),
    )
}

/// A support with at least one both-sides cut at the target threshold.
struct Audited {
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

fn audited(name: &str, g: &SupportGraph, eta: &Q, lambda: Option<&Lambda>) -> Option<Audited> {
    let a = atlas::build_atlas(g, eta, false).ok()?;
    let engine = SlackEngine::build(&a, g, mode_for(eta)).unwrap();
    let fitted;
    let lambda = match lambda {
        Some(l) => l,
        None => {
            fitted = maxent::fit_support(g, 1e-9).unwrap();
            &fitted
        }
    };
    let trees = sample_trees(lambda, g, SEED + 1, name, SAMPLES).unwrap();
    Some(Audited { g: g.clone(), atlas: a, engine, trees })
}

fn both_sides_subjects(batch: &[Solved]) -> Vec<Audited> {
    let eta = q(1, 20);
    let mut out: Vec<Audited> = FixtureKind::ALL
        .par_iter()
        .filter_map(|&k| {
            let f = generate_fixture(k, &FixtureParams { size: None, eta: Some(eta.clone()) }).unwrap();
            audited(k.name(), &f.graph, &eta, None)
        })
        .collect();
    out.extend(batch.par_iter().filter_map(|s| audited(&s.inst.name, &s.g, &eta, Some(&s.lambda))).collect::<Vec<_>>());
    out.retain(|s| s.atlas.both_sides().next().is_some());
    out
}

fn parity(g: &SupportGraph, t: &[bool], s: VSet) -> bool {
    g.edges.iter().enumerate().filter(|(e, ed)| t[*e] && bits::contains(s, ed.u) != bits::contains(s, ed.v)).count() % 2 == 1
}

fn case_three(subjects: &[Audited]) -> Outcome {
    let mut odd = 0usize;
    let mut failures = 0usize;
    let mut trees = 0usize;
    for s in subjects.iter().filter(|s| s.engine.eta == q(1, 20)) {
        let floor = Q::from_integer(1.into()) - &s.engine.eta;
        let both: Vec<(VSet, Vec<usize>)> = s
            .atlas
            .both_sides()
            .map(|i| {
                let side = s.atlas.cuts[i].side;
                let d = (0..s.g.edges.len()).filter(|&e| bits::contains(side, s.g.edges[e].u) != bits::contains(side, s.g.edges[e].v)).collect();
                (side, d)
            })
            .collect();
        let (o, f) = s
            .trees
            .par_iter()
            .map(|t| {
                let a = s.engine.assign(t, &s.g);
                let tt = in_tree(t, &s.g);
                let mut o = 0;
                let mut f = 0;
                for (side, d) in &both {
                    if parity(&s.g, &tt, *side) {
                        o += 1;
                        let units: Q = d.iter().map(|&e| &s.g.edges[e].x * Q::from_integer(a.both[e].into()) / qi(2)).sum();
                        f += usize::from(units < floor);
                    }
                }
                (o, f)
            })
            .reduce(|| (0, 0), |x, y| (x.0 + y.0, x.1 + y.1));
        odd += o;
        failures += f;
        trees += s.trees.len();
    }
    outcome(
        failures == 0 && odd > 0 && subjects.iter().all(|s| s.trees.len() >= SAMPLES),
        format!("{} supports, {trees} trees at eta = 0.05, {odd} odd both-sides cuts, {failures} under alpha(1 - eta)", subjects.len()),
    )
}

fn both_sides_expectation(subjects: &[Audited]) -> Outcome {
    let mut worst_mean = f64::NEG_INFINITY;
    let mut worst_freq = f64::NEG_INFINITY;
    let (mut edges, mut points, mut misses) = (0, 0, 0);
    for s in subjects {
        let eta = num::to_f64(&s.engine.eta);
        let n = s.trees.len();
        let members: Vec<Vec<bool>> = s.trees.par_iter().map(|t| in_tree(t, &s.g)).collect();
        let assigned: Vec<Vec<u8>> = s.trees.par_iter().map(|t| s.engine.assign(t, &s.g).both).collect();
        for e in 0..s.g.edges.len() {
            let hits = assigned.iter().filter(|b| b[e] > 0).count() as f64;
            let (_, half) = wilson(hits, n);
            let margin = hits / n as f64 - (18.0 * eta + WILSON_K * half);
            worst_mean = worst_mean.max(margin);
            misses += usize::from(margin > 0.0);
            edges += 1;
        }
        for pc in s.engine.points() {
            for side in [&pc.left, &pc.right].into_iter().flatten() {
                let hits = members.iter().filter(|t| side.fires(t)).count() as f64;
                let (_, half) = wilson(hits, n);
                let margin = hits / n as f64 - (4.5 * eta + WILSON_K * half);
                worst_freq = worst_freq.max(margin);
                misses += usize::from(margin > 0.0);
                points += 1;
            }
        }
    }
    outcome(
        misses == 0 && edges > 0 && points > 0,
        format!(
            "{edges} edges, worst mean s*_e/(alpha x_e) - (18 eta + 3 CI) = {worst_mean:.4}; {points} bad events, worst frequency - (4.5 eta + 3 CI) = {worst_freq:.4}"
        ),
    )
}

fn all_supports(batch: &[Solved]) -> Vec<(String, SupportGraph, Q)> {
    let mut out = Vec::new();
    for kind in FixtureKind::ALL {
        let f = generate_fixture(kind, &FixtureParams::default()).unwrap();
        out.push((kind.name().to_string(), f.graph.clone(), f.eta.clone()));
        if f.eta != q(1, 20) {
            out.push((format!("{}@0.05", kind.name()), f.graph, q(1, 20)));
        }
    }
    for s in batch {
        out.push((s.inst.name.clone(), s.g.clone(), q(1, 20)));
        out.push((format!("{}@0.1", s.inst.name), s.g.clone(), q(1, 10)));
    }
    out
}

fn structural_suite(batch: &[Solved]) -> Outcome {
    let results: Vec<(String, usize, Vec<String>)> = all_supports(batch)
        .par_iter()
        .map(|(name, g, eta)| {
            let a = atlas::build_atlas(g, eta, false).unwrap();
            let pool = atlas::enumerate_near_min_cuts(g, &(eta * qi(2)), false).unwrap();
            let mut checks = atlas::structural_checks(&a, g, &pool).unwrap();
            checks.extend(SlackEngine::build_unchecked(&a, g, mode_for(eta)).unwrap().checks);
            let items = checks.iter().map(|c| c.checked).sum();
            let failed = checks.iter().filter(|c| c.asserted && !c.passed()).map(|c| format!("{name}: {}", c.name)).collect();
            (name.clone(), items, failed)
        })
        .collect();
    let items: usize = results.iter().map(|r| r.1).sum();
    let failed: Vec<&String> = results.iter().flat_map(|r| &r.2).collect();
    outcome(failed.is_empty(), format!("{} atlases, {items} checked items, failures: {failed:?}", results.len()))
}

const ONE_SIDE_ROWS: [&str; 5] = ["one-side-slack-mean", "polygon-cut-even", "polygon-atom-even", "extremal-cut-happy", "extremal-atom-happy"];

fn one_side_suite() -> Outcome {
    let kinds = [FixtureKind::OneSidePolygon, FixtureKind::LongEdgeFig6, FixtureKind::EtaCombFig8, FixtureKind::WheelFig5];
    let cfg = harness::ExperimentConfig {
        sources: kinds.iter().map(|&k| harness::InstanceSource::Fixture(k, FixtureParams::default())).collect(),
        samples: SAMPLES,
        seed: SEED,
        allow_large_eta: true,
        ..harness::ExperimentConfig::default()
    };
    let report = harness::run_experiment(&cfg).unwrap();
    let mut failures = Vec::new();
    let mut measured = 0;
    let mut audited = 0;
    for r in &report.instances {
        if let Some(e) = &r.error {
            failures.push(format!("{}: {e}", r.name));
        }
        if let Some(a) = &r.audit {
            audited += a.trees;
            if a.one_side_failures > 0 {
                failures.push(format!("{}: {} deterministic failures", r.name, a.one_side_failures));
            }
        }
        for b in r.bounds.iter().filter(|b| ONE_SIDE_ROWS.contains(&b.invariant.as_str())) {
            match b.verdict {
                Verdict::Fail => failures.push(format!("{}: {}", r.name, b.invariant)),
                Verdict::Pass => measured += 1,
                _ => {}
            }
        }
    }
    // Independent recount of the per-edge one-side mean.
    let mut worst = f64::NEG_INFINITY;
    for &k in &kinds {
        let f = generate_fixture(k, &FixtureParams::default()).unwrap();
        let s = audited_fixture(&f.graph, &f.eta, k.name());
        let eta = num::to_f64(&f.eta);
        let one: Vec<Vec<u8>> = s.trees.par_iter().map(|t| s.engine.assign(t, &s.g).one).collect();
        for e in 0..s.g.edges.len() {
            let hits: f64 = one.iter().map(|o| f64::from(o[e]) / 2.0).sum();
            let (_, half) = wilson(hits, one.len());
            let margin = hits / one.len() as f64 - (44.0 * eta + WILSON_K * half);
            worst = worst.max(margin);
            if margin > 0.0 {
                failures.push(format!("{}: edge {e} one-side mean", k.name()));
            }
        }
    }
    outcome(
        failures.is_empty() && measured > 0,
        format!("{audited} audited trees, {measured} passing bound rows, worst one-side mean - (44 eta + 3 CI) = {worst:.4}, failures: {failures:?}"),
    )
}

fn audited_fixture(g: &SupportGraph, eta: &Q, name: &str) -> Audited {
    audited(name, g, eta, None).unwrap()
}

fn hierarchy_suite() -> Outcome {
    let mut polygons = 0;
    let mut problems = Vec::new();
    for kind in FixtureKind::ALL {
        let f = generate_fixture(kind, &FixtureParams::default()).unwrap();
        let a = atlas::build_atlas(&f.graph, &f.eta, false).unwrap();
        if a.reduced.iter().all(|c| c.is_singleton()) {
            continue;
        }
        let h = match slack::build_hierarchy(&a, &f.graph) {
            Ok(h) => h,
            Err(e) => {
                problems.push(format!("{}: {e}", kind.name()));
                continue;
            }
        };
        if !check::all_pass(&h.checks) {
            problems.push(format!("{}: built-in checks", kind.name()));
        }
        for (i, x) in h.nodes.iter().enumerate() {
            if h.nodes[i + 1..].iter().any(|y| common::cross(x.side, y.side)) {
                problems.push(format!("{}: not laminar", kind.name()));
            }
            if !x.children.is_empty() && x.children.iter().fold(0, |u, &c| u | h.nodes[c].side) != x.side {
                problems.push(format!("{}: children do not cover a node", kind.name()));
            }
        }
        let g = &f.graph;
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
            polygons += 1;
            let m = p.atoms.len();
            let ends = between(p.atoms[1], p.atoms[0]) >= floor && between(p.atoms[m - 1], p.atoms[0]) >= floor;
            let adjacent = (1..m - 1).all(|i| between(p.atoms[i], p.atoms[i + 1]) >= floor);
            let middle = p.atoms[2..m - 1].iter().fold(0, |u, &a| u | a);
            let rest = between(middle, p.atoms[0]) <= eps;
            let near = p.atoms.iter().all(|&at| common::naive_cut(g, at) <= qi(2) + &eps);
            if !(ends && adjacent && rest && near) {
                problems.push(format!("{}: mass bounds", kind.name()));
            }
        }
    }
    outcome(problems.is_empty() && polygons > 0, format!("{polygons} one-side polygons, problems: {problems:?}"))
}

fn ratio(batch: &[Solved], matched: &[Vec<Q>]) -> Outcome {
    let mut worst = f64::INFINITY;
    let mut worst_name = String::new();
    let mut misses = 0;
    for (s, ms) in batch.iter().zip(matched) {
        let c = num::to_f64(&s.lp_cost);
        let r: Vec<f64> = s.trees[..MATCHED_TREES]
            .iter()
            .zip(ms)
            .map(|(t, m)| (num::to_f64(&s.g.tree_cost(&t.edges)) + num::to_f64(m)) / c)
            .collect();
        let (mean, se) = mean_se(&r);
        let margin = 1.5 + SIGMAS * se - mean;
        misses += usize::from(margin < 0.0);
        if margin < worst {
            worst = margin;
            worst_name = s.inst.name.clone();
        }
    }
    outcome(
        misses == 0,
        format!("smallest margin 1.5 + 4 se - mean ratio = {worst:.4} on {worst_name}. {}", harness::SCALE_NOTE),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let batch = euclidean_batch();
    let matched: Vec<Vec<Q>> = batch.iter().map(matchings).collect();
    let euclid_secs = start.elapsed().as_secs_f64();
    let subjects = both_sides_subjects(&batch);

    let rows: Vec<(&str, Outcome)> = vec![
        ("matching never exceeds half the LP cost on random Euclidean instances", wolsey(&batch, &matched, euclid_secs)),
        ("fitted marginals reproduce x and sampled edge frequencies agree", marginals(&batch)),
        ("sampled tree cost matches the LP cost in expectation", tree_cost(&batch)),
        ("near-min cuts, atoms and chains agree with brute force on small fixtures", atlas_oracle()),
        ("wheel fixture: eight rim atoms in order around one inside hub", wheel_golden()),
        ("odd both-sides cuts always receive alpha(1 - eta) slack", case_three(&subjects)),
        ("both-sides slack and bad-event frequencies stay within their bounds", both_sides_expectation(&subjects)),
        ("structural suite holds on every atlas and context", structural_suite(&batch)),
        ("one-side slack rules and their statistical bounds hold", one_side_suite()),
        ("hierarchy is laminar, covered by children and within mass bounds", hierarchy_suite()),
        ("mean tree-plus-matching ratio stays at or below 3/2", ratio(&batch, &matched)),
    ];
    let mut all = true;
    for (i, (label, o)) in rows.iter().enumerate() {
        println!("{:>2}. {}  {label}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        all &= o.pass;
    }
    println!("total {:.1}s", start.elapsed().as_secs_f64());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
