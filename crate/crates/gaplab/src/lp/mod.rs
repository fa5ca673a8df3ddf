//! Subtour elimination LP solved by exact cutting planes.
//!
//! The master LP starts from the degree equations alone. Each round separates
//! violated subtour constraints exactly (components of a disconnected support,
//! else every Stoer–Wagner phase cut below 2), appends them as rows and
//! re-optimizes with the dual simplex from the previous basis. The final basis
//! is a vertex of the relaxation that satisfies every subtour constraint, hence
//! a vertex of the full LP; this is re-certified by an exact rank check.

pub mod mincut;
mod simplex;

use std::collections::BTreeSet;
use std::path::Path;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::bits::{self, VSet};
use crate::instance::Instance;
use crate::num::{self, Q};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LpEdge {
    pub u: usize,
    pub v: usize,
    pub x: Q,
    pub cost: Q,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub instance: Instance,
    /// Positive coordinates only, `u < v`, sorted.
    pub edges: Vec<LpEdge>,
    pub objective: Q,
    /// Pooled cuts tight at the optimum; each side omits vertex 0.
    pub binding_cuts: Vec<Vec<usize>>,
    pub extremal: bool,
    pub rounds: usize,
}

#[derive(Clone, Debug)]
pub struct LpOptions {
    /// Cap on separation rounds.
    pub max_rounds: usize,
    /// Cap on simplex pivots per re-optimization.
    pub max_pivots: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions { max_rounds: 500, max_pivots: 200_000 }
    }
}

fn pair_index(n: usize) -> Vec<(usize, usize)> {
    let mut p = Vec::with_capacity(n * (n - 1) / 2);
    for u in 0..n {
        for v in u + 1..n {
            p.push((u, v));
        }
    }
    p
}

/// Violated subtour sides for the weights `x` on `pairs`, normalized to omit
/// vertex 0. Empty iff every proper cut has value at least 2.
fn violated_cuts(n: usize, pairs: &[(usize, usize)], x: &[Q]) -> Vec<VSet> {
    let edges: Vec<(usize, usize, Q)> =
        pairs.iter().zip(x).filter(|(_, v)| v.is_positive()).map(|(&(u, v), x)| (u, v, x.clone())).collect();
    let w = mincut::weight_matrix(n, &edges);
    let full = bits::full(n);
    let norm = |s: VSet| if bits::contains(s, 0) { full & !s } else { s };
    let comps = mincut::components(&w);
    if comps.len() > 1 {
        return comps.into_iter().map(norm).collect::<BTreeSet<_>>().into_iter().collect();
    }
    let two = num::qi(2);
    mincut::stoer_wagner_phases(&w)
        .into_iter()
        .filter(|p| p.value < two)
        .map(|p| norm(p.side))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

pub fn solve_subtour_lp(inst: &Instance) -> Result<LpSolution> {
    solve_subtour_lp_with(inst, &LpOptions::default())
}

pub fn solve_subtour_lp_with(inst: &Instance, opts: &LpOptions) -> Result<LpSolution> {
    let n = inst.n;
    let pairs = pair_index(n);
    let k = pairs.len();
    let cost: Vec<Q> = pairs.iter().map(|&(u, v)| inst.dist(u, v).clone()).collect();
    let mut a = vec![vec![Q::zero(); k]; n];
    for (j, &(u, v)) in pairs.iter().enumerate() {
        a[u][j] = Q::one();
        a[v][j] = Q::one();
    }
    let mut t = simplex::feasible_start(a, vec![num::qi(2); n], &cost, opts.max_pivots)?;
    t.primal(k, opts.max_pivots)?;
    let mut pool: Vec<VSet> = Vec::new();
    let mut rounds = 0;
    loop {
        let x = t.solution(k);
        let cuts = violated_cuts(n, &pairs, &x);
        if cuts.is_empty() {
            break;
        }
        rounds += 1;
        if rounds > opts.max_rounds {
            return Err(Error::IterationLimit(opts.max_rounds));
        }
        for s in cuts {
            if pool.contains(&s) {
                return Err(Error::InfeasibleInput(format!("pooled cut {s:#x} re-separated")));
            }
            let row: Vec<(usize, Q)> = pairs
                .iter()
                .enumerate()
                .filter(|(_, &(u, v))| bits::contains(s, u) != bits::contains(s, v))
                .map(|(j, _)| (j, Q::one()))
                .collect();
            t.add_ge_row(&row, &num::qi(2));
            pool.push(s);
        }
        t.dual(opts.max_pivots)?;
    }
    let x = t.solution(k);
    let objective = -t.neg_z.clone();
    let edges: Vec<LpEdge> = pairs
        .iter()
        .zip(&x)
        .zip(&cost)
        .filter(|((_, x), _)| x.is_positive())
        .map(|((&(u, v), x), c)| LpEdge { u, v, x: x.clone(), cost: c.clone() })
        .collect();
    let mut sol = LpSolution { instance: inst.clone(), edges, objective, binding_cuts: Vec::new(), extremal: false, rounds };
    let two = num::qi(2);
    let binding: Vec<VSet> = pool.into_iter().filter(|&s| sol.cut_value(s) == two).collect();
    sol.binding_cuts = binding.iter().map(|&s| bits::members(s).collect()).collect();
    sol.extremal = sol.is_vertex(&binding);
    sol.check_feasible()?;
    if sol.edges.iter().any(|e| e.x > Q::one()) {
        return Err(Error::InfeasibleInput("coordinate above 1 at an optimum".into()));
    }
    Ok(sol)
}

/// Exact separation for arbitrary nonnegative weights. Returns a side with
/// `x(δ(S)) < 2` when one exists (the global minimum cut), else `None`.
pub fn separate_min_cut(n: usize, edges: &[(usize, usize, Q)]) -> Result<Option<(VSet, Q)>> {
    if n < 2 {
        return Ok(None);
    }
    let w = mincut::weight_matrix(n, edges);
    let comps = mincut::components(&w);
    if comps.len() > 1 {
        let c = comps.into_iter().find(|&c| !bits::contains(c, 0)).unwrap_or(0);
        return Err(Error::DisconnectedSupport { component: bits::members(c).collect() });
    }
    let cut = mincut::min_cut(&w).expect("n >= 2");
    if cut.value < num::qi(2) {
        Ok(Some((cut.side, cut.value)))
    } else {
        Ok(None)
    }
}

impl LpSolution {
    pub fn n(&self) -> usize {
        self.instance.n
    }

    pub fn cut_value(&self, s: VSet) -> Q {
        self.edges
            .iter()
            .filter(|e| bits::contains(s, e.u) != bits::contains(s, e.v))
            .map(|e| e.x.clone())
            .sum()
    }

    pub fn weighted_edges(&self) -> Vec<(usize, usize, Q)> {
        self.edges.iter().map(|e| (e.u, e.v, e.x.clone())).collect()
    }

    /// Degree equations, bounds, and the exact global minimum cut.
    pub fn check_feasible(&self) -> Result<()> {
        let n = self.n();
        let mut deg = vec![Q::zero(); n];
        for e in &self.edges {
            if e.u >= n || e.v >= n || e.u == e.v {
                return Err(Error::InfeasibleInput(format!("edge ({},{}) is invalid", e.u, e.v)));
            }
            if e.x.is_negative() || e.x > Q::one() {
                return Err(Error::InfeasibleInput(format!("x({},{}) = {} outside [0,1]", e.u, e.v, num::format(&e.x))));
            }
            deg[e.u] += &e.x;
            deg[e.v] += &e.x;
        }
        if let Some(v) = deg.iter().position(|d| *d != num::qi(2)) {
            return Err(Error::InfeasibleInput(format!("x(δ({v})) = {}", num::format(&deg[v]))));
        }
        match separate_min_cut(n, &self.weighted_edges()) {
            Ok(None) => Ok(()),
            Ok(Some((s, v))) => Err(Error::InfeasibleInput(format!(
                "subtour constraint violated on {:?} (value {})",
                bits::members(s).collect::<Vec<_>>(),
                num::format(&v)
            ))),
            Err(Error::DisconnectedSupport { component }) => {
                Err(Error::InfeasibleInput(format!("support disconnected at {component:?}")))
            }
            Err(e) => Err(e),
        }
    }

    /// Active constraints restricted to the support have full column rank.
    fn is_vertex(&self, binding: &[VSet]) -> bool {
        let n = self.n();
        let mut m = Vec::new();
        for v in 0..n {
            m.push(self.edges.iter().map(|e| if e.u == v || e.v == v { Q::one() } else { Q::zero() }).collect());
        }
        for &s in binding {
            m.push(
                self.edges
                    .iter()
                    .map(|e| if bits::contains(s, e.u) != bits::contains(s, e.v) { Q::one() } else { Q::zero() })
                    .collect(),
            );
        }
        simplex::rank(m) == self.edges.len()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let edges: Vec<serde_json::Value> = self
            .edges
            .iter()
            .map(|e| {
                serde_json::json!({
                    "u": e.u, "v": e.v,
                    "x_num": e.x.numer().to_string(), "x_den": e.x.denom().to_string(),
                    "cost": num::format(&e.cost),
                })
            })
            .collect();
        serde_json::json!({
            "instance": self.instance.to_json(),
            "edges": edges,
            "objective_num": self.objective.numer().to_string(),
            "objective_den": self.objective.denom().to_string(),
            "binding_cuts": self.binding_cuts,
            "extremal": self.extremal,
            "rounds": self.rounds,
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<LpSolution> {
        let bad = |m: &str| Error::Parse(format!("LP solution: {m}"));
        let instance = Instance::from_json(v.get("instance").ok_or_else(|| bad("missing instance"))?)?;
        let big = |v: Option<&serde_json::Value>, what: &str| -> Result<BigInt> {
            let v = v.ok_or_else(|| bad(what))?;
            let s = match v {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            s.parse().map_err(|_| bad(what))
        };
        let mut edges = Vec::new();
        for e in v.get("edges").and_then(|e| e.as_array()).ok_or_else(|| bad("missing edges"))? {
            let u = e.get("u").and_then(|u| u.as_u64()).ok_or_else(|| bad("edge u"))? as usize;
            let w = e.get("v").and_then(|u| u.as_u64()).ok_or_else(|| bad("edge v"))? as usize;
            let den = big(e.get("x_den"), "x_den")?;
            if den.is_zero() {
                return Err(bad("zero denominator"));
            }
            let x = Q::new(big(e.get("x_num"), "x_num")?, den);
            let cost = num::from_json(e.get("cost").ok_or_else(|| bad("edge cost"))?)?;
            edges.push(LpEdge { u: u.min(w), v: u.max(w), x, cost });
        }
        let objective = Q::new(big(v.get("objective_num"), "objective_num")?, big(v.get("objective_den"), "objective_den")?);
        let binding_cuts: Vec<Vec<usize>> = match v.get("binding_cuts") {
            Some(b) => serde_json::from_value(b.clone())?,
            None => Vec::new(),
        };
        let extremal = v.get("extremal").and_then(|b| b.as_bool()).unwrap_or(false);
        let rounds = v.get("rounds").and_then(|b| b.as_u64()).unwrap_or(0) as usize;
        let sol = LpSolution { instance, edges, objective, binding_cuts, extremal, rounds };
        sol.check_feasible()?;
        Ok(sol)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_json())?)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<LpSolution> {
        LpSolution::from_json(&serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{q, qi};

    #[test]
    fn unit_triangle_is_integral() {
        let inst = Instance::from_matrix("tri", vec![vec![qi(0), qi(1), qi(1)], vec![qi(1), qi(0), qi(1)], vec![qi(1), qi(1), qi(0)]])
            .unwrap();
        let sol = solve_subtour_lp(&inst).unwrap();
        assert_eq!(sol.objective, qi(3));
        assert_eq!(sol.edges.len(), 3);
        assert!(sol.edges.iter().all(|e| e.x == qi(1)));
        assert!(sol.extremal);
    }

    #[test]
    fn separation_examples() {
        let c5: Vec<_> = (0..5).map(|i| (i, (i + 1) % 5, qi(1))).collect();
        assert!(separate_min_cut(5, &c5).unwrap().is_none());
        let mut bridge: Vec<_> = vec![(0, 1, qi(1)), (1, 2, qi(1)), (2, 0, qi(1)), (3, 4, qi(1)), (4, 5, qi(1)), (5, 3, qi(1))];
        bridge.push((2, 3, qi(1)));
        let (side, value) = separate_min_cut(6, &bridge).unwrap().unwrap();
        assert_eq!(value, qi(1));
        assert!(side == 0b000111 || side == 0b111000);
        let split = vec![(0, 1, q(1, 2)), (2, 3, q(1, 2))];
        assert!(matches!(separate_min_cut(4, &split), Err(Error::DisconnectedSupport { .. })));
    }

    #[test]
    fn json_round_trip() {
        let inst = Instance::from_points("sq", vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.5, 2.0)]).unwrap();
        let sol = solve_subtour_lp(&inst).unwrap();
        let back = LpSolution::from_json(&sol.to_json()).unwrap();
        assert_eq!(back.edges, sol.edges);
        assert_eq!(back.objective, sol.objective);
        assert_eq!(back.binding_cuts, sol.binding_cuts);
    }
}
