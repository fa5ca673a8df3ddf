//! Metric TSP instances and the split support graph the rest of the crate
//! works on.

use std::path::Path;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::bits::{self, VSet};
use crate::lp::LpSolution;
use crate::num::{self, Scaled, Q};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    TsplibEuc2d,
    JsonMatrix,
    JsonPoints,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Format> {
        match s {
            "tsplib-euc2d" => Ok(Format::TsplibEuc2d),
            "json-matrix" => Ok(Format::JsonMatrix),
            "json-points" => Ok(Format::JsonPoints),
            other => Err(Error::Parse(format!("unknown instance format {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Metric {
    /// Planar points; distances are unrounded Euclidean lengths.
    Points(Vec<(f64, f64)>),
    /// Full symmetric matrix of exact rationals.
    Matrix(Vec<Vec<Q>>),
}

/// A validated metric instance. Distances are cached both exactly and as
/// doubles; the exact value of a Euclidean distance is the dyadic rational of
/// its double.
#[derive(Clone, Debug)]
pub struct Instance {
    pub name: String,
    pub n: usize,
    pub metric: Metric,
    exact: Vec<Q>,
    approx: Vec<f64>,
}

impl Instance {
    pub fn from_matrix(name: &str, matrix: Vec<Vec<Q>>) -> Result<Instance> {
        let n = matrix.len();
        if n < 3 {
            return Err(Error::MetricViolation(format!("need at least 3 vertices, got {n}")));
        }
        if n > bits::MAX_VERTICES - 1 {
            return Err(Error::TooLarge(format!("{n} vertices")));
        }
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Parse(format!("row {i} has {} entries, expected {n}", row.len())));
            }
        }
        for i in 0..n {
            if !matrix[i][i].is_zero() {
                return Err(Error::MetricViolation(format!("d({i},{i}) is not zero")));
            }
            for j in 0..n {
                if matrix[i][j].is_negative() {
                    return Err(Error::MetricViolation(format!("d({i},{j}) is negative")));
                }
                if matrix[i][j] != matrix[j][i] {
                    return Err(Error::MetricViolation(format!("d({i},{j}) != d({j},{i})")));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if matrix[i][j] > &matrix[i][k] + &matrix[k][j] {
                        return Err(Error::MetricViolation(format!(
                            "triangle inequality fails: d({i},{j}) > d({i},{k}) + d({k},{j})"
                        )));
                    }
                }
            }
        }
        let exact: Vec<Q> = matrix.iter().flatten().cloned().collect();
        let approx = exact.iter().map(num::to_f64).collect();
        Ok(Instance { name: name.to_string(), n, metric: Metric::Matrix(matrix), exact, approx })
    }

    pub fn from_points(name: &str, points: Vec<(f64, f64)>) -> Result<Instance> {
        let n = points.len();
        if n < 3 {
            return Err(Error::MetricViolation(format!("need at least 3 vertices, got {n}")));
        }
        if n > bits::MAX_VERTICES - 1 {
            return Err(Error::TooLarge(format!("{n} vertices")));
        }
        if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(Error::Parse("non-finite coordinate".into()));
        }
        let mut approx = vec![0.0; n * n];
        let mut exact = vec![Q::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                let d = (points[i].0 - points[j].0).hypot(points[i].1 - points[j].1);
                approx[i * n + j] = d;
                exact[i * n + j] = num::from_f64(d)?;
            }
        }
        Ok(Instance { name: name.to_string(), n, metric: Metric::Points(points), exact, approx })
    }

    pub fn dist(&self, u: usize, v: usize) -> &Q {
        &self.exact[u * self.n + v]
    }

    pub fn distf(&self, u: usize, v: usize) -> f64 {
        self.approx[u * self.n + v]
    }

    pub fn tour_cost(&self, tour: &[usize]) -> Q {
        let mut c = Q::zero();
        for i in 0..tour.len() {
            c += self.dist(tour[i], tour[(i + 1) % tour.len()]);
        }
        c
    }

    pub fn to_json(&self) -> serde_json::Value {
        match &self.metric {
            Metric::Points(p) => serde_json::json!({
                "name": self.name,
                "points": p.iter().map(|&(x, y)| vec![x, y]).collect::<Vec<_>>(),
            }),
            Metric::Matrix(m) => serde_json::json!({
                "name": self.name,
                "n": self.n,
                "matrix": m.iter().map(|r| r.iter().map(num::format).collect::<Vec<_>>()).collect::<Vec<_>>(),
            }),
        }
    }

    /// Accepts either JSON schema (`matrix` or `points`).
    pub fn from_json(v: &serde_json::Value) -> Result<Instance> {
        let name = v.get("name").and_then(|n| n.as_str()).unwrap_or("unnamed");
        if let Some(m) = v.get("matrix") {
            let rows = m.as_array().ok_or_else(|| Error::Parse("matrix must be an array".into()))?;
            let mut matrix = Vec::with_capacity(rows.len());
            for row in rows {
                let row = row.as_array().ok_or_else(|| Error::Parse("matrix rows must be arrays".into()))?;
                matrix.push(row.iter().map(num::from_json).collect::<Result<Vec<_>>>()?);
            }
            if let Some(n) = v.get("n").and_then(|n| n.as_u64()) {
                if n as usize != matrix.len() {
                    return Err(Error::Parse(format!("n = {n} but matrix has {} rows", matrix.len())));
                }
            }
            Instance::from_matrix(name, matrix)
        } else if let Some(p) = v.get("points") {
            let pts = p.as_array().ok_or_else(|| Error::Parse("points must be an array".into()))?;
            let mut points = Vec::with_capacity(pts.len());
            for pt in pts {
                match pt.as_array().map(|a| a.as_slice()) {
                    Some([x, y]) => points.push((num::to_f64(&num::from_json(x)?), num::to_f64(&num::from_json(y)?))),
                    _ => return Err(Error::Parse("each point must be [x, y]".into())),
                }
            }
            Instance::from_points(name, points)
        } else {
            Err(Error::Parse("instance JSON needs `matrix` or `points`".into()))
        }
    }
}

pub fn load_instance(path: &Path, format: Format) -> Result<Instance> {
    let text = std::fs::read_to_string(path)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("instance");
    match format {
        Format::TsplibEuc2d => parse_tsplib(&text, stem),
        Format::JsonMatrix | Format::JsonPoints => {
            let v: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
            let wanted = if format == Format::JsonMatrix { "matrix" } else { "points" };
            if v.get(wanted).is_none() {
                return Err(Error::Parse(format!("{}: missing `{wanted}`", path.display())));
            }
            let mut inst = Instance::from_json(&v)?;
            if v.get("name").is_none() {
                inst.name = stem.to_string();
            }
            Ok(inst)
        }
    }
}

/// TSPLIB `NODE_COORD_SECTION` with `EUC_2D` weights. Distances are kept
/// unrounded.
pub fn parse_tsplib(text: &str, default_name: &str) -> Result<Instance> {
    let mut name = default_name.to_string();
    let mut dimension = None;
    let mut in_coords = false;
    let mut points: Vec<(usize, f64, f64)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line == "EOF" {
            break;
        }
        if in_coords {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(Error::Parse(format!("line {}: expected `id x y`", lineno + 1)));
            }
            let id = f[0].parse().map_err(|_| Error::Parse(format!("line {}: bad node id", lineno + 1)))?;
            let x = num::to_f64(&num::parse(f[1])?);
            let y = num::to_f64(&num::parse(f[2])?);
            points.push((id, x, y));
            continue;
        }
        if line.starts_with("NODE_COORD_SECTION") {
            in_coords = true;
            continue;
        }
        let (key, value) = match line.split_once(':') {
            Some((k, v)) => (k.trim(), v.trim()),
            None => return Err(Error::Parse(format!("line {}: unexpected {line:?}", lineno + 1))),
        };
        match key {
            "NAME" => name = value.to_string(),
            "DIMENSION" => {
                dimension = Some(value.parse::<usize>().map_err(|_| Error::Parse("bad DIMENSION".into()))?)
            }
            "EDGE_WEIGHT_TYPE" if value != "EUC_2D" => {
                return Err(Error::Parse(format!("unsupported EDGE_WEIGHT_TYPE {value}")))
            }
            "TYPE" if value != "TSP" => return Err(Error::Parse(format!("unsupported TYPE {value}"))),
            _ => {}
        }
    }
    if !in_coords {
        return Err(Error::Parse("missing NODE_COORD_SECTION".into()));
    }
    if let Some(d) = dimension {
        if d != points.len() {
            return Err(Error::Parse(format!("DIMENSION {d} but {} coordinates", points.len())));
        }
    }
    points.sort_by_key(|p| p.0);
    Instance::from_points(&name, points.into_iter().map(|(_, x, y)| (x, y)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportEdge {
    pub u: usize,
    pub v: usize,
    #[serde(with = "crate::num::qser")]
    pub x: Q,
    #[serde(with = "crate::num::qser")]
    pub cost: Q,
}

/// Support `E₀ = E ∪ {e₀}` of a feasible subtour LP point after node
/// splitting. Parallel edges are allowed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportGraph {
    pub name: String,
    pub n: usize,
    pub edges: Vec<SupportEdge>,
    pub e0: usize,
    pub u0: usize,
    pub v0: usize,
    /// Instance vertex behind each support vertex (`u₀` and `v₀` share one).
    pub origin: Vec<usize>,
}

impl SupportGraph {
    /// Builds and validates a support graph: weights in `(0,1]`, `e₀` with
    /// `x = 1` and cost 0 joining `u₀,v₀`, and `x(δ(v)) = 2` everywhere.
    pub fn new(
        name: &str,
        n: usize,
        edges: Vec<SupportEdge>,
        e0: usize,
        origin: Vec<usize>,
    ) -> Result<SupportGraph> {
        if n > bits::MAX_VERTICES {
            return Err(Error::TooLarge(format!("{n} support vertices")));
        }
        let e = edges.get(e0).ok_or_else(|| Error::InfeasibleInput("e0 out of range".into()))?;
        let (u0, v0) = (e.u.min(e.v), e.u.max(e.v));
        let g = SupportGraph { name: name.to_string(), n, edges, e0, u0, v0, origin };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InfeasibleInput(m));
        if self.origin.len() != self.n {
            return bad("origin map has wrong length".into());
        }
        let e0 = &self.edges[self.e0];
        if e0.u == e0.v || !e0.x.is_one() || !e0.cost.is_zero() {
            return bad("e0 must join two vertices with x = 1 and cost 0".into());
        }
        let mut deg = vec![Q::zero(); self.n];
        for (i, e) in self.edges.iter().enumerate() {
            if e.u >= self.n || e.v >= self.n || e.u == e.v {
                return bad(format!("edge {i} has invalid endpoints"));
            }
            if !e.x.is_positive() || e.x > Q::one() {
                return bad(format!("edge {i} has weight {} outside (0,1]", num::format(&e.x)));
            }
            deg[e.u] += &e.x;
            deg[e.v] += &e.x;
        }
        for (v, d) in deg.iter().enumerate() {
            if *d != num::qi(2) {
                return bad(format!("x(δ({v})) = {} != 2", num::format(d)));
            }
        }
        Ok(())
    }

    /// Ids of the edges of `E` (everything but `e₀`), ascending.
    pub fn tree_edge_ids(&self) -> Vec<usize> {
        (0..self.edges.len()).filter(|&i| i != self.e0).collect()
    }

    pub fn root(&self) -> VSet {
        bits::bit(self.u0) | bits::bit(self.v0)
    }

    pub fn x(&self) -> Vec<Q> {
        self.edges.iter().map(|e| e.x.clone()).collect()
    }

    pub fn xf(&self) -> Vec<f64> {
        self.edges.iter().map(|e| num::to_f64(&e.x)).collect()
    }

    /// All edge weights over one common denominator.
    pub fn scaled(&self) -> Result<Scaled> {
        Scaled::new(&self.x()).ok_or_else(|| Error::TooLarge("LP denominators exceed 128-bit range".into()))
    }

    /// `x(δ(S))` exactly (including `e₀` if it crosses).
    pub fn cut_value(&self, s: VSet) -> Q {
        let mut v = Q::zero();
        for e in &self.edges {
            if bits::contains(s, e.u) != bits::contains(s, e.v) {
                v += &e.x;
            }
        }
        v
    }

    /// Edge ids with one endpoint in `a` and the other in `b`.
    pub fn edges_between(&self, a: VSet, b: VSet) -> Vec<usize> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| {
                (bits::contains(a, e.u) && bits::contains(b, e.v)) || (bits::contains(b, e.u) && bits::contains(a, e.v))
            })
            .map(|(i, _)| i)
            .collect()
    }

    pub fn mass(&self, ids: &[usize]) -> Q {
        ids.iter().map(|&i| self.edges[i].x.clone()).sum()
    }

    pub fn tree_cost(&self, tree: &[usize]) -> Q {
        tree.iter().map(|&i| self.edges[i].cost.clone()).sum()
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<SupportGraph> {
        let g: SupportGraph = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        g.validate()?;
        Ok(g)
    }
}

/// Splits `pivot` into `u₀,v₀` joined by `e₀` and halves every pivot edge
/// between them. An existing edge with `x = 1` and cost 0 is used as `e₀`
/// instead, with no split. Support vertex ids equal instance ids, and the
/// new vertex `v₀` gets id `n`.
pub fn split_node(inst: &Instance, lp: &LpSolution, pivot: usize) -> Result<SupportGraph> {
    if pivot >= inst.n {
        return Err(Error::InfeasibleInput(format!("pivot {pivot} is not a vertex")));
    }
    lp.check_feasible()?;
    let positive: Vec<&crate::lp::LpEdge> = lp.edges.iter().filter(|e| e.x.is_positive()).collect();
    if let Some(i) = positive.iter().position(|e| e.x.is_one() && e.cost.is_zero()) {
        let edges = positive
            .iter()
            .map(|e| SupportEdge { u: e.u, v: e.v, x: e.x.clone(), cost: e.cost.clone() })
            .collect();
        return SupportGraph::new(&inst.name, inst.n, edges, i, (0..inst.n).collect());
    }
    let (u0, v0) = (pivot, inst.n);
    let half = num::q(1, 2);
    let mut edges = Vec::new();
    for e in &positive {
        if e.u != pivot && e.v != pivot {
            edges.push(SupportEdge { u: e.u, v: e.v, x: e.x.clone(), cost: e.cost.clone() });
        } else {
            let w = if e.u == pivot { e.v } else { e.u };
            let x = &e.x * &half;
            edges.push(SupportEdge { u: u0.min(w), v: u0.max(w), x: x.clone(), cost: e.cost.clone() });
            edges.push(SupportEdge { u: w, v: v0, x, cost: e.cost.clone() });
        }
    }
    edges.push(SupportEdge { u: u0, v: v0, x: Q::one(), cost: Q::zero() });
    let mut origin: Vec<usize> = (0..inst.n).collect();
    origin.push(pivot);
    let e0 = edges.len() - 1;
    SupportGraph::new(&inst.name, inst.n + 1, edges, e0, origin)
}
