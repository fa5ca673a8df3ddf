//! λ-uniform spanning trees: polytope membership, marginal fitting and exact
//! sequential sampling.
//!
//! A subtour LP point usually sits on a face of the spanning tree polytope:
//! every tight set `S` (`x(E(S)) = |S|−1`) forces `T ∩ E(S)` to be a spanning
//! tree of `S`. A maximal laminar family of tight sets spans the face, and the
//! face factors into independent blocks (each laminar set with its children
//! contracted). `x` is interior on every block, so each block gets its own
//! finite λ and the fitted distribution is the product of the block
//! distributions.

use nalgebra::{DMatrix, DVector};
use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::{self, VSet};
use crate::instance::SupportGraph;
use crate::lp::mincut;
use crate::num::{self, Scaled, Q};
use crate::{Error, Result};

/// Exhaustive tight-set scans are limited to this many vertices: 24 free
/// vertices plus the split pair `u₀,v₀`.
pub const EXHAUSTIVE_LIMIT: usize = 26;
/// Exhaustive polytope membership bound; larger inputs need the fast path.
pub const POLYTOPE_EXHAUSTIVE_LIMIT: usize = 22;
/// Graphs up to this many block vertices may fall back to exact inverses.
pub const EXACT_FALLBACK_LIMIT: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct PolytopeVerdict {
    pub member: bool,
    /// A violated set when not a member (`V` itself if `x(E) ≠ |V|−1`).
    pub witness: Option<VSet>,
}

/// Incremental `x(E(S))` over all subsets in Gray-code order. Calls `visit`
/// with `(S, x(E(S))·den)`.
fn scan_inner_mass(n: usize, edges: &[(usize, usize)], sc: &Scaled, mut visit: impl FnMut(VSet, i128)) {
    let mut adj: Vec<Vec<(usize, i128)>> = vec![Vec::new(); n];
    for (i, &(u, v)) in edges.iter().enumerate() {
        adj[u].push((v, sc.num[i]));
        adj[v].push((u, sc.num[i]));
    }
    let mut s: VSet = 0;
    let mut mass: i128 = 0;
    for step in 1u64..(1u64 << n) {
        let v = step.trailing_zeros() as usize;
        let inc: i128 = adj[v].iter().filter(|(u, _)| bits::contains(s, *u)).map(|(_, w)| *w).sum();
        if bits::contains(s, v) {
            s &= !bits::bit(v);
            mass -= inc;
        } else {
            s |= bits::bit(v);
            mass += inc;
        }
        visit(s, mass);
    }
}

fn scaled(x: &[Q]) -> Result<Scaled> {
    Scaled::new(x).ok_or_else(|| Error::TooLarge("weights exceed 128-bit common denominator".into()))
}

/// Membership in `{x ≥ 0 : x(E) = |V|−1, x(E(S)) ≤ |S|−1}`. Exhaustive up to
/// 22 vertices. Above that, only weights that are a subtour point minus one
/// unit edge (two vertices of degree 1, all others of degree 2) are decided,
/// by the exact minimum cut of the completed point.
pub fn check_spanning_tree_polytope(n: usize, edges: &[(usize, usize)], x: &[Q]) -> Result<PolytopeVerdict> {
    if x.iter().any(|v| v.is_negative()) {
        return Err(Error::BadParams("negative edge weight".into()));
    }
    let total: Q = x.iter().cloned().sum();
    if total != num::qi(n as i64 - 1) {
        return Ok(PolytopeVerdict { member: false, witness: Some(bits::full(n)) });
    }
    if n <= POLYTOPE_EXHAUSTIVE_LIMIT {
        let sc = scaled(x)?;
        let mut witness = None;
        scan_inner_mass(n, edges, &sc, |s, mass| {
            if witness.is_none() && mass > (bits::len(s) as i128 - 1) * sc.den {
                witness = Some(s);
            }
        });
        return Ok(PolytopeVerdict { member: witness.is_none(), witness });
    }
    let mut deg = vec![Q::zero(); n];
    for (&(u, v), w) in edges.iter().zip(x) {
        deg[u] += w;
        deg[v] += w;
    }
    let ends: Vec<usize> = (0..n).filter(|&v| deg[v].is_one()).collect();
    if ends.len() != 2 || deg.iter().any(|d| !d.is_one() && *d != num::qi(2)) {
        return Err(Error::TooLarge(format!("{n} vertices without a subtour completion")));
    }
    let mut completed: Vec<(usize, usize, Q)> = edges.iter().zip(x).map(|(&(u, v), w)| (u, v, w.clone())).collect();
    completed.push((ends[0], ends[1], Q::one()));
    let cut = mincut::min_cut(&mincut::weight_matrix(n, &completed)).expect("n > 22");
    if cut.value >= num::qi(2) {
        Ok(PolytopeVerdict { member: true, witness: None })
    } else {
        Err(Error::TooLarge(format!("{n} vertices and the completion has a cut below 2")))
    }
}

/// Every tight set with `2 ≤ |S| < n`.
pub fn tight_sets(n: usize, edges: &[(usize, usize)], x: &[Q]) -> Result<Vec<VSet>> {
    if n > EXHAUSTIVE_LIMIT {
        return Err(Error::TooLarge(format!("tight-set scan on {n} vertices")));
    }
    let sc = scaled(x)?;
    let full = bits::full(n);
    let mut out = Vec::new();
    scan_inner_mass(n, edges, &sc, |s, mass| {
        if s != full && bits::len(s) >= 2 && mass == (bits::len(s) as i128 - 1) * sc.den {
            out.push(s);
        }
    });
    Ok(out)
}

/// Greedy maximal laminar subfamily, smallest sets first.
pub fn maximal_laminar(mut sets: Vec<VSet>) -> Vec<VSet> {
    sets.sort_by_key(|&s| (bits::len(s), s));
    let mut chosen: Vec<VSet> = Vec::new();
    for s in sets {
        if chosen.iter().all(|&c| !bits::crosses(c, s)) {
            chosen.push(s);
        }
    }
    chosen
}

/// One factor of the face: a laminar set with its children contracted.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Block {
    pub set: VSet,
    /// Number of contracted vertices.
    pub k: usize,
    /// Indices into `Lambda::edges`.
    pub edges: Vec<usize>,
    /// Contracted endpoints per block edge.
    pub ends: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitReport {
    pub marginals: Vec<f64>,
    pub max_deviation: f64,
    pub iterations: usize,
    pub exact_fallbacks: usize,
}

/// Fitted weights. `ids[i]` is the caller's id of edge `i`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Lambda {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    pub ids: Vec<usize>,
    pub log_lambda: Vec<f64>,
    pub target: Vec<f64>,
    pub blocks: Vec<Block>,
    pub report: FitReport,
}

fn build_blocks(n: usize, edges: &[(usize, usize)], laminar: &[VSet]) -> Vec<Block> {
    let mut family: Vec<VSet> = laminar.to_vec();
    family.push(bits::full(n));
    family.sort_by_key(|&s| (bits::len(s), s));
    let mut blocks = Vec::with_capacity(family.len());
    for (fi, &set) in family.iter().enumerate() {
        // Children: maximal members strictly inside `set`.
        let inner: Vec<VSet> = family[..fi].iter().copied().filter(|&c| c != set && bits::subset(c, set)).collect();
        let children: Vec<VSet> =
            inner.iter().copied().filter(|&c| !inner.iter().any(|&d| d != c && bits::subset(c, d))).collect();
        let mut local = vec![usize::MAX; n];
        let mut k = 0;
        for &c in &children {
            for v in bits::members(c) {
                local[v] = k;
            }
            k += 1;
        }
        for v in bits::members(set) {
            if local[v] == usize::MAX {
                local[v] = k;
                k += 1;
            }
        }
        let mut bedges = Vec::new();
        let mut ends = Vec::new();
        for (i, &(u, v)) in edges.iter().enumerate() {
            if bits::contains(set, u) && bits::contains(set, v) && local[u] != local[v] {
                let owned_lower = family[..fi].iter().any(|&c| bits::contains(c, u) && bits::contains(c, v));
                if !owned_lower {
                    bedges.push(i);
                    ends.push((local[u], local[v]));
                }
            }
        }
        blocks.push(Block { set, k, edges: bedges, ends });
    }
    blocks
}

/// Inverse of the Laplacian with the last vertex removed.
fn reduced_inverse(k: usize, ends: &[(usize, usize)], lam: &[f64], fallbacks: &mut usize) -> Result<DMatrix<f64>> {
    let d = k - 1;
    let mut l = DMatrix::<f64>::zeros(d, d);
    for (&(a, b), &w) in ends.iter().zip(lam) {
        if a < d {
            l[(a, a)] += w;
        }
        if b < d {
            l[(b, b)] += w;
        }
        if a < d && b < d {
            l[(a, b)] -= w;
            l[(b, a)] -= w;
        }
    }
    let well_conditioned = |m: &DMatrix<f64>| {
        let ev = m.clone().symmetric_eigen().eigenvalues;
        let (lo, hi) = ev.iter().fold((f64::INFINITY, 0f64), |(lo, hi), &e| (lo.min(e), hi.max(e.abs())));
        lo > 0.0 && lo / hi > 1e-12
    };
    if well_conditioned(&l) {
        if let Some(ch) = l.clone().cholesky() {
            return Ok(ch.inverse());
        }
    }
    if k > EXACT_FALLBACK_LIMIT {
        return Err(Error::SingularLaplacian(format!("ill-conditioned block on {k} vertices")));
    }
    *fallbacks += 1;
    let mut m: Vec<Vec<Q>> = (0..d)
        .map(|i| (0..d).map(|j| num::from_f64(l[(i, j)])).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let mut inv: Vec<Vec<Q>> = (0..d).map(|i| (0..d).map(|j| if i == j { Q::one() } else { Q::zero() }).collect()).collect();
    for c in 0..d {
        let p = (c..d)
            .find(|&r| !m[r][c].is_zero())
            .ok_or_else(|| Error::SingularLaplacian("disconnected block".into()))?;
        m.swap(c, p);
        inv.swap(c, p);
        let f = Q::one() / &m[c][c];
        for j in 0..d {
            m[c][j] *= &f;
            inv[c][j] *= &f;
        }
        for r in 0..d {
            if r != c && !m[r][c].is_zero() {
                let g = m[r][c].clone();
                for j in 0..d {
                    let a = &g * &m[c][j];
                    m[r][j] -= a;
                    let b = &g * &inv[c][j];
                    inv[r][j] -= b;
                }
            }
        }
    }
    Ok(DMatrix::from_fn(d, d, |i, j| num::to_f64(&inv[i][j])))
}

fn incidence(k: usize, a: usize, b: usize) -> DVector<f64> {
    let mut v = DVector::zeros(k - 1);
    if a < k - 1 {
        v[a] += 1.0;
    }
    if b < k - 1 {
        v[b] -= 1.0;
    }
    v
}

/// Marginals and the transfer matrix `Y_ef = √(λ_eλ_f)·b_eᵀ M b_f` of one block.
fn block_moments(block: &Block, lam: &[f64], fallbacks: &mut usize) -> Result<(Vec<f64>, DMatrix<f64>, f64)> {
    let m = block.edges.len();
    if block.k == 1 {
        return Ok((Vec::new(), DMatrix::zeros(0, 0), 0.0));
    }
    let minv = reduced_inverse(block.k, &block.ends, lam, fallbacks)?;
    let b: Vec<DVector<f64>> = block.ends.iter().map(|&(a, c)| incidence(block.k, a, c)).collect();
    let mb: Vec<DVector<f64>> = b.iter().map(|v| &minv * v).collect();
    let mut y = DMatrix::zeros(m, m);
    for e in 0..m {
        for f in e..m {
            let v = (lam[e] * lam[f]).sqrt() * b[e].dot(&mb[f]);
            y[(e, f)] = v;
            y[(f, e)] = v;
        }
    }
    let marg = (0..m).map(|e| y[(e, e)]).collect();
    // log det of the reduced Laplacian = −log det M.
    let logdet = match minv.clone().cholesky() {
        Some(ch) => -2.0 * ch.l().diagonal().iter().map(|d| d.ln()).sum::<f64>(),
        None => f64::NAN,
    };
    Ok((marg, y, logdet))
}

/// Damped Newton on `F(γ) = log det L̃(e^γ) − Σ x_e γ_e`, the convex dual of
/// the entropy program on one block.
fn fit_block(block: &Block, x: &[f64], gamma: &mut [f64], tol: f64, report: &mut FitReport) -> Result<()> {
    const MAX_ITERS: usize = 200;
    let m = block.edges.len();
    if m == 0 {
        return Ok(());
    }
    let lam = |g: &[f64]| g.iter().map(|v| v.exp()).collect::<Vec<_>>();
    let objective = |logdet: f64, g: &[f64]| logdet - g.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    let (mut marg, mut y, mut logdet) = block_moments(block, &lam(gamma), &mut report.exact_fallbacks)?;
    let mut best = f64::INFINITY;
    for it in 0..=MAX_ITERS {
        let grad: Vec<f64> = marg.iter().zip(x).map(|(p, t)| p - t).collect();
        let dev = grad.iter().fold(0f64, |a, g| a.max(g.abs()));
        best = best.min(dev);
        if dev <= tol {
            return Ok(());
        }
        if it == MAX_ITERS {
            break;
        }
        report.iterations += 1;
        let mut h = DMatrix::from_fn(m, m, |e, f| -y[(e, f)] * y[(e, f)]);
        for e in 0..m {
            h[(e, e)] += marg[e];
        }
        let g = DVector::from_vec(grad.clone());
        let mut ridge = 1e-12;
        let dir = loop {
            let mut hr = h.clone();
            for e in 0..m {
                hr[(e, e)] += ridge;
            }
            if let Some(ch) = hr.cholesky() {
                break -ch.solve(&g);
            }
            ridge *= 100.0;
            if ridge > 1.0 {
                break -g.clone();
            }
        };
        let f0 = objective(logdet, gamma);
        let slope = g.dot(&dir);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = gamma.iter().zip(dir.iter()).map(|(a, d)| a + step * d).collect();
            if let Ok((mt, yt, lt)) = block_moments(block, &lam(&trial), &mut report.exact_fallbacks) {
                let ft = objective(lt, &trial);
                if ft.is_finite() && ft <= f0 + 1e-4 * step * slope + 1e-13 * f0.abs().max(1.0) {
                    gamma.copy_from_slice(&trial);
                    marg = mt;
                    y = yt;
                    logdet = lt;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(Error::NoConvergence { iterations: report.iterations, best_deviation: best })
}

impl Lambda {
    /// Plain λ-uniform distribution over all spanning trees of `(n, edges)`.
    pub fn from_weights(n: usize, edges: Vec<(usize, usize)>, log_lambda: Vec<f64>) -> Lambda {
        let ids = (0..edges.len()).collect();
        let blocks = build_blocks(n, &edges, &[]);
        let m = edges.len();
        Lambda {
            n,
            edges,
            ids,
            log_lambda,
            target: Vec::new(),
            blocks,
            report: FitReport { marginals: vec![f64::NAN; m], max_deviation: f64::NAN, iterations: 0, exact_fallbacks: 0 },
        }
    }

    pub fn lambda(&self) -> Vec<f64> {
        self.log_lambda.iter().map(|g| g.exp()).collect()
    }
}

/// Fits λ so that the λ-uniform marginals match `x` to within `eps_fit` in
/// max norm. `x` must lie in the spanning tree polytope.
pub fn fit_lambda(n: usize, edges: &[(usize, usize)], x: &[Q], eps_fit: f64) -> Result<Lambda> {
    let verdict = check_spanning_tree_polytope(n, edges, x)?;
    if !verdict.member {
        return Err(Error::InfeasibleInput(format!(
            "x is outside the spanning tree polytope (witness {:?})",
            bits::members(verdict.witness.unwrap_or(0)).collect::<Vec<_>>()
        )));
    }
    // Zero-weight edges never appear in a tree of the face.
    let keep: Vec<usize> = (0..edges.len()).filter(|&i| x[i].is_positive()).collect();
    let kedges: Vec<(usize, usize)> = keep.iter().map(|&i| edges[i]).collect();
    let kx: Vec<Q> = keep.iter().map(|&i| x[i].clone()).collect();
    let laminar = maximal_laminar(tight_sets(n, &kedges, &kx)?);
    let blocks = build_blocks(n, &kedges, &laminar);
    let xf: Vec<f64> = kx.iter().map(num::to_f64).collect();
    let mut gamma = vec![0.0; kedges.len()];
    let mut report = FitReport { marginals: Vec::new(), max_deviation: 0.0, iterations: 0, exact_fallbacks: 0 };
    for b in &blocks {
        let bx: Vec<f64> = b.edges.iter().map(|&i| xf[i]).collect();
        let mut bg: Vec<f64> = vec![0.0; b.edges.len()];
        fit_block(b, &bx, &mut bg, eps_fit / 10.0, &mut report)?;
        for (j, &i) in b.edges.iter().enumerate() {
            gamma[i] = bg[j];
        }
    }
    let mut lam = Lambda {
        n,
        edges: kedges,
        ids: keep,
        log_lambda: gamma,
        target: xf,
        blocks,
        report,
    };
    let marg = tree_marginals(&lam)?;
    lam.report.max_deviation = marg.iter().zip(&lam.target).fold(0f64, |a, (p, t)| a.max((p - t).abs()));
    lam.report.marginals = marg;
    if lam.report.max_deviation > eps_fit {
        return Err(Error::NoConvergence { iterations: lam.report.iterations, best_deviation: lam.report.max_deviation });
    }
    Ok(lam)
}

/// `fit_lambda` on the edges of `E` (everything but `e₀`) of a support graph.
pub fn fit_support(g: &SupportGraph, eps_fit: f64) -> Result<Lambda> {
    let ids = g.tree_edge_ids();
    let edges: Vec<(usize, usize)> = ids.iter().map(|&i| (g.edges[i].u, g.edges[i].v)).collect();
    let x: Vec<Q> = ids.iter().map(|&i| g.edges[i].x.clone()).collect();
    let mut lam = fit_lambda(g.n, &edges, &x, eps_fit)?;
    lam.ids = lam.ids.iter().map(|&i| ids[i]).collect();
    Ok(lam)
}

/// Marginals `P[e ∈ T]` of the fitted distribution, in `Lambda::edges` order.
pub fn tree_marginals(lambda: &Lambda) -> Result<Vec<f64>> {
    let lam = lambda.lambda();
    let mut out = vec![0.0; lambda.edges.len()];
    let mut fallbacks = 0;
    for b in &lambda.blocks {
        let bl: Vec<f64> = b.edges.iter().map(|&i| lam[i]).collect();
        if b.k > 1 && b.edges.is_empty() {
            return Err(Error::SingularLaplacian("block without edges".into()));
        }
        let (marg, _, _) = block_moments(b, &bl, &mut fallbacks)?;
        for (j, &i) in b.edges.iter().enumerate() {
            out[i] = marg[j];
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeSample {
    /// Sorted caller edge ids.
    pub edges: Vec<usize>,
    pub seed: u64,
    pub draw: u64,
    /// Vertices of odd degree in `T ∪ {e₀}` (in `T` alone for plain graphs).
    pub odd: VSet,
}

/// Draws one tree by conditioning edges in ascending order, using one uniform
/// per edge. `M = L̃⁻¹` is updated by Sherman–Morrison on every decision.
pub fn sample_tree_edges<R: Rng + ?Sized>(lambda: &Lambda, rng: &mut R) -> Result<Vec<usize>> {
    let lam = lambda.lambda();
    let mut chosen = Vec::with_capacity(lambda.n.saturating_sub(1));
    let mut fallbacks = 0;
    let mut order: Vec<(usize, usize, usize)> = Vec::new();
    for (bi, b) in lambda.blocks.iter().enumerate() {
        for (j, &i) in b.edges.iter().enumerate() {
            order.push((lambda.ids[i], bi, j));
        }
    }
    order.sort();
    let mut inv: Vec<Option<DMatrix<f64>>> = vec![None; lambda.blocks.len()];
    let mut picked = vec![0usize; lambda.blocks.len()];
    for b in 0..lambda.blocks.len() {
        let blk = &lambda.blocks[b];
        if blk.k > 1 {
            let bl: Vec<f64> = blk.edges.iter().map(|&i| lam[i]).collect();
            inv[b] = Some(reduced_inverse(blk.k, &blk.ends, &bl, &mut fallbacks)?);
        }
    }
    for (id, bi, j) in order {
        let blk = &lambda.blocks[bi];
        let u: f64 = rng.gen();
        let m = inv[bi].as_mut().expect("block with edges has k > 1");
        let (a, c) = blk.ends[j];
        let b = incidence(blk.k, a, c);
        let l = lam[blk.edges[j]];
        let mb = &*m * &b;
        let r = b.dot(&mb);
        let p = (l * r).clamp(0.0, 1.0);
        let take = if picked[bi] == blk.k - 1 {
            false
        } else if p > 1.0 - 1e-9 {
            true
        } else if p < 1e-9 {
            false
        } else {
            u < p
        };
        if take {
            *m -= &mb * mb.transpose() / r;
            picked[bi] += 1;
            chosen.push(id);
        } else if p >= 1e-9 {
            *m += &mb * mb.transpose() * (l / (1.0 - l * r));
        }
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// Checks that `tree` (edge indices into `edges`) is a spanning tree on `n`.
pub fn is_spanning_tree(n: usize, edges: &[(usize, usize)], tree: &[usize]) -> bool {
    if tree.len() + 1 != n {
        return false;
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], v: usize) -> usize {
        let mut r = v;
        while p[r] != r {
            r = p[r];
        }
        let mut c = v;
        while p[c] != r {
            let nx = p[c];
            p[c] = r;
            c = nx;
        }
        r
    }
    for &e in tree {
        let (u, v) = edges[e];
        let (a, b) = (find(&mut parent, u), find(&mut parent, v));
        if a == b {
            return false;
        }
        parent[a] = b;
    }
    true
}

/// Samples and certifies a tree; a numerically broken draw is redrawn with
/// freshly factored inverses from the same stream position.
pub fn sample_tree<R: Rng + Clone>(lambda: &Lambda, rng: &mut R, seed: u64, draw: u64, e0: Option<(usize, usize)>) -> Result<TreeSample> {
    let start = rng.clone();
    let mut tree = sample_tree_edges(lambda, rng)?;
    let by_id: std::collections::HashMap<usize, (usize, usize)> =
        lambda.ids.iter().zip(&lambda.edges).map(|(&i, &e)| (i, e)).collect();
    let mut ends: Vec<(usize, usize)> = tree.iter().map(|i| by_id[i]).collect();
    let idx: Vec<usize> = (0..ends.len()).collect();
    if !is_spanning_tree(lambda.n, &ends, &idx) {
        *rng = start;
        tree = sample_tree_refactored(lambda, rng)?;
        ends = tree.iter().map(|i| by_id[i]).collect();
        if !is_spanning_tree(lambda.n, &ends, &idx) {
            return Err(Error::SingularLaplacian("conditioning lost the spanning-tree certificate".into()));
        }
    }
    let mut odd: VSet = 0;
    for &(u, v) in ends.iter().chain(e0.iter()) {
        odd ^= bits::bit(u) ^ bits::bit(v);
    }
    Ok(TreeSample { edges: tree, seed, draw, odd })
}

/// Slow path: recompute every conditional marginal from scratch.
fn sample_tree_refactored<R: Rng + ?Sized>(lambda: &Lambda, rng: &mut R) -> Result<Vec<usize>> {
    let lam = lambda.lambda();
    let mut order: Vec<(usize, usize, usize)> = Vec::new();
    for (bi, b) in lambda.blocks.iter().enumerate() {
        for (j, &i) in b.edges.iter().enumerate() {
            order.push((lambda.ids[i], bi, j));
        }
    }
    order.sort();
    // Per block: contracted labels and surviving edges.
    let mut label: Vec<Vec<usize>> = lambda.blocks.iter().map(|b| (0..b.k).collect()).collect();
    let mut alive: Vec<Vec<bool>> = lambda.blocks.iter().map(|b| vec![true; b.edges.len()]).collect();
    let mut chosen = Vec::new();
    let mut fallbacks = 0;
    for (id, bi, j) in order {
        let blk = &lambda.blocks[bi];
        let u: f64 = rng.gen();
        let lab = &label[bi];
        let (a, c) = (lab[blk.ends[j].0], lab[blk.ends[j].1]);
        alive[bi][j] = false;
        if a == c {
            continue;
        }
        // Relabel contracted vertices densely, then evaluate P[e ∈ T | history].
        let mut dense = vec![usize::MAX; blk.k];
        let mut k = 0;
        for &l in lab.iter() {
            if dense[l] == usize::MAX {
                dense[l] = k;
                k += 1;
            }
        }
        let mut ends = vec![(dense[a], dense[c])];
        let mut w = vec![lam[blk.edges[j]]];
        for (t, &(x, y)) in blk.ends.iter().enumerate() {
            if alive[bi][t] && lab[x] != lab[y] {
                ends.push((dense[lab[x]], dense[lab[y]]));
                w.push(lam[blk.edges[t]]);
            }
        }
        let sub = Block { set: 0, k, edges: (0..ends.len()).collect(), ends };
        let (marg, _, _) = block_moments(&sub, &w, &mut fallbacks)?;
        if u < marg[0] {
            chosen.push(id);
            let l = &mut label[bi];
            for v in l.iter_mut() {
                if *v == c {
                    *v = a;
                }
            }
        }
    }
    chosen.sort_unstable();
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{q, qi};

    #[test]
    fn polytope_examples() {
        let path = [(0, 1), (1, 2), (2, 3)];
        assert!(check_spanning_tree_polytope(4, &path, &[qi(1), qi(1), qi(1)]).unwrap().member);
        let k3 = [(0, 1), (1, 2), (0, 2)];
        assert!(check_spanning_tree_polytope(3, &k3, &[q(2, 3), q(2, 3), q(2, 3)]).unwrap().member);
        let v = check_spanning_tree_polytope(3, &k3, &[qi(1), qi(1), qi(1)]).unwrap();
        assert!(!v.member);
        assert_eq!(v.witness, Some(0b111));
    }

    #[test]
    fn path_needs_no_iterations() {
        let path = [(0, 1), (1, 2), (2, 3)];
        let lam = fit_lambda(4, &path, &[qi(1), qi(1), qi(1)], 1e-6).unwrap();
        assert_eq!(lam.report.iterations, 0);
        assert!(lam.report.marginals.iter().all(|m| (m - 1.0).abs() < 1e-12));
    }

    #[test]
    fn k3_uniform() {
        let k3 = [(0, 1), (1, 2), (0, 2)];
        let lam = fit_lambda(3, &k3, &[q(2, 3), q(2, 3), q(2, 3)], 1e-6).unwrap();
        assert!(lam.report.marginals.iter().all(|m| (m - 2.0 / 3.0).abs() < 1e-9));
        let spread = lam.log_lambda.iter().fold(0f64, |a, g| a.max((g - lam.log_lambda[0]).abs()));
        assert!(spread < 1e-9);
    }

    #[test]
    fn unweighted_marginals() {
        let k4: Vec<(usize, usize)> = vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
        let m = tree_marginals(&Lambda::from_weights(4, k4, vec![0.0; 6])).unwrap();
        assert!(m.iter().all(|p| (p - 0.5).abs() < 1e-12));
        let star: Vec<(usize, usize)> = (1..5).map(|v| (0, v)).collect();
        let m = tree_marginals(&Lambda::from_weights(5, star, vec![0.3, -1.0, 2.0, 0.0])).unwrap();
        assert!(m.iter().all(|p| (p - 1.0).abs() < 1e-12));
    }
}
