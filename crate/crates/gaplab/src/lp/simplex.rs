//! Dense exact-rational simplex tableau with Bland's rule in both the primal
//! and dual directions.
//!
//! Rows are kept in canonical form with respect to `basis`: column
//! `basis[i]` is the `i`-th unit vector and `obj[basis[i]] = 0`.

use num_traits::{One, Signed, Zero};

use crate::num::Q;
use crate::{Error, Result};

pub(crate) struct Tableau {
    pub rows: Vec<Vec<Q>>,
    pub rhs: Vec<Q>,
    /// Reduced costs.
    pub obj: Vec<Q>,
    /// Negated objective value of the current basis.
    pub neg_z: Q,
    pub basis: Vec<usize>,
    pub pivots: usize,
}

pub(crate) enum Step {
    Optimal,
    Pivoted,
}

impl Tableau {
    pub fn ncols(&self) -> usize {
        self.obj.len()
    }

    pub fn pivot(&mut self, r: usize, c: usize) {
        self.pivots += 1;
        let inv = Q::one() / &self.rows[r][c];
        if !inv.is_one() {
            for a in self.rows[r].iter_mut() {
                if !a.is_zero() {
                    *a *= &inv;
                }
            }
            self.rhs[r] *= &inv;
        }
        let nz: Vec<usize> = (0..self.ncols()).filter(|&j| !self.rows[r][j].is_zero()).collect();
        let prow = std::mem::take(&mut self.rows[r]);
        let prhs = self.rhs[r].clone();
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][c].is_zero() {
                continue;
            }
            let f = self.rows[i][c].clone();
            for &j in &nz {
                let d = &f * &prow[j];
                self.rows[i][j] -= d;
            }
            self.rhs[i] -= &f * &prhs;
        }
        if !self.obj[c].is_zero() {
            let f = self.obj[c].clone();
            for &j in &nz {
                let d = &f * &prow[j];
                self.obj[j] -= d;
            }
            self.neg_z -= &f * &prhs;
        }
        self.rows[r] = prow;
        self.basis[r] = c;
    }

    /// One primal Bland step over columns `< limit`.
    pub fn primal_step(&mut self, limit: usize) -> Result<Step> {
        let Some(c) = (0..limit).find(|&j| self.obj[j].is_negative()) else {
            return Ok(Step::Optimal);
        };
        let mut best: Option<(usize, Q)> = None;
        for i in 0..self.rows.len() {
            let a = &self.rows[i][c];
            if a.is_positive() {
                let ratio = &self.rhs[i] / a;
                let better = match &best {
                    None => true,
                    Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                };
                if better {
                    best = Some((i, ratio));
                }
            }
        }
        let (r, _) = best.ok_or(Error::Unbounded)?;
        self.pivot(r, c);
        Ok(Step::Pivoted)
    }

    pub fn primal(&mut self, limit: usize, cap: usize) -> Result<()> {
        for _ in 0..cap {
            if let Step::Optimal = self.primal_step(limit)? {
                return Ok(());
            }
        }
        Err(Error::IterationLimit(cap))
    }

    /// Dual simplex from a dual-feasible basis until the rhs is nonnegative.
    pub fn dual(&mut self, cap: usize) -> Result<()> {
        for _ in 0..cap {
            let mut leave: Option<usize> = None;
            for i in 0..self.rows.len() {
                if self.rhs[i].is_negative() && leave.map_or(true, |l| self.basis[i] < self.basis[l]) {
                    leave = Some(i);
                }
            }
            let Some(r) = leave else { return Ok(()) };
            let mut best: Option<(usize, Q)> = None;
            for j in 0..self.ncols() {
                let a = &self.rows[r][j];
                if a.is_negative() {
                    let ratio = &self.obj[j] / a.abs();
                    if best.as_ref().map_or(true, |(_, br)| ratio < *br) {
                        best = Some((j, ratio));
                    }
                }
            }
            let (c, _) = best.ok_or_else(|| Error::InfeasibleInput("cut system has no feasible point".into()))?;
            self.pivot(r, c);
        }
        Err(Error::IterationLimit(cap))
    }

    /// Appends a `≥` row `a·x ≥ b` with a fresh surplus column, expressed in
    /// the current basis. The surplus starts basic with value `a·x* − b`.
    pub fn add_ge_row(&mut self, a: &[(usize, Q)], b: &Q) {
        for row in self.rows.iter_mut() {
            row.push(Q::zero());
        }
        self.obj.push(Q::zero());
        let nc = self.ncols();
        let mut row = vec![Q::zero(); nc];
        for (j, v) in a {
            row[*j] -= v;
        }
        row[nc - 1] = Q::one();
        let mut rhs = -b.clone();
        for i in 0..self.rows.len() {
            let bcol = self.basis[i];
            if row[bcol].is_zero() {
                continue;
            }
            let f = row[bcol].clone();
            for j in 0..nc {
                if !self.rows[i][j].is_zero() {
                    let d = &f * &self.rows[i][j];
                    row[j] -= d;
                }
            }
            rhs -= &f * &self.rhs[i];
        }
        self.rows.push(row);
        self.rhs.push(rhs);
        self.basis.push(nc - 1);
    }

    /// Value of every column `< k` in the current basic solution.
    pub fn solution(&self, k: usize) -> Vec<Q> {
        let mut x = vec![Q::zero(); k];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < k {
                x[b] = self.rhs[i].clone();
            }
        }
        x
    }
}

/// Builds a Phase-I tableau for `A x = b, x ≥ 0` (with `b ≥ 0`), artificials
/// in columns `k..k+m`, and drives it to a feasible basis of the structural
/// columns. Redundant rows are removed.
pub(crate) fn feasible_start(a: Vec<Vec<Q>>, b: Vec<Q>, cost: &[Q], cap: usize) -> Result<Tableau> {
    let m = a.len();
    let k = cost.len();
    let mut rows = Vec::with_capacity(m);
    let mut obj = vec![Q::zero(); k + m];
    let mut neg_z = Q::zero();
    for (i, mut row) in a.into_iter().enumerate() {
        for j in 0..k {
            obj[j] -= &row[j];
        }
        row.extend((0..m).map(|t| if t == i { Q::one() } else { Q::zero() }));
        rows.push(row);
        neg_z -= &b[i];
    }
    let mut t = Tableau { rows, rhs: b, obj, neg_z, basis: (k..k + m).collect(), pivots: 0 };
    t.primal(k, cap)?;
    if !t.neg_z.is_zero() {
        return Err(Error::InfeasibleInput("degree system is infeasible".into()));
    }
    let mut i = 0;
    while i < t.rows.len() {
        if t.basis[i] >= k {
            match (0..k).find(|&j| !t.rows[i][j].is_zero()) {
                Some(j) => t.pivot(i, j),
                None => {
                    t.rows.remove(i);
                    t.rhs.remove(i);
                    t.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }
    for row in t.rows.iter_mut() {
        row.truncate(k);
    }
    t.obj = cost.to_vec();
    t.neg_z = Q::zero();
    for i in 0..t.rows.len() {
        let cb = cost[t.basis[i]].clone();
        if cb.is_zero() {
            continue;
        }
        for j in 0..k {
            if !t.rows[i][j].is_zero() {
                let d = &cb * &t.rows[i][j];
                t.obj[j] -= d;
            }
        }
        t.neg_z -= &cb * &t.rhs[i];
    }
    Ok(t)
}

/// Rank of a rational matrix by Gaussian elimination.
pub(crate) fn rank(mut m: Vec<Vec<Q>>) -> usize {
    let cols = m.first().map_or(0, |r| r.len());
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(r, p);
        let inv = Q::one() / &m[r][c];
        let prow: Vec<Q> = m[r].iter().map(|v| v * &inv).collect();
        for i in 0..m.len() {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in c..cols {
                    if !prow[j].is_zero() {
                        m[i][j] -= &f * &prow[j];
                    }
                }
            }
        }
        m[r] = prow;
        r += 1;
        if r == m.len() {
            break;
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{q, qi};

    #[test]
    fn small_lp_with_added_cut() {
        // min x0 + 2 x1 + 3 x2  s.t. x0 + x1 + x2 = 2, x ≥ 0.
        let mut t = feasible_start(vec![vec![qi(1), qi(1), qi(1)]], vec![qi(2)], &[qi(1), qi(2), qi(3)], 100).unwrap();
        t.primal(3, 100).unwrap();
        assert_eq!(t.solution(3), vec![qi(2), qi(0), qi(0)]);
        // x1 + x2 ≥ 1/2 moves half a unit onto x1.
        t.add_ge_row(&[(1, qi(1)), (2, qi(1))], &q(1, 2));
        t.dual(100).unwrap();
        assert_eq!(t.solution(3), vec![q(3, 2), q(1, 2), qi(0)]);
        assert_eq!(-t.neg_z.clone(), q(5, 2));
    }

    #[test]
    fn rank_detects_dependence() {
        let m = vec![vec![qi(1), qi(2)], vec![qi(2), qi(4)], vec![qi(0), qi(1)]];
        assert_eq!(rank(m), 2);
        assert_eq!(rank(vec![vec![qi(1), qi(1)], vec![qi(2), qi(2)]]), 1);
    }
}
