//! Circular arrangements of outside atoms.
//!
//! An arrangement picks a set `O` of outside atoms and a circular order on it
//! such that every member cut projects onto a contiguous interval of at least
//! two atoms that misses some atom of `O`, projections are pairwise distinct,
//! and crossing cuts have crossing projections whose union misses an atom.
//! The largest feasible `O` is taken (lexicographically first on ties); the
//! remaining atoms are inside atoms and each must be avoided by a k-cycle.

use super::{AMask, Component, Cut};
use crate::bits;
use crate::{Error, Result};

/// Order-search node budget per component.
pub const ARRANGE_BUDGET: usize = 20_000_000;
/// k-cycle search node budget per atom.
pub const KCYCLE_BUDGET: usize = 2_000_000;

/// Cuts `C₁…C_k` of one component, consecutive ones crossing, the others
/// disjoint, all avoiding `atom`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KCycle {
    pub atom: usize,
    /// Atlas cut ids in cyclic order.
    pub cuts: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Polygon {
    /// Outside atom ids `a₀…a_{m−1}` counterclockwise; `a₀` is the root when
    /// the root is outside.
    pub order: Vec<usize>,
    /// Position of every atom id, `None` for inside atoms.
    pub pos: Vec<Option<usize>>,
    pub inside: Vec<usize>,
    /// Outside projection of every local cut as positions `lo..=hi`
    /// (circular).
    pub intervals: Vec<(usize, usize)>,
    /// One witness per inside atom.
    pub witnesses: Vec<KCycle>,
    /// Every outside atom was shown to admit no k-cycle within budget.
    pub outside_verified: bool,
}

impl Polygon {
    pub fn m(&self) -> usize {
        self.order.len()
    }

    pub fn root_outside(&self) -> bool {
        self.pos[0].is_some()
    }

    /// Polygon point `i` sits between positions `i` and `i+1`; this is the
    /// point immediately left of position `lo`.
    pub fn point_before(&self, lo: usize) -> usize {
        (lo + self.m() - 1) % self.m()
    }

    /// Position mask of the outside atoms in `atoms`.
    pub fn positions(&self, atoms: AMask) -> AMask {
        bits::members(atoms).filter_map(|a| self.pos[a]).fold(0, |m, p| m | 1 << p)
    }

    /// `(lo, hi)` when the outside projection of `atoms` is a nonempty proper
    /// circular interval.
    pub fn interval(&self, atoms: AMask) -> Option<(usize, usize)> {
        circular_interval(self.positions(atoms), self.m())
    }

    pub fn atom_at(&self, p: usize) -> usize {
        self.order[p % self.m()]
    }

    /// Whether `a` crosses `s` on the left: the leftmost outside atom of
    /// `O(a ∪ s)` lies in `a`.
    pub fn crosses_on_left(&self, a: AMask, s: AMask) -> Result<bool> {
        let (lo, _) = self.interval(a | s).ok_or_else(|| {
            Error::StructureViolation(format!("union of atom sets {a:#b} and {s:#b} is not a proper interval"))
        })?;
        Ok(a >> self.order[lo] & 1 == 1)
    }

    /// Number of outside atoms in `atoms`.
    pub fn outside_count(&self, atoms: AMask) -> usize {
        bits::len(self.positions(atoms))
    }
}

/// `(lo, hi)` of a position mask forming a nonempty proper circular interval
/// on `m` positions.
pub fn circular_interval(mask: AMask, m: usize) -> Option<(usize, usize)> {
    let full = if m == 64 { u64::MAX } else { (1u64 << m) - 1 };
    if mask == 0 || mask == full {
        return None;
    }
    let has = |p: usize| mask >> (p % m) & 1 == 1;
    let starts: Vec<usize> = (0..m).filter(|&p| has(p) && !has(p + m - 1)).collect();
    if starts.len() != 1 {
        return None;
    }
    let lo = starts[0];
    let mut hi = lo;
    while has(hi + 1) {
        hi = (hi + 1) % m;
    }
    Some((lo, hi))
}

/// Conditions on `O` that do not depend on the circular order.
fn admissible(c: &Component, o: AMask) -> bool {
    let proj: Vec<AMask> = c.cut_atoms.iter().map(|&s| s & o).collect();
    for (i, &p) in proj.iter().enumerate() {
        if bits::len(p) < 2 || p == o {
            return false;
        }
        if proj[..i].contains(&p) {
            return false;
        }
        for &j in &c.adjacency[i] {
            if j < i && (!bits::crosses(p, proj[j]) || p | proj[j] == o) {
                return false;
            }
        }
    }
    true
}

/// Lexicographically first circular order of the atoms in `o` starting at
/// its lowest atom, under which every projection is contiguous.
fn find_order(c: &Component, o: AMask, budget: &mut usize) -> Option<Vec<usize>> {
    let atoms: Vec<usize> = bits::members(o).collect();
    let k = c.cut_atoms.len();
    let mut order = vec![atoms[0]];
    // Per cut: number of in/out switches along the prefix and the last bit.
    let mut switches = vec![0u8; k];
    let mut last: Vec<bool> = c.cut_atoms.iter().map(|&s| s >> atoms[0] & 1 == 1).collect();
    let mut used: AMask = 1 << atoms[0];
    fn go(
        c: &Component,
        atoms: &[usize],
        order: &mut Vec<usize>,
        used: &mut AMask,
        switches: &mut [u8],
        last: &mut [bool],
        budget: &mut usize,
    ) -> bool {
        if order.len() == atoms.len() {
            return true;
        }
        for &a in &atoms[1..] {
            if *used >> a & 1 == 1 {
                continue;
            }
            if *budget == 0 {
                return false;
            }
            *budget -= 1;
            let mut ok = true;
            let mut flipped = Vec::new();
            for (i, &s) in c.cut_atoms.iter().enumerate() {
                let b = s >> a & 1 == 1;
                if b != last[i] {
                    if switches[i] == 2 {
                        ok = false;
                        break;
                    }
                    flipped.push(i);
                }
            }
            if !ok {
                continue;
            }
            for &i in &flipped {
                switches[i] += 1;
                last[i] = !last[i];
            }
            order.push(a);
            *used |= 1 << a;
            if go(c, atoms, order, used, switches, last, budget) {
                return true;
            }
            order.pop();
            *used &= !(1 << a);
            for &i in &flipped {
                switches[i] -= 1;
                last[i] = !last[i];
            }
        }
        false
    }
    if go(c, &atoms, &mut order, &mut used, &mut switches, &mut last, budget) {
        Some(order)
    } else {
        None
    }
}

/// Combinations of `t` items choose `r`, lexicographic.
fn combinations(t: usize, r: usize) -> impl Iterator<Item = AMask> {
    let mut idx: Vec<usize> = (0..r).collect();
    let mut done = r > t;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let mask = idx.iter().fold(0u64, |m, &i| m | 1 << i);
        let mut i = r;
        loop {
            if i == 0 {
                done = true;
                break;
            }
            i -= 1;
            if idx[i] < t - r + i {
                idx[i] += 1;
                for j in i + 1..r {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(mask)
    })
}

/// Result of a bounded k-cycle search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CycleSearch {
    Found(KCycle),
    None,
    Exhausted,
}

/// Searches for a k-cycle of `c` avoiding `atom`. Each cut may enter the
/// cycle with either side; oriented cut `2i` is the stored side of local cut
/// `i` and `2i + 1` its complement.
pub fn find_k_cycle(c: &Component, atom: usize, budget: usize) -> CycleSearch {
    let full: AMask = if c.atoms.len() == 64 { !0 } else { (1 << c.atoms.len()) - 1 };
    let sides: Vec<AMask> = c.cut_atoms.iter().flat_map(|&s| [s, full & !s]).collect();
    let k = sides.len();
    let mut search = CycleDfs {
        c,
        sides: &sides,
        full,
        avoid: sides.iter().map(|&s| s >> atom & 1 == 0).collect(),
        budget,
        path: Vec::new(),
    };
    for first in 0..k {
        if !search.avoid[first] {
            continue;
        }
        search.path.clear();
        search.path.push(first);
        match search.extend() {
            Some(Some(cyc)) => {
                return CycleSearch::Found(KCycle { atom, cuts: cyc.iter().map(|&o| c.cuts[o / 2]).collect() })
            }
            Some(None) => {}
            None => return CycleSearch::Exhausted,
        }
    }
    CycleSearch::None
}

struct CycleDfs<'a> {
    c: &'a Component,
    sides: &'a [AMask],
    full: AMask,
    avoid: Vec<bool>,
    budget: usize,
    path: Vec<usize>,
}

impl CycleDfs<'_> {
    fn crosses(&self, a: usize, b: usize) -> bool {
        self.c.adjacency[a / 2].contains(&(b / 2))
    }

    fn disjoint(&self, a: usize, b: usize) -> bool {
        self.sides[a] & self.sides[b] == 0
    }

    /// `None` when the budget ran out, `Some(None)` when no cycle extends the
    /// current path.
    fn extend(&mut self) -> Option<Option<Vec<usize>>> {
        let first = self.path[0];
        let tail = *self.path.last().expect("nonempty");
        for nxt in first + 1..self.sides.len() {
            if !self.avoid[nxt] || self.path.iter().any(|&p| p / 2 == nxt / 2) || !self.crosses(tail, nxt) {
                continue;
            }
            if self.budget == 0 {
                return None;
            }
            self.budget -= 1;
            let mid = self.path.get(1..self.path.len() - 1).unwrap_or(&[]);
            if !mid.iter().all(|&p| self.disjoint(p, nxt)) {
                continue;
            }
            if self.path.len() >= 2 && self.crosses(first, nxt) {
                let mut cyc = self.path.clone();
                cyc.push(nxt);
                let union = cyc.iter().fold(0, |u, &o| u | self.sides[o]);
                if union != self.full && (cyc.len() > 3 || self.triangle_ok(&cyc)) {
                    return Some(Some(cyc));
                }
                continue;
            }
            if self.path.len() >= 2 && !self.disjoint(first, nxt) {
                continue;
            }
            self.path.push(nxt);
            match self.extend() {
                Some(None) => {}
                other => return other,
            }
            self.path.pop();
        }
        Some(None)
    }

    /// The extra condition for three cuts: no pairwise intersection lies
    /// inside the third cut.
    fn triangle_ok(&self, cyc: &[usize]) -> bool {
        (0..3).all(|i| {
            let (a, b, p) = (cyc[i], cyc[(i + 1) % 3], cyc[(i + 2) % 3]);
            self.sides[a] & self.sides[b] & !self.sides[p] != 0
        })
    }
}

/// Computes the arrangement of a non-singleton component and cross-checks
/// the inside atoms against k-cycles.
pub fn arrange_polygon(c: &mut Component, _cuts: &[Cut]) -> Result<()> {
    let t = c.atoms.len();
    let mut budget = ARRANGE_BUDGET;
    let mut found: Option<Vec<usize>> = None;
    'sizes: for r in (3..=t).rev() {
        for o in combinations(t, r) {
            if !admissible(c, o) {
                continue;
            }
            if let Some(order) = find_order(c, o, &mut budget) {
                found = Some(order);
                break 'sizes;
            }
            if budget == 0 {
                return Err(Error::NoArrangement(format!("order search budget exhausted on {t} atoms")));
            }
        }
    }
    let order = found.ok_or_else(|| {
        Error::NoArrangement(format!("no admissible subset of {t} atoms for cut sides {:?}", c.cut_atoms))
    })?;
    let mut pos = vec![None; t];
    for (p, &a) in order.iter().enumerate() {
        pos[a] = Some(p);
    }
    let inside: Vec<usize> = (0..t).filter(|&a| pos[a].is_none()).collect();
    let mut poly = Polygon { order, pos, inside, intervals: Vec::new(), witnesses: Vec::new(), outside_verified: true };
    for &s in &c.cut_atoms {
        let iv = poly.interval(s).ok_or_else(|| Error::StructureViolation("projection lost contiguity".into()))?;
        poly.intervals.push(iv);
    }
    for a in 0..t {
        match (find_k_cycle(c, a, KCYCLE_BUDGET), poly.pos[a].is_none()) {
            (CycleSearch::Found(w), true) => poly.witnesses.push(w),
            (CycleSearch::Found(w), false) => {
                return Err(Error::StructureViolation(format!("outside atom {a} is avoided by k-cycle {:?}", w.cuts)))
            }
            (CycleSearch::None, true) => {
                return Err(Error::StructureViolation(format!("inside atom {a} has no k-cycle")));
            }
            (CycleSearch::Exhausted, true) => {
                return Err(Error::StructureViolation(format!("k-cycle search for inside atom {a} ran out of budget")));
            }
            (CycleSearch::Exhausted, false) => poly.outside_verified = false,
            (CycleSearch::None, false) => {}
        }
    }
    c.polygon = Some(poly);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intervals_wrap() {
        assert_eq!(circular_interval(0b1001, 4), Some((3, 0)));
        assert_eq!(circular_interval(0b0110, 4), Some((1, 2)));
        assert_eq!(circular_interval(0b0101, 4), None);
        assert_eq!(circular_interval(0b1111, 4), None);
    }

    #[test]
    fn combinations_are_lexicographic() {
        let all: Vec<AMask> = combinations(4, 2).collect();
        assert_eq!(all, vec![0b0011, 0b0101, 0b1001, 0b0110, 0b1010, 0b1100]);
    }
}
