//! Vertex sets as 64-bit masks. Every structure in the crate is desk scale,
//! so a support graph never has more than 64 vertices.

pub type VSet = u64;

pub const MAX_VERTICES: usize = 64;

#[inline]
pub fn bit(v: usize) -> VSet {
    1u64 << v
}

#[inline]
pub fn contains(s: VSet, v: usize) -> bool {
    s >> v & 1 == 1
}

#[inline]
pub fn len(s: VSet) -> usize {
    s.count_ones() as usize
}

pub fn full(n: usize) -> VSet {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Vertices of `s` in increasing order.
pub fn members(s: VSet) -> impl Iterator<Item = usize> {
    let mut rest = s;
    std::iter::from_fn(move || {
        if rest == 0 {
            None
        } else {
            let v = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            Some(v)
        }
    })
}

pub fn from_members<I: IntoIterator<Item = usize>>(vs: I) -> VSet {
    vs.into_iter().fold(0, |s, v| s | bit(v))
}

/// Root-free crossing: `a∩b`, `a∖b` and `b∖a` are all nonempty.
#[inline]
pub fn crosses(a: VSet, b: VSet) -> bool {
    a & b != 0 && a & !b != 0 && b & !a != 0
}

#[inline]
pub fn subset(a: VSet, b: VSet) -> bool {
    a & !b == 0
}
