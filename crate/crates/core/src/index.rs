//! Spacetime index bookkeeping.
//!
//! Indices are opaque labels; a label occurring twice in a term denotes an
//! Einstein contraction with the Euclidean metric `delta`.  A label occurring
//! once is free, and more than two occurrences is malformed.  The engine
//! works in four Euclidean dimensions throughout, so every contracted pair
//! traces to `delta^{aa} = 4` when closed on itself.

use serde::Serialize;
use std::fmt;

/// Number of Euclidean spacetime dimensions.
pub const DIM: i64 = 4;

/// An index label.  Values carry no meaning beyond equality; canonical
/// relabeling assigns final values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Index(pub u32);

impl fmt::Display for Index {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Small labels print as letters for readability, the rest numerically.
        const NAMES: [&str; 8] = ["mu", "nu", "rho", "si", "al", "be", "ga", "de"];
        match NAMES.get(self.0 as usize) {
            Some(name) => write!(f, "{name}"),
            None => write!(f, "i{}", self.0),
        }
    }
}

/// A multiset of derivative indices acting on a single field atom.
///
/// Partial derivatives commute, so only the multiset matters; the list is
/// kept sorted to give every atom a unique normal form.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct DerivSet(Vec<Index>);

impl DerivSet {
    /// No derivatives.
    pub fn empty() -> Self {
        DerivSet(Vec::new())
    }

    /// Build from any order; stores sorted.
    pub fn from_indices(mut v: Vec<Index>) -> Self {
        v.sort();
        DerivSet(v)
    }

    /// Add one derivative index.
    pub fn push(&mut self, idx: Index) {
        self.0.push(idx);
        self.0.sort();
    }

    /// Number of derivatives.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// True when no derivatives act.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Iterate in sorted order.
    pub fn iter(&self) -> impl Iterator<Item = Index> + '_ {
        self.0.iter().copied()
    }

    /// Sorted slice of the labels.
    pub fn as_slice(&self) -> &[Index] {
        &self.0
    }

    /// Apply a relabeling map to every label, restoring sorted order.
    pub fn relabel(&self, map: impl Fn(Index) -> Index) -> Self {
        DerivSet::from_indices(self.0.iter().map(|&i| map(i)).collect())
    }
}

impl fmt::Display for DerivSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for idx in &self.0 {
            write!(f, "d[{idx}]")?;
        }
        Ok(())
    }
}

/// Hands out index labels never used before within one construction scope.
#[derive(Debug, Clone)]
pub struct IndexAllocator {
    next: u32,
}

impl IndexAllocator {
    /// Start allocating strictly above `floor`.
    pub fn above(floor: u32) -> Self {
        IndexAllocator { next: floor + 1 }
    }

    /// Start at zero for a fresh expression.
    pub fn new() -> Self {
        IndexAllocator { next: 0 }
    }

    /// Produce the next unused label.
    pub fn fresh(&mut self) -> Index {
        let idx = Index(self.next);
        self.next += 1;
        idx
    }
}

impl Default for IndexAllocator {
    fn default() -> Self {
        IndexAllocator::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deriv_set_ignores_insertion_order() {
        let a = DerivSet::from_indices(vec![Index(3), Index(1), Index(1)]);
        let b = DerivSet::from_indices(vec![Index(1), Index(3), Index(1)]);
        assert_eq!(a, b);
        assert_eq!(a.as_slice(), &[Index(1), Index(1), Index(3)]);
    }

    #[test]
    fn allocator_never_repeats() {
        let mut alloc = IndexAllocator::above(5);
        let a = alloc.fresh();
        let b = alloc.fresh();
        assert_ne!(a, b);
        assert!(a.0 > 5 && b.0 > 5);
    }

    #[test]
    fn display_names_are_stable() {
        assert_eq!(Index(0).to_string(), "mu");
        assert_eq!(Index(1).to_string(), "nu");
        assert_eq!(Index(9).to_string(), "i9");
    }
}
