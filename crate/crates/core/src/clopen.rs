//! Canonical clopen subsets of Cantor space.
//!
//! A clopen set is a finite union of cylinders. The canonical representation
//! used throughout this crate is the fully merged prefix-free antichain: no
//! element is a prefix of another, and no two sibling words `x0`, `x1` are
//! both present (they would merge into `x`). The canonical form is unique per
//! set, so structural equality of [`ClopenSet`] values is set equality — the
//! property the test suites and certificates lean on.

use std::collections::BTreeSet;
use std::fmt;

use crate::bits::BitString;

/// Three-valued answer for membership questions asked at finite depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ternary {
    True,
    False,
    /// The queried prefix is too short to settle the question.
    Undetermined,
}

impl Ternary {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Ternary::True
        } else {
            Ternary::False
        }
    }

    /// Kleene conjunction.
    pub fn and(self, other: Ternary) -> Ternary {
        match (self, other) {
            (Ternary::False, _) | (_, Ternary::False) => Ternary::False,
            (Ternary::True, Ternary::True) => Ternary::True,
            _ => Ternary::Undetermined,
        }
    }

    /// Kleene disjunction.
    pub fn or(self, other: Ternary) -> Ternary {
        match (self, other) {
            (Ternary::True, _) | (_, Ternary::True) => Ternary::True,
            (Ternary::False, Ternary::False) => Ternary::False,
            _ => Ternary::Undetermined,
        }
    }

}

/// Kleene negation.
impl std::ops::Not for Ternary {
    type Output = Ternary;

    fn not(self) -> Ternary {
        match self {
            Ternary::True => Ternary::False,
            Ternary::False => Ternary::True,
            Ternary::Undetermined => Ternary::Undetermined,
        }
    }
}

/// Binary/unary boolean operations on clopen sets, as named by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoolOp {
    Union,
    Intersection,
    Complement,
    SymmetricDifference,
}

/// Error from [`ClopenSet::refine_to_depth`]: an antichain element is longer
/// than the requested depth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthTooSmall {
    pub requested: usize,
    pub element_len: usize,
}

impl fmt::Display for DepthTooSmall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "depth {} is smaller than an antichain element of length {}",
            self.requested, self.element_len
        )
    }
}

impl std::error::Error for DepthTooSmall {}

/// A clopen subset of Cantor space in canonical antichain form.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ClopenSet {
    /// Sorted, prefix-free, fully merged.
    antichain: Vec<BitString>,
}

impl ClopenSet {
    /// The empty set.
    pub fn empty() -> Self {
        ClopenSet { antichain: vec![] }
    }

    /// All of Cantor space: the antichain `{e}`.
    pub fn full() -> Self {
        ClopenSet {
            antichain: vec![BitString::empty()],
        }
    }

    /// The single cylinder `xΩ`.
    pub fn cylinder(x: &BitString) -> Self {
        ClopenSet {
            antichain: vec![x.clone()],
        }
    }

    /// Canonicalizes an arbitrary finite union of cylinders: sorts, absorbs
    /// prefixed elements, and merges sibling pairs to fixpoint.
    pub fn canonicalize<I: IntoIterator<Item = BitString>>(strings: I) -> Self {
        let sorted: BTreeSet<BitString> = strings.into_iter().collect();

        // Absorption. In lexicographic order all extensions of a kept word
        // form a contiguous run immediately after it, so comparing against
        // the last kept word suffices.
        let mut kept: Vec<BitString> = Vec::with_capacity(sorted.len());
        for s in sorted {
            if let Some(last) = kept.last() {
                if last.is_prefix_of(&s) {
                    continue;
                }
            }
            kept.push(s);
        }

        // Sibling merging. Merging `x0,x1 -> x` keeps the vector sorted in
        // place and can only enable further merges, never new absorptions.
        loop {
            let mut changed = false;
            let mut merged: Vec<BitString> = Vec::with_capacity(kept.len());
            let mut i = 0;
            while i < kept.len() {
                if i + 1 < kept.len() {
                    if let (Some(parent), Some(sib)) = (kept[i].parent(), kept[i].sibling()) {
                        if kept[i + 1] == sib {
                            merged.push(parent);
                            i += 2;
                            changed = true;
                            continue;
                        }
                    }
                }
                merged.push(kept[i].clone());
                i += 1;
            }
            kept = merged;
            if !changed {
                break;
            }
        }

        ClopenSet { antichain: kept }
    }

    /// The canonical antichain, sorted lexicographically.
    pub fn antichain(&self) -> &[BitString] {
        &self.antichain
    }

    pub fn is_empty(&self) -> bool {
        self.antichain.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.antichain.len() == 1 && self.antichain[0].is_empty()
    }

    /// Length of the longest antichain element (0 for the empty set); every
    /// membership question is settled by a prefix of this length.
    pub fn max_len(&self) -> usize {
        self.antichain.iter().map(BitString::len).max().unwrap_or(0)
    }

    pub fn union(&self, other: &ClopenSet) -> ClopenSet {
        ClopenSet::canonicalize(
            self.antichain
                .iter()
                .chain(other.antichain.iter())
                .cloned(),
        )
    }

    pub fn intersection(&self, other: &ClopenSet) -> ClopenSet {
        // Two cylinders meet iff one address prefixes the other; the deeper
        // one is the intersection.
        let mut pieces = Vec::new();
        for a in &self.antichain {
            for b in &other.antichain {
                if a.is_prefix_of(b) {
                    pieces.push(b.clone());
                } else if b.is_prefix_of(a) {
                    pieces.push(a.clone());
                }
            }
        }
        ClopenSet::canonicalize(pieces)
    }

    pub fn complement(&self) -> ClopenSet {
        fn go(antichain: &[BitString], depth: usize, prefix: &mut BitString, out: &mut Vec<BitString>) {
            if antichain.iter().any(|s| s.len() == depth) {
                // The whole cylinder at `prefix` is inside the set.
                return;
            }
            if antichain.is_empty() {
                out.push(prefix.clone());
                return;
            }
            for bit in [false, true] {
                let side: Vec<BitString> = antichain
                    .iter()
                    .filter(|s| s.len() > depth && s.bit(depth) == bit)
                    .cloned()
                    .collect();
                prefix.push(bit);
                go(&side, depth + 1, prefix, out);
                let n = prefix.len() - 1;
                *prefix = prefix.prefix(n);
            }
        }

        let mut out = Vec::new();
        let mut prefix = BitString::empty();
        go(&self.antichain, 0, &mut prefix, &mut out);
        ClopenSet::canonicalize(out)
    }

    pub fn difference(&self, other: &ClopenSet) -> ClopenSet {
        self.intersection(&other.complement())
    }

    pub fn symmetric_difference(&self, other: &ClopenSet) -> ClopenSet {
        self.difference(other).union(&other.difference(self))
    }

    pub fn is_subset_of(&self, other: &ClopenSet) -> bool {
        self.difference(other).is_empty()
    }

    /// Applies a named boolean operation; `Complement` ignores `b`.
    pub fn boolean_op(op: BoolOp, a: &ClopenSet, b: Option<&ClopenSet>) -> Option<ClopenSet> {
        match op {
            BoolOp::Complement => Some(a.complement()),
            BoolOp::Union => b.map(|b| a.union(b)),
            BoolOp::Intersection => b.map(|b| a.intersection(b)),
            BoolOp::SymmetricDifference => b.map(|b| a.symmetric_difference(b)),
        }
    }

    /// Rewrites the set as a disjoint list of depth-`n` cylinders, sorted.
    /// Fails if some antichain element is longer than `n`.
    pub fn refine_to_depth(&self, n: usize) -> Result<Vec<BitString>, DepthTooSmall> {
        let mut out = Vec::new();
        for s in &self.antichain {
            if s.len() > n {
                return Err(DepthTooSmall {
                    requested: n,
                    element_len: s.len(),
                });
            }
            let tail_len = n - s.len();
            for tail in BitString::all_of_length(tail_len) {
                out.push(s.concat(&tail));
            }
        }
        out.sort();
        Ok(out)
    }

    /// Membership of the cylinder `xΩ`: `True` when it lies inside the set,
    /// `False` when it misses it, `Undetermined` when `x` is too short to
    /// tell. Canonicity makes the all-extensions-inside case impossible to
    /// reach through `Undetermined`.
    pub fn contains(&self, x: &BitString) -> Ternary {
        for s in &self.antichain {
            if s.is_prefix_of(x) {
                return Ternary::True;
            }
        }
        if self.antichain.iter().any(|s| x.is_prefix_of(s)) {
            Ternary::Undetermined
        } else {
            Ternary::False
        }
    }
}

impl fmt::Display for ClopenSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, s) in self.antichain.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", s)?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for ClopenSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn set(strs: &[&str]) -> ClopenSet {
        ClopenSet::canonicalize(strs.iter().map(|s| b(s)))
    }

    #[test]
    fn canonicalize_merges_sibling_pair_to_full() {
        assert_eq!(set(&["0", "1"]), ClopenSet::full());
    }

    #[test]
    fn canonicalize_of_nothing_is_empty() {
        assert_eq!(set(&[]), ClopenSet::empty());
        assert!(set(&[]).is_empty());
    }

    #[test]
    fn canonicalize_absorbs_extensions() {
        assert_eq!(set(&["0", "01"]), set(&["0"]));
        assert_eq!(set(&["e", "0110"]), ClopenSet::full());
    }

    #[test]
    fn canonicalize_cascades_merges() {
        // 00,01 -> 0; then 0,1 -> e.
        assert_eq!(set(&["00", "01", "1"]), ClopenSet::full());
        assert_eq!(set(&["000", "001", "01", "1"]), ClopenSet::full());
    }

    #[test]
    fn union_and_intersection_examples() {
        assert_eq!(set(&["0"]).union(&set(&["1"])), ClopenSet::full());
        assert_eq!(set(&["0"]).intersection(&set(&["01"])), set(&["01"]));
        assert_eq!(set(&["0"]).intersection(&set(&["1"])), ClopenSet::empty());
    }

    #[test]
    fn complement_examples() {
        assert_eq!(set(&["00"]).complement(), set(&["01", "1"]));
        assert_eq!(ClopenSet::full().complement(), ClopenSet::empty());
        assert_eq!(ClopenSet::empty().complement(), ClopenSet::full());
    }

    #[test]
    fn symmetric_difference_with_self_is_empty() {
        let c = set(&["0"]);
        assert_eq!(c.symmetric_difference(&c), ClopenSet::empty());
    }

    #[test]
    fn refine_to_depth_splits_cylinders() {
        assert_eq!(
            set(&["0"]).refine_to_depth(2).unwrap(),
            vec![b("00"), b("01")]
        );
        assert_eq!(
            ClopenSet::full().refine_to_depth(1).unwrap(),
            vec![b("0"), b("1")]
        );
        assert_eq!(ClopenSet::empty().refine_to_depth(3).unwrap(), vec![]);
        let err = set(&["0110"]).refine_to_depth(2).unwrap_err();
        assert_eq!(
            err,
            DepthTooSmall {
                requested: 2,
                element_len: 4
            }
        );
    }

    #[test]
    fn contains_is_three_valued() {
        let c = set(&["01"]);
        assert_eq!(c.contains(&b("011")), Ternary::True);
        assert_eq!(c.contains(&b("00")), Ternary::False);
        assert_eq!(c.contains(&b("0")), Ternary::Undetermined);
        assert_eq!(c.contains(&BitString::empty()), Ternary::Undetermined);
        assert_eq!(ClopenSet::empty().contains(&BitString::empty()), Ternary::False);
        assert_eq!(ClopenSet::full().contains(&BitString::empty()), Ternary::True);
    }

    #[test]
    fn subset_checks() {
        assert!(set(&["01"]).is_subset_of(&set(&["0"])));
        assert!(!set(&["0"]).is_subset_of(&set(&["01"])));
        assert!(ClopenSet::empty().is_subset_of(&ClopenSet::empty()));
    }

    /// Exhaustive boolean-algebra laws over every clopen set generated by
    /// depth-3 cylinders (all 256 canonical sets).
    #[test]
    fn boolean_laws_exhaustive_depth_3() {
        let all: Vec<ClopenSet> = (0u16..256)
            .map(|mask| {
                let strs = BitString::all_of_length(3);
                ClopenSet::canonicalize(
                    strs.iter()
                        .enumerate()
                        .filter(|(i, _)| mask >> i & 1 == 1)
                        .map(|(_, s)| s.clone()),
                )
            })
            .collect();

        // Uniqueness of the canonical form: 256 distinct sets.
        let distinct: BTreeSet<&ClopenSet> = all.iter().collect();
        assert_eq!(distinct.len(), 256);

        for a in &all {
            assert_eq!(a.complement().complement(), *a, "double complement");
            assert_eq!(a.symmetric_difference(a), ClopenSet::empty());
            assert_eq!(a.union(a), *a);
            assert_eq!(a.intersection(a), *a);
        }
        for a in &all {
            for bset in &all {
                // De Morgan, both directions.
                assert_eq!(
                    a.union(bset).complement(),
                    a.complement().intersection(&bset.complement())
                );
                assert_eq!(
                    a.intersection(bset).complement(),
                    a.complement().union(&bset.complement())
                );
                assert_eq!(a.union(bset), bset.union(a));
                assert_eq!(a.intersection(bset), bset.intersection(a));
            }
        }
    }

    #[test]
    fn refine_count_matches_depth_formula() {
        // Refining to depth n turns an element of length l into 2^(n-l) words.
        let c = set(&["0", "110"]);
        let refined = c.refine_to_depth(5).unwrap();
        assert_eq!(refined.len(), (1 << 4) + (1 << 2));
        let as_set = ClopenSet::canonicalize(refined);
        assert_eq!(as_set, c);
    }
}
