//! Built-in depth-parametric relations for the coupling solver, plus the
//! code-word measure induced by the conditioned random-tree distribution.
//!
//! `domination_relation` is the many-valued map "flip some ones to zeros";
//! `paths_relation` relates a finite tree code to the path prefixes its
//! completions can carry. Equality and the full relation bound the two
//! extremes and make handy solver fixtures.

use std::collections::BTreeMap;

use crate::bits::BitString;
use crate::coupling::RelationAtDepth;
use crate::measure::{MeasureError, MeasureSpec};
use crate::rational::Rational;
use crate::showcase::trees::tree_dist_percolation;

/// `rel(n)(u, v)` holds iff `u == v`.
pub fn equality_relation() -> RelationAtDepth {
    RelationAtDepth::new("equality", |_n, u, v| u == v)
}

/// `rel(n)(u, v)` holds for every pair.
pub fn full_relation() -> RelationAtDepth {
    RelationAtDepth::new("full", |_n, _u, _v| true)
}

/// `rel(n)(u, v)` holds iff `v_i <= u_i` coordinatewise: `v` is obtained
/// from `u` by flipping some ones to zeros.
pub fn domination_relation() -> RelationAtDepth {
    RelationAtDepth::new("domination", |_n, u, v| {
        u.bits().iter().zip(v.bits()).all(|(ui, vi)| vi <= ui)
    })
}

/// Number of vertices of length at most `depth` in the binary tree.
fn block_len(depth: usize) -> usize {
    (1usize << (depth + 1)) - 1
}

/// Depth of the deepest vertex whose presence bit a length-`n` code commits
/// to (the encoded depth).
fn encoded_depth(n: usize) -> usize {
    debug_assert!(n >= 1);
    BitString::vertex_at(n - 1).len()
}

/// Does the completed vertex set describe a tree usable as a prefix of some
/// leafless tree carrying a path that extends `v`?
fn completion_carries_path(present: &[bool], depth: usize, v: &BitString) -> bool {
    let at = |w: &BitString| present[w.vertex_index()];
    if !at(&BitString::empty()) {
        return false;
    }
    for i in 0..present.len() {
        if !present[i] {
            continue;
        }
        let w = BitString::vertex_at(i);
        if let Some(parent) = w.parent() {
            if !at(&parent) {
                return false;
            }
        }
        // Below the committed depth a vertex must keep a child, or no
        // leafless extension exists.
        if w.len() < depth && !at(&w.child(false)) && !at(&w.child(true)) {
            return false;
        }
    }
    // The path must pass through every committed prefix of v; beyond the
    // committed depth the extension is free.
    (1..=depth.min(v.len())).all(|len| at(&v.prefix(len)))
}

/// `rel(n)(u, v)` holds iff the first `n` presence bits `u` of a vertex
/// enumeration can be completed, at the encoded depth, to the top of a
/// leafless tree containing a path extending `v`. Decided by finite search
/// over the uncommitted presence bits.
///
/// Totality fails off the tree-code support (e.g. any `u` with the root
/// absent relates to nothing), so couplings against this relation restrict
/// the first marginal to measures carried by valid codes, such as
/// [`conditioned_tree_code_measure`].
pub fn paths_relation() -> RelationAtDepth {
    RelationAtDepth::new("paths", |n, u, v| {
        if n == 0 {
            return true;
        }
        let depth = encoded_depth(n);
        let total = block_len(depth);
        let free = total - n;
        let mut present = vec![false; total];
        for (i, bit) in u.bits().iter().enumerate() {
            present[i] = *bit;
        }
        (0u32..1 << free).any(|mask| {
            for j in 0..free {
                present[n + j] = mask >> j & 1 == 1;
            }
            completion_carries_path(&present, depth, v)
        })
    })
}

/// Look up a built-in relation by its command-line name.
pub fn builtin_relation(name: &str) -> Option<RelationAtDepth> {
    match name {
        "equality" => Some(equality_relation()),
        "full" => Some(full_relation()),
        "domination" => Some(domination_relation()),
        "paths" => Some(paths_relation()),
        _ => None,
    }
}

/// The distribution on length-`n` code words induced by drawing a tree from
/// the conditioned distribution at the encoded depth and emitting its first
/// `n` presence bits. Shapes that agree on those bits merge.
pub fn conditioned_tree_code_measure(n: usize) -> Result<MeasureSpec, MeasureError> {
    if n == 0 {
        return Err(MeasureError::InvalidParameter(
            "code measure needs at least one bit".into(),
        ));
    }
    let depth = encoded_depth(n).max(1);
    let dist = tree_dist_percolation(depth, true);
    let mut weights: BTreeMap<BitString, Rational> = BTreeMap::new();
    for (shape, mass) in dist.shapes {
        let slot = weights.entry(shape.code(n)).or_insert_with(Rational::zero);
        *slot = slot.clone() + mass;
    }
    MeasureSpec::explicit(n, weights)
}
