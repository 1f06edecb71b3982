//! Random binary trees: two constructions of the same distribution on
//! finite leafless tree shapes, an independent bracketing oracle validating
//! the closed form, and the pruning map from edge configurations to vertex
//! survival bits.
//!
//! Process one keeps each edge of the infinite binary tree independently
//! with probability 2/3, then deletes every vertex with only finitely many
//! descendants. Process two grows a tree top-down, choosing uniformly among
//! {left child, right child, both} at every node. Truncated at depth `k` and
//! conditioned on survival, the two agree exactly; [`tree_dist_direct`] and
//! [`tree_dist_percolation`] compute both sides and
//! [`tree_dist_percolation_bracket`] re-derives the percolation side with
//! certified finite-horizon intervals instead of the limit constant.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::bits::BitString;
use crate::branching::{height_for_gap, survival};
use crate::event::Event;
use crate::layerwise::{CauchyMap, StagedBit};
use crate::measure::MeasureSpec;
use crate::rational::Rational;

/// Exact probability that the root's component still reaches depth `n`
/// after independent edge removal (kept with probability 2/3).
pub fn survival_prob(n: usize) -> Rational {
    survival(n)
}

/// A finite leafless tree shape: vertices of length at most `depth`, closed
/// under prefix, where every vertex shorter than `depth` has a child.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TreeShape {
    depth: usize,
    vertices: BTreeSet<BitString>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ShapeError {
    MissingRoot,
    TooDeep(BitString),
    NotPrefixClosed(BitString),
    Childless(BitString),
}

impl fmt::Display for ShapeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapeError::MissingRoot => write!(f, "shape does not contain the root"),
            ShapeError::TooDeep(v) => write!(f, "vertex {v} exceeds the shape depth"),
            ShapeError::NotPrefixClosed(v) => write!(f, "vertex {v} is present without its parent"),
            ShapeError::Childless(v) => {
                write!(f, "vertex {v} is below the horizon but has no child")
            }
        }
    }
}

impl std::error::Error for ShapeError {}

impl TreeShape {
    pub fn new(
        depth: usize,
        vertices: impl IntoIterator<Item = BitString>,
    ) -> Result<Self, ShapeError> {
        let vertices: BTreeSet<BitString> = vertices.into_iter().collect();
        if !vertices.contains(&BitString::empty()) {
            return Err(ShapeError::MissingRoot);
        }
        for v in &vertices {
            if v.len() > depth {
                return Err(ShapeError::TooDeep(v.clone()));
            }
            if !v.is_empty() && !vertices.contains(&v.parent().unwrap()) {
                return Err(ShapeError::NotPrefixClosed(v.clone()));
            }
        }
        for v in &vertices {
            if v.len() < depth
                && !vertices.contains(&v.child(false))
                && !vertices.contains(&v.child(true))
            {
                return Err(ShapeError::Childless(v.clone()));
            }
        }
        Ok(TreeShape { depth, vertices })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn vertices(&self) -> impl Iterator<Item = &BitString> {
        self.vertices.iter()
    }

    pub fn contains(&self, v: &BitString) -> bool {
        self.vertices.contains(v)
    }

    /// Membership bits for the first `nbits` vertices in length-then-lex
    /// order — the wire encoding of the shape.
    pub fn code(&self, nbits: usize) -> BitString {
        BitString::from_bits(
            (0..nbits)
                .map(|i| self.contains(&BitString::vertex_at(i)))
                .collect(),
        )
    }

    /// Number of vertex positions covered by all depths up to this shape's
    /// horizon: the natural code length.
    pub fn full_code_len(&self) -> usize {
        (1 << (self.depth + 1)) - 1
    }

    /// All leafless shapes of the given depth (3 at depth 1, 15 at depth 2,
    /// 255 at depth 3).
    pub fn all_of_depth(depth: usize) -> Vec<TreeShape> {
        fn graft(sub: &BTreeSet<BitString>, side: bool) -> impl Iterator<Item = BitString> + '_ {
            sub.iter().map(move |w| {
                let mut bits = vec![side];
                bits.extend(w.bits().iter().copied());
                BitString::from_bits(bits)
            })
        }
        fn subtrees(depth: usize) -> Vec<BTreeSet<BitString>> {
            if depth == 0 {
                return vec![BTreeSet::from([BitString::empty()])];
            }
            let subs = subtrees(depth - 1);
            let mut out = Vec::new();
            for side in [false, true] {
                for s in &subs {
                    let mut set = BTreeSet::from([BitString::empty()]);
                    set.extend(graft(s, side));
                    out.push(set);
                }
            }
            for s0 in &subs {
                for s1 in &subs {
                    let mut set = BTreeSet::from([BitString::empty()]);
                    set.extend(graft(s0, false));
                    set.extend(graft(s1, true));
                    out.push(set);
                }
            }
            out
        }
        subtrees(depth)
            .into_iter()
            .map(|vertices| TreeShape { depth, vertices })
            .collect()
    }
}

impl fmt::Display for TreeShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code(self.full_code_len()))
    }
}

/// A distribution over depth-`k` shapes, with the mass of the empty outcome
/// kept separate (zero for conditioned or purely generative distributions).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeDist {
    pub shapes: BTreeMap<TreeShape, Rational>,
    pub empty: Rational,
}

impl TreeDist {
    pub fn total(&self) -> Rational {
        self.shapes
            .values()
            .fold(self.empty.clone(), |acc, m| acc + m.clone())
    }
}

/// The top-down generative construction: every vertex above the horizon
/// picks {left, right, both} uniformly, so a shape's probability is
/// `(1/3)^(number of its vertices above the horizon)`.
pub fn tree_dist_direct(k: usize) -> TreeDist {
    assert!(k >= 1, "depth must be at least 1");
    let third = Rational::new(1, 3);
    let shapes = TreeShape::all_of_depth(k)
        .into_iter()
        .map(|shape| {
            let internal = shape.vertices().filter(|v| v.len() < k).count();
            let mass = third.pow_int(internal as u32);
            (shape, mass)
        })
        .collect();
    TreeDist {
        shapes,
        empty: Rational::zero(),
    }
}

/// The percolation-and-pruning construction in closed form. For each vertex
/// of the shape above the horizon, each child edge is independently "kept
/// and infinite below" with probability `(2/3)·(3/4) = 1/2`; a child present
/// at the horizon contributes the survival factor `3/4` itself, a present
/// child above the horizon defers its survival to its own children (factor
/// `2/3` only), and an absent child contributes `1/2`. With
/// `conditioned = true` the result is renormalized by the survival
/// probability `3/4` and the empty outcome drops out.
pub fn tree_dist_percolation(k: usize, conditioned: bool) -> TreeDist {
    assert!(k >= 1, "depth must be at least 1");
    let keep = Rational::new(2, 3);
    let limit = Rational::new(3, 4);
    let absent = Rational::new(1, 2);
    let mut shapes = BTreeMap::new();
    for shape in TreeShape::all_of_depth(k) {
        let mut mass = Rational::one();
        for v in shape.vertices().filter(|v| v.len() < k) {
            for c in [v.child(false), v.child(true)] {
                if shape.contains(&c) {
                    mass = mass * keep.clone();
                    if c.len() == k {
                        mass = mass * limit.clone();
                    }
                } else {
                    mass = mass * absent.clone();
                }
            }
        }
        if conditioned {
            mass = mass * Rational::new(4, 3);
        }
        shapes.insert(shape, mass);
    }
    let empty = if conditioned {
        Rational::zero()
    } else {
        Rational::new(1, 4)
    };
    TreeDist { shapes, empty }
}

/// Finite-horizon interval version of [`tree_dist_percolation`]: every use
/// of the limit survival constant is replaced by the certified bracket
/// `[3/4, p_m]`, where `p_m` is an explicit iterate. The lower end is valid
/// because the iteration maps `[3/4, 1]` into itself, the upper end because
/// survival to depth `m` is necessary for survival outright. No fixed-point
/// identity is consumed, which is what makes this an independent oracle for
/// the closed form.
#[derive(Debug, Clone)]
pub struct TreeBracket {
    pub depth: usize,
    pub horizon: usize,
    pub shapes: BTreeMap<TreeShape, (Rational, Rational)>,
    pub empty: (Rational, Rational),
}

impl TreeBracket {
    /// Condition on survival by dividing through the interval `[3/4, p_N]`
    /// for the survival probability; the empty outcome drops out.
    pub fn conditioned(&self) -> BTreeMap<TreeShape, (Rational, Rational)> {
        let denom_lo = Rational::new(3, 4);
        let denom_hi = survival(self.horizon);
        self.shapes
            .iter()
            .map(|(shape, (lo, hi))| {
                (
                    shape.clone(),
                    (lo.clone() / denom_hi.clone(), hi.clone() / denom_lo.clone()),
                )
            })
            .collect()
    }

    /// Do the unconditioned intervals contain the given distribution
    /// (including its empty mass)?
    pub fn contains_dist(&self, dist: &TreeDist) -> bool {
        if dist.empty < self.empty.0 || dist.empty > self.empty.1 {
            return false;
        }
        dist.shapes.iter().all(|(shape, mass)| {
            self.shapes
                .get(shape)
                .is_some_and(|(lo, hi)| lo <= mass && mass <= hi)
        })
    }
}

pub fn tree_dist_percolation_bracket(k: usize, horizon: usize) -> TreeBracket {
    assert!(k >= 1, "depth must be at least 1");
    assert!(horizon >= k, "horizon must reach the shape depth");
    let keep = Rational::new(2, 3);
    let survival_lo = Rational::new(3, 4);
    let survival_hi = survival(horizon - k);
    // A present horizon child survives with probability in [3/4, p_{N-k}];
    // an absent child's factor 1 - (2/3)·p flips the interval ends.
    let present_leaf = (
        keep.clone() * survival_lo.clone(),
        keep.clone() * survival_hi.clone(),
    );
    let absent = (
        Rational::one() - keep.clone() * survival_hi.clone(),
        Rational::one() - keep.clone() * survival_lo.clone(),
    );
    let mut shapes = BTreeMap::new();
    for shape in TreeShape::all_of_depth(k) {
        let mut lo = Rational::one();
        let mut hi = Rational::one();
        for v in shape.vertices().filter(|v| v.len() < k) {
            for c in [v.child(false), v.child(true)] {
                let (factor_lo, factor_hi) = if shape.contains(&c) {
                    if c.len() == k {
                        present_leaf.clone()
                    } else {
                        (keep.clone(), keep.clone())
                    }
                } else {
                    absent.clone()
                };
                lo = lo * factor_lo;
                hi = hi * factor_hi;
            }
        }
        shapes.insert(shape, (lo, hi));
    }
    let empty = (
        Rational::one() - survival(horizon),
        Rational::new(1, 4),
    );
    TreeBracket {
        depth: k,
        horizon,
        shapes,
        empty,
    }
}

/// One output bit of the pruning map: does the vertex keep infinitely many
/// descendants connected to it? The level-`i` stage asks for survival to a
/// finite height chosen so the gap to the infinite event is at most `2^-i`.
pub struct TreeCellBit {
    vertex: BitString,
}

impl TreeCellBit {
    pub fn new(vertex: BitString) -> Self {
        TreeCellBit { vertex }
    }
}

impl StagedBit for TreeCellBit {
    fn stage(&self, level: usize) -> Event {
        Event::tree_cell(self.vertex.clone(), Some(height_for_gap(level)))
    }

    fn change_region(&self, level: usize) -> Option<Event> {
        // All deeper stages and the limit sit between "survives to the
        // level's height" and "survives outright"; the band between them has
        // mass at most the survival gap at that height, which the height
        // choice caps at 2^-level.
        Some(
            self.stage(level)
                .difference(&Event::tree_cell(self.vertex.clone(), None)),
        )
    }
}

/// The pruning map: input bit `j` is the keep/cut state of the edge above
/// vertex `j+1` (in length-then-lex order), output bit `k` reports whether
/// vertex `k` survives pruning. Base measure: each edge kept independently
/// with probability 2/3.
pub fn tree_pruning_map(nbits: usize) -> CauchyMap {
    let bits = (0..nbits)
        .map(|k| Arc::new(TreeCellBit::new(BitString::vertex_at(k))) as Arc<dyn StagedBit>)
        .collect();
    CauchyMap::new(
        "treeprune",
        MeasureSpec::bernoulli(Rational::new(2, 3)).expect("2/3 is a probability"),
        bits,
    )
}
