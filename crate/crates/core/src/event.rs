//! Symbolic events on Cantor space with exact mass evaluation.
//!
//! Clopen sets answer every question in principle, but the sets produced by
//! staged constructions routinely have antichains of astronomically many
//! elements (a stage set reading one bit of each of fifteen interleaved rows
//! already needs `2^100`-scale antichains). [`Event`] keeps such sets
//! symbolic: a small expression tree over three leaf families, each of which
//! carries enough structure to compute exact masses without materializing
//! anything.
//!
//! The leaf families are:
//!
//! * [`Event::Clopen`] — an explicit finite union of cylinders;
//! * [`Event::RowSet`] — "row `r` of the interleaved table lies in this
//!   clopen subset of the row space" (see [`crate::measure::table`]);
//! * [`Event::TreeCell`] — "vertex `v` is retained and its subtree survives
//!   to height `h`" for the edge-coded random pruning process (see
//!   [`crate::branching`]); `height: None` asks for survival at every height.
//!
//! Three-valued membership ([`Event::resolve`]) works for every combination.
//! Exact mass ([`Event::mass`]) is available for the combinations the staged
//! constructions actually produce: pure clopen combinations (any measure),
//! row combinations under iid product measures (rows are independent, so a
//! per-row atom decomposition turns the mass into a pruned sum of products),
//! and same-vertex tree-cell combinations under the edge measure (cells at
//! one vertex form a chain, so outcomes split into survival bands with masses
//! given by the survival recurrence).

use std::collections::BTreeMap;
use std::fmt;

use crate::bits::BitString;
use crate::branching;
use crate::clopen::{ClopenSet, Ternary};
use crate::measure::{table, MeasureError, MeasureSpec};
use crate::rational::Rational;

/// Errors raised by event evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventError {
    /// The event mixes leaf families (or measure) in a way this module does
    /// not evaluate exactly. The message names the offending combination.
    Unsupported(String),
    /// Materialization visited more prefixes than the allotted budget.
    BudgetExhausted { budget: u64 },
    /// A measure query failed underneath.
    Measure(MeasureError),
}

impl fmt::Display for EventError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventError::Unsupported(msg) => write!(f, "unsupported event evaluation: {msg}"),
            EventError::BudgetExhausted { budget } => {
                write!(f, "materialization exceeded its budget of {budget} prefixes")
            }
            EventError::Measure(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for EventError {}

impl From<MeasureError> for EventError {
    fn from(e: MeasureError) -> Self {
        EventError::Measure(e)
    }
}

/// A symbolic event: a boolean expression over structured leaves.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Event {
    /// An explicit clopen set of the ambient space.
    Clopen(ClopenSet),
    /// Row `row` of the interleaved table lies in `set` (a clopen subset of
    /// the row's own Cantor space).
    RowSet { row: usize, set: ClopenSet },
    /// Under the one-bit-per-edge coding of tree pruning: every edge on the
    /// path to `vertex` is kept, and the subtree at `vertex` survives to
    /// depth `height` below it (`None` = survives to every depth).
    TreeCell {
        vertex: BitString,
        height: Option<usize>,
    },
    Not(Box<Event>),
    All(Vec<Event>),
    Any(Vec<Event>),
}

impl Event {
    pub fn never() -> Event {
        Event::Clopen(ClopenSet::empty())
    }

    pub fn always() -> Event {
        Event::Clopen(ClopenSet::full())
    }

    pub fn clopen(set: ClopenSet) -> Event {
        Event::Clopen(set)
    }

    /// The cylinder of all extensions of `word`.
    pub fn cylinder(word: &BitString) -> Event {
        Event::Clopen(ClopenSet::cylinder(word))
    }

    pub fn row_in(row: usize, set: ClopenSet) -> Event {
        Event::RowSet { row, set }
    }

    pub fn tree_cell(vertex: BitString, height: Option<usize>) -> Event {
        Event::TreeCell { vertex, height }
    }

    pub fn all(parts: Vec<Event>) -> Event {
        Event::All(parts)
    }

    pub fn any(parts: Vec<Event>) -> Event {
        Event::Any(parts)
    }

    /// `self` minus `other`.
    pub fn difference(&self, other: &Event) -> Event {
        Event::All(vec![self.clone(), !other.clone()])
    }

    pub fn symmetric_difference(&self, other: &Event) -> Event {
        Event::Any(vec![self.difference(other), other.difference(self)])
    }

    /// Three-valued membership of every infinite extension of `prefix`:
    /// `True`/`False` when all extensions agree, `Undetermined` otherwise.
    /// (For non-clopen leaves "agree" means the finite information forces the
    /// answer; a `TreeCell` with unbounded height is never forced `True`.)
    pub fn resolve(&self, prefix: &BitString) -> Ternary {
        match self {
            Event::Clopen(set) => set.contains(prefix),
            Event::RowSet { row, set } => set.contains(&table::row_prefix(prefix, *row)),
            Event::TreeCell { vertex, height } => resolve_cell(prefix, vertex, *height),
            Event::Not(inner) => !inner.resolve(prefix),
            Event::All(parts) => {
                let mut acc = Ternary::True;
                for p in parts {
                    acc = acc.and(p.resolve(prefix));
                    if acc == Ternary::False {
                        break;
                    }
                }
                acc
            }
            Event::Any(parts) => {
                let mut acc = Ternary::False;
                for p in parts {
                    acc = acc.or(p.resolve(prefix));
                    if acc == Ternary::True {
                        break;
                    }
                }
                acc
            }
        }
    }

    /// An upper bound on how many input bits settle membership: every prefix
    /// of this length resolves to `True` or `False`. `None` when no finite
    /// horizon suffices (an unbounded-height tree cell).
    pub fn read_depth(&self) -> Option<usize> {
        match self {
            Event::Clopen(set) => Some(set.max_len()),
            Event::RowSet { row, set } => {
                if set.max_len() == 0 {
                    Some(0)
                } else {
                    Some(table::position(*row, set.max_len() - 1) + 1)
                }
            }
            Event::TreeCell {
                vertex,
                height: Some(h),
            } => {
                // Deepest coordinate read: the edge above the rightmost
                // descendant at depth |vertex| + h, whose heap key is
                // key(vertex) * 2^h + (2^h - 1); the edge bit above a vertex
                // with key K is K - 2, so the read depth is K - 1.
                let key = vertex.vertex_index() + 1;
                Some((key << h) + ((1usize << h) - 1) - 1)
            }
            Event::TreeCell { height: None, .. } => None,
            Event::Not(inner) => inner.read_depth(),
            Event::All(parts) | Event::Any(parts) => {
                let mut depth = 0usize;
                for p in parts {
                    depth = depth.max(p.read_depth()?);
                }
                Some(depth)
            }
        }
    }

    /// Exact probability of the event under `measure`. Supported shapes:
    /// pure clopen combinations (any measure), row combinations under iid
    /// product measures, and same-vertex tree-cell combinations under the
    /// 2/3-retention edge measure. Anything else returns
    /// [`EventError::Unsupported`].
    pub fn mass(&self, measure: &MeasureSpec) -> Result<Rational, EventError> {
        let mut builder = Builder { leaves: Vec::new() };
        let formula = builder.build(self);
        let leaves = builder.leaves;

        if leaves.is_empty() {
            return match eval_partial(&formula, &[]) {
                Ternary::True => Ok(Rational::one()),
                Ternary::False => Ok(Rational::zero()),
                Ternary::Undetermined => unreachable!("constant formula left undetermined"),
            };
        }

        let mut kinds = (false, false, false); // (clopen, row, cell)
        for leaf in &leaves {
            match leaf {
                Leaf::Set(_) => kinds.0 = true,
                Leaf::Row { .. } => kinds.1 = true,
                Leaf::Cell { .. } => kinds.2 = true,
            }
        }
        match kinds {
            (true, false, false) => mass_clopen(&formula, &leaves, measure),
            (false, true, false) => mass_rows(&formula, &leaves, measure),
            (false, false, true) => mass_cells(&formula, &leaves, measure),
            _ => Err(EventError::Unsupported(
                "event mixes clopen, row, and tree-cell leaves; masses are only \
                 computed within one leaf family"
                    .into(),
            )),
        }
    }

    /// Refine prefixes until membership is decided everywhere, returning the
    /// `True` region as a clopen set. Each visited prefix costs one unit of
    /// `budget`; events that no finite depth decides (or whose read depth
    /// exceeds the budget) return [`EventError::BudgetExhausted`].
    pub fn materialize(&self, budget: u64) -> Result<ClopenSet, EventError> {
        let mut spent = 0u64;
        let mut kept = Vec::new();
        let mut stack = vec![BitString::empty()];
        while let Some(prefix) = stack.pop() {
            spent += 1;
            if spent > budget {
                return Err(EventError::BudgetExhausted { budget });
            }
            match self.resolve(&prefix) {
                Ternary::True => kept.push(prefix),
                Ternary::False => {}
                Ternary::Undetermined => {
                    stack.push(prefix.child(true));
                    stack.push(prefix.child(false));
                }
            }
        }
        Ok(ClopenSet::canonicalize(kept))
    }
}

/// Negation, collapsing a double negation instead of stacking one.
impl std::ops::Not for Event {
    type Output = Event;

    fn not(self) -> Event {
        match self {
            Event::Not(inner) => *inner,
            other => Event::Not(Box::new(other)),
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Clopen(set) => write!(f, "{set}"),
            Event::RowSet { row, set } => write!(f, "row{row} in {set}"),
            Event::TreeCell {
                vertex,
                height: Some(h),
            } => write!(f, "cell({vertex},{h})"),
            Event::TreeCell {
                vertex,
                height: None,
            } => write!(f, "cell({vertex},inf)"),
            Event::Not(inner) => write!(f, "!({inner})"),
            Event::All(parts) => {
                if parts.is_empty() {
                    return write!(f, "(true)");
                }
                write!(f, "(")?;
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, " & ")?;
                    }
                    write!(f, "{p}")?;
                }
                write!(f, ")")
            }
            Event::Any(parts) => {
                if parts.is_empty() {
                    return write!(f, "(false)");
                }
                write!(f, "(")?;
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, " | ")?;
                    }
                    write!(f, "{p}")?;
                }
                write!(f, ")")
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Three-valued membership for tree cells.

fn edge_status(prefix: &BitString, vertex: &BitString) -> Ternary {
    let idx = vertex.edge_index();
    if idx < prefix.len() {
        Ternary::from_bool(prefix.bit(idx))
    } else {
        Ternary::Undetermined
    }
}

fn path_status(prefix: &BitString, vertex: &BitString) -> Ternary {
    let mut acc = Ternary::True;
    for depth in 1..=vertex.len() {
        acc = acc.and(edge_status(prefix, &vertex.prefix(depth)));
        if acc == Ternary::False {
            break;
        }
    }
    acc
}

/// Does the subtree at `vertex` (assumed present) reach `h` levels below it?
fn survival_status(prefix: &BitString, vertex: &BitString, h: usize) -> Ternary {
    if h == 0 {
        return Ternary::True;
    }
    let mut acc = Ternary::False;
    for bit in [false, true] {
        let child = vertex.child(bit);
        let edge = edge_status(prefix, &child);
        let branch = if edge == Ternary::False {
            Ternary::False
        } else {
            edge.and(survival_status(prefix, &child, h - 1))
        };
        acc = acc.or(branch);
        if acc == Ternary::True {
            return acc;
        }
    }
    acc
}

fn resolve_cell(prefix: &BitString, vertex: &BitString, height: Option<usize>) -> Ternary {
    let path = path_status(prefix, vertex);
    if path == Ternary::False {
        return Ternary::False;
    }
    match height {
        Some(h) => path.and(survival_status(prefix, vertex, h)),
        None => {
            // Finite information can refute unbounded survival (the subtree
            // is already cut off) but never confirm it. The known bits reach
            // vertices of depth at most that of vertex_at(prefix.len()), so
            // checking survival to that horizon detects every refutation.
            let horizon = if prefix.is_empty() {
                0
            } else {
                BitString::vertex_at(prefix.len()).len()
            };
            let h = horizon.saturating_sub(vertex.len());
            if survival_status(prefix, vertex, h) == Ternary::False {
                Ternary::False
            } else {
                Ternary::Undetermined
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Mass evaluation: formula extraction and per-family algorithms.

#[derive(PartialEq)]
enum Leaf {
    Set(ClopenSet),
    Row { row: usize, set: ClopenSet },
    Cell {
        vertex: BitString,
        height: Option<usize>,
    },
}

enum Formula {
    Const(bool),
    Leaf(usize),
    Not(Box<Formula>),
    All(Vec<Formula>),
    Any(Vec<Formula>),
}

struct Builder {
    leaves: Vec<Leaf>,
}

impl Builder {
    fn leaf(&mut self, leaf: Leaf) -> Formula {
        let idx = match self.leaves.iter().position(|l| *l == leaf) {
            Some(i) => i,
            None => {
                self.leaves.push(leaf);
                self.leaves.len() - 1
            }
        };
        Formula::Leaf(idx)
    }

    fn build(&mut self, event: &Event) -> Formula {
        match event {
            Event::Clopen(set) if set.is_empty() => Formula::Const(false),
            Event::Clopen(set) if set.is_full() => Formula::Const(true),
            Event::Clopen(set) => self.leaf(Leaf::Set(set.clone())),
            Event::RowSet { set, .. } if set.is_empty() => Formula::Const(false),
            Event::RowSet { set, .. } if set.is_full() => Formula::Const(true),
            Event::RowSet { row, set } => self.leaf(Leaf::Row {
                row: *row,
                set: set.clone(),
            }),
            Event::TreeCell { vertex, height } => self.leaf(Leaf::Cell {
                vertex: vertex.clone(),
                height: *height,
            }),
            Event::Not(inner) => Formula::Not(Box::new(self.build(inner))),
            Event::All(parts) => Formula::All(parts.iter().map(|p| self.build(p)).collect()),
            Event::Any(parts) => Formula::Any(parts.iter().map(|p| self.build(p)).collect()),
        }
    }
}

/// Kleene evaluation under a partial truth assignment to the leaves.
fn eval_partial(formula: &Formula, assign: &[Option<bool>]) -> Ternary {
    match formula {
        Formula::Const(b) => Ternary::from_bool(*b),
        Formula::Leaf(i) => match assign[*i] {
            Some(b) => Ternary::from_bool(b),
            None => Ternary::Undetermined,
        },
        Formula::Not(inner) => !eval_partial(inner, assign),
        Formula::All(parts) => {
            let mut acc = Ternary::True;
            for p in parts {
                acc = acc.and(eval_partial(p, assign));
                if acc == Ternary::False {
                    break;
                }
            }
            acc
        }
        Formula::Any(parts) => {
            let mut acc = Ternary::False;
            for p in parts {
                acc = acc.or(eval_partial(p, assign));
                if acc == Ternary::True {
                    break;
                }
            }
            acc
        }
    }
}

/// Pure clopen combination: evaluate with set algebra, then measure once.
fn mass_clopen(
    formula: &Formula,
    leaves: &[Leaf],
    measure: &MeasureSpec,
) -> Result<Rational, EventError> {
    fn eval_sets(formula: &Formula, leaves: &[Leaf]) -> ClopenSet {
        match formula {
            Formula::Const(true) => ClopenSet::full(),
            Formula::Const(false) => ClopenSet::empty(),
            Formula::Leaf(i) => match &leaves[*i] {
                Leaf::Set(s) => s.clone(),
                _ => unreachable!("clopen mass path saw a non-clopen leaf"),
            },
            Formula::Not(inner) => eval_sets(inner, leaves).complement(),
            Formula::All(parts) => parts
                .iter()
                .fold(ClopenSet::full(), |acc, p| {
                    acc.intersection(&eval_sets(p, leaves))
                }),
            Formula::Any(parts) => parts
                .iter()
                .fold(ClopenSet::empty(), |acc, p| acc.union(&eval_sets(p, leaves))),
        }
    }
    Ok(measure.clopen_mass(&eval_sets(formula, leaves))?)
}

/// Row combination under an iid product measure. Rows are independent, so the
/// mass is a sum over tuples of per-row atoms (the partition each row's leaf
/// sets generate); a depth-first walk over rows prunes assignments the
/// formula already decides and drops atoms of zero marginal mass.
fn mass_rows(
    formula: &Formula,
    leaves: &[Leaf],
    measure: &MeasureSpec,
) -> Result<Rational, EventError> {
    if !measure.is_iid_product() {
        return Err(EventError::Unsupported(format!(
            "row events need an iid product measure, got {measure:?}"
        )));
    }
    let marginal = measure
        .row_marginal()
        .expect("iid product measures expose a row marginal");

    let mut rows: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, leaf) in leaves.iter().enumerate() {
        match leaf {
            Leaf::Row { row, .. } => rows.entry(*row).or_default().push(i),
            _ => unreachable!("row mass path saw a non-row leaf"),
        }
    }

    // Per row: the atoms of the partition its leaf sets generate, as
    // (sign per leaf of this row, marginal mass), zero-mass atoms dropped.
    struct RowAtoms {
        leaf_ids: Vec<usize>,
        atoms: Vec<(Vec<bool>, Rational)>,
    }
    let mut grouped = Vec::new();
    for (_, leaf_ids) in rows {
        let mut parts: Vec<(ClopenSet, Vec<bool>)> = vec![(ClopenSet::full(), Vec::new())];
        for &id in &leaf_ids {
            let set = match &leaves[id] {
                Leaf::Row { set, .. } => set,
                _ => unreachable!(),
            };
            let mut next = Vec::with_capacity(parts.len() * 2);
            for (region, signs) in parts {
                let inside = region.intersection(set);
                if !inside.is_empty() {
                    let mut s = signs.clone();
                    s.push(true);
                    next.push((inside, s));
                }
                let outside = region.difference(set);
                if !outside.is_empty() {
                    let mut s = signs;
                    s.push(false);
                    next.push((outside, s));
                }
            }
            parts = next;
        }
        let mut atoms = Vec::with_capacity(parts.len());
        for (region, signs) in parts {
            let mass = marginal.clopen_mass(&region)?;
            if !mass.is_zero() {
                atoms.push((signs, mass));
            }
        }
        grouped.push(RowAtoms { leaf_ids, atoms });
    }

    fn walk(
        formula: &Formula,
        grouped: &[RowAtoms],
        next_row: usize,
        assign: &mut [Option<bool>],
        weight: Rational,
        total: &mut Rational,
    ) {
        match eval_partial(formula, assign) {
            Ternary::True => *total += &weight,
            Ternary::False => {}
            Ternary::Undetermined => {
                debug_assert!(
                    next_row < grouped.len(),
                    "fully assigned formula stayed undetermined"
                );
                let row = &grouped[next_row];
                for (signs, mass) in &row.atoms {
                    for (&id, &sign) in row.leaf_ids.iter().zip(signs) {
                        assign[id] = Some(sign);
                    }
                    walk(formula, grouped, next_row + 1, assign, &weight * mass, total);
                }
                for &id in &row.leaf_ids {
                    assign[id] = None;
                }
            }
        }
    }

    let mut total = Rational::zero();
    let mut assign = vec![None; leaves.len()];
    walk(
        formula,
        &grouped,
        0,
        &mut assign,
        Rational::one(),
        &mut total,
    );
    Ok(total)
}

/// Same-vertex tree-cell combination under the 2/3-retention edge measure.
/// Cells at one vertex are nested in the height, so the sample space splits
/// into survival bands: dead before the smallest queried height (or path
/// broken), between consecutive queried heights, beyond the largest, and —
/// when unbounded survival is queried — surviving forever. Band masses come
/// from the survival recurrence; the formula is evaluated once per band.
fn mass_cells(
    formula: &Formula,
    leaves: &[Leaf],
    measure: &MeasureSpec,
) -> Result<Rational, EventError> {
    let edge_measure = MeasureSpec::Bernoulli(branching::edge_retention());
    if *measure != edge_measure {
        return Err(EventError::Unsupported(format!(
            "tree-cell events are evaluated under the 2/3-retention edge \
             measure, got {measure:?}"
        )));
    }

    let mut vertex: Option<&BitString> = None;
    let mut heights: Vec<usize> = Vec::new();
    let mut has_unbounded = false;
    for leaf in leaves {
        let (v, h) = match leaf {
            Leaf::Cell { vertex, height } => (vertex, height),
            _ => unreachable!("cell mass path saw a non-cell leaf"),
        };
        match vertex {
            None => vertex = Some(v),
            Some(seen) if seen == v => {}
            Some(_) => {
                return Err(EventError::Unsupported(
                    "tree-cell combinations are only evaluated at a single \
                     vertex (cells at distinct vertices are correlated \
                     through shared path edges)"
                        .into(),
                ));
            }
        }
        match h {
            Some(h) => heights.push(*h),
            None => has_unbounded = true,
        }
    }
    let vertex = vertex.expect("cell mass path requires at least one leaf");
    heights.sort_unstable();
    heights.dedup();

    let keep = branching::edge_retention().pow_int(vertex.len() as u32);
    let limit = branching::limit();
    let m = heights.len();

    // Band index b: 0 = dead before heights[0] (or path broken); 1..m =
    // survives to heights[b-1] but not heights[b]; m = survives to the last
    // queried height (and, when unbounded survival is queried, not forever);
    // m+1 = survives forever.
    let band_count = m + 1 + usize::from(has_unbounded);
    let mut total = Rational::zero();
    for band in 0..band_count {
        let is_forever = has_unbounded && band == m + 1;
        let mass = if band == 0 {
            let first = if m > 0 {
                branching::survival(heights[0])
            } else {
                limit.clone()
            };
            Rational::one() - &keep * &first
        } else if band < m {
            &keep * &(branching::survival(heights[band - 1]) - branching::survival(heights[band]))
        } else if band == m {
            let reach = branching::survival(heights[m - 1]);
            if has_unbounded {
                &keep * &(reach - &limit)
            } else {
                &keep * &reach
            }
        } else {
            &keep * &limit
        };
        if mass.is_zero() {
            continue;
        }
        let assign: Vec<Option<bool>> = leaves
            .iter()
            .map(|leaf| match leaf {
                Leaf::Cell {
                    height: Some(h), ..
                } => {
                    let rank = heights.binary_search(h).expect("height was collected");
                    Some(is_forever || band > rank)
                }
                Leaf::Cell { height: None, .. } => Some(is_forever),
                _ => unreachable!(),
            })
            .collect();
        match eval_partial(formula, &assign) {
            Ternary::True => total += &mass,
            Ternary::False => {}
            Ternary::Undetermined => unreachable!("fully assigned formula stayed undetermined"),
        }
    }
    Ok(total)
}

#[cfg(test)]
pub(crate) mod oracle {
    //! Brute-force bounds used as an independent check on exact masses:
    //! resolve every depth-`depth` prefix and weigh the verdicts. For events
    //! fully decided by `depth` bits the two bounds coincide with the mass.

    use super::*;

    pub(crate) fn mass_bounds(
        event: &Event,
        measure: &MeasureSpec,
        depth: usize,
    ) -> (Rational, Rational) {
        let mut lower = Rational::zero();
        let mut undecided = Rational::zero();
        for x in BitString::all_of_length(depth) {
            match event.resolve(&x) {
                Ternary::True => lower += &measure.mass(&x).unwrap(),
                Ternary::Undetermined => undecided += &measure.mass(&x).unwrap(),
                Ternary::False => {}
            }
        }
        (lower.clone(), lower + undecided)
    }

    /// Exact brute-force mass: requires every depth-`depth` prefix to be
    /// decided.
    pub(crate) fn exact_mass(event: &Event, measure: &MeasureSpec, depth: usize) -> Rational {
        let (lower, upper) = mass_bounds(event, measure, depth);
        assert_eq!(lower, upper, "event not decided at depth {depth}: {event}");
        lower
    }
}

#[cfg(test)]
mod tests {
    use super::oracle::{exact_mass, mass_bounds};
    use super::*;
    use proptest::prelude::*;

    fn b(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn set(strs: &[&str]) -> ClopenSet {
        ClopenSet::canonicalize(strs.iter().map(|s| b(s)))
    }

    fn edge_measure() -> MeasureSpec {
        MeasureSpec::Bernoulli(branching::edge_retention())
    }

    #[test]
    fn clopen_event_masses() {
        let e = Event::clopen(set(&["0", "11"]));
        assert_eq!(e.mass(&MeasureSpec::Uniform).unwrap(), r("3/4"));
        let complement = !e.clone();
        assert_eq!(complement.mass(&MeasureSpec::Uniform).unwrap(), r("1/4"));
        assert_eq!(
            exact_mass(&e, &MeasureSpec::Uniform, e.read_depth().unwrap()),
            r("3/4")
        );
        assert_eq!(Event::never().mass(&MeasureSpec::Uniform).unwrap(), r("0"));
        assert_eq!(Event::always().mass(&MeasureSpec::Uniform).unwrap(), r("1"));
    }

    #[test]
    fn row_event_mass_distinct_rows() {
        let third = MeasureSpec::bernoulli(r("1/3")).unwrap();
        let both = Event::all(vec![
            Event::row_in(0, set(&["1"])),
            Event::row_in(1, set(&["1"])),
        ]);
        assert_eq!(both.mass(&third).unwrap(), r("1/9"));
        assert_eq!(both.mass(&MeasureSpec::RealTable).unwrap(), r("1/4"));

        let either = Event::any(vec![
            Event::row_in(0, set(&["1"])),
            Event::row_in(1, set(&["1"])),
        ]);
        assert_eq!(either.mass(&third).unwrap(), r("5/9"));

        // Independent oracle: rows 0 and 1 are decided by flat depth 3.
        assert_eq!(exact_mass(&both, &third, 3), r("1/9"));
        assert_eq!(exact_mass(&either, &third, 3), r("5/9"));
    }

    #[test]
    fn row_event_mass_same_row() {
        // Within one row the combination is plain set algebra on that row.
        let e = Event::all(vec![
            Event::row_in(0, set(&["1"])),
            !Event::row_in(0, set(&["11"])),
        ]);
        assert_eq!(e.mass(&MeasureSpec::Uniform).unwrap(), r("1/4"));
        assert_eq!(exact_mass(&e, &MeasureSpec::Uniform, 2), r("1/4"));
    }

    #[test]
    fn row_event_requires_product_measure() {
        let mut w = std::collections::BTreeMap::new();
        w.insert(b("0"), r("1/2"));
        w.insert(b("1"), r("1/2"));
        let explicit = MeasureSpec::explicit(1, w).unwrap();
        let e = Event::row_in(0, set(&["1"]));
        assert!(matches!(
            e.mass(&explicit),
            Err(EventError::Unsupported(_))
        ));
    }

    #[test]
    fn tree_cell_masses() {
        let m = edge_measure();
        assert_eq!(
            Event::tree_cell(BitString::empty(), Some(1)).mass(&m).unwrap(),
            r("8/9")
        );
        assert_eq!(Event::tree_cell(b("0"), Some(0)).mass(&m).unwrap(), r("2/3"));
        assert_eq!(
            Event::tree_cell(b("0"), Some(1)).mass(&m).unwrap(),
            r("16/27")
        );
        assert_eq!(
            Event::tree_cell(BitString::empty(), None).mass(&m).unwrap(),
            r("3/4")
        );
    }

    #[test]
    fn tree_cell_chain_band() {
        let m = edge_measure();
        let reach1 = Event::tree_cell(BitString::empty(), Some(1));
        let reach2 = Event::tree_cell(BitString::empty(), Some(2));
        let band = reach1.difference(&reach2);
        // 8/9 - 608/729 = 40/729.
        assert_eq!(band.mass(&m).unwrap(), r("40/729"));
        assert_eq!(exact_mass(&band, &m, band.read_depth().unwrap()), r("40/729"));

        // Nesting collapses under union.
        let union = Event::any(vec![reach2.clone(), reach1.clone()]);
        assert_eq!(union.mass(&m).unwrap(), r("8/9"));
    }

    #[test]
    fn tree_cell_unbounded_band() {
        let m = edge_measure();
        let e = Event::tree_cell(BitString::empty(), Some(1))
            .difference(&Event::tree_cell(BitString::empty(), None));
        assert_eq!(e.mass(&m).unwrap(), r("5/36"));
        // The oracle can only bracket: unbounded survival is never confirmed
        // at finite depth, but the bracket must contain the exact value.
        let (lower, upper) = mass_bounds(&e, &m, 6);
        assert!(lower < r("5/36"));
        assert!(upper > r("5/36"));
        assert!(lower > r("0"));
        assert!(upper < r("1"));
    }

    #[test]
    fn unsupported_combinations() {
        let mixed = Event::all(vec![
            Event::row_in(0, set(&["1"])),
            Event::tree_cell(b("0"), Some(1)),
        ]);
        assert!(matches!(
            mixed.mass(&MeasureSpec::Uniform),
            Err(EventError::Unsupported(_))
        ));

        let two_vertices = Event::all(vec![
            Event::tree_cell(b("0"), Some(1)),
            Event::tree_cell(b("1"), Some(1)),
        ]);
        assert!(matches!(
            two_vertices.mass(&edge_measure()),
            Err(EventError::Unsupported(_))
        ));

        let wrong_measure = Event::tree_cell(b("0"), Some(1));
        assert!(matches!(
            wrong_measure.mass(&MeasureSpec::Uniform),
            Err(EventError::Unsupported(_))
        ));
    }

    #[test]
    fn trivial_leaves_fold_to_constants() {
        // Empty and full clopen parts act as constants inside any family.
        let e = Event::any(vec![
            Event::never(),
            Event::all(vec![Event::row_in(2, set(&["0"])), Event::always()]),
        ]);
        assert_eq!(e.mass(&MeasureSpec::Uniform).unwrap(), r("1/2"));
        let f = Event::any(vec![
            Event::always(),
            Event::tree_cell(b("0"), Some(3)),
        ]);
        assert_eq!(f.mass(&edge_measure()).unwrap(), r("1"));
    }

    #[test]
    fn resolve_tree_cells() {
        let reach1 = Event::tree_cell(BitString::empty(), Some(1));
        // Bit 0 codes the edge above vertex "0", bit 1 the edge above "1".
        assert_eq!(reach1.resolve(&b("1")), Ternary::True);
        assert_eq!(reach1.resolve(&b("0")), Ternary::Undetermined);
        assert_eq!(reach1.resolve(&b("00")), Ternary::False);
        assert_eq!(reach1.resolve(&b("01")), Ternary::True);

        let forever = Event::tree_cell(BitString::empty(), None);
        assert_eq!(forever.resolve(&b("00")), Ternary::False);
        assert_eq!(forever.resolve(&b("11")), Ternary::Undetermined);
        assert_eq!(forever.resolve(&BitString::empty()), Ternary::Undetermined);
    }

    #[test]
    fn resolve_row_sets() {
        let e = Event::row_in(1, set(&["1"]));
        // Row 1 starts at flat position 2.
        assert_eq!(e.resolve(&b("00")), Ternary::Undetermined);
        assert_eq!(e.resolve(&b("001")), Ternary::True);
        assert_eq!(e.resolve(&b("000")), Ternary::False);
    }

    #[test]
    fn read_depths() {
        assert_eq!(Event::clopen(set(&["01"])).read_depth(), Some(2));
        assert_eq!(Event::row_in(1, set(&["1"])).read_depth(), Some(3));
        assert_eq!(
            Event::tree_cell(BitString::empty(), Some(1)).read_depth(),
            Some(2)
        );
        assert_eq!(
            Event::tree_cell(BitString::empty(), Some(2)).read_depth(),
            Some(6)
        );
        assert_eq!(Event::tree_cell(b("0"), Some(0)).read_depth(), Some(1));
        assert_eq!(Event::tree_cell(b("1"), Some(0)).read_depth(), Some(2));
        assert_eq!(Event::tree_cell(b("0"), None).read_depth(), None);
        let combo = Event::all(vec![
            Event::clopen(set(&["01"])),
            Event::tree_cell(BitString::empty(), Some(2)),
        ]);
        assert_eq!(combo.read_depth(), Some(6));
        assert_eq!(Event::all(vec![]).read_depth(), Some(0));
    }

    #[test]
    fn materialize_small_events() {
        let reach1 = Event::tree_cell(BitString::empty(), Some(1));
        let materialized = reach1.materialize(1_000).unwrap();
        assert_eq!(materialized, set(&["1", "01"]));
        assert_eq!(
            edge_measure().clopen_mass(&materialized).unwrap(),
            r("8/9")
        );

        let forever = Event::tree_cell(BitString::empty(), None);
        assert!(matches!(
            forever.materialize(1_000),
            Err(EventError::BudgetExhausted { .. })
        ));
    }

    #[test]
    fn resolve_matches_read_depth_guarantee() {
        let events = vec![
            Event::clopen(set(&["0", "11"])),
            Event::row_in(0, set(&["1"])).symmetric_difference(&Event::row_in(1, set(&["0"]))),
            Event::tree_cell(BitString::empty(), Some(2)),
        ];
        for e in events {
            let depth = e.read_depth().unwrap();
            for x in BitString::all_of_length(depth) {
                assert_ne!(e.resolve(&x), Ternary::Undetermined, "{e} at {x}");
            }
        }
    }

    fn clopen_strategy() -> impl Strategy<Value = ClopenSet> {
        prop::collection::vec((0usize..=3, any::<u8>()), 0..5).prop_map(|words| {
            ClopenSet::canonicalize(words.into_iter().map(|(len, raw)| {
                BitString::from_bits((0..len).map(|i| (raw >> i) & 1 == 1).collect())
            }))
        })
    }

    fn clopen_event_strategy() -> impl Strategy<Value = Event> {
        clopen_strategy().prop_map(Event::Clopen).prop_recursive(
            3,
            12,
            3,
            |inner| {
                prop_oneof![
                    inner.clone().prop_map(|e| Event::Not(Box::new(e))),
                    prop::collection::vec(inner.clone(), 0..3).prop_map(Event::All),
                    prop::collection::vec(inner, 0..3).prop_map(Event::Any),
                ]
            },
        )
    }

    proptest! {
        /// Symbolic mass, materialized mass, and the brute-force oracle all
        /// agree on clopen combinations.
        #[test]
        fn clopen_mass_routes_agree(event in clopen_event_strategy()) {
            let uniform = MeasureSpec::Uniform;
            let symbolic = event.mass(&uniform).unwrap();
            let materialized = event.materialize(100_000).unwrap();
            prop_assert_eq!(&symbolic, &uniform.clopen_mass(&materialized).unwrap());
            let depth = event.read_depth().unwrap();
            prop_assert_eq!(&symbolic, &exact_mass(&event, &uniform, depth));
        }

        /// Resolution is monotone: a verdict at a prefix persists at every
        /// extension.
        #[test]
        fn resolve_is_monotone(event in clopen_event_strategy(), raw in any::<u8>()) {
            let x = BitString::from_bits((0..8).map(|i| (raw >> i) & 1 == 1).collect());
            for n in 0..=8usize {
                let early = event.resolve(&x.prefix(n));
                if early != Ternary::Undetermined {
                    for m in n..=8 {
                        prop_assert_eq!(event.resolve(&x.prefix(m)), early);
                    }
                    break;
                }
            }
        }
    }
}
