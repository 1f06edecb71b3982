//! Depth-indexed relations between two prefix spaces, exact transportation
//! feasibility over them, and independently checkable certificates.
//!
//! A [`RelationAtDepth`] answers, for every depth `n`, which pairs of
//! length-`n` words are compatible. [`solve_coupling`] asks whether measure
//! `P` can be transported onto measure `Q` moving mass only along related
//! pairs; the answer is always certificate-grade: a [`CouplingMatrix`] whose
//! marginals and support can be re-audited, or a [`CutCertificate`] — a set
//! of input words whose `P`-mass exceeds the `Q`-mass of everything they
//! relate to, which refutes feasibility by the marriage condition.
//!
//! Feasibility at depth `n` is a necessary condition for a coupling of the
//! full sequence spaces: any joint distribution supported on the limit
//! relation projects to a feasible matrix at every finite depth. Conversely,
//! feasibility at all depths yields a limit coupling by compactness of the
//! space of joint distributions; this module decides the finite stages.
//!
//! All arithmetic is exact: capacities share a common denominator, so the
//! max-flow runs on big integers and the reported flow values are exact
//! rationals.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num::integer::lcm;
use num::{BigInt, Zero};

use crate::bits::BitString;
use crate::clopen::ClopenSet;
use crate::measure::{MeasureError, MeasureSpec};
use crate::rational::Rational;

/// A family of boolean predicates on pairs of equal-length words, one per
/// depth. Intended to satisfy downward coherence (related at depth `n+1`
/// implies related prefixes at depth `n`) and totality (every `u` has some
/// related `v`); [`check_conditions`] audits both exhaustively.
#[derive(Clone)]
pub struct RelationAtDepth {
    name: String,
    rel: Arc<dyn Fn(usize, &BitString, &BitString) -> bool + Send + Sync>,
}

impl RelationAtDepth {
    pub fn new(
        name: impl Into<String>,
        rel: impl Fn(usize, &BitString, &BitString) -> bool + Send + Sync + 'static,
    ) -> Self {
        RelationAtDepth {
            name: name.into(),
            rel: Arc::new(rel),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn holds(&self, depth: usize, u: &BitString, v: &BitString) -> bool {
        assert_eq!(u.len(), depth, "first word must have length {depth}");
        assert_eq!(v.len(), depth, "second word must have length {depth}");
        (self.rel)(depth, u, v)
    }
}

impl fmt::Debug for RelationAtDepth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RelationAtDepth({})", self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CouplingError {
    Measure(MeasureError),
    /// A positive-mass row has no related column, so no row assignment
    /// exists. Zero-mass rows are exempt: relations may be restricted to the
    /// support of the measure in play.
    TotalityViolation { depth: usize, row: BitString },
}

impl From<MeasureError> for CouplingError {
    fn from(e: MeasureError) -> Self {
        CouplingError::Measure(e)
    }
}

impl fmt::Display for CouplingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CouplingError::Measure(e) => write!(f, "{e}"),
            CouplingError::TotalityViolation { depth, row } => {
                write!(f, "row {row} at depth {depth} has positive mass but no related column")
            }
        }
    }
}

impl std::error::Error for CouplingError {}

/// Exhaustive audit of the relation contract up to a depth.
#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub max_depth: usize,
    /// `(depth, u)` pairs where `u` has no related `v`.
    pub totality_violations: Vec<(usize, BitString)>,
    /// `(depth, u·c, v·d)` related pairs whose depth-`depth` prefixes are not.
    pub coherence_violations: Vec<(usize, BitString, BitString)>,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.totality_violations.is_empty() && self.coherence_violations.is_empty()
    }
}

/// Scan every pair of words up to `max_depth` for totality and downward
/// coherence. Violations are data, not errors.
pub fn check_conditions(r: &RelationAtDepth, max_depth: usize) -> ConditionReport {
    let mut totality_violations = Vec::new();
    let mut coherence_violations = Vec::new();
    for n in 1..=max_depth {
        let words = BitString::all_of_length(n);
        for u in &words {
            if !words.iter().any(|v| r.holds(n, u, v)) {
                totality_violations.push((n, u.clone()));
            }
        }
        if n < max_depth {
            let longer = BitString::all_of_length(n + 1);
            for u in &longer {
                for v in &longer {
                    if r.holds(n + 1, u, v)
                        && !r.holds(n, &u.prefix(n), &v.prefix(n))
                    {
                        coherence_violations.push((n, u.clone(), v.clone()));
                    }
                }
            }
        }
    }
    ConditionReport {
        max_depth,
        totality_violations,
        coherence_violations,
    }
}

/// The canonical clopen set of depth-`depth` words `u` related to some
/// depth-`depth` extension of `v`.
///
/// The relation is only given per depth, so "related to the cylinder of `v`"
/// needs a depth at which the existential over extensions is evaluated; it
/// is exposed explicitly rather than fixed behind the API. Requires
/// `depth >= |v|`.
pub fn preimage_cylinder(r: &RelationAtDepth, v: &BitString, depth: usize) -> ClopenSet {
    assert!(
        depth >= v.len(),
        "evaluation depth {depth} is shallower than the column word ({})",
        v.len()
    );
    let mut rows = Vec::new();
    for u in BitString::all_of_length(depth) {
        let related = BitString::all_of_length(depth - v.len())
            .into_iter()
            .map(|tail| v.concat(&tail))
            .any(|ext| r.holds(depth, &u, &ext));
        if related {
            rows.push(u);
        }
    }
    ClopenSet::canonicalize(rows)
}

/// A joint assignment of mass to related pairs at one depth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CouplingMatrix {
    pub depth: usize,
    /// Only positive entries are stored.
    pub entries: BTreeMap<(BitString, BitString), Rational>,
}

/// One discrepancy found when re-auditing a matrix against its contract.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatrixAuditViolation {
    NegativeEntry {
        u: BitString,
        v: BitString,
        value: Rational,
    },
    SupportOutsideRelation {
        u: BitString,
        v: BitString,
    },
    RowSumMismatch {
        u: BitString,
        got: Rational,
        want: Rational,
    },
    ColumnSumMismatch {
        v: BitString,
        got: Rational,
        want: Rational,
    },
}

impl CouplingMatrix {
    pub fn row_sums(&self) -> BTreeMap<BitString, Rational> {
        let mut sums: BTreeMap<BitString, Rational> = BTreeMap::new();
        for ((u, _), value) in &self.entries {
            let slot = sums.entry(u.clone()).or_insert_with(Rational::zero);
            *slot = slot.clone() + value.clone();
        }
        sums
    }

    pub fn column_sums(&self) -> BTreeMap<BitString, Rational> {
        let mut sums: BTreeMap<BitString, Rational> = BTreeMap::new();
        for ((_, v), value) in &self.entries {
            let slot = sums.entry(v.clone()).or_insert_with(Rational::zero);
            *slot = slot.clone() + value.clone();
        }
        sums
    }

    /// Re-audit support and marginals with exact arithmetic. Pass `q = None`
    /// to skip the column-sum contract (row-assignment witnesses constrain
    /// only the first marginal).
    pub fn audit(
        &self,
        p: &MeasureSpec,
        q: Option<&MeasureSpec>,
        r: &RelationAtDepth,
    ) -> Result<Vec<MatrixAuditViolation>, CouplingError> {
        let mut violations = Vec::new();
        for ((u, v), value) in &self.entries {
            if value.is_negative() {
                violations.push(MatrixAuditViolation::NegativeEntry {
                    u: u.clone(),
                    v: v.clone(),
                    value: value.clone(),
                });
            }
            if !r.holds(self.depth, u, v) {
                violations.push(MatrixAuditViolation::SupportOutsideRelation {
                    u: u.clone(),
                    v: v.clone(),
                });
            }
        }
        let rows = self.row_sums();
        for u in BitString::all_of_length(self.depth) {
            let got = rows.get(&u).cloned().unwrap_or_else(Rational::zero);
            let want = p.mass(&u)?;
            if got != want {
                violations.push(MatrixAuditViolation::RowSumMismatch { u, got, want });
            }
        }
        if let Some(q) = q {
            let cols = self.column_sums();
            for v in BitString::all_of_length(self.depth) {
                let got = cols.get(&v).cloned().unwrap_or_else(Rational::zero);
                let want = q.mass(&v)?;
                if got != want {
                    violations.push(MatrixAuditViolation::ColumnSumMismatch { v, got, want });
                }
            }
        }
        Ok(violations)
    }

    /// Sum entries over the last bit of both coordinates, producing the
    /// depth-`n-1` joint distribution. Under a downward-coherent relation
    /// the projected support stays inside the relation, so a feasible matrix
    /// projects to a feasible matrix.
    pub fn project(&self) -> CouplingMatrix {
        assert!(self.depth >= 1, "cannot project a depth-0 matrix");
        let mut entries: BTreeMap<(BitString, BitString), Rational> = BTreeMap::new();
        for ((u, v), value) in &self.entries {
            let key = (u.prefix(self.depth - 1), v.prefix(self.depth - 1));
            let slot = entries.entry(key).or_insert_with(Rational::zero);
            *slot = slot.clone() + value.clone();
        }
        CouplingMatrix {
            depth: self.depth - 1,
            entries,
        }
    }
}

/// A marriage-condition violation: a set of rows whose `P`-mass strictly
/// exceeds the `Q`-mass of every column any of them relates to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutCertificate {
    pub depth: usize,
    pub input_side: Vec<BitString>,
    pub p_mass: Rational,
    pub q_mass: Rational,
}

impl CutCertificate {
    /// Recompute both masses and the related column set from scratch and
    /// confirm the strict inequality. Independent of the solver.
    pub fn verify(
        &self,
        p: &MeasureSpec,
        q: &MeasureSpec,
        r: &RelationAtDepth,
    ) -> Result<bool, CouplingError> {
        let mut p_mass = Rational::zero();
        for u in &self.input_side {
            if u.len() != self.depth {
                return Ok(false);
            }
            p_mass = p_mass + p.mass(u)?;
        }
        let mut q_mass = Rational::zero();
        for v in BitString::all_of_length(self.depth) {
            if self.input_side.iter().any(|u| r.holds(self.depth, u, &v)) {
                q_mass = q_mass + q.mass(&v)?;
            }
        }
        Ok(p_mass == self.p_mass && q_mass == self.q_mass && p_mass > q_mass)
    }
}

/// Either answer of the feasibility question, each carrying its certificate.
#[derive(Debug, Clone)]
pub enum CouplingOutcome {
    Feasible(CouplingMatrix),
    Infeasible(CutCertificate),
}

/// Maximum flow with exact integer capacities (Dinic's algorithm).
struct FlowNetwork {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<BigInt>,
}

impl FlowNetwork {
    fn new(nodes: usize) -> Self {
        FlowNetwork {
            adj: vec![Vec::new(); nodes],
            to: Vec::new(),
            cap: Vec::new(),
        }
    }

    fn add_edge(&mut self, a: usize, b: usize, cap: BigInt) -> usize {
        let id = self.to.len();
        self.adj[a].push(id);
        self.to.push(b);
        self.cap.push(cap);
        self.adj[b].push(id + 1);
        self.to.push(a);
        self.cap.push(BigInt::zero());
        id
    }

    fn bfs(&self, s: usize, t: usize) -> Option<Vec<i32>> {
        let mut level = vec![-1; self.adj.len()];
        level[s] = 0;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(x) = queue.pop_front() {
            for &e in &self.adj[x] {
                let y = self.to[e];
                if level[y] < 0 && self.cap[e] > BigInt::zero() {
                    level[y] = level[x] + 1;
                    queue.push_back(y);
                }
            }
        }
        if level[t] >= 0 {
            Some(level)
        } else {
            None
        }
    }

    fn augment(
        &mut self,
        x: usize,
        t: usize,
        pushed: BigInt,
        level: &[i32],
        iter: &mut [usize],
    ) -> BigInt {
        if x == t {
            return pushed;
        }
        while iter[x] < self.adj[x].len() {
            let e = self.adj[x][iter[x]];
            let y = self.to[e];
            if level[y] == level[x] + 1 && self.cap[e] > BigInt::zero() {
                let attempt = pushed.clone().min(self.cap[e].clone());
                let got = self.augment(y, t, attempt, level, iter);
                if got > BigInt::zero() {
                    self.cap[e] -= &got;
                    self.cap[e ^ 1] += &got;
                    return got;
                }
            }
            iter[x] += 1;
        }
        BigInt::zero()
    }

    fn max_flow(&mut self, s: usize, t: usize, limit: &BigInt) -> BigInt {
        let mut total = BigInt::zero();
        while let Some(level) = self.bfs(s, t) {
            let mut iter = vec![0usize; self.adj.len()];
            loop {
                let pushed = self.augment(s, t, limit.clone(), &level, &mut iter);
                if pushed == BigInt::zero() {
                    break;
                }
                total += pushed;
            }
        }
        total
    }

    /// Nodes reachable from `s` through positive residual capacity.
    fn residual_reachable(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(x) = stack.pop() {
            for &e in &self.adj[x] {
                let y = self.to[e];
                if !seen[y] && self.cap[e] > BigInt::zero() {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        seen
    }
}

/// Decide whether `P` can be transported onto `Q` along `r` at depth `n`.
///
/// The bipartite network routes each row's `P`-mass through relation arcs to
/// columns capped by their `Q`-mass; all capacities are scaled by a common
/// denominator so the flow is integral and exact. Total mass moves iff the
/// max flow equals the scale, in which case the flow values are the matrix.
/// Otherwise the rows still reachable in the residual network form a
/// marriage-condition violation, returned as a [`CutCertificate`].
pub fn solve_coupling(
    p: &MeasureSpec,
    q: &MeasureSpec,
    r: &RelationAtDepth,
    n: usize,
) -> Result<CouplingOutcome, CouplingError> {
    let words = BitString::all_of_length(n);
    let count = words.len();
    let mut p_mass = Vec::with_capacity(count);
    let mut q_mass = Vec::with_capacity(count);
    for w in &words {
        p_mass.push(p.mass(w)?);
        q_mass.push(q.mass(w)?);
    }
    let mut scale = BigInt::from(1);
    for mass in p_mass.iter().chain(q_mass.iter()) {
        scale = lcm(scale, mass.denom().clone());
    }
    let to_units = |mass: &Rational| -> BigInt { mass.numer() * (&scale / mass.denom()) };

    // Node layout: source, sink, then row nodes, then column nodes.
    let source = 0usize;
    let sink = 1usize;
    let row_node = |i: usize| 2 + i;
    let col_node = |j: usize| 2 + count + j;
    let mut net = FlowNetwork::new(2 + 2 * count);
    for (i, mass) in p_mass.iter().enumerate() {
        net.add_edge(source, row_node(i), to_units(mass));
    }
    for (j, mass) in q_mass.iter().enumerate() {
        net.add_edge(col_node(j), sink, to_units(mass));
    }
    // Relation arcs never bind: their capacity exceeds the total supply, so
    // a minimum cut only ever crosses source or sink arcs.
    let slack: BigInt = &scale + BigInt::from(1);
    let mut rel_edges = Vec::new();
    for (i, u) in words.iter().enumerate() {
        for (j, v) in words.iter().enumerate() {
            if r.holds(n, u, v) {
                let id = net.add_edge(row_node(i), col_node(j), slack.clone());
                rel_edges.push((i, j, id));
            }
        }
    }
    let flow = net.max_flow(source, sink, &slack);
    if flow == scale {
        let mut entries = BTreeMap::new();
        for (i, j, id) in rel_edges {
            // Residual of the paired reverse edge is exactly the flow sent.
            let sent = net.cap[id ^ 1].clone();
            if sent > BigInt::zero() {
                entries.insert(
                    (words[i].clone(), words[j].clone()),
                    Rational::from_big(sent, scale.clone()),
                );
            }
        }
        Ok(CouplingOutcome::Feasible(CouplingMatrix { depth: n, entries }))
    } else {
        let reachable = net.residual_reachable(source);
        let input_side: Vec<BitString> = words
            .iter()
            .enumerate()
            .filter(|(i, _)| reachable[row_node(*i)])
            .map(|(_, u)| u.clone())
            .collect();
        let mut cut_p = Rational::zero();
        for (i, u) in words.iter().enumerate() {
            if input_side.contains(u) {
                cut_p = cut_p + p_mass[i].clone();
            }
        }
        let mut cut_q = Rational::zero();
        for (j, v) in words.iter().enumerate() {
            if input_side.iter().any(|u| r.holds(n, u, v)) {
                cut_q = cut_q + q_mass[j].clone();
            }
        }
        Ok(CouplingOutcome::Infeasible(CutCertificate {
            depth: n,
            input_side,
            p_mass: cut_p,
            q_mass: cut_q,
        }))
    }
}

/// The constructive row-assignment witness: each positive-mass row sends its
/// whole mass to its lexicographically least related column. The result is
/// supported on the relation with exact row sums; column sums are
/// unconstrained. Rows of mass zero are skipped, so relations restricted to
/// the support of `p` are acceptable; a positive-mass row with no related
/// column is a totality violation.
pub fn class_witness(
    p: &MeasureSpec,
    r: &RelationAtDepth,
    n: usize,
) -> Result<CouplingMatrix, CouplingError> {
    let words = BitString::all_of_length(n);
    let mut entries = BTreeMap::new();
    for u in &words {
        let mass = p.mass(u)?;
        if mass.is_zero() {
            continue;
        }
        let witness = words.iter().find(|v| r.holds(n, u, v)).ok_or_else(|| {
            CouplingError::TotalityViolation {
                depth: n,
                row: u.clone(),
            }
        })?;
        entries.insert((u.clone(), witness.clone()), mass);
    }
    Ok(CouplingMatrix { depth: n, entries })
}
