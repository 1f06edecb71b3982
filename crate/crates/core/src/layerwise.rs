//! Staged representations of measurable bit-valued maps on `{0,1}^N`, and the
//! conversions between them.
//!
//! Three interchangeable presentations of "a map computed layer by layer":
//!
//! * [`CauchyMap`] — per output bit, a level-indexed sequence of events
//!   `C_0, C_1, ...` with certified consecutive distance
//!   `mass(C_i Δ C_{i+1}) ≤ 2^-i`, so every level carries an explicit error
//!   budget against the limit bit.
//! * [`TotalMonotoneMap`] — a prefix-monotone emitter `emit : {0,1}* →
//!   {0,1}*`; output bits become Cauchy stages by enumerating input prefixes
//!   until the undecided mass is small ([`from_total`]).
//! * [`ModulusMachine`] — a step/modulus pair: `step(prefix, t)` reports the
//!   output cells already determined at time `t`, and `modulus(k, ε)` bounds
//!   the time after which cell `k` changes with probability at most `ε`.
//!
//! Round trips through [`to_machine`] / [`from_machine`] are exact: a machine
//! built from staged bits schedules one stage per resolution pass, so reading
//! it back at precision `2^-i` returns stage `i+1` of the original bit — no
//! enumeration, no slack beyond the stage shift.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use crate::bits::BitString;
use crate::clopen::{ClopenSet, Ternary};
use crate::event::{Event, EventError};
use crate::measure::MeasureSpec;
use crate::mltest::{BoundSpec, StagedTest};
use crate::rational::Rational;

/// One output bit presented as a level-indexed sequence of events.
///
/// Contract: `mass(stage(i) Δ stage(i+1)) ≤ 2^-i` under the owning map's base
/// measure, hence `mass(stage(i) Δ limit) ≤ 2·2^-i`.
pub trait StagedBit: Send + Sync {
    /// The level-`i` approximation to this bit's 1-set.
    fn stage(&self, level: usize) -> Event;

    /// An event containing every input on which any stage from `level`
    /// onward (including the limit) can still disagree with `stage(level)`,
    /// with mass at most `2^-level`. `None` when no such certified region is
    /// available.
    fn change_region(&self, level: usize) -> Option<Event>;

    /// Input depth sufficient to resolve membership in `stage(level)` on any
    /// prefix. `None` if unbounded.
    fn read_depth(&self, level: usize) -> Option<usize> {
        self.stage(level).read_depth()
    }
}

/// A bit that never moves: every stage is the same clopen set.
pub struct ClopenBit {
    set: ClopenSet,
}

impl ClopenBit {
    pub fn new(set: ClopenSet) -> Self {
        ClopenBit { set }
    }
}

impl StagedBit for ClopenBit {
    fn stage(&self, _level: usize) -> Event {
        Event::clopen(self.set.clone())
    }

    fn change_region(&self, _level: usize) -> Option<Event> {
        Some(Event::never())
    }
}

/// A bit with finitely many stored stages, constant from the last one on.
/// The represented limit is the final stored stage.
pub struct FiniteStagedBit {
    stages: Vec<ClopenSet>,
}

impl FiniteStagedBit {
    pub fn new(stages: Vec<ClopenSet>) -> Self {
        assert!(!stages.is_empty(), "a staged bit needs at least one stage");
        FiniteStagedBit { stages }
    }

    fn clamp(&self, level: usize) -> usize {
        level.min(self.stages.len() - 1)
    }
}

impl StagedBit for FiniteStagedBit {
    fn stage(&self, level: usize) -> Event {
        Event::clopen(self.stages[self.clamp(level)].clone())
    }

    fn change_region(&self, level: usize) -> Option<Event> {
        let from = self.clamp(level);
        let parts: Vec<Event> = (from..self.stages.len() - 1)
            .map(|j| Event::clopen(self.stages[j].symmetric_difference(&self.stages[j + 1])))
            .collect();
        Some(Event::any(parts))
    }
}

/// A view of another bit with all levels shifted deeper by a constant. Used
/// to give a joint map a per-bit `2^-(i+k+1)` error schedule whose sum stays
/// below `2^-i`.
pub struct ShiftedBit {
    inner: Arc<dyn StagedBit>,
    shift: usize,
}

impl ShiftedBit {
    pub fn new(inner: Arc<dyn StagedBit>, shift: usize) -> Self {
        ShiftedBit { inner, shift }
    }
}

impl StagedBit for ShiftedBit {
    fn stage(&self, level: usize) -> Event {
        self.inner.stage(level + self.shift)
    }

    fn change_region(&self, level: usize) -> Option<Event> {
        self.inner.change_region(level + self.shift)
    }

    fn read_depth(&self, level: usize) -> Option<usize> {
        self.inner.read_depth(level + self.shift)
    }
}

/// Joint evaluation of several staged bits over one base measure.
#[derive(Clone)]
pub struct CauchyMap {
    name: String,
    base: MeasureSpec,
    bits: Vec<Arc<dyn StagedBit>>,
}

/// Result of evaluating a map's bits on an input prefix at one level.
#[derive(Debug, Clone)]
pub struct EvalResult {
    /// Per-bit membership of the prefix in the level-`level` stage;
    /// `Undetermined` when the prefix is too short to resolve it.
    pub bits: Vec<Ternary>,
    pub level: usize,
    /// Certified bound on the base-measure of inputs where any single
    /// reported bit differs from its limit value. The staged construction
    /// achieves `2·2^-level`; the declared constant `4·2^-level` leaves
    /// headroom for representation round trips.
    pub certificate: Rational,
}

impl CauchyMap {
    pub fn new(name: impl Into<String>, base: MeasureSpec, bits: Vec<Arc<dyn StagedBit>>) -> Self {
        CauchyMap {
            name: name.into(),
            base,
            bits,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn base_measure(&self) -> &MeasureSpec {
        &self.base
    }

    pub fn bit_count(&self) -> usize {
        self.bits.len()
    }

    /// The level-`i` event approximating output bit `k`'s 1-set.
    pub fn bit_stage(&self, k: usize, level: usize) -> Event {
        assert!(k < self.bits.len(), "map has {} bits, asked for bit {k}", self.bits.len());
        self.bits[k].stage(level)
    }

    /// The level-`i` event "bit `k` approximates to `value`".
    pub fn bit_match(&self, k: usize, level: usize, value: bool) -> Event {
        let stage = self.bit_stage(k, level);
        if value {
            stage
        } else {
            !stage
        }
    }

    /// Inputs whose level-`i` output bits `0..|u|` all match `u`. Each bit is
    /// read at the same level, so the event differs from the true preimage of
    /// the cylinder of `u` by mass at most `|u| · 2·2^-i`.
    pub fn word_match(&self, level: usize, u: &BitString) -> Event {
        Event::all(
            (0..u.len())
                .map(|k| self.bit_match(k, level, u.bit(k)))
                .collect(),
        )
    }

    /// Like [`CauchyMap::word_match`], but bit `k` is read at level
    /// `base_level + k + 1`, so the total error over all bits telescopes to
    /// at most `2·2^-base_level` regardless of `|u|`.
    pub fn word_match_diagonal(&self, base_level: usize, u: &BitString) -> Event {
        Event::all(
            (0..u.len())
                .map(|k| self.bit_match(k, base_level + k + 1, u.bit(k)))
                .collect(),
        )
    }

    pub fn change_region(&self, k: usize, level: usize) -> Option<Event> {
        self.bits[k].change_region(level)
    }

    /// Union over all bits of the bit-`k` change region at level `i+k+1`.
    /// For the staggered schedule the mass telescopes below `2^-i`. `None`
    /// if any bit lacks a certified change region.
    pub fn joint_change_region(&self, level: usize) -> Option<Event> {
        let mut parts = Vec::with_capacity(self.bits.len());
        for (k, bit) in self.bits.iter().enumerate() {
            parts.push(bit.change_region(level + k + 1)?);
        }
        Some(Event::any(parts))
    }

    /// The map's instability packaged as a staged test: level `i` at time `t`
    /// collects the change regions of bits `0..=t` at levels `i+k+1`. Inputs
    /// whose outputs keep moving at late levels fail the test at every level.
    /// `None` if some bit lacks a certified change region.
    pub fn defect_test(&self) -> Option<StagedTest> {
        for (k, bit) in self.bits.iter().enumerate() {
            // Probe availability once so the closure below cannot fail.
            bit.change_region(k + 2)?;
        }
        let bits: Vec<Arc<dyn StagedBit>> = self.bits.iter().map(Arc::clone).collect();
        Some(StagedTest::new(
            format!("defect({})", self.name),
            BoundSpec::PowHalf,
            true,
            move |i, t| {
                let parts: Vec<Event> = bits
                    .iter()
                    .enumerate()
                    .take_while(|(k, _)| *k <= t)
                    .map(|(k, bit)| {
                        bit.change_region(i + k + 1)
                            .expect("change region availability was probed at construction")
                    })
                    .collect();
                Event::any(parts)
            },
        ))
    }

    /// Union of consecutive stage differences of bit `k` over levels
    /// `from_level <= j < horizon`; contains every input whose bit-`k`
    /// approximation moves inside that window. Mass at most `2·2^-from_level`
    /// for any horizon.
    pub fn agreement_defect(&self, k: usize, from_level: usize, horizon: usize) -> Event {
        let parts: Vec<Event> = (from_level..horizon)
            .map(|j| {
                self.bit_stage(k, j)
                    .symmetric_difference(&self.bit_stage(k, j + 1))
            })
            .collect();
        Event::any(parts)
    }

    /// [`CauchyMap::agreement_defect`] packaged as a staged test whose time
    /// parameter is the horizon, with the declared bound `4·2^-i`.
    pub fn agreement_defect_test(&self, k: usize) -> StagedTest {
        let bit = Arc::clone(&self.bits[k]);
        StagedTest::new(
            format!("agreement({}, bit {k})", self.name),
            BoundSpec::Custom(Arc::new(|i| {
                Rational::from_int(4) * Rational::pow2(-(i as i32))
            })),
            true,
            move |i, t| {
                let parts: Vec<Event> = (i..t)
                    .map(|j| bit.stage(j).symmetric_difference(&bit.stage(j + 1)))
                    .collect();
                Event::any(parts)
            },
        )
    }

    /// Resolve every output bit's level-`level` stage on the prefix `x`.
    pub fn eval(&self, x: &BitString, level: usize) -> EvalResult {
        let bits = (0..self.bits.len())
            .map(|k| self.bit_stage(k, level).resolve(x))
            .collect();
        EvalResult {
            bits,
            level,
            certificate: Rational::from_int(4) * Rational::pow2(-(level as i32)),
        }
    }
}

impl fmt::Debug for CauchyMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "CauchyMap({}, {} bits, base {:?})",
            self.name,
            self.bits.len(),
            self.base
        )
    }
}

/// Exact mass of the symmetric difference between two maps' bit-`k` stages
/// at one level, under `a`'s base measure.
pub fn stage_distance(
    a: &CauchyMap,
    b: &CauchyMap,
    k: usize,
    level: usize,
) -> Result<Rational, EventError> {
    a.bit_stage(k, level)
        .symmetric_difference(&b.bit_stage(k, level))
        .mass(a.base_measure())
}

/// The map whose bit `k` copies input bit `k`, with `nbits` declared bits.
pub fn identity_map(base: MeasureSpec, nbits: usize) -> CauchyMap {
    let bits = (0..nbits)
        .map(|k| {
            let words: Vec<BitString> = BitString::all_of_length(k)
                .into_iter()
                .map(|w| w.child(true))
                .collect();
            Arc::new(ClopenBit::new(ClopenSet::canonicalize(words))) as Arc<dyn StagedBit>
        })
        .collect();
    CauchyMap::new("identity", base, bits)
}

/// Reindex per-bit approximations so that bit `k` runs `k+1` levels ahead:
/// at joint level `i`, bit `k` is taken at its own level `i+k+1`. The joint
/// error over all bits then telescopes below `2^-i` per level.
pub fn combine_bits(
    name: impl Into<String>,
    base: MeasureSpec,
    bits: Vec<Arc<dyn StagedBit>>,
) -> CauchyMap {
    let shifted = bits
        .into_iter()
        .enumerate()
        .map(|(k, bit)| Arc::new(ShiftedBit::new(bit, k + 1)) as Arc<dyn StagedBit>)
        .collect();
    CauchyMap::new(name, base, shifted)
}

/// A prefix-monotone emitter: `emit(x)` is the part of the output determined
/// by the input prefix `x`, and lengthening `x` only extends it.
pub struct TotalMonotoneMap {
    name: String,
    base: MeasureSpec,
    emit: Arc<dyn Fn(&BitString) -> BitString + Send + Sync>,
}

impl TotalMonotoneMap {
    pub fn new(
        name: impl Into<String>,
        base: MeasureSpec,
        emit: impl Fn(&BitString) -> BitString + Send + Sync + 'static,
    ) -> Self {
        TotalMonotoneMap {
            name: name.into(),
            base,
            emit: Arc::new(emit),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn base_measure(&self) -> &MeasureSpec {
        &self.base
    }

    pub fn emit(&self, x: &BitString) -> BitString {
        (self.emit)(x)
    }

    /// Search all prefixes up to `depth` for a monotonicity violation:
    /// a pair `(x, x·b)` where `emit(x)` is not a prefix of `emit(x·b)`.
    pub fn find_monotonicity_violation(&self, depth: usize) -> Option<(BitString, BitString)> {
        let mut queue = VecDeque::from([BitString::empty()]);
        while let Some(x) = queue.pop_front() {
            let out = self.emit(&x);
            if x.len() < depth {
                for b in [false, true] {
                    let child = x.child(b);
                    if !out.is_prefix_of(&self.emit(&child)) {
                        return Some((x, child));
                    }
                    queue.push_back(child);
                }
            }
        }
        None
    }
}

impl fmt::Debug for TotalMonotoneMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TotalMonotoneMap({}, base {:?})", self.name, self.base)
    }
}

/// Outcome of a budgeted prefix enumeration: either the undecided mass fell
/// below the target, or the budget ran out first. Running out is a result,
/// not an error — `best` is still a sound partial answer and `deficit` is
/// the exact undecided mass it leaves.
#[derive(Debug, Clone)]
pub enum TotalConversion {
    Converged(ClopenSet),
    BudgetExhausted { best: ClopenSet, deficit: Rational },
}

impl TotalConversion {
    pub fn set(&self) -> &ClopenSet {
        match self {
            TotalConversion::Converged(set) => set,
            TotalConversion::BudgetExhausted { best, .. } => best,
        }
    }
}

/// Enumerate input prefixes breadth-first until the mass of inputs whose
/// output bit `k` is still undecided drops to `2^-level` or below. The
/// returned clopen set agrees with the limit bit except on the undecided
/// remainder, so its indicator is within `2^-level` of the bit in measure.
/// Each `emit` call costs one unit of `budget`.
pub fn from_total(
    f: &TotalMonotoneMap,
    k: usize,
    level: usize,
    budget: u64,
) -> Result<TotalConversion, EventError> {
    let measure = f.base_measure();
    let target = Rational::pow2(-(level as i32));
    let mut ones: Vec<BitString> = Vec::new();
    let mut frontier = VecDeque::from([BitString::empty()]);
    let mut undecided = Rational::one();
    let mut spent = 0u64;
    while undecided > target {
        let Some(x) = frontier.pop_front() else {
            break; // every branch decided: undecided is exactly 0
        };
        if spent >= budget {
            return Ok(TotalConversion::BudgetExhausted {
                best: ClopenSet::canonicalize(ones),
                deficit: undecided,
            });
        }
        spent += 1;
        let out = f.emit(&x);
        if out.len() > k {
            if out.bit(k) {
                ones.push(x.clone());
            }
            undecided = undecided - measure.mass(&x)?;
        } else {
            frontier.push_back(x.child(false));
            frontier.push_back(x.child(true));
        }
    }
    Ok(TotalConversion::Converged(ClopenSet::canonicalize(ones)))
}

/// Build a staged map from a monotone emitter by running [`from_total`] at
/// target `2^-(i+1)` for every level `i <= max_level`; consecutive stages
/// then differ by at most `2^-(i+1)) + 2^-(i+2) < 2^-i` in measure. Stages
/// are frozen at `max_level`, so the represented limit is the deepest stage.
/// A budget exhaustion here is an error: a partial stage would break the
/// distance certificate.
pub fn total_to_cauchy(
    f: &TotalMonotoneMap,
    nbits: usize,
    max_level: usize,
    budget_per_stage: u64,
) -> Result<CauchyMap, EventError> {
    let mut bits: Vec<Arc<dyn StagedBit>> = Vec::with_capacity(nbits);
    for k in 0..nbits {
        let mut stages = Vec::with_capacity(max_level + 1);
        for i in 0..=max_level {
            match from_total(f, k, i + 1, budget_per_stage)? {
                TotalConversion::Converged(set) => stages.push(set),
                TotalConversion::BudgetExhausted { .. } => {
                    return Err(EventError::BudgetExhausted {
                        budget: budget_per_stage,
                    })
                }
            }
        }
        bits.push(Arc::new(FiniteStagedBit::new(stages)));
    }
    Ok(CauchyMap::new(f.name().to_string(), f.base_measure().clone(), bits))
}

/// A step/modulus presentation: `step(prefix, t)` reports output cells whose
/// time-`t` values the prefix already determines (reported values never
/// change when the prefix lengthens), and `modulus(k, ε)` is a time after
/// which cell `k` changes with probability at most `ε`.
pub enum ModulusMachine {
    /// Built from staged bits: the machine performs bit `k`'s stages in
    /// order, stage `j` costing `read_depth(stage j) + 1` steps.
    Staged { map: Arc<CauchyMap> },
    /// Caller-supplied step and modulus functions.
    External {
        name: String,
        base: MeasureSpec,
        step: Arc<dyn Fn(&BitString, u64) -> BTreeMap<usize, bool> + Send + Sync>,
        modulus: Arc<dyn Fn(usize, &Rational) -> u64 + Send + Sync>,
    },
}

impl ModulusMachine {
    pub fn name(&self) -> &str {
        match self {
            ModulusMachine::Staged { map } => map.name(),
            ModulusMachine::External { name, .. } => name,
        }
    }

    pub fn base_measure(&self) -> &MeasureSpec {
        match self {
            ModulusMachine::Staged { map } => map.base_measure(),
            ModulusMachine::External { base, .. } => base,
        }
    }

    /// Cumulative cost of bit `k`'s first `stages` stages (levels `1..=stages`).
    fn schedule(map: &CauchyMap, k: usize, stages: usize) -> u64 {
        (1..=stages)
            .map(|j| {
                let depth = map.bits()[k]
                    .read_depth(j)
                    .expect("scheduled bits must expose a finite read depth");
                depth as u64 + 1
            })
            .sum()
    }

    /// Cells determined by `prefix` at time `t`.
    pub fn step(&self, prefix: &BitString, t: u64) -> BTreeMap<usize, bool> {
        match self {
            ModulusMachine::Staged { map } => {
                let mut out = BTreeMap::new();
                for k in 0..map.bit_count() {
                    let mut finished = 0usize;
                    let mut cost = 0u64;
                    loop {
                        let next = cost
                            + map.bits()[k]
                                .read_depth(finished + 1)
                                .expect("scheduled bits must expose a finite read depth")
                                as u64
                            + 1;
                        if next > t {
                            break;
                        }
                        cost = next;
                        finished += 1;
                    }
                    if finished >= 1 {
                        match map.bit_stage(k, finished).resolve(prefix) {
                            Ternary::True => {
                                out.insert(k, true);
                            }
                            Ternary::False => {
                                out.insert(k, false);
                            }
                            Ternary::Undetermined => {}
                        }
                    }
                }
                out
            }
            ModulusMachine::External { step, .. } => step(prefix, t),
        }
    }

    /// A time after which cell `k` changes with probability at most `eps`.
    pub fn modulus(&self, k: usize, eps: &Rational) -> u64 {
        match self {
            ModulusMachine::Staged { map } => {
                assert!(!eps.is_zero() && !eps.is_negative(), "modulus needs a positive tolerance");
                let mut n = 0usize;
                while Rational::pow2(-(n as i32)) > *eps {
                    n += 1;
                }
                // After finishing stage n+1, the cell equals membership in
                // stage n+1, and later stages move it only inside the union
                // of deeper consecutive differences, of mass at most
                // 2^-(n+1) + 2^-(n+2) + ... = 2^-n <= eps.
                Self::schedule(map, k, n + 1)
            }
            ModulusMachine::External { modulus, .. } => modulus(k, eps),
        }
    }
}

impl CauchyMap {
    fn bits(&self) -> &[Arc<dyn StagedBit>] {
        &self.bits
    }
}

impl fmt::Debug for ModulusMachine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModulusMachine::Staged { map } => write!(f, "ModulusMachine(staged {})", map.name()),
            ModulusMachine::External { name, .. } => write!(f, "ModulusMachine(external {name})"),
        }
    }
}

/// Wrap a staged map as a machine that performs one stage per pass.
pub fn to_machine(map: Arc<CauchyMap>) -> ModulusMachine {
    ModulusMachine::Staged { map }
}

/// Inputs whose cell `k` reads 1 at time `modulus(k, 2^-level)`.
///
/// For a staged machine this is exactly stage `level+1` of the underlying
/// bit — the schedule finishes that stage precisely at the modulus time — so
/// no enumeration happens and deep symbolic stages pass through unchanged.
/// For an external machine the set is materialized by refining input
/// prefixes until `step` reports cell `k`; each `step` call costs one unit
/// of `budget`, and inputs the machine never decides exhaust it.
pub fn from_machine(
    mm: &ModulusMachine,
    k: usize,
    level: usize,
    budget: u64,
) -> Result<Event, EventError> {
    match mm {
        ModulusMachine::Staged { map } => Ok(map.bit_stage(k, level + 1)),
        ModulusMachine::External { step, .. } => {
            let t = mm.modulus(k, &Rational::pow2(-(level as i32)));
            let mut ones = Vec::new();
            let mut stack = vec![BitString::empty()];
            let mut spent = 0u64;
            while let Some(x) = stack.pop() {
                if spent >= budget {
                    return Err(EventError::BudgetExhausted { budget });
                }
                spent += 1;
                match step(&x, t).get(&k) {
                    Some(true) => ones.push(x),
                    Some(false) => {}
                    None => {
                        stack.push(x.child(false));
                        stack.push(x.child(true));
                    }
                }
            }
            Ok(Event::clopen(ClopenSet::canonicalize(ones)))
        }
    }
}

/// Read a machine back into staged form. A staged machine is unwrapped
/// exactly (bit `k`'s new level `i` is the old level `i+1`; `nbits`,
/// `max_level`, and `budget` are ignored). An external machine is sampled
/// at levels `0..=max_level` for `nbits` bits, materializing each stage.
pub fn machine_to_cauchy(
    mm: &ModulusMachine,
    nbits: usize,
    max_level: usize,
    budget: u64,
) -> Result<CauchyMap, EventError> {
    match mm {
        ModulusMachine::Staged { map } => {
            let bits = (0..map.bit_count())
                .map(|k| {
                    Arc::new(ShiftedBit::new(Arc::clone(&map.bits()[k]), 1)) as Arc<dyn StagedBit>
                })
                .collect();
            Ok(CauchyMap::new(
                format!("{}~", map.name()),
                map.base_measure().clone(),
                bits,
            ))
        }
        ModulusMachine::External { name, base, .. } => {
            let mut bits: Vec<Arc<dyn StagedBit>> = Vec::with_capacity(nbits);
            for k in 0..nbits {
                let mut stages = Vec::with_capacity(max_level + 1);
                for i in 0..=max_level {
                    let event = from_machine(mm, k, i, budget)?;
                    stages.push(event.materialize(budget)?);
                }
                bits.push(Arc::new(FiniteStagedBit::new(stages)));
            }
            Ok(CauchyMap::new(format!("{name}~"), base.clone(), bits))
        }
    }
}
