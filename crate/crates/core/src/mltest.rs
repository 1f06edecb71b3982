//! Staged effectivity tests: shrinking families of open sets enumerated over
//! time, with certified mass bounds.
//!
//! A [`StagedTest`] presents, for every level `i >= 1` and enumeration time
//! `t >= 0`, an [`Event`] `stage(i, t)` standing for the time-`t` portion of
//! the level-`i` open set. The intended contract is
//!
//! * growth in time: `stage(i, t) ⊆ stage(i, t+1)`;
//! * nesting in level: `stage(i+1, t) ⊆ stage(i, t)`;
//! * mass bound: `mass(stage(i, t)) ≤ bound(i)` (by default `2^-i`).
//!
//! [`check_stage_bounds`] audits all three exhaustively on a grid with exact
//! arithmetic. [`combine_diagonal`] folds countably many tests into one by
//! the staggered-level union, and [`deficiency_lower_bound`] reports the
//! highest level a given prefix is already known to lie in — a sound lower
//! bound on the level any extension reaches.

use std::fmt;
use std::sync::Arc;

use crate::bits::BitString;
use crate::clopen::Ternary;
use crate::event::{Event, EventError};
use crate::measure::MeasureSpec;
use crate::rational::Rational;

/// Per-level mass bound of a staged test.
#[derive(Clone)]
pub enum BoundSpec {
    /// `bound(i) = 2^-i`, the standard schedule.
    PowHalf,
    /// Arbitrary level-indexed bound.
    Custom(Arc<dyn Fn(usize) -> Rational + Send + Sync>),
}

impl BoundSpec {
    pub fn bound(&self, level: usize) -> Rational {
        match self {
            BoundSpec::PowHalf => Rational::pow2(-(level as i32)),
            BoundSpec::Custom(f) => f(level),
        }
    }

    pub fn is_pow_half(&self) -> bool {
        matches!(self, BoundSpec::PowHalf)
    }
}

impl fmt::Debug for BoundSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundSpec::PowHalf => write!(f, "2^-i"),
            BoundSpec::Custom(_) => write!(f, "custom"),
        }
    }
}

/// A staged test: a level- and time-indexed family of events.
#[derive(Clone)]
pub struct StagedTest {
    name: String,
    stage_fn: Arc<dyn Fn(usize, usize) -> Event + Send + Sync>,
    bound: BoundSpec,
    /// Whether the test promises exactly computable stage masses (beyond the
    /// bare bound). Informational: audits compute masses exactly regardless.
    declared_measure_computable: bool,
}

impl StagedTest {
    pub fn new(
        name: impl Into<String>,
        bound: BoundSpec,
        declared_measure_computable: bool,
        stage_fn: impl Fn(usize, usize) -> Event + Send + Sync + 'static,
    ) -> Self {
        StagedTest {
            name: name.into(),
            stage_fn: Arc::new(stage_fn),
            bound,
            declared_measure_computable,
        }
    }

    /// The test whose every stage is empty.
    pub fn empty(name: impl Into<String>) -> Self {
        StagedTest::new(name, BoundSpec::PowHalf, true, |_, _| Event::never())
    }

    /// The time-`t` portion of the level-`time` open set. Levels start at 1.
    pub fn stage(&self, level: usize, time: usize) -> Event {
        assert!(level >= 1, "test levels start at 1");
        (self.stage_fn)(level, time)
    }

    pub fn bound(&self, level: usize) -> Rational {
        self.bound.bound(level)
    }

    pub fn bound_spec(&self) -> &BoundSpec {
        &self.bound
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn declared_measure_computable(&self) -> bool {
        self.declared_measure_computable
    }

    /// Same stages shifted `shift` levels deeper: `stage'(i, t) =
    /// stage(i + shift, t)`. Used to renumber after a mass audit.
    pub fn renumbered(&self, shift: usize) -> StagedTest {
        let inner = Arc::clone(&self.stage_fn);
        StagedTest {
            name: format!("{}<<{}", self.name, shift),
            stage_fn: Arc::new(move |i, t| inner(i + shift, t)),
            bound: self.bound.clone(),
            declared_measure_computable: self.declared_measure_computable,
        }
    }
}

impl fmt::Debug for StagedTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StagedTest({}, bound {:?})", self.name, self.bound)
    }
}

/// One violated clause of the staged-test contract, with exact masses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StageBoundViolation {
    MassExceedsBound {
        level: usize,
        time: usize,
        mass: Rational,
        bound: Rational,
    },
    /// `stage(level, time)` is not contained in `stage(level, time+1)`:
    /// mass escapes when time grows.
    NotMonotoneInTime {
        level: usize,
        time: usize,
        escaped_mass: Rational,
    },
    /// `stage(level+1, time)` is not contained in `stage(level, time)`.
    NotNestedInLevel {
        level: usize,
        time: usize,
        escaped_mass: Rational,
    },
}

impl fmt::Display for StageBoundViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StageBoundViolation::MassExceedsBound {
                level,
                time,
                mass,
                bound,
            } => write!(
                f,
                "stage({level},{time}) has mass {mass} > bound {bound}"
            ),
            StageBoundViolation::NotMonotoneInTime {
                level,
                time,
                escaped_mass,
            } => write!(
                f,
                "stage({level},{time}) loses mass {escaped_mass} at time {}",
                time + 1
            ),
            StageBoundViolation::NotNestedInLevel {
                level,
                time,
                escaped_mass,
            } => write!(
                f,
                "stage({},{time}) is not inside stage({level},{time}): mass {escaped_mass} escapes",
                level + 1
            ),
        }
    }
}

/// Outcome of an exhaustive grid audit of the staged-test contract.
#[derive(Debug, Clone)]
pub struct StageBoundReport {
    pub max_level: usize,
    pub max_time: usize,
    pub violations: Vec<StageBoundViolation>,
}

impl StageBoundReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Audit mass bounds, growth in time, and nesting in level for all
/// `1 <= level <= max_level`, `0 <= time <= max_time`, with exact masses.
///
/// Containment is checked as a null difference — `mass(A \ B) = 0` — which
/// under a full-support measure coincides with genuine containment up to
/// measure zero. Violations are data; only evaluation failures are errors.
pub fn check_stage_bounds(
    test: &StagedTest,
    measure: &MeasureSpec,
    max_level: usize,
    max_time: usize,
) -> Result<StageBoundReport, EventError> {
    let mut violations = Vec::new();
    for level in 1..=max_level {
        for time in 0..=max_time {
            let here = test.stage(level, time);
            let mass = here.mass(measure)?;
            let bound = test.bound(level);
            if mass > bound {
                violations.push(StageBoundViolation::MassExceedsBound {
                    level,
                    time,
                    mass,
                    bound,
                });
            }
            if time < max_time {
                let escaped = here.difference(&test.stage(level, time + 1)).mass(measure)?;
                if !escaped.is_zero() {
                    violations.push(StageBoundViolation::NotMonotoneInTime {
                        level,
                        time,
                        escaped_mass: escaped,
                    });
                }
            }
            if level < max_level {
                let escaped = test
                    .stage(level + 1, time)
                    .difference(&here)
                    .mass(measure)?;
                if !escaped.is_zero() {
                    violations.push(StageBoundViolation::NotNestedInLevel {
                        level,
                        time,
                        escaped_mass: escaped,
                    });
                }
            }
        }
    }
    Ok(StageBoundReport {
        max_level,
        max_time,
        violations,
    })
}

/// Fold a sequence of tests into one: the combined level-`i` set is the union
/// of the `k`-th input's level-`i+k+1` set over all `k` enumerated so far
/// (`k <= t`). Since the inputs' bounds are `2^-i`, the union costs at most
/// `2^-(i+1) + 2^-(i+2) + ... <= 2^-i`, so the combined test keeps the
/// standard bound. Any sequence extending a prefix that reaches level
/// `i+k+1` of input `k` reaches level `i` of the combination.
///
/// Panics if an input declares a bound other than `2^-i`; the staggered
/// estimate is only valid for the standard schedule.
pub fn combine_diagonal(tests: Vec<StagedTest>) -> StagedTest {
    for t in &tests {
        assert!(
            t.bound_spec().is_pow_half(),
            "combine_diagonal requires the standard 2^-i bound, test {} declares {:?}",
            t.name(),
            t.bound_spec()
        );
    }
    let name = format!(
        "diagonal({})",
        tests
            .iter()
            .map(|t| t.name())
            .collect::<Vec<_>>()
            .join(",")
    );
    let measure_computable = tests.iter().all(|t| t.declared_measure_computable());
    let tests = Arc::new(tests);
    StagedTest::new(name, BoundSpec::PowHalf, measure_computable, move |i, t| {
        let parts: Vec<Event> = tests
            .iter()
            .enumerate()
            .take_while(|(k, _)| *k <= t)
            .map(|(k, test)| test.stage(i + k + 1, t))
            .collect();
        Event::any(parts)
    })
}

/// The largest level `i <= time` whose stage at time `time` provably contains
/// the whole cylinder of `x` (membership resolves to true on the prefix).
/// Returns 0 when no level does. Monotone in `time` for tests that grow in
/// time, and always a sound lower bound for every extension of `x`.
pub fn deficiency_lower_bound(test: &StagedTest, x: &BitString, time: usize) -> usize {
    for level in (1..=time).rev() {
        if test.stage(level, time).resolve(x) == Ternary::True {
            return level;
        }
    }
    0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clopen::ClopenSet;

    fn b(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    /// A test whose level-`i` set is the single cylinder `word(i)`, revealed
    /// at time 1.
    fn word_test(name: &str, word: fn(usize) -> BitString) -> StagedTest {
        StagedTest::new(name, BoundSpec::PowHalf, true, move |i, t| {
            if t >= 1 {
                Event::cylinder(&word(i))
            } else {
                Event::never()
            }
        })
    }

    fn zeros(i: usize) -> BitString {
        BitString::from_bits(vec![false; i])
    }

    fn ones(i: usize) -> BitString {
        BitString::from_bits(vec![true; i])
    }

    fn alternating(i: usize) -> BitString {
        BitString::from_bits((0..i).map(|j| j % 2 == 1).collect())
    }

    /// The three synthetic tests are nested because `0^{i+1}` extends `0^i`
    /// (and likewise for the other words), so each level-`i+1` stage sits
    /// inside the level-`i` stage.
    fn synthetic_three() -> Vec<StagedTest> {
        vec![
            word_test("zeros", zeros),
            word_test("ones", ones),
            word_test("alt", alternating),
        ]
    }

    #[test]
    fn empty_test_passes_all_bounds() {
        let report =
            check_stage_bounds(&StagedTest::empty("null"), &MeasureSpec::Uniform, 6, 6).unwrap();
        assert!(report.passed());
    }

    #[test]
    fn full_stage_violates_level_one_bound() {
        let bad = StagedTest::new("bad", BoundSpec::PowHalf, true, |_, _| Event::always());
        let report = check_stage_bounds(&bad, &MeasureSpec::Uniform, 1, 0).unwrap();
        assert_eq!(
            report.violations,
            vec![StageBoundViolation::MassExceedsBound {
                level: 1,
                time: 0,
                mass: r("1"),
                bound: r("1/2"),
            }]
        );
    }

    #[test]
    fn shrinking_in_time_is_reported() {
        let shrinking = StagedTest::new("shrink", BoundSpec::PowHalf, true, |i, t| {
            if t == 0 {
                Event::cylinder(&zeros(i))
            } else {
                Event::never()
            }
        });
        let report = check_stage_bounds(&shrinking, &MeasureSpec::Uniform, 2, 1).unwrap();
        assert!(report
            .violations
            .iter()
            .all(|v| matches!(v, StageBoundViolation::NotMonotoneInTime { .. })));
        assert_eq!(report.violations.len(), 2);
    }

    #[test]
    fn non_nested_levels_are_reported() {
        // Level i covers the cylinder of 1^(i mod 2): levels 1 and 2 are not
        // nested.
        let swapping = StagedTest::new("swap", BoundSpec::PowHalf, true, |i, _| {
            Event::clopen(ClopenSet::cylinder(&ones(1 + (i % 2))))
        });
        let report = check_stage_bounds(&swapping, &MeasureSpec::Uniform, 2, 0).unwrap();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, StageBoundViolation::NotNestedInLevel { .. })));
    }

    #[test]
    fn synthetic_tests_pass_individually() {
        for test in synthetic_three() {
            let report = check_stage_bounds(&test, &MeasureSpec::Uniform, 6, 4).unwrap();
            assert!(report.passed(), "{}: {:?}", test.name(), report.violations);
        }
    }

    #[test]
    fn combine_of_one_shifts_levels() {
        let combined = combine_diagonal(vec![word_test("zeros", zeros)]);
        let m = MeasureSpec::Uniform;
        for i in 1..=5 {
            let single = word_test("zeros", zeros);
            assert_eq!(
                combined
                    .stage(i, 3)
                    .symmetric_difference(&single.stage(i + 1, 3))
                    .mass(&m)
                    .unwrap(),
                r("0"),
                "level {i}"
            );
            assert_eq!(combined.stage(i, 3).mass(&m).unwrap(), Rational::pow2(-(i as i32 + 1)));
        }
    }

    #[test]
    fn combine_of_two_mass_is_staggered_sum() {
        let combined = combine_diagonal(vec![word_test("zeros", zeros), word_test("ones", ones)]);
        // Level 2, enough time: cylinder(0^3) u cylinder(1^4), disjoint, so
        // mass is exactly 2^-3 + 2^-4 = 3/16 <= 2^-2.
        let mass = combined.stage(2, 5).mass(&MeasureSpec::Uniform).unwrap();
        assert_eq!(mass, r("3/16"));
        assert!(mass <= combined.bound(2));
    }

    #[test]
    fn combine_of_three_passes_grid() {
        let combined = combine_diagonal(synthetic_three());
        let report = check_stage_bounds(&combined, &MeasureSpec::Uniform, 4, 8).unwrap();
        assert!(report.passed(), "{:?}", report.violations);
    }

    #[test]
    fn combine_of_empties_is_empty() {
        let combined = combine_diagonal(vec![StagedTest::empty("a"), StagedTest::empty("b")]);
        for i in 1..=4 {
            for t in 0..=4 {
                assert_eq!(
                    combined.stage(i, t).mass(&MeasureSpec::Uniform).unwrap(),
                    r("0")
                );
            }
        }
    }

    #[test]
    fn combined_dominates_members() {
        let tests = synthetic_three();
        let combined = combine_diagonal(tests.clone());
        let m = MeasureSpec::Uniform;
        for (k, member) in tests.iter().enumerate() {
            for i in 1..=4 {
                for t in k..=6 {
                    let escaped = member
                        .stage(i + k + 1, t)
                        .difference(&combined.stage(i, t))
                        .mass(&m)
                        .unwrap();
                    assert_eq!(escaped, r("0"), "member {k}, level {i}, time {t}");
                }
            }
        }
    }

    #[test]
    fn deficiency_examples() {
        assert_eq!(
            deficiency_lower_bound(&StagedTest::empty("null"), &b("0101"), 10),
            0
        );
        let test = word_test("zeros", zeros);
        assert_eq!(deficiency_lower_bound(&test, &b("000"), 10), 3);
        assert_eq!(deficiency_lower_bound(&test, &BitString::empty(), 10), 0);
        assert_eq!(deficiency_lower_bound(&test, &b("1"), 10), 0);
        // Time caps the answer even when deeper stages would resolve.
        assert_eq!(deficiency_lower_bound(&test, &b("000"), 2), 2);
    }

    #[test]
    fn deficiency_monotone_in_time() {
        let test = word_test("zeros", zeros);
        let x = b("00000");
        let mut prev = 0;
        for time in 0..=8 {
            let d = deficiency_lower_bound(&test, &x, time);
            assert!(d >= prev);
            prev = d;
        }
        assert_eq!(prev, 5);
    }

    #[test]
    fn custom_bounds_are_respected() {
        let loose = StagedTest::new(
            "loose",
            BoundSpec::Custom(Arc::new(|_| Rational::one())),
            false,
            |_, _| Event::always(),
        );
        let report = check_stage_bounds(&loose, &MeasureSpec::Uniform, 3, 2).unwrap();
        assert!(report.passed());
    }

    #[test]
    #[should_panic(expected = "standard 2^-i bound")]
    fn combine_rejects_custom_bounds() {
        let loose = StagedTest::new(
            "loose",
            BoundSpec::Custom(Arc::new(|_| Rational::one())),
            false,
            |_, _| Event::never(),
        );
        combine_diagonal(vec![loose]);
    }

    #[test]
    fn renumbered_shifts_stages() {
        let test = word_test("zeros", zeros);
        let shifted = test.renumbered(2);
        assert_eq!(
            shifted
                .stage(1, 1)
                .symmetric_difference(&test.stage(3, 1))
                .mass(&MeasureSpec::Uniform)
                .unwrap(),
            r("0")
        );
    }
}
