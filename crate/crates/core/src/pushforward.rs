//! The measure a staged-bit map induces on its output space, computed three
//! ways: certified approximation of output-cylinder masses, pulling a staged
//! test on the output space back to the input space (with an audited level
//! renumbering), and a sound finite-depth certifier for output cylinders
//! missed by the image of a staged closed set.

use std::fmt;

use crate::bits::BitString;
use crate::clopen::{ClopenSet, Ternary};
use crate::event::{Event, EventError};
use crate::layerwise::CauchyMap;
use crate::mltest::{check_stage_bounds, BoundSpec, StagedTest};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PushforwardError {
    Event(EventError),
    /// The pullback construction only knows how to renumber tests declaring
    /// the standard `2^-i` bound.
    IncompatibleBounds { test: String },
    /// No level shift up to the cap brought every audited stage mass under
    /// `2^-i` (or the shifted test kept violating growth or nesting).
    RenumberingExhausted { max_shift: usize },
}

impl fmt::Display for PushforwardError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PushforwardError::Event(e) => write!(f, "{e}"),
            PushforwardError::IncompatibleBounds { test } => write!(
                f,
                "test {test} does not declare the standard 2^-i bound; pullback renumbering needs it"
            ),
            PushforwardError::RenumberingExhausted { max_shift } => write!(
                f,
                "no level shift up to {max_shift} satisfies the stage-mass audit"
            ),
        }
    }
}

impl std::error::Error for PushforwardError {}

impl From<EventError> for PushforwardError {
    fn from(e: EventError) -> Self {
        PushforwardError::Event(e)
    }
}

/// A certified approximation of the output measure of a cylinder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageMassResult {
    /// Exact base-measure mass of the level-`stage_used` matching event.
    pub value: Rational,
    /// Certified bound on `|value - Q(cylinder)|` where `Q` is the true
    /// output measure.
    pub error_bound: Rational,
    pub stage_used: usize,
}

/// Mass the output measure gives the cylinder of `u`, within `eps`.
///
/// Picks the smallest level `i` whose per-bit approximation certificates sum
/// below `eps` (`|u| · 4·2^-i <= eps`), then returns the exact base-measure
/// mass of "all stage-`i` output bits match `u`". The empty word needs no
/// approximation at all.
pub fn image_mass(
    map: &CauchyMap,
    u: &BitString,
    eps: &Rational,
) -> Result<ImageMassResult, EventError> {
    assert!(
        !eps.is_negative() && !eps.is_zero(),
        "precision must be positive"
    );
    if u.is_empty() {
        return Ok(ImageMassResult {
            value: Rational::one(),
            error_bound: Rational::zero(),
            stage_used: 0,
        });
    }
    let per_level = |i: usize| {
        Rational::from_int(u.len() as i64) * Rational::new(4, 1) * Rational::pow2(-(i as i32))
    };
    let mut stage_used = 0;
    while per_level(stage_used) > *eps {
        stage_used += 1;
    }
    let value = map
        .word_match(stage_used, u)
        .mass(map.base_measure())?;
    Ok(ImageMassResult {
        value,
        error_bound: per_level(stage_used),
        stage_used,
    })
}

/// The output measure packaged as an approximation oracle: `mass(u, eps)` is
/// within `eps` of the true output mass of the cylinder of `u`.
pub struct ImageMeasure<'a> {
    map: &'a CauchyMap,
}

impl<'a> ImageMeasure<'a> {
    pub fn new(map: &'a CauchyMap) -> Self {
        ImageMeasure { map }
    }

    pub fn mass(&self, u: &BitString, eps: &Rational) -> Result<Rational, EventError> {
        Ok(image_mass(self.map, u, eps)?.value)
    }
}

/// A pullback that passed its stage-mass audit.
#[derive(Clone)]
pub struct Pullback {
    /// The audited test: `test.stage(i, t) = raw.stage(i + shift, t)`.
    pub test: StagedTest,
    /// The level renumbering the audit certified.
    pub shift: usize,
    /// The unshifted construction, for callers inspecting pre-renumbering
    /// stage masses.
    pub raw: StagedTest,
}

/// Pull a staged test on the output space back through the map.
///
/// The level-`i`, time-`t` stage is the union of the map's own defect stage
/// with, for every cell `w` of the output stage (of depth at most `t+1`),
/// the inputs whose staggered output-bit approximations match `w` — bit `k`
/// read at level `i+k+1`, so one level of slack per bit pays for all
/// later movement. Cells deeper than `t+1` wait until time covers their
/// bits; movement between the staggered levels of consecutive stages lands
/// inside the defect part, which is what makes the stages nest by
/// construction rather than by luck.
///
/// The mass bound is *not* structural: the match part costs roughly the
/// output test's bound plus the defect's, about twice `2^-i`. The audit
/// finds the smallest level shift that restores `2^-i` on the requested
/// grid and returns the shifted test; the construction is faithful only up
/// to that constant renumbering.
///
/// `defect` must be (a superset of) the map's own staged defect — pass
/// [`CauchyMap::defect_test`] — or the nesting argument above does not
/// apply; the audit will catch the breakage but cannot repair it.
///
/// The returned test's stages panic if `budget` is too small to flatten the
/// output test's stages, or if a cell is deeper than the map has bits.
pub fn pullback_test(
    map: &CauchyMap,
    defect: &StagedTest,
    v: &StagedTest,
    max_level: usize,
    max_time: usize,
    max_shift: usize,
    budget: u64,
) -> Result<Pullback, PushforwardError> {
    if !v.bound_spec().is_pow_half() {
        return Err(PushforwardError::IncompatibleBounds {
            test: v.name().into(),
        });
    }
    if !defect.bound_spec().is_pow_half() {
        return Err(PushforwardError::IncompatibleBounds {
            test: defect.name().into(),
        });
    }
    let raw = raw_pullback(map, defect, v, budget);
    for shift in 0..=max_shift {
        let candidate = raw.renumbered(shift);
        let report = check_stage_bounds(&candidate, map.base_measure(), max_level, max_time)?;
        if report.passed() {
            return Ok(Pullback {
                test: candidate,
                shift,
                raw,
            });
        }
    }
    Err(PushforwardError::RenumberingExhausted { max_shift })
}

fn raw_pullback(map: &CauchyMap, defect: &StagedTest, v: &StagedTest, budget: u64) -> StagedTest {
    let name = format!("pullback({},{})", map.name(), v.name());
    let map = map.clone();
    let defect = defect.clone();
    let v = v.clone();
    let measure_computable = v.declared_measure_computable() && defect.declared_measure_computable();
    StagedTest::new(name, BoundSpec::PowHalf, measure_computable, move |i, t| {
        let cells = v
            .stage(i, t)
            .materialize(budget)
            .unwrap_or_else(|e| panic!("pullback stage ({i},{t}): flattening the output stage failed: {e}"));
        let mut parts = vec![defect.stage(i, t)];
        for w in cells.antichain() {
            if w.len() > t + 1 {
                continue;
            }
            assert!(
                w.len() <= map.bit_count(),
                "output cell {w} is deeper than the map's {} bits",
                map.bit_count()
            );
            parts.push(Event::all(
                (0..w.len())
                    .map(|k| map.bit_match(k, i + k + 1, w.bit(k)))
                    .collect(),
            ));
        }
        Event::any(parts)
    })
}

/// Output cylinders certified disjoint from the stage-`stage` image of the
/// closed set left over after removing `r_complement`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertifiedDisjointCylinders {
    pub stage: usize,
    pub output_depth: usize,
    pub depth_searched: usize,
    /// Depth-`output_depth` words `v` such that every depth-`depth_searched`
    /// input cylinder not wholly inside `r_complement` resolves some
    /// stage-`stage` output bit to the opposite of `v`.
    pub cylinders: Vec<BitString>,
}

/// Sound, incomplete certifier for "the cylinder of `v` misses the image of
/// the closed set". The closed set is given by its staged complement
/// `r_complement` (e.g. a materialized defect stage); an input cylinder
/// wholly inside `r_complement` is exempt, every other one must actively
/// contradict `v` on some stage-`stage` output bit. Unresolved bits never
/// certify. Deeper `input_depth` only splits cylinders further, so
/// certificates are monotone in it.
pub fn closed_image_complement(
    map: &CauchyMap,
    r_complement: &ClopenSet,
    stage: usize,
    output_depth: usize,
    input_depth: usize,
) -> CertifiedDisjointCylinders {
    assert!(
        output_depth <= map.bit_count(),
        "map approximates {} output bits, asked about depth {output_depth}",
        map.bit_count()
    );
    let stages: Vec<Event> = (0..output_depth)
        .map(|k| map.bit_stage(k, stage))
        .collect();
    let survivors: Vec<BitString> = BitString::all_of_length(input_depth)
        .into_iter()
        .filter(|u| r_complement.contains(u) != Ternary::True)
        .collect();
    let mut cylinders = Vec::new();
    for v in BitString::all_of_length(output_depth) {
        let certified = survivors.iter().all(|u| {
            (0..output_depth).any(|k| match stages[k].resolve(u) {
                Ternary::Undetermined => false,
                resolved => (resolved == Ternary::True) != v.bit(k),
            })
        });
        if certified {
            cylinders.push(v);
        }
    }
    CertifiedDisjointCylinders {
        stage,
        output_depth,
        depth_searched: input_depth,
        cylinders,
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::layerwise::{identity_map, total_to_cauchy};
    use crate::measure::MeasureSpec;
    use crate::showcase::threshold::threshold_map;
    use crate::showcase::trees::tree_pruning_map;
    use crate::showcase::evenodd_split;

    fn b(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn ones_test(name: &str) -> StagedTest {
        StagedTest::new(name, BoundSpec::PowHalf, true, |i, _t| {
            Event::clopen(ClopenSet::cylinder(&BitString::from_bits(vec![true; i])))
        })
    }

    #[test]
    fn image_mass_of_identity_is_exact() {
        let map = identity_map(MeasureSpec::Uniform, 3);
        let got = image_mass(&map, &b("1"), &r("1/4")).unwrap();
        assert_eq!(got.value, r("1/2"));
        assert!(got.error_bound <= r("1/4"));
        let empty = image_mass(&map, &BitString::empty(), &r("1/8")).unwrap();
        assert_eq!(empty.value, r("1"));
        assert_eq!(empty.error_bound, r("0"));
        assert_eq!(empty.stage_used, 0);
    }

    #[test]
    fn image_mass_of_thresholds_tracks_the_parameter() {
        let eps = Rational::pow2(-10);
        for (theta, expect) in [("1/2", r("1/2")), ("1/3", r("1/3"))] {
            let map = threshold_map(&r(theta), 2);
            let got = image_mass(&map, &b("1"), &eps).unwrap();
            assert!(got.error_bound <= eps);
            let err = (got.value - expect.clone()).abs();
            assert!(err <= got.error_bound, "theta {theta}: off by {err}");
        }
    }

    #[test]
    fn image_mass_of_split_halves_is_uniform() {
        let cauchy = total_to_cauchy(&evenodd_split(), 2, 10, 1 << 12).unwrap();
        let got = image_mass(&cauchy, &b("0"), &Rational::pow2(-4)).unwrap();
        assert_eq!(got.value, r("1/2"));
    }

    #[test]
    fn image_mass_of_pruning_root_nears_the_survival_limit() {
        let map = tree_pruning_map(1);
        let eps = Rational::pow2(-8);
        let got = image_mass(&map, &b("1"), &eps).unwrap();
        assert!((got.value - r("3/4")).abs() <= eps);
    }

    #[test]
    fn image_masses_are_additive_within_three_epsilon() {
        let map = threshold_map(&r("1/3"), 4);
        let oracle = ImageMeasure::new(&map);
        let eps = Rational::pow2(-6);
        let slack = Rational::from_int(3) * eps.clone();
        for depth in 0..=2usize {
            for u in BitString::all_of_length(depth) {
                let whole = oracle.mass(&u, &eps).unwrap();
                let zero = oracle.mass(&u.child(false), &eps).unwrap();
                let one = oracle.mass(&u.child(true), &eps).unwrap();
                assert!((zero + one - whole).abs() <= slack, "u = {u}");
            }
        }
    }

    #[test]
    fn image_mass_is_stage_consistent() {
        let map = threshold_map(&r("1/3"), 3);
        let coarse = image_mass(&map, &b("11"), &Rational::pow2(-4)).unwrap();
        let fine = image_mass(&map, &b("11"), &Rational::pow2(-9)).unwrap();
        assert!(fine.stage_used > coarse.stage_used);
        assert!((coarse.value - fine.value).abs() <= coarse.error_bound + fine.error_bound);
    }

    #[test]
    fn pullback_through_identity_reproduces_the_test() {
        let map = identity_map(MeasureSpec::Uniform, 6);
        let v = ones_test("ones");
        let got = pullback_test(
            &map,
            &StagedTest::empty("nodefect"),
            &v,
            4,
            4,
            4,
            1 << 16,
        )
        .unwrap();
        assert_eq!(got.shift, 0);
        for i in 1..=4usize {
            for t in i.saturating_sub(1)..=4 {
                let lhs = got.test.stage(i, t).materialize(1 << 16).unwrap();
                let rhs = v.stage(i, t).materialize(1 << 16).unwrap();
                assert_eq!(lhs, rhs, "stage ({i},{t})");
            }
        }
    }

    #[test]
    fn pullback_of_the_empty_test_is_the_defect_alone() {
        let map = threshold_map(&r("1/3"), 4);
        let defect = map.defect_test().unwrap();
        let empty = StagedTest::empty("nothing");
        let got = pullback_test(&map, &defect, &empty, 3, 4, 4, 1 << 16).unwrap();
        assert_eq!(got.shift, 0);
        for i in 1..=3usize {
            for t in 0..=4usize {
                let gap = got
                    .test
                    .stage(i, t)
                    .symmetric_difference(&defect.stage(i, t))
                    .mass(map.base_measure())
                    .unwrap();
                assert!(gap.is_zero(), "stage ({i},{t}) differs by mass {gap}");
            }
        }
    }

    #[test]
    fn pullback_through_threshold_passes_audit_with_expected_raw_masses() {
        let map = threshold_map(&r("1/3"), 6);
        let defect = map.defect_test().unwrap();
        let v = ones_test("ones");
        let got = pullback_test(&map, &defect, &v, 4, 5, 6, 1 << 18).unwrap();
        let report =
            check_stage_bounds(&got.test, map.base_measure(), 4, 5).unwrap();
        assert!(report.passed(), "{:?}", report.violations);
        // Before renumbering the stages cost at most the defect plus the
        // output mass seen through the staggered approximations.
        for i in 1..=4usize {
            for t in 0..=5usize {
                let mass = got.raw.stage(i, t).mass(map.base_measure()).unwrap();
                let cap = Rational::pow2(-(i as i32 - 1)) + r("1/3").pow_int(i as u32);
                assert!(mass <= cap, "raw stage ({i},{t}): {mass}");
            }
        }
    }

    #[test]
    fn pullback_rejects_nonstandard_bounds() {
        let map = identity_map(MeasureSpec::Uniform, 2);
        let v = StagedTest::new(
            "custom",
            BoundSpec::Custom(Arc::new(|_| Rational::one())),
            true,
            |_, _| Event::never(),
        );
        match pullback_test(&map, &StagedTest::empty("d"), &v, 2, 2, 2, 1 << 10) {
            Err(PushforwardError::IncompatibleBounds { test }) => assert_eq!(test, "custom"),
            other => panic!("expected a bound complaint, got {other:?}", other = other.map(|p| p.shift)),
        }
    }

    #[test]
    fn pullback_reports_audit_exhaustion() {
        let map = identity_map(MeasureSpec::Uniform, 2);
        // A "test" claiming the standard bound while covering everything can
        // never be renumbered into compliance.
        let v = StagedTest::new("toofat", BoundSpec::PowHalf, true, |_, _| Event::always());
        match pullback_test(&map, &StagedTest::empty("d"), &v, 2, 1, 3, 1 << 10) {
            Err(PushforwardError::RenumberingExhausted { max_shift }) => assert_eq!(max_shift, 3),
            other => panic!("expected exhaustion, got {other:?}", other = other.map(|p| p.shift)),
        }
    }

    #[test]
    fn closed_image_certifies_the_removed_side_of_identity() {
        let map = identity_map(MeasureSpec::Uniform, 2);
        let removed = ClopenSet::cylinder(&b("1"));
        let got = closed_image_complement(&map, &removed, 3, 1, 3);
        assert_eq!(got.cylinders, vec![b("1")]);
        let nothing_removed = closed_image_complement(&map, &ClopenSet::empty(), 3, 1, 3);
        assert!(nothing_removed.cylinders.is_empty());
    }

    #[test]
    fn closed_image_certificates_grow_with_input_depth() {
        let map = threshold_map(&r("1/3"), 2);
        let removed = map
            .defect_test()
            .unwrap()
            .stage(2, 3)
            .materialize(1 << 14)
            .unwrap();
        let mut previous: Option<Vec<BitString>> = None;
        for n in 2..=6usize {
            let got = closed_image_complement(&map, &removed, 2, 2, n);
            if let Some(prev) = previous {
                for v in &prev {
                    assert!(got.cylinders.contains(v), "lost {v} at depth {n}");
                }
            }
            previous = Some(got.cylinders);
        }
    }

    #[test]
    fn closed_image_certificates_are_sound_by_reenumeration() {
        let map = identity_map(MeasureSpec::Uniform, 2);
        let removed = ClopenSet::cylinder(&b("0"));
        let got = closed_image_complement(&map, &removed, 4, 2, 4);
        for v in &got.cylinders {
            for u in BitString::all_of_length(4) {
                if removed.contains(&u) == Ternary::True {
                    continue;
                }
                let consistent = (0..2usize).all(|k| {
                    map.bit_stage(k, 4).resolve(&u) == Ternary::Undetermined
                        || (map.bit_stage(k, 4).resolve(&u) == Ternary::True) == v.bit(k)
                });
                assert!(!consistent, "cylinder {v} reachable from {u}");
            }
        }
        assert!(!got.cylinders.is_empty());
    }
}
