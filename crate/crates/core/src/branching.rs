//! Survival probabilities for randomly pruned binary trees.
//!
//! Start from the full infinite binary tree and keep each edge independently
//! with probability 2/3 (a vertex is retained when every edge on its root
//! path is kept). `survival(h)` is the exact probability that the retained
//! component of the root still reaches depth `h`. It obeys
//!
//! ```text
//! p_0 = 1,    p_{h+1} = 1 - (1 - (2/3) p_h)^2,
//! ```
//!
//! decreases strictly, and converges to the fixed point 3/4 with gap shrinking
//! like (2/3)^h.
//!
//! Denominators square at every step (`p_h` has denominator `3^(2^(h+1)-2)`),
//! so the iteration is carried out on integers in the factored form
//! `a' = 4 a (3^(e+1) - a)`, which keeps every intermediate exactly reduced —
//! `3` never divides `a` — and avoids gcd work on numbers that reach millions
//! of digits near the height cap.

use std::sync::Mutex;
use std::sync::OnceLock;

use num::BigInt;

use crate::rational::Rational;

/// Largest height this module computes exactly. The height-`h` numerator has
/// on the order of `2^h` digits; 22 keeps the full table well under a second
/// while covering every certified-precision level the stage constructions ask
/// for.
pub const MAX_HEIGHT: usize = 22;

struct Cache {
    /// `probs[h]` = survival probability to depth `h`.
    probs: Vec<Rational>,
    /// Numerator of the last computed entry.
    a: BigInt,
    /// `3^(e+1)` where `3^e` is the last entry's denominator.
    pow3: BigInt,
}

fn cache() -> &'static Mutex<Cache> {
    static CACHE: OnceLock<Mutex<Cache>> = OnceLock::new();
    CACHE.get_or_init(|| {
        Mutex::new(Cache {
            probs: vec![Rational::one()],
            a: BigInt::from(1),
            pow3: BigInt::from(3),
        })
    })
}

/// Exact probability that the pruned tree reaches depth `h`.
///
/// Panics if `h > MAX_HEIGHT`; the stage constructions never renumber past
/// that, and anything deeper would be astronomically expensive anyway.
pub fn survival(h: usize) -> Rational {
    assert!(
        h <= MAX_HEIGHT,
        "survival height {h} exceeds the exact-computation cap {MAX_HEIGHT}"
    );
    let mut guard = cache().lock().unwrap();
    while guard.probs.len() <= h {
        // Entry h has denominator 3^e with pow3 = 3^(e+1); the next entry's
        // denominator is 3^(2e+2) = pow3^2 and its pow3 is 3 * pow3^2.
        let next_a = BigInt::from(4) * &guard.a * (&guard.pow3 - &guard.a);
        let denom = &guard.pow3 * &guard.pow3;
        guard.pow3 = BigInt::from(3) * &denom;
        guard.a = next_a.clone();
        guard.probs.push(Rational::from_raw_reduced(next_a, denom));
    }
    guard.probs[h].clone()
}

/// The limiting survival probability, 3/4: the positive fixed point of the
/// survival recurrence.
pub fn limit() -> Rational {
    Rational::new(3, 4)
}

/// Per-edge retention probability, 2/3.
pub fn edge_retention() -> Rational {
    Rational::new(2, 3)
}

/// `survival(h) - 3/4`, the (nonnegative) excess over the limit.
///
/// Built as `(4a - 3^(e+1)) / (4·3^e)` without the generic normalization:
/// the numerator is odd (an even term minus an odd one) and keeps the
/// table's 3-free invariant, so the fraction is already in lowest terms.
/// Going through rational subtraction instead would gcd two multi-
/// million-digit integers at the deep heights.
pub fn survival_gap(h: usize) -> Rational {
    let p = survival(h);
    let numer = BigInt::from(4) * p.numer() - BigInt::from(3) * p.denom();
    let denom = BigInt::from(4) * p.denom();
    Rational::from_raw_reduced(numer, denom)
}

/// One step of the survival recurrence, `p -> 1 - (1 - (2/3) p)^2`,
/// applicable to any argument.
pub fn iterate_map(p: &Rational) -> Rational {
    let inner = Rational::one() - edge_retention() * p;
    Rational::one() - &inner * &inner
}

/// Smallest height whose gap over the limit is at most `2^-i`, capped at
/// [`MAX_HEIGHT`]. The gap shrinks like `(2/3)^h`, so this grows like
/// `i * ln 2 / ln(3/2) ~ 1.71 i`.
pub fn height_for_gap(i: usize) -> usize {
    let target = Rational::pow2(-(i as i32));
    for h in 0..=MAX_HEIGHT {
        if survival_gap(h) <= target {
            return h;
        }
    }
    panic!("no height up to {MAX_HEIGHT} brings the survival gap below 2^-{i}");
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    #[test]
    fn first_values() {
        assert_eq!(survival(0), r("1"));
        assert_eq!(survival(1), r("8/9"));
        assert_eq!(survival(2), r("608/729"));
    }

    /// The integer recurrence must agree with directly iterating the rational
    /// map — an independent route to the same numbers.
    #[test]
    fn integer_recurrence_matches_rational_iteration() {
        let mut p = Rational::one();
        for h in 0..=8 {
            assert_eq!(survival(h), p, "height {h}");
            p = iterate_map(&p);
        }
    }

    #[test]
    fn strictly_decreasing_and_above_limit() {
        for h in 0..10 {
            assert!(survival(h + 1) < survival(h), "not decreasing at {h}");
            assert!(survival(h) > limit(), "fell to the limit at {h}");
        }
    }

    #[test]
    fn limit_is_fixed_point() {
        assert_eq!(iterate_map(&limit()), limit());
        assert_eq!(iterate_map(&Rational::zero()), Rational::zero());
    }

    #[test]
    fn gap_shrinks_roughly_geometrically() {
        // gap(h+1) <= (2/3) gap(h) fails only by the quadratic correction,
        // which helps; check the clean inequality.
        for h in 0..10 {
            assert!(survival_gap(h + 1) <= edge_retention() * survival_gap(h));
        }
    }

    #[test]
    fn height_for_gap_thresholds() {
        // gap(0) = 1/4, so precision 2^-2 is already met at height 0.
        assert_eq!(height_for_gap(0), 0);
        assert_eq!(height_for_gap(2), 0);
        // gap(1) = 5/36 > 1/8, gap(2) = 245/2916 <= 1/8.
        assert_eq!(survival_gap(1), r("5/36"));
        assert_eq!(survival_gap(2), r("245/2916"));
        assert_eq!(height_for_gap(3), 2);
        // Consistency of the defining property for a range of precisions.
        for i in 0..=8 {
            let h = height_for_gap(i);
            assert!(survival_gap(h) <= Rational::pow2(-(i as i32)));
            if h > 0 {
                assert!(survival_gap(h - 1) > Rational::pow2(-(i as i32)));
            }
        }
    }
}
