//! Threshold comparison maps: output bit `k` reports whether the `k`-th real
//! encoded in the input table lies below a rational threshold.
//!
//! The input is an interleaved table of independent uniform bit rows; row `k`
//! is read as the binary expansion of a real `ξ_k ∈ [0,1]`. Output bit `k`
//! of `threshold_map(θ)` is 1 exactly when `ξ_k < θ` (up to the measure-zero
//! boundary `ξ_k = θ`). The level-`i` stage decides the comparison from the
//! first `i` row bits, leaving it open only on the single length-`i` block
//! containing `θ` — mass `2^-i`, and empty once `θ` is a multiple of `2^-i`.

use std::sync::Arc;

use crate::bits::BitString;
use crate::clopen::ClopenSet;
use crate::event::Event;
use crate::layerwise::{CauchyMap, StagedBit, TotalMonotoneMap};
use crate::measure::{table, MeasureSpec};
use crate::rational::Rational;

/// Value of a finite word read as a binary fraction: `Σ w_j 2^-(j+1)`.
pub fn word_value(w: &BitString) -> Rational {
    let mut value = Rational::zero();
    for (j, &bit) in w.bits().iter().enumerate() {
        if bit {
            value = value + Rational::pow2(-(j as i32 + 1));
        }
    }
    value
}

/// The canonical clopen set `{w of length |level| : value(w) + 2^-level ≤ θ}`
/// — the length-`level` blocks certainly below the threshold. Built by
/// descending the dyadic tree and emitting maximal whole blocks, so the
/// antichain has at most `level` elements.
pub fn dyadic_below(theta: &Rational, level: usize) -> ClopenSet {
    fn descend(
        prefix: &BitString,
        lo: &Rational,
        theta: &Rational,
        level: usize,
        out: &mut Vec<BitString>,
    ) {
        let width = Rational::pow2(-(prefix.len() as i32));
        let hi = lo.clone() + width;
        if hi <= *theta {
            out.push(prefix.clone());
            return;
        }
        if prefix.len() == level || *lo >= *theta {
            return;
        }
        let mid = lo.clone() + Rational::pow2(-(prefix.len() as i32 + 1));
        descend(&prefix.child(false), lo, theta, level, out);
        descend(&prefix.child(true), &mid, theta, level, out);
    }
    let mut blocks = Vec::new();
    descend(&BitString::empty(), &Rational::zero(), theta, level, &mut blocks);
    ClopenSet::canonicalize(blocks)
}

/// The length-`level` word whose block contains `θ`: the first `level` bits
/// of `θ`'s binary expansion. Only meaningful when `θ` is not a multiple of
/// `2^-level` (otherwise `θ` sits on a block boundary and no block straddles
/// it).
fn expansion_prefix(theta: &Rational, level: usize) -> BitString {
    let scaled = theta.floor_mul_pow2(level);
    let bits = (0..level)
        .map(|j| {
            let shifted: num::BigInt = &scaled >> (level - 1 - j);
            shifted.bit(0)
        })
        .collect();
    BitString::from_bits(bits)
}

/// One output bit of a threshold map: compares row `row` against `theta`.
pub struct ThresholdBit {
    theta: Rational,
    row: usize,
}

impl ThresholdBit {
    pub fn new(theta: Rational, row: usize) -> Self {
        ThresholdBit { theta, row }
    }
}

impl StagedBit for ThresholdBit {
    fn stage(&self, level: usize) -> Event {
        Event::row_in(self.row, dyadic_below(&self.theta, level))
    }

    fn change_region(&self, level: usize) -> Option<Event> {
        // Stages only ever grow toward the comparison's limit set, and every
        // word added after level i lies in the one length-i block containing
        // θ. When θ is a multiple of 2^-level the comparison is fully
        // decided and nothing changes again.
        if self.theta.is_dyadic_at(level) {
            Some(Event::never())
        } else {
            Some(Event::row_in(
                self.row,
                ClopenSet::cylinder(&expansion_prefix(&self.theta, level)),
            ))
        }
    }
}

/// The map whose output bit `k` is 1 when the `k`-th encoded real is below
/// `theta`, with `nbits` declared bits, over the interleaved uniform table.
pub fn threshold_map(theta: &Rational, nbits: usize) -> CauchyMap {
    assert!(
        !theta.is_negative() && !theta.is_zero() && *theta < Rational::one(),
        "threshold must lie strictly between 0 and 1"
    );
    let bits = (0..nbits)
        .map(|k| Arc::new(ThresholdBit::new(theta.clone(), k)) as Arc<dyn StagedBit>)
        .collect();
    CauchyMap::new(
        format!("threshold({theta})"),
        MeasureSpec::RealTable,
        bits,
    )
}

/// The same comparison as a prefix-monotone emitter: output bits are decided
/// in order, bit `k` as soon as the visible part of row `k` pins `ξ_k` to one
/// side of `theta`.
pub fn threshold_total(theta: &Rational, nbits: usize) -> TotalMonotoneMap {
    assert!(
        !theta.is_negative() && !theta.is_zero() && *theta < Rational::one(),
        "threshold must lie strictly between 0 and 1"
    );
    let theta = theta.clone();
    TotalMonotoneMap::new(
        format!("threshold({theta})"),
        MeasureSpec::RealTable,
        move |x: &BitString| {
            let mut out = Vec::new();
            for k in 0..nbits {
                let row = table::row_prefix(x, k);
                let lo = word_value(&row);
                let hi = lo.clone() + Rational::pow2(-(row.len() as i32));
                if hi <= theta {
                    out.push(true);
                } else if lo >= theta {
                    out.push(false);
                } else {
                    break;
                }
            }
            BitString::from_bits(out)
        },
    )
}
