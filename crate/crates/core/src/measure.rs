//! Computable measures on Cantor space.
//!
//! A [`MeasureSpec`] names a Borel probability measure through exact rational
//! cylinder masses. Four variants are provided:
//!
//! * `Bernoulli(p)` — independent bits, each `1` with probability `p`;
//! * `Uniform` — the fair-coin measure, `Bernoulli(1/2)` kept as its own tag;
//! * `Explicit` — masses fixed for every word of one given depth. The measure
//!   this names extends below its table by the uniform conditional, but the
//!   [`MeasureSpec::mass`] operation deliberately errors past the table depth
//!   so that accidental deep queries surface instead of silently using the
//!   extension;
//! * `RealTable` — the uniform measure carried by the encoding of a sequence
//!   of reals as a two-dimensional bit table flattened along anti-diagonals
//!   (see [`table`]). Masses agree with `Uniform`; the variant exists so that
//!   row/column addressing travels with the measure.

use std::collections::BTreeMap;
use std::fmt;

use crate::bits::BitString;
use crate::clopen::ClopenSet;
use crate::rational::Rational;

/// Row/column addressing for the real-table encoding.
///
/// A sequence of reals becomes a two-dimensional table of bits (row `r` holds
/// the binary expansion of the `r`-th real); the table is flattened into one
/// sequence along anti-diagonals. `position(r, c)` is where table cell
/// `(r, c)` lands in the flat sequence.
pub mod table {
    use crate::bits::BitString;

    /// Flat position of table cell `(row, col)`:
    /// `(row+col)(row+col+1)/2 + row`. Strictly increasing in `col` for a
    /// fixed `row`, so each row reads off the flat sequence in order.
    pub fn position(row: usize, col: usize) -> usize {
        let d = row + col;
        d * (d + 1) / 2 + row
    }

    /// The bits of `row` that a flat prefix already determines, in column
    /// order. Columns of one row sit at increasing flat positions, so the
    /// result is always a contiguous initial run of the row.
    pub fn row_prefix(flat: &BitString, row: usize) -> BitString {
        let mut out = BitString::empty();
        let mut col = 0;
        loop {
            let pos = position(row, col);
            if pos >= flat.len() {
                return out;
            }
            out.push(flat.bit(pos));
            col += 1;
        }
    }
}

/// Errors raised by measure queries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MeasureError {
    /// An explicit measure was queried below its table depth.
    DepthExceeded { depth: usize, queried: usize },
    /// A constructor argument was out of range.
    InvalidParameter(String),
}

impl fmt::Display for MeasureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureError::DepthExceeded { depth, queried } => write!(
                f,
                "explicit measure fixed to depth {depth} queried at depth {queried}"
            ),
            MeasureError::InvalidParameter(msg) => write!(f, "invalid measure parameter: {msg}"),
        }
    }
}

impl std::error::Error for MeasureError {}

/// A computable measure presented through exact cylinder masses.
#[derive(Clone, PartialEq, Eq)]
pub enum MeasureSpec {
    Bernoulli(Rational),
    Uniform,
    Explicit {
        depth: usize,
        /// Mass per depth-`depth` word; absent keys mean zero.
        weights: BTreeMap<BitString, Rational>,
    },
    RealTable,
}

impl MeasureSpec {
    /// Bernoulli measure with ones-probability `p`, `0 <= p <= 1`.
    pub fn bernoulli(p: Rational) -> Result<Self, MeasureError> {
        if p.is_negative() || p > Rational::one() {
            return Err(MeasureError::InvalidParameter(format!(
                "bernoulli parameter {p} outside [0,1]"
            )));
        }
        Ok(MeasureSpec::Bernoulli(p))
    }

    /// Explicit measure: nonnegative weights on depth-`depth` words summing
    /// to one. Missing words carry zero mass.
    pub fn explicit(
        depth: usize,
        weights: BTreeMap<BitString, Rational>,
    ) -> Result<Self, MeasureError> {
        let mut total = Rational::zero();
        for (word, w) in &weights {
            if word.len() != depth {
                return Err(MeasureError::InvalidParameter(format!(
                    "weight key {word} does not have depth {depth}"
                )));
            }
            if w.is_negative() {
                return Err(MeasureError::InvalidParameter(format!(
                    "negative weight {w} at {word}"
                )));
            }
            total += w;
        }
        if !total.is_one() {
            return Err(MeasureError::InvalidParameter(format!(
                "weights sum to {total}, not 1/1"
            )));
        }
        Ok(MeasureSpec::Explicit { depth, weights })
    }

    /// Exact mass of the cylinder `xΩ`.
    pub fn mass(&self, x: &BitString) -> Result<Rational, MeasureError> {
        match self {
            MeasureSpec::Uniform | MeasureSpec::RealTable => {
                Ok(Rational::pow2(-(x.len() as i32)))
            }
            MeasureSpec::Bernoulli(p) => {
                let q = Rational::one() - p.clone();
                let mut out = Rational::one();
                for i in 0..x.len() {
                    out *= if x.bit(i) { p } else { &q };
                }
                Ok(out)
            }
            MeasureSpec::Explicit { depth, weights } => {
                if x.len() > *depth {
                    return Err(MeasureError::DepthExceeded {
                        depth: *depth,
                        queried: x.len(),
                    });
                }
                let mut out = Rational::zero();
                for (word, w) in weights {
                    if x.is_prefix_of(word) {
                        out += w;
                    }
                }
                Ok(out)
            }
        }
    }

    /// Exact mass of a clopen set: the sum over its antichain, which is a
    /// disjoint cover by construction.
    pub fn clopen_mass(&self, c: &ClopenSet) -> Result<Rational, MeasureError> {
        let mut out = Rational::zero();
        for s in c.antichain() {
            out += &self.mass(s)?;
        }
        Ok(out)
    }

    /// The pseudometric `d(A, B) = mass(A Δ B)`.
    pub fn distance(&self, a: &ClopenSet, b: &ClopenSet) -> Result<Rational, MeasureError> {
        self.clopen_mass(&a.symmetric_difference(b))
    }

    /// Whether coordinates are independent and identically distributed, so
    /// that events on disjoint coordinate sets have product masses.
    pub fn is_iid_product(&self) -> bool {
        matches!(
            self,
            MeasureSpec::Bernoulli(_) | MeasureSpec::Uniform | MeasureSpec::RealTable
        )
    }

    /// For iid-product measures, the marginal measure seen by any infinite
    /// coordinate subsequence (in particular a table row).
    pub fn row_marginal(&self) -> Option<MeasureSpec> {
        match self {
            MeasureSpec::Uniform | MeasureSpec::RealTable => Some(MeasureSpec::Uniform),
            MeasureSpec::Bernoulli(p) => Some(MeasureSpec::Bernoulli(p.clone())),
            MeasureSpec::Explicit { .. } => None,
        }
    }

    /// True when every nonempty clopen set has positive mass.
    pub fn has_full_support(&self) -> bool {
        match self {
            MeasureSpec::Uniform | MeasureSpec::RealTable => true,
            MeasureSpec::Bernoulli(p) => !p.is_zero() && !p.is_one(),
            MeasureSpec::Explicit { weights, .. } => {
                weights.values().all(|w| !w.is_zero()) && weights.len() == 1 << depth_of(self)
            }
        }
    }
}

fn depth_of(m: &MeasureSpec) -> usize {
    match m {
        MeasureSpec::Explicit { depth, .. } => *depth,
        _ => 0,
    }
}

impl fmt::Debug for MeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureSpec::Bernoulli(p) => write!(f, "bernoulli:{p}"),
            MeasureSpec::Uniform => write!(f, "uniform"),
            MeasureSpec::RealTable => write!(f, "table"),
            MeasureSpec::Explicit { depth, .. } => write!(f, "explicit(depth {depth})"),
        }
    }
}
