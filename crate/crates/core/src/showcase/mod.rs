//! Worked example constructions exercising every layer of the library:
//! threshold comparison maps over encoded reals, two equivalent random-tree
//! processes with an independent bracketing oracle, the tree-pruning map,
//! and example relations for the coupling solver.

pub mod relations;
pub mod threshold;
pub mod trees;

use crate::bits::BitString;
use crate::layerwise::TotalMonotoneMap;
use crate::measure::MeasureSpec;

/// The map keeping the even-position bits of the input. Each new input bit
/// extends the output by at most one bit, so emission is prefix-monotone,
/// and output bit `k` is fully determined at input depth `2k+1`.
pub fn evenodd_split() -> TotalMonotoneMap {
    TotalMonotoneMap::new("evenodd", MeasureSpec::Uniform, |x: &BitString| {
        BitString::from_bits(x.bits().iter().copied().step_by(2).collect())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layerwise::{from_total, total_to_cauchy, TotalConversion};
    use crate::clopen::ClopenSet;

    fn b(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn evenodd_emits_even_positions() {
        let f = evenodd_split();
        assert_eq!(f.emit(&b("0101")), b("00"));
        assert_eq!(f.emit(&BitString::empty()), BitString::empty());
        assert_eq!(f.emit(&b("1")), b("1"));
        assert_eq!(f.emit(&b("101101")), b("110"));
    }

    #[test]
    fn evenodd_is_monotone() {
        assert_eq!(evenodd_split().find_monotonicity_violation(8), None);
    }

    #[test]
    fn evenodd_bits_convert_exactly() {
        let f = evenodd_split();
        // Output bit k copies input bit 2k, so the stage enumeration
        // terminates with zero deficit and yields exactly that cylinder set.
        for k in 0..3usize {
            let TotalConversion::Converged(set) = from_total(&f, k, 10, 1 << 12).unwrap() else {
                panic!("bit {k} is clopen-determined");
            };
            let expected = ClopenSet::canonicalize(
                BitString::all_of_length(2 * k).into_iter().map(|w| w.child(true)),
            );
            assert_eq!(set, expected);
        }
        let map = total_to_cauchy(&f, 2, 6, 1 << 12).unwrap();
        assert_eq!(map.bit_count(), 2);
    }
}
