//! Finite binary words.
//!
//! A [`BitString`] is a finite word over `{0,1}`, the address of a cylinder
//! `xΩ` inside Cantor space. The derived ordering is lexicographic with a
//! prefix sorting before its extensions, which the clopen-set algebra relies
//! on. The textual form is a plain `0`/`1` string with `e` standing for the
//! empty word.

use std::fmt;
use std::str::FromStr;

/// A finite word over `{0,1}`; addresses the cylinder of all extensions.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    pub fn empty() -> Self {
        BitString { bits: Vec::new() }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        BitString { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bit(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn push(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    /// `self` followed by `bit`.
    pub fn child(&self, bit: bool) -> Self {
        let mut bits = self.bits.clone();
        bits.push(bit);
        BitString { bits }
    }

    /// Drops the last bit; `None` on the empty word.
    pub fn parent(&self) -> Option<Self> {
        if self.bits.is_empty() {
            None
        } else {
            Some(BitString {
                bits: self.bits[..self.bits.len() - 1].to_vec(),
            })
        }
    }

    /// Same word with the last bit flipped; `None` on the empty word.
    pub fn sibling(&self) -> Option<Self> {
        if self.bits.is_empty() {
            None
        } else {
            let mut bits = self.bits.clone();
            let last = bits.len() - 1;
            bits[last] = !bits[last];
            Some(BitString { bits })
        }
    }

    pub fn is_prefix_of(&self, other: &BitString) -> bool {
        self.bits.len() <= other.bits.len() && other.bits[..self.bits.len()] == self.bits[..]
    }

    /// `self` followed by all of `tail`.
    pub fn concat(&self, tail: &BitString) -> Self {
        let mut bits = self.bits.clone();
        bits.extend_from_slice(&tail.bits);
        BitString { bits }
    }

    /// First `n` bits; panics if `n > len`.
    pub fn prefix(&self, n: usize) -> Self {
        BitString {
            bits: self.bits[..n].to_vec(),
        }
    }

    /// All `2^n` words of length `n`, in lexicographic order.
    pub fn all_of_length(n: usize) -> Vec<BitString> {
        let mut out = Vec::with_capacity(1 << n);
        for value in 0..(1u64 << n) {
            let bits = (0..n).map(|i| (value >> (n - 1 - i)) & 1 == 1).collect();
            out.push(BitString { bits });
        }
        out
    }

    /// Position of this word in the length-then-lexicographic enumeration of
    /// all finite words (`e`, `0`, `1`, `00`, `01`, ...). Heap indexing: the
    /// word with value `v` and length `l` sits at `(1 << l | v) - 1`.
    pub fn vertex_index(&self) -> usize {
        let mut key = 1usize;
        for &b in &self.bits {
            key = (key << 1) | usize::from(b);
        }
        key - 1
    }

    /// Index of the input coordinate that codes the edge between this vertex
    /// and its parent, when a pruned-tree sample is written as one bit per
    /// non-root vertex in [`BitString::vertex_index`] order. Panics for the
    /// root, which has no parent edge.
    pub fn edge_index(&self) -> usize {
        assert!(!self.is_empty(), "the root has no parent edge");
        self.vertex_index() - 1
    }

    /// Inverse of [`BitString::vertex_index`].
    pub fn vertex_at(index: usize) -> BitString {
        let key = index + 1;
        let len = (usize::BITS - 1 - key.leading_zeros()) as usize;
        let bits = (0..len).map(|i| (key >> (len - 1 - i)) & 1 == 1).collect();
        BitString { bits }
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bits.is_empty() {
            return write!(f, "e");
        }
        for &b in &self.bits {
            write!(f, "{}", if b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{}\"", self)
    }
}

/// Failed parse of a bit-string literal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseBitStringError(pub String);

impl fmt::Display for ParseBitStringError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid bit string: {:?}", self.0)
    }
}

impl std::error::Error for ParseBitStringError {}

impl FromStr for BitString {
    type Err = ParseBitStringError;

    /// Accepts a `0`/`1` word, the empty string, or `e` for the empty word.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "e" || s.is_empty() {
            return Ok(BitString::empty());
        }
        let mut bits = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                _ => return Err(ParseBitStringError(s.to_string())),
            }
        }
        Ok(BitString { bits })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn ordering_puts_prefix_before_extension() {
        assert!(b("0") < b("00"));
        assert!(b("00") < b("01"));
        assert!(b("01") < b("1"));
        assert!(BitString::empty() < b("0"));
    }

    #[test]
    fn prefix_relation() {
        assert!(b("0").is_prefix_of(&b("01")));
        assert!(b("e").is_prefix_of(&b("1")));
        assert!(!b("01").is_prefix_of(&b("0")));
        assert!(!b("1").is_prefix_of(&b("01")));
        assert!(b("01").is_prefix_of(&b("01")));
    }

    #[test]
    fn display_and_parse_round_trip() {
        for s in ["e", "0", "1", "0110", "111"] {
            assert_eq!(b(s).to_string(), s);
        }
        assert_eq!(b(""), BitString::empty());
        assert!("01x".parse::<BitString>().is_err());
    }

    #[test]
    fn vertex_enumeration_is_length_then_lex() {
        let expect = ["e", "0", "1", "00", "01", "10", "11", "000"];
        for (i, s) in expect.iter().enumerate() {
            assert_eq!(BitString::vertex_at(i), b(s), "index {i}");
            assert_eq!(b(s).vertex_index(), i);
        }
    }

    #[test]
    fn all_of_length_is_lexicographic_and_complete() {
        let all = BitString::all_of_length(3);
        assert_eq!(all.len(), 8);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(all[0], b("000"));
        assert_eq!(all[7], b("111"));
    }

    #[test]
    fn family_helpers() {
        assert_eq!(b("01").parent(), Some(b("0")));
        assert_eq!(b("01").sibling(), Some(b("00")));
        assert_eq!(BitString::empty().parent(), None);
        assert_eq!(b("0").child(true), b("01"));
        assert_eq!(b("01").prefix(1), b("0"));
        assert_eq!(b("0").concat(&b("11")), b("011"));
    }
}
