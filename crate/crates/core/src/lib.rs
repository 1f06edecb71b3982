//! Exact-arithmetic toolkit for Cantor space `{0,1}^N`.
//!
//! Everything here is finite-stage and certified: clopen subsets are canonical
//! prefix-free antichains with structural equality, measures report exact
//! rational cylinder masses, statistical tests carry audited stage bounds, and
//! mappings between sequence spaces are handled through staged clopen
//! approximations whose error is an explicit rational at every level.
//!
//! Module map:
//!
//! * [`rational`] / [`bits`] / [`clopen`] — exact rationals, finite words, and
//!   the canonical clopen-set algebra.
//! * [`measure`] — computable measures (Bernoulli, uniform, finite-depth
//!   explicit tables, and the interleaved real-table encoding).
//! * [`event`] — structured, exactly-measurable input events; the
//!   representation that keeps deep stage sets tractable.
//! * [`mltest`] — staged tests with mass bounds, the diagonal combiner, and
//!   deficiency estimates.
//! * [`layerwise`] — staged bit approximations, total monotone maps, modulus
//!   machines, and the conversions between the three representations.
//! * [`pushforward`] — image masses with certified precision, pulled-back
//!   tests, and a sound closed-image complement certifier.
//! * [`coupling`] — depth-indexed relations and exact transportation
//!   feasibility with machine-checkable certificates.
//! * [`branching`] / [`showcase`] — the binary-branching survival process and
//!   the worked example maps, relations, and distributions built from it.

pub mod bits;
pub mod branching;
pub mod clopen;
pub mod coupling;
pub mod event;
pub mod layerwise;
pub mod measure;
pub mod mltest;
pub mod pushforward;
pub mod rational;
pub mod showcase;

pub use bits::BitString;
pub use clopen::{BoolOp, ClopenSet, Ternary};
pub use event::Event;
pub use layerwise::{CauchyMap, ModulusMachine, TotalMonotoneMap};
pub use measure::MeasureSpec;
pub use mltest::StagedTest;
pub use rational::Rational;
