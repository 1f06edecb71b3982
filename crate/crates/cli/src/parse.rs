//! Input grammar shared by every subcommand: rationals, bit words, clopen
//! sets, measures, relations, maps, and staged tests, plus the line-oriented
//! file formats behind `explicit@path` and `file@path`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;

use cantorlab_core::bits::BitString;
use cantorlab_core::clopen::ClopenSet;
use cantorlab_core::coupling::RelationAtDepth;
use cantorlab_core::event::{Event, EventError};
use cantorlab_core::layerwise::{identity_map, total_to_cauchy, CauchyMap};
use cantorlab_core::measure::MeasureSpec;
use cantorlab_core::mltest::{BoundSpec, StagedTest};
use cantorlab_core::rational::Rational;
use cantorlab_core::showcase::evenodd_split;
use cantorlab_core::showcase::relations::builtin_relation;
use cantorlab_core::showcase::threshold::threshold_map;
use cantorlab_core::showcase::trees::tree_pruning_map;

/// A malformed input value. Reported on stderr together with the grammar
/// summary; the process exits with code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub type Parsed<T> = Result<T, UsageError>;

fn bad<T>(msg: impl Into<String>) -> Parsed<T> {
    Err(UsageError(msg.into()))
}

pub fn rational(s: &str) -> Parsed<Rational> {
    s.parse()
        .map_err(|_| UsageError(format!("`{s}` is not a rational; write `a/b` or an integer")))
}

pub fn word(s: &str) -> Parsed<BitString> {
    s.parse().map_err(|_| {
        UsageError(format!(
            "`{s}` is not a bit word; use 0/1 characters, or `e` for the empty word"
        ))
    })
}

/// Clopen sets are comma-separated cylinder prefixes (`-` for the empty
/// set); the result is canonicalized.
pub fn clopen(s: &str) -> Parsed<ClopenSet> {
    if s == "-" {
        return Ok(ClopenSet::empty());
    }
    let mut cells = Vec::new();
    for part in s.split(',') {
        cells.push(word(part)?);
    }
    Ok(ClopenSet::canonicalize(cells))
}

/// `bernoulli:p`, `uniform`, `table`, or `explicit@path`.
pub fn measure(s: &str) -> Parsed<MeasureSpec> {
    if s == "uniform" {
        return Ok(MeasureSpec::Uniform);
    }
    if s == "table" {
        return Ok(MeasureSpec::RealTable);
    }
    if let Some(p) = s.strip_prefix("bernoulli:") {
        return MeasureSpec::bernoulli(rational(p)?)
            .map_err(|e| UsageError(format!("bad bernoulli measure: {e}")));
    }
    if let Some(path) = s.strip_prefix("explicit@") {
        return explicit_from_file(path);
    }
    bad(format!(
        "`{s}` is not a measure; use `bernoulli:p`, `uniform`, `table`, or `explicit@path`"
    ))
}

fn data_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

/// File format: a `depth n` header, then one `prefix mass` line per
/// depth-`n` word carrying positive mass. Missing words carry zero mass.
fn explicit_from_file(path: &str) -> Parsed<MeasureSpec> {
    let text =
        fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read `{path}`: {e}")))?;
    let mut lines = data_lines(&text);
    let header = match lines.next() {
        Some(h) => h,
        None => return bad(format!("`{path}` is empty; expected a `depth n` header")),
    };
    let depth = match header
        .strip_prefix("depth")
        .and_then(|rest| rest.trim().parse::<usize>().ok())
    {
        Some(d) => d,
        None => {
            return bad(format!(
                "first line of `{path}` must be `depth n`, got `{header}`"
            ))
        }
    };
    let mut weights = BTreeMap::new();
    for line in lines {
        let mut fields = line.split_whitespace();
        let (Some(w), Some(m), None) = (fields.next(), fields.next(), fields.next()) else {
            return bad(format!("expected `prefix mass` in `{path}`, got `{line}`"));
        };
        if weights.insert(word(w)?, rational(m)?).is_some() {
            return bad(format!("`{path}` lists `{w}` twice"));
        }
    }
    MeasureSpec::explicit(depth, weights)
        .map_err(|e| UsageError(format!("bad explicit measure in `{path}`: {e}")))
}

/// Built-in relations by name, or `file@path` where each line reads
/// `depth u v` and lists one related pair; unlisted pairs do not hold.
pub fn relation(s: &str) -> Parsed<RelationAtDepth> {
    if let Some(r) = builtin_relation(s) {
        return Ok(r);
    }
    if let Some(path) = s.strip_prefix("file@") {
        return relation_from_file(path);
    }
    bad(format!(
        "`{s}` is not a relation; use `equality`, `full`, `domination`, `paths`, or `file@path`"
    ))
}

fn relation_from_file(path: &str) -> Parsed<RelationAtDepth> {
    let text =
        fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read `{path}`: {e}")))?;
    let mut pairs: BTreeSet<(usize, BitString, BitString)> = BTreeSet::new();
    for line in data_lines(&text) {
        let mut fields = line.split_whitespace();
        let (Some(n), Some(u), Some(v), None) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return bad(format!("expected `depth u v` in `{path}`, got `{line}`"));
        };
        let Ok(n) = n.parse::<usize>() else {
            return bad(format!("`{n}` in `{path}` is not a depth"));
        };
        let (u, v) = (word(u)?, word(v)?);
        if u.len() != n || v.len() != n {
            return bad(format!(
                "`{line}` in `{path}`: both words must have length {n}"
            ));
        }
        pairs.insert((n, u, v));
    }
    let name = path.rsplit('/').next().unwrap_or(path).to_string();
    Ok(RelationAtDepth::new(name, move |n, u, v| {
        pairs.contains(&(n, u.clone(), v.clone()))
    }))
}

/// Failures while *building* a map or test from its textual form. Budget
/// exhaustion is an expected negative (exit 1), not a usage error.
pub enum BuildError {
    Usage(UsageError),
    Budget { budget: u64 },
}

impl From<UsageError> for BuildError {
    fn from(e: UsageError) -> Self {
        BuildError::Usage(e)
    }
}

impl From<EventError> for BuildError {
    fn from(e: EventError) -> Self {
        match e {
            EventError::BudgetExhausted { budget } => BuildError::Budget { budget },
            other => BuildError::Usage(UsageError(format!("cannot build map: {other}"))),
        }
    }
}

fn built<T>(msg: impl Into<String>) -> Result<T, BuildError> {
    Err(BuildError::Usage(UsageError(msg.into())))
}

/// Map grammar: `identity:nbits`, `threshold:theta:nbits`,
/// `treeprune:nbits`, or `split:nbits`. `max_level` is the deepest
/// approximation level the caller will query; `budget` caps enumeration
/// while staging the split map.
pub fn map(s: &str, max_level: usize, budget: u64) -> Result<CauchyMap, BuildError> {
    let mut parts = s.split(':');
    let head = parts.next().unwrap_or_default();
    let rest: Vec<&str> = parts.collect();
    let nbits_arg = |args: &[&str]| -> Parsed<usize> {
        match args {
            [n] => n
                .parse()
                .map_err(|_| UsageError(format!("`{n}` is not a bit count"))),
            _ => bad(format!("`{s}` takes exactly one `:nbits` argument")),
        }
    };
    match head {
        "identity" => Ok(identity_map(MeasureSpec::Uniform, nbits_arg(&rest)?)),
        "treeprune" => Ok(tree_pruning_map(nbits_arg(&rest)?)),
        "split" => Ok(total_to_cauchy(
            &evenodd_split(),
            nbits_arg(&rest)?,
            max_level,
            budget,
        )?),
        "threshold" => match rest.as_slice() {
            [theta, n] => {
                let theta = rational(theta)?;
                let Ok(n) = n.parse::<usize>() else {
                    return built(format!("`{n}` is not a bit count"));
                };
                if theta.is_negative() || theta > Rational::one() {
                    return built(format!("threshold `{theta}` must lie in [0,1]"));
                }
                Ok(threshold_map(&theta, n))
            }
            _ => built(format!("`{s}` must read `threshold:theta:nbits`")),
        },
        _ => built(format!(
            "`{s}` is not a map; use `identity:nbits`, `threshold:theta:nbits`, \
             `treeprune:nbits`, or `split:nbits`"
        )),
    }
}

/// Test grammar: the built-in families `ones`, `zeros`, `alternating`,
/// `runs`, or `defect:<map>` for the movement test a map certifies about
/// its own bits.
pub fn staged_test(s: &str, max_level: usize, budget: u64) -> Result<StagedTest, BuildError> {
    match s {
        "ones" => Ok(StagedTest::new("ones", BoundSpec::PowHalf, true, |i, _| {
            Event::clopen(ClopenSet::cylinder(&BitString::from_bits(vec![true; i])))
        })),
        "zeros" => Ok(StagedTest::new(
            "zeros",
            BoundSpec::PowHalf,
            true,
            |i, _| Event::clopen(ClopenSet::cylinder(&BitString::from_bits(vec![false; i]))),
        )),
        "alternating" => Ok(StagedTest::new(
            "alternating",
            BoundSpec::PowHalf,
            true,
            |i, _| {
                Event::clopen(ClopenSet::cylinder(&BitString::from_bits(
                    (0..i).map(|j| j % 2 == 1).collect(),
                )))
            },
        )),
        // Leading 1-runs of length between i+1 and t+1: mass grows with the
        // time index but stays below 2^-i.
        "runs" => Ok(StagedTest::new("runs", BoundSpec::PowHalf, true, |i, t| {
            let cells = (i + 1..=t + 1).map(|j| {
                let mut bits = vec![true; j];
                bits.push(false);
                BitString::from_bits(bits)
            });
            Event::clopen(ClopenSet::canonicalize(cells))
        })),
        _ => {
            if let Some(map_arg) = s.strip_prefix("defect:") {
                let m = map(map_arg, max_level, budget)?;
                match m.defect_test() {
                    Some(t) => Ok(t),
                    None => built(format!("map `{map_arg}` does not certify its movement")),
                }
            } else {
                built(format!(
                    "`{s}` is not a test; use `ones`, `zeros`, `alternating`, `runs`, \
                     or `defect:<map>`"
                ))
            }
        }
    }
}
