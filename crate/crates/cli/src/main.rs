//! `cantorlab` — command-line front end over the exact Cantor-space
//! toolkit. Every invocation writes a single structured document to
//! standard output (aligned tables under `--pretty`) and exits 0 on
//! success, 1 on an expected negative result (bound violation, infeasible
//! coupling, exhausted enumeration budget), or 2 on a usage error.

mod parse;
mod render;

use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::Value;

use cantorlab_core::bits::BitString;
use cantorlab_core::branching::survival;
use cantorlab_core::clopen::{ClopenSet, Ternary};
use cantorlab_core::coupling::{
    check_conditions, class_witness, solve_coupling, CouplingError, CouplingMatrix,
    CouplingOutcome, MatrixAuditViolation,
};
use cantorlab_core::event::EventError;
use cantorlab_core::layerwise::{machine_to_cauchy, stage_distance, to_machine, CauchyMap};
use cantorlab_core::mltest::{
    check_stage_bounds, combine_diagonal, deficiency_lower_bound, StageBoundViolation,
    StagedTest,
};
use cantorlab_core::pushforward::{
    closed_image_complement, image_mass, pullback_test, PushforwardError,
};
use cantorlab_core::rational::Rational;
use cantorlab_core::showcase::evenodd_split;
use cantorlab_core::showcase::threshold::threshold_map;
use cantorlab_core::showcase::trees::{
    tree_dist_direct, tree_dist_percolation, tree_dist_percolation_bracket,
};

use parse::{BuildError, UsageError};
use render::{Outcome, Status};

const DEFAULT_BUDGET: u64 = 1_000_000;

const GRAMMAR: &str = "\
subcommands:
  measure mass        --measure M --prefix U
  measure clopen-mass --measure M --set A
  measure distance    --measure M --left A --right B
  clopen op           --kind union|intersection|difference|symmetric-difference|complement
                      --left A [--right B]
  clopen refine       --set A --depth N
  test check          --test T --measure M [--max-level I] [--max-time J] [--budget B]
  test combine        --tests T1,T2,... --measure M [--max-level I] [--max-time J] [--budget B]
  test deficiency     --test T --input U [--time J] [--budget B]
  map eval            --map F --input U [--level I] [--budget B]
  map defect          --map F [--max-level I] [--max-time J] [--budget B]
  map convert         --map F [--nbits K] [--max-level I] [--budget B]
  image mass          --map F --prefix U --eps E [--budget B]
  image pullback      --map F --target T [--max-level I] [--max-time J] [--max-shift S] [--budget B]
  image complement    --map F --removed A --stage I [--output-depth M] --input-depth N [--budget B]
  coupling check      --relation R --depth N
  coupling solve      --p M --q M --relation R --depth N
  coupling witness    --p M --relation R --depth N
  tree pn             --n N
  tree dist           --depth K --process direct|percolation [--conditioned]
  tree bracket        --depth K --horizon N [--conditioned]
  examples threshold  --theta Q [--nbits K] [--input U] [--level I]
  examples split      [--input U]

value grammar:
  rationals  a/b or an integer                bit words  0/1 characters, `e` = empty
  clopen set comma-separated prefixes, `-` = empty set
  measure M  bernoulli:p | uniform | table | explicit@path
             (file: `depth n` header, then one `prefix mass` line each)
  relation R equality | full | domination | paths | file@path
             (file: one `depth u v` line per related pair)
  map F      identity:nbits | threshold:theta:nbits | treeprune:nbits | split:nbits
  test T     ones | zeros | alternating | runs | defect:<map>

environment:
  CANTORLAB_MAX_BUDGET  cap on enumeration budgets (default 1000000)";

#[derive(Parser)]
#[command(
    name = "cantorlab",
    about = "Exact clopen algebra, staged tests, layerwise maps, image measures, and couplings on Cantor space",
    after_help = GRAMMAR,
    disable_help_subcommand = true
)]
struct Cli {
    /// Render human-readable tables instead of the JSON document.
    #[arg(long, global = true)]
    pretty: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact masses of cylinders and clopen sets.
    #[command(subcommand)]
    Measure(MeasureCmd),
    /// Canonical antichain algebra.
    #[command(subcommand)]
    Clopen(ClopenCmd),
    /// Staged-test bound checking, combination, and deficiency.
    #[command(subcommand)]
    Test(TestCmd),
    /// Layerwise maps: evaluation, movement certificates, conversions.
    #[command(subcommand)]
    Map(MapCmd),
    /// Image measures, pulled-back tests, certified image complements.
    #[command(subcommand)]
    Image(ImageCmd),
    /// Relation conditions and coupling feasibility.
    #[command(subcommand)]
    Coupling(CouplingCmd),
    /// Random-tree survival numbers, shape laws, and brackets.
    #[command(subcommand)]
    Tree(TreeCmd),
    /// Worked example maps, runnable directly.
    #[command(subcommand)]
    Examples(ExamplesCmd),
}

#[derive(Subcommand)]
enum MeasureCmd {
    /// Mass of one cylinder.
    Mass {
        #[arg(long)]
        measure: String,
        #[arg(long)]
        prefix: String,
    },
    /// Mass of a clopen set.
    ClopenMass {
        #[arg(long)]
        measure: String,
        #[arg(long)]
        set: String,
    },
    /// Mass of the symmetric difference of two clopen sets.
    Distance {
        #[arg(long)]
        measure: String,
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OpKind {
    Union,
    Intersection,
    Difference,
    SymmetricDifference,
    Complement,
}

#[derive(Subcommand)]
enum ClopenCmd {
    /// Boolean combination of clopen sets, canonicalized.
    Op {
        #[arg(long, value_enum)]
        kind: OpKind,
        #[arg(long)]
        left: String,
        /// Second operand; required for every kind except complement.
        #[arg(long)]
        right: Option<String>,
    },
    /// Rewrite a clopen set as depth-N cylinders.
    Refine {
        #[arg(long)]
        set: String,
        #[arg(long)]
        depth: usize,
    },
}

#[derive(Subcommand)]
enum TestCmd {
    /// Audit stage masses, growth in time, and nesting in level.
    Check {
        #[arg(long)]
        test: String,
        #[arg(long)]
        measure: String,
        #[arg(long, default_value_t = 6)]
        max_level: usize,
        #[arg(long, default_value_t = 12)]
        max_time: usize,
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Merge several tests into one along the shifted diagonal, then audit.
    Combine {
        #[arg(long, value_delimiter = ',')]
        tests: Vec<String>,
        #[arg(long)]
        measure: String,
        #[arg(long, default_value_t = 6)]
        max_level: usize,
        #[arg(long, default_value_t = 12)]
        max_time: usize,
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Largest level whose stage already contains the given prefix.
    Deficiency {
        #[arg(long)]
        test: String,
        #[arg(long)]
        input: String,
        #[arg(long, default_value_t = 20)]
        time: usize,
        #[arg(long)]
        budget: Option<u64>,
    },
}

#[derive(Subcommand)]
enum MapCmd {
    /// Resolve output bits on an input prefix at one approximation level.
    Eval {
        #[arg(long)]
        map: String,
        #[arg(long)]
        input: String,
        #[arg(long, default_value_t = 6)]
        level: usize,
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Audit the movement test the map certifies about its own bits.
    Defect {
        #[arg(long)]
        map: String,
        #[arg(long, default_value_t = 6)]
        max_level: usize,
        #[arg(long, default_value_t = 12)]
        max_time: usize,
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Round-trip through the modulus-machine form and measure the drift.
    Convert {
        #[arg(long)]
        map: String,
        /// Bits to reconstruct (default: all of them).
        #[arg(long)]
        nbits: Option<usize>,
        #[arg(long, default_value_t = 6)]
        max_level: usize,
        #[arg(long)]
        budget: Option<u64>,
    },
}

#[derive(Subcommand)]
enum ImageCmd {
    /// Image mass of a cylinder to requested precision, with certificate.
    Mass {
        #[arg(long)]
        map: String,
        #[arg(long)]
        prefix: String,
        #[arg(long)]
        eps: String,
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Pull a test back through a map and renumber until bounds hold.
    Pullback {
        #[arg(long)]
        map: String,
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 5)]
        max_level: usize,
        #[arg(long, default_value_t = 6)]
        max_time: usize,
        #[arg(long, default_value_t = 4)]
        max_shift: usize,
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Certify output cylinders disjoint from the image of what remains.
    Complement {
        #[arg(long)]
        map: String,
        #[arg(long)]
        removed: String,
        #[arg(long)]
        stage: usize,
        /// Output depth to certify at (default: the map's bit count).
        #[arg(long)]
        output_depth: Option<usize>,
        #[arg(long)]
        input_depth: usize,
        #[arg(long)]
        budget: Option<u64>,
    },
}

#[derive(Subcommand)]
enum CouplingCmd {
    /// Totality and coherence of a relation through a depth.
    Check {
        #[arg(long)]
        relation: String,
        #[arg(long)]
        depth: usize,
    },
    /// Exact feasibility of a relation-supported coupling, with certificate.
    Solve {
        #[arg(long)]
        p: String,
        #[arg(long)]
        q: String,
        #[arg(long)]
        relation: String,
        #[arg(long)]
        depth: usize,
    },
    /// Canonical row-spread witness for one marginal, audited.
    Witness {
        #[arg(long)]
        p: String,
        #[arg(long)]
        relation: String,
        #[arg(long)]
        depth: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TreeProcess {
    Direct,
    Percolation,
}

#[derive(Subcommand)]
enum TreeCmd {
    /// Survival probability of the branching recurrence at height N.
    Pn {
        #[arg(long)]
        n: usize,
    },
    /// Exact law of the pruned shape to a depth.
    Dist {
        #[arg(long)]
        depth: usize,
        #[arg(long, value_enum)]
        process: TreeProcess,
        /// Condition the percolation law on a surviving root.
        #[arg(long)]
        conditioned: bool,
    },
    /// Finite-horizon interval brackets for the shape law.
    Bracket {
        #[arg(long)]
        depth: usize,
        #[arg(long)]
        horizon: usize,
        /// Bracket the root-conditioned law instead of the plain one.
        #[arg(long)]
        conditioned: bool,
    },
}

#[derive(Subcommand)]
enum ExamplesCmd {
    /// Bits comparing successive encoded reals against a threshold.
    Threshold {
        #[arg(long)]
        theta: String,
        #[arg(long, default_value_t = 8)]
        nbits: usize,
        /// Input prefix to evaluate on.
        #[arg(long)]
        input: Option<String>,
        #[arg(long, default_value_t = 6)]
        level: usize,
    },
    /// The even-position subsequence extractor.
    Split {
        /// Input prefix to run through the extractor.
        #[arg(long)]
        input: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cap = match std::env::var("CANTORLAB_MAX_BUDGET") {
        Ok(v) => match v.trim().parse::<u64>() {
            Ok(n) if n > 0 => n,
            _ => {
                eprintln!("usage error: CANTORLAB_MAX_BUDGET must be a positive integer, got `{v}`");
                return ExitCode::from(2);
            }
        },
        Err(_) => DEFAULT_BUDGET,
    };
    let pretty = cli.pretty;
    match dispatch(cli.command, cap) {
        Ok(outcome) => {
            print!("{}", with_newline(outcome.render(pretty)));
            ExitCode::from(outcome.status.exit_code() as u8)
        }
        Err(UsageError(msg)) => {
            eprintln!("usage error: {msg}");
            eprintln!("\n{GRAMMAR}");
            ExitCode::from(2)
        }
    }
}

fn with_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

/// Effective enumeration budget: the flag if given, capped by the
/// environment limit.
fn budget(flag: Option<u64>, cap: u64) -> u64 {
    flag.unwrap_or(cap).min(cap)
}

/// Build a map from its textual form; budget exhaustion becomes a finished
/// negative outcome rather than an error.
fn build_map(
    form: &str,
    max_level: usize,
    budget: u64,
) -> Result<Result<CauchyMap, Outcome>, UsageError> {
    match parse::map(form, max_level, budget) {
        Ok(m) => Ok(Ok(m)),
        Err(BuildError::Usage(u)) => Err(u),
        Err(BuildError::Budget { budget }) => Ok(Err(budget_outcome(budget)))
    }
}

fn build_test(
    form: &str,
    max_level: usize,
    budget: u64,
) -> Result<Result<StagedTest, Outcome>, UsageError> {
    match parse::staged_test(form, max_level, budget) {
        Ok(t) => Ok(Ok(t)),
        Err(BuildError::Usage(u)) => Err(u),
        Err(BuildError::Budget { budget }) => Ok(Err(budget_outcome(budget)))
    }
}

fn budget_outcome(budget: u64) -> Outcome {
    Outcome::new(Status::BudgetExhausted).field("budget", budget)
}

/// Library-level event failures: exhausted budgets are finished negative
/// outcomes; anything else is a bad input combination.
fn event_stop(e: EventError) -> Result<Outcome, UsageError> {
    match e {
        EventError::BudgetExhausted { budget } => Ok(budget_outcome(budget)),
        other => Err(UsageError(other.to_string())),
    }
}

fn rat(r: &Rational) -> Value {
    Value::String(r.to_string())
}

fn words(items: &[BitString]) -> Value {
    Value::Array(items.iter().map(|w| Value::String(w.to_string())).collect())
}

fn cells_of(set: &ClopenSet) -> Value {
    words(set.antichain())
}

fn violation_rows(violations: &[StageBoundViolation]) -> Value {
    let rows = violations
        .iter()
        .map(|v| {
            let (kind, level, time) = match v {
                StageBoundViolation::MassExceedsBound { level, time, .. } => {
                    ("mass-exceeds-bound", *level, *time)
                }
                StageBoundViolation::NotMonotoneInTime { level, time, .. } => {
                    ("not-monotone-in-time", *level, *time)
                }
                StageBoundViolation::NotNestedInLevel { level, time, .. } => {
                    ("not-nested-in-level", *level, *time)
                }
            };
            serde_json::json!({
                "kind": kind,
                "level": level,
                "time": time,
                "detail": v.to_string(),
            })
        })
        .collect();
    Value::Array(rows)
}

fn matrix_rows(matrix: &CouplingMatrix) -> Value {
    let rows = matrix
        .entries
        .iter()
        .map(|((u, v), mass)| {
            serde_json::json!({
                "u": u.to_string(),
                "v": v.to_string(),
                "mass": mass.to_string(),
            })
        })
        .collect();
    Value::Array(rows)
}

fn audit_rows(violations: &[MatrixAuditViolation]) -> Value {
    let rows = violations
        .iter()
        .map(|v| Value::String(format!("{v:?}")))
        .collect();
    Value::Array(rows)
}

fn coupling_stop(e: CouplingError) -> Result<Outcome, UsageError> {
    match e {
        CouplingError::TotalityViolation { depth, row } => Ok(Outcome::new(Status::Violation)
            .field("reason", "totality violation")
            .field("depth", depth as u64)
            .field("row", row.to_string())),
        CouplingError::Measure(m) => Err(UsageError(m.to_string())),
    }
}

/// Resolve every declared output bit of `map` on `input` at `level`:
/// `0`/`1` where decided, `?` where the prefix is too short to tell.
fn resolved_word(map: &CauchyMap, input: &BitString, level: usize) -> (String, usize) {
    let mut out = String::new();
    let mut determined = 0;
    for k in 0..map.bit_count() {
        out.push(match map.bit_stage(k, level).resolve(input) {
            Ternary::True => {
                determined += 1;
                '1'
            }
            Ternary::False => {
                determined += 1;
                '0'
            }
            Ternary::Undetermined => '?',
        });
    }
    (out, determined)
}

fn dispatch(command: Command, cap: u64) -> Result<Outcome, UsageError> {
    match command {
        Command::Measure(cmd) => run_measure(cmd),
        Command::Clopen(cmd) => run_clopen(cmd),
        Command::Test(cmd) => run_test(cmd, cap),
        Command::Map(cmd) => run_map(cmd, cap),
        Command::Image(cmd) => run_image(cmd, cap),
        Command::Coupling(cmd) => run_coupling(cmd),
        Command::Tree(cmd) => run_tree(cmd),
        Command::Examples(cmd) => run_examples(cmd),
    }
}

fn run_measure(cmd: MeasureCmd) -> Result<Outcome, UsageError> {
    match cmd {
        MeasureCmd::Mass { measure, prefix } => {
            let m = parse::measure(&measure)?;
            let u = parse::word(&prefix)?;
            let mass = m.mass(&u).map_err(|e| UsageError(e.to_string()))?;
            Ok(Outcome::ok().field("value", rat(&mass)))
        }
        MeasureCmd::ClopenMass { measure, set } => {
            let m = parse::measure(&measure)?;
            let a = parse::clopen(&set)?;
            let mass = m.clopen_mass(&a).map_err(|e| UsageError(e.to_string()))?;
            Ok(Outcome::ok().field("value", rat(&mass)))
        }
        MeasureCmd::Distance {
            measure,
            left,
            right,
        } => {
            let m = parse::measure(&measure)?;
            let a = parse::clopen(&left)?;
            let b = parse::clopen(&right)?;
            let d = m
                .clopen_mass(&a.symmetric_difference(&b))
                .map_err(|e| UsageError(e.to_string()))?;
            Ok(Outcome::ok().field("value", rat(&d)))
        }
    }
}

fn run_clopen(cmd: ClopenCmd) -> Result<Outcome, UsageError> {
    match cmd {
        ClopenCmd::Op { kind, left, right } => {
            let a = parse::clopen(&left)?;
            let b = right.as_deref().map(parse::clopen).transpose()?;
            let need_right = || {
                UsageError("this kind takes both `--left` and `--right`".into())
            };
            let result = match (kind, &b) {
                (OpKind::Complement, None) => a.complement(),
                (OpKind::Complement, Some(_)) => {
                    return Err(UsageError("complement takes only `--left`".into()))
                }
                (OpKind::Union, Some(b)) => a.union(b),
                (OpKind::Intersection, Some(b)) => a.intersection(b),
                (OpKind::Difference, Some(b)) => a.difference(b),
                (OpKind::SymmetricDifference, Some(b)) => a.symmetric_difference(b),
                (_, None) => return Err(need_right()),
            };
            Ok(Outcome::ok().field("cells", cells_of(&result)))
        }
        ClopenCmd::Refine { set, depth } => {
            let a = parse::clopen(&set)?;
            match a.refine_to_depth(depth) {
                Ok(cells) => Ok(Outcome::ok()
                    .field("depth", depth as u64)
                    .field("cells", words(&cells))),
                Err(e) => Err(UsageError(e.to_string())),
            }
        }
    }
}

fn run_test(cmd: TestCmd, cap: u64) -> Result<Outcome, UsageError> {
    match cmd {
        TestCmd::Check {
            test,
            measure,
            max_level,
            max_time,
            budget: b,
        } => {
            let b = budget(b, cap);
            let t = match build_test(&test, max_level + max_time + 2, b)? {
                Ok(t) => t,
                Err(out) => return Ok(out),
            };
            let m = parse::measure(&measure)?;
            let report = match check_stage_bounds(&t, &m, max_level, max_time) {
                Ok(r) => r,
                Err(e) => return event_stop(e),
            };
            let status = if report.passed() {
                Status::Ok
            } else {
                Status::Violation
            };
            Ok(Outcome::new(status)
                .field("test", t.name())
                .field("max_level", max_level as u64)
                .field("max_time", max_time as u64)
                .field("violations", violation_rows(&report.violations)))
        }
        TestCmd::Combine {
            tests,
            measure,
            max_level,
            max_time,
            budget: b,
        } => {
            if tests.is_empty() || tests.iter().any(|s| s.is_empty()) {
                return Err(UsageError(
                    "`--tests` takes a non-empty comma-separated list".into(),
                ));
            }
            let b = budget(b, cap);
            let mut built = Vec::with_capacity(tests.len());
            // Input k is consulted at level i+k+1; build deep enough.
            let levels = max_level + tests.len() + max_time + 2;
            for form in &tests {
                match build_test(form, levels, b)? {
                    Ok(t) => built.push(t),
                    Err(out) => return Ok(out),
                }
            }
            let names: Vec<Value> = built
                .iter()
                .map(|t| Value::String(t.name().to_string()))
                .collect();
            let m = parse::measure(&measure)?;
            let combined = combine_diagonal(built);
            let report = match check_stage_bounds(&combined, &m, max_level, max_time) {
                Ok(r) => r,
                Err(e) => return event_stop(e),
            };
            let status = if report.passed() {
                Status::Ok
            } else {
                Status::Violation
            };
            Ok(Outcome::new(status)
                .field("test", combined.name())
                .field("inputs", Value::Array(names))
                .field("max_level", max_level as u64)
                .field("max_time", max_time as u64)
                .field("violations", violation_rows(&report.violations)))
        }
        TestCmd::Deficiency {
            test,
            input,
            time,
            budget: b,
        } => {
            let b = budget(b, cap);
            let t = match build_test(&test, time + 2, b)? {
                Ok(t) => t,
                Err(out) => return Ok(out),
            };
            let x = parse::word(&input)?;
            let bound = deficiency_lower_bound(&t, &x, time);
            Ok(Outcome::ok()
                .field("test", t.name())
                .field("input", x.to_string())
                .field("time", time as u64)
                .field("lower_bound", bound as u64))
        }
    }
}

fn run_map(cmd: MapCmd, cap: u64) -> Result<Outcome, UsageError> {
    match cmd {
        MapCmd::Eval {
            map,
            input,
            level,
            budget: b,
        } => {
            let b = budget(b, cap);
            let f = match build_map(&map, level, b)? {
                Ok(f) => f,
                Err(out) => return Ok(out),
            };
            let x = parse::word(&input)?;
            let (word, determined) = resolved_word(&f, &x, level);
            Ok(Outcome::ok()
                .field("map", f.name())
                .field("input", x.to_string())
                .field("level", level as u64)
                .field("word", word)
                .field("determined", determined as u64))
        }
        MapCmd::Defect {
            map,
            max_level,
            max_time,
            budget: b,
        } => {
            let b = budget(b, cap);
            let f = match build_map(&map, max_level + max_time + 2, b)? {
                Ok(f) => f,
                Err(out) => return Ok(out),
            };
            let Some(defect) = f.defect_test() else {
                return Ok(Outcome::new(Status::Violation)
                    .field("map", f.name())
                    .field("reason", "the map does not certify its movement"));
            };
            let report = match check_stage_bounds(&defect, f.base_measure(), max_level, max_time)
            {
                Ok(r) => r,
                Err(e) => return event_stop(e),
            };
            let status = if report.passed() {
                Status::Ok
            } else {
                Status::Violation
            };
            Ok(Outcome::new(status)
                .field("map", f.name())
                .field("test", defect.name())
                .field("max_level", max_level as u64)
                .field("max_time", max_time as u64)
                .field("violations", violation_rows(&report.violations)))
        }
        MapCmd::Convert {
            map,
            nbits,
            max_level,
            budget: b,
        } => {
            let b = budget(b, cap);
            let f = match build_map(&map, max_level + 1, b)? {
                Ok(f) => f,
                Err(out) => return Ok(out),
            };
            let nbits = nbits.unwrap_or_else(|| f.bit_count()).min(f.bit_count());
            let machine = to_machine(Arc::new(f.clone()));
            let back = match machine_to_cauchy(&machine, nbits, max_level, b) {
                Ok(m) => m,
                Err(e) => return event_stop(e),
            };
            let mut rows = Vec::new();
            let mut worst_over = false;
            for k in 0..nbits {
                for level in 1..=max_level {
                    let d = match stage_distance(&f, &back, k, level) {
                        Ok(d) => d,
                        Err(e) => return event_stop(e),
                    };
                    let allowed = Rational::from_int(4) * Rational::pow2(-(level as i32));
                    if d > allowed {
                        worst_over = true;
                    }
                    rows.push(serde_json::json!({
                        "bit": k,
                        "level": level,
                        "distance": d.to_string(),
                        "allowed": allowed.to_string(),
                    }));
                }
            }
            let status = if worst_over {
                Status::Violation
            } else {
                Status::Ok
            };
            Ok(Outcome::new(status)
                .field("map", f.name())
                .field("converted", back.name())
                .field("nbits", nbits as u64)
                .field("max_level", max_level as u64)
                .field("distances", Value::Array(rows)))
        }
    }
}

/// Smallest level whose certified image-mass error is at most `eps`,
/// mirroring the refinement loop behind the oracle itself.
fn level_for_eps(len: usize, eps: &Rational) -> Result<usize, UsageError> {
    let per_level = |i: usize| {
        Rational::from_int(len as i64)
            * Rational::from_int(4)
            * Rational::pow2(-(i as i32))
    };
    for i in 0..=96 {
        if per_level(i) <= *eps {
            return Ok(i);
        }
    }
    Err(UsageError(format!(
        "precision {eps} demands more than 96 refinement levels"
    )))
}

fn run_image(cmd: ImageCmd, cap: u64) -> Result<Outcome, UsageError> {
    match cmd {
        ImageCmd::Mass {
            map,
            prefix,
            eps,
            budget: b,
        } => {
            let b = budget(b, cap);
            let u = parse::word(&prefix)?;
            let eps = parse::rational(&eps)?;
            if eps.is_negative() || eps.is_zero() {
                return Err(UsageError("`--eps` must be positive".into()));
            }
            let levels = level_for_eps(u.len().max(1), &eps)?;
            let f = match build_map(&map, levels, b)? {
                Ok(f) => f,
                Err(out) => return Ok(out),
            };
            if u.len() > f.bit_count() {
                return Err(UsageError(format!(
                    "prefix `{u}` is longer than the map's {} declared bits",
                    f.bit_count()
                )));
            }
            let result = match image_mass(&f, &u, &eps) {
                Ok(r) => r,
                Err(e) => return event_stop(e),
            };
            Ok(Outcome::ok()
                .field("map", f.name())
                .field("prefix", u.to_string())
                .field("eps", rat(&eps))
                .field("value", rat(&result.value))
                .field("error_bound", rat(&result.error_bound))
                .field("stage_used", result.stage_used as u64))
        }
        ImageCmd::Pullback {
            map,
            target,
            max_level,
            max_time,
            max_shift,
            budget: b,
        } => {
            let b = budget(b, cap);
            let levels = max_level + max_shift + max_time + 4;
            let f = match build_map(&map, levels, b)? {
                Ok(f) => f,
                Err(out) => return Ok(out),
            };
            let v = match build_test(&target, levels, b)? {
                Ok(t) => t,
                Err(out) => return Ok(out),
            };
            let Some(defect) = f.defect_test() else {
                return Err(UsageError(format!(
                    "map `{}` does not certify its movement, so nothing can be pulled back through it",
                    f.name()
                )));
            };
            match pullback_test(&f, &defect, &v, max_level, max_time, max_shift, b) {
                Ok(p) => Ok(Outcome::ok()
                    .field("map", f.name())
                    .field("target", v.name())
                    .field("test", p.test.name())
                    .field("shift", p.shift as u64)
                    .field("max_level", max_level as u64)
                    .field("max_time", max_time as u64)),
                Err(PushforwardError::RenumberingExhausted { max_shift }) => {
                    Ok(Outcome::new(Status::Violation)
                        .field("map", f.name())
                        .field("target", v.name())
                        .field("reason", "no renumbering within the shift limit satisfies the stage bounds")
                        .field("max_shift", max_shift as u64))
                }
                Err(PushforwardError::IncompatibleBounds { test }) => Err(UsageError(format!(
                    "test `{test}` does not declare power-of-two stage bounds"
                ))),
                Err(PushforwardError::Event(e)) => event_stop(e),
            }
        }
        ImageCmd::Complement {
            map,
            removed,
            stage,
            output_depth,
            input_depth,
            budget: b,
        } => {
            let b = budget(b, cap);
            let f = match build_map(&map, stage + 1, b)? {
                Ok(f) => f,
                Err(out) => return Ok(out),
            };
            let removed = parse::clopen(&removed)?;
            let output_depth = output_depth.unwrap_or_else(|| f.bit_count());
            if output_depth > f.bit_count() {
                return Err(UsageError(format!(
                    "`--output-depth {output_depth}` exceeds the map's {} declared bits",
                    f.bit_count()
                )));
            }
            let certified =
                closed_image_complement(&f, &removed, stage, output_depth, input_depth);
            Ok(Outcome::ok()
                .field("map", f.name())
                .field("stage", certified.stage as u64)
                .field("output_depth", certified.output_depth as u64)
                .field("input_depth", certified.depth_searched as u64)
                .field("cylinders", words(&certified.cylinders)))
        }
    }
}

fn run_coupling(cmd: CouplingCmd) -> Result<Outcome, UsageError> {
    match cmd {
        CouplingCmd::Check { relation, depth } => {
            let r = parse::relation(&relation)?;
            let report = check_conditions(&r, depth);
            let totality: Vec<Value> = report
                .totality_violations
                .iter()
                .map(|(n, u)| serde_json::json!({"depth": n, "u": u.to_string()}))
                .collect();
            let coherence: Vec<Value> = report
                .coherence_violations
                .iter()
                .map(|(n, u, v)| {
                    serde_json::json!({"depth": n, "u": u.to_string(), "v": v.to_string()})
                })
                .collect();
            let status = if totality.is_empty() && coherence.is_empty() {
                Status::Ok
            } else {
                Status::Violation
            };
            Ok(Outcome::new(status)
                .field("relation", r.name())
                .field("max_depth", depth as u64)
                .field("totality_violations", Value::Array(totality))
                .field("coherence_violations", Value::Array(coherence)))
        }
        CouplingCmd::Solve {
            p,
            q,
            relation,
            depth,
        } => {
            let pm = parse::measure(&p)?;
            let qm = parse::measure(&q)?;
            let r = parse::relation(&relation)?;
            match solve_coupling(&pm, &qm, &r, depth) {
                Ok(CouplingOutcome::Feasible(matrix)) => {
                    let audit = match matrix.audit(&pm, Some(&qm), &r) {
                        Ok(a) => a,
                        Err(e) => return coupling_stop(e),
                    };
                    Ok(Outcome::ok()
                        .field("relation", r.name())
                        .field("depth", depth as u64)
                        .field("matrix", matrix_rows(&matrix))
                        .field("audit_violations", audit_rows(&audit)))
                }
                Ok(CouplingOutcome::Infeasible(cut)) => {
                    let verified = match cut.verify(&pm, &qm, &r) {
                        Ok(v) => v,
                        Err(e) => return coupling_stop(e),
                    };
                    let doc = serde_json::json!({
                        "depth": cut.depth,
                        "input_side": cut.input_side.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
                        "p_mass": cut.p_mass.to_string(),
                        "q_mass": cut.q_mass.to_string(),
                        "verified": verified,
                    });
                    Ok(Outcome::new(Status::Infeasible)
                        .field("cut", doc)
                        .field("relation", r.name())
                        .field("depth", depth as u64))
                }
                Err(e) => coupling_stop(e),
            }
        }
        CouplingCmd::Witness { p, relation, depth } => {
            let pm = parse::measure(&p)?;
            let r = parse::relation(&relation)?;
            let matrix = match class_witness(&pm, &r, depth) {
                Ok(m) => m,
                Err(e) => return coupling_stop(e),
            };
            let audit = match matrix.audit(&pm, None, &r) {
                Ok(a) => a,
                Err(e) => return coupling_stop(e),
            };
            Ok(Outcome::ok()
                .field("relation", r.name())
                .field("depth", depth as u64)
                .field("matrix", matrix_rows(&matrix))
                .field("audit_violations", audit_rows(&audit)))
        }
    }
}

fn run_tree(cmd: TreeCmd) -> Result<Outcome, UsageError> {
    match cmd {
        TreeCmd::Pn { n } => Ok(Outcome::ok().field("value", rat(&survival(n)))),
        TreeCmd::Dist {
            depth,
            process,
            conditioned,
        } => {
            if depth == 0 || depth > 3 {
                return Err(UsageError(
                    "`--depth` must be 1, 2, or 3 (shape counts grow doubly exponentially)".into(),
                ));
            }
            let dist = match process {
                TreeProcess::Direct => {
                    if conditioned {
                        return Err(UsageError(
                            "the direct process is already root-conditioned; drop `--conditioned`"
                                .into(),
                        ));
                    }
                    tree_dist_direct(depth)
                }
                TreeProcess::Percolation => tree_dist_percolation(depth, conditioned),
            };
            let rows: Vec<Value> = dist
                .shapes
                .iter()
                .map(|(shape, mass)| {
                    serde_json::json!({"code": shape.to_string(), "mass": mass.to_string()})
                })
                .collect();
            Ok(Outcome::ok()
                .field("depth", depth as u64)
                .field("shapes", Value::Array(rows))
                .field("empty", rat(&dist.empty))
                .field("total", rat(&dist.total())))
        }
        TreeCmd::Bracket {
            depth,
            horizon,
            conditioned,
        } => {
            if depth == 0 || depth > 3 {
                return Err(UsageError(
                    "`--depth` must be 1, 2, or 3 (shape counts grow doubly exponentially)".into(),
                ));
            }
            if horizon < depth {
                return Err(UsageError(format!(
                    "`--horizon {horizon}` must be at least the depth {depth}"
                )));
            }
            let bracket = tree_dist_percolation_bracket(depth, horizon);
            let row = |shape: &cantorlab_core::showcase::trees::TreeShape,
                       lo: &Rational,
                       hi: &Rational| {
                serde_json::json!({
                    "code": shape.to_string(),
                    "low": lo.to_string(),
                    "high": hi.to_string(),
                    "width": (hi.clone() - lo.clone()).to_string(),
                })
            };
            if conditioned {
                let rows: Vec<Value> = bracket
                    .conditioned()
                    .iter()
                    .map(|(shape, (lo, hi))| row(shape, lo, hi))
                    .collect();
                Ok(Outcome::ok()
                    .field("depth", depth as u64)
                    .field("horizon", horizon as u64)
                    .field("shapes", Value::Array(rows)))
            } else {
                let rows: Vec<Value> = bracket
                    .shapes
                    .iter()
                    .map(|(shape, (lo, hi))| row(shape, lo, hi))
                    .collect();
                let (elo, ehi) = &bracket.empty;
                Ok(Outcome::ok()
                    .field("depth", depth as u64)
                    .field("horizon", horizon as u64)
                    .field("shapes", Value::Array(rows))
                    .field("empty_low", rat(elo))
                    .field("empty_high", rat(ehi)))
            }
        }
    }
}

fn run_examples(cmd: ExamplesCmd) -> Result<Outcome, UsageError> {
    match cmd {
        ExamplesCmd::Threshold {
            theta,
            nbits,
            input,
            level,
        } => {
            let theta = parse::rational(&theta)?;
            if theta.is_negative() || theta > Rational::one() {
                return Err(UsageError(format!("threshold `{theta}` must lie in [0,1]")));
            }
            let f = threshold_map(&theta, nbits);
            let mut out = Outcome::ok()
                .field("map", f.name())
                .field("theta", rat(&theta))
                .field("nbits", nbits as u64);
            if let Some(input) = input {
                let x = parse::word(&input)?;
                let (word, determined) = resolved_word(&f, &x, level);
                out = out
                    .field("input", x.to_string())
                    .field("level", level as u64)
                    .field("word", word)
                    .field("determined", determined as u64);
            }
            Ok(out)
        }
        ExamplesCmd::Split { input } => {
            let f = evenodd_split();
            let mut out = Outcome::ok().field("map", f.name());
            if let Some(input) = input {
                let x = parse::word(&input)?;
                out = out
                    .field("input", x.to_string())
                    .field("word", f.emit(&x).to_string());
            }
            Ok(out)
        }
    }
}
