//! End-to-end checks of the binary: documented invocations produce
//! byte-stable documents, serialized values re-parse to the in-process
//! results, and exit codes follow the ok/negative/usage contract.

use std::process::{Command, Output};

use cantorlab_core::bits::BitString;
use cantorlab_core::clopen::ClopenSet;
use cantorlab_core::coupling::{solve_coupling, CouplingOutcome};
use cantorlab_core::measure::MeasureSpec;
use cantorlab_core::pushforward::image_mass;
use cantorlab_core::rational::Rational;
use cantorlab_core::showcase::relations::domination_relation;
use cantorlab_core::showcase::threshold::threshold_map;
use cantorlab_core::showcase::trees::tree_dist_percolation;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cantorlab"))
        .args(args)
        .env_remove("CANTORLAB_MAX_BUDGET")
        .output()
        .expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is utf-8")
}

fn doc_of(out: &Output) -> serde_json::Value {
    serde_json::from_str(stdout_of(out).trim()).expect("stdout is one JSON document")
}

fn code_of(out: &Output) -> i32 {
    out.status.code().expect("process exits normally")
}

fn r(s: &str) -> Rational {
    s.parse().unwrap()
}

#[test]
fn documented_invocations_are_byte_stable() {
    let out = run(&["measure", "mass", "--measure", "bernoulli:1/3", "--prefix", "11"]);
    assert_eq!(stdout_of(&out), "{\"status\":\"ok\",\"value\":\"1/9\"}\n");
    assert_eq!(code_of(&out), 0);

    let out = run(&["tree", "pn", "--n", "1"]);
    assert_eq!(stdout_of(&out), "{\"status\":\"ok\",\"value\":\"8/9\"}\n");
    assert_eq!(code_of(&out), 0);

    let out = run(&[
        "coupling", "solve", "--p", "bernoulli:1/2", "--q", "bernoulli:2/3", "--relation",
        "domination", "--depth", "1",
    ]);
    assert_eq!(code_of(&out), 1);
    let doc = doc_of(&out);
    assert_eq!(doc["status"], "infeasible");
    assert_eq!(doc["cut"]["input_side"], serde_json::json!(["0"]));
    assert_eq!(doc["cut"]["p_mass"], "1/2");
    assert_eq!(doc["cut"]["q_mass"], "1/3");
    assert_eq!(doc["cut"]["verified"], true);
}

#[test]
fn serialized_values_reparse_to_in_process_results() {
    // Cylinder mass.
    let doc = doc_of(&run(&[
        "measure", "mass", "--measure", "bernoulli:1/3", "--prefix", "101",
    ]));
    let mass = MeasureSpec::bernoulli(r("1/3"))
        .unwrap()
        .mass(&"101".parse::<BitString>().unwrap())
        .unwrap();
    assert_eq!(r(doc["value"].as_str().unwrap()), mass);

    // Clopen algebra: cells re-parse to the canonical antichain.
    let doc = doc_of(&run(&[
        "clopen", "op", "--kind", "union", "--left", "01,10", "--right", "11",
    ]));
    let got: Vec<BitString> = doc["cells"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c.as_str().unwrap().parse().unwrap())
        .collect();
    let want = ClopenSet::canonicalize(["01", "10"].iter().map(|s| s.parse().unwrap()))
        .union(&ClopenSet::cylinder(&"11".parse().unwrap()));
    assert_eq!(got, want.antichain());

    // Tree shape law.
    let doc = doc_of(&run(&[
        "tree", "dist", "--depth", "1", "--process", "percolation", "--conditioned",
    ]));
    let dist = tree_dist_percolation(1, true);
    let rows = doc["shapes"].as_array().unwrap();
    assert_eq!(rows.len(), dist.shapes.len());
    for (row, (shape, mass)) in rows.iter().zip(&dist.shapes) {
        assert_eq!(row["code"].as_str().unwrap(), shape.to_string());
        assert_eq!(r(row["mass"].as_str().unwrap()), *mass);
    }
    assert_eq!(r(doc["empty"].as_str().unwrap()), dist.empty);

    // Feasible coupling matrix.
    let doc = doc_of(&run(&[
        "coupling", "solve", "--p", "bernoulli:1/2", "--q", "bernoulli:1/3", "--relation",
        "domination", "--depth", "2",
    ]));
    let half = MeasureSpec::bernoulli(r("1/2")).unwrap();
    let third = MeasureSpec::bernoulli(r("1/3")).unwrap();
    let CouplingOutcome::Feasible(matrix) =
        solve_coupling(&half, &third, &domination_relation(), 2).unwrap()
    else {
        panic!("domination coupling at depth 2 must be feasible");
    };
    let rows = doc["matrix"].as_array().unwrap();
    assert_eq!(rows.len(), matrix.entries.len());
    for (row, ((u, v), mass)) in rows.iter().zip(&matrix.entries) {
        assert_eq!(row["u"].as_str().unwrap(), u.to_string());
        assert_eq!(row["v"].as_str().unwrap(), v.to_string());
        assert_eq!(r(row["mass"].as_str().unwrap()), *mass);
    }

    // Image mass with certificate.
    let doc = doc_of(&run(&[
        "image", "mass", "--map", "threshold:1/3:6", "--prefix", "1", "--eps", "1/1024",
    ]));
    let map = threshold_map(&r("1/3"), 6);
    let want = image_mass(&map, &"1".parse().unwrap(), &Rational::pow2(-10)).unwrap();
    assert_eq!(r(doc["value"].as_str().unwrap()), want.value);
    assert_eq!(r(doc["error_bound"].as_str().unwrap()), want.error_bound);
    assert_eq!(doc["stage_used"].as_u64().unwrap() as usize, want.stage_used);
}

#[test]
fn exit_codes_follow_the_contract() {
    // ok → 0
    assert_eq!(code_of(&run(&["tree", "pn", "--n", "0"])), 0);
    assert_eq!(
        code_of(&run(&[
            "test", "check", "--test", "ones", "--measure", "uniform", "--max-level", "3",
            "--max-time", "4",
        ])),
        0
    );

    // expected negatives → 1
    let out = run(&["coupling", "check", "--relation", "paths", "--depth", "3"]);
    assert_eq!(code_of(&out), 1);
    assert_eq!(doc_of(&out)["status"], "violation");

    let out = run(&[
        "coupling", "solve", "--p", "bernoulli:1/2", "--q", "bernoulli:2/3", "--relation",
        "domination", "--depth", "1",
    ]);
    assert_eq!(code_of(&out), 1);
    assert_eq!(doc_of(&out)["status"], "infeasible");

    let out = run(&[
        "map", "eval", "--map", "split:4", "--input", "1011", "--level", "9", "--budget", "50",
    ]);
    assert_eq!(code_of(&out), 1);
    assert_eq!(doc_of(&out)["status"], "budget-exhausted");

    // usage errors → 2
    assert_eq!(
        code_of(&run(&["measure", "mass", "--measure", "bogus", "--prefix", "1"])),
        2
    );
    assert_eq!(
        code_of(&run(&["measure", "mass", "--measure", "bernoulli:1/3"])),
        2
    );
    assert_eq!(code_of(&run(&["no-such-command"])), 2);
    assert_eq!(
        code_of(&run(&["clopen", "op", "--kind", "union", "--left", "0"])),
        2
    );
    assert_eq!(
        code_of(&run(&[
            "tree", "dist", "--depth", "1", "--process", "direct", "--conditioned",
        ])),
        2
    );

    let out = Command::new(env!("CARGO_BIN_EXE_cantorlab"))
        .args(["tree", "pn", "--n", "1"])
        .env("CANTORLAB_MAX_BUDGET", "not-a-number")
        .output()
        .expect("binary runs");
    assert_eq!(code_of(&out), 2);
}

#[test]
fn file_backed_measures_and_relations_load() {
    let dir = std::env::temp_dir();
    let measure_path = dir.join(format!("cantorlab-cli-m-{}.txt", std::process::id()));
    let relation_path = dir.join(format!("cantorlab-cli-r-{}.txt", std::process::id()));
    std::fs::write(&measure_path, "depth 2\n00 1/2\n01 1/6\n10 1/6\n11 1/6\n").unwrap();
    std::fs::write(&relation_path, "# depth u v\n1 0 1\n1 1 1\n").unwrap();

    let spec = format!("explicit@{}", measure_path.display());
    let doc = doc_of(&run(&["measure", "mass", "--measure", &spec, "--prefix", "0"]));
    assert_eq!(doc["value"], "2/3");

    let spec = format!("file@{}", relation_path.display());
    let out = run(&[
        "coupling", "solve", "--p", "bernoulli:1/2", "--q", "bernoulli:1", "--relation", &spec,
        "--depth", "1",
    ]);
    assert_eq!(code_of(&out), 0);
    let doc = doc_of(&out);
    assert_eq!(doc["status"], "ok");
    assert_eq!(doc["audit_violations"], serde_json::json!([]));

    std::fs::remove_file(&measure_path).ok();
    std::fs::remove_file(&relation_path).ok();
}

#[test]
fn pretty_renders_tables_without_ansi() {
    let out = run(&[
        "tree", "dist", "--depth", "1", "--process", "percolation", "--pretty",
    ]);
    let text = stdout_of(&out);
    assert!(text.starts_with("status: ok\n"), "got: {text}");
    assert!(text.contains("code mass"), "got: {text}");
    assert!(!text.contains('\u{1b}'), "ANSI escape in: {text}");
    assert_eq!(code_of(&out), 0);
}

#[test]
fn output_is_deterministic_across_runs() {
    let args = [
        "coupling", "solve", "--p", "bernoulli:1/2", "--q", "bernoulli:1/3", "--relation",
        "domination", "--depth", "3",
    ];
    let first = stdout_of(&run(&args));
    let second = stdout_of(&run(&args));
    assert_eq!(first, second);
}
