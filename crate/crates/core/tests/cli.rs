//! End-to-end runs of the `deception` binary: exit codes, artifacts and
//! reproducibility.

use std::path::Path;
use std::process::{Command, Output};

use posg_deception::game::write_posg;
use posg_deception::harness::SolveOutput;
use posg_deception::samples;
use posg_deception::synthesis::{read_strategy_set, realize_strategy_set, verify_strong};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deception"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = run(args, dir);
    assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    stdout(&out)
}

fn value(text: &str) -> f64 {
    text.trim().parse().unwrap()
}

#[test]
fn generate_then_validate() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["generate", "--layers", "4", "--out", "net"], dir.path());
    for f in ["model.json", "labels.json", "metadata.json", "provenance.json"] {
        assert!(dir.path().join("net").join(f).exists(), "{f}");
    }
    assert_eq!(
        ok(&["validate", "--model", "net/model.json"], dir.path()).trim(),
        "valid"
    );
}

#[test]
fn zero_layers_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["generate", "--layers", "0"], dir.path())), 2);
}

#[test]
fn large_network_reports_its_closed_form_size() {
    let dir = tempfile::tempdir().unwrap();
    let meta: serde_json::Value = serde_json::from_str(&ok(&["generate", "--layers", "12"], dir.path())).unwrap();
    assert_eq!(meta["states"], 5 * 12 + 2);
    assert_eq!(meta["closed_form_states"], "5n+2");
}

#[test]
fn invalid_models_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["generate", "--layers", "2"], dir.path());
    let text = std::fs::read_to_string(dir.path().join("out/model.json")).unwrap();
    std::fs::write(
        dir.path().join("bad.json"),
        text.replace("\"discount\": 0.9", "\"discount\": 1.5"),
    )
    .unwrap();
    std::fs::write(dir.path().join("garbage.json"), "{").unwrap();
    for model in ["bad.json", "garbage.json"] {
        let out = run(&["validate", "--model", model], dir.path());
        assert_eq!(code(&out), 3, "{model}");
        let out = run(&["synth", "--model", model], dir.path());
        assert_eq!(code(&out), 3, "{model}");
    }
}

#[test]
fn unreachable_threshold_exits_with_4() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["generate", "--layers", "2"], dir.path());
    let out = run(
        &[
            "synth",
            "--model",
            "out/model.json",
            "--threshold",
            "1e9",
            "--restarts",
            "4",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn one_strategy_on_the_constant_game() {
    let dir = tempfile::tempdir().unwrap();
    write_posg(&samples::constant_game(7.0), &dir.path().join("c.json")).unwrap();
    ok(&["synth", "--model", "c.json", "-n", "1"], dir.path());
    let entries = read_strategy_set(&dir.path().join("out/strategies.json")).unwrap();
    assert_eq!(entries.len(), 1);
    assert!(entries[0].strong);
}

#[test]
fn synthesis_is_reproducible_and_verifiable() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["generate", "--layers", "4", "--out", "net"], dir.path());
    for out in ["a", "b"] {
        ok(
            &[
                "synth",
                "--model",
                "net/model.json",
                "-n",
                "10",
                "--seed",
                "4",
                "--out",
                out,
            ],
            dir.path(),
        );
    }
    let read = |d: &str| std::fs::read(dir.path().join(d).join("strategies.json")).unwrap();
    assert_eq!(read("a"), read("b"));

    let posg = posg_deception::harness::load_model(&dir.path().join("net/model.json")).unwrap();
    let entries = read_strategy_set(&dir.path().join("a/strategies.json")).unwrap();
    assert_eq!(entries.len(), 10);
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("a/synthesis.json")).unwrap()).unwrap();
    let kappa = summary["threshold"].as_f64().unwrap();
    let family = &realize_strategy_set(&posg, &entries).unwrap()[0];
    let pmdp = posg_deception::pmdp::posg_to_pmdp(&family.unfolding.posg).unwrap();
    for e in &entries {
        let u = posg_deception::pmdp::Instantiation::from_named(&pmdp, &e.parameters).unwrap();
        assert!(verify_strong(&family.unfolding.posg, &u, kappa).unwrap().0);
    }
}

#[test]
fn solve_eval_and_exports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["generate", "--layers", "3", "--out", "net"], d);
    ok(&["synth", "--model", "net/model.json", "-n", "5", "--k", "2"], d);
    let common = ["--model", "net/model.json", "--strategies", "out/strategies.json"];
    let solved = value(&ok(&[&["solve"][..], &common].concat(), d));
    let file: SolveOutput = serde_json::from_slice(&std::fs::read(d.join("out/solve.json")).unwrap()).unwrap();
    assert_eq!(file.value, solved);

    let eval = |policy: &str| {
        value(&ok(
            &[
                &["eval"][..],
                &common,
                &["--labels", "net/labels.json", "--policy", policy],
            ]
            .concat(),
            d,
        ))
    };
    assert!((eval("out/solve.json") - solved).abs() < 1e-9);
    assert_eq!(eval("optimal"), solved);
    assert!(solved <= eval("always_engage") + 1e-9);
    assert!(solved <= eval("always_block") + 1e-9);

    ok(&[&["export-milp"][..], &common].concat(), d);
    ok(&["export-robust-milp", "--model", "net/model.json"], d);
    let milp = std::fs::read_to_string(d.join("out/milp.lp")).unwrap();
    assert!(milp.contains("Binaries") && milp.contains("tmax_"));
    let robust = std::fs::read_to_string(d.join("out/robust_milp.lp")).unwrap();
    assert!(robust.contains("[uncertain]"));
}

#[test]
fn baseline_without_labels_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["generate", "--layers", "2", "--out", "net"], d);
    ok(&["synth", "--model", "net/model.json", "-n", "2"], d);
    let out = run(
        &[
            "eval",
            "--model",
            "net/model.json",
            "--strategies",
            "out/strategies.json",
            "--policy",
            "always_block",
        ],
        d,
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn experiment_rows_and_guards() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = [
        "experiment",
        "--layers",
        "2",
        "--memory",
        "1",
        "--strategies",
        "1",
        "--seeds",
        "0",
    ];
    let printed = ok(&args, d);
    assert!(printed.lines().all(|l| !l.starts_with("FAIL")), "{printed}");
    let rows = std::fs::read_to_string(d.join("out/rows.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 3);
    ok(&[&args[..], &["--format", "json", "--out", "j"]].concat(), d);
    let json: Vec<serde_json::Value> = serde_json::from_slice(&std::fs::read(d.join("j/rows.json")).unwrap()).unwrap();
    assert_eq!(json.len(), 3);
    let provenance: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("j/provenance.json")).unwrap()).unwrap();
    for key in ["tool", "version", "seeds", "tolerances", "config"] {
        assert!(provenance.get(key).is_some(), "{key}");
    }

    let out = run(&["experiment", "--strategies", "5,5"], d);
    assert_eq!(code(&out), 2);
}
