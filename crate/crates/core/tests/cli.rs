//! End-to-end tests of the `retrans` binary: every documented command
//! example, the exit-code contract, manifest sidecars, and the external
//! scorer protocol round trip.

mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

use common::worked_example_ptl;
use retrans_core::io::{parse_ptl_jsonl, render_ptl_jsonl};
use retrans_core::ptl::PtlRecord;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_retrans"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn write(path: &Path, content: &str) {
    fs::write(path, content).unwrap();
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn path_str(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

/// Lexical model that copies each source token: decodes are the source
/// prefix itself, which makes expected outputs easy to state exactly.
fn identity_model_json(tokens: &[&str]) -> String {
    let tables: Value = tokens
        .iter()
        .map(|t| (t.to_string(), json!({ *t: 1.0 })))
        .collect::<serde_json::Map<String, Value>>()
        .into();
    json!({ "tables": tables, "eos_when_covered": true }).to_string()
}

fn seeded_model_json(seed: u64) -> String {
    json!({ "seed": seed, "vocab": ["t1", "t2", "t3", "t4", "t5"] }).to_string()
}

#[test]
fn evaluate_reports_worked_example_metrics() {
    let dir = TempDir::new().unwrap();
    let ptl_path = path_str(&dir, "worked.jsonl");
    let ref_path = path_str(&dir, "refs.txt");
    let report_path = path_str(&dir, "report.json");
    let record = PtlRecord {
        id: "tbl".into(),
        ptl: worked_example_ptl(),
    };
    write(ptl_path.as_ref(), &render_ptl_jsonl(&[record]));
    write(ref_path.as_ref(), "New drugs may slow lung and ovarian cancer\n");

    let out = run_ok(&["evaluate", &ptl_path, &ref_path, "--report", &report_path]);
    let report = stdout_json(&out);
    assert_eq!(report["ne"].as_f64().unwrap(), 1.625);
    assert!((report["dal"].as_f64().unwrap() - 3.78125).abs() < 1e-9);
    assert_eq!(report["bleu"].as_f64().unwrap(), 100.0);
    assert_eq!(report["sentences"][0]["final_len"].as_u64().unwrap(), 8);

    // The written report matches stdout and carries a manifest.
    assert_eq!(fs::read(&report_path).unwrap(), out.stdout);
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(format!("{report_path}.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "evaluate");
    assert!(manifest["inputs"][&ptl_path].as_str().unwrap().len() == 64);
}

#[test]
fn evaluate_identity_corpus_is_perfect() {
    let dir = TempDir::new().unwrap();
    let ptl_path = path_str(&dir, "identity.jsonl");
    let ref_path = path_str(&dir, "refs.txt");
    write(
        ptl_path.as_ref(),
        concat!(
            "{\"id\":\"a\",\"source\":[\"x\"],\"outputs\":[[\"hello\",\"there\",\"wide\",\"world\"]]}\n",
            "{\"id\":\"b\",\"source\":[\"y\"],\"outputs\":[[\"more\",\"text\",\"again\",\"here\"]]}\n",
        ),
    );
    write(ref_path.as_ref(), "hello there wide world\nmore text again here\n");
    let out = run_ok(&["evaluate", &ptl_path, &ref_path]);
    let report = stdout_json(&out);
    assert_eq!(report["bleu"].as_f64().unwrap(), 100.0);
    assert_eq!(report["ne"].as_f64().unwrap(), 0.0);
}

#[test]
fn evaluate_cites_bad_line_number() {
    let dir = TempDir::new().unwrap();
    let ptl_path = path_str(&dir, "broken.jsonl");
    let ref_path = path_str(&dir, "refs.txt");
    write(
        ptl_path.as_ref(),
        "{\"id\":\"a\",\"source\":[\"x\"],\"outputs\":[[\"u\"]]}\n\nnot json\n",
    );
    write(ref_path.as_ref(), "u\n");
    let out = run(&["evaluate", &ptl_path, &ref_path]);
    assert_eq!(code(&out), 1);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("broken.jsonl:3:"),
        "expected a path:3: citation, stderr was: {stderr}"
    );
}

#[test]
fn simulate_stream_emits_append_only_ptls() {
    let dir = TempDir::new().unwrap();
    let model_path = path_str(&dir, "model.json");
    let src_path = path_str(&dir, "src.txt");
    let out_path = path_str(&dir, "out.jsonl");
    write(model_path.as_ref(), &seeded_model_json(41));
    write(src_path.as_ref(), "s1 s2 s3 s4 s5\ns2 s4\ns3 s3 s3 s1 s1 s2\n");

    run_ok(&[
        "simulate", &src_path, "--model", &model_path, "--policy", "stream", "--k", "2",
        "--out", &out_path,
    ]);
    let records = parse_ptl_jsonl("out", &fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(records.len(), 3);
    for record in &records {
        assert!(record.ptl.is_append_only(), "{} revised output", record.id);
    }
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(format!("{out_path}.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["args"]["policy"], "stream_waitk");
    assert_eq!(manifest["seed"], 41);
}

#[test]
fn simulate_full_bias_evaluates_to_zero_erasure() {
    let dir = TempDir::new().unwrap();
    let model_path = path_str(&dir, "model.json");
    let src_path = path_str(&dir, "src.txt");
    let ref_path = path_str(&dir, "refs.txt");
    let out_path = path_str(&dir, "out.jsonl");
    write(model_path.as_ref(), &seeded_model_json(77));
    write(src_path.as_ref(), "s1 s2 s3 s4\ns5 s6 s1\n");
    write(ref_path.as_ref(), "t1 t2 t3\nt4 t5\n");

    run_ok(&[
        "simulate", &src_path, "--model", &model_path, "--policy", "retranslate",
        "--beta", "1", "--k", "1", "--beam", "2", "--out", &out_path,
    ]);
    let out = run_ok(&["evaluate", &out_path, &ref_path]);
    let report = stdout_json(&out);
    assert_eq!(report["ne"].as_f64().unwrap(), 0.0);
}

#[test]
fn simulate_identity_model_shows_source_prefixes() {
    let dir = TempDir::new().unwrap();
    let model_path = path_str(&dir, "model.json");
    let src_path = path_str(&dir, "src.txt");
    let out_path = path_str(&dir, "out.jsonl");
    write(
        model_path.as_ref(),
        &identity_model_json(&["alpha", "beta", "gamma"]),
    );
    write(src_path.as_ref(), "alpha beta gamma\n");

    run_ok(&[
        "simulate", &src_path, "--model", &model_path, "--policy", "retranslate",
        "--beta", "0", "--k", "0", "--out", &out_path,
    ]);
    let records = parse_ptl_jsonl("out", &fs::read_to_string(&out_path).unwrap()).unwrap();
    let outputs = records[0].ptl.outputs();
    assert_eq!(outputs.len(), 3);
    assert_eq!(outputs[0].tokens(), ["alpha"]);
    assert_eq!(outputs[1].tokens(), ["alpha", "beta"]);
    assert_eq!(outputs[2].tokens(), ["alpha", "beta", "gamma"]);
}

#[test]
fn augment_duplicate_doubles_and_reruns_identically() {
    let dir = TempDir::new().unwrap();
    let src_path = path_str(&dir, "src.txt");
    let tgt_path = path_str(&dir, "tgt.txt");
    let out_src = path_str(&dir, "aug.src");
    let out_tgt = path_str(&dir, "aug.tgt");
    let src_lines: String = (0..100).map(|i| format!("s{i} s{i} s{i} s{i}\n")).collect();
    let tgt_lines: String = (0..100).map(|i| format!("t{i} t{i} t{i}\n")).collect();
    write(src_path.as_ref(), &src_lines);
    write(tgt_path.as_ref(), &tgt_lines);

    let args = [
        "augment", &src_path, &tgt_path, "--mix", "duplicate", "--seed", "9",
        "--out-src", &out_src, "--out-tgt", &out_tgt,
    ];
    run_ok(&args);
    let first_src = fs::read(&out_src).unwrap();
    let first_tgt = fs::read(&out_tgt).unwrap();
    assert_eq!(first_src.iter().filter(|&&b| b == b'\n').count(), 200);
    assert_eq!(first_tgt.iter().filter(|&&b| b == b'\n').count(), 200);

    run_ok(&args);
    assert_eq!(fs::read(&out_src).unwrap(), first_src);
    assert_eq!(fs::read(&out_tgt).unwrap(), first_tgt);
}

#[test]
fn augment_force_ls_emits_known_prefix_pair() {
    let dir = TempDir::new().unwrap();
    let src_path = path_str(&dir, "src.txt");
    let tgt_path = path_str(&dir, "tgt.txt");
    let out_src = path_str(&dir, "aug.src");
    let out_tgt = path_str(&dir, "aug.tgt");
    write(
        src_path.as_ref(),
        "s1 s2 s3 s4 s5 s6 s7 s8 s9 s10 s11 s12 s13 s14 s15\n",
    );
    write(tgt_path.as_ref(), "t1 t2 t3 t4 t5 t6 t7 t8 t9 t10 t11 t12\n");

    run_ok(&[
        "augment", &src_path, &tgt_path, "--force-ls", "5",
        "--out-src", &out_src, "--out-tgt", &out_tgt,
    ]);
    assert_eq!(fs::read_to_string(&out_src).unwrap(), "s1 s2 s3 s4 s5\n");
    assert_eq!(fs::read_to_string(&out_tgt).unwrap(), "t1 t2 t3 t4\n");
}

#[test]
fn augment_aligned_mode_uses_alignment_closure() {
    let dir = TempDir::new().unwrap();
    let src_path = path_str(&dir, "src.txt");
    let tgt_path = path_str(&dir, "tgt.txt");
    let align_path = path_str(&dir, "align.txt");
    let out_src = path_str(&dir, "aug.src");
    let out_tgt = path_str(&dir, "aug.tgt");
    write(src_path.as_ref(), "s1 s2 s3 s4\n");
    write(tgt_path.as_ref(), "t1 t2 t3 t4\n");
    // Crossing links inside the first two positions: cutting at 2 needs
    // both target tokens.
    write(align_path.as_ref(), "0-1 1-0 2-2 3-3\n");

    run_ok(&[
        "augment", &src_path, &tgt_path, "--mode", "aligned", "--align", &align_path,
        "--force-ls", "2", "--out-src", &out_src, "--out-tgt", &out_tgt,
    ]);
    assert_eq!(fs::read_to_string(&out_src).unwrap(), "s1 s2\n");
    assert_eq!(fs::read_to_string(&out_tgt).unwrap(), "t1 t2\n");

    // Without the alignment file the mode is unusable.
    let out = run(&[
        "augment", &src_path, &tgt_path, "--mode", "aligned",
        "--out-src", &out_src, "--out-tgt", &out_tgt,
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn sweep_and_frontier_pipeline() {
    let dir = TempDir::new().unwrap();
    let model_path = path_str(&dir, "model.json");
    let dev_src = path_str(&dir, "dev.src");
    let dev_ref = path_str(&dir, "dev.ref");
    let test_src = path_str(&dir, "test.src");
    let test_ref = path_str(&dir, "test.ref");
    let csv_path = path_str(&dir, "sweep.csv");
    let frontier_path = path_str(&dir, "frontier.json");
    write(model_path.as_ref(), &seeded_model_json(11));
    let sources = "s1 s2 s3 s4 s5\ns2 s1\ns4 s4 s3 s2\n";
    let refs = "t1 t3 t2 t4\nt5 t1\nt2 t2 t3\n";
    for (path, content) in [
        (&dev_src, sources),
        (&dev_ref, refs),
        (&test_src, sources),
        (&test_ref, refs),
    ] {
        write(path.as_ref(), content);
    }

    // Default grid: 54 configurations, each measured on both splits.
    run_ok(&[
        "sweep", "--model", &model_path, "--dev-src", &dev_src, "--dev-ref", &dev_ref,
        "--test-src", &test_src, "--test-ref", &test_ref, "--out", &csv_path,
    ]);
    let csv = fs::read_to_string(&csv_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "beta,k,beam,split,bleu,dal,ne");
    assert_eq!(lines.count(), 108);

    let out = run_ok(&[
        "frontier", "--sweep", &csv_path, "--ne-threshold", "inf", "--out", &frontier_path,
    ]);
    // Identical splits: every comparable config has equal NE, so the
    // stability statistic is exactly zero.
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.trim(), "ne_stability 0.000000");
    let frontier: Value =
        serde_json::from_str(&fs::read_to_string(&frontier_path).unwrap()).unwrap();
    assert_eq!(frontier["ne_stability"].as_f64().unwrap(), 0.0);
    let points = frontier["points"].as_array().unwrap();
    assert!(!points.is_empty());
    // Frontier points trade latency for quality monotonically.
    for pair in points.windows(2) {
        assert!(pair[0]["dev"]["dal"].as_f64() < pair[1]["dev"]["dal"].as_f64());
        assert!(pair[0]["dev"]["bleu"].as_f64() < pair[1]["dev"]["bleu"].as_f64());
    }

    // A custom grid restricted to one beta value.
    run_ok(&[
        "sweep", "--model", &model_path, "--dev-src", &dev_src, "--dev-ref", &dev_ref,
        "--test-src", &test_src, "--test-ref", &test_ref, "--out", &csv_path,
        "--grid", "betas=0;ks=1,4,8",
    ]);
    let csv = fs::read_to_string(&csv_path).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);

    let out = run(&[
        "frontier", "--sweep", &csv_path, "--ne-threshold", "nan", "--out", &frontier_path,
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn scorer_protocol_round_trips_a_decode() {
    let dir = TempDir::new().unwrap();
    let model_path = path_str(&dir, "lexical.json");
    let external_path = path_str(&dir, "external.json");
    let src_path = path_str(&dir, "src.txt");
    let direct_out = path_str(&dir, "direct.jsonl");
    let served_out = path_str(&dir, "served.jsonl");
    write(
        model_path.as_ref(),
        &identity_model_json(&["alpha", "beta", "gamma", "delta"]),
    );
    write(
        external_path.as_ref(),
        &json!({
            "command": format!("{} scorer-serve --model {}", env!("CARGO_BIN_EXE_retrans"), model_path),
            "top": 8,
        })
        .to_string(),
    );
    write(src_path.as_ref(), "alpha gamma beta\ndelta delta\n");

    for (model, out_path) in [(&model_path, &direct_out), (&external_path, &served_out)] {
        run_ok(&[
            "simulate", &src_path, "--model", model, "--policy", "retranslate",
            "--beta", "0.5", "--k", "1", "--beam", "2", "--out", out_path,
        ]);
    }
    assert_eq!(
        fs::read(&direct_out).unwrap(),
        fs::read(&served_out).unwrap(),
        "served decode diverged from in-process decode"
    );
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = TempDir::new().unwrap();
    let missing = path_str(&dir, "nope.jsonl");
    let ref_path = path_str(&dir, "refs.txt");
    write(ref_path.as_ref(), "u\n");

    // Missing file: IO error.
    assert_eq!(code(&run(&["evaluate", &missing, &ref_path])), 2);

    // Unknown policy: validation error.
    let model_path = path_str(&dir, "model.json");
    let src_path = path_str(&dir, "src.txt");
    write(model_path.as_ref(), &seeded_model_json(1));
    write(src_path.as_ref(), "s1\n");
    let out = run(&[
        "simulate", &src_path, "--model", &model_path, "--policy", "bogus",
        "--out", &path_str(&dir, "o.jsonl"),
    ]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));

    // Bad beta: validation error.
    let out = run(&[
        "simulate", &src_path, "--model", &model_path, "--policy", "retranslate",
        "--beta", "1.5", "--out", &path_str(&dir, "o.jsonl"),
    ]);
    assert_eq!(code(&out), 1);

    // Usage errors exit 1; help exits 0.
    assert_eq!(code(&run(&["evaluate"])), 1);
    assert_eq!(code(&run(&["--definitely-not-a-flag"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["simulate", "--help"])), 0);

    // A scorer command that dies mid-protocol: protocol error.
    let external_path = path_str(&dir, "external.json");
    write(
        external_path.as_ref(),
        &json!({ "command": "false", "timeout_secs": 5 }).to_string(),
    );
    let out = run(&[
        "simulate", &src_path, "--model", &external_path, "--policy", "retranslate",
        "--out", &path_str(&dir, "o.jsonl"),
    ]);
    assert_eq!(code(&out), 2, "stderr: {}", String::from_utf8_lossy(&out.stderr));
}
