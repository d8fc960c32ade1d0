//! End-to-end tests of the `halledit` binary: exit codes, stream
//! separation (data on stdout, diagnostics on stderr), and per-command
//! behavior with file fixtures.

use std::path::Path;
use std::process::{Command, Output};

fn halledit(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_halledit"))
        .args(args)
        .current_dir(dir)
        .env_remove("HALLEDIT_CONFIG")
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("utf8 stdout")
}

fn write_lines(path: &Path, lines: &[serde_json::Value]) {
    let text: String = lines.iter().map(|v| format!("{v}\n")).collect();
    std::fs::write(path, text).unwrap();
}

fn ei_record(seed_text: &str, modified_xml: &str) -> serde_json::Value {
    serde_json::json!({
        "seed_text": seed_text,
        "refs": [],
        "modified_xml": modified_xml,
    })
}

const CLEAN_XML: &str = "A <object original=\"dog\" id=\"E1\">cat</object> sits \
    <spatial_relation original=\"on\" id=\"E2\">under</spatial_relation> the mat.";

#[test]
fn validate_clean_corpus_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("corpus.jsonl");
    write_lines(&input, &[ei_record("A dog sits on the mat.", CLEAN_XML)]);
    let out = halledit(&["validate", "--input", "corpus.jsonl"], dir.path());
    assert!(out.status.success(), "{out:?}");
    assert_eq!(stdout(&out), "");
}

#[test]
fn validate_nested_tags_exits_one_with_single_line() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("corpus.jsonl");
    write_lines(
        &input,
        &[ei_record(
            "a red dog",
            "a <object original=\"red dog\" id=\"E1\">big \
             <attribute original=\"x\" id=\"E2\">blue</attribute> cat</object>",
        )],
    );
    let out = halledit(&["validate", "--input", "corpus.jsonl"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let report = stdout(&out);
    let lines: Vec<&str> = report.trim().lines().collect();
    assert_eq!(lines.len(), 1);
    let v: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(v["rule_id"], "R4");
    assert_eq!(v["severity"], "error");
}

#[test]
fn validate_strict_promotes_id_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("corpus.jsonl");
    write_lines(
        &input,
        &[ei_record(
            "a red dog",
            "a <attribute original=\"red\" id=\"E1\">blue</attribute> \
             <object original=\"dog\" id=\"E3\">cat</object>",
        )],
    );
    let lax = halledit(&["validate", "--input", "corpus.jsonl"], dir.path());
    assert!(lax.status.success(), "gaps are warnings by default");
    let strict = halledit(
        &["validate", "--input", "corpus.jsonl", "--strict"],
        dir.path(),
    );
    assert_eq!(strict.status.code(), Some(1));
}

#[test]
fn augment_p_zero_keeps_every_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("corpus.jsonl");
    write_lines(&input, &[ei_record("A dog sits on the mat.", CLEAN_XML)]);
    let out = halledit(
        &["augment", "--input", "corpus.jsonl", "--p", "0"],
        dir.path(),
    );
    assert!(out.status.success(), "{out:?}");
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["input_text"], "A cat sits under the mat.");
    assert_eq!(
        v["target_tagged"],
        "A <object>cat</object> sits <relation>under</relation> the mat."
    );
    assert_eq!(v["kept_ids"], serde_json::json!(["E1", "E2"]));
}

#[test]
fn augment_is_deterministic_and_counts_variants() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("corpus.jsonl");
    let records: Vec<serde_json::Value> = (0..10)
        .map(|_| ei_record("A dog sits on the mat.", CLEAN_XML))
        .collect();
    write_lines(&input, &records);
    let args = [
        "augment",
        "--input",
        "corpus.jsonl",
        "--variants-per-graph",
        "3",
        "--seed",
        "42",
    ];
    let first = halledit(&args, dir.path());
    let second = halledit(&args, dir.path());
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout, "same seed, same bytes");
    assert_eq!(stdout(&first).trim().lines().count(), 30);
}

#[test]
fn stats_reports_six_field_schema() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("corpus.jsonl");
    write_lines(&input, &[ei_record("A dog sits on the mat.", CLEAN_XML)]);
    let out = halledit(&["stats", "--input", "corpus.jsonl"], dir.path());
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    for field in [
        "total_graphs",
        "total_nodes",
        "avg_components",
        "avg_nodes",
        "avg_edges",
        "avg_degree",
    ] {
        assert!(v.get(field).is_some(), "missing {field}");
    }
    assert_eq!(v["total_graphs"], 1);
    assert_eq!(v["total_nodes"], 2);
}

#[test]
fn stats_empty_corpus_mentions_it_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("corpus.jsonl"), "").unwrap();
    let out = halledit(&["stats", "--input", "corpus.jsonl"], dir.path());
    assert!(out.status.success());
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    assert!(stderr.contains("empty corpus"), "stderr: {stderr}");
}

fn corpus_record(id: &str, description: &str, annotations: serde_json::Value) -> serde_json::Value {
    serde_json::json!({
        "id": id,
        "image_ref": format!("img://{id}"),
        "description": description,
        "reference": "Two cats are on the sofa.",
        "annotations": annotations,
        "split": "test",
    })
}

#[test]
fn evaluate_identity_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    let record = corpus_record(
        "s1",
        "three cats",
        serde_json::json!([{"start": 0, "end": 5, "type": "number"}]),
    );
    write_lines(&dir.path().join("gold.jsonl"), &[record.clone()]);
    write_lines(&dir.path().join("pred.jsonl"), &[record]);
    let out = halledit(
        &["evaluate", "--pred", "pred.jsonl", "--gold", "gold.jsonl"],
        dir.path(),
    );
    assert!(out.status.success(), "{out:?}");
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["detection"]["f1"], 1.0);
    assert_eq!(v["bert_f1"]["f1"], 1.0);
    assert_eq!(v["clip_f1"]["f1"], 1.0);
    assert!(v["clip_s"].is_number());
    assert!(v["pac_s"].is_number());
    assert!(v["binary"]["accuracy"].is_number());
}

#[test]
fn evaluate_threshold_failure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let gold = corpus_record(
        "s1",
        "three cats",
        serde_json::json!([{"start": 0, "end": 5, "type": "number"}]),
    );
    let pred = corpus_record("s1", "three cats", serde_json::json!([]));
    write_lines(&dir.path().join("gold.jsonl"), &[gold]);
    write_lines(&dir.path().join("pred.jsonl"), &[pred]);
    let out = halledit(
        &[
            "evaluate",
            "--pred",
            "pred.jsonl",
            "--gold",
            "gold.jsonl",
            "--min-detection-f1",
            "0.5",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn pipeline_scripted_golden_and_failure_exit() {
    use halledit::backend::ScriptedBackend;
    use halledit::pipeline::{build_detector_prompt, build_reviewer_prompt, FewShotBank};
    use halledit::{insert_tag, ErrorType, Sample};

    let dir = tempfile::tempdir().unwrap();
    let record = corpus_record(
        "s1",
        "three cats",
        serde_json::json!([]),
    );
    write_lines(&dir.path().join("corpus.jsonl"), &[record]);

    let sample = Sample::new(
        "img://s1",
        "three cats",
        "Two cats are on the sofa.",
        Vec::new(),
    )
    .unwrap();
    let bank = FewShotBank::builtin();
    let mut det = ScriptedBackend::new();
    det.script(&build_detector_prompt(&sample, &bank), "three, number");
    let z = insert_tag("three cats", "three", ErrorType::Number, 1).unwrap();
    let mut rev = ScriptedBackend::new();
    rev.script(
        &build_reviewer_prompt(&z, "Two cats are on the sofa.").unwrap(),
        "<number>three</number>: two",
    );
    std::fs::write(dir.path().join("det.jsonl"), det.to_jsonl()).unwrap();
    std::fs::write(dir.path().join("rev.jsonl"), rev.to_jsonl()).unwrap();

    let args = [
        "pipeline",
        "--input",
        "corpus.jsonl",
        "--det-script",
        "det.jsonl",
        "--rev-script",
        "rev.jsonl",
    ];
    let out = halledit(&args, dir.path());
    assert!(out.status.success(), "{out:?}");
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["output"]["final_tagged"], "<number>two</number> cats");

    // An unscripted prompt is a backend failure: exit 3, error recorded.
    let empty = ScriptedBackend::new();
    std::fs::write(dir.path().join("det.jsonl"), empty.to_jsonl()).unwrap();
    let failed = halledit(&args, dir.path());
    assert_eq!(failed.status.code(), Some(3));
    let v: serde_json::Value = serde_json::from_str(stdout(&failed).trim()).unwrap();
    assert!(v["error"].as_str().unwrap().contains("detector"));
}

#[test]
fn convert_round_trips_through_tagged_lines() {
    let dir = tempfile::tempdir().unwrap();
    let record = corpus_record(
        "s1",
        "three cats",
        serde_json::json!([{"start": 0, "end": 5, "type": "number"}]),
    );
    write_lines(&dir.path().join("corpus.jsonl"), &[record]);
    let tagged = halledit(
        &["convert", "--input", "corpus.jsonl", "--to", "tagged"],
        dir.path(),
    );
    assert!(tagged.status.success());
    let line: serde_json::Value = serde_json::from_str(stdout(&tagged).trim()).unwrap();
    assert_eq!(line["tagged"], "<number>three</number> cats");

    std::fs::write(dir.path().join("tagged.jsonl"), stdout(&tagged)).unwrap();
    let back = halledit(
        &["convert", "--input", "tagged.jsonl", "--to", "corpus"],
        dir.path(),
    );
    assert!(back.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&back).trim()).unwrap();
    assert_eq!(v["description"], "three cats");
    assert_eq!(v["annotations"][0]["type"], "number");
}

#[test]
fn unknown_flag_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = halledit(&["stats", "--input", "x.jsonl", "--bogus"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_file_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = halledit(&["stats", "--input", "nope.jsonl"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn output_flag_writes_file_not_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("corpus.jsonl");
    write_lines(&input, &[ei_record("A dog sits on the mat.", CLEAN_XML)]);
    let out = halledit(
        &["stats", "--input", "corpus.jsonl", "--output", "stats.json"],
        dir.path(),
    );
    assert!(out.status.success());
    assert_eq!(stdout(&out), "");
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("stats.json")).unwrap())
            .unwrap();
    assert_eq!(v["total_graphs"], 1);
}
