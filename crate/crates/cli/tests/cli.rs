//! End-to-end tests driving the compiled binary.
//!
//! Every test builds its fixtures in a fresh temporary directory, invokes
//! the binary through `CARGO_BIN_EXE_rankqa`, and asserts on exit status,
//! the rendered report, and any artifact files the command wrote.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rankqa"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("the binary should spawn")
}

/// Run expecting success; return stdout as UTF-8.
fn stdout_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {:?} exited {:?}\nstderr: {}",
        args,
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("stdout should be UTF-8")
}

/// Run expecting success with `--format json`; parse stdout.
fn json_ok(args: &[&str]) -> Value {
    let text = stdout_ok(args);
    serde_json::from_str(&text)
        .unwrap_or_else(|e| panic!("stdout should be JSON ({e}):\n{text}"))
}

/// Run expecting the given exit code; return stderr as UTF-8.
fn fail_with(args: &[&str], code: i32) -> String {
    let out = run(args);
    assert_eq!(
        out.status.code(),
        Some(code),
        "command {:?} should exit {code}\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stderr).expect("stderr should be UTF-8")
}

fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, contents).expect("fixture write");
    path
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

fn json_file(path: &Path) -> Value {
    serde_json::from_str(&read(path)).expect("artifact should be JSON")
}

fn f64_at<'a>(v: &'a Value, key: &str) -> f64 {
    v[key]
        .as_f64()
        .unwrap_or_else(|| panic!("field {key} should be a number in {v}"))
}

fn approx(a: f64, b: f64) {
    assert!((a - b).abs() <= 1e-9, "{a} should be within 1e-9 of {b}");
}

// ---------------------------------------------------------------------------
// Shared fixtures
// ---------------------------------------------------------------------------

/// Two judged questions: q1 has one relevant passage, q2 is zero-answer.
const QRELS: &str = "q1 0 p2 1\nq2 0 -1 0\n";

/// q1 ranks the relevant passage second; q2 correctly returns the null
/// document. AP(q1) = 0.5, AP(q2) = 1.0, so MAP = MRR = 0.75.
const RUN: &str = "q1\tQ0\tp1\t1\t2.0\tsys\nq1\tQ0\tp2\t2\t1.0\tsys\nq2\tQ0\t-1\t1\t0.0\tsys\n";

/// One answerable sample (gold span "beta") and one zero-answer sample
/// over the same passage. Character offsets are end-exclusive.
const DATASET: &str = r#"[
  {"sample_id": "s1", "question": "what beta", "passage": "alpha beta gamma delta",
   "answers": [{"start_char": 6, "end_char": 10}]},
  {"sample_id": "s2", "question": "nothing here", "passage": "alpha beta gamma delta",
   "answers": []}
]"#;

/// s1 predicts its gold span exactly (pAP 1); s2 predicts a span even
/// though no answer exists (pAP 0). Plain pAP is therefore 0.5. The
/// no-answer channel separates them: s2's raw score normalizes to 1.
const PREDS: &str = r#"[
  {"sample_id": "s1", "no_answer_score": 0.0,
   "spans": [{"start_char": 6, "end_char": 10, "score": 2.0}]},
  {"sample_id": "s2", "no_answer_score": 1.0,
   "spans": [{"start_char": 0, "end_char": 5, "score": 1.0}]}
]"#;

// ---------------------------------------------------------------------------
// Global behaviour
// ---------------------------------------------------------------------------

#[test]
fn no_arguments_is_a_usage_error() {
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr).to_lowercase();
    assert!(err.contains("usage"), "stderr should show usage: {err}");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    fail_with(&["eval-retrieval", "--no-such-flag"], 2);
}

#[test]
fn malformed_run_line_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let qrels = write(dir.path(), "qrels.tsv", QRELS);
    // Five columns instead of six.
    let run_path = write(dir.path(), "bad.run", "q1 Q0 p1 1 2.0\n");
    let err = fail_with(
        &[
            "eval-retrieval",
            "--run",
            run_path.to_str().unwrap(),
            "--qrels",
            qrels.to_str().unwrap(),
        ],
        1,
    );
    assert!(
        err.contains("bad.run:1:"),
        "stderr should name the file and line: {err}"
    );
    assert!(err.contains("expected 6 columns"), "stderr: {err}");
}

// ---------------------------------------------------------------------------
// eval-retrieval
// ---------------------------------------------------------------------------

#[test]
fn eval_retrieval_scores_ranks_and_null_document_credit() {
    let dir = tempfile::tempdir().unwrap();
    let qrels = write(dir.path(), "qrels.tsv", QRELS);
    let run_path = write(dir.path(), "sys.run", RUN);
    let v = json_ok(&[
        "eval-retrieval",
        "--run",
        run_path.to_str().unwrap(),
        "--qrels",
        qrels.to_str().unwrap(),
        "--recall-k",
        "1",
        "--recall-k",
        "10",
        "--format",
        "json",
    ]);
    assert_eq!(v["tag"], "sys");
    assert_eq!(v["n_questions"], 2);
    approx(f64_at(&v, "map"), 0.75);
    approx(f64_at(&v, "mrr"), 0.75);
    // Recall ignores the zero-answer question; q1 finds its passage at
    // rank 2, so R@1 = 0 and R@10 = 1.
    approx(f64_at(&v["recall_at"], "1"), 0.0);
    approx(f64_at(&v["recall_at"], "10"), 1.0);
    let per = v["per_question"].as_object().expect("per-question rows");
    assert_eq!(per.len(), 2);
    approx(f64_at(&per["q1"], "ap"), 0.5);
    approx(f64_at(&per["q2"], "ap"), 1.0);
}

#[test]
fn eval_retrieval_renders_text_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let qrels = write(dir.path(), "qrels.tsv", QRELS);
    let run_path = write(dir.path(), "sys.run", RUN);
    let base = [
        "eval-retrieval",
        "--run",
        run_path.to_str().unwrap(),
        "--qrels",
        qrels.to_str().unwrap(),
    ];

    let mut text_args = base.to_vec();
    text_args.extend(["--format", "text"]);
    let text = stdout_ok(&text_args);
    assert!(text.contains("retrieval evaluation"), "text header: {text}");
    assert!(text.contains("0.7500"), "text MAP: {text}");

    let mut csv_args = base.to_vec();
    csv_args.extend(["--format", "csv"]);
    let csv = stdout_ok(&csv_args);
    assert!(
        csv.starts_with("question_id,answer_type,ap,rr"),
        "csv header: {csv}"
    );
    assert!(csv.contains("q1,single,0.5,0.5"), "csv row: {csv}");
}

#[test]
fn eval_retrieval_writes_the_report_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let qrels = write(dir.path(), "qrels.tsv", QRELS);
    let run_path = write(dir.path(), "sys.run", RUN);
    let out_path = dir.path().join("report.json");
    let stdout = stdout_ok(&[
        "eval-retrieval",
        "--run",
        run_path.to_str().unwrap(),
        "--qrels",
        qrels.to_str().unwrap(),
        "--format",
        "json",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(stdout.is_empty(), "--out should silence stdout: {stdout}");
    let v = json_file(&out_path);
    approx(f64_at(&v, "map"), 0.75);
}

// ---------------------------------------------------------------------------
// eval-mrc
// ---------------------------------------------------------------------------

#[test]
fn eval_mrc_scores_partial_matches() {
    let dir = tempfile::tempdir().unwrap();
    let gold = write(dir.path(), "dataset.json", DATASET);
    let pred = write(dir.path(), "preds.json", PREDS);
    let v = json_ok(&[
        "eval-mrc",
        "--pred",
        pred.to_str().unwrap(),
        "--gold",
        gold.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(v["n_samples"], 2);
    approx(f64_at(&v, "pap"), 0.5);
    approx(f64_at(&v["per_type_pap"], "single"), 1.0);
    approx(f64_at(&v["per_type_pap"], "zero"), 0.0);
}

#[test]
fn eval_mrc_zeta_marks_high_scoring_no_answer_channels() {
    let dir = tempfile::tempdir().unwrap();
    let gold = write(dir.path(), "dataset.json", DATASET);
    let pred = write(dir.path(), "preds.json", PREDS);
    // s2's channel normalizes to 1.0 > 0.8, so its list is emptied and
    // the zero-answer sample scores 1 instead of 0.
    let v = json_ok(&[
        "eval-mrc",
        "--pred",
        pred.to_str().unwrap(),
        "--gold",
        gold.to_str().unwrap(),
        "--zeta",
        "0.8",
        "--format",
        "json",
    ]);
    approx(f64_at(&v, "pap"), 1.0);
}

#[test]
fn eval_mrc_zeta_requires_the_no_answer_channel() {
    let dir = tempfile::tempdir().unwrap();
    let gold = write(dir.path(), "dataset.json", DATASET);
    let pred = write(
        dir.path(),
        "preds.json",
        r#"[{"sample_id": "s1", "spans": [{"start_char": 6, "end_char": 10, "score": 2.0}]},
            {"sample_id": "s2", "spans": []}]"#,
    );
    let err = fail_with(
        &[
            "eval-mrc",
            "--pred",
            pred.to_str().unwrap(),
            "--gold",
            gold.to_str().unwrap(),
            "--zeta",
            "0.8",
        ],
        1,
    );
    assert!(
        err.contains("no-answer"),
        "stderr should explain the missing channel: {err}"
    );
}

// ---------------------------------------------------------------------------
// span-decode
// ---------------------------------------------------------------------------

#[test]
fn span_decode_ranks_spans_and_reports_losses() {
    let dir = tempfile::tempdir().unwrap();
    let gold = write(
        dir.path(),
        "dataset.json",
        r#"[{"sample_id": "s1", "question": "what beta", "passage": "alpha beta gamma",
            "answers": [{"start_char": 6, "end_char": 10}]}]"#,
    );
    // Position 0 is the null slot; token positions 1..=3 cover the three
    // passage tokens. Token "beta" (position 2) dominates both channels.
    let logits = write(
        dir.path(),
        "logits.jsonl",
        r#"{"sample_id": "s1", "start_logits": [0.0, -10.0, 10.0, -10.0], "end_logits": [0.0, -10.0, 10.0, -10.0]}
"#,
    );
    let spans_out = dir.path().join("decoded.json");
    let v = json_ok(&[
        "span-decode",
        "--logits",
        logits.to_str().unwrap(),
        "--gold",
        gold.to_str().unwrap(),
        "--spans-out",
        spans_out.to_str().unwrap(),
        "--n-best",
        "5",
        "--format",
        "json",
    ]);
    // The summary is a span-loss report over the same logits.
    assert_eq!(v["n_samples"], 1);
    let fal = f64_at(&v, "mean_fal");
    let mal = f64_at(&v, "mean_mal");
    approx(fal, mal); // single-gold sample: first answer is the max-F1 answer
    assert!(fal > 0.0 && fal.is_finite());

    let decoded = json_file(&spans_out);
    let lists = decoded.as_array().expect("span lists");
    assert_eq!(lists.len(), 1);
    let best = &lists[0]["spans"][0];
    assert_eq!(best["start_char"], 6);
    assert_eq!(best["end_char"], 10);
    assert_eq!(lists[0]["spans"][0]["text"], "beta");
    // no_answer_score = (s0 + e0) - max span logit sum = 0 - 20.
    approx(f64_at(&lists[0], "no_answer_score"), -20.0);

    // The decoded artifact round-trips through eval-mrc with a perfect score.
    let scored = json_ok(&[
        "eval-mrc",
        "--pred",
        spans_out.to_str().unwrap(),
        "--gold",
        gold.to_str().unwrap(),
        "--format",
        "json",
    ]);
    approx(f64_at(&scored, "pap"), 1.0);
}

#[test]
fn span_decode_rejects_logits_that_do_not_match_the_passage() {
    let dir = tempfile::tempdir().unwrap();
    let gold = write(
        dir.path(),
        "dataset.json",
        r#"[{"sample_id": "s1", "question": "what beta", "passage": "alpha beta gamma",
            "answers": [{"start_char": 6, "end_char": 10}]}]"#,
    );
    // Five positions = four tokens, but the passage has three.
    let logits = write(
        dir.path(),
        "logits.jsonl",
        r#"{"sample_id": "s1", "start_logits": [0.0, 1.0, 2.0, 3.0, 4.0], "end_logits": [0.0, 1.0, 2.0, 3.0, 4.0]}
"#,
    );
    let spans_out = dir.path().join("decoded.json");
    let err = fail_with(
        &[
            "span-decode",
            "--logits",
            logits.to_str().unwrap(),
            "--gold",
            gold.to_str().unwrap(),
            "--spans-out",
            spans_out.to_str().unwrap(),
        ],
        1,
    );
    assert!(err.contains("logits"), "stderr: {err}");
}

// ---------------------------------------------------------------------------
// postprocess
// ---------------------------------------------------------------------------

#[test]
fn postprocess_suppresses_overlapping_spans() {
    let dir = tempfile::tempdir().unwrap();
    let gold = write(dir.path(), "dataset.json", DATASET);
    // Two copies of "beta" (token F1 = 1.0 > 0.5) and one disjoint span.
    let pred = write(
        dir.path(),
        "preds.json",
        r#"[{"sample_id": "s1", "spans": [
              {"start_char": 6, "end_char": 10, "score": 3.0},
              {"start_char": 6, "end_char": 10, "score": 2.0},
              {"start_char": 17, "end_char": 22, "score": 1.0}]},
            {"sample_id": "s2", "spans": []}]"#,
    );
    let spans_out = dir.path().join("kept.json");
    let v = json_ok(&[
        "postprocess",
        "--pred",
        pred.to_str().unwrap(),
        "--gold",
        gold.to_str().unwrap(),
        "--spans-out",
        spans_out.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(v["n_lists"], 2);
    assert_eq!(v["spans_in"], 3);
    assert_eq!(v["spans_kept"], 2);
    let kept = json_file(&spans_out);
    let s1 = kept
        .as_array()
        .unwrap()
        .iter()
        .find(|l| l["sample_id"] == "s1")
        .expect("s1 survives");
    assert_eq!(s1["spans"].as_array().unwrap().len(), 2);
    assert_eq!(s1["spans"][0]["start_char"], 6);
    assert_eq!(s1["spans"][1]["start_char"], 17);
}

// ---------------------------------------------------------------------------
// threshold-tune
// ---------------------------------------------------------------------------

/// q1 is answerable (relevant p1, retrieved with score 5.0 → γ = −5);
/// q2 is zero-answer but retrieves p3 with score 0.5 → γ = −0.5.
/// Normalized γ: q1 → 0, q2 → 1. Marking q2 lifts MAP from 0.5 to 1.0.
const TUNE_QRELS: &str = "q1 0 p1 1\nq2 0 -1 0\n";
const TUNE_RUN: &str = "q1\tQ0\tp1\t1\t5.0\tbase\nq2\tQ0\tp3\t1\t0.5\tbase\n";

#[test]
fn threshold_tune_searches_zeta_on_retrieval_runs() {
    let dir = tempfile::tempdir().unwrap();
    let qrels = write(dir.path(), "qrels.tsv", TUNE_QRELS);
    let run_path = write(dir.path(), "base.run", TUNE_RUN);
    let trace = dir.path().join("trace.csv");
    let run_out = dir.path().join("marked.run");
    let v = json_ok(&[
        "threshold-tune",
        "--task",
        "a",
        "--run",
        run_path.to_str().unwrap(),
        "--qrels",
        qrels.to_str().unwrap(),
        "--trace-out",
        trace.to_str().unwrap(),
        "--run-out",
        run_out.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(v["task"], "a");
    assert_eq!(v["mode"], "search");
    assert_eq!(v["metric_name"], "map");
    approx(f64_at(&v, "baseline_metric"), 0.5);
    approx(f64_at(&v, "metric"), 1.0);
    approx(f64_at(&v, "zeta"), 0.5); // midpoint between the two normalized scores
    assert_eq!(v["n_marked"], 1);

    let trace_text = read(&trace);
    assert!(
        trace_text.starts_with("zeta,metric,n_marked"),
        "trace header: {trace_text}"
    );
    // Three candidates: below the minimum, the midpoint, above the maximum.
    assert_eq!(trace_text.lines().count(), 4, "trace rows: {trace_text}");
    assert!(trace_text.contains("0.5,1,1"), "winning row: {trace_text}");

    let marked = read(&run_out);
    assert!(
        marked.contains("q2\tQ0\t-1\t1\t0\tbase"),
        "q2 should become a null-document row: {marked}"
    );
    assert!(marked.contains("q1\tQ0\tp1"), "q1 untouched: {marked}");
}

#[test]
fn threshold_tune_quantile_and_fixed_modes() {
    let dir = tempfile::tempdir().unwrap();
    let qrels = write(dir.path(), "qrels.tsv", TUNE_QRELS);
    let run_path = write(dir.path(), "base.run", TUNE_RUN);
    let base = [
        "threshold-tune",
        "--task",
        "a",
        "--run",
        run_path.to_str().unwrap(),
        "--qrels",
        qrels.to_str().unwrap(),
        "--format",
        "json",
    ];

    // Quantile: t = round(0.5 · 2) = 1, so ζ is the 2nd-largest score (0.0)
    // and exactly the one question above it is marked.
    let mut q_args = base.to_vec();
    q_args.extend(["--mode", "quantile", "--fraction", "0.5"]);
    let q = json_ok(&q_args);
    assert_eq!(q["mode"], "quantile");
    approx(f64_at(&q, "zeta"), 0.0);
    approx(f64_at(&q, "metric"), 1.0);
    assert_eq!(q["n_marked"], 1);

    // Fixed without --zeta: the default threshold 0.8 on the normalized scale.
    let mut f_args = base.to_vec();
    f_args.extend(["--mode", "fixed"]);
    let f = json_ok(&f_args);
    assert_eq!(f["mode"], "fixed");
    approx(f64_at(&f, "zeta"), 0.8);
    approx(f64_at(&f, "metric"), 1.0);
    assert_eq!(f["n_marked"], 1);
}

#[test]
fn threshold_tune_searches_zeta_on_span_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let gold = write(dir.path(), "dataset.json", DATASET);
    let pred = write(dir.path(), "preds.json", PREDS);
    let spans_out = dir.path().join("marked.json");
    let v = json_ok(&[
        "threshold-tune",
        "--task",
        "b",
        "--pred",
        pred.to_str().unwrap(),
        "--gold",
        gold.to_str().unwrap(),
        "--spans-out",
        spans_out.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(v["task"], "b");
    assert_eq!(v["metric_name"], "pap");
    approx(f64_at(&v, "baseline_metric"), 0.5);
    approx(f64_at(&v, "metric"), 1.0);
    assert_eq!(v["n_marked"], 1);

    let marked = json_file(&spans_out);
    let s2 = marked
        .as_array()
        .unwrap()
        .iter()
        .find(|l| l["sample_id"] == "s2")
        .expect("s2 present");
    assert_eq!(s2["spans"].as_array().unwrap().len(), 0, "s2 emptied");
}

#[test]
fn threshold_tune_rejects_mismatched_flags() {
    let dir = tempfile::tempdir().unwrap();
    let qrels = write(dir.path(), "qrels.tsv", TUNE_QRELS);
    let run_path = write(dir.path(), "base.run", TUNE_RUN);
    let spans_out = dir.path().join("x.json");

    // Task A cannot write a span artifact.
    let err = fail_with(
        &[
            "threshold-tune",
            "--task",
            "a",
            "--run",
            run_path.to_str().unwrap(),
            "--qrels",
            qrels.to_str().unwrap(),
            "--spans-out",
            spans_out.to_str().unwrap(),
        ],
        2,
    );
    assert!(err.contains("usage error"), "stderr: {err}");

    // The trace is only defined for the exhaustive search.
    let trace = dir.path().join("trace.csv");
    let err = fail_with(
        &[
            "threshold-tune",
            "--task",
            "a",
            "--run",
            run_path.to_str().unwrap(),
            "--qrels",
            qrels.to_str().unwrap(),
            "--mode",
            "fixed",
            "--trace-out",
            trace.to_str().unwrap(),
        ],
        2,
    );
    assert!(err.contains("usage error"), "stderr: {err}");

    // Task A requires --run and --qrels.
    fail_with(&["threshold-tune", "--task", "a"], 2);
}

// ---------------------------------------------------------------------------
// ensemble
// ---------------------------------------------------------------------------

#[test]
fn ensemble_sums_scores_across_retrieval_members() {
    let dir = tempfile::tempdir().unwrap();
    let m1 = write(
        dir.path(),
        "m1.run",
        "q1\tQ0\tp1\t1\t1.0\tm1\nq1\tQ0\tp2\t2\t0.9\tm1\n",
    );
    let m2 = write(dir.path(), "m2.run", "q1\tQ0\tp2\t1\t0.3\tm2\n");
    let run_out = dir.path().join("ens.run");
    let v = json_ok(&[
        "ensemble",
        "--task",
        "a",
        "--member",
        m1.to_str().unwrap(),
        "--member",
        m2.to_str().unwrap(),
        "--tag",
        "ens",
        "--run-out",
        run_out.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(v["task"], "a");
    assert_eq!(v["n_members"], 2);
    assert_eq!(v["n_items"], 1);

    let merged = read(&run_out);
    let first = merged.lines().next().expect("one row at least");
    let cols: Vec<&str> = first.split('\t').collect();
    assert_eq!(cols[0], "q1");
    assert_eq!(cols[2], "p2", "p2 sums to 1.2 and outranks p1: {merged}");
    assert_eq!(cols[3], "1");
    approx(cols[4].parse::<f64>().unwrap(), 1.2);
    assert_eq!(cols[5], "ens");
}

#[test]
fn ensemble_merges_span_lists_and_no_answer_channels() {
    let dir = tempfile::tempdir().unwrap();
    let gold = write(
        dir.path(),
        "dataset.json",
        r#"[{"sample_id": "s1", "question": "what beta", "passage": "alpha beta gamma",
            "answers": [{"start_char": 6, "end_char": 10}]}]"#,
    );
    let m1 = write(
        dir.path(),
        "m1.json",
        r#"[{"sample_id": "s1", "no_answer_score": -1.0,
            "spans": [{"start_char": 6, "end_char": 10, "score": 0.4}]}]"#,
    );
    let m2 = write(
        dir.path(),
        "m2.json",
        r#"[{"sample_id": "s1", "no_answer_score": -0.5,
            "spans": [{"start_char": 6, "end_char": 10, "score": 0.5}]}]"#,
    );
    let spans_out = dir.path().join("ens.json");
    let v = json_ok(&[
        "ensemble",
        "--task",
        "b",
        "--member",
        m1.to_str().unwrap(),
        "--member",
        m2.to_str().unwrap(),
        "--gold",
        gold.to_str().unwrap(),
        "--spans-out",
        spans_out.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(v["task"], "b");
    assert_eq!(v["n_members"], 2);
    assert_eq!(v["n_items"], 1);

    let merged = json_file(&spans_out);
    let s1 = &merged.as_array().unwrap()[0];
    approx(f64_at(&s1["spans"][0], "score"), 0.9);
    approx(f64_at(s1, "no_answer_score"), -1.5);
}

// ---------------------------------------------------------------------------
// analyze-leakage / split-faithful
// ---------------------------------------------------------------------------

/// Six samples covering three categories:
///  - sA1/sA2 share a passage AND an answer text  → in-leakage (D1 group);
///  - sB1/sB2 share a passage with distinct answers → in-no-leakage;
///  - sC1/sC2 are singletons with rare questions     → out-of-distribution hard.
const SPLIT_DATASET: &str = r#"[
  {"sample_id": "sA1", "question": "where alpha one", "passage": "shared passage alpha",
   "answers": [{"start_char": 15, "end_char": 20}]},
  {"sample_id": "sA2", "question": "where alpha two", "passage": "shared passage alpha",
   "answers": [{"start_char": 15, "end_char": 20}]},
  {"sample_id": "sB1", "question": "where beta", "passage": "shared passage beta",
   "answers": [{"start_char": 15, "end_char": 19}]},
  {"sample_id": "sB2", "question": "where passage", "passage": "shared passage beta",
   "answers": [{"start_char": 7, "end_char": 14}]},
  {"sample_id": "sC1", "question": "where gamma", "passage": "lonely gamma text",
   "answers": [{"start_char": 7, "end_char": 12}]},
  {"sample_id": "sC2", "question": "where delta", "passage": "another delta entry",
   "answers": [{"start_char": 8, "end_char": 13}]}
]"#;

#[test]
fn analyze_leakage_categorizes_every_sample() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = write(dir.path(), "dataset.json", SPLIT_DATASET);
    let v = json_ok(&[
        "analyze-leakage",
        "--dataset",
        dataset.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(v["n_samples"], 6);
    assert_eq!(v["n_zero_answer"], 0);
    assert_eq!(v["categories"]["sA1"], "D1InLeakage");
    assert_eq!(v["categories"]["sB2"], "D2InNoLeakage");
    assert_eq!(v["categories"]["sC1"], "D3OodHard");
    assert_eq!(v["category_counts"]["D1InLeakage"], 2);
    assert_eq!(v["category_counts"]["D2InNoLeakage"], 2);
    assert_eq!(v["category_counts"]["D3OodHard"], 2);
    assert_eq!(v["groups"].as_array().unwrap().len(), 1);
    assert_eq!(v["max_group_size"], 2);
}

#[test]
fn split_faithful_routes_categories_and_writes_partitions() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = write(dir.path(), "dataset.json", SPLIT_DATASET);
    let train_out = dir.path().join("train.json");
    let dev_out = dir.path().join("dev.json");
    let v = json_ok(&[
        "split-faithful",
        "--dataset",
        dataset.to_str().unwrap(),
        "--zero-ratio",
        "0",
        "--train-out",
        train_out.to_str().unwrap(),
        "--dev-out",
        dev_out.to_str().unwrap(),
        "--format",
        "json",
    ]);
    // Leaky duplicates stay in train; hard singletons go to dev; the
    // shared-passage pair is rationed with at least one member in dev.
    assert_eq!(v["assignment"]["sA1"], "train");
    assert_eq!(v["assignment"]["sA2"], "train");
    assert_eq!(v["assignment"]["sC1"], "dev");
    assert_eq!(v["assignment"]["sC2"], "dev");
    let b_sides = [&v["assignment"]["sB1"], &v["assignment"]["sB2"]];
    assert!(
        b_sides.contains(&&Value::String("dev".into())),
        "one shared-passage sample belongs to dev: {v}"
    );
    assert_eq!(v["train_total"]["samples"], 3);
    assert_eq!(v["dev_total"]["samples"], 3);
    assert_eq!(v["moved_zero_groups"], 0);

    // The written partitions parse as datasets and cover all six samples.
    let train = json_file(&train_out);
    let dev = json_file(&dev_out);
    assert_eq!(train.as_array().unwrap().len(), 3);
    assert_eq!(dev.as_array().unwrap().len(), 3);
    let mut ids: Vec<String> = train
        .as_array()
        .unwrap()
        .iter()
        .chain(dev.as_array().unwrap())
        .map(|s| s["sample_id"].as_str().unwrap().to_string())
        .collect();
    ids.sort();
    assert_eq!(ids, ["sA1", "sA2", "sB1", "sB2", "sC1", "sC2"]);
}

// ---------------------------------------------------------------------------
// bm25-search / tfidf-search
// ---------------------------------------------------------------------------

const COLLECTION: &str = "d1\talpha beta gamma\nd2\tdelta epsilon zeta\nd3\teta theta iota\n";

#[test]
fn bm25_search_ranks_matching_documents() {
    let dir = tempfile::tempdir().unwrap();
    let collection = write(dir.path(), "collection.tsv", COLLECTION);
    let questions = write(dir.path(), "questions.tsv", "qa\tdelta epsilon\n");
    let run_out = dir.path().join("bm25.run");
    let v = json_ok(&[
        "bm25-search",
        "--collection",
        collection.to_str().unwrap(),
        "--questions",
        questions.to_str().unwrap(),
        "--run-out",
        run_out.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(v["scorer"], "bm25");
    assert_eq!(v["n_documents"], 3);
    assert_eq!(v["n_questions"], 1);
    assert_eq!(v["n_with_hits"], 1);
    approx(f64_at(&v, "k1"), 1.2);
    approx(f64_at(&v, "b"), 0.75);

    let run_text = read(&run_out);
    let first = run_text.lines().next().expect("one hit");
    let cols: Vec<&str> = first.split('\t').collect();
    assert_eq!(cols[0], "qa");
    assert_eq!(cols[2], "d2", "only d2 contains the query terms: {run_text}");
    assert!(cols[4].parse::<f64>().unwrap() > 0.0);
    assert_eq!(cols[5], "bm25");
}

#[test]
fn bm25_search_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let collection = write(dir.path(), "collection.tsv", COLLECTION);
    let questions = write(
        dir.path(),
        "questions.tsv",
        "qa\tdelta epsilon\nqb\talpha iota\nqc\tmissing words\n",
    );
    let out_a = dir.path().join("a.run");
    let out_b = dir.path().join("b.run");
    let args = |out: &Path, threads: &'static str| {
        vec![
            "bm25-search".to_string(),
            "--collection".into(),
            collection.to_str().unwrap().into(),
            "--questions".into(),
            questions.to_str().unwrap().into(),
            "--run-out".into(),
            out.to_str().unwrap().into(),
            "--threads".into(),
            threads.into(),
            "--format".into(),
            "json".into(),
        ]
    };
    let run_once = |argv: Vec<String>| {
        let out = bin().args(&argv).output().expect("spawn");
        assert!(out.status.success());
        out.stdout
    };
    let stdout_a = run_once(args(&out_a, "1"));
    let stdout_b = run_once(args(&out_b, "4"));
    assert_eq!(stdout_a, stdout_b, "report must not depend on threads");
    assert_eq!(read(&out_a), read(&out_b), "run file must not depend on threads");
}

#[test]
fn tfidf_search_scores_identical_text_as_unity() {
    let dir = tempfile::tempdir().unwrap();
    let collection = write(dir.path(), "collection.tsv", COLLECTION);
    let questions = write(dir.path(), "questions.tsv", "qa\talpha beta gamma\n");
    let run_out = dir.path().join("tfidf.run");
    let v = json_ok(&[
        "tfidf-search",
        "--collection",
        collection.to_str().unwrap(),
        "--questions",
        questions.to_str().unwrap(),
        "--run-out",
        run_out.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(v["scorer"], "tfidf");
    assert!(v.get("k1").is_none(), "tfidf reports no OK-BM25 parameters");

    let run_text = read(&run_out);
    let first = run_text.lines().next().expect("one hit");
    let cols: Vec<&str> = first.split('\t').collect();
    assert_eq!(cols[2], "d1");
    approx(cols[4].parse::<f64>().unwrap(), 1.0);
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

#[test]
fn validate_counts_questions_passages_and_answer_types() {
    let dir = tempfile::tempdir().unwrap();
    let questions = write(dir.path(), "questions.tsv", "q1\twhat beta\nq2\tnothing here\n");
    let collection = write(dir.path(), "collection.tsv", "p1\talpha beta\np2\tgamma delta\n");
    let qrels = write(dir.path(), "qrels.tsv", "q1 0 p1 1\nq2 0 -1 0\n");
    let dataset = write(dir.path(), "dataset.json", DATASET);
    let v = json_ok(&[
        "validate",
        "--questions",
        questions.to_str().unwrap(),
        "--collection",
        collection.to_str().unwrap(),
        "--qrels",
        qrels.to_str().unwrap(),
        "--dataset",
        dataset.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(v["n_questions"], 2);
    assert_eq!(v["n_passages"], 2);
    assert_eq!(v["n_relevance_pairs"], 1);
    assert_eq!(v["retrieval_answer_types"]["single"], 1);
    assert_eq!(v["retrieval_answer_types"]["zero"], 1);
    assert_eq!(v["n_samples"], 2);
    assert_eq!(v["n_triplets"], 1);
    assert_eq!(v["mrc_answer_types"]["single"], 1);
    assert_eq!(v["mrc_answer_types"]["zero"], 1);
}

#[test]
fn validate_with_no_inputs_is_a_usage_error() {
    let err = fail_with(&["validate"], 2);
    assert!(err.contains("usage error"), "stderr: {err}");
}

// ---------------------------------------------------------------------------
// configuration file
// ---------------------------------------------------------------------------

#[test]
fn config_file_sets_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let qrels = write(dir.path(), "qrels.tsv", QRELS);
    let run_path = write(dir.path(), "sys.run", RUN);
    let cfg = write(dir.path(), "cfg.json", r#"{"format": "csv"}"#);

    // The config's format applies when no flag is given…
    let csv = stdout_ok(&[
        "eval-retrieval",
        "--run",
        run_path.to_str().unwrap(),
        "--qrels",
        qrels.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert!(csv.starts_with("question_id,"), "config format: {csv}");

    // …and the flag overrides the config.
    let json_text = stdout_ok(&[
        "eval-retrieval",
        "--run",
        run_path.to_str().unwrap(),
        "--qrels",
        qrels.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(json_text.trim_start().starts_with('{'), "flag wins: {json_text}");
}

#[test]
fn config_file_supplies_zeta_and_the_flag_overrides_it() {
    let dir = tempfile::tempdir().unwrap();
    let gold = write(dir.path(), "dataset.json", DATASET);
    let pred = write(dir.path(), "preds.json", PREDS);
    let cfg = write(dir.path(), "cfg.json", r#"{"zeta": 0.8}"#);
    let base = [
        "eval-mrc",
        "--pred",
        pred.to_str().unwrap(),
        "--gold",
        gold.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--format",
        "json",
    ];

    // Config ζ = 0.8 marks s2 → perfect pAP.
    let v = json_ok(&base);
    approx(f64_at(&v, "pap"), 1.0);

    // A flag ζ above every normalized score marks nothing → pAP falls back.
    let mut flag_args = base.to_vec();
    flag_args.extend(["--zeta", "1.5"]);
    let v = json_ok(&flag_args);
    approx(f64_at(&v, "pap"), 0.5);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let qrels = write(dir.path(), "qrels.tsv", QRELS);
    let run_path = write(dir.path(), "sys.run", RUN);
    let cfg = write(dir.path(), "cfg.json", r#"{"zeeta": 0.8}"#);
    let err = fail_with(
        &[
            "eval-retrieval",
            "--run",
            run_path.to_str().unwrap(),
            "--qrels",
            qrels.to_str().unwrap(),
            "--config",
            cfg.to_str().unwrap(),
        ],
        1,
    );
    assert!(err.contains("zeeta"), "stderr names the bad key: {err}");
}
