mod common;

use std::collections::BTreeSet;
use std::time::Instant;

use common::{assert_svg, csv_rows, summary, topic_id, transcript, Fixture, MEASURES};
use semiso_core::embed::{encode_hidden_states, HiddenStateMatrix};
use serde_json::{json, Value};

fn responses(fx: &Fixture) -> Vec<Value> {
    fx.read("out/responses.jsonl")
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn offline_pipeline_end_to_end() {
    let fx = Fixture::new(20, 10);
    let start = Instant::now();
    let summaries = fx.full_pipeline();
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");

    assert_eq!(summaries[0]["generated"], 200);
    assert_eq!(summaries[0]["derived"], 200);
    assert_eq!(responses(&fx).len(), 400);

    let (header, rows) = csv_rows(&fx.read("out/reports/observations.csv"));
    assert_eq!(header, ["topic_id", "measure", "x", "y", "n_samples_used", "length_variant"]);
    // 20 topics × 2 lengths × 4 measures, all with factuality.
    assert_eq!(rows.len(), 160);
    assert!(rows.iter().all(|r| !r[3].is_empty()));

    let eval: Value = serde_json::from_str(&fx.read("out/reports/eval.json")).unwrap();
    let results = eval["results"].as_array().unwrap();
    assert_eq!(results.len(), 4);
    for r in results {
        assert_eq!(r["n_topics"], 20);
        assert_eq!(r["n_boot"], 1500);
        let r2 = r["r2"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&r2));
    }
    assert_eq!(eval["deltas"].as_array().unwrap().len(), 6);
    assert_eq!(eval["config"]["length_variant"], 60);

    let (header, bars) = csv_rows(&fx.read("out/reports/bars.csv"));
    assert_eq!(header, ["measure", "r2", "boot_mean", "boot_sd", "n_topics"]);
    let names: BTreeSet<&str> = bars.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(names, MEASURES.iter().copied().collect());
    assert_svg(&fx.read("out/reports/bars.svg"));

    // Factuality per topic follows the oracle fixture: t % 6 of 5 claims true.
    let (_, fact) = csv_rows(&fx.read("out/reports/factuality.csv"));
    for row in fact.iter().filter(|r| r[1] == "60") {
        let t: usize = row[0][1..].parse().unwrap();
        let phi: f64 = row[2].parse().unwrap();
        assert!((phi - (t % 6).min(5) as f64 / 5.0).abs() < 1e-12, "{row:?}");
    }
}

#[test]
fn generate_resumes_after_interruption() {
    let fx = Fixture::new(6, 4);
    let first = fx.run_ok(&["generate", "--max-topics", "2"]);
    assert_eq!(first["stopped_early"], true);
    assert_eq!(first["generated"], 8);
    let partial = fx.read("out/responses.jsonl");

    let second = fx.run_ok(&["generate"]);
    assert_eq!(second["generated"], 16);
    let resumed = fx.read("out/responses.jsonl");
    assert!(resumed.len() > partial.len());

    // A fresh uninterrupted run produces the same records apart from timestamps.
    let clean = Fixture::new(6, 4);
    clean.run_ok(&["generate"]);
    let strip = |fx: &Fixture| -> Vec<Value> {
        responses(fx)
            .into_iter()
            .map(|mut v| {
                v.as_object_mut().unwrap().remove("created_at");
                v
            })
            .collect()
    };
    assert_eq!(strip(&fx), strip(&clean));
}

#[test]
fn rerun_is_idempotent() {
    let fx = Fixture::new(5, 4);
    fx.full_pipeline();
    let files = [
        "out/responses.jsonl",
        "out/scored.jsonl",
        "out/reports/observations.csv",
        "out/reports/factuality.csv",
        "out/reports/eval.json",
        "out/reports/bars.csv",
        "out/reports/bars.svg",
    ];
    let before: Vec<String> = files.iter().map(|f| fx.read(f)).collect();
    let again = fx.full_pipeline();
    assert_eq!(again[0]["generated"], 0);
    assert_eq!(again[1]["requests"], 0);
    assert_eq!(again[3]["scored"], 0);
    let after: Vec<String> = files.iter().map(|f| fx.read(f)).collect();
    assert_eq!(before, after);
}

fn write_responses(fx: &Fixture, texts: &[String]) {
    let mut out = String::new();
    for (i, text) in texts.iter().enumerate() {
        let rec = json!({
            "topic_id": topic_id(i / 10),
            "sample_index": i % 10,
            "text": text,
            "word_count": text.split_whitespace().count(),
            "generator_model": "fixture",
            "temperature": 0.7,
            "created_at": "2026-01-01T00:00:00Z",
            "length_variant": 60,
        });
        out.push_str(&rec.to_string());
        out.push('\n');
    }
    std::fs::create_dir_all(fx.path("out")).unwrap();
    std::fs::write(fx.path("out/responses.jsonl"), out).unwrap();
}

#[test]
fn embed_batches_and_caches() {
    let fx = Fixture::new(2, 10);
    let texts: Vec<String> = (0..20).map(|i| format!("Distinct response number {i}.")).collect();
    write_responses(&fx, &texts);

    let first = fx.run_ok(&["embed"]);
    assert_eq!(first["texts"], 20);
    assert_eq!(first["requests"], 3);
    assert_eq!(first["cache_hits"], 0);

    let second = fx.run_ok(&["embed"]);
    assert_eq!(second["requests"], 0);
    assert_eq!(second["cache_hits"], 20);
}

#[test]
fn embed_dimension_mismatch_fails() {
    let extra = r#"
[[providers]]
name = "liar"
endpoint = "stub://?dim=16"
dim = 64
"#;
    let fx = Fixture::with_config(2, 10, extra);
    let texts: Vec<String> = (0..20).map(|i| format!("Response {i}.")).collect();
    write_responses(&fx, &texts);
    let out = fx.run(&["embed", "--provider", "liar"]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["status"], "failed");
    assert!(err["failures"][0]["error"].as_str().unwrap().contains("dimension"), "{err}");
}

#[test]
fn identical_responses_score_zero() {
    let fx = Fixture::new(1, 10);
    let texts = vec!["The same answer every time.".to_string(); 10];
    write_responses(&fx, &texts);
    fx.run_ok(&["embed"]);
    fx.run_ok(&["score", "--measures", "vne"]);
    let (_, rows) = csv_rows(&fx.read("out/reports/observations.csv"));
    assert_eq!(rows.len(), 1);
    let x: f64 = rows[0][2].parse().unwrap();
    assert!(x.abs() < 1e-9, "{x}");
    assert_eq!(rows[0][3], "");
}

fn hsv1(matrices: &[Vec<Vec<f64>>]) -> Vec<u8> {
    let m: Vec<HiddenStateMatrix> = matrices
        .iter()
        .map(|rows| HiddenStateMatrix::from_rows(rows.clone()).unwrap())
        .collect();
    encode_hidden_states(&m)
}

#[test]
fn hidden_state_ingest_scores_half_kernel() {
    let extra = r#"
[[providers]]
name = "local"
endpoint = "hidden.bin"
dim = 3
pooling = "last-token"
"#;
    let fx = Fixture::with_config(1, 2, extra);
    write_responses(&fx, &["First.".to_string(), "Second.".to_string()]);
    // Last tokens (1,1,0) and (1,0,1): cos = 0.5 exactly in f32, so the
    // eigenvalues of K/2 are 0.75 and 0.25.
    let bytes = hsv1(&[vec![vec![9.0, 9.0, 9.0], vec![1.0, 1.0, 0.0]], vec![vec![1.0, 0.0, 1.0]]]);
    std::fs::write(fx.path("hidden.bin"), bytes).unwrap();
    fx.run_ok(&["embed", "--provider", "local", "--hidden-states", "hidden.bin"]);
    fx.run_ok(&["score", "--provider", "local", "--measures", "vne"]);
    let (_, rows) = csv_rows(&fx.read("out/reports/observations.csv"));
    let x: f64 = rows[0][2].parse().unwrap();
    let expected = -(0.75f64 * 0.75f64.ln() + 0.25 * 0.25f64.ln()) / 2f64.ln();
    assert!((x - expected).abs() < 1e-9, "{x} vs {expected}");
    assert!((x - 0.811278).abs() < 1e-6);
}

#[test]
fn segment_score_follows_transcripts() {
    let fx = Fixture::new(1, 3);
    write_responses(&fx, &["One.".into(), "Two.".into(), "Three.".into()]);
    std::fs::write(fx.path("oracle/t00__1.xml"), transcript(9, 11)).unwrap();
    std::fs::write(fx.path("oracle/t00__2.xml"), "not a transcript").unwrap();
    let s = fx.run_ok(&["segment-score"]);
    assert_eq!(s["scored"], 2);
    assert_eq!(s["failed_responses"], 1);
    let scored: Vec<Value> = fx
        .read("out/scored.jsonl")
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(scored[0]["phi"], 0.0);
    assert!((scored[1]["phi"].as_f64().unwrap() - 9.0 / 11.0).abs() < 1e-15);
    let (_, fact) = csv_rows(&fx.read("out/reports/factuality.csv"));
    assert_eq!(fact[0][3], "2");
    assert_eq!(fact[0][4], "1");
}

#[test]
fn segment_score_topic_failure_exits_nonzero() {
    let fx = Fixture::new(1, 3);
    write_responses(&fx, &["One.".into(), "Two.".into(), "Three.".into()]);
    for i in 0..2 {
        std::fs::write(fx.path(&format!("oracle/t00__{i}.xml")), "garbage").unwrap();
    }
    let out = fx.run(&["segment-score"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(csv_rows(&fx.read("out/reports/factuality.csv")).1.is_empty());
}

fn write_observations(fx: &Fixture, rows: &[(&str, &str, f64, f64, usize)]) {
    let mut s = String::from("topic_id,measure,x,y,n_samples_used,length_variant\n");
    for (t, m, x, y, l) in rows {
        s.push_str(&format!("{t},{m},{x},{y},10,{l}\n"));
    }
    std::fs::create_dir_all(fx.path("out/reports")).unwrap();
    std::fs::write(fx.path("out/reports/observations.csv"), s).unwrap();
}

#[test]
fn evaluate_is_deterministic_and_exact_on_a_line() {
    let fx = Fixture::new(1, 2);
    let rows: Vec<(String, f64, f64)> = (0..30)
        .map(|i| {
            let x = i as f64 / 29.0;
            (format!("t{i:02}"), x, 0.2 + 0.5 * x)
        })
        .collect();
    let mut obs: Vec<(&str, &str, f64, f64, usize)> =
        rows.iter().map(|(t, x, y)| (t.as_str(), "vne", *x, *y, 60)).collect();
    obs.extend(rows.iter().map(|(t, x, y)| (t.as_str(), "custom_baseline", x * x, *y, 60)));
    write_observations(&fx, &obs);

    fx.run_ok(&["evaluate", "--n-boot", "300"]);
    let first = fx.read("out/reports/eval.json");
    fx.run_ok(&["evaluate", "--n-boot", "300", "--workers", "1"]);
    assert_eq!(first, fx.read("out/reports/eval.json"));

    let eval: Value = serde_json::from_str(&first).unwrap();
    let vne = eval["results"].as_array().unwrap().iter().find(|r| r["measure_name"] == "vne").unwrap();
    assert!((vne["r2"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((vne["boot_mean"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(eval["results"][0]["measure_name"], "vne");

    fx.run_ok(&["evaluate", "--n-boot", "300", "--seed", "12"]);
    assert_ne!(first, fx.read("out/reports/eval.json"));
}

#[test]
fn evaluate_needs_three_topics() {
    let fx = Fixture::new(1, 2);
    write_observations(&fx, &[("a", "vne", 0.1, 0.2, 60), ("b", "vne", 0.3, 0.4, 60)]);
    let out = fx.run(&["evaluate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_flags_missing_lengths_and_sample_counts() {
    let fx = Fixture::new(8, 6);
    fx.run_ok(&["generate"]);
    fx.run_ok(&["embed"]);
    fx.run_ok(&["score"]);
    fx.run_ok(&["segment-score"]);

    let s = fx.run_ok(&["sweep", "--lengths", "30,60,90", "--measures", "vne", "--n-boot", "100"]);
    assert_eq!(s["lengths"]["cells"], 3);
    assert_eq!(s["lengths"]["missing"], json!(["vne@90"]));
    let (_, rows) = csv_rows(&fx.read("out/reports/sweep_lengths.csv"));
    assert_eq!(rows[2][6], "missing: no observations at length 90");
    assert_svg(&fx.read("out/reports/sweep_lengths.svg"));

    let s = fx.run_ok(&["sweep", "--n-values", "2..8", "--measures", "vne", "--n-boot", "100"]);
    assert_eq!(s["samples"]["cells"], 7);
    assert_eq!(s["samples"]["missing"], json!(["vne@7", "vne@8"]));
    assert_svg(&fx.read("out/reports/sweep_samples.svg"));

    let r = fx.run_ok(&["report"]);
    assert_eq!(r["sections"], json!(["sweep_samples", "sweep_lengths"]));
    let md = fx.read("out/reports/report.md");
    assert!(md.contains("R² by response length"));
}

#[test]
fn missing_config_is_an_error() {
    let fx = Fixture::new(1, 2);
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_semiso"))
        .current_dir(fx.root())
        .args(["--config", "nope.toml", "report"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(summary(&out), Value::Null);
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["status"], "error");
}
