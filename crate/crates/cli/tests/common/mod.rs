#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub const MEASURES: &[&str] = &["vne", "frobenius", "log_det", "trace_inverse"];

const NOUNS: &[&str] = &[
    "river", "harbor", "castle", "market", "library", "bridge", "garden", "railway", "cathedral", "museum",
    "mill", "canal", "forest", "valley", "tower", "square", "theatre", "abbey", "quarry", "lighthouse",
];
const VERBS: &[&str] = &["shaped", "funded", "restored", "described", "mapped", "guarded", "rebuilt", "named"];
const ADJS: &[&str] = &["old", "busy", "quiet", "famous", "northern", "wooden", "royal", "small"];

/// Deterministic passage `p` of roughly 80 words in ten sentences.
pub fn passage(p: usize) -> String {
    let mut s = String::new();
    let mut state = p as u64 * 2_654_435_761 + 17;
    let mut next = |m: usize| {
        state = state.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407);
        ((state >> 33) as usize) % m
    };
    for _ in 0..10 {
        let (a, n1, v, n2) = (ADJS[next(ADJS.len())], NOUNS[next(NOUNS.len())], VERBS[next(VERBS.len())], NOUNS[next(NOUNS.len())]);
        let _ = write!(s, "The {a} {n1} {v} the {n2} near town. ");
    }
    s.trim_end().to_string()
}

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub topics: usize,
}

impl Fixture {
    /// `topics` topics with `n` samples each, a hashing embedder and an
    /// oracle directory whose factuality varies by topic.
    pub fn new(topics: usize, n: usize) -> Self {
        Self::with_config(topics, n, "")
    }

    pub fn with_config(topics: usize, n: usize, extra_provider: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();

        let mut lines = String::new();
        for t in 0..topics {
            let line = serde_json::json!({
                "id": topic_id(t),
                "entity": format!("Entity {t}"),
                "reference_doc": format!("Entity {t} is a town with a {} and a {}.", NOUNS[t % NOUNS.len()], NOUNS[(t * 7 + 3) % NOUNS.len()]),
            });
            lines.push_str(&line.to_string());
            lines.push('\n');
        }
        std::fs::write(root.join("topics.jsonl"), lines).unwrap();

        let passages: Vec<String> = (0..12).map(passage).collect();
        std::fs::write(root.join("generator.txt"), passages.join("\n---\n")).unwrap();

        std::fs::create_dir_all(root.join("oracle")).unwrap();
        for t in 0..topics {
            std::fs::write(root.join("oracle").join(format!("{}.xml", topic_id(t))), transcript(t % 6, 5)).unwrap();
        }

        let config = format!(
            r#"oracle_model = "stub-oracle"
measures = ["vne", "frobenius", "log_det", "trace_inverse"]

[generator]
generator_model = "stub-generator"
n_samples = {n}
word_target = 60
length_targets = [30, 60]

[eval]
n_boot = 1500
seed = 11

[paths]
topics = "topics.jsonl"
responses = "out/responses.jsonl"
embeddings_cache = "out/cache"
scores = "out/scored.jsonl"
reports = "out/reports"

[[providers]]
name = "hash"
endpoint = "stub://"
dim = 64
max_batch = 8
{extra_provider}"#
        );
        std::fs::write(root.join("semiso.toml"), config).unwrap();
        Self { dir, topics }
    }

    pub fn root(&self) -> &Path {
        self.dir.path()
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    pub fn read(&self, rel: &str) -> String {
        std::fs::read_to_string(self.path(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
    }

    /// Runs `semiso` with this fixture's config and stubs.
    pub fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_semiso"))
            .current_dir(self.root())
            .arg("--config")
            .arg(self.path("semiso.toml"))
            .arg("--stub-generator")
            .arg(self.path("generator.txt"))
            .arg("--stub-oracle")
            .arg(self.path("oracle"))
            .args(args)
            .output()
            .expect("semiso runs")
    }

    pub fn run_ok(&self, args: &[&str]) -> Value {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "semiso {args:?} exited {:?}\nstdout: {}\nstderr: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        );
        summary(&out)
    }

    /// generate → embed → score → segment-score → evaluate.
    pub fn full_pipeline(&self) -> Vec<Value> {
        ["generate", "embed", "score", "segment-score", "evaluate"]
            .iter()
            .map(|c| self.run_ok(&[c]))
            .collect()
    }
}

pub fn topic_id(t: usize) -> String {
    format!("t{t:02}")
}

pub fn summary(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or(Value::Null)
}

/// A transcript with `m` statements of which the first `k` are true.
pub fn transcript(k: usize, m: usize) -> String {
    let mut s = String::from("<statements>\n");
    for i in 0..m {
        let _ = writeln!(s, "<statement>Claim number {i} about the town.</statement> <class>{}</class>", u8::from(i < k));
    }
    s.push_str("</statements>\n");
    s
}

/// Loose SVG check: one root element, balanced and non-empty.
pub fn assert_svg(text: &str) {
    assert!(text.starts_with("<svg"), "not an svg: {}", &text[..text.len().min(80)]);
    assert!(text.trim_end().ends_with("</svg>"));
    assert_eq!(text.matches("<svg").count(), 1);
    assert!(!text.contains("NaN"));
}

pub fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}
