use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context};
use serde_json::{json, Value};

use semiso_core::io::atomic_write;

use super::CommandResult;
use crate::Ctx;

fn fmt(v: &Value) -> String {
    match v.as_f64() {
        Some(x) => format!("{x:.4}"),
        None => "n/a".into(),
    }
}

fn eval_section(out: &mut String, eval: &Value) {
    let cfg = &eval["config"];
    let _ = writeln!(out, "## Isotropy vs. factuality\n");
    let _ = writeln!(
        out,
        "Length variant {}, {} bootstrap resamples, seed {}, RNG `{}`.\n",
        cfg["length_variant"], cfg["n_boot"], cfg["seed"], cfg["rng"].as_str().unwrap_or("?")
    );
    out.push_str("| measure | R² | bootstrap mean | bootstrap sd | topics |\n|---|---|---|---|---|\n");
    for r in eval["results"].as_array().into_iter().flatten() {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            r["measure_name"].as_str().unwrap_or("?"),
            fmt(&r["r2"]),
            fmt(&r["boot_mean"]),
            fmt(&r["boot_sd"]),
            r["n_topics"]
        );
    }
    let deltas = eval["deltas"].as_array().map(Vec::as_slice).unwrap_or_default();
    if !deltas.is_empty() {
        out.push_str("\n| a − b | Δ | sd |\n|---|---|---|\n");
        for d in deltas {
            let _ = writeln!(
                out,
                "| {} − {} | {} | {} |",
                d["a"].as_str().unwrap_or("?"),
                d["b"].as_str().unwrap_or("?"),
                fmt(&d["delta"]),
                fmt(&d["sd"])
            );
        }
    }
    for w in eval["warnings"].as_array().into_iter().flatten() {
        let _ = writeln!(out, "\n> warning: {}", w.as_str().unwrap_or_default());
    }
    out.push_str("\n![bars](bars.svg)\n\n");
}

fn sweep_section(out: &mut String, title: &str, csv_path: &Path, svg: &str) -> anyhow::Result<()> {
    let mut reader = csv::Reader::from_path(csv_path).with_context(|| format!("reading {}", csv_path.display()))?;
    let _ = writeln!(out, "## {title}\n");
    out.push_str("| measure | value | bootstrap mean | bootstrap sd | status |\n|---|---|---|---|---|\n");
    for rec in reader.records() {
        let rec = rec?;
        let get = |name: &str, idx: usize| rec.get(idx).filter(|s| !s.is_empty()).unwrap_or(name).to_string();
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            get("?", 0),
            get("?", 1),
            get("n/a", 3),
            get("n/a", 4),
            get("?", 6)
        );
    }
    let _ = writeln!(out, "\n![{title}]({svg})\n");
    Ok(())
}

pub fn run(ctx: &Ctx) -> CommandResult {
    let reports = &ctx.cfg.paths.reports;
    let mut out = String::from("# semiso report\n\n");
    let mut sections = Vec::new();

    let eval_path = reports.join("eval.json");
    if eval_path.exists() {
        let text = std::fs::read_to_string(&eval_path)?;
        let eval: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", eval_path.display()))?;
        eval_section(&mut out, &eval);
        sections.push("evaluate");
    }
    for (stem, title) in [
        ("sweep_samples", "R² by samples per topic"),
        ("sweep_lengths", "R² by response length"),
    ] {
        let csv_path = reports.join(format!("{stem}.csv"));
        if csv_path.exists() {
            sweep_section(&mut out, title, &csv_path, &format!("{stem}.svg"))?;
            sections.push(stem);
        }
    }
    if sections.is_empty() {
        bail!("nothing to report in {}; run evaluate or sweep first", reports.display());
    }
    let path = reports.join("report.md");
    atomic_write(&path, out.as_bytes())?;
    Ok((json!({ "report": path, "sections": sections }), Vec::new()))
}
