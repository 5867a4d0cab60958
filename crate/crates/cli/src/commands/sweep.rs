use std::collections::BTreeMap;

use anyhow::{bail, Context};
use serde::Serialize;
use serde_json::json;

use semiso_core::eval::{bootstrap_r2, sweep_cells, BootstrapConfig, EvalResult, ObservationRow};
use semiso_core::io::atomic_write;
use semiso_core::kernel::EmbeddingSet;
use semiso_core::plot::{line_chart_svg, Series};

use super::{embed_client, CommandResult};
use crate::config::parse_measures;
use crate::data::{group_responses, read_factuality, read_observation_rows, read_responses, write_csv};
use crate::Ctx;

#[derive(Debug, Serialize)]
struct CellRow {
    measure: String,
    value: usize,
    r2: Option<f64>,
    boot_mean: Option<f64>,
    boot_sd: Option<f64>,
    n_topics: Option<usize>,
    status: String,
}

impl CellRow {
    fn new(measure: &str, value: usize, result: Result<EvalResult, String>) -> Self {
        match result {
            Ok(r) => CellRow {
                measure: measure.to_string(),
                value,
                r2: Some(r.r2),
                boot_mean: Some(r.boot_mean),
                boot_sd: Some(r.boot_sd),
                n_topics: Some(r.n_topics),
                status: "ok".into(),
            },
            Err(e) => CellRow {
                measure: measure.to_string(),
                value,
                r2: None,
                boot_mean: None,
                boot_sd: None,
                n_topics: None,
                status: format!("missing: {e}"),
            },
        }
    }
}

/// `a..b` (inclusive) or a comma list.
pub fn parse_n_values(s: &str) -> anyhow::Result<Vec<usize>> {
    let s = s.trim();
    let values: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().with_context(|| format!("bad range start in {s:?}"))?;
        let b: usize = b.trim().trim_start_matches('=').parse().with_context(|| format!("bad range end in {s:?}"))?;
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|p| p.trim().parse().with_context(|| format!("bad sample count {p:?}")))
            .collect::<anyhow::Result<_>>()?
    };
    if values.is_empty() {
        bail!("no sample counts in {s:?}");
    }
    if let Some(&n) = values.iter().find(|&&n| n < 2) {
        bail!("sample count {n} is below 2");
    }
    Ok(values)
}

fn write_outputs(ctx: &Ctx, stem: &str, x_label: &str, cells: &[CellRow]) -> anyhow::Result<()> {
    let reports = &ctx.cfg.paths.reports;
    write_csv(&reports.join(format!("{stem}.csv")), cells)?;
    let mut series: BTreeMap<&str, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for c in cells {
        let points = series.entry(&c.measure).or_default();
        if let (Some(m), Some(sd)) = (c.boot_mean, c.boot_sd) {
            points.push((c.value as f64, m, sd));
        }
    }
    let series: Vec<Series> = series
        .into_iter()
        .map(|(name, points)| Series {
            name: name.to_string(),
            points,
        })
        .collect();
    let svg = line_chart_svg(&format!("Bootstrap R² by {x_label}"), x_label, "R²", &series);
    atomic_write(&reports.join(format!("{stem}.svg")), svg.as_bytes())?;
    Ok(())
}

fn sample_sweep(ctx: &Ctx, n_values: &[usize], cfg: &BootstrapConfig) -> anyhow::Result<(Vec<CellRow>, Vec<String>)> {
    let paths = &ctx.cfg.paths;
    let measures = parse_measures(&ctx.measure_names())?;
    let base = ctx.cfg.generator.word_target;
    let client = embed_client(ctx)?;
    let records = read_responses(&paths.responses)?;
    let factuality = read_factuality(&paths.factuality())?;
    let mut warnings = Vec::new();
    let mut embeddings = BTreeMap::new();
    let mut phis = BTreeMap::new();
    for ((topic, lv), recs) in group_responses(&records) {
        if lv != base {
            continue;
        }
        let Some(f) = factuality.get(&(topic.clone(), lv)) else {
            warnings.push(format!("topic {topic} has no factuality score; left out"));
            continue;
        };
        let texts: Vec<String> = recs.iter().map(|r| r.text.clone()).collect();
        let set = EmbeddingSet::new(client.embed_text(&texts)?)?;
        phis.insert(topic.clone(), f.mean_phi);
        embeddings.insert(topic, set);
    }
    if embeddings.is_empty() {
        bail!("no topics with both embeddings and factuality at length {base}");
    }
    let mut cells = Vec::new();
    for m in measures {
        for c in sweep_cells(&embeddings, &phis, n_values, m, cfg) {
            cells.push(CellRow::new(m.name(), c.n, c.result));
        }
    }
    Ok((cells, warnings))
}

fn length_sweep(ctx: &Ctx, lengths: &[usize], cfg: &BootstrapConfig) -> anyhow::Result<Vec<CellRow>> {
    let path = ctx.cfg.paths.observations();
    let rows = read_observation_rows(&path)?;
    if rows.is_empty() {
        bail!("no observations in {}", path.display());
    }
    let mut cells = Vec::new();
    for name in ctx.measure_names() {
        for &l in lengths {
            let obs: Vec<_> = rows
                .iter()
                .filter(|r| r.measure == name && r.length_variant == Some(l))
                .filter_map(ObservationRow::to_observation)
                .collect();
            let result = if obs.is_empty() {
                Err(format!("no observations at length {l}"))
            } else {
                bootstrap_r2(&obs, cfg)
                    .map(|mut r| {
                        r.length_variant = Some(l);
                        r
                    })
                    .map_err(|e| e.to_string())
            };
            cells.push(CellRow::new(&name, l, result));
        }
    }
    Ok(cells)
}

pub fn run(ctx: &Ctx, n_values: Option<String>, lengths: Option<Vec<usize>>) -> CommandResult {
    if n_values.is_none() && lengths.is_none() {
        bail!("give --n-values, --lengths, or both");
    }
    let cfg = BootstrapConfig {
        n_boot: ctx.n_boot(),
        seed: ctx.seed(),
        exec: ctx.exec,
    };
    let mut summary = serde_json::Map::new();
    if let Some(spec) = n_values {
        let ns = parse_n_values(&spec)?;
        let (cells, warnings) = sample_sweep(ctx, &ns, &cfg)?;
        write_outputs(ctx, "sweep_samples", "samples per topic", &cells)?;
        let missing: Vec<_> = cells.iter().filter(|c| c.r2.is_none()).map(|c| format!("{}@{}", c.measure, c.value)).collect();
        summary.insert(
            "samples".into(),
            json!({ "cells": cells.len(), "missing": missing, "warnings": warnings }),
        );
    }
    if let Some(lengths) = lengths {
        let cells = length_sweep(ctx, &lengths, &cfg)?;
        write_outputs(ctx, "sweep_lengths", "response length (words)", &cells)?;
        let missing: Vec<_> = cells.iter().filter(|c| c.r2.is_none()).map(|c| format!("{}@{}", c.measure, c.value)).collect();
        summary.insert("lengths".into(), json!({ "cells": cells.len(), "missing": missing }));
    }
    Ok((serde_json::Value::Object(summary), Vec::new()))
}
