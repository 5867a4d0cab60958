use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context};
use serde::Serialize;
use serde_json::json;

use semiso_core::eval::{
    compare_measures, BootstrapConfig, Comparison, EvalError, EvalResult, ObservationRow, TopicObservation,
    RNG_FAMILY,
};
use semiso_core::io::atomic_write;
use semiso_core::plot::{bar_chart_svg, Bar};

use super::CommandResult;
use crate::data::{read_observation_rows, write_csv};
use crate::Ctx;

#[derive(Serialize)]
struct BarRow<'a> {
    measure: &'a str,
    r2: f64,
    boot_mean: f64,
    boot_sd: f64,
    n_topics: usize,
}

/// Rows for one length variant. Rows without a variant always qualify.
pub fn select_length(rows: &[ObservationRow], length: usize) -> Vec<&ObservationRow> {
    rows.iter()
        .filter(|r| r.length_variant.is_none_or(|l| l == length))
        .collect()
}

fn degenerate(obs: &BTreeMap<String, Vec<TopicObservation>>, cfg: &BootstrapConfig) -> Comparison {
    let results = obs
        .iter()
        .map(|(m, o)| EvalResult {
            measure_name: m.clone(),
            r2: 0.0,
            slope: 0.0,
            intercept: o.first().map_or(0.0, |x| x.y),
            boot_mean: 0.0,
            boot_sd: 0.0,
            n_topics: o.len(),
            n_boot: cfg.n_boot,
            seed: cfg.seed,
            skipped_resamples: 0,
            redrawn_resamples: 0,
            rng: RNG_FAMILY.to_string(),
            n_samples_used: None,
            length_variant: None,
        })
        .collect();
    Comparison {
        results,
        deltas: Vec::new(),
    }
}

pub fn run(ctx: &Ctx, observations: Option<PathBuf>, length: Option<usize>) -> CommandResult {
    let reports = &ctx.cfg.paths.reports;
    let path = observations.unwrap_or_else(|| ctx.cfg.paths.observations());
    let rows = read_observation_rows(&path)?;
    if rows.is_empty() {
        bail!("no observations in {}", path.display());
    }
    let length = length.unwrap_or(ctx.cfg.generator.word_target);
    let mut by_measure = ObservationRow::group_by_measure(select_length(&rows, length));
    if let Some(wanted) = &ctx.global.measures {
        for m in wanted {
            if !by_measure.contains_key(m) {
                bail!("measure {m:?} has no observations with factuality at length {length}");
            }
        }
        by_measure.retain(|m, _| wanted.contains(m));
    }
    if by_measure.is_empty() {
        bail!("no observations with factuality at length {length} in {}", path.display());
    }

    let cfg = BootstrapConfig {
        n_boot: ctx.n_boot(),
        seed: ctx.seed(),
        exec: ctx.exec,
    };
    let mut warnings = Vec::new();
    let mut comparison = match compare_measures(&by_measure, &cfg) {
        Ok(c) => c,
        Err(EvalError::DegenerateResponse) => {
            let w = "factuality is constant across topics; R² reported as 0".to_string();
            log::warn!("{w}");
            warnings.push(w);
            degenerate(&by_measure, &cfg)
        }
        Err(e) => return Err(e).context("bootstrapping R²"),
    };
    for r in &mut comparison.results {
        r.length_variant = Some(length);
        if r.skipped_resamples > 0 {
            warnings.push(format!("{}: {} resamples skipped as degenerate", r.measure_name, r.skipped_resamples));
        }
    }

    let report = json!({
        "results": comparison.results,
        "deltas": comparison.deltas,
        "config": {
            "seed": cfg.seed,
            "n_boot": cfg.n_boot,
            "rng": RNG_FAMILY,
            "length_variant": length,
        },
        "warnings": warnings,
    });
    let mut body = serde_json::to_vec_pretty(&report)?;
    body.push(b'\n');
    atomic_write(&reports.join("eval.json"), &body)?;

    write_csv(
        &reports.join("bars.csv"),
        comparison.results.iter().map(|r| BarRow {
            measure: &r.measure_name,
            r2: r.r2,
            boot_mean: r.boot_mean,
            boot_sd: r.boot_sd,
            n_topics: r.n_topics,
        }),
    )?;
    let bars: Vec<Bar> = comparison
        .results
        .iter()
        .map(|r| Bar {
            label: r.measure_name.clone(),
            mean: r.boot_mean,
            sd: r.boot_sd,
        })
        .collect();
    let svg = bar_chart_svg(&format!("Bootstrap R² at length {length}"), "R²", &bars);
    atomic_write(&reports.join("bars.svg"), svg.as_bytes())?;

    let ranking: Vec<_> = comparison
        .results
        .iter()
        .map(|r| json!({ "measure": r.measure_name, "r2": r.r2, "boot_mean": r.boot_mean, "boot_sd": r.boot_sd }))
        .collect();
    Ok((
        json!({
            "length_variant": length,
            "ranking": ranking,
            "warnings": warnings.len(),
            "report": reports.join("eval.json"),
        }),
        Vec::new(),
    ))
}
