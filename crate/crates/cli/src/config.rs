use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use semiso_core::embed::ProviderSpec;
use semiso_core::genpipe::{GenerationConfig, DEFAULT_PROMPT};
use semiso_core::Measure;

fn default_temperature() -> f64 {
    0.7
}

fn default_n_samples() -> usize {
    10
}

fn default_word_target() -> usize {
    500
}

fn default_prompt() -> String {
    DEFAULT_PROMPT.to_string()
}

fn default_rate() -> f64 {
    2.0
}

fn default_n_boot() -> usize {
    1500
}

#[derive(Debug, Clone, Deserialize)]
pub struct GeneratorSection {
    pub generator_model: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default = "default_word_target")]
    pub word_target: usize,
    #[serde(default = "default_prompt")]
    pub prompt_template: String,
    #[serde(default)]
    pub seed_base: u64,
    /// Shorter variants derived from every response by truncation.
    #[serde(default)]
    pub length_targets: Vec<usize>,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub auth: Option<String>,
    #[serde(default = "default_rate")]
    pub rate: f64,
}

impl GeneratorSection {
    pub fn generation_config(&self) -> GenerationConfig {
        GenerationConfig {
            generator_model: self.generator_model.clone(),
            temperature: self.temperature,
            n_samples: self.n_samples,
            word_target: self.word_target,
            prompt_template: self.prompt_template.clone(),
            seed_base: self.seed_base,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct OracleSection {
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub auth: Option<String>,
    #[serde(default)]
    pub rate: Option<f64>,
    #[serde(default)]
    pub request_logprobs: bool,
}

#[derive(Debug, Clone, Deserialize)]
pub struct EvalSection {
    #[serde(default = "default_n_boot")]
    pub n_boot: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            n_boot: default_n_boot(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct Paths {
    pub topics: PathBuf,
    pub responses: PathBuf,
    pub embeddings_cache: PathBuf,
    pub scores: PathBuf,
    pub reports: PathBuf,
}

impl Paths {
    pub fn observations(&self) -> PathBuf {
        self.reports.join("observations.csv")
    }

    pub fn factuality(&self) -> PathBuf {
        self.reports.join("factuality.csv")
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub providers: Vec<ProviderSpec>,
    pub generator: GeneratorSection,
    pub oracle_model: String,
    #[serde(default)]
    pub oracle: OracleSection,
    pub measures: Vec<String>,
    #[serde(default)]
    pub eval: EvalSection,
    pub paths: Paths,
}

impl RunConfig {
    /// Reads a TOML config; relative paths are taken relative to its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.topics);
        fix(&mut self.paths.responses);
        fix(&mut self.paths.embeddings_cache);
        fix(&mut self.paths.scores);
        fix(&mut self.paths.reports);
        for p in &mut self.providers {
            if !p.is_remote() && Path::new(&p.endpoint).is_relative() {
                p.endpoint = base.join(&p.endpoint).display().to_string();
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.measures.is_empty() {
            bail!("config names no measures");
        }
        self.isotropy_measures()?;
        for p in &self.providers {
            p.validate()?;
        }
        let mut names: Vec<&str> = self.providers.iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            bail!("provider names must be unique");
        }
        self.generator.generation_config().validate()?;
        for t in &self.generator.length_targets {
            if *t == 0 {
                bail!("length targets must be positive");
            }
        }
        for (name, p) in [
            ("responses", &self.paths.responses),
            ("scores", &self.paths.scores),
            ("reports", &self.paths.reports),
            ("embeddings_cache", &self.paths.embeddings_cache),
        ] {
            if p.file_name().is_none() {
                bail!("paths.{name} ({}) has no file name", p.display());
            }
        }
        Ok(())
    }

    pub fn isotropy_measures(&self) -> Result<Vec<Measure>> {
        parse_measures(&self.measures)
    }

    pub fn provider(&self, name: Option<&str>) -> Result<&ProviderSpec> {
        match name {
            Some(n) => self
                .providers
                .iter()
                .find(|p| p.name == n)
                .with_context(|| format!("no provider named {n:?} in config")),
            None => match self.providers.as_slice() {
                [only] => Ok(only),
                [] => bail!("config has no providers"),
                _ => bail!("several providers configured; pick one with --provider"),
            },
        }
    }
}

pub fn parse_measures(names: &[String]) -> Result<Vec<Measure>> {
    names
        .iter()
        .map(|n| Measure::from_str(n).map_err(|e| anyhow::anyhow!("{e}")))
        .collect()
}
