use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    cosine_kernel, eigen_symmetric, normalize_rows, CosineKernel, EigenSpectrum, EmbeddingSet,
    KernelError,
};

/// Default eigenvalue floor for the log-determinant and inverse-trace.
pub const EIGEN_FLOOR: f64 = 1e-12;
/// Allowed deviation of a spectrum's sum from one.
pub const SPECTRUM_SUM_TOL: f64 = 1e-8;

/// An isotropy measure over a cosine kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    /// von Neumann entropy normalized by `ln N`; the isotropy score.
    Vne,
    Frobenius,
    LogDet,
    TraceInverse,
}

impl Measure {
    pub const ALL: [Measure; 4] = [
        Measure::Vne,
        Measure::Frobenius,
        Measure::LogDet,
        Measure::TraceInverse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Vne => "vne",
            Measure::Frobenius => "frobenius",
            Measure::LogDet => "log_det",
            Measure::TraceInverse => "trace_inverse",
        }
    }

    /// `+1` if larger values mean more dispersion, `-1` otherwise.
    pub fn orientation(self) -> f64 {
        match self {
            Measure::Vne | Measure::LogDet => 1.0,
            Measure::Frobenius | Measure::TraceInverse => -1.0,
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "vne" | "isotropy" | "score" => Ok(Measure::Vne),
            "frobenius" => Ok(Measure::Frobenius),
            "log_det" | "logdet" => Ok(Measure::LogDet),
            "trace_inverse" | "inverse_trace" => Ok(Measure::TraceInverse),
            other => Err(format!("unknown measure `{other}`")),
        }
    }
}

/// Floors and tolerances used to compute a report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureConfig {
    pub eigen_floor: f64,
    pub spectrum_sum_tol: f64,
    pub negative_eigen_slack_per_sample: f64,
    pub jacobi_off_diagonal_tol: f64,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        Self {
            eigen_floor: EIGEN_FLOOR,
            spectrum_sum_tol: SPECTRUM_SUM_TOL,
            negative_eigen_slack_per_sample: 1e-8,
            jacobi_off_diagonal_tol: 1e-12,
        }
    }
}

/// Per-topic isotropy scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotropyReport {
    pub n: usize,
    /// von Neumann entropy in nats.
    pub vne: f64,
    /// `vne / ln n`, in `[0, 1]`.
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frobenius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_det: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_inverse: Option<f64>,
    pub measure_config: MeasureConfig,
}

impl IsotropyReport {
    pub fn value(&self, measure: Measure) -> Option<f64> {
        match measure {
            Measure::Vne => Some(self.score),
            Measure::Frobenius => self.frobenius,
            Measure::LogDet => self.log_det,
            Measure::TraceInverse => self.trace_inverse,
        }
    }
}

fn check_spectrum(spectrum: &EigenSpectrum, sum_tol: f64) -> Result<(), KernelError> {
    if spectrum.is_empty() {
        return Err(KernelError::InvalidSpectrum("empty spectrum".into()));
    }
    if let Some(l) = spectrum.eigenvalues().iter().find(|l| l.is_nan() || **l < 0.0) {
        return Err(KernelError::InvalidSpectrum(format!("eigenvalue {l} is negative")));
    }
    let sum: f64 = spectrum.eigenvalues().iter().sum();
    if (sum - 1.0).abs() > sum_tol {
        return Err(KernelError::InvalidSpectrum(format!("eigenvalues sum to {sum}")));
    }
    Ok(())
}

/// `−Σ λ ln λ` in nats, with `0 · ln 0 = 0`.
pub fn von_neumann_entropy(spectrum: &EigenSpectrum) -> Result<f64, KernelError> {
    check_spectrum(spectrum, SPECTRUM_SUM_TOL)?;
    let h: f64 = spectrum
        .eigenvalues()
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| -l * l.ln())
        .sum();
    Ok(h.max(0.0))
}

fn score_from_entropy(vne: f64, n: usize) -> f64 {
    vne / (n as f64).ln()
}

/// The isotropy score `vNE(K) / ln N`: 0 for parallel embeddings, 1 for
/// mutually orthogonal ones.
pub fn isotropy_score(kernel: &CosineKernel) -> Result<f64, KernelError> {
    if kernel.n() < 2 {
        return Err(KernelError::TooFewSamples(kernel.n()));
    }
    let spectrum = eigen_symmetric(kernel)?;
    Ok(score_from_entropy(von_neumann_entropy(&spectrum)?, kernel.n()))
}

/// Frobenius norm of the raw kernel, in `[√N, N]`.
pub fn frobenius_measure(kernel: &CosineKernel) -> f64 {
    kernel.entries().iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn log_det_from_spectrum(spectrum: &EigenSpectrum, floor: f64) -> f64 {
    spectrum.raw_eigenvalues().map(|l| l.max(floor).ln()).sum()
}

fn trace_inverse_from_spectrum(spectrum: &EigenSpectrum, floor: f64) -> f64 {
    spectrum.raw_eigenvalues().map(|l| 1.0 / l.max(floor)).sum()
}

/// `Σ ln max(λ, floor)` over the raw kernel eigenvalues.
pub fn log_det_measure(kernel: &CosineKernel, floor: f64) -> Result<f64, KernelError> {
    Ok(log_det_from_spectrum(&eigen_symmetric(kernel)?, floor))
}

/// `trace(K⁻¹)` with eigenvalues floored at `floor`.
pub fn trace_inverse_measure(kernel: &CosineKernel, floor: f64) -> Result<f64, KernelError> {
    Ok(trace_inverse_from_spectrum(&eigen_symmetric(kernel)?, floor))
}

/// Scores one topic's embeddings under the requested measures, using the
/// default floors. The entropy and score are always filled in.
pub fn score_topic(set: &EmbeddingSet, measures: &[Measure]) -> Result<IsotropyReport, KernelError> {
    score_topic_with(set, measures, &MeasureConfig::default())
}

pub fn score_topic_with(
    set: &EmbeddingSet,
    measures: &[Measure],
    config: &MeasureConfig,
) -> Result<IsotropyReport, KernelError> {
    let n = set.len();
    if n < 2 {
        return Err(KernelError::TooFewSamples(n));
    }
    let unit = normalize_rows(set)?;
    let kernel = cosine_kernel(&unit)?;
    report_for_kernel(&kernel, measures, config)
}

/// Same as [`score_topic_with`] for an already-built kernel.
pub fn report_for_kernel(
    kernel: &CosineKernel,
    measures: &[Measure],
    config: &MeasureConfig,
) -> Result<IsotropyReport, KernelError> {
    let n = kernel.n();
    if n < 2 {
        return Err(KernelError::TooFewSamples(n));
    }
    let spectrum = eigen_symmetric(kernel)?;
    check_spectrum(&spectrum, config.spectrum_sum_tol)?;
    let vne = von_neumann_entropy(&spectrum)?;
    let wants = |m| measures.contains(&m);
    Ok(IsotropyReport {
        n,
        vne,
        score: score_from_entropy(vne, n),
        frobenius: wants(Measure::Frobenius).then(|| frobenius_measure(kernel)),
        log_det: wants(Measure::LogDet).then(|| log_det_from_spectrum(&spectrum, config.eigen_floor)),
        trace_inverse: wants(Measure::TraceInverse)
            .then(|| trace_inverse_from_spectrum(&spectrum, config.eigen_floor)),
        measure_config: *config,
    })
}
