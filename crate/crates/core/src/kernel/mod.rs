//! Cosine kernels over response embeddings and the isotropy measures
//! computed from their spectra.
//!
//! The pipeline for one topic is `normalize_rows -> cosine_kernel ->
//! eigen_symmetric -> measure`. [`score_topic`] runs all of it.

mod jacobi;
mod measures;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use jacobi::{eigen_decompose, eigen_symmetric, EigenDecomposition};
pub use measures::{
    frobenius_measure, isotropy_score, log_det_measure, report_for_kernel, score_topic,
    score_topic_with,
    trace_inverse_measure, von_neumann_entropy, IsotropyReport, Measure, MeasureConfig,
};

/// Rows with a norm at or below this are rejected by [`normalize_rows`].
pub const ZERO_NORM: f64 = 1e-12;
/// Tolerance on `|‖e‖ − 1|` for a set flagged as normalized.
pub const UNIT_NORM_TOL: f64 = 1e-9;
/// Maximum asymmetry `|K[i][j] − K[j][i]|` accepted in a kernel.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Tolerance on unit diagonal and on the `[-1, 1]` entry range.
pub const ENTRY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("embedding set is empty")]
    EmptySet,
    #[error("embedding has zero dimensions")]
    ZeroDim,
    #[error("row {index} has dimension {found}, expected {expected}")]
    DimMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in row {row} at column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("embedding {0} has zero norm")]
    ZeroNormEmbedding(usize),
    #[error("kernel is not symmetric at ({i}, {j}): difference {diff:e}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },
    #[error("kernel is invalid: {0}")]
    InvalidKernel(String),
    #[error("kernel is indefinite: eigenvalue {eigenvalue:e} of the trace-normalized kernel")]
    IndefiniteKernel { eigenvalue: f64 },
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),
    #[error("isotropy needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("eigen solver did not converge after {sweeps} sweeps (off-diagonal mass {off:e})")]
    NoConvergence { sweeps: usize, off: f64 },
}

/// A single response embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self, KernelError> {
        if values.is_empty() {
            return Err(KernelError::ZeroDim);
        }
        if let Some(col) = values.iter().position(|v| !v.is_finite()) {
            return Err(KernelError::NonFinite { row: 0, col });
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl TryFrom<Vec<f64>> for Embedding {
    type Error = KernelError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Embedding::new(values)
    }
}

impl From<Embedding> for Vec<f64> {
    fn from(e: Embedding) -> Self {
        e.0
    }
}

/// The N embeddings sampled for one topic, all of equal dimension.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingSet {
    rows: Vec<Embedding>,
    normalized: bool,
}

impl EmbeddingSet {
    pub fn new(rows: Vec<Embedding>) -> Result<Self, KernelError> {
        let first = rows.first().ok_or(KernelError::EmptySet)?;
        let dim = first.dim();
        for (index, row) in rows.iter().enumerate() {
            if row.dim() != dim {
                return Err(KernelError::DimMismatch {
                    index,
                    expected: dim,
                    found: row.dim(),
                });
            }
        }
        Ok(Self {
            rows,
            normalized: false,
        })
    }

    /// Builds a set from raw vectors, checking finiteness per row.
    pub fn from_vecs(rows: Vec<Vec<f64>>) -> Result<Self, KernelError> {
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(row, v)| {
                Embedding::new(v).map_err(|e| match e {
                    KernelError::NonFinite { col, .. } => KernelError::NonFinite { row, col },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(rows)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows[0].dim()
    }

    pub fn rows(&self) -> &[Embedding] {
        &self.rows
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// The first `n` rows, in stored order.
    pub fn take(&self, n: usize) -> Result<Self, KernelError> {
        let rows = self.rows.iter().take(n).cloned().collect();
        let mut out = Self::new(rows)?;
        out.normalized = self.normalized;
        Ok(out)
    }
}

/// Scales every row to unit Euclidean norm, preserving order.
pub fn normalize_rows(set: &EmbeddingSet) -> Result<EmbeddingSet, KernelError> {
    let rows = set
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let norm = row.norm();
            if norm <= ZERO_NORM {
                return Err(KernelError::ZeroNormEmbedding(i));
            }
            Ok(Embedding(row.0.iter().map(|v| v / norm).collect()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EmbeddingSet {
        rows,
        normalized: true,
    })
}

/// Symmetric matrix of pairwise cosine similarities with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineKernel {
    n: usize,
    entries: Vec<f64>,
}

impl CosineKernel {
    /// Wraps an explicit matrix, checking the symmetry, diagonal and range
    /// invariants. Positive semidefiniteness is checked by the eigen solver.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, KernelError> {
        let n = rows.len();
        if n == 0 {
            return Err(KernelError::EmptySet);
        }
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(KernelError::InvalidKernel(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            entries.extend_from_slice(row);
        }
        let kernel = Self { n, entries };
        kernel.validate()?;
        Ok(kernel)
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self { n, entries }
    }

    /// The rank-one kernel of `n` parallel embeddings.
    pub fn ones(n: usize) -> Self {
        Self {
            n,
            entries: vec![1.0; n * n],
        }
    }

    fn validate(&self) -> Result<(), KernelError> {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                let v = self.get(i, j);
                if !v.is_finite() {
                    return Err(KernelError::NonFinite { row: i, col: j });
                }
                if v.abs() > 1.0 + ENTRY_TOL {
                    return Err(KernelError::InvalidKernel(format!(
                        "entry ({i}, {j}) = {v} outside [-1, 1]"
                    )));
                }
                let diff = (v - self.get(j, i)).abs();
                if diff > SYMMETRY_TOL {
                    return Err(KernelError::NotSymmetric { i, j, diff });
                }
            }
            if (self.get(i, i) - 1.0).abs() > ENTRY_TOL {
                return Err(KernelError::InvalidKernel(format!(
                    "diagonal entry {i} = {} is not 1",
                    self.get(i, i)
                )));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Applies a row/column permutation: `out[i][j] = self[perm[i]][perm[j]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = self.get(perm[i], perm[j]);
            }
        }
        Self { n, entries }
    }
}

impl Serialize for CosineKernel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CosineKernel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        CosineKernel::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Gram matrix of the row-normalized embeddings. Rows are normalized first
/// unless the set is already flagged as normalized.
pub fn cosine_kernel(set: &EmbeddingSet) -> Result<CosineKernel, KernelError> {
    let owned;
    let unit = if set.normalized {
        set
    } else {
        owned = normalize_rows(set)?;
        &owned
    };
    let n = unit.len();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        let a = unit.rows[i].values();
        entries[i * n + i] = 1.0;
        for j in (i + 1)..n {
            let b = unit.rows[j].values();
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let dot = dot.clamp(-1.0, 1.0);
            entries[i * n + j] = dot;
            entries[j * n + i] = dot;
        }
    }
    Ok(CosineKernel { n, entries })
}

/// Eigenvalues of a trace-normalized kernel, sorted descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSpectrum {
    eigenvalues: Vec<f64>,
}

impl EigenSpectrum {
    /// Wraps eigenvalues as given, sorting them descending. Validity is
    /// checked where the spectrum is consumed.
    pub fn new(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        Self { eigenvalues }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Eigenvalues of the raw kernel, `N · λ̄`.
    pub fn raw_eigenvalues(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.eigenvalues.len() as f64;
        self.eigenvalues.iter().map(move |l| l * n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(rows: &[&[f64]]) -> EmbeddingSet {
        EmbeddingSet::from_vecs(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn normalize_three_four() {
        let out = normalize_rows(&set(&[&[3.0, 4.0]])).unwrap();
        assert!(out.is_normalized());
        let v = out.rows()[0].values();
        assert!((v[0] - 0.6).abs() < 1e-15);
        assert!((v[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn normalize_unit_rows_unchanged() {
        let input = set(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let out = normalize_rows(&input).unwrap();
        assert_eq!(out.rows(), input.rows());
    }

    #[test]
    fn normalize_zero_row_reports_index() {
        assert_eq!(
            normalize_rows(&set(&[&[0.0, 0.0]])),
            Err(KernelError::ZeroNormEmbedding(0))
        );
        assert_eq!(
            normalize_rows(&set(&[&[1.0, 2.0], &[1e-13, 0.0]])),
            Err(KernelError::ZeroNormEmbedding(1))
        );
    }

    #[test]
    fn set_rejects_ragged_and_nonfinite() {
        assert!(matches!(
            EmbeddingSet::from_vecs(vec![vec![1.0, 2.0], vec![1.0]]),
            Err(KernelError::DimMismatch { index: 1, .. })
        ));
        assert_eq!(
            EmbeddingSet::from_vecs(vec![vec![1.0], vec![f64::NAN]]),
            Err(KernelError::NonFinite { row: 1, col: 0 })
        );
        assert_eq!(EmbeddingSet::from_vecs(vec![]), Err(KernelError::EmptySet));
        assert_eq!(EmbeddingSet::from_vecs(vec![vec![]]), Err(KernelError::ZeroDim));
    }

    #[test]
    fn kernel_parallel_and_orthogonal() {
        let k = cosine_kernel(&set(&[&[0.6, 0.8], &[0.6, 0.8]])).unwrap();
        assert_eq!(k.to_rows(), vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
        let k = cosine_kernel(&set(&[&[1.0, 0.0], &[0.0, 1.0]])).unwrap();
        assert_eq!(k.to_rows(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn kernel_three_four_pair() {
        let k = cosine_kernel(&set(&[&[3.0, 4.0], &[4.0, 3.0]])).unwrap();
        assert!((k.get(0, 1) - 0.96).abs() < 1e-15);
        assert_eq!(k.get(0, 1), k.get(1, 0));
        assert_eq!(k.get(0, 0), 1.0);
    }

    #[test]
    fn kernel_propagates_zero_norm() {
        assert_eq!(
            cosine_kernel(&set(&[&[1.0, 0.0], &[0.0, 0.0]])),
            Err(KernelError::ZeroNormEmbedding(1))
        );
    }

    #[test]
    fn from_rows_validates() {
        assert!(matches!(
            CosineKernel::from_rows(&[vec![1.0, 0.5], vec![0.4, 1.0]]),
            Err(KernelError::NotSymmetric { .. })
        ));
        assert!(matches!(
            CosineKernel::from_rows(&[vec![0.9, 0.0], vec![0.0, 1.0]]),
            Err(KernelError::InvalidKernel(_))
        ));
        assert!(matches!(
            CosineKernel::from_rows(&[vec![1.0, 1.5], vec![1.5, 1.0]]),
            Err(KernelError::InvalidKernel(_))
        ));
    }

    #[test]
    fn kernel_json_round_trip() {
        let k = CosineKernel::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let json = serde_json::to_string(&k).unwrap();
        assert_eq!(json, "[[1.0,0.5],[0.5,1.0]]");
        let back: CosineKernel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, k);
    }
}
