use super::{EmbedError, HiddenStateError, Pooling};
use crate::kernel::Embedding;

/// Final-layer activations of one response: `tokens` rows of `dim` values.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenStateMatrix {
    tokens: usize,
    dim: usize,
    activations: Vec<f64>,
}

impl HiddenStateMatrix {
    /// `activations` is row-major, one row per token.
    pub fn new(tokens: usize, dim: usize, activations: Vec<f64>) -> Result<Self, HiddenStateError> {
        if tokens == 0 || dim == 0 {
            return Err(HiddenStateError::Shape(format!("{tokens}x{dim} matrix is empty")));
        }
        if activations.len() != tokens * dim {
            return Err(HiddenStateError::Shape(format!(
                "{} values for a {tokens}x{dim} matrix",
                activations.len()
            )));
        }
        if let Some(i) = activations.iter().position(|v| !v.is_finite()) {
            return Err(HiddenStateError::Shape(format!(
                "non-finite activation at token {}, column {}",
                i / dim,
                i % dim
            )));
        }
        Ok(Self {
            tokens,
            dim,
            activations,
        })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, HiddenStateError> {
        let tokens = rows.len();
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(HiddenStateError::Shape("ragged rows".into()));
        }
        Self::new(tokens, dim, rows.concat())
    }

    pub fn tokens(&self) -> usize {
        self.tokens
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.activations[t * self.dim..(t + 1) * self.dim]
    }

    pub fn activations(&self) -> &[f64] {
        &self.activations
    }
}

fn embedding(values: Vec<f64>) -> Embedding {
    Embedding::new(values).expect("matrix entries are finite and dim >= 1")
}

pub fn pool_last_token(h: &HiddenStateMatrix) -> Embedding {
    embedding(h.row(h.tokens - 1).to_vec())
}

/// Averages over tokens, keeping the hidden dimension.
pub fn pool_mean_token(h: &HiddenStateMatrix) -> Embedding {
    let mut sum = vec![0.0; h.dim];
    for t in 0..h.tokens {
        for (s, v) in sum.iter_mut().zip(h.row(t)) {
            *s += v;
        }
    }
    let l = h.tokens as f64;
    embedding(sum.into_iter().map(|s| s / l).collect())
}

pub fn pool(h: &HiddenStateMatrix, pooling: Pooling) -> Result<Embedding, EmbedError> {
    match pooling {
        Pooling::LastToken => Ok(pool_last_token(h)),
        Pooling::MeanToken => Ok(pool_mean_token(h)),
        Pooling::ProviderNative => Err(EmbedError::Unsupported(
            "provider-native pooling of a hidden-state matrix".into(),
        )),
    }
}
