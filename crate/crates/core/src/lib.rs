//! Semantic isotropy scoring for sampled long-form LLM responses.
//!
//! The crate is organised as a pipeline:
//!
//! * [`kernel`] turns a set of response embeddings into a cosine kernel and
//!   scores its angular dispersion (von Neumann entropy and alternatives).
//! * [`embed`] fetches embeddings from remote providers or exported hidden
//!   states, with pooling and a content-addressed cache.
//! * [`segment`] scores response factuality with a single oracle prompt per
//!   response (segmentation plus true/false verdicts).
//! * [`genpipe`] samples responses from a generator model and derives
//!   shorter length variants.
//! * [`eval`] regresses factuality on a measure and bootstraps the R².
//!
//! Data-parallel loops (bootstrap resamples, per-topic scoring) run on rayon
//! when the `parallel` feature is enabled and sequentially otherwise.

pub mod chat;
pub mod embed;
pub mod eval;
pub mod genpipe;
pub mod io;
pub mod kernel;
pub mod par;
pub mod plot;
pub mod retry;
pub mod segment;
pub mod synthetic;
pub mod topic;

pub use kernel::{
    cosine_kernel, eigen_symmetric, isotropy_score, normalize_rows, score_topic, von_neumann_entropy,
    CosineKernel, EigenSpectrum, Embedding, EmbeddingSet, IsotropyReport, KernelError, Measure,
};
