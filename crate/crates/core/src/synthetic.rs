//! Seeded synthetic embedding clouds for calibration and benchmarks.
//!
//! Directions are drawn from a von Mises–Fisher distribution with Wood's
//! rejection sampler, so the concentration `kappa` controls how tightly a
//! topic's responses cluster on the sphere.

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::kernel::EmbeddingSet;

/// A uniformly random unit vector in `dim` dimensions.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Sampler for the von Mises–Fisher distribution on the unit sphere in
/// `R^dim` around a unit `mean` direction.
#[derive(Debug, Clone)]
pub struct VonMisesFisher {
    mean: Vec<f64>,
    kappa: f64,
    b: f64,
    x0: f64,
    c: f64,
    beta: Beta<f64>,
}

impl VonMisesFisher {
    /// `mean` is normalized here; `dim = mean.len()` must be at least 2 and
    /// `kappa` positive.
    pub fn new(mean: &[f64], kappa: f64) -> Self {
        let dim = mean.len();
        assert!(dim >= 2, "vMF needs at least 2 dimensions");
        assert!(kappa > 0.0 && kappa.is_finite(), "kappa must be positive");
        let norm = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mean: Vec<f64> = mean.iter().map(|x| x / norm).collect();
        let m1 = (dim - 1) as f64;
        let b = (-2.0 * kappa + (4.0 * kappa * kappa + m1 * m1).sqrt()) / m1;
        let x0 = (1.0 - b) / (1.0 + b);
        let c = kappa * x0 + m1 * (1.0 - x0 * x0).ln();
        let beta = Beta::new(m1 / 2.0, m1 / 2.0).expect("valid beta parameters");
        Self {
            mean,
            kappa,
            b,
            x0,
            c,
            beta,
        }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Draws the cosine `w` between a sample and the mean direction.
    fn sample_cosine<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let m1 = (self.mean.len() - 1) as f64;
        loop {
            let z = self.beta.sample(rng);
            let w = (1.0 - (1.0 + self.b) * z) / (1.0 - (1.0 - self.b) * z);
            let u: f64 = rng.random();
            if self.kappa * w + m1 * (1.0 - self.x0 * w).ln() - self.c >= u.ln() {
                return w;
            }
        }
    }
}

impl Distribution<Vec<f64>> for VonMisesFisher {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let w = self.sample_cosine(rng);
        let dim = self.mean.len();
        // Tangent direction: a Gaussian vector with the mean component removed.
        let tangent = loop {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let along: f64 = v.iter().zip(&self.mean).map(|(a, b)| a * b).sum();
            for (x, m) in v.iter_mut().zip(&self.mean) {
                *x -= along * m;
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break v.into_iter().map(|x| x / norm).collect::<Vec<_>>();
            }
        };
        let r = (1.0 - w * w).max(0.0).sqrt();
        self.mean
            .iter()
            .zip(&tangent)
            .map(|(m, t)| w * m + r * t)
            .collect()
    }
}

/// `n` vMF samples in `dim` dimensions around a random mean direction.
pub fn vmf_cloud<R: Rng + ?Sized>(rng: &mut R, n: usize, dim: usize, kappa: f64) -> EmbeddingSet {
    let mean = random_unit_vector(rng, dim);
    let vmf = VonMisesFisher::new(&mean, kappa);
    let rows = (0..n).map(|_| vmf.sample(rng)).collect();
    EmbeddingSet::from_vecs(rows).expect("vMF samples are finite and non-empty")
}

/// A synthetic topic: its concentration, embeddings and factuality signal.
#[derive(Debug, Clone)]
pub struct SyntheticTopic {
    pub id: String,
    pub kappa: f64,
    pub embeddings: EmbeddingSet,
    pub phi: f64,
}

/// Parameters for [`synthetic_topics`].
#[derive(Debug, Clone, Copy)]
pub struct SyntheticSuite {
    pub topics: usize,
    pub samples: usize,
    pub dim: usize,
    pub kappa_min: f64,
    pub kappa_max: f64,
    /// Standard deviation of the Gaussian noise added to factuality.
    pub phi_noise: f64,
}

impl Default for SyntheticSuite {
    fn default() -> Self {
        Self {
            topics: 200,
            samples: 10,
            dim: 64,
            kappa_min: 1.0,
            kappa_max: 100.0,
            phi_noise: 0.1,
        }
    }
}

/// Topics whose `ln kappa` is uniform over `[ln kappa_min, ln kappa_max]`.
///
/// Factuality rises linearly with `ln kappa` (concentrated topics are the
/// factual ones) plus Gaussian noise, clamped to `[0, 1]`.
pub fn synthetic_topics<R: Rng + ?Sized>(rng: &mut R, suite: &SyntheticSuite) -> Vec<SyntheticTopic> {
    let (lo, hi) = (suite.kappa_min.ln(), suite.kappa_max.ln());
    (0..suite.topics)
        .map(|t| {
            let u: f64 = rng.random();
            let log_kappa = lo + (hi - lo) * u;
            let kappa = log_kappa.exp();
            let embeddings = vmf_cloud(rng, suite.samples, suite.dim, kappa);
            let noise: f64 = rng.sample::<f64, _>(StandardNormal) * suite.phi_noise;
            let signal = if hi > lo { (log_kappa - lo) / (hi - lo) } else { 0.5 };
            let phi = (0.2 + 0.6 * signal + noise).clamp(0.0, 1.0);
            SyntheticTopic {
                id: format!("topic-{t:04}"),
                kappa,
                embeddings,
                phi,
            }
        })
        .collect()
}
