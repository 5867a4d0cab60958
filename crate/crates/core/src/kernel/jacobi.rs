//! Cyclic Jacobi eigen solver for the small dense symmetric matrices
//! produced by [`cosine_kernel`](super::cosine_kernel).

use super::{CosineKernel, EigenSpectrum, KernelError, SYMMETRY_TOL};

/// Sweeps stop once the off-diagonal Frobenius mass drops below this.
const OFF_DIAGONAL_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;
/// Per-sample slack for negative eigenvalues caused by rounding.
const NEGATIVE_SLACK: f64 = 1e-8;

/// Eigenpairs of the trace-normalized kernel `K / trace(K)`.
///
/// `vectors` is row-major `n × n`; column `k` is the unit eigenvector for
/// `values[k]`. Values are sorted descending and negative rounding noise is
/// clamped to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub n: usize,
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
}

impl EigenDecomposition {
    #[inline]
    pub fn vector(&self, row: usize, col: usize) -> f64 {
        self.vectors[row * self.n + col]
    }

    /// `V · diag(f(λ)) · Vᵀ`, row-major.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let n = self.n;
        let mapped: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let s: f64 = (0..n)
                    .map(|k| self.vector(i, k) * mapped[k] * self.vector(j, k))
                    .sum();
                out[i * n + j] = s;
                out[j * n + i] = s;
            }
        }
        out
    }

    pub fn spectrum(&self) -> EigenSpectrum {
        EigenSpectrum::new(self.values.clone())
    }
}

/// Eigenvalues of the trace-normalized kernel, sorted descending.
pub fn eigen_symmetric(kernel: &CosineKernel) -> Result<EigenSpectrum, KernelError> {
    eigen_decompose(kernel).map(|d| d.spectrum())
}

/// Full eigen decomposition of `K / trace(K)`.
pub fn eigen_decompose(kernel: &CosineKernel) -> Result<EigenDecomposition, KernelError> {
    let n = kernel.n();
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = (kernel.get(i, j) - kernel.get(j, i)).abs();
            if diff > SYMMETRY_TOL {
                return Err(KernelError::NotSymmetric { i, j, diff });
            }
        }
    }
    let trace = kernel.trace();
    if trace.is_nan() || trace <= 0.0 {
        return Err(KernelError::InvalidKernel(format!("trace {trace} is not positive")));
    }

    let mut a: Vec<f64> = kernel.entries().iter().map(|v| v / trace).collect();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    jacobi_sweeps(n, &mut a, &mut v)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[y * n + y].total_cmp(&a[x * n + x]));

    let floor = -NEGATIVE_SLACK * n as f64;
    let mut values = Vec::with_capacity(n);
    let mut vectors = vec![0.0; n * n];
    for (col, &k) in order.iter().enumerate() {
        let lambda = a[k * n + k];
        if lambda < floor {
            return Err(KernelError::IndefiniteKernel { eigenvalue: lambda });
        }
        values.push(lambda.max(0.0));
        for row in 0..n {
            vectors[row * n + col] = v[row * n + k];
        }
    }
    Ok(EigenDecomposition { n, values, vectors })
}

fn off_diagonal_mass(n: usize, a: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i * n + j] * a[i * n + j];
            }
        }
    }
    s.sqrt()
}

fn jacobi_sweeps(n: usize, a: &mut [f64], v: &mut [f64]) -> Result<(), KernelError> {
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_mass(n, a) < OFF_DIAGONAL_TOL {
            return Ok(());
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = if theta.is_infinite() {
                    0.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(n, a, v, p, q, c, s);
            }
        }
    }
    let off = off_diagonal_mass(n, a);
    if off < OFF_DIAGONAL_TOL {
        Ok(())
    } else {
        Err(KernelError::NoConvergence {
            sweeps: MAX_SWEEPS,
            off,
        })
    }
}

/// `A ← Jᵀ A J`, `V ← V J` for the plane rotation in (p, q).
fn rotate(n: usize, a: &mut [f64], v: &mut [f64], p: usize, q: usize, c: f64, s: f64) {
    for k in 0..n {
        let akp = a[k * n + p];
        let akq = a[k * n + q];
        a[k * n + p] = c * akp - s * akq;
        a[k * n + q] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[p * n + k];
        let aqk = a[q * n + k];
        a[p * n + k] = c * apk - s * aqk;
        a[q * n + k] = s * apk + c * aqk;
    }
    a[p * n + q] = 0.0;
    a[q * n + p] = 0.0;
    for k in 0..n {
        let vkp = v[k * n + p];
        let vkq = v[k * n + q];
        v[k * n + p] = c * vkp - s * vkq;
        v[k * n + q] = s * vkp + c * vkq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{cosine_kernel, EmbeddingSet};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kernel(rows: &[&[f64]]) -> CosineKernel {
        CosineKernel::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn max_reconstruction_error(k: &CosineKernel, d: &EigenDecomposition) -> f64 {
        let trace = k.trace();
        let rebuilt = d.map_spectrum(|l| l);
        k.entries()
            .iter()
            .zip(&rebuilt)
            .map(|(a, b)| (a / trace - b).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn identity_spectrum_is_uniform() {
        let s = eigen_symmetric(&CosineKernel::identity(3)).unwrap();
        for l in s.eigenvalues() {
            assert!((l - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn all_ones_is_rank_one() {
        let s = eigen_symmetric(&CosineKernel::ones(3)).unwrap();
        let l = s.eigenvalues();
        assert!((l[0] - 1.0).abs() < 1e-12);
        assert!(l[1].abs() < 1e-12 && l[2].abs() < 1e-12);
        assert!(l[1] >= 0.0 && l[2] >= 0.0);
    }

    #[test]
    fn two_by_two_closed_form() {
        let s = eigen_symmetric(&kernel(&[&[1.0, 0.5], &[0.5, 1.0]])).unwrap();
        assert!((s.eigenvalues()[0] - 0.75).abs() < 1e-14);
        assert!((s.eigenvalues()[1] - 0.25).abs() < 1e-14);
    }

    #[test]
    fn rejects_asymmetric_input() {
        let mut k = CosineKernel::identity(2);
        k.entries[1] = 0.3;
        assert!(matches!(eigen_symmetric(&k), Err(KernelError::NotSymmetric { .. })));
    }

    #[test]
    fn rejects_indefinite_kernel() {
        // Unit diagonal, symmetric, entries in range, but eigenvalues 1 ± 0.9·√2.
        let k = kernel(&[&[1.0, 0.9, 0.0], &[0.9, 1.0, 0.9], &[0.0, 0.9, 1.0]]);
        assert!(matches!(
            eigen_symmetric(&k),
            Err(KernelError::IndefiniteKernel { .. })
        ));
    }

    #[test]
    fn random_gram_matrices_reconstruct() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2usize, 5, 10, 20, 32] {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let k = cosine_kernel(&EmbeddingSet::from_vecs(rows).unwrap()).unwrap();
            let d = eigen_decompose(&k).unwrap();
            assert!(max_reconstruction_error(&k, &d) <= 1e-10, "n = {n}");
            let sum: f64 = d.values.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-8);
            assert!(d.values.windows(2).all(|w| w[0] >= w[1]));
            assert!(d.values.iter().all(|&l| (0.0..=1.0 + 1e-8).contains(&l)));
        }
    }
}
