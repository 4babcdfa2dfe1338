//! Seeded random instance generation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::operator::{DualVector, PrimalVector, Role, SpdOperator};

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vector(n: usize, rng: &mut SeededRng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut SeededRng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn random_primal(n: usize, rng: &mut SeededRng) -> PrimalVector {
    PrimalVector::from_vector_unchecked(gaussian_vector(n, rng))
}

pub fn random_dual(n: usize, rng: &mut SeededRng) -> DualVector {
    DualVector::from_vector_unchecked(gaussian_vector(n, rng))
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the
/// signs of `R`'s diagonal folded into `Q`).
pub fn random_orthogonal(n: usize, rng: &mut SeededRng) -> DMatrix<f64> {
    let qr = gaussian_matrix(n, n, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `n` points spaced evenly in log scale from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// `Q diag(spectrum) Q^T` with a random orthogonal `Q`.
pub fn matrix_with_spectrum(spectrum: &[f64], rng: &mut SeededRng) -> DMatrix<f64> {
    let q = random_orthogonal(spectrum.len(), rng);
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(spectrum));
    let m = &q * d * q.transpose();
    (&m + m.transpose()) * 0.5
}

/// Random SPD operator whose eigenvalues are log-uniform in `[1, cond]`.
pub fn random_spd(n: usize, cond: f64, rng: &mut SeededRng) -> Result<SpdOperator> {
    let spectrum: Vec<f64> = (0..n)
        .map(|_| cond.powf(rng.random::<f64>()))
        .collect();
    SpdOperator::symmetrized(matrix_with_spectrum(&spectrum, rng), Role::PrimalToDual)
}

/// Random SPD `G` with all eigenvalues relative to `a` inside `[lo, hi]`:
/// `G = L Q diag(d) Q^T L^T` where `a = L L^T`.
pub fn random_spd_bracketed(
    a: &SpdOperator,
    lo: f64,
    hi: f64,
    rng: &mut SeededRng,
) -> Result<SpdOperator> {
    let n = a.dim();
    let d: Vec<f64> = (0..n)
        .map(|_| lo * (hi / lo).powf(rng.random::<f64>()))
        .collect();
    let inner = matrix_with_spectrum(&d, rng);
    let l = a.cholesky().l();
    SpdOperator::symmetrized(&l * inner * l.transpose(), a.role())
}

/// Random `G` with `a <= G <= eta a`.
pub fn random_spd_above(a: &SpdOperator, eta: f64, rng: &mut SeededRng) -> Result<SpdOperator> {
    random_spd_bracketed(a, 1.0, eta, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthogonal_is_orthogonal() {
        let mut rng = seeded(3);
        let q = random_orthogonal(6, &mut rng);
        let err = (&q.transpose() * &q - DMatrix::identity(6, 6)).amax();
        assert!(err < 1e-13);
    }

    #[test]
    fn log_spaced_endpoints() {
        let v = log_spaced(1.0, 100.0, 5);
        assert_eq!(v[0], 1.0);
        assert_eq!(v[4], 100.0);
        assert!((v[2] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_draw() {
        let a = random_spd(4, 10.0, &mut seeded(11)).unwrap();
        let b = random_spd(4, 10.0, &mut seeded(11)).unwrap();
        assert_eq!(a, b);
    }
}
