//! Shared helpers for the integration suites.
#![allow(dead_code)]

use num_complex::Complex64;
use qobs::numerics::{ComplexMatrix, Tolerances};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

pub fn tol() -> Tolerances {
    Tolerances::default()
}

pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut ChaCha12Rng) -> Complex64 {
    Complex64::new(
        rng.random::<f64>() * 2.0 - 1.0,
        rng.random::<f64>() * 2.0 - 1.0,
    )
}

/// Random Hermitian matrix with entries of order one.
pub fn random_hermitian(rng: &mut ChaCha12Rng, dim: usize) -> ComplexMatrix {
    let entries: Vec<Complex64> = (0..dim * dim).map(|_| random_complex(rng)).collect();
    ComplexMatrix::new(dim, dim, entries)
        .unwrap()
        .hermitian_part()
}

pub fn basis_dyad(dim: usize, k: usize) -> ComplexMatrix {
    let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
    entries[k * dim + k] = Complex64::new(1.0, 0.0);
    ComplexMatrix::new(dim, dim, entries).unwrap()
}

pub fn assert_close(actual: f64, expected: f64, tolerance: f64, context: &str) {
    assert!(
        (actual - expected).abs() <= tolerance,
        "{context}: {actual} vs {expected} (allowed {tolerance})"
    );
}
