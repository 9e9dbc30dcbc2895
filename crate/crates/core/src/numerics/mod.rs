//! Tolerance-aware complex Hermitian linear algebra used by every other
//! module.

mod matrix;
mod tolerances;

pub use matrix::ComplexMatrix;
pub use tolerances::Tolerances;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues are sorted ascending; eigenvectors are the matching orthonormal
/// columns with a fixed phase convention (first component of modulus above
/// 1e-12 made real positive), so repeated runs produce identical output up to
/// eigensolver determinism.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEig {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Column `k` as a `d`-by-1 matrix.
    pub fn eigenvector(&self, k: usize) -> ComplexMatrix {
        let d = self.dim();
        let entries: Vec<Complex64> = (0..d).map(|r| self.eigenvectors.get(r, k)).collect();
        ComplexMatrix::column_vector(&entries).expect("eigenvector entries are finite")
    }

    /// Rebuilds `V Λ V*`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let d = self.dim();
        let v = self.eigenvectors.na();
        let lambda = DMatrix::from_fn(d, d, |r, c| {
            if r == c {
                Complex64::new(self.eigenvalues[r], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        ComplexMatrix::from_na(v * lambda * v.adjoint())
    }
}

fn fix_phase(column: &mut [Complex64]) {
    let pivot = column.iter().position(|z| z.norm() > 1e-12).unwrap_or(0);
    let z = column[pivot];
    if z.norm() == 0.0 {
        return;
    }
    let phase = z.conj() / z.norm();
    for entry in column.iter_mut() {
        *entry *= phase;
    }
}

/// Eigendecomposition of a Hermitian matrix, rejecting inputs whose
/// anti-Hermitian part exceeds `herm_tol * (1 + ‖A‖)`.
pub fn eig_hermitian(a: &ComplexMatrix, tol: &Tolerances) -> Result<HermitianEig> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let residual = a.hermiticity_residual();
    let allowed = tol.herm_tol * (1.0 + a.operator_norm());
    if residual > allowed {
        return Err(Error::NotHermitian { residual, allowed });
    }
    // Decompose the Hermitian part so roundoff drift in the input cannot leak
    // imaginary eigenvalue components.
    let herm = a.hermitian_part();
    let eig = herm.na().clone().symmetric_eigen();

    let d = a.rows();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let mut eigenvalues = Vec::with_capacity(d);
    let mut vectors = DMatrix::zeros(d, d);
    for (col, &src) in order.iter().enumerate() {
        eigenvalues.push(eig.eigenvalues[src]);
        let mut column: Vec<Complex64> = eig.eigenvectors.column(src).iter().copied().collect();
        fix_phase(&mut column);
        for (row, z) in column.into_iter().enumerate() {
            vectors[(row, col)] = z;
        }
    }
    Ok(HermitianEig {
        eigenvalues,
        eigenvectors: ComplexMatrix::from_na(vectors),
    })
}

/// Number of singular values above `rank_rel_tol * max(rows, cols) * σ_max`.
pub fn numerical_rank(a: &ComplexMatrix, tol: &Tolerances) -> usize {
    let sv = a.na().clone().singular_values();
    let sigma_max = sv.iter().fold(0.0_f64, |acc, &s| acc.max(s));
    if sigma_max == 0.0 {
        return 0;
    }
    let cutoff = tol.rank_rel_tol * a.rows().max(a.cols()) as f64 * sigma_max;
    sv.iter().filter(|&&s| s > cutoff).count()
}

/// Checks positive semidefiniteness with relative slack
/// `λ_min ≥ -psd_tol * (1 + σ_max)` and returns the eigendecomposition.
fn psd_eig(a: &ComplexMatrix, tol: &Tolerances) -> Result<HermitianEig> {
    let eig = eig_hermitian(a, tol)?;
    let lambda_max = eig.eigenvalues.last().copied().unwrap_or(0.0);
    let lambda_min = eig.eigenvalues.first().copied().unwrap_or(0.0);
    if lambda_min < -tol.psd_tol * (1.0 + lambda_max.max(0.0)) {
        return Err(Error::NotPsd {
            min_eigenvalue: lambda_min,
        });
    }
    Ok(eig)
}

fn rebuild_with(eig: &HermitianEig, f: impl Fn(f64) -> f64) -> ComplexMatrix {
    let d = eig.dim();
    let v = eig.eigenvectors.na();
    let lambda = DMatrix::from_fn(d, d, |r, c| {
        if r == c {
            Complex64::new(f(eig.eigenvalues[r]), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    ComplexMatrix::from_na(v * lambda * v.adjoint())
}

/// Positive square root of a PSD matrix. Eigenvalues at or below the rank
/// cutoff are treated as exact zeros; the square root would otherwise
/// amplify `ε`-level noise to `√ε`.
pub fn psd_sqrt(a: &ComplexMatrix, tol: &Tolerances) -> Result<ComplexMatrix> {
    let eig = psd_eig(a, tol)?;
    let lambda_max = eig.eigenvalues.last().copied().unwrap_or(0.0);
    let cutoff = tol.rank_rel_tol * a.rows() as f64 * lambda_max.max(0.0);
    Ok(rebuild_with(
        &eig,
        |l| if l <= cutoff { 0.0 } else { l.sqrt() },
    ))
}

/// Inverse square root of a strictly positive matrix. Nothing is clamped:
/// rank-deficient input is an error.
pub fn psd_inv_sqrt(a: &ComplexMatrix, tol: &Tolerances) -> Result<ComplexMatrix> {
    let eig = psd_eig(a, tol)?;
    let lambda_max = eig.eigenvalues.last().copied().unwrap_or(0.0);
    let lambda_min = eig.eigenvalues.first().copied().unwrap_or(0.0);
    let cutoff = tol.rank_rel_tol * a.rows() as f64 * lambda_max;
    if lambda_max <= 0.0 || lambda_min <= cutoff {
        return Err(Error::Singular {
            min_eigenvalue: lambda_min,
            cutoff,
        });
    }
    Ok(rebuild_with(&eig, |l| 1.0 / l.sqrt()))
}

/// Minimum-norm least-squares solution through the eigendecomposition of the
/// normal matrix. The real-embedded operator systems in this crate carry
/// degenerate singular pairs that degrade the dense bidiagonal SVD, while
/// the symmetric eigensolver stays at machine precision on them.
pub(crate) fn normal_equations_pinv_solve(
    system: &DMatrix<f64>,
    rhs: &nalgebra::DVector<f64>,
) -> nalgebra::DVector<f64> {
    let normal = system.transpose() * system;
    let n = normal.nrows();
    let projected = system.transpose() * rhs;
    let eig = normal.symmetric_eigen();
    let lambda_max = eig.eigenvalues.iter().fold(0.0_f64, |a, &l| a.max(l));
    let cutoff = f64::EPSILON * n as f64 * lambda_max.max(f64::MIN_POSITIVE);
    let rotated = eig.eigenvectors.transpose() * projected;
    let scaled = nalgebra::DVector::from_fn(rotated.len(), |k, _| {
        if eig.eigenvalues[k] > cutoff {
            rotated[k] / eig.eigenvalues[k]
        } else {
            0.0
        }
    });
    &eig.eigenvectors * scaled
}

/// True iff `‖A − A*‖` and `‖A² − A‖` are both within `herm_tol * (1 + ‖A‖)`.
pub fn is_projection(a: &ComplexMatrix, tol: &Tolerances) -> bool {
    if !a.is_square() {
        return false;
    }
    let allowed = tol.herm_tol * (1.0 + a.operator_norm());
    if a.hermiticity_residual() > allowed {
        return false;
    }
    let idem = &(a * a) - a;
    idem.operator_norm() <= allowed
}
