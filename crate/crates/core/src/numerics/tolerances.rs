use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical thresholds used throughout the crate.
///
/// Double-precision eigensolvers deliver residuals around 1e-12 for the
/// dimensions handled here (d ≤ 256), so the defaults leave three orders of
/// magnitude of head-room. `eigval1_tol` gates the eigenvalue-1 certificates,
/// where strictness flips booleans; it is deliberately looser and surfaced as
/// a CLI flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Hermiticity residual bound, relative to `1 + ‖A‖`.
    pub herm_tol: f64,
    /// Positive semidefiniteness slack: smallest eigenvalue may reach
    /// `-psd_tol * (1 + σ_max)`.
    pub psd_tol: f64,
    /// Identity / completeness residual bound.
    pub id_tol: f64,
    /// Relative singular-value cutoff for numerical rank. Machine-epsilon
    /// scale; the factor of 8 over ε keeps eigensolver noise on true zero
    /// directions (a few ε at small dimensions) strictly below the cutoff.
    pub rank_rel_tol: f64,
    /// Eigendecomposition reconstruction residual bound.
    pub eig_tol: f64,
    /// Slack for the norm-1 / eigenvalue-1 threshold `1 - eigval1_tol`.
    pub eigval1_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            herm_tol: 1e-9,
            psd_tol: 1e-9,
            id_tol: 1e-9,
            rank_rel_tol: 8.0 * f64::EPSILON,
            eig_tol: 1e-9,
            eigval1_tol: 1e-7,
        }
    }
}

impl Tolerances {
    /// Checks that every threshold is strictly positive and finite.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("herm_tol", self.herm_tol),
            ("psd_tol", self.psd_tol),
            ("id_tol", self.id_tol),
            ("rank_rel_tol", self.rank_rel_tol),
            ("eig_tol", self.eig_tol),
            ("eigval1_tol", self.eigval1_tol),
        ];
        for (name, value) in fields {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::BadTolerances(format!("{name} = {value}")));
            }
        }
        Ok(())
    }
}
