//! The POVM data model: validation, outcome statistics, relabeling, and
//! elementary structural predicates.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{eig_hermitian, is_projection, ComplexMatrix, Tolerances};

/// Discrete observable: `N` effects on a `d`-dimensional space summing to the
/// identity, indexed by opaque string labels.
///
/// Construction validates every invariant (Hermitian PSD effects, completeness,
/// no zero effects); an instance can therefore be assumed well formed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscretePovm {
    dim: usize,
    labels: Vec<String>,
    effects: Vec<ComplexMatrix>,
}

/// Per-invariant residuals produced by [`DiscretePovm::validate_parts`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub dim: usize,
    pub n_outcomes: usize,
    /// Max over effects of `‖M − M*‖`.
    pub max_hermiticity_residual: f64,
    /// Smallest eigenvalue of each effect.
    pub min_eigenvalues: Vec<f64>,
    /// `‖Σ M − I‖`.
    pub completeness_residual: f64,
    /// Effects with operator norm at or below `id_tol`.
    pub zero_effects: Vec<bool>,
    pub duplicate_labels: Vec<String>,
    pub valid: bool,
}

/// Measurement statistics of a POVM in a state, aligned with the labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    pub probabilities: Vec<f64>,
    /// Indices whose raw trace fell in `[-id_tol, 0)` and was clamped to zero.
    pub clamped: Vec<usize>,
}

/// Boolean plus the residual that decided it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommutativityReport {
    pub commutative: bool,
    pub max_commutator_norm: f64,
}

/// Regularity verdict: every nontrivial effect must have spectrum strictly
/// above and strictly below 1/2.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularityReport {
    pub regular: bool,
    /// Smallest distance of any deciding eigenvalue from 1/2; negative when
    /// some effect fails the test.
    pub margin: f64,
}

/// Threshold deciding that an effect is the zero matrix. POVM effects are
/// bounded by the identity, so exact zeros survive as accumulation noise of
/// order `dim * ε`; anything above this is a genuinely tiny effect, not a
/// zero.
pub(crate) fn zero_effect_tol(dim: usize) -> f64 {
    16.0 * f64::EPSILON * dim as f64
}

/// Disjoint, covering grouping of outcome labels used by
/// [`DiscretePovm::coarse_grain`]. Each cell is `(new_label, member_labels)`.
pub type Partition = Vec<(String, Vec<String>)>;

/// Result of coarse graining; cells that summed to (numerically) zero are
/// dropped and reported.
#[derive(Debug, Clone)]
pub struct CoarseGrained {
    pub povm: DiscretePovm,
    pub dropped_cells: Vec<String>,
}

impl DiscretePovm {
    /// Validates and constructs. Zero effects are rejected; use
    /// [`DiscretePovm::new_dropping_zero_effects`] to silently remove them.
    pub fn new(
        dim: usize,
        labels: Vec<String>,
        effects: Vec<ComplexMatrix>,
        tol: &Tolerances,
    ) -> Result<Self> {
        let report = Self::validate_parts(dim, &labels, &effects, tol)?;
        if !report.valid {
            return Err(Error::InvalidPovm(report.describe_failure()));
        }
        Ok(DiscretePovm {
            dim,
            labels,
            effects,
        })
    }

    /// As [`DiscretePovm::new`], but drops effects with norm at or below
    /// `id_tol` and returns the dropped labels.
    pub fn new_dropping_zero_effects(
        dim: usize,
        labels: Vec<String>,
        effects: Vec<ComplexMatrix>,
        tol: &Tolerances,
    ) -> Result<(Self, Vec<String>)> {
        let mut kept_labels = Vec::new();
        let mut kept_effects = Vec::new();
        let mut dropped = Vec::new();
        for (label, effect) in labels.into_iter().zip(effects) {
            if effect.is_square()
                && effect.rows() == dim
                && effect.operator_norm() <= zero_effect_tol(dim)
            {
                dropped.push(label);
            } else {
                kept_labels.push(label);
                kept_effects.push(effect);
            }
        }
        let povm = Self::new(dim, kept_labels, kept_effects, tol)?;
        Ok((povm, dropped))
    }

    /// Convenience constructor labelling outcomes "1", "2", ....
    pub fn from_effects(dim: usize, effects: Vec<ComplexMatrix>, tol: &Tolerances) -> Result<Self> {
        let labels = (1..=effects.len()).map(|i| i.to_string()).collect();
        Self::new(dim, labels, effects, tol)
    }

    /// Computes every invariant residual without constructing a POVM.
    ///
    /// Errors only on structural mismatch (non-square effects, inconsistent
    /// shapes, label/effect count disagreement); domain failures are reported
    /// through the returned residuals.
    pub fn validate_parts(
        dim: usize,
        labels: &[String],
        effects: &[ComplexMatrix],
        tol: &Tolerances,
    ) -> Result<ValidationReport> {
        if dim == 0 {
            return Err(Error::DimensionMismatch(
                "dimension must be positive".into(),
            ));
        }
        if labels.len() != effects.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} effects",
                labels.len(),
                effects.len()
            )));
        }
        if effects.is_empty() {
            return Err(Error::InvalidPovm(
                "a POVM needs at least one effect".into(),
            ));
        }
        for (i, m) in effects.iter().enumerate() {
            if m.rows() != dim || m.cols() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "effect {i} is {}x{}, expected {dim}x{dim}",
                    m.rows(),
                    m.cols()
                )));
            }
        }

        let mut duplicate_labels = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for label in labels {
            if !seen.insert(label.as_str()) {
                duplicate_labels.push(label.clone());
            }
        }

        let mut max_herm = 0.0_f64;
        let mut min_eigenvalues = Vec::with_capacity(effects.len());
        let mut zero_effects = Vec::with_capacity(effects.len());
        let mut hermitian_ok = true;
        let mut psd_ok = true;
        for m in effects {
            let norm = m.operator_norm();
            let herm = m.hermiticity_residual();
            max_herm = max_herm.max(herm);
            if herm > tol.herm_tol * (1.0 + norm) {
                hermitian_ok = false;
                min_eigenvalues.push(f64::NAN);
            } else {
                let eig = eig_hermitian(&m.hermitian_part(), tol)?;
                let min = eig.eigenvalues[0];
                let max = *eig.eigenvalues.last().expect("nonempty spectrum");
                if min < -tol.psd_tol * (1.0 + max.max(0.0)) {
                    psd_ok = false;
                }
                min_eigenvalues.push(min);
            }
            zero_effects.push(norm <= zero_effect_tol(dim));
        }

        let sum = sum_effects(effects);
        let completeness_residual = (&sum - &ComplexMatrix::identity(dim)).operator_norm();
        let completeness_ok = completeness_residual <= tol.id_tol * (dim as f64).sqrt();

        let valid = hermitian_ok
            && psd_ok
            && completeness_ok
            && duplicate_labels.is_empty()
            && !zero_effects.iter().any(|&z| z);

        Ok(ValidationReport {
            dim,
            n_outcomes: effects.len(),
            max_hermiticity_residual: max_herm,
            min_eigenvalues,
            completeness_residual,
            zero_effects,
            duplicate_labels,
            valid,
        })
    }

    pub fn validate(&self, tol: &Tolerances) -> ValidationReport {
        Self::validate_parts(self.dim, &self.labels, &self.effects, tol)
            .expect("constructed POVM has consistent shapes")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_outcomes(&self) -> usize {
        self.effects.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn effects(&self) -> &[ComplexMatrix] {
        &self.effects
    }

    pub fn effect(&self, i: usize) -> &ComplexMatrix {
        &self.effects[i]
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// `Σ_{i ∈ indices} M_i`.
    pub fn subset_effect(&self, indices: &[usize]) -> ComplexMatrix {
        let mut sum = ComplexMatrix::zeros(self.dim, self.dim);
        for &i in indices {
            sum = &sum + &self.effects[i];
        }
        sum
    }

    /// Outcome probabilities `p_i = Re tr[ρ M_i]`, with raw values in
    /// `[-id_tol, 0)` clamped to zero and recorded.
    pub fn outcome_distribution(
        &self,
        state: &State,
        tol: &Tolerances,
    ) -> Result<OutcomeDistribution> {
        if state.dim() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "state dimension {} does not match POVM dimension {}",
                state.dim(),
                self.dim
            )));
        }
        let mut probabilities = Vec::with_capacity(self.effects.len());
        let mut clamped = Vec::new();
        for (i, m) in self.effects.iter().enumerate() {
            let t = (state.matrix().na() * m.na()).diagonal().sum();
            debug_assert!(t.im.abs() <= tol.id_tol, "trace drifted off the real axis");
            let mut p = t.re;
            if p < 0.0 && p >= -tol.id_tol {
                p = 0.0;
                clamped.push(i);
            }
            probabilities.push(p);
        }
        Ok(OutcomeDistribution {
            probabilities,
            clamped,
        })
    }

    /// Relabels outcomes by summing effects over partition cells. Cells whose
    /// sum is numerically zero are dropped and reported.
    pub fn coarse_grain(&self, partition: &Partition, tol: &Tolerances) -> Result<CoarseGrained> {
        let mut seen = std::collections::BTreeSet::new();
        let mut covered = 0usize;
        for (cell, members) in partition {
            if members.is_empty() {
                return Err(Error::BadPartition(format!("cell '{cell}' is empty")));
            }
            for label in members {
                if self.label_index(label).is_none() {
                    return Err(Error::BadPartition(format!(
                        "cell '{cell}' references unknown outcome '{label}'"
                    )));
                }
                if !seen.insert(label.as_str()) {
                    return Err(Error::BadPartition(format!(
                        "outcome '{label}' appears in more than one cell"
                    )));
                }
                covered += 1;
            }
        }
        if covered != self.labels.len() {
            return Err(Error::BadPartition(format!(
                "partition covers {covered} of {} outcomes",
                self.labels.len()
            )));
        }

        let mut labels = Vec::new();
        let mut effects = Vec::new();
        let mut dropped_cells = Vec::new();
        for (cell, members) in partition {
            let indices: Vec<usize> = members
                .iter()
                .map(|l| self.label_index(l).expect("checked above"))
                .collect();
            let effect = self.subset_effect(&indices);
            if effect.operator_norm() <= zero_effect_tol(self.dim) {
                dropped_cells.push(cell.clone());
            } else {
                labels.push(cell.clone());
                effects.push(effect);
            }
        }
        let povm = DiscretePovm::new(self.dim, labels, effects, tol)?;
        Ok(CoarseGrained {
            povm,
            dropped_cells,
        })
    }

    /// Pairwise commutators of the effects.
    pub fn is_commutative(&self, tol: &Tolerances) -> CommutativityReport {
        let mut max_norm = 0.0_f64;
        for i in 0..self.effects.len() {
            for j in (i + 1)..self.effects.len() {
                let c = ComplexMatrix::commutator(&self.effects[i], &self.effects[j]);
                max_norm = max_norm.max(c.operator_norm());
            }
        }
        let max_effect_norm = self
            .effects
            .iter()
            .map(|m| m.operator_norm())
            .fold(0.0_f64, f64::max);
        CommutativityReport {
            commutative: max_norm <= tol.herm_tol * (1.0 + max_effect_norm * max_effect_norm),
            max_commutator_norm: max_norm,
        }
    }

    /// True iff each effect that is neither 0 nor the identity has spectrum
    /// strictly above and strictly below 1/2.
    pub fn is_regular(&self, tol: &Tolerances) -> RegularityReport {
        let identity = ComplexMatrix::identity(self.dim);
        let mut margin = f64::INFINITY;
        for m in &self.effects {
            if m.operator_norm() <= tol.id_tol || (m - &identity).operator_norm() <= tol.id_tol {
                continue;
            }
            let eig = eig_hermitian(&m.hermitian_part(), tol).expect("effects are Hermitian");
            let lambda_min = eig.eigenvalues[0];
            let lambda_max = *eig.eigenvalues.last().expect("nonempty spectrum");
            margin = margin.min(lambda_max - 0.5).min(0.5 - lambda_min);
        }
        if margin == f64::INFINITY {
            // Only trivial effects: regular by vacuity.
            return RegularityReport {
                regular: true,
                margin,
            };
        }
        RegularityReport {
            regular: margin > 0.0,
            margin,
        }
    }

    /// Every effect is a projection. Together with completeness this makes
    /// the effects mutually orthogonal, i.e. the POVM is a PVM.
    pub fn is_pvm(&self, tol: &Tolerances) -> bool {
        self.effects.iter().all(|m| is_projection(m, tol))
    }
}

pub(crate) fn sum_effects(effects: &[ComplexMatrix]) -> ComplexMatrix {
    let dim = effects[0].rows();
    let mut sum = ComplexMatrix::zeros(dim, effects[0].cols());
    for m in effects {
        sum = &sum + m;
    }
    sum
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.valid
    }

    fn describe_failure(&self) -> String {
        let mut reasons = Vec::new();
        if self.max_hermiticity_residual > 0.0 && self.min_eigenvalues.iter().any(|x| x.is_nan()) {
            reasons.push(format!(
                "effect not Hermitian (residual {:.3e})",
                self.max_hermiticity_residual
            ));
        }
        if let Some(min) = self
            .min_eigenvalues
            .iter()
            .filter(|x| !x.is_nan())
            .cloned()
            .reduce(f64::min)
        {
            if min < 0.0 {
                reasons.push(format!("effect has negative eigenvalue {min:.3e}"));
            }
        }
        reasons.push(format!(
            "completeness residual {:.3e}",
            self.completeness_residual
        ));
        if self.zero_effects.iter().any(|&z| z) {
            reasons.push("zero effect present".into());
        }
        if !self.duplicate_labels.is_empty() {
            reasons.push(format!("duplicate labels {:?}", self.duplicate_labels));
        }
        reasons.join("; ")
    }
}

/// Density matrix: PSD with unit trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct State {
    matrix: ComplexMatrix,
}

impl State {
    pub fn new(matrix: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidState("density matrix must be square".into()));
        }
        let eig = eig_hermitian(&matrix, tol).map_err(|e| match e {
            Error::NotHermitian { residual, .. } => {
                Error::InvalidState(format!("not Hermitian (residual {residual:.3e})"))
            }
            other => other,
        })?;
        let lambda_min = eig.eigenvalues[0];
        let lambda_max = *eig.eigenvalues.last().expect("nonempty spectrum");
        if lambda_min < -tol.psd_tol * (1.0 + lambda_max.max(0.0)) {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {lambda_min:.3e}"
            )));
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > tol.id_tol || trace.im.abs() > tol.id_tol {
            return Err(Error::InvalidState(format!(
                "trace {trace} is not 1 within {:.1e}",
                tol.id_tol
            )));
        }
        Ok(State { matrix })
    }

    /// Pure state `|ψ><ψ| / ‖ψ‖²`.
    pub fn pure(amplitudes: &[Complex64]) -> Result<Self> {
        let v = ComplexMatrix::column_vector(amplitudes)?;
        let norm_sq: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if norm_sq == 0.0 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        Ok(State {
            matrix: ComplexMatrix::dyad(&v, &v).scale(1.0 / norm_sq),
        })
    }

    /// Computational basis state `|k><k|`.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::DimensionMismatch(format!(
                "basis index {k} out of range for dimension {dim}"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[k] = Complex64::new(1.0, 0.0);
        Self::pure(&amps)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        State {
            matrix: ComplexMatrix::identity(dim).scale(1.0 / dim as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub(crate) fn from_matrix_unchecked(matrix: ComplexMatrix) -> Self {
        State { matrix }
    }
}

impl OutcomeDistribution {
    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }
}
