//! Classical post-processing (Markov matrices), quantum pre-processing
//! (Kraus channels), and the measure-and-prepare channel that realizes a
//! POVM from any index-aligned PVM.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{eig_hermitian, ComplexMatrix, Tolerances};
use crate::observable::{sum_effects, DiscretePovm, State};

/// Row-stochastic transition matrix: `rows` input outcomes, `cols` output
/// outcomes, every entry nonnegative, every row summing to one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarkovMatrix {
    rows: usize,
    cols: usize,
    /// Row-major entries.
    entries: Vec<f64>,
}

impl MarkovMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>, tol: &Tolerances) -> Result<Self> {
        if rows == 0 || cols == 0 || entries.len() != rows * cols {
            return Err(Error::InvalidKernel(format!(
                "expected {rows}x{cols} = {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if entries.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::InvalidKernel(
                "entries must be finite and nonnegative".into(),
            ));
        }
        for r in 0..rows {
            let row_sum: f64 = entries[r * cols..(r + 1) * cols].iter().sum();
            if (row_sum - 1.0).abs() > tol.id_tol {
                return Err(Error::InvalidKernel(format!(
                    "row {r} sums to {row_sum}, expected 1"
                )));
            }
        }
        Ok(MarkovMatrix {
            rows,
            cols,
            entries,
        })
    }

    /// Identity relabeling on `n` outcomes.
    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        MarkovMatrix {
            rows: n,
            cols: n,
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.cols + col]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Matrix product, i.e. composition of post-processings.
    pub fn compose(&self, then: &MarkovMatrix) -> Result<MarkovMatrix> {
        if self.cols != then.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot compose {}x{} with {}x{}",
                self.rows, self.cols, then.rows, then.cols
            )));
        }
        let mut entries = vec![0.0; self.rows * then.cols];
        for i in 0..self.rows {
            for j in 0..then.cols {
                let mut acc = 0.0;
                for k in 0..self.cols {
                    acc += self.get(i, k) * then.get(k, j);
                }
                entries[i * then.cols + j] = acc;
            }
        }
        Ok(MarkovMatrix {
            rows: self.rows,
            cols: then.cols,
            entries,
        })
    }
}

/// Completely positive unital map in Kraus form, stored Heisenberg-side:
/// `Φ(B) = Σ_s A_s* B A_s` with `A_s` of shape `input_dim`-by-`output_dim`.
/// The Schrödinger action on states is the derived `ρ ↦ Σ_s A_s ρ A_s*`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KrausChannel {
    /// Dimension of the operator domain of the Heisenberg map.
    input_dim: usize,
    /// Dimension the resulting operators act on.
    output_dim: usize,
    kraus_ops: Vec<ComplexMatrix>,
}

/// Residual report for [`validate_channel`]. Complete positivity is
/// structural in Kraus form, so only unitality carries a residual.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelReport {
    pub input_dim: usize,
    pub output_dim: usize,
    pub kraus_rank: usize,
    pub unitality_residual: f64,
    pub unital: bool,
}

impl KrausChannel {
    pub fn new(
        input_dim: usize,
        output_dim: usize,
        kraus_ops: Vec<ComplexMatrix>,
        tol: &Tolerances,
    ) -> Result<Self> {
        let channel = Self::new_unchecked(input_dim, output_dim, kraus_ops)?;
        let report = validate_channel(&channel, tol);
        if !report.unital {
            return Err(Error::NotUnital(report.unitality_residual));
        }
        Ok(channel)
    }

    /// Shape-checks only; unitality is left to [`validate_channel`].
    pub fn new_unchecked(
        input_dim: usize,
        output_dim: usize,
        kraus_ops: Vec<ComplexMatrix>,
    ) -> Result<Self> {
        if kraus_ops.is_empty() {
            return Err(Error::DimensionMismatch(
                "channel needs at least one Kraus operator".into(),
            ));
        }
        for (s, a) in kraus_ops.iter().enumerate() {
            if a.rows() != input_dim || a.cols() != output_dim {
                return Err(Error::DimensionMismatch(format!(
                    "Kraus operator {s} is {}x{}, expected {input_dim}x{output_dim}",
                    a.rows(),
                    a.cols()
                )));
            }
        }
        Ok(KrausChannel {
            input_dim,
            output_dim,
            kraus_ops,
        })
    }

    /// Identity channel on a `d`-dimensional system.
    pub fn identity(dim: usize) -> Self {
        KrausChannel {
            input_dim: dim,
            output_dim: dim,
            kraus_ops: vec![ComplexMatrix::identity(dim)],
        }
    }

    /// Isometry channel `B ↦ J* B J`.
    pub fn from_isometry(isometry: ComplexMatrix) -> Self {
        KrausChannel {
            input_dim: isometry.rows(),
            output_dim: isometry.cols(),
            kraus_ops: vec![isometry],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn kraus_ops(&self) -> &[ComplexMatrix] {
        &self.kraus_ops
    }

    /// Heisenberg action `Φ(B) = Σ_s A_s* B A_s`.
    pub fn apply_heisenberg(&self, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        if b.rows() != self.input_dim || b.cols() != self.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "operator is {}x{}, channel domain is {}x{}",
                b.rows(),
                b.cols(),
                self.input_dim,
                self.input_dim
            )));
        }
        let mut acc = DMatrix::zeros(self.output_dim, self.output_dim);
        for a in &self.kraus_ops {
            acc += a.na().adjoint() * b.na() * a.na();
        }
        Ok(ComplexMatrix::from_na(acc))
    }

    /// Schrödinger action `ρ ↦ Σ_s A_s ρ A_s*` on density matrices.
    pub fn apply_schrodinger(&self, state: &State) -> Result<State> {
        if state.dim() != self.output_dim {
            return Err(Error::DimensionMismatch(format!(
                "state dimension {} does not match channel output dimension {}",
                state.dim(),
                self.output_dim
            )));
        }
        let mut acc = DMatrix::zeros(self.input_dim, self.input_dim);
        for a in &self.kraus_ops {
            acc += a.na() * state.matrix().na() * a.na().adjoint();
        }
        Ok(State::from_matrix_unchecked(ComplexMatrix::from_na(acc)))
    }
}

/// Unitality residual `‖Σ A_s* A_s − I‖`.
pub fn validate_channel(channel: &KrausChannel, tol: &Tolerances) -> ChannelReport {
    let d = channel.output_dim;
    let mut acc = DMatrix::zeros(d, d);
    for a in &channel.kraus_ops {
        acc += a.na().adjoint() * a.na();
    }
    let residual = (&ComplexMatrix::from_na(acc) - &ComplexMatrix::identity(d)).operator_norm();
    ChannelReport {
        input_dim: channel.input_dim,
        output_dim: channel.output_dim,
        kraus_rank: channel.kraus_ops.len(),
        unitality_residual: residual,
        unital: residual <= tol.id_tol * (d as f64).sqrt(),
    }
}

/// Smearing with labels plus the outcome columns that vanished and were
/// dropped.
#[derive(Debug, Clone)]
pub struct Smeared {
    pub povm: DiscretePovm,
    pub dropped_columns: Vec<usize>,
}

/// Classical post-processing `M'_j = Σ_i p_ij M_i`. Columns whose smeared
/// effect is numerically zero are dropped with a notice.
pub fn smear(povm: &DiscretePovm, kernel: &MarkovMatrix, tol: &Tolerances) -> Result<Smeared> {
    if kernel.rows() != povm.n_outcomes() {
        return Err(Error::DimensionMismatch(format!(
            "kernel has {} rows for {} outcomes",
            kernel.rows(),
            povm.n_outcomes()
        )));
    }
    let d = povm.dim();
    let mut labels = Vec::new();
    let mut effects = Vec::new();
    let mut dropped_columns = Vec::new();
    for j in 0..kernel.cols() {
        let mut m = ComplexMatrix::zeros(d, d);
        for i in 0..povm.n_outcomes() {
            let p = kernel.get(i, j);
            if p != 0.0 {
                m = &m + &povm.effect(i).scale(p);
            }
        }
        if m.operator_norm() <= crate::observable::zero_effect_tol(d) {
            dropped_columns.push(j);
        } else {
            labels.push((j + 1).to_string());
            effects.push(m);
        }
    }
    let povm = DiscretePovm::new(d, labels, effects, tol)?;
    Ok(Smeared {
        povm,
        dropped_columns,
    })
}

/// Outcome of [`extract_kernel`]: the fitted transition matrix together with
/// the residual that decides whether the second observable really is a
/// smearing of the first.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelExtraction {
    pub rows: usize,
    pub cols: usize,
    /// Row-major fitted entries, nonnegative by construction.
    pub entries: Vec<f64>,
    /// `max_j ‖M''_j − Σ_i p_ij M_i‖`.
    pub residual: f64,
    pub max_row_sum_deviation: f64,
    /// True when `residual` is at or below the smearing threshold (1e-8).
    pub is_smearing: bool,
}

pub const SMEARING_RESIDUAL_TOL: f64 = 1e-8;

impl KernelExtraction {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.cols + col]
    }

    pub fn into_markov(self, tol: &Tolerances) -> Result<MarkovMatrix> {
        MarkovMatrix::new(self.rows, self.cols, self.entries, tol)
    }
}

/// Recovers the transition matrix of a smearing by nonnegative least squares,
/// one column at a time (projected gradient, iteration cap 1e4, step
/// tolerance 1e-12). Requires the reference POVM to be rank-1; the kernel is
/// unique exactly when its effects are linearly independent, and row sums
/// then come out stochastic automatically.
pub fn extract_kernel(
    rank1_povm: &DiscretePovm,
    second_margin: &DiscretePovm,
    tol: &Tolerances,
) -> Result<KernelExtraction> {
    if rank1_povm.dim() != second_margin.dim() {
        return Err(Error::DimensionMismatch(format!(
            "POVMs act on dimensions {} and {}",
            rank1_povm.dim(),
            second_margin.dim()
        )));
    }
    if !crate::certify::certify_rank1(rank1_povm, tol).value {
        return Err(Error::NotRank1);
    }

    let n = rank1_povm.n_outcomes();
    let n_out = second_margin.n_outcomes();
    let d = rank1_povm.dim();

    // Real design matrix: column i stacks Re and Im of vec(M_i).
    let rows = 2 * d * d;
    let design = DMatrix::from_fn(rows, n, |r, c| {
        let entries = rank1_povm.effect(c).entries_row_major();
        if r < d * d {
            entries[r].re
        } else {
            entries[r - d * d].im
        }
    });
    let gram = design.transpose() * &design;
    let lipschitz = gram
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, &l| acc.max(l));
    let step = if lipschitz > 0.0 {
        1.0 / lipschitz
    } else {
        1.0
    };

    let mut entries = vec![0.0; n * n_out];
    for j in 0..n_out {
        let target = second_margin.effect(j).entries_row_major();
        let b = nalgebra::DVector::from_fn(rows, |r, _| {
            if r < d * d {
                target[r].re
            } else {
                target[r - d * d].im
            }
        });
        let dtb = design.transpose() * &b;
        let mut x = nalgebra::DVector::from_element(n, 1.0 / n_out as f64);
        for _ in 0..10_000 {
            let grad = &gram * &x - &dtb;
            let mut next = &x - &grad * step;
            for v in next.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            let delta = (&next - &x).norm();
            x = next;
            if delta <= 1e-12 {
                break;
            }
        }
        // Projected gradient converges linearly; polish the detected support
        // with an exact least-squares solve, kept only when it stays
        // feasible and does not worsen the fit.
        let support: Vec<usize> = (0..n).filter(|&i| x[i] > 1e-12).collect();
        if !support.is_empty() && support.len() < 2 * d * d {
            let sub = DMatrix::from_fn(rows, support.len(), |r, c| design[(r, support[c])]);
            let polished = crate::numerics::normal_equations_pinv_solve(&sub, &b);
            if polished.iter().all(|&v| v >= 0.0) {
                let mut candidate = nalgebra::DVector::zeros(n);
                for (c, &i) in support.iter().enumerate() {
                    candidate[i] = polished[c];
                }
                if (&design * &candidate - &b).norm() <= (&design * &x - &b).norm() {
                    x = candidate;
                }
            }
        }
        for i in 0..n {
            entries[i * n_out + j] = x[i];
        }
    }

    // Residual per output effect.
    let mut residual = 0.0_f64;
    for j in 0..n_out {
        let mut fit = ComplexMatrix::zeros(d, d);
        for i in 0..n {
            fit = &fit + &rank1_povm.effect(i).scale(entries[i * n_out + j]);
        }
        residual = residual.max((&fit - second_margin.effect(j)).operator_norm());
    }
    let mut max_row_sum_deviation = 0.0_f64;
    for i in 0..n {
        let row_sum: f64 = entries[i * n_out..(i + 1) * n_out].iter().sum();
        max_row_sum_deviation = max_row_sum_deviation.max((row_sum - 1.0).abs());
    }

    Ok(KernelExtraction {
        rows: n,
        cols: n_out,
        entries,
        residual,
        max_row_sum_deviation,
        is_smearing: residual <= SMEARING_RESIDUAL_TOL,
    })
}

/// Quantum pre-processing `M_i = Φ(M'_i)`: pulls a POVM on the channel's
/// domain back through the Heisenberg channel and validates the result.
pub fn apply_channel(
    channel: &KrausChannel,
    povm: &DiscretePovm,
    tol: &Tolerances,
) -> Result<DiscretePovm> {
    if povm.dim() != channel.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "POVM dimension {} does not match channel domain {}",
            povm.dim(),
            channel.input_dim()
        )));
    }
    let report = validate_channel(channel, tol);
    if !report.unital {
        return Err(Error::NotUnital(report.unitality_residual));
    }
    let mut effects = Vec::with_capacity(povm.n_outcomes());
    for m in povm.effects() {
        effects.push(channel.apply_heisenberg(m)?.hermitian_part());
    }
    DiscretePovm::new(channel.output_dim(), povm.labels().to_vec(), effects, tol)
}

/// Measure-and-prepare channel `Φ'(B) = Σ_i <e_i|B|e_i> M_i` with `e_i` a
/// unit vector in the range of `P_i`, realizing the target POVM as a
/// pre-processing of the PVM: `Φ'(P_i) = M_i`.
///
/// Kraus form: `|e_i><d_ik|` over the spectral decompositions
/// `M_i = Σ_k |d_ik><d_ik|`.
pub fn pvm_preprocessing_channel(
    pvm: &DiscretePovm,
    target: &DiscretePovm,
    tol: &Tolerances,
) -> Result<KrausChannel> {
    if !pvm.is_pvm(tol) {
        return Err(Error::NotPvm);
    }
    if pvm.n_outcomes() != target.n_outcomes() {
        return Err(Error::AbsoluteContinuityViolated(format!(
            "PVM has {} outcomes, target has {}",
            pvm.n_outcomes(),
            target.n_outcomes()
        )));
    }
    let d_in = pvm.dim();
    let d_out = target.dim();
    let dilation = crate::dilation::minimal_naimark(target, tol)?;

    let mut kraus_ops = Vec::new();
    for i in 0..pvm.n_outcomes() {
        // Highest-eigenvalue eigenvector of P_i under the fixed phase
        // convention: a deterministic unit vector in ran P_i.
        let eig = eig_hermitian(pvm.effect(i), tol)?;
        let e_i = eig.eigenvector(eig.dim() - 1);
        for d_ik in &dilation.vectors()[i] {
            kraus_ops.push(ComplexMatrix::dyad(&e_i, d_ik));
        }
    }
    let channel = KrausChannel::new(d_in, d_out, kraus_ops, tol)?;

    // The construction must reproduce the target exactly.
    let mut worst = 0.0_f64;
    for i in 0..pvm.n_outcomes() {
        let image = channel.apply_heisenberg(pvm.effect(i))?;
        worst = worst.max((&image - target.effect(i)).operator_norm());
    }
    if worst > tol.id_tol * (d_out as f64).sqrt() {
        return Err(Error::BlockResidual(worst));
    }
    Ok(channel)
}

/// `‖Σ M_i − I‖` helper shared with validation.
pub fn povm_completeness_residual(povm: &DiscretePovm) -> f64 {
    let sum = sum_effects(povm.effects());
    (&sum - &ComplexMatrix::identity(povm.dim())).operator_norm()
}
