//! Instruments, joint observables, and the discrete conversions between
//! joint and sequential measurements.
//!
//! A (Heisenberg) instrument is an outcome-indexed family of completely
//! positive operations `J_i*(B) = Σ_s A_is* B A_is` whose sum is a unital
//! channel. Measuring its induced POVM first and another observable second
//! yields the joint grid `N_ij = J_i*(M'_j)`; conversely any joint grid whose
//! first margin is `M` factors through the minimal dilation of `M` as blocks
//! `B_ij` with `N_ij = J_i* B_ij J_i`, which rebuilds a sequential model with
//! a rank-1 basis PVM as the second measurement.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dilation::{minimal_naimark, NaimarkDilation};
use crate::error::{Error, Result};
use crate::numerics::{
    eig_hermitian, normal_equations_pinv_solve, psd_sqrt, ComplexMatrix, Tolerances,
};
use crate::observable::{DiscretePovm, State};
use crate::process::KrausChannel;

/// Threshold separating numerical noise from genuine joint-measurability
/// failure in [`unique_joint_for_extreme`].
pub const JOINT_FEASIBILITY_TOL: f64 = 1e-6;

/// Reconstruction tolerance for block solves.
pub const BLOCK_RECONSTRUCTION_TOL: f64 = 1e-8;

/// Finite-outcome instrument in Kraus form with input dimension `d` and
/// output dimension `d''`; Kraus operators have shape `d''`-by-`d`.
///
/// Kraus lists are not canonicalized: two instruments are equal as devices
/// when their Heisenberg actions agree on an operator basis, not when their
/// Kraus lists match.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Instrument {
    labels: Vec<String>,
    input_dim: usize,
    output_dim: usize,
    /// Kraus list per outcome.
    operations: Vec<Vec<ComplexMatrix>>,
}

impl Instrument {
    pub fn new(
        labels: Vec<String>,
        input_dim: usize,
        output_dim: usize,
        operations: Vec<Vec<ComplexMatrix>>,
        tol: &Tolerances,
    ) -> Result<Self> {
        if labels.len() != operations.len() || operations.is_empty() {
            return Err(Error::InvalidInstrument(format!(
                "{} labels for {} operations",
                labels.len(),
                operations.len()
            )));
        }
        for (i, ops) in operations.iter().enumerate() {
            if ops.is_empty() {
                return Err(Error::InvalidInstrument(format!(
                    "outcome {i} has an empty Kraus list"
                )));
            }
            for a in ops {
                if a.rows() != output_dim || a.cols() != input_dim {
                    return Err(Error::InvalidInstrument(format!(
                        "Kraus operator for outcome {i} is {}x{}, expected {output_dim}x{input_dim}",
                        a.rows(),
                        a.cols()
                    )));
                }
            }
        }
        let instrument = Instrument {
            labels,
            input_dim,
            output_dim,
            operations,
        };
        let total = instrument.normalization_residual();
        if total > tol.id_tol * (input_dim as f64).sqrt() {
            return Err(Error::InvalidInstrument(format!(
                "total channel is not unital (residual {total:.3e})"
            )));
        }
        Ok(instrument)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_outcomes(&self) -> usize {
        self.operations.len()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn operations(&self) -> &[Vec<ComplexMatrix>] {
        &self.operations
    }

    /// `‖Σ_{i,s} A_is* A_is − I‖`.
    pub fn normalization_residual(&self) -> f64 {
        let mut acc = DMatrix::zeros(self.input_dim, self.input_dim);
        for ops in &self.operations {
            for a in ops {
                acc += a.na().adjoint() * a.na();
            }
        }
        (&ComplexMatrix::from_na(acc) - &ComplexMatrix::identity(self.input_dim)).operator_norm()
    }

    /// Heisenberg operation `J_i*(B) = Σ_s A_is* B A_is` for `B` on the
    /// output space.
    pub fn heisenberg_apply(&self, outcome: usize, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        if b.rows() != self.output_dim || b.cols() != self.output_dim {
            return Err(Error::DimensionMismatch(format!(
                "operator is {}x{}, instrument output dimension is {}",
                b.rows(),
                b.cols(),
                self.output_dim
            )));
        }
        let mut acc = DMatrix::zeros(self.input_dim, self.input_dim);
        for a in &self.operations[outcome] {
            acc += a.na().adjoint() * b.na() * a.na();
        }
        Ok(ComplexMatrix::from_na(acc))
    }

    /// Schrödinger operation: the subnormalized post-measurement state
    /// `J_i(ρ) = Σ_s A_is ρ A_is*` whose trace is the outcome probability.
    pub fn schrodinger_apply(&self, outcome: usize, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        if rho.rows() != self.input_dim || rho.cols() != self.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "state is {}x{}, instrument input dimension is {}",
                rho.rows(),
                rho.cols(),
                self.input_dim
            )));
        }
        let mut acc = DMatrix::zeros(self.output_dim, self.output_dim);
        for a in &self.operations[outcome] {
            acc += a.na() * rho.na() * a.na().adjoint();
        }
        Ok(ComplexMatrix::from_na(acc))
    }

    /// Effect `M_i = Σ_s A_is* A_is` of the induced POVM.
    pub fn induced_effect(&self, outcome: usize) -> ComplexMatrix {
        let mut acc = DMatrix::zeros(self.input_dim, self.input_dim);
        for a in &self.operations[outcome] {
            acc += a.na().adjoint() * a.na();
        }
        ComplexMatrix::from_na(acc).hermitian_part()
    }

    /// The POVM this instrument measures.
    pub fn induced_povm(&self, tol: &Tolerances) -> Result<DiscretePovm> {
        let effects = (0..self.n_outcomes())
            .map(|i| self.induced_effect(i))
            .collect();
        DiscretePovm::new(self.input_dim, self.labels.clone(), effects, tol)
    }
}

/// Total Heisenberg channel `Φ = Σ_i J_i*`: the concatenated Kraus list.
pub fn total_channel(instrument: &Instrument) -> KrausChannel {
    let ops: Vec<ComplexMatrix> = instrument.operations.iter().flatten().cloned().collect();
    KrausChannel::new_unchecked(instrument.output_dim, instrument.input_dim, ops)
        .expect("shapes validated at instrument construction")
}

/// Instrument with the single Kraus operator `√M_i` per outcome.
pub fn luders_instrument(povm: &DiscretePovm, tol: &Tolerances) -> Result<Instrument> {
    let operations: Result<Vec<Vec<ComplexMatrix>>> = povm
        .effects()
        .iter()
        .map(|m| Ok(vec![psd_sqrt(m, tol)?]))
        .collect();
    Instrument::new(
        povm.labels().to_vec(),
        povm.dim(),
        povm.dim(),
        operations?,
        tol,
    )
}

/// Measure-and-prepare instrument `J_i(ρ) = tr[ρ M_i] σ_i` for fixed
/// posterior states `σ_i`, realized by the Kraus operators
/// `√μ_k |u_k><d_il|` over the spectral decompositions of `σ_i` and `M_i`.
pub fn nuclear_instrument(
    povm: &DiscretePovm,
    posterior_states: &[State],
    tol: &Tolerances,
) -> Result<Instrument> {
    if posterior_states.len() != povm.n_outcomes() {
        return Err(Error::BadStates(format!(
            "{} posterior states for {} outcomes",
            posterior_states.len(),
            povm.n_outcomes()
        )));
    }
    let d_out = posterior_states[0].dim();
    if posterior_states.iter().any(|s| s.dim() != d_out) {
        return Err(Error::BadStates(
            "posterior states must share one output dimension".into(),
        ));
    }
    let dilation = minimal_naimark(povm, tol)?;
    let mut operations = Vec::with_capacity(povm.n_outcomes());
    for (i, sigma) in posterior_states.iter().enumerate() {
        let eig = eig_hermitian(sigma.matrix(), tol)?;
        let mu_max = eig.eigenvalues.last().copied().unwrap_or(0.0);
        let cutoff = tol.rank_rel_tol * d_out as f64 * mu_max.max(0.0);
        let mut ops = Vec::new();
        for k in 0..eig.dim() {
            let mu = eig.eigenvalues[k];
            if mu <= cutoff {
                continue;
            }
            let u_k = eig.eigenvector(k).scale(mu.sqrt());
            for d_il in &dilation.vectors()[i] {
                ops.push(ComplexMatrix::dyad(&u_k, d_il));
            }
        }
        if ops.is_empty() {
            return Err(Error::BadStates(format!("posterior state {i} is zero")));
        }
        operations.push(ops);
    }
    Instrument::new(povm.labels().to_vec(), povm.dim(), d_out, operations, tol)
}

/// Joint observable: a grid of effects whose row and column sums are the two
/// margins. Individual cells may vanish; the flattened grid (zero cells
/// dropped) is a valid POVM.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointObservable {
    dim: usize,
    row_labels: Vec<String>,
    col_labels: Vec<String>,
    effects: Vec<Vec<ComplexMatrix>>,
}

impl JointObservable {
    pub fn new(
        dim: usize,
        row_labels: Vec<String>,
        col_labels: Vec<String>,
        effects: Vec<Vec<ComplexMatrix>>,
        tol: &Tolerances,
    ) -> Result<Self> {
        if effects.len() != row_labels.len()
            || effects.iter().any(|row| row.len() != col_labels.len())
        {
            return Err(Error::DimensionMismatch(
                "joint grid shape does not match its labels".into(),
            ));
        }
        let mut sum = ComplexMatrix::zeros(dim, dim);
        for row in &effects {
            for cell in row {
                if cell.rows() != dim || cell.cols() != dim {
                    return Err(Error::DimensionMismatch(format!(
                        "cell is {}x{}, expected {dim}x{dim}",
                        cell.rows(),
                        cell.cols()
                    )));
                }
                let norm = cell.operator_norm();
                if cell.hermiticity_residual() > tol.herm_tol * (1.0 + norm) {
                    return Err(Error::InvalidPovm("joint cell not Hermitian".into()));
                }
                if norm > tol.id_tol {
                    let eig = eig_hermitian(&cell.hermitian_part(), tol)?;
                    let min = eig.eigenvalues[0];
                    let max = *eig.eigenvalues.last().expect("nonempty");
                    if min < -tol.psd_tol * (1.0 + max.max(0.0)) {
                        return Err(Error::InvalidPovm(format!(
                            "joint cell has negative eigenvalue {min:.3e}"
                        )));
                    }
                }
                sum = &sum + cell;
            }
        }
        let completeness = (&sum - &ComplexMatrix::identity(dim)).operator_norm();
        if completeness > tol.id_tol * (dim as f64).sqrt() {
            return Err(Error::InvalidPovm(format!(
                "joint grid completeness residual {completeness:.3e}"
            )));
        }
        Ok(JointObservable {
            dim,
            row_labels,
            col_labels,
            effects,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_rows(&self) -> usize {
        self.row_labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_labels.len()
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    pub fn cell(&self, i: usize, j: usize) -> &ComplexMatrix {
        &self.effects[i][j]
    }

    /// Row sums `M_i = Σ_j N_ij`.
    pub fn first_margin_effects(&self) -> Vec<ComplexMatrix> {
        self.effects
            .iter()
            .map(|row| {
                let mut acc = ComplexMatrix::zeros(self.dim, self.dim);
                for cell in row {
                    acc = &acc + cell;
                }
                acc
            })
            .collect()
    }

    /// Column sums `M''_j = Σ_i N_ij`.
    pub fn second_margin_effects(&self) -> Vec<ComplexMatrix> {
        (0..self.n_cols())
            .map(|j| {
                let mut acc = ComplexMatrix::zeros(self.dim, self.dim);
                for row in &self.effects {
                    acc = &acc + &row[j];
                }
                acc
            })
            .collect()
    }

    pub fn first_margin_povm(&self, tol: &Tolerances) -> Result<DiscretePovm> {
        DiscretePovm::new(
            self.dim,
            self.row_labels.clone(),
            self.first_margin_effects(),
            tol,
        )
    }

    pub fn second_margin_povm(&self, tol: &Tolerances) -> Result<DiscretePovm> {
        DiscretePovm::new(
            self.dim,
            self.col_labels.clone(),
            self.second_margin_effects(),
            tol,
        )
    }

    /// The grid as a single POVM over pair labels `row|col`; zero cells are
    /// dropped.
    pub fn flatten(&self, tol: &Tolerances) -> Result<(DiscretePovm, Vec<String>)> {
        let mut labels = Vec::new();
        let mut effects = Vec::new();
        for (i, row) in self.effects.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                labels.push(format!("{}|{}", self.row_labels[i], self.col_labels[j]));
                effects.push(cell.clone());
            }
        }
        DiscretePovm::new_dropping_zero_effects(self.dim, labels, effects, tol)
    }

    /// Entrywise distance between two grids of identical shape.
    pub fn max_cell_distance(&self, other: &JointObservable) -> Result<f64> {
        if self.n_rows() != other.n_rows() || self.n_cols() != other.n_cols() {
            return Err(Error::DimensionMismatch(
                "joint grids have different shapes".into(),
            ));
        }
        let mut worst = 0.0_f64;
        for i in 0..self.n_rows() {
            for j in 0..self.n_cols() {
                worst = worst.max((self.cell(i, j) - other.cell(i, j)).operator_norm());
            }
        }
        Ok(worst)
    }
}

/// Sequential measurement as a joint observable: `N_ij = J_i*(M'_j)`.
pub fn sequential_joint(
    instrument: &Instrument,
    second_povm: &DiscretePovm,
    tol: &Tolerances,
) -> Result<JointObservable> {
    if instrument.output_dim() != second_povm.dim() {
        return Err(Error::DimensionMismatch(format!(
            "instrument output dimension {} does not match second POVM dimension {}",
            instrument.output_dim(),
            second_povm.dim()
        )));
    }
    let mut grid = Vec::with_capacity(instrument.n_outcomes());
    for i in 0..instrument.n_outcomes() {
        let mut row = Vec::with_capacity(second_povm.n_outcomes());
        for m_j in second_povm.effects() {
            row.push(instrument.heisenberg_apply(i, m_j)?.hermitian_part());
        }
        grid.push(row);
    }
    JointObservable::new(
        instrument.input_dim(),
        instrument.labels().to_vec(),
        second_povm.labels().to_vec(),
        grid,
        tol,
    )
}

/// Orthonormal Hermitian basis of the m-by-m matrices (Frobenius inner
/// product): diagonal units, then symmetric and antisymmetric pairs.
fn hermitian_basis(m: usize) -> Vec<ComplexMatrix> {
    let mut basis = Vec::with_capacity(m * m);
    for k in 0..m {
        let mut e = DMatrix::zeros(m, m);
        e[(k, k)] = Complex64::new(1.0, 0.0);
        basis.push(ComplexMatrix::from_na(e));
    }
    let inv_sqrt2 = Complex64::new(0.5_f64.sqrt(), 0.0);
    for k in 0..m {
        for l in (k + 1)..m {
            let mut x = DMatrix::zeros(m, m);
            x[(k, l)] = inv_sqrt2;
            x[(l, k)] = inv_sqrt2;
            basis.push(ComplexMatrix::from_na(x));
            let mut y = DMatrix::zeros(m, m);
            y[(k, l)] = Complex64::new(0.0, -0.5_f64.sqrt());
            y[(l, k)] = Complex64::new(0.0, 0.5_f64.sqrt());
            basis.push(ComplexMatrix::from_na(y));
        }
    }
    basis
}

fn herm_from_params(basis: &[ComplexMatrix], params: &[f64]) -> ComplexMatrix {
    let m = basis[0].rows();
    let mut acc = ComplexMatrix::zeros(m, m);
    for (b, &x) in basis.iter().zip(params) {
        if x != 0.0 {
            acc = &acc + &b.scale(x);
        }
    }
    acc
}

/// Inverse of the block Gram `G = J_i J_i*`, whose invertibility is exactly
/// the linear independence of the `d_ik` guaranteed by the minimal dilation.
fn invert_block_gram(j_block: &ComplexMatrix, tol: &Tolerances) -> Result<ComplexMatrix> {
    let gram = j_block * &j_block.adjoint();
    let eig = eig_hermitian(&gram, tol)?;
    let lambda_max = eig.eigenvalues.last().copied().unwrap_or(0.0);
    let cutoff = tol.rank_rel_tol * gram.rows() as f64 * lambda_max.max(0.0);
    let mut inv = ComplexMatrix::zeros(gram.rows(), gram.rows());
    for k in 0..eig.dim() {
        let lambda = eig.eigenvalues[k];
        if lambda <= cutoff {
            return Err(Error::BlockResidual(f64::INFINITY));
        }
        let v = eig.eigenvector(k);
        inv = &inv + &ComplexMatrix::dyad(&v, &v).scale(1.0 / lambda);
    }
    Ok(inv)
}

/// Stacks `[Re vec(M); Im vec(M)]` into a real column.
fn real_stack(m: &ComplexMatrix) -> DVector<f64> {
    let entries = m.entries_row_major();
    let half = entries.len();
    DVector::from_fn(2 * half, |r, _| {
        if r < half {
            entries[r].re
        } else {
            entries[r - half].im
        }
    })
}

/// Per-outcome blocks of a joint observable through the minimal dilation of
/// its first margin: `N_ij = J_i* B_ij J_i` with `B_ij` PSD on the block and
/// `Σ_j B_ij = I_{m_i}`.
#[derive(Debug, Clone)]
pub struct JointBlocks {
    /// `blocks[i][j]` is the `m_i`-by-`m_i` block for cell `(i, j)`.
    pub blocks: Vec<Vec<ComplexMatrix>>,
    /// `max_ij ‖J_i* B_ij J_i − N_ij‖`.
    pub reconstruction_residual: f64,
    /// `max_i ‖Σ_j B_ij − I‖`.
    pub normalization_residual: f64,
    /// Most negative block eigenvalue encountered (0 when all PSD).
    pub min_block_eigenvalue: f64,
}

/// Solves the per-cell linear systems `J_i* B J_i = N_ij` in the Hermitian
/// unknown `B`. Minimality of the dilation keeps the block Gram
/// `G_i = J_i J_i*` invertible, so the pseudo-inverse of the compression map
/// has the closed form `B = G_i^{-1} J_i N_ij J_i* G_i^{-1}`; the
/// reconstruction residual then flags cells that are not realizable.
pub fn joint_to_blocks(
    povm: &DiscretePovm,
    joint: &JointObservable,
    tol: &Tolerances,
) -> Result<JointBlocks> {
    let dilation = minimal_naimark(povm, tol)?;
    joint_to_blocks_with(povm, &dilation, joint, tol)
}

/// As [`joint_to_blocks`] with a precomputed dilation.
pub fn joint_to_blocks_with(
    povm: &DiscretePovm,
    dilation: &NaimarkDilation,
    joint: &JointObservable,
    tol: &Tolerances,
) -> Result<JointBlocks> {
    if joint.dim() != povm.dim() || joint.n_rows() != povm.n_outcomes() {
        return Err(Error::DimensionMismatch(
            "joint observable does not match the POVM shape".into(),
        ));
    }
    // First margin must be the POVM itself.
    let margins = joint.first_margin_effects();
    let mut margin_residual = 0.0_f64;
    for (margin, effect) in margins.iter().zip(povm.effects()) {
        margin_residual = margin_residual.max((margin - effect).operator_norm());
    }
    if margin_residual > tol.id_tol * (povm.dim() as f64).sqrt() {
        return Err(Error::MarginMismatch(margin_residual));
    }

    let mut blocks = Vec::with_capacity(povm.n_outcomes());
    let mut reconstruction_residual = 0.0_f64;
    let mut normalization_residual = 0.0_f64;
    let mut min_block_eigenvalue = 0.0_f64;

    for i in 0..povm.n_outcomes() {
        let m_i = dilation.multiplicities()[i];
        let j_block = dilation.block_isometry(i);
        let gram_inv = invert_block_gram(&j_block, tol)?;

        let mut row_blocks = Vec::with_capacity(joint.n_cols());
        let mut block_sum = ComplexMatrix::zeros(m_i, m_i);
        for j in 0..joint.n_cols() {
            let lifted = &(&(&gram_inv * &j_block) * joint.cell(i, j)) * &j_block.adjoint();
            let block = (&lifted * &gram_inv).hermitian_part();
            let rebuilt = &(&j_block.adjoint() * &block) * &j_block;
            reconstruction_residual =
                reconstruction_residual.max((&rebuilt - joint.cell(i, j)).operator_norm());
            let eig = eig_hermitian(&block, tol)?;
            min_block_eigenvalue = min_block_eigenvalue.min(eig.eigenvalues[0]);
            block_sum = &block_sum + &block;
            row_blocks.push(block);
        }
        normalization_residual = normalization_residual
            .max((&block_sum - &ComplexMatrix::identity(m_i)).operator_norm());
        blocks.push(row_blocks);
    }

    if reconstruction_residual > BLOCK_RECONSTRUCTION_TOL {
        return Err(Error::BlockResidual(reconstruction_residual));
    }
    let psd_floor = -tol.psd_tol * 2.0;
    if min_block_eigenvalue < psd_floor {
        return Err(Error::BlockResidual(-min_block_eigenvalue));
    }
    Ok(JointBlocks {
        blocks,
        reconstruction_residual,
        normalization_residual,
        min_block_eigenvalue,
    })
}

/// Rewrites a joint measurement of `M` as a sequential one: the returned
/// instrument measures `M`, and measuring the returned rank-1 basis PVM on
/// the instrument output reproduces the joint grid.
///
/// The instrument operations are measure-and-prepare on each block:
/// `J_i*(B) = Σ_j <e_j|B|e_j> J_i* B_ij J_i` with Kraus operators
/// `|e_j><c_ijk| J_i` over spectral decompositions `B_ij = Σ_k |c_ijk><c_ijk|`.
pub fn joint_to_sequential(
    povm: &DiscretePovm,
    joint: &JointObservable,
    tol: &Tolerances,
) -> Result<(Instrument, DiscretePovm)> {
    let dilation = minimal_naimark(povm, tol)?;
    let blocks = joint_to_blocks_with(povm, &dilation, joint, tol)?;
    let n_cols = joint.n_cols();

    let mut operations = Vec::with_capacity(povm.n_outcomes());
    for i in 0..povm.n_outcomes() {
        let j_block = dilation.block_isometry(i);
        let m_i = dilation.multiplicities()[i];
        let mut ops = Vec::new();
        for j in 0..n_cols {
            let block = &blocks.blocks[i][j];
            if block.operator_norm() <= tol.rank_rel_tol * m_i as f64 {
                continue;
            }
            let eig = eig_hermitian(block, tol)?;
            let lambda_max = eig.eigenvalues.last().copied().unwrap_or(0.0);
            let cutoff = tol.rank_rel_tol * m_i as f64 * lambda_max.max(0.0);
            for k in 0..eig.dim() {
                let lambda = eig.eigenvalues[k];
                if lambda <= cutoff {
                    continue;
                }
                // Row vector <c_ijk| J_i lifted to the |e_j> axis.
                let c = eig.eigenvector(k).scale(lambda.sqrt());
                let row = &c.adjoint() * &j_block;
                let mut op = DMatrix::zeros(n_cols, povm.dim());
                for col in 0..povm.dim() {
                    op[(j, col)] = row.get(0, col);
                }
                ops.push(ComplexMatrix::from_na(op));
            }
        }
        if ops.is_empty() {
            return Err(Error::InvalidInstrument(format!(
                "outcome {i} of the joint grid is entirely zero"
            )));
        }
        operations.push(ops);
    }
    let instrument = Instrument::new(povm.labels().to_vec(), povm.dim(), n_cols, operations, tol)?;

    let mut basis_effects = Vec::with_capacity(n_cols);
    for j in 0..n_cols {
        let mut p = DMatrix::zeros(n_cols, n_cols);
        p[(j, j)] = Complex64::new(1.0, 0.0);
        basis_effects.push(ComplexMatrix::from_na(p));
    }
    let second = DiscretePovm::new(n_cols, joint.col_labels().to_vec(), basis_effects, tol)?;

    Ok((instrument, second))
}

/// Reconstructs the unique joint observable of an extreme `M` and a second
/// margin known to be jointly measurable with it.
///
/// The margin constraints alone form a linear system on the Hermitian blocks;
/// extremality makes that system injective, so the least-squares solution is
/// the only candidate. It is accepted when the constraint residual and block
/// PSD deficit stay below [`JOINT_FEASIBILITY_TOL`], and rejected as not
/// jointly measurable otherwise.
pub fn unique_joint_for_extreme(
    povm: &DiscretePovm,
    second_margin: &DiscretePovm,
    tol: &Tolerances,
) -> Result<JointObservable> {
    if povm.dim() != second_margin.dim() {
        return Err(Error::DimensionMismatch(format!(
            "POVMs act on dimensions {} and {}",
            povm.dim(),
            second_margin.dim()
        )));
    }
    if !crate::certify::certify_extremality(povm, tol)?.value {
        return Err(Error::NotExtreme);
    }
    let dilation = minimal_naimark(povm, tol)?;
    let n = povm.n_outcomes();
    let n2 = second_margin.n_outcomes();
    let d = povm.dim();

    let bases: Vec<Vec<ComplexMatrix>> = dilation
        .multiplicities()
        .iter()
        .map(|&m| hermitian_basis(m))
        .collect();
    let compressed: Vec<Vec<DVector<f64>>> = (0..n)
        .map(|i| {
            let j_block = dilation.block_isometry(i);
            bases[i]
                .iter()
                .map(|b| real_stack(&(&(&j_block.adjoint() * b) * &j_block)))
                .collect()
        })
        .collect();

    let mut var_offsets = Vec::with_capacity(n * n2);
    let mut n_vars = 0usize;
    for basis in &bases {
        for _ in 0..n2 {
            var_offsets.push(n_vars);
            n_vars += basis.len();
        }
    }
    let margin_rows = 2 * d * d;
    let total_params: usize = bases.iter().map(|b| b.len()).sum();
    let n_rows = n2 * margin_rows + total_params;

    let mut system = DMatrix::<f64>::zeros(n_rows, n_vars);
    let mut rhs = DVector::<f64>::zeros(n_rows);

    // (a) second-margin constraints: Σ_i J_i* B_ij J_i = M''_j.
    for j in 0..n2 {
        let row_base = j * margin_rows;
        for i in 0..n {
            let var_base = var_offsets[i * n2 + j];
            for (q, col) in compressed[i].iter().enumerate() {
                for r in 0..margin_rows {
                    system[(row_base + r, var_base + q)] = col[r];
                }
            }
        }
        let b = real_stack(second_margin.effect(j));
        for r in 0..margin_rows {
            rhs[row_base + r] = b[r];
        }
    }

    // (b) normalization: Σ_j B_ij = I_{m_i}, expressed per basis coefficient
    // (the basis is orthonormal, so identity has coefficients 1 on the
    // diagonal units and 0 elsewhere).
    let mut row = n2 * margin_rows;
    for i in 0..n {
        let m_i = dilation.multiplicities()[i];
        for q in 0..bases[i].len() {
            for j in 0..n2 {
                system[(row, var_offsets[i * n2 + j] + q)] = 1.0;
            }
            rhs[row] = if q < m_i { 1.0 } else { 0.0 };
            row += 1;
        }
    }

    let solution = normal_equations_pinv_solve(&system, &rhs);

    // Rebuild blocks and measure feasibility in operator norms.
    let mut grid = Vec::with_capacity(n);
    let mut infeasibility = 0.0_f64;
    let mut second_fit: Vec<ComplexMatrix> = (0..n2).map(|_| ComplexMatrix::zeros(d, d)).collect();
    for i in 0..n {
        let j_block = dilation.block_isometry(i);
        let m_i = dilation.multiplicities()[i];
        let mut row_cells = Vec::with_capacity(n2);
        let mut block_sum = ComplexMatrix::zeros(m_i, m_i);
        for j in 0..n2 {
            let var_base = var_offsets[i * n2 + j];
            let params = &solution.as_slice()[var_base..var_base + bases[i].len()];
            let mut block = herm_from_params(&bases[i], params).hermitian_part();
            let eig = eig_hermitian(&block, tol)?;
            let min_eig = eig.eigenvalues[0];
            if min_eig < 0.0 {
                infeasibility = infeasibility.max(-min_eig);
                // Clamp the tiny negative part so the returned grid is PSD.
                block = {
                    let m = eig.dim();
                    let v = eig.eigenvectors.na();
                    let lambda = DMatrix::from_fn(m, m, |r, c| {
                        if r == c {
                            Complex64::new(eig.eigenvalues[r].max(0.0), 0.0)
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    });
                    ComplexMatrix::from_na(v * lambda * v.adjoint())
                };
            }
            block_sum = &block_sum + &block;
            let cell = (&(&j_block.adjoint() * &block) * &j_block).hermitian_part();
            second_fit[j] = &second_fit[j] + &cell;
            row_cells.push(cell);
        }
        infeasibility =
            infeasibility.max((&block_sum - &ComplexMatrix::identity(m_i)).operator_norm());
        grid.push(row_cells);
    }
    for (fit, target) in second_fit.iter().zip(second_margin.effects()) {
        infeasibility = infeasibility.max((fit - target).operator_norm());
    }
    if infeasibility > JOINT_FEASIBILITY_TOL {
        return Err(Error::NotJointlyMeasurable(infeasibility));
    }

    JointObservable::new(
        d,
        povm.labels().to_vec(),
        second_margin.labels().to_vec(),
        grid,
        tol,
    )
}
