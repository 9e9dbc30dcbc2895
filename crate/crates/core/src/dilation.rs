//! Minimal diagonal Naimark dilation and the maximal rank-1 refinement.
//!
//! Every effect is diagonalized as `M_i = Σ_k |d_ik><d_ik|` with
//! `d_ik = √λ_ik φ_ik`, the per-outcome multiplicity `m_i` is the number of
//! eigenvalues above the rank cutoff, and the isometry
//! `J = Σ_ik |e_ik><d_ik|` compresses the coordinate block PVM back onto the
//! original effects: `J* P_i J = M_i`. The block vectors span each block, so
//! the dilation is minimal. A non-minimal tensor-form dilation (blocks
//! embedded into `C^N ⊗ C^{max m_i}` under a rank-1 PVM on the first factor)
//! is a derivable view of the same data and is not materialized here.

use std::ops::Range;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{eig_hermitian, ComplexMatrix, Tolerances};
use crate::observable::{DiscretePovm, Partition};

/// Minimal diagonal Naimark dilation of a discrete POVM.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NaimarkDilation {
    multiplicities: Vec<usize>,
    total_dim: usize,
    /// `D`-by-`d` isometry whose row `(i,k)` is `d_ik*`.
    isometry: ComplexMatrix,
    /// Row range of each outcome block.
    block_ranges: Vec<Range<usize>>,
    /// Diagonalizing vectors `d_ik`, one family per outcome, in descending
    /// eigenvalue order.
    vectors: Vec<Vec<ComplexMatrix>>,
    /// Eigenvalue cutoff used to decide each multiplicity, kept for
    /// reproducibility.
    rank_cutoffs: Vec<f64>,
}

/// Rank-1 refinement together with the map back onto the parent outcomes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Refinement {
    pub refined: DiscretePovm,
    /// Index of the parent outcome for each refined outcome.
    pub parent_map: Vec<usize>,
    /// Labels of the parent POVM, in order.
    pub parent_labels: Vec<String>,
}

impl NaimarkDilation {
    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn isometry(&self) -> &ComplexMatrix {
        &self.isometry
    }

    pub fn block_range(&self, outcome: usize) -> Range<usize> {
        self.block_ranges[outcome].clone()
    }

    pub fn vectors(&self) -> &[Vec<ComplexMatrix>] {
        &self.vectors
    }

    pub fn rank_cutoffs(&self) -> &[f64] {
        &self.rank_cutoffs
    }

    /// `m_i`-by-`d` block of the isometry belonging to one outcome
    /// (the rows `d_ik*`).
    pub fn block_isometry(&self, outcome: usize) -> ComplexMatrix {
        let range = self.block_range(outcome);
        let d = self.isometry.cols();
        let block = DMatrix::from_fn(range.len(), d, |r, c| self.isometry.get(range.start + r, c));
        ComplexMatrix::from_na(block)
    }

    /// Coordinate projection `P_i` on the dilation space.
    pub fn block_projection(&self, outcome: usize) -> ComplexMatrix {
        let range = self.block_range(outcome);
        let mut p = DMatrix::zeros(self.total_dim, self.total_dim);
        for r in range {
            p[(r, r)] = Complex64::new(1.0, 0.0);
        }
        ComplexMatrix::from_na(p)
    }

    /// Compression `J* P_i J` of one block, which must reproduce `M_i`.
    pub fn compressed_block(&self, outcome: usize) -> ComplexMatrix {
        let block = self.block_isometry(outcome);
        &block.adjoint() * &block
    }

    /// The block PVM `(P_1, ..., P_N)` of the dilation space as a discrete
    /// POVM carrying the parent labels.
    pub fn block_pvm(&self, labels: &[String], tol: &Tolerances) -> Result<DiscretePovm> {
        let effects = (0..self.multiplicities.len())
            .map(|i| self.block_projection(i))
            .collect();
        DiscretePovm::new(self.total_dim, labels.to_vec(), effects, tol)
    }
}

/// Builds the minimal diagonal dilation. Multiplicities are the effect ranks;
/// eigenvalues at or below `rank_rel_tol * d * λ_max` are treated as zero.
pub fn minimal_naimark(povm: &DiscretePovm, tol: &Tolerances) -> Result<NaimarkDilation> {
    let d = povm.dim();
    let mut vectors: Vec<Vec<ComplexMatrix>> = Vec::with_capacity(povm.n_outcomes());
    let mut rank_cutoffs = Vec::with_capacity(povm.n_outcomes());

    for effect in povm.effects() {
        let eig = eig_hermitian(effect, tol)?;
        let lambda_max = *eig.eigenvalues.last().expect("nonempty spectrum");
        let cutoff = tol.rank_rel_tol * d as f64 * lambda_max.max(0.0);
        rank_cutoffs.push(cutoff);
        // Descending eigenvalue order within the block.
        let mut family = Vec::new();
        for k in (0..eig.dim()).rev() {
            let lambda = eig.eigenvalues[k];
            if lambda <= cutoff {
                break;
            }
            let v = eig.eigenvector(k);
            family.push(v.scale(lambda.sqrt()));
        }
        if family.is_empty() {
            return Err(Error::InvalidPovm(
                "effect with numerical rank zero; zero effects must be dropped first".into(),
            ));
        }
        vectors.push(family);
    }

    let multiplicities: Vec<usize> = vectors.iter().map(|f| f.len()).collect();
    let total_dim: usize = multiplicities.iter().sum();

    let mut isometry = DMatrix::zeros(total_dim, d);
    let mut block_ranges = Vec::with_capacity(multiplicities.len());
    let mut row = 0usize;
    for family in &vectors {
        let start = row;
        for d_ik in family {
            for c in 0..d {
                isometry[(row, c)] = d_ik.get(c, 0).conj();
            }
            row += 1;
        }
        block_ranges.push(start..row);
    }

    Ok(NaimarkDilation {
        multiplicities,
        total_dim,
        isometry: ComplexMatrix::from_na(isometry),
        block_ranges,
        vectors,
        rank_cutoffs,
    })
}

/// Max of `‖J* P_i J − M_i‖` over outcomes and `‖J* J − I‖`.
pub fn verify_dilation(dilation: &NaimarkDilation, povm: &DiscretePovm) -> Result<f64> {
    if dilation.isometry.cols() != povm.dim() || dilation.multiplicities.len() != povm.n_outcomes()
    {
        return Err(Error::DimensionMismatch(format!(
            "dilation is {}x{} over {} blocks; POVM has d={} and {} outcomes",
            dilation.total_dim,
            dilation.isometry.cols(),
            dilation.multiplicities.len(),
            povm.dim(),
            povm.n_outcomes()
        )));
    }
    let j = &dilation.isometry;
    let gram = &j.adjoint() * j;
    let mut residual = (&gram - &ComplexMatrix::identity(povm.dim())).operator_norm();
    for i in 0..povm.n_outcomes() {
        let compressed = dilation.compressed_block(i);
        residual = residual.max((&compressed - povm.effect(i)).operator_norm());
    }
    Ok(residual)
}

/// Maximal rank-1 refinement: one outcome `(i,k)` per diagonalizing vector,
/// with effects `|d_ik><d_ik|`. Coarse graining by parent recovers the input.
pub fn rank1_refinement(povm: &DiscretePovm, tol: &Tolerances) -> Result<Refinement> {
    let dilation = minimal_naimark(povm, tol)?;
    let mut labels = Vec::new();
    let mut effects = Vec::new();
    let mut parent_map = Vec::new();
    for (i, family) in dilation.vectors.iter().enumerate() {
        for (k, d_ik) in family.iter().enumerate() {
            labels.push(format!("{}.{}", povm.labels()[i], k + 1));
            effects.push(ComplexMatrix::dyad(d_ik, d_ik));
            parent_map.push(i);
        }
    }
    let refined = DiscretePovm::new(povm.dim(), labels, effects, tol)?;
    Ok(Refinement {
        refined,
        parent_map,
        parent_labels: povm.labels().to_vec(),
    })
}

impl Refinement {
    /// Partition of the refined outcomes by parent outcome.
    pub fn parent_partition(&self) -> Partition {
        let mut cells: Vec<(String, Vec<String>)> = self
            .parent_labels
            .iter()
            .map(|l| (l.clone(), Vec::new()))
            .collect();
        for (refined_idx, &parent) in self.parent_map.iter().enumerate() {
            cells[parent]
                .1
                .push(self.refined.labels()[refined_idx].clone());
        }
        cells
    }

    /// Coarse grains the refinement back onto the parent outcomes.
    pub fn coarse_grain_back(&self, tol: &Tolerances) -> Result<DiscretePovm> {
        Ok(self
            .refined
            .coarse_grain(&self.parent_partition(), tol)?
            .povm)
    }
}
