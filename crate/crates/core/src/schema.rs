//! Versioned JSON file formats shared between the library and the CLI.
//!
//! Matrices are nested row-major arrays of `[re, im]` pairs; serde_json
//! prints doubles with the shortest round-tripping representation, so file
//! round trips are bit exact for finite values. Every file carries
//! `schema_version`, and unknown versions are refused.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instrument::Instrument;
use crate::numerics::{ComplexMatrix, Tolerances};
use crate::observable::{DiscretePovm, State};
use crate::process::{KrausChannel, MarkovMatrix};

pub const SCHEMA_VERSION: u32 = 1;

fn check_version(version: u32) -> Result<()> {
    if version != SCHEMA_VERSION {
        return Err(Error::UnsupportedSchemaVersion(version));
    }
    Ok(())
}

/// POVM file: `{ schema_version, dim, outcomes, effects }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PovmFile {
    pub schema_version: u32,
    pub dim: usize,
    pub outcomes: Vec<String>,
    pub effects: Vec<ComplexMatrix>,
}

impl PovmFile {
    pub fn from_povm(povm: &DiscretePovm) -> Self {
        PovmFile {
            schema_version: SCHEMA_VERSION,
            dim: povm.dim(),
            outcomes: povm.labels().to_vec(),
            effects: povm.effects().to_vec(),
        }
    }

    /// Version check plus full POVM validation.
    pub fn into_povm(self, tol: &Tolerances) -> Result<DiscretePovm> {
        check_version(self.schema_version)?;
        DiscretePovm::new(self.dim, self.outcomes, self.effects, tol)
    }

    /// Version check only; the caller inspects validity separately.
    pub fn into_parts(self) -> Result<(usize, Vec<String>, Vec<ComplexMatrix>)> {
        check_version(self.schema_version)?;
        Ok((self.dim, self.outcomes, self.effects))
    }
}

/// Density-matrix file: `{ schema_version, dim, matrix }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateFile {
    pub schema_version: u32,
    pub dim: usize,
    pub matrix: ComplexMatrix,
}

impl StateFile {
    pub fn from_state(state: &State) -> Self {
        StateFile {
            schema_version: SCHEMA_VERSION,
            dim: state.dim(),
            matrix: state.matrix().clone(),
        }
    }

    pub fn into_state(self, tol: &Tolerances) -> Result<State> {
        check_version(self.schema_version)?;
        if self.matrix.rows() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{} but dim field says {}",
                self.matrix.rows(),
                self.matrix.cols(),
                self.dim
            )));
        }
        State::new(self.matrix, tol)
    }
}

/// Markov matrix file with row-major real entries, one array per row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelFile {
    pub schema_version: u32,
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Vec<f64>>,
}

impl KernelFile {
    pub fn from_markov(kernel: &MarkovMatrix) -> Self {
        let entries = (0..kernel.rows())
            .map(|r| (0..kernel.cols()).map(|c| kernel.get(r, c)).collect())
            .collect();
        KernelFile {
            schema_version: SCHEMA_VERSION,
            rows: kernel.rows(),
            cols: kernel.cols(),
            entries,
        }
    }

    pub fn into_markov(self, tol: &Tolerances) -> Result<MarkovMatrix> {
        check_version(self.schema_version)?;
        if self.entries.len() != self.rows || self.entries.iter().any(|row| row.len() != self.cols)
        {
            return Err(Error::InvalidKernel(format!(
                "entry grid does not match {}x{}",
                self.rows, self.cols
            )));
        }
        MarkovMatrix::new(
            self.rows,
            self.cols,
            self.entries.into_iter().flatten().collect(),
            tol,
        )
    }
}

/// Channel file: Kraus operators of a Heisenberg-side unital map.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelFile {
    pub schema_version: u32,
    pub input_dim: usize,
    pub output_dim: usize,
    pub kraus: Vec<ComplexMatrix>,
}

impl ChannelFile {
    pub fn from_channel(channel: &KrausChannel) -> Self {
        ChannelFile {
            schema_version: SCHEMA_VERSION,
            input_dim: channel.input_dim(),
            output_dim: channel.output_dim(),
            kraus: channel.kraus_ops().to_vec(),
        }
    }

    pub fn into_channel(self, tol: &Tolerances) -> Result<KrausChannel> {
        check_version(self.schema_version)?;
        KrausChannel::new(self.input_dim, self.output_dim, self.kraus, tol)
    }
}

/// Kraus list of one instrument outcome, keyed by its label.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstrumentOutcome {
    pub outcome: String,
    pub kraus: Vec<ComplexMatrix>,
}

/// Instrument file: per-outcome Kraus lists.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstrumentFile {
    pub schema_version: u32,
    pub input_dim: usize,
    pub output_dim: usize,
    pub operations: Vec<InstrumentOutcome>,
}

impl InstrumentFile {
    pub fn from_instrument(instrument: &Instrument) -> Self {
        let operations = instrument
            .labels()
            .iter()
            .zip(instrument.operations())
            .map(|(label, kraus)| InstrumentOutcome {
                outcome: label.clone(),
                kraus: kraus.clone(),
            })
            .collect();
        InstrumentFile {
            schema_version: SCHEMA_VERSION,
            input_dim: instrument.input_dim(),
            output_dim: instrument.output_dim(),
            operations,
        }
    }

    pub fn into_instrument(self, tol: &Tolerances) -> Result<Instrument> {
        check_version(self.schema_version)?;
        let labels = self.operations.iter().map(|o| o.outcome.clone()).collect();
        let kraus = self.operations.into_iter().map(|o| o.kraus).collect();
        Instrument::new(labels, self.input_dim, self.output_dim, kraus, tol)
    }
}

/// Joint observable file: the outcome grid with its two label axes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointFile {
    pub schema_version: u32,
    pub dim: usize,
    pub row_outcomes: Vec<String>,
    pub col_outcomes: Vec<String>,
    /// `cells[i][j]` is the effect for row outcome `i` and column outcome `j`.
    pub cells: Vec<Vec<ComplexMatrix>>,
}

impl JointFile {
    pub fn from_joint(joint: &crate::instrument::JointObservable) -> Self {
        let cells = (0..joint.n_rows())
            .map(|i| {
                (0..joint.n_cols())
                    .map(|j| joint.cell(i, j).clone())
                    .collect()
            })
            .collect();
        JointFile {
            schema_version: SCHEMA_VERSION,
            dim: joint.dim(),
            row_outcomes: joint.row_labels().to_vec(),
            col_outcomes: joint.col_labels().to_vec(),
            cells,
        }
    }

    pub fn into_joint(self, tol: &Tolerances) -> Result<crate::instrument::JointObservable> {
        check_version(self.schema_version)?;
        crate::instrument::JointObservable::new(
            self.dim,
            self.row_outcomes,
            self.col_outcomes,
            self.cells,
            tol,
        )
    }
}

/// Dilation export for external verification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DilationFile {
    pub schema_version: u32,
    pub dim: usize,
    pub total_dim: usize,
    pub outcomes: Vec<String>,
    pub multiplicities: Vec<usize>,
    /// Row range `[start, end)` of each outcome block in the isometry.
    pub blocks: Vec<[usize; 2]>,
    pub isometry: ComplexMatrix,
    /// Diagonalizing vectors per outcome, descending eigenvalue order.
    pub vectors: Vec<Vec<ComplexMatrix>>,
    pub rank_cutoffs: Vec<f64>,
}

impl DilationFile {
    pub fn from_dilation(dilation: &crate::dilation::NaimarkDilation, outcomes: &[String]) -> Self {
        let blocks = (0..dilation.multiplicities().len())
            .map(|i| {
                let r = dilation.block_range(i);
                [r.start, r.end]
            })
            .collect();
        DilationFile {
            schema_version: SCHEMA_VERSION,
            dim: dilation.isometry().cols(),
            total_dim: dilation.total_dim(),
            outcomes: outcomes.to_vec(),
            multiplicities: dilation.multiplicities().to_vec(),
            blocks,
            isometry: dilation.isometry().clone(),
            vectors: dilation.vectors().to_vec(),
            rank_cutoffs: dilation.rank_cutoffs().to_vec(),
        }
    }
}
