//! Optimality certificates for discrete POVMs.
//!
//! The properties come in two families. Rank-linked: rank-1 ("determines the
//! future") coincides with post-processing cleanness, and extremality plus
//! informational completeness forces rank 1 with `N = d²` outcomes.
//! Value-linked: the norm-1 and eigenvalue-1 properties coincide in finite
//! dimension, characterize pre-processing cleanness, and split every effect
//! as a projection plus a residual on the orthocomplement.

mod witness;

pub use witness::{
    ic_pure_witness, zw_falsifier, IcPureWitness, SearchOutcome, WitnessConfig, ZwWitness,
};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::dilation::minimal_naimark;
use crate::error::{Error, Result};
use crate::numerics::{eig_hermitian, is_projection, numerical_rank, ComplexMatrix, Tolerances};
use crate::observable::DiscretePovm;

/// Exhaustive subset enumeration is capped at this many outcomes (2^20
/// subsets); larger inputs must opt into sampling.
pub const SUBSET_EXHAUSTIVE_CAP: usize = 20;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Rank1Certificate {
    pub value: bool,
    pub ranks: Vec<usize>,
}

/// True iff every effect has numerical rank one.
pub fn certify_rank1(povm: &DiscretePovm, tol: &Tolerances) -> Rank1Certificate {
    let ranks: Vec<usize> = povm
        .effects()
        .iter()
        .map(|m| numerical_rank(m, tol))
        .collect();
    Rank1Certificate {
        value: ranks.iter().all(|&r| r == 1),
        ranks,
    }
}

/// Identical to the rank-1 test: a discrete POVM is post-processing clean
/// exactly when it is rank-1.
pub fn certify_postprocessing_clean(povm: &DiscretePovm, tol: &Tolerances) -> bool {
    certify_rank1(povm, tol).value
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IcCertificate {
    pub value: bool,
    /// Rank of the stacked vectorized effects.
    pub rank: usize,
    /// `d² − rank`.
    pub deficiency: usize,
}

/// True iff the effects span the full operator space, i.e. the `N`-by-`d²`
/// matrix of vectorized effects has rank `d²`.
pub fn certify_informational_completeness(povm: &DiscretePovm, tol: &Tolerances) -> IcCertificate {
    let d = povm.dim();
    let n = povm.n_outcomes();
    let stacked = DMatrix::from_fn(n, d * d, |i, q| povm.effect(i).get(q / d, q % d));
    let rank = numerical_rank(&ComplexMatrix::from_na(stacked), tol);
    IcCertificate {
        value: rank == d * d,
        rank,
        deficiency: d * d - rank,
    }
}

/// Injectivity of `Δ ↦ (tr[Δ M_i])_i` on the span of the given traceless
/// Hermitian basis: informational completeness restricted to states whose
/// differences live in that span.
pub fn restricted_ic(
    povm: &DiscretePovm,
    basis: &[ComplexMatrix],
    tol: &Tolerances,
) -> Result<bool> {
    let d = povm.dim();
    if basis.is_empty() {
        return Err(Error::BadBasis("empty basis".into()));
    }
    for (k, b) in basis.iter().enumerate() {
        if b.rows() != d || b.cols() != d {
            return Err(Error::BadBasis(format!(
                "element {k} is {}x{}, expected {d}x{d}",
                b.rows(),
                b.cols()
            )));
        }
        if b.hermiticity_residual() > tol.herm_tol * (1.0 + b.operator_norm()) {
            return Err(Error::BadBasis(format!("element {k} is not Hermitian")));
        }
        if b.trace().norm() > tol.id_tol * (1.0 + b.operator_norm()) {
            return Err(Error::BadBasis(format!("element {k} is not traceless")));
        }
    }
    let stacked = DMatrix::from_fn(basis.len(), d * d, |k, q| basis[k].get(q / d, q % d));
    if numerical_rank(&ComplexMatrix::from_na(stacked), tol) != basis.len() {
        return Err(Error::BadBasis("elements are linearly dependent".into()));
    }

    // tr[B_k M_i] is real for Hermitian pairs; stack as a real matrix.
    let probe = DMatrix::from_fn(povm.n_outcomes(), basis.len(), |i, k| {
        let t = (basis[k].na() * povm.effect(i).na()).diagonal().sum();
        Complex64::new(t.re, 0.0)
    });
    Ok(numerical_rank(&ComplexMatrix::from_na(probe), tol) == basis.len())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtremalityCertificate {
    pub value: bool,
    /// Number of dyads `|d_ik><d_il|`, i.e. `Σ m_i²`.
    pub dyad_count: usize,
    /// Rank of the stacked dyads.
    pub rank: usize,
}

/// Extremality through the dilation: the dyads `|d_ik><d_il|` over every
/// outcome must be linearly independent.
pub fn certify_extremality(
    povm: &DiscretePovm,
    tol: &Tolerances,
) -> Result<ExtremalityCertificate> {
    let dilation = minimal_naimark(povm, tol)?;
    Ok(extremality_of_families(povm.dim(), dilation.vectors(), tol))
}

/// The dyad-independence test on explicit vector families; exposed so that
/// invariance under block rotations of the non-unique `d_ik` can be checked
/// directly.
pub fn extremality_of_families(
    dim: usize,
    families: &[Vec<ComplexMatrix>],
    tol: &Tolerances,
) -> ExtremalityCertificate {
    let dyad_count: usize = families.iter().map(|f| f.len() * f.len()).sum();
    let mut stacked = DMatrix::zeros(dyad_count, dim * dim);
    let mut row = 0usize;
    for family in families {
        for k in family {
            for l in family {
                let dyad = ComplexMatrix::dyad(k, l);
                for q in 0..dim * dim {
                    stacked[(row, q)] = dyad.get(q / dim, q % dim);
                }
                row += 1;
            }
        }
    }
    let rank = numerical_rank(&ComplexMatrix::from_na(stacked), tol);
    ExtremalityCertificate {
        value: rank == dyad_count,
        dyad_count,
        rank,
    }
}

/// How to walk the outcome subsets in the norm-1 / eigenvalue-1 tests.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub enum SubsetStrategy {
    /// All `2^N` subsets; error above [`SUBSET_EXHAUSTIVE_CAP`] outcomes.
    #[default]
    Exhaustive,
    /// Singletons and their complements always, plus this many random
    /// subsets. The certificate is flagged incomplete.
    Sampled { max_subsets: usize, seed: u64 },
}

/// Joint norm-1 / eigenvalue-1 certificate. For PSD effects the operator
/// norm of `M(X)` is its largest eigenvalue, so in finite dimension the two
/// properties are decided by the same number and reported together.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueCertificate {
    pub norm1: bool,
    pub eigenvalue1: bool,
    /// Smallest `‖M(X)‖` over the checked nontrivial subsets (`None` when
    /// every subset was trivial).
    pub min_subset_norm: Option<f64>,
    /// Labels of the subset attaining the minimum.
    pub worst_subset: Vec<String>,
    /// False when subsets were sampled rather than enumerated.
    pub exhaustive: bool,
    pub subsets_checked: u64,
}

/// Norm-1 property: `‖M(X)‖ ≥ 1 − eigval1_tol` for every outcome subset `X`
/// with `M(X)` neither 0 nor the identity.
pub fn certify_norm1(
    povm: &DiscretePovm,
    tol: &Tolerances,
    strategy: &SubsetStrategy,
) -> Result<ValueCertificate> {
    certify_value_determination(povm, tol, strategy)
}

/// Eigenvalue-1 property; coincides with [`certify_norm1`] in finite
/// dimension and is evaluated by the same subset scan.
pub fn certify_eigenvalue1(
    povm: &DiscretePovm,
    tol: &Tolerances,
    strategy: &SubsetStrategy,
) -> Result<ValueCertificate> {
    certify_value_determination(povm, tol, strategy)
}

fn lambda_max(m: &ComplexMatrix, tol: &Tolerances) -> f64 {
    let eig = eig_hermitian(&m.hermitian_part(), tol).expect("Hermitian by construction");
    *eig.eigenvalues.last().expect("nonempty spectrum")
}

fn certify_value_determination(
    povm: &DiscretePovm,
    tol: &Tolerances,
    strategy: &SubsetStrategy,
) -> Result<ValueCertificate> {
    let n = povm.n_outcomes();
    let d = povm.dim();
    let identity = ComplexMatrix::identity(d);

    let mut min_norm: Option<f64> = None;
    let mut worst_mask: u64 = 0;
    let mut checked: u64 = 0;
    let mut consider = |mask: u64, effect: &ComplexMatrix| {
        if effect.operator_norm() <= tol.id_tol
            || (effect - &identity).operator_norm() <= tol.id_tol
        {
            return;
        }
        checked += 1;
        let top = lambda_max(effect, tol);
        if min_norm.is_none_or(|cur| top < cur) {
            min_norm = Some(top);
            worst_mask = mask;
        }
    };

    let exhaustive = match strategy {
        SubsetStrategy::Exhaustive => {
            if n > SUBSET_EXHAUSTIVE_CAP {
                return Err(Error::SubsetBlowup { n });
            }
            // Gray-code walk: one effect enters or leaves the running sum per
            // step.
            let mut sum = ComplexMatrix::zeros(d, d);
            let mut prev_gray: u64 = 0;
            for k in 1u64..(1u64 << n) {
                let gray = k ^ (k >> 1);
                let flipped = (gray ^ prev_gray).trailing_zeros() as usize;
                if gray & (1 << flipped) != 0 {
                    sum = &sum + povm.effect(flipped);
                } else {
                    sum = &sum - povm.effect(flipped);
                }
                prev_gray = gray;
                if gray.count_ones() as usize == n {
                    continue; // full set sums to the identity
                }
                consider(gray, &sum);
            }
            true
        }
        SubsetStrategy::Sampled { max_subsets, seed } => {
            for i in 0..n {
                let mask = 1u64 << i.min(63);
                consider(mask, povm.effect(i));
                let complement: Vec<usize> = (0..n).filter(|&j| j != i).collect();
                let comp_effect = povm.subset_effect(&complement);
                consider(!mask, &comp_effect);
            }
            let mut rng = ChaCha12Rng::seed_from_u64(*seed);
            for _ in 0..*max_subsets {
                let mut indices = Vec::new();
                let mut mask = 0u64;
                for i in 0..n {
                    if rng.random::<bool>() {
                        indices.push(i);
                        if i < 64 {
                            mask |= 1 << i;
                        }
                    }
                }
                if indices.is_empty() || indices.len() == n {
                    continue;
                }
                consider(mask, &povm.subset_effect(&indices));
            }
            false
        }
    };

    let threshold = 1.0 - tol.eigval1_tol;
    let value = min_norm.is_none_or(|m| m >= threshold);
    let worst_subset = (0..n.min(64))
        .filter(|&i| worst_mask & (1 << i) != 0)
        .map(|i| povm.labels()[i].clone())
        .collect();
    Ok(ValueCertificate {
        norm1: value,
        eigenvalue1: value,
        min_subset_norm: min_norm,
        worst_subset,
        exhaustive,
        subsets_checked: checked,
    })
}

/// Direct-sum split `M_i = Q_i ⊕ F_i` of an eigenvalue-1 POVM: the `Q_i`
/// project onto the eigenvalue-1 eigenspaces and form a PVM on `R = Σ Q_i`,
/// while `F_i = R⊥ M_i R⊥` carries the remainder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CleanDecomposition {
    /// `R = Σ Q_i`.
    pub projection: ComplexMatrix,
    /// The `Q_i`, mutually orthogonal projections.
    pub pvm_part: Vec<ComplexMatrix>,
    /// The `F_i = R⊥ M_i R⊥`.
    pub residual_part: Vec<ComplexMatrix>,
    /// Largest invariant residual observed while verifying the split.
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreprocessingCertificate {
    pub value: bool,
    pub decomposition: Option<CleanDecomposition>,
}

/// Pre-processing cleanness: equivalent to the eigenvalue-1 property, and
/// when it holds the direct-sum decomposition is constructed and verified.
pub fn certify_preprocessing_clean(
    povm: &DiscretePovm,
    tol: &Tolerances,
    strategy: &SubsetStrategy,
) -> Result<PreprocessingCertificate> {
    let value_cert = certify_eigenvalue1(povm, tol, strategy)?;
    if !value_cert.eigenvalue1 {
        return Ok(PreprocessingCertificate {
            value: false,
            decomposition: None,
        });
    }
    let decomposition = clean_decomposition(povm, tol)?;
    Ok(PreprocessingCertificate {
        value: true,
        decomposition: Some(decomposition),
    })
}

fn clean_decomposition(povm: &DiscretePovm, tol: &Tolerances) -> Result<CleanDecomposition> {
    let d = povm.dim();
    let threshold = 1.0 - tol.eigval1_tol;
    let mut pvm_part = Vec::with_capacity(povm.n_outcomes());
    for m in povm.effects() {
        let eig = eig_hermitian(m, tol)?;
        let mut q = ComplexMatrix::zeros(d, d);
        for k in 0..eig.dim() {
            if eig.eigenvalues[k] >= threshold {
                let v = eig.eigenvector(k);
                q = &q + &ComplexMatrix::dyad(&v, &v);
            }
        }
        pvm_part.push(q);
    }
    let mut projection = ComplexMatrix::zeros(d, d);
    for q in &pvm_part {
        projection = &projection + q;
    }
    let complement = &ComplexMatrix::identity(d) - &projection;
    let residual_part: Vec<ComplexMatrix> = povm
        .effects()
        .iter()
        .map(|m| (&(&complement * m) * &complement).hermitian_part())
        .collect();

    // Verify every invariant of the split before returning it.
    let allowed = tol.id_tol * (d as f64).sqrt();
    let mut residual = 0.0_f64;
    if !is_projection(&projection, tol) {
        let idem = (&(&projection * &projection) - &projection).operator_norm();
        return Err(Error::DecompositionResidual(idem));
    }
    for (i, q_i) in pvm_part.iter().enumerate() {
        if q_i.operator_norm() <= tol.id_tol {
            return Err(Error::DecompositionResidual(1.0));
        }
        for q_j in pvm_part.iter().skip(i + 1) {
            residual = residual.max((q_i * q_j).operator_norm());
        }
        let m = povm.effect(i);
        residual = residual.max(ComplexMatrix::commutator(&projection, m).operator_norm());
        let rebuilt = &(q_i + &residual_part[i]) - m;
        residual = residual.max(rebuilt.operator_norm());
    }
    if residual > allowed {
        return Err(Error::DecompositionResidual(residual));
    }
    Ok(CleanDecomposition {
        projection,
        pvm_part,
        residual_part,
        residual,
    })
}

/// Three-valued status of informational completeness within the pure states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IcPureStatus {
    /// A witness pair was found: provably not IC within the pure states.
    ProvenFalse,
    /// Full informational completeness holds, which implies the pure-state
    /// version.
    ImpliedTrue,
    /// No witness at the given budget; the searches prove only negatives.
    Unknown,
}

/// Everything [`full_report`] needs beyond the POVM.
#[derive(Debug, Clone, Default)]
pub struct ReportConfig {
    pub tolerances: Tolerances,
    pub witness: WitnessConfig,
    pub subset_strategy: SubsetStrategy,
}

/// Aggregate certificate with residuals, witnesses, thresholds, and the
/// cross-property consistency checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateReport {
    pub dim: usize,
    pub n_outcomes: usize,
    pub rank1: bool,
    pub ranks: Vec<usize>,
    pub postprocessing_clean: bool,
    pub informationally_complete: bool,
    pub ic_rank: usize,
    pub ic_deficiency: usize,
    pub extreme: bool,
    pub extreme_dyad_count: usize,
    pub extreme_rank: usize,
    pub norm1: bool,
    pub eigenvalue1: bool,
    pub min_subset_norm: Option<f64>,
    pub worst_subset: Vec<String>,
    pub subsets_exhaustive: bool,
    pub subsets_checked: u64,
    pub preprocessing_clean: bool,
    pub clean_decomposition: Option<CleanDecomposition>,
    pub regular: bool,
    pub regular_margin: f64,
    pub commutative: bool,
    pub max_commutator_norm: f64,
    pub ic_pure: IcPureStatus,
    pub ic_pure_witness: Option<IcPureWitness>,
    pub zw_witness: Option<ZwWitness>,
    pub ic_pure_best_residual: Option<f64>,
    pub seed: u64,
    pub tolerances: Tolerances,
    /// Violated cross-property implications; empty on sound runs.
    pub consistency_violations: Vec<String>,
}

/// Runs every certificate and cross-checks the implications among them.
pub fn full_report(povm: &DiscretePovm, config: &ReportConfig) -> Result<CertificateReport> {
    let tol = &config.tolerances;
    let d = povm.dim();
    let n = povm.n_outcomes();

    let rank1 = certify_rank1(povm, tol);
    let postprocessing_clean = rank1.value;
    let ic = certify_informational_completeness(povm, tol);
    let extremality = certify_extremality(povm, tol)?;
    let value_cert = certify_value_determination(povm, tol, &config.subset_strategy)?;
    let preprocessing = if value_cert.eigenvalue1 {
        PreprocessingCertificate {
            value: true,
            decomposition: Some(clean_decomposition(povm, tol)?),
        }
    } else {
        PreprocessingCertificate {
            value: false,
            decomposition: None,
        }
    };
    let regularity = povm.is_regular(tol);
    let commutativity = povm.is_commutative(tol);

    // Pure-state completeness is semi-decidable: full completeness implies
    // it; otherwise the span-collapse search looks for an orthogonality
    // witness, and for rank-1 inputs the phase search covers the remaining
    // degeneracies it cannot express.
    let mut zw = None;
    let (ic_pure, witness, best_residual) = if ic.value {
        (IcPureStatus::ImpliedTrue, None, None)
    } else {
        match ic_pure_witness(povm, &config.witness, tol) {
            SearchOutcome::Found(w) => (IcPureStatus::ProvenFalse, Some(w), None),
            SearchOutcome::Inconclusive { best_residual, .. } => {
                let mut status = IcPureStatus::Unknown;
                if rank1.value {
                    if let SearchOutcome::Found(w) = zw_falsifier(povm, &config.witness, tol)? {
                        zw = Some(w);
                        status = IcPureStatus::ProvenFalse;
                    }
                }
                (status, None, Some(best_residual))
            }
        }
    };

    let mut violations = Vec::new();
    let mut check = |condition: bool, message: &str| {
        if !condition {
            violations.push(message.to_string());
        }
    };
    check(
        !ic.value || n >= d * d,
        "informationally complete POVM with fewer than d^2 outcomes",
    );
    check(
        !(extremality.value && rank1.value) || n <= d * d,
        "extreme rank-1 POVM with more than d^2 outcomes",
    );
    check(
        !(extremality.value && ic.value) || (rank1.value && n == d * d),
        "extreme informationally complete POVM must be rank-1 with N = d^2",
    );
    check(
        !value_cert.eigenvalue1 || n <= d,
        "eigenvalue-1 POVM with more than d outcomes",
    );
    check(
        !value_cert.eigenvalue1 || !ic.value,
        "eigenvalue-1 POVM cannot be informationally complete",
    );
    check(
        value_cert.norm1 == value_cert.eigenvalue1,
        "norm-1 and eigenvalue-1 must coincide in finite dimension",
    );
    check(
        preprocessing.value == value_cert.eigenvalue1,
        "pre-processing cleanness must coincide with the eigenvalue-1 property",
    );
    check(
        !(commutativity.commutative && d >= 2) || !ic.value,
        "commutative POVM on d >= 2 cannot be informationally complete",
    );
    check(
        !(regularity.regular && ic.value) || d == 1,
        "regular POVM on d >= 2 cannot be informationally complete",
    );
    check(
        !ic.value || ic_pure != IcPureStatus::ProvenFalse,
        "witness found for an informationally complete POVM",
    );

    Ok(CertificateReport {
        dim: d,
        n_outcomes: n,
        rank1: rank1.value,
        ranks: rank1.ranks,
        postprocessing_clean,
        informationally_complete: ic.value,
        ic_rank: ic.rank,
        ic_deficiency: ic.deficiency,
        extreme: extremality.value,
        extreme_dyad_count: extremality.dyad_count,
        extreme_rank: extremality.rank,
        norm1: value_cert.norm1,
        eigenvalue1: value_cert.eigenvalue1,
        min_subset_norm: value_cert.min_subset_norm,
        worst_subset: value_cert.worst_subset,
        subsets_exhaustive: value_cert.exhaustive,
        subsets_checked: value_cert.subsets_checked,
        preprocessing_clean: preprocessing.value,
        clean_decomposition: preprocessing.decomposition,
        regular: regularity.regular,
        regular_margin: if regularity.margin.is_finite() {
            regularity.margin
        } else {
            f64::MAX
        },
        commutative: commutativity.commutative,
        max_commutator_norm: commutativity.max_commutator_norm,
        ic_pure,
        ic_pure_witness: witness,
        zw_witness: zw,
        ic_pure_best_residual: best_residual,
        seed: config.witness.seed,
        tolerances: *tol,
        consistency_violations: violations,
    })
}
