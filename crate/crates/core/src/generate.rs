//! Constructors for the concrete example observables and seeded random test
//! families.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::instrument::JointObservable;
use crate::numerics::{psd_inv_sqrt, ComplexMatrix, Tolerances};
use crate::observable::DiscretePovm;

/// Configuration for the frame-based rank-1 family built from the vectors
/// `f_nn = |n>`, `f_nm = |n> + |m>` (n < m), `f_mn = |n> - i|m>` (n < m):
/// effects are `p_nm |S^{-1/2} f_nm><S^{-1/2} f_nm|` with
/// `S = Σ p_nm |f_nm><f_nm|` over the index set.
#[derive(Debug, Clone)]
pub struct FrameFamilyConfig {
    pub dim: usize,
    /// 1-based index pairs `(n, m)` with `1 ≤ n, m ≤ dim`.
    pub index_set: Vec<(usize, usize)>,
    /// Positive weight per index pair, aligned with `index_set`.
    pub weights: Vec<f64>,
}

impl FrameFamilyConfig {
    /// Full `d×d` grid with uniform weights `1/d²`.
    pub fn full_grid(dim: usize) -> Self {
        let mut index_set = Vec::with_capacity(dim * dim);
        for n in 1..=dim {
            for m in 1..=dim {
                index_set.push((n, m));
            }
        }
        let w = 1.0 / (dim * dim) as f64;
        let weights = vec![w; index_set.len()];
        FrameFamilyConfig {
            dim,
            index_set,
            weights,
        }
    }

    /// Diagonal index set `{(n, n)}` with uniform weights, which produces the
    /// computational basis PVM.
    pub fn diagonal(dim: usize) -> Self {
        let index_set: Vec<(usize, usize)> = (1..=dim).map(|n| (n, n)).collect();
        let w = 1.0 / dim as f64;
        let weights = vec![w; dim];
        FrameFamilyConfig {
            dim,
            index_set,
            weights,
        }
    }
}

fn frame_vector(dim: usize, n: usize, m: usize) -> ComplexMatrix {
    let mut amps = vec![Complex64::new(0.0, 0.0); dim];
    if n == m {
        amps[n - 1] = Complex64::new(1.0, 0.0);
    } else if n < m {
        amps[n - 1] = Complex64::new(1.0, 0.0);
        amps[m - 1] = Complex64::new(1.0, 0.0);
    } else {
        // (n, m) with n > m encodes |m> - i|n>.
        amps[m - 1] = Complex64::new(1.0, 0.0);
        amps[n - 1] = Complex64::new(0.0, -1.0);
    }
    ComplexMatrix::column_vector(&amps).expect("finite amplitudes")
}

/// Rank-1 POVM from a weighted operator frame. Extreme for every admissible
/// index set; informationally complete exactly when the effects span the full
/// operator space (e.g. the full grid).
pub fn gen_frame_family(config: &FrameFamilyConfig, tol: &Tolerances) -> Result<DiscretePovm> {
    let d = config.dim;
    if d == 0 || config.index_set.is_empty() {
        return Err(Error::DimensionMismatch(
            "frame family needs a positive dimension and a nonempty index set".into(),
        ));
    }
    if config.index_set.len() != config.weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} index pairs",
            config.weights.len(),
            config.index_set.len()
        )));
    }
    for &(n, m) in &config.index_set {
        if n == 0 || m == 0 || n > d || m > d {
            return Err(Error::DimensionMismatch(format!(
                "index pair ({n},{m}) out of range for dimension {d}"
            )));
        }
    }
    if config.weights.iter().any(|&w| !w.is_finite() || w <= 0.0) {
        return Err(Error::InfeasibleRanks("weights must be positive".into()));
    }

    let vectors: Vec<ComplexMatrix> = config
        .index_set
        .iter()
        .map(|&(n, m)| frame_vector(d, n, m))
        .collect();
    let mut frame_op = ComplexMatrix::zeros(d, d);
    for (v, &w) in vectors.iter().zip(&config.weights) {
        frame_op = &frame_op + &ComplexMatrix::dyad(v, v).scale(w);
    }
    let inv_sqrt = psd_inv_sqrt(&frame_op, tol).map_err(|e| match e {
        Error::Singular { .. } => Error::SingularS,
        other => other,
    })?;

    let mut labels = Vec::with_capacity(vectors.len());
    let mut effects = Vec::with_capacity(vectors.len());
    for ((v, &w), &(n, m)) in vectors.iter().zip(&config.weights).zip(&config.index_set) {
        let tilted = &inv_sqrt * v;
        labels.push(format!("{n},{m}"));
        effects.push(ComplexMatrix::dyad(&tilted, &tilted).scale(w));
    }
    DiscretePovm::new(d, labels, effects, tol)
}

fn pauli(axis: usize) -> ComplexMatrix {
    let entries = match axis {
        0 => vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
        ],
        1 => vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, -1.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, 0.0),
        ],
        _ => vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(-1.0, 0.0),
        ],
    };
    ComplexMatrix::new(2, 2, entries).expect("finite entries")
}

pub fn pauli_x() -> ComplexMatrix {
    pauli(0)
}

pub fn pauli_y() -> ComplexMatrix {
    pauli(1)
}

pub fn pauli_z() -> ComplexMatrix {
    pauli(2)
}

/// `(I + a·σ) / 3` for a Bloch vector `a`.
fn bloch_effect(a: [f64; 3]) -> ComplexMatrix {
    let mut m = ComplexMatrix::identity(2);
    for (axis, &component) in a.iter().enumerate() {
        m = &m + &pauli(axis).scale(component);
    }
    m.scale(1.0 / 3.0)
}

/// Three-outcome qubit trine: `M_i = (I + a_i·σ)/3` with unit Bloch vectors at
/// 120° in the x-y plane. Extreme, rank-1, regular; each effect has spectrum
/// `{0, 2/3}`.
pub fn gen_trine(tol: &Tolerances) -> DiscretePovm {
    let s3 = 3.0_f64.sqrt() / 2.0;
    let effects = vec![
        bloch_effect([1.0, 0.0, 0.0]),
        bloch_effect([-0.5, s3, 0.0]),
        bloch_effect([-0.5, -s3, 0.0]),
    ];
    DiscretePovm::from_effects(2, effects, tol).expect("trine is a valid POVM")
}

/// Named small examples with exact rational entries.
#[derive(Debug, Clone)]
pub struct IntroExamples {
    /// Two-outcome norm-1 POVM on C³ whose rank-1 refinement is not norm-1:
    /// `M_1 = |1><1| + (1/3)|0><0|`, `M_2 = |2><2| + (2/3)|0><0|`.
    pub c3_norm1: DiscretePovm,
    /// Joint observable on C² with PVM first margin and second margin
    /// `M''_1 = (1/2)|1><1| + |2><2|`, `M''_2 = (1/2)|1><1|`.
    pub c2_joint_blocks: JointObservable,
    /// Regular but not norm-1: `M_1 = (1/3)|1><1| + (2/3)|2><2|` and its
    /// complement.
    pub regular_not_norm1: DiscretePovm,
}

fn basis_dyad(dim: usize, k: usize) -> ComplexMatrix {
    let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
    entries[k * dim + k] = Complex64::new(1.0, 0.0);
    ComplexMatrix::new(dim, dim, entries).expect("finite entries")
}

pub fn gen_intro_examples(tol: &Tolerances) -> IntroExamples {
    let c3_norm1 = DiscretePovm::from_effects(
        3,
        vec![
            &basis_dyad(3, 1) + &basis_dyad(3, 0).scale(1.0 / 3.0),
            &basis_dyad(3, 2) + &basis_dyad(3, 0).scale(2.0 / 3.0),
        ],
        tol,
    )
    .expect("valid POVM");

    // Grid [[(1/2)|1><1|, (1/2)|1><1|], [|2><2|, 0]]; first margin is the
    // basis PVM, second margin is ((1/2)|1><1| + |2><2|, (1/2)|1><1|).
    let half_p1 = basis_dyad(2, 0).scale(0.5);
    let grid = vec![
        vec![half_p1.clone(), half_p1],
        vec![basis_dyad(2, 1), ComplexMatrix::zeros(2, 2)],
    ];
    let c2_joint_blocks = JointObservable::new(
        2,
        vec!["1".into(), "2".into()],
        vec!["1".into(), "2".into()],
        grid,
        tol,
    )
    .expect("valid joint observable");

    let regular_not_norm1 = DiscretePovm::from_effects(
        2,
        vec![
            &basis_dyad(2, 0).scale(1.0 / 3.0) + &basis_dyad(2, 1).scale(2.0 / 3.0),
            &basis_dyad(2, 0).scale(2.0 / 3.0) + &basis_dyad(2, 1).scale(1.0 / 3.0),
        ],
        tol,
    )
    .expect("valid POVM");

    IntroExamples {
        c3_norm1,
        c2_joint_blocks,
        regular_not_norm1,
    }
}

fn standard_normal(rng: &mut ChaCha12Rng) -> f64 {
    // Box-Muller; reproducible for a fixed seed without extra dependencies.
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        if u1 > f64::MIN_POSITIVE {
            return (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        }
    }
}

fn ginibre(rng: &mut ChaCha12Rng, rows: usize, cols: usize) -> DMatrix<Complex64> {
    let scale = 0.5_f64.sqrt();
    DMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(standard_normal(rng) * scale, standard_normal(rng) * scale)
    })
}

/// Random POVM with prescribed effect ranks via the Gram trick: draw PSD
/// `G_i` of rank `r_i`, set `S = Σ G_i` and `M_i = S^{-1/2} G_i S^{-1/2}`.
/// Deterministic for a fixed seed.
pub fn gen_random_povm(
    dim: usize,
    ranks: &[usize],
    seed: u64,
    tol: &Tolerances,
) -> Result<DiscretePovm> {
    if dim == 0 || ranks.is_empty() {
        return Err(Error::InfeasibleRanks(
            "need a positive dimension and at least one effect".into(),
        ));
    }
    if ranks.iter().any(|&r| r == 0 || r > dim) {
        return Err(Error::InfeasibleRanks(format!(
            "ranks must lie in 1..={dim}"
        )));
    }
    if ranks.iter().sum::<usize>() < dim {
        return Err(Error::InfeasibleRanks(format!(
            "rank sum {} cannot span dimension {dim}",
            ranks.iter().sum::<usize>()
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let factors: Vec<DMatrix<Complex64>> =
        ranks.iter().map(|&r| ginibre(&mut rng, dim, r)).collect();
    let mut s = DMatrix::zeros(dim, dim);
    for x in &factors {
        s += x * x.adjoint();
    }
    let inv_sqrt = psd_inv_sqrt(&ComplexMatrix::from_na(s), tol)?;
    // Keep the effects in factored form M_i = (S^{-1/2} X_i)(S^{-1/2} X_i)*
    // so the requested ranks are structural rather than drowned in the
    // conditioning of S.
    let effects: Vec<ComplexMatrix> = factors
        .into_iter()
        .map(|x| {
            let y = inv_sqrt.na() * x;
            ComplexMatrix::from_na(&y * y.adjoint()).hermitian_part()
        })
        .collect();
    DiscretePovm::from_effects(dim, effects, tol)
}

/// Haar-random PVM with the given block multiplicities (which must sum to the
/// dimension). Deterministic for a fixed seed.
pub fn gen_random_pvm(
    dim: usize,
    multiplicities: &[usize],
    seed: u64,
    tol: &Tolerances,
) -> Result<DiscretePovm> {
    if multiplicities.is_empty() || multiplicities.contains(&0) {
        return Err(Error::InfeasibleRanks(
            "multiplicities must be positive".into(),
        ));
    }
    if multiplicities.iter().sum::<usize>() != dim {
        return Err(Error::InfeasibleRanks(format!(
            "multiplicities sum to {}, expected {dim}",
            multiplicities.iter().sum::<usize>()
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let unitary = haar_unitary(&mut rng, dim);
    let mut effects = Vec::with_capacity(multiplicities.len());
    let mut col = 0usize;
    for &m in multiplicities {
        let mut p = DMatrix::zeros(dim, dim);
        for k in col..col + m {
            let u = unitary.column(k);
            p += u * u.adjoint();
        }
        col += m;
        effects.push(ComplexMatrix::from_na(p).hermitian_part());
    }
    DiscretePovm::from_effects(dim, effects, tol)
}

/// Haar-distributed unitary as a matrix, for probes that rotate bases or
/// conjugate operators.
pub fn gen_haar_unitary(rng: &mut ChaCha12Rng, dim: usize) -> ComplexMatrix {
    ComplexMatrix::from_na(haar_unitary(rng, dim))
}

/// Haar-distributed unitary from the QR decomposition of a Ginibre matrix,
/// with the R-diagonal phases absorbed.
pub(crate) fn haar_unitary(rng: &mut ChaCha12Rng, dim: usize) -> DMatrix<Complex64> {
    let g = ginibre(rng, dim, dim);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for k in 0..dim {
        let diag = r[(k, k)];
        let phase = if diag.norm() > 0.0 {
            diag / diag.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for row in 0..dim {
            q[(row, k)] *= phase;
        }
    }
    q
}

/// Random unit vector, used for witness-search starts and test probes.
pub fn random_unit_vector(rng: &mut ChaCha12Rng, dim: usize) -> ComplexMatrix {
    let scale = 0.5_f64.sqrt();
    loop {
        let amps: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(standard_normal(rng) * scale, standard_normal(rng) * scale))
            .collect();
        let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-6 {
            let unit: Vec<Complex64> = amps.iter().map(|z| z / norm).collect();
            return ComplexMatrix::column_vector(&unit).expect("finite entries");
        }
    }
}

/// Random full-rank density matrix, deterministic per seed.
pub fn gen_random_state(
    dim: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<crate::observable::State> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let x = ginibre(&mut rng, dim, dim);
    let g = &x * x.adjoint();
    let trace: Complex64 = g.diagonal().sum();
    let rho = ComplexMatrix::from_na(g / trace).hermitian_part();
    crate::observable::State::new(rho, tol)
}
