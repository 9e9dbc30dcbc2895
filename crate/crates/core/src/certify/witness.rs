//! Randomized witness searches for informational incompleteness within the
//! pure states.
//!
//! Both searches are semi-decision procedures: a returned witness proves the
//! negative (the observable cannot separate all pure states), while absence
//! of a witness at a finite budget is inconclusive.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generate::random_unit_vector;
use crate::numerics::{psd_sqrt, ComplexMatrix, Tolerances};
use crate::observable::DiscretePovm;

/// Multistart search parameters. Starts are seeded independently from
/// `seed`, so results do not depend on the parallel schedule; the reduction
/// picks the smallest residual with ties broken by start index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WitnessConfig {
    pub seed: u64,
    pub starts: usize,
    /// Iteration cap per start.
    pub max_iters: usize,
    /// Total iteration budget shared across starts.
    pub budget: usize,
    /// Residual at or below which a span-collapse witness is accepted.
    pub accept_tol: f64,
    /// Minimal distance `1 - |<φ|Z_w φ>|` separating a phase witness from the
    /// excluded joint-eigenvector configurations.
    pub alignment_separation: f64,
    pub parallel: bool,
}

impl Default for WitnessConfig {
    fn default() -> Self {
        WitnessConfig {
            seed: 0,
            starts: 64,
            max_iters: 500,
            budget: 10_000,
            accept_tol: 1e-9,
            alignment_separation: 1e-3,
            parallel: false,
        }
    }
}

impl WitnessConfig {
    pub fn with_seed(seed: u64) -> Self {
        WitnessConfig {
            seed,
            ..Default::default()
        }
    }

    fn iters_per_start(&self) -> usize {
        (self.budget / self.starts.max(1)).clamp(1, self.max_iters)
    }

    fn start_rng(&self, start: usize) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(self.seed ^ (start as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }
}

/// Pure-state indistinguishability witness: nonzero `φ`, `ψ` with
/// `<φ|M_i|ψ> ≈ 0` for every outcome, so the pure states along `φ ± ψ`
/// produce identical statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IcPureWitness {
    /// Unit column vector.
    pub phi: ComplexMatrix,
    /// Unit column vector orthogonal to every `M_i φ`.
    pub psi: ComplexMatrix,
    /// `max_i |<φ|M_i|ψ>|`.
    pub residual: f64,
}

/// Result of a witness search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum SearchOutcome<W> {
    Found(W),
    Inconclusive {
        best_residual: f64,
        iterations: usize,
    },
}

impl<W> SearchOutcome<W> {
    pub fn found(&self) -> Option<&W> {
        match self {
            SearchOutcome::Found(w) => Some(w),
            SearchOutcome::Inconclusive { .. } => None,
        }
    }

    pub fn is_found(&self) -> bool {
        self.found().is_some()
    }
}

fn min_eigenpair(g: &DMatrix<Complex64>) -> (f64, DMatrix<Complex64>) {
    let eig = g.clone().symmetric_eigen();
    let mut best = 0usize;
    for k in 1..eig.eigenvalues.len() {
        if eig.eigenvalues[k] < eig.eigenvalues[best] {
            best = k;
        }
    }
    let v = DMatrix::from_fn(g.nrows(), 1, |r, _| eig.eigenvectors[(r, best)]);
    (eig.eigenvalues[best], v)
}

struct StartResult {
    residual: f64,
    phi: DMatrix<Complex64>,
    psi: DMatrix<Complex64>,
    iterations: usize,
}

/// Searches for a unit `φ` whose image family `{M_i φ}` fails to span the
/// space, by alternating minimization of the smallest singular value of
/// `[M_1 φ, ..., M_N φ]`: the minimizing left vector `u` fixes a quadratic
/// form in `φ` whose smallest eigenvector is the next iterate, so the
/// objective decreases monotonically.
pub fn ic_pure_witness(
    povm: &DiscretePovm,
    config: &WitnessConfig,
    _tol: &Tolerances,
) -> SearchOutcome<IcPureWitness> {
    let d = povm.dim();
    let effects: Vec<&DMatrix<Complex64>> = povm.effects().iter().map(|m| m.na()).collect();
    let iters = config.iters_per_start();

    let run_start = |s: usize| -> StartResult {
        let mut rng = config.start_rng(s);
        let mut phi = random_unit_vector(&mut rng, d).na().clone();
        let mut best = f64::INFINITY;
        let mut used = 0usize;
        for _ in 0..iters {
            used += 1;
            // G(φ) = Σ_i (M_i φ)(M_i φ)*; λ_min(G) = σ_min².
            let images: Vec<DMatrix<Complex64>> = effects.iter().map(|m| *m * &phi).collect();
            let mut gram = DMatrix::zeros(d, d);
            for y in &images {
                gram += y * y.adjoint();
            }
            let (lambda, u) = min_eigenpair(&gram);
            // B(u) = Σ_i (M_i u)(M_i u)*; its smallest eigenvector is the
            // best φ for this u.
            let mut b = DMatrix::zeros(d, d);
            for m in &effects {
                let x = *m * &u;
                b += &x * x.adjoint();
            }
            let (next_lambda, next_phi) = min_eigenpair(&b);
            phi = next_phi;
            let improvement = best - next_lambda.min(lambda);
            best = best.min(next_lambda.min(lambda));
            if best <= config.accept_tol * config.accept_tol || improvement <= 1e-18 {
                break;
            }
        }
        // Re-derive ψ from the final φ so the certified pair is
        // self-consistent, then measure max_i |<φ|M_i|ψ>|.
        let mut gram = DMatrix::zeros(d, d);
        for m in &effects {
            let y = *m * &phi;
            gram += &y * y.adjoint();
        }
        let psi = min_eigenpair(&gram).1;
        let residual = effects
            .iter()
            .map(|m| ((*m * &phi).adjoint() * &psi)[(0, 0)].norm())
            .fold(0.0_f64, f64::max);
        StartResult {
            residual,
            phi,
            psi,
            iterations: used,
        }
    };

    let results = map_starts(config.starts, config.parallel, &run_start);
    let total_iterations: usize = results.iter().map(|r| r.iterations).sum();
    let best = results
        .into_iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| a.residual.total_cmp(&b.residual).then(ia.cmp(ib)))
        .map(|(_, r)| r);

    match best {
        Some(r) if r.residual <= config.accept_tol => SearchOutcome::Found(IcPureWitness {
            phi: ComplexMatrix::from_na(r.phi),
            psi: ComplexMatrix::from_na(r.psi),
            residual: r.residual,
        }),
        Some(r) => SearchOutcome::Inconclusive {
            best_residual: r.residual,
            iterations: total_iterations,
        },
        None => SearchOutcome::Inconclusive {
            best_residual: f64::INFINITY,
            iterations: 0,
        },
    }
}

/// Phase witness for a rank-1 POVM: unimodular weights `w` and a unit `φ`
/// with `‖Z_w φ‖ ≈ ‖φ‖` for `Z_w = Σ_i w_i M_i`, macroscopically separated
/// from the excluded joint-eigenvector configurations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZwWitness {
    /// Unimodular weights as an `N`-by-1 column.
    pub w: ComplexMatrix,
    /// Unit column vector.
    pub phi: ComplexMatrix,
    /// `‖Z_w φ‖`.
    pub z_norm: f64,
    /// `1 - |<φ|Z_w φ>|`, the distance from the aligned configurations.
    pub separation: f64,
}

/// Searches for a norm-preserving phase combination `Z_w = Σ w_i M_i` on a
/// rank-1 POVM by alternating a top-singular-vector step in `φ` with
/// coordinate-ascent phase updates in `w`.
///
/// A candidate is accepted only when `1 - ‖Z_w φ‖ ≤ eigval1_tol` and the
/// alignment separation `1 - |<φ|Z_w φ>|` (equivalently
/// `min_t ‖(W - t)Jφ‖² / 2` over unimodular `t`) exceeds the configured
/// threshold, which excludes the joint-eigenvector cases where `w` is
/// constant on the support of `φ`.
pub fn zw_falsifier(
    povm: &DiscretePovm,
    config: &WitnessConfig,
    tol: &Tolerances,
) -> Result<SearchOutcome<ZwWitness>> {
    if !crate::certify::certify_rank1(povm, tol).value {
        return Err(Error::NotRank1);
    }
    let d = povm.dim();
    let n = povm.n_outcomes();
    let effects: Vec<&DMatrix<Complex64>> = povm.effects().iter().map(|m| m.na()).collect();
    let sqrt_effects: Vec<DMatrix<Complex64>> = povm
        .effects()
        .iter()
        .map(|m| Ok(psd_sqrt(m, tol)?.na().clone()))
        .collect::<Result<_>>()?;
    let iters = config.iters_per_start();
    let threshold = 1.0 - tol.eigval1_tol;

    struct ZwStart {
        deficit: f64,
        witness: Option<ZwWitness>,
        iterations: usize,
    }

    let evaluate = |w: &[Complex64], phi: &DMatrix<Complex64>| -> (f64, f64) {
        let mut image = DMatrix::zeros(d, 1);
        for (wi, m) in w.iter().zip(&effects) {
            image += *m * phi * *wi;
        }
        let norm = image.norm();
        let overlap = (phi.adjoint() * &image)[(0, 0)].norm();
        (norm, 1.0 - overlap)
    };

    let aligned = |w: &[Complex64], phi: &DMatrix<Complex64>| -> bool {
        // Joint eigenvector iff w is constant on the support of √M_i φ.
        let support: Vec<usize> = sqrt_effects
            .iter()
            .enumerate()
            .filter(|(_, s)| (*s * phi).norm() > 1e-8)
            .map(|(i, _)| i)
            .collect();
        let mut max_spread = 0.0_f64;
        for (a, &i) in support.iter().enumerate() {
            for &j in &support[a + 1..] {
                max_spread = max_spread.max((w[i] - w[j]).norm());
            }
        }
        max_spread <= tol.eigval1_tol
    };

    let run_start = |s: usize| -> ZwStart {
        let mut rng = config.start_rng(s);
        let phases = random_unit_vector(&mut rng, n);
        let mut w: Vec<Complex64> = (0..n)
            .map(|i| {
                let z = phases.get(i, 0);
                if z.norm() > 0.0 {
                    z / z.norm()
                } else {
                    Complex64::new(1.0, 0.0)
                }
            })
            .collect();
        let mut used = 0usize;
        let mut best_deficit = f64::INFINITY;
        let mut best_candidate: Option<ZwWitness> = None;

        for _ in 0..iters {
            used += 1;
            let mut z = DMatrix::zeros(d, d);
            for (wi, m) in w.iter().zip(&effects) {
                z += *m * *wi;
            }
            let svd = z.clone().svd(true, true);
            let (v_t, u, sigma) = (
                svd.v_t.as_ref().expect("requested"),
                svd.u.as_ref().expect("requested"),
                &svd.singular_values,
            );
            let mut top = 0usize;
            for k in 1..sigma.len() {
                if sigma[k] > sigma[top] {
                    top = k;
                }
            }
            best_deficit = best_deficit.min(1.0 - sigma[top]);

            // Candidate φ's: near-top right singular vectors and their
            // two-element combinations.
            let near_top: Vec<usize> = (0..sigma.len())
                .filter(|&k| sigma[k] >= threshold)
                .collect();
            let mut candidates: Vec<DMatrix<Complex64>> = near_top
                .iter()
                .map(|&k| DMatrix::from_fn(d, 1, |r, _| v_t[(k, r)].conj()))
                .collect();
            let singles = candidates.clone();
            for a in 0..singles.len() {
                for b in (a + 1)..singles.len() {
                    let scale = Complex64::new(0.5_f64.sqrt(), 0.0);
                    candidates.push((&singles[a] + &singles[b]) * scale);
                    candidates.push((&singles[a] + &singles[b] * Complex64::new(0.0, 1.0)) * scale);
                }
            }
            for phi in &candidates {
                let (norm, separation) = evaluate(&w, phi);
                if norm >= threshold
                    && separation >= config.alignment_separation
                    && !aligned(&w, phi)
                {
                    let witness = ZwWitness {
                        w: ComplexMatrix::new(n, 1, w.clone()).expect("finite"),
                        phi: ComplexMatrix::from_na(phi.clone()),
                        z_norm: norm,
                        separation,
                    };
                    match &best_candidate {
                        Some(existing) if existing.z_norm >= norm => {}
                        _ => best_candidate = Some(witness),
                    }
                }
            }
            if best_candidate.is_some() {
                break;
            }

            // Coordinate-ascent phase sweep at the current top vector.
            let phi = DMatrix::from_fn(d, 1, |r, _| v_t[(top, r)].conj());
            let images: Vec<DMatrix<Complex64>> = effects.iter().map(|m| *m * &phi).collect();
            let mut s_vec = DMatrix::zeros(d, 1);
            for (wi, y) in w.iter().zip(&images) {
                s_vec += y * *wi;
            }
            for i in 0..n {
                let rest = &s_vec - &images[i] * w[i];
                let c = (images[i].adjoint() * &rest)[(0, 0)];
                if c.norm() > 1e-15 {
                    let new_w = c / c.norm();
                    s_vec = rest + &images[i] * new_w;
                    w[i] = new_w;
                }
            }
            let _ = u;
        }

        ZwStart {
            deficit: best_deficit,
            witness: best_candidate,
            iterations: used,
        }
    };

    let results = map_starts(config.starts, config.parallel, &run_start);
    let total_iterations: usize = results.iter().map(|r| r.iterations).sum();
    let mut best_deficit = f64::INFINITY;
    let mut found: Option<ZwWitness> = None;
    for r in results {
        best_deficit = best_deficit.min(r.deficit);
        if found.is_none() {
            if let Some(w) = r.witness {
                found = Some(w);
            }
        }
    }
    Ok(match found {
        Some(w) => SearchOutcome::Found(w),
        None => SearchOutcome::Inconclusive {
            best_residual: best_deficit,
            iterations: total_iterations,
        },
    })
}

/// Runs `f` over start indices, optionally across threads. Results are
/// collected by index, so the outcome is schedule independent.
pub(crate) fn map_starts<T: Send>(
    n: usize,
    parallel: bool,
    f: &(dyn Fn(usize) -> T + Sync),
) -> Vec<T> {
    if !parallel || n <= 1 {
        return (0..n).map(f).collect();
    }
    let workers = std::thread::available_parallelism()
        .map(|p| p.get())
        .unwrap_or(1)
        .min(n);
    let chunk_size = n.div_ceil(workers);
    let mut results: Vec<Option<T>> = (0..n).map(|_| None).collect();
    std::thread::scope(|scope| {
        for (chunk_idx, chunk) in results.chunks_mut(chunk_size).enumerate() {
            let base = chunk_idx * chunk_size;
            scope.spawn(move || {
                for (offset, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(f(base + offset));
                }
            });
        }
    });
    results
        .into_iter()
        .map(|slot| slot.expect("every start index was visited"))
        .collect()
}
