//! Monte-Carlo sampling of measurement statistics with a seeded,
//! platform-independent PRNG (ChaCha12 via `rand_chacha`).

use qobs::instrument::{sequential_joint, Instrument};
use qobs::numerics::Tolerances;
use qobs::observable::{DiscretePovm, State};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Branches below this probability are excluded from the sampler outright,
/// so no posterior is ever formed by dividing with a vanishing probability.
pub const ZERO_BRANCH_TOL: f64 = 1e-14;

/// Counts and frequencies of a single-observable simulation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationResult {
    pub labels: Vec<String>,
    pub counts: Vec<u64>,
    pub n_shots: u64,
    pub seed: u64,
    pub empirical: Vec<f64>,
    pub analytic: Vec<f64>,
    pub max_abs_deviation: f64,
}

/// Counts and frequencies over outcome pairs of a sequential simulation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairSimulationResult {
    pub first_labels: Vec<String>,
    pub second_labels: Vec<String>,
    /// `counts[i][j]` for first outcome `i`, second outcome `j`.
    pub counts: Vec<Vec<u64>>,
    pub n_shots: u64,
    pub seed: u64,
    pub empirical: Vec<Vec<f64>>,
    pub analytic: Vec<Vec<f64>>,
    pub max_abs_deviation: f64,
}

/// Inverse-CDF lookup over the label order. Probabilities below
/// [`ZERO_BRANCH_TOL`] never win; roundoff at the top lands on the last
/// eligible outcome.
struct InverseCdf {
    cumulative: Vec<f64>,
    last_eligible: usize,
}

impl InverseCdf {
    fn new(probabilities: &[f64]) -> CliResult<Self> {
        let mut cumulative = Vec::with_capacity(probabilities.len());
        let mut acc = 0.0;
        let mut last_eligible = None;
        for (i, &p) in probabilities.iter().enumerate() {
            let p = if p < ZERO_BRANCH_TOL { 0.0 } else { p };
            acc += p;
            cumulative.push(acc);
            if p > 0.0 {
                last_eligible = Some(i);
            }
        }
        let last_eligible =
            last_eligible.ok_or_else(|| CliError::domain("all outcome probabilities vanish"))?;
        Ok(InverseCdf {
            cumulative,
            last_eligible,
        })
    }

    fn draw(&self, rng: &mut ChaCha12Rng) -> usize {
        if self.cumulative.len() == 1 {
            // A single outcome needs no randomness; keeps the stream aligned
            // with a plain simulation when the second observable is trivial.
            return 0;
        }
        let u: f64 = rng.random::<f64>() * self.cumulative.last().copied().unwrap_or(1.0);
        for (i, &c) in self.cumulative.iter().enumerate() {
            let width_start = if i == 0 { 0.0 } else { self.cumulative[i - 1] };
            if u < c && c > width_start {
                return i;
            }
        }
        self.last_eligible
    }
}

/// Draws `n_shots` i.i.d. outcomes of the POVM in the given state and
/// compares frequencies against the analytic distribution.
pub fn simulate_povm(
    povm: &DiscretePovm,
    state: &State,
    n_shots: u64,
    seed: u64,
    tol: &Tolerances,
) -> CliResult<SimulationResult> {
    if n_shots == 0 {
        return Err(CliError::infeasible("n_shots must be at least 1"));
    }
    let dist = povm.outcome_distribution(state, tol)?;
    let cdf = InverseCdf::new(&dist.probabilities)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; povm.n_outcomes()];
    for _ in 0..n_shots {
        counts[cdf.draw(&mut rng)] += 1;
    }
    let empirical: Vec<f64> = counts.iter().map(|&c| c as f64 / n_shots as f64).collect();
    let max_abs_deviation = empirical
        .iter()
        .zip(&dist.probabilities)
        .map(|(e, a)| (e - a).abs())
        .fold(0.0, f64::max);
    Ok(SimulationResult {
        labels: povm.labels().to_vec(),
        counts,
        n_shots,
        seed,
        empirical,
        analytic: dist.probabilities,
        max_abs_deviation,
    })
}

/// Simulates a sequential measurement: draw the first outcome from the
/// instrument's induced POVM, collapse the state, draw the second outcome in
/// the normalized posterior. Pair frequencies are compared against the
/// analytic joint grid `tr[ρ J*_i(M'_j)]`.
pub fn simulate_sequential(
    instrument: &Instrument,
    second: &DiscretePovm,
    state: &State,
    n_shots: u64,
    seed: u64,
    tol: &Tolerances,
) -> CliResult<PairSimulationResult> {
    if n_shots == 0 {
        return Err(CliError::infeasible("n_shots must be at least 1"));
    }
    let joint = sequential_joint(instrument, second, tol)?;
    let n = joint.n_rows();
    let n2 = joint.n_cols();

    // Analytic pair probabilities.
    let mut analytic = vec![vec![0.0f64; n2]; n];
    for (i, row) in analytic.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = (state.matrix() * joint.cell(i, j)).trace().re.max(0.0);
        }
    }

    // First-outcome distribution and per-branch posteriors.
    let induced = instrument.induced_povm(tol)?;
    let first_dist = induced.outcome_distribution(state, tol)?;
    let first_cdf = InverseCdf::new(&first_dist.probabilities)?;
    let mut conditional: Vec<Option<InverseCdf>> = Vec::with_capacity(n);
    for i in 0..n {
        let p_i = first_dist.probabilities[i];
        if p_i < ZERO_BRANCH_TOL {
            conditional.push(None);
            continue;
        }
        let collapsed = instrument.schrodinger_apply(i, state.matrix())?;
        let posterior = State::new(
            collapsed.scale(1.0 / collapsed.trace().re).hermitian_part(),
            tol,
        )?;
        let cond_dist = second.outcome_distribution(&posterior, tol)?;
        conditional.push(Some(InverseCdf::new(&cond_dist.probabilities)?));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut counts = vec![vec![0u64; n2]; n];
    for _ in 0..n_shots {
        let i = first_cdf.draw(&mut rng);
        let cdf = conditional[i]
            .as_ref()
            .expect("drawn branches have positive probability");
        let j = cdf.draw(&mut rng);
        counts[i][j] += 1;
    }

    let empirical: Vec<Vec<f64>> = counts
        .iter()
        .map(|row| row.iter().map(|&c| c as f64 / n_shots as f64).collect())
        .collect();
    let mut max_abs_deviation = 0.0f64;
    for i in 0..n {
        for j in 0..n2 {
            max_abs_deviation = max_abs_deviation.max((empirical[i][j] - analytic[i][j]).abs());
        }
    }
    Ok(PairSimulationResult {
        first_labels: joint.row_labels().to_vec(),
        second_labels: joint.col_labels().to_vec(),
        counts,
        n_shots,
        seed,
        empirical,
        analytic,
        max_abs_deviation,
    })
}
