//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured worst-case numbers (run with `--nocapture` to see them).

use std::path::PathBuf;
use std::time::Instant;

use num_complex::Complex64;
use qobs::certify::{
    certify_extremality, certify_informational_completeness, certify_norm1, certify_rank1,
    full_report, ic_pure_witness, restricted_ic, ReportConfig, SearchOutcome, SubsetStrategy,
    WitnessConfig,
};
use qobs::dilation::{minimal_naimark, rank1_refinement, verify_dilation};
use qobs::generate::{
    gen_frame_family, gen_haar_unitary, gen_intro_examples, gen_random_povm, gen_random_pvm,
    gen_random_state, gen_trine, pauli_x, pauli_y, pauli_z, FrameFamilyConfig,
};
use qobs::instrument::{
    luders_instrument, nuclear_instrument, sequential_joint, total_channel,
    unique_joint_for_extreme,
};
use qobs::numerics::{eig_hermitian, is_projection, ComplexMatrix, Tolerances};
use qobs::observable::{DiscretePovm, State};
use qobs::process::{extract_kernel, pvm_preprocessing_channel, smear, MarkovMatrix};
use qobs_cli::sim::{simulate_povm, simulate_sequential};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn tol() -> Tolerances {
    Tolerances::default()
}

fn report_config(seed: u64) -> ReportConfig {
    ReportConfig {
        tolerances: tol(),
        witness: WitnessConfig::with_seed(seed),
        subset_strategy: SubsetStrategy::Exhaustive,
    }
}

fn random_kernel(rng: &mut ChaCha12Rng, rows: usize, cols: usize) -> MarkovMatrix {
    let mut entries = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let raw: Vec<f64> = (0..cols).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        entries.extend(raw.into_iter().map(|x| x / total));
    }
    MarkovMatrix::new(rows, cols, entries, &tol()).unwrap()
}

/// Eigenvalue-1 POVM built as a conjugated direct sum: a rank-1 PVM on the
/// first `n` coordinates plus a random POVM on the complement.
fn random_eigenvalue1_povm(d: usize, n: usize, seed: u64) -> DiscretePovm {
    assert!(n <= d && n >= 1);
    let tol = tol();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut effects = Vec::with_capacity(n);
    if n < d {
        let residual = gen_random_povm(d - n, &vec![1.min(d - n); n], seed ^ 0xABCD, &tol)
            .or_else(|_| gen_random_povm(d - n, &vec![d - n; n], seed ^ 0xABCD, &tol))
            .unwrap();
        for i in 0..n {
            let mut entries = vec![Complex64::new(0.0, 0.0); d * d];
            entries[i * d + i] = Complex64::new(1.0, 0.0);
            for r in 0..(d - n) {
                for c in 0..(d - n) {
                    entries[(n + r) * d + (n + c)] = residual.effect(i).get(r, c);
                }
            }
            effects.push(ComplexMatrix::new(d, d, entries).unwrap());
        }
    } else {
        for i in 0..n {
            let mut entries = vec![Complex64::new(0.0, 0.0); d * d];
            entries[i * d + i] = Complex64::new(1.0, 0.0);
            effects.push(ComplexMatrix::new(d, d, entries).unwrap());
        }
    }
    let u = gen_haar_unitary(&mut rng, d);
    let rotated: Vec<ComplexMatrix> = effects
        .iter()
        .map(|m| (&(&u * m) * &u.adjoint()).hermitian_part())
        .collect();
    DiscretePovm::from_effects(d, rotated, &tol).unwrap()
}

#[test]
fn criterion_01_trine_suite() {
    let tol = tol();
    let trine = gen_trine(&tol);
    let report = full_report(&trine, &report_config(1)).unwrap();
    assert!(report.rank1, "trine must be rank-1");
    assert!(report.extreme, "trine must be extreme");
    assert!(report.regular, "trine must be regular");
    assert!(!report.norm1, "trine must not be norm-1");
    assert!(
        !report.informationally_complete,
        "trine must not be informationally complete"
    );

    let mut worst = 0.0_f64;
    for effect in trine.effects() {
        let eig = eig_hermitian(effect, &tol).unwrap();
        worst = worst.max((eig.eigenvalues[1] - 2.0 / 3.0).abs());
        worst = worst.max(eig.eigenvalues[0].abs());
    }
    assert!(worst < 1e-9, "trine spectrum deviates by {worst:.3e}");

    assert!(restricted_ic(&trine, &[pauli_x(), pauli_y()], &tol).unwrap());
    assert!(!restricted_ic(&trine, &[pauli_z()], &tol).unwrap());
    println!("[criterion 1] PASS: trine certificates and spectrum (dev {worst:.3e})");
}

#[test]
fn criterion_02_frame_family_suite() {
    let tol = tol();
    let mut worst = 0.0_f64;
    for d in [2usize, 3] {
        let povm = gen_frame_family(&FrameFamilyConfig::full_grid(d), &tol).unwrap();
        assert_eq!(povm.n_outcomes(), d * d, "full grid must have d^2 outcomes");
        let report = full_report(&povm, &report_config(2)).unwrap();
        assert!(report.rank1, "d={d}: full grid must be rank-1");
        assert!(report.extreme, "d={d}: full grid must be extreme");
        assert!(
            report.informationally_complete,
            "d={d}: full grid must be informationally complete"
        );
        let validation = povm.validate(&tol);
        worst = worst.max(validation.completeness_residual);
        let dilation = minimal_naimark(&povm, &tol).unwrap();
        worst = worst.max(verify_dilation(&dilation, &povm).unwrap());

        let diagonal = gen_frame_family(&FrameFamilyConfig::diagonal(d), &tol).unwrap();
        for effect in diagonal.effects() {
            assert!(is_projection(effect, &tol), "diagonal grid must be a PVM");
        }
    }
    assert!(worst < 1e-8, "residuals reached {worst:.3e}");
    println!("[criterion 2] PASS: frame family d∈{{2,3}} (worst residual {worst:.3e})");
}

#[test]
fn criterion_03_norm1_c3_example() {
    let tol = tol();
    let intro = gen_intro_examples(&tol).c3_norm1;
    let report = full_report(&intro, &report_config(3)).unwrap();
    assert!(
        report.eigenvalue1,
        "example must have the eigenvalue-1 property"
    );

    let dec = report.clean_decomposition.as_ref().expect("decomposition");
    let e_expected = [
        (1usize, 1.0f64), // |1><1|
        (2, 1.0),         // |2><2|
    ];
    let f_expected = [(0usize, 1.0 / 3.0), (0, 2.0 / 3.0)];
    let mut worst = 0.0_f64;
    for (i, (idx, weight)) in e_expected.iter().enumerate() {
        let mut entries = vec![Complex64::new(0.0, 0.0); 9];
        entries[idx * 3 + idx] = Complex64::new(*weight, 0.0);
        let expected = ComplexMatrix::new(3, 3, entries).unwrap();
        worst = worst.max((&dec.pvm_part[i] - &expected).operator_norm());
    }
    for (i, (idx, weight)) in f_expected.iter().enumerate() {
        let mut entries = vec![Complex64::new(0.0, 0.0); 9];
        entries[idx * 3 + idx] = Complex64::new(*weight, 0.0);
        let expected = ComplexMatrix::new(3, 3, entries).unwrap();
        worst = worst.max((&dec.residual_part[i] - &expected).operator_norm());
    }
    assert!(worst < 1e-10, "decomposition deviates by {worst:.3e}");

    let refinement = rank1_refinement(&intro, &tol).unwrap();
    let norm_third = refinement
        .refined
        .effects()
        .iter()
        .map(|m| (m.operator_norm() - 1.0 / 3.0).abs())
        .fold(f64::INFINITY, f64::min);
    assert!(
        norm_third < 1e-10,
        "refinement lacks a norm-1/3 effect (closest {norm_third:.3e})"
    );
    let refined_cert =
        certify_norm1(&refinement.refined, &tol, &SubsetStrategy::Exhaustive).unwrap();
    assert!(!refined_cert.norm1, "refinement must not be norm-1");
    println!("[criterion 3] PASS: norm-1 example decomposition (dev {worst:.3e})");
}

#[test]
fn criterion_04_regular_not_norm1() {
    let tol = tol();
    let povm = gen_intro_examples(&tol).regular_not_norm1;
    assert!(povm.is_regular(&tol).regular, "example must be regular");
    let cert = certify_norm1(&povm, &tol, &SubsetStrategy::Exhaustive).unwrap();
    assert!(!cert.norm1, "example must not be norm-1");
    println!(
        "[criterion 4] PASS: regular-not-norm-1 (min subset norm {:.3})",
        cert.min_subset_norm.unwrap()
    );
}

#[test]
fn criterion_05_dilation_property_suite() {
    let tol = tol();
    let mut seed_rng = ChaCha12Rng::seed_from_u64(505);
    let mut built = 0usize;
    let mut extreme_cases = 0usize;
    let mut ic_cases = 0usize;
    let mut worst_dilation = 0.0_f64;
    let mut worst_stats = 0.0_f64;
    let mut trial = 0u64;
    while built < 500 {
        trial += 1;
        let d = 2 + (seed_rng.random::<u32>() as usize) % 7; // 2..=8
        let kind = trial % 3;
        let povm = match kind {
            // Rank-1 with N <= min(d^2, 10): extreme with high probability.
            0 => {
                let n = (d + (seed_rng.random::<u32>() as usize) % d)
                    .min(10)
                    .min(d * d);
                gen_random_povm(d, &vec![1; n.max(d)], 51_000 + trial, &tol)
            }
            // Complete family at small d: informationally complete.
            1 => {
                let d_small = 2 + (d % 2); // 2 or 3
                let n = d_small * d_small + (seed_rng.random::<u32>() as usize) % 2;
                gen_random_povm(d_small, &vec![1; n], 52_000 + trial, &tol)
            }
            // Mixed ranks.
            _ => {
                let n = 1 + (seed_rng.random::<u32>() as usize) % 10;
                let ranks: Vec<usize> = (0..n)
                    .map(|_| 1 + (seed_rng.random::<u32>() as usize) % d)
                    .collect();
                if ranks.iter().sum::<usize>() < d {
                    continue;
                }
                gen_random_povm(d, &ranks, 53_000 + trial, &tol)
            }
        };
        let povm = match povm {
            Ok(p) => p,
            Err(_) => continue,
        };
        built += 1;

        let dilation = minimal_naimark(&povm, &tol).unwrap();
        let residual = verify_dilation(&dilation, &povm).unwrap();
        worst_dilation = worst_dilation.max(residual);
        assert!(
            residual < 1e-9,
            "trial {trial}: dilation residual {residual:.3e}"
        );

        let refinement = rank1_refinement(&povm, &tol).unwrap();
        let state = gen_random_state(povm.dim(), 54_000 + trial, &tol).unwrap();
        let fine = refinement
            .refined
            .outcome_distribution(&state, &tol)
            .unwrap();
        let parent = povm.outcome_distribution(&state, &tol).unwrap();
        let mut summed = vec![0.0; povm.n_outcomes()];
        for (idx, &p) in refinement.parent_map.iter().enumerate() {
            summed[p] += fine.probabilities[idx];
        }
        for (a, b) in summed.iter().zip(&parent.probabilities) {
            worst_stats = worst_stats.max((a - b).abs());
            assert!((a - b).abs() < 1e-10, "trial {trial}: statistics drift");
        }

        if certify_extremality(&povm, &tol).unwrap().value {
            extreme_cases += 1;
            assert!(
                certify_extremality(&refinement.refined, &tol)
                    .unwrap()
                    .value,
                "trial {trial}: refinement of an extreme POVM must stay extreme"
            );
        }
        if certify_informational_completeness(&povm, &tol).value {
            ic_cases += 1;
            assert!(
                certify_informational_completeness(&refinement.refined, &tol).value,
                "trial {trial}: refinement of a complete POVM must stay complete"
            );
        }
    }
    assert!(
        extreme_cases >= 50,
        "need extreme instances, got {extreme_cases}"
    );
    assert!(ic_cases >= 50, "need complete instances, got {ic_cases}");
    println!(
        "[criterion 5] PASS: 500 dilation round trips (worst residual {worst_dilation:.3e}, \
         stats {worst_stats:.3e}, {extreme_cases} extreme, {ic_cases} complete)"
    );
}

#[test]
fn criterion_06_counting_laws() {
    let tol = tol();
    let mut seed_rng = ChaCha12Rng::seed_from_u64(606);
    let mut corpus: Vec<DiscretePovm> = Vec::new();

    // Named families first.
    corpus.push(gen_trine(&tol));
    let intro = gen_intro_examples(&tol);
    corpus.push(intro.c3_norm1.clone());
    corpus.push(intro.regular_not_norm1.clone());
    for d in 2..=3 {
        corpus.push(gen_frame_family(&FrameFamilyConfig::full_grid(d), &tol).unwrap());
        corpus.push(gen_frame_family(&FrameFamilyConfig::diagonal(d), &tol).unwrap());
    }

    let mut trial = 0u64;
    while corpus.len() < 1000 {
        trial += 1;
        let d = 2 + (seed_rng.random::<u32>() as usize) % 5; // 2..=6
        match trial % 6 {
            0 => {
                // Complete candidates: rank-1 with N >= d^2 fits the N <= 10
                // budget only for d in {2, 3}.
                let d_small = 2 + (trial as usize) % 2;
                let n = d_small * d_small
                    + (seed_rng.random::<u32>() as usize) % (11 - d_small * d_small);
                if let Ok(p) = gen_random_povm(d_small, &vec![1; n], 61_000 + trial, &tol) {
                    corpus.push(p);
                }
            }
            1 => {
                let n = 1 + (seed_rng.random::<u32>() as usize) % 8;
                let ranks: Vec<usize> = (0..n)
                    .map(|_| 1 + (seed_rng.random::<u32>() as usize) % d)
                    .collect();
                if ranks.iter().sum::<usize>() >= d {
                    if let Ok(p) = gen_random_povm(d, &ranks, 62_000 + trial, &tol) {
                        corpus.push(p);
                    }
                }
            }
            2 => {
                let mut mults = Vec::new();
                let mut left = d;
                while left > 0 {
                    let m = 1 + (seed_rng.random::<u32>() as usize) % left;
                    mults.push(m);
                    left -= m;
                }
                corpus.push(gen_random_pvm(d, &mults, 63_000 + trial, &tol).unwrap());
            }
            3 => {
                // Smearing of a rank-1 POVM.
                let n = d + 1;
                if let Ok(p) = gen_random_povm(d, &vec![1; n], 64_000 + trial, &tol) {
                    let cols = 2 + (seed_rng.random::<u32>() as usize) % 4;
                    let kernel = random_kernel(&mut seed_rng, n, cols);
                    if let Ok(s) = smear(&p, &kernel, &tol) {
                        corpus.push(s.povm);
                    }
                }
            }
            4 => {
                // Refinement of a mixed-rank POVM.
                let ranks = vec![1 + (seed_rng.random::<u32>() as usize) % d, d];
                if let Ok(p) = gen_random_povm(d, &ranks, 65_000 + trial, &tol) {
                    corpus.push(rank1_refinement(&p, &tol).unwrap().refined);
                }
            }
            _ => {
                // Eigenvalue-1 family.
                let n = 1 + (seed_rng.random::<u32>() as usize) % d;
                corpus.push(random_eigenvalue1_povm(d, n, 66_000 + trial));
            }
        }
    }

    let mut ev1_count = 0usize;
    let mut ic_count = 0usize;
    let mut extreme_rank1_count = 0usize;
    for (idx, povm) in corpus.iter().enumerate() {
        let d = povm.dim();
        let n = povm.n_outcomes();
        let rank1 = certify_rank1(povm, &tol).value;
        let ic = certify_informational_completeness(povm, &tol).value;
        let extreme = certify_extremality(povm, &tol).unwrap().value;
        let ev1 = certify_norm1(povm, &tol, &SubsetStrategy::Exhaustive)
            .unwrap()
            .eigenvalue1;

        assert!(!ic || n >= d * d, "corpus {idx}: IC with N < d^2");
        assert!(
            !(extreme && rank1) || n <= d * d,
            "corpus {idx}: extreme rank-1 with N > d^2"
        );
        assert!(
            !(extreme && ic) || (rank1 && n == d * d),
            "corpus {idx}: extreme+IC must be rank-1 with N = d^2"
        );
        assert!(!ev1 || n <= d, "corpus {idx}: eigenvalue-1 with N > d");
        assert!(!ev1 || !ic, "corpus {idx}: eigenvalue-1 cannot be IC");
        if d >= 2 {
            let regular = povm.is_regular(&tol).regular;
            assert!(
                !(regular && ic),
                "corpus {idx}: regular POVM cannot be IC beyond d = 1"
            );
        }

        ev1_count += ev1 as usize;
        ic_count += ic as usize;
        extreme_rank1_count += (extreme && rank1) as usize;
    }
    assert!(
        ev1_count >= 100,
        "need eigenvalue-1 instances, got {ev1_count}"
    );
    assert!(ic_count >= 50, "need IC instances, got {ic_count}");
    assert!(extreme_rank1_count >= 100, "need extreme rank-1 instances");
    println!(
        "[criterion 6] PASS: counting laws over {} POVMs (ev1 {ev1_count}, ic {ic_count}, \
         extreme rank-1 {extreme_rank1_count}, 0 violations)",
        corpus.len()
    );
}

#[test]
fn criterion_07_sequential_joint_round_trips() {
    let tol = tol();
    let mut seed_rng = ChaCha12Rng::seed_from_u64(707);
    let mut worst_margin = 0.0_f64;
    let mut worst_round = 0.0_f64;
    let mut worst_kernel_res = 0.0_f64;
    let mut worst_nuclear = 0.0_f64;
    for trial in 0..200u64 {
        let d = 2 + (seed_rng.random::<u32>() as usize) % 4; // 2..=5
        let rank1_first = trial % 2 == 0;
        let povm = if rank1_first {
            let n = (d + (seed_rng.random::<u32>() as usize) % d).min(d * d);
            gen_random_povm(d, &vec![1; n], 71_000 + trial, &tol).unwrap()
        } else {
            gen_random_povm(d, &[1, 2.min(d), d], 72_000 + trial, &tol).unwrap()
        };
        let nuclear_case = trial % 4 < 2;
        let (instrument, posteriors) = if nuclear_case {
            let d_out = 2 + (seed_rng.random::<u32>() as usize) % 3;
            let posteriors: Vec<State> = (0..povm.n_outcomes())
                .map(|k| gen_random_state(d_out, 73_000 + trial * 19 + k as u64, &tol).unwrap())
                .collect();
            (
                nuclear_instrument(&povm, &posteriors, &tol).unwrap(),
                Some(posteriors),
            )
        } else {
            (luders_instrument(&povm, &tol).unwrap(), None)
        };
        let second = gen_random_povm(
            instrument.output_dim(),
            &vec![1; instrument.output_dim() + 1],
            74_000 + trial,
            &tol,
        )
        .unwrap();
        let joint = sequential_joint(&instrument, &second, &tol).unwrap();

        // Margins against the analytic formulas.
        for (margin, effect) in joint.first_margin_effects().iter().zip(povm.effects()) {
            worst_margin = worst_margin.max((margin - effect).operator_norm());
        }
        let channel = total_channel(&instrument);
        for (margin, effect) in joint.second_margin_effects().iter().zip(second.effects()) {
            let expected = channel.apply_heisenberg(effect).unwrap();
            worst_margin = worst_margin.max((margin - &expected).operator_norm());
        }

        // Joint -> sequential -> joint round trip.
        let (rebuilt, basis_pvm) =
            qobs::instrument::joint_to_sequential(&povm, &joint, &tol).unwrap();
        let again = sequential_joint(&rebuilt, &basis_pvm, &tol).unwrap();
        worst_round = worst_round.max(again.max_cell_distance(&joint).unwrap());

        if rank1_first {
            let second_margin = joint.second_margin_povm(&tol).unwrap();
            let extraction = extract_kernel(&povm, &second_margin, &tol).unwrap();
            worst_kernel_res = worst_kernel_res.max(extraction.residual);
            if let Some(posteriors) = &posteriors {
                #[allow(clippy::needless_range_loop)]
                for i in 0..povm.n_outcomes() {
                    for j in 0..second.n_outcomes() {
                        let expected = (posteriors[i].matrix() * second.effect(j)).trace().re;
                        worst_nuclear = worst_nuclear.max((extraction.get(i, j) - expected).abs());
                    }
                }
            }
        }
    }
    assert!(worst_margin < 1e-9, "margin residual {worst_margin:.3e}");
    assert!(worst_round < 1e-8, "round-trip residual {worst_round:.3e}");
    assert!(
        worst_kernel_res < 1e-8,
        "kernel residual {worst_kernel_res:.3e}"
    );
    assert!(
        worst_nuclear < 1e-9,
        "nuclear kernel deviation {worst_nuclear:.3e}"
    );
    println!(
        "[criterion 7] PASS: 200 sequential/joint round trips (margins {worst_margin:.3e}, \
         round {worst_round:.3e}, kernel {worst_kernel_res:.3e}, nuclear {worst_nuclear:.3e})"
    );
}

#[test]
fn criterion_08_pvm_commutation_law() {
    let tol = tol();
    let mut seed_rng = ChaCha12Rng::seed_from_u64(808);
    let mut worst = 0.0_f64;
    for trial in 0..100u64 {
        let d = 2 + (seed_rng.random::<u32>() as usize) % 7;
        let mut mults = Vec::new();
        let mut left = d;
        while left > 0 {
            let m = 1 + (seed_rng.random::<u32>() as usize) % left;
            mults.push(m);
            left -= m;
        }
        let pvm = gen_random_pvm(d, &mults, 81_000 + trial, &tol).unwrap();
        let instrument = luders_instrument(&pvm, &tol).unwrap();
        let n2 = 1 + (seed_rng.random::<u32>() as usize) % 3 + 1;
        let second = gen_random_povm(d, &vec![1; (n2 + d).min(10)], 82_000 + trial, &tol).unwrap();
        let joint = sequential_joint(&instrument, &second, &tol).unwrap();
        for p in pvm.effects() {
            for i in 0..joint.n_rows() {
                for j in 0..joint.n_cols() {
                    worst =
                        worst.max(ComplexMatrix::commutator(p, joint.cell(i, j)).operator_norm());
                }
            }
        }
    }
    assert!(worst < 1e-9, "commutator norm {worst:.3e}");
    println!("[criterion 8] PASS: 100 PVM joints commute (worst {worst:.3e})");
}

#[test]
fn criterion_09_extremality_uniqueness() {
    let tol = tol();
    let mut seed_rng = ChaCha12Rng::seed_from_u64(909);
    let mut worst = 0.0_f64;
    let mut done = 0usize;
    let mut trial = 0u64;
    while done < 100 {
        trial += 1;
        let d = 2 + (seed_rng.random::<u32>() as usize) % 3; // 2..=4
        let povm = if trial.is_multiple_of(3) {
            let mut mults = Vec::new();
            let mut left = d;
            while left > 0 {
                let m = 1 + (seed_rng.random::<u32>() as usize) % left;
                mults.push(m);
                left -= m;
            }
            gen_random_pvm(d, &mults, 91_000 + trial, &tol).unwrap()
        } else {
            let n = (d + (seed_rng.random::<u32>() as usize) % (d + 1)).min(d * d);
            gen_random_povm(d, &vec![1; n], 92_000 + trial, &tol).unwrap()
        };
        if !certify_extremality(&povm, &tol).unwrap().value {
            continue;
        }
        let instrument = luders_instrument(&povm, &tol).unwrap();
        let second = gen_random_povm(d, &[1, d], 93_000 + trial, &tol).unwrap();
        let forward = sequential_joint(&instrument, &second, &tol).unwrap();
        let second_margin = forward.second_margin_povm(&tol).unwrap();
        let rebuilt = unique_joint_for_extreme(&povm, &second_margin, &tol).unwrap();
        let distance = forward.max_cell_distance(&rebuilt).unwrap();
        worst = worst.max(distance);
        assert!(
            distance < 1e-8,
            "trial {trial}: reconstructions differ by {distance:.3e}"
        );
        done += 1;
    }
    assert!(worst < 1e-8);
    println!("[criterion 9] PASS: 100 unique joint reconstructions (worst {worst:.3e})");
}

#[test]
fn criterion_10_ic_pure_witnesses() {
    let tol = tol();
    let mut seed_rng = ChaCha12Rng::seed_from_u64(1010);
    let mut worst_residual = 0.0_f64;
    let mut worst_time = 0.0_f64;
    for trial in 0..50u64 {
        let d = 2 + (seed_rng.random::<u32>() as usize) % 5; // 2..=6
        let mut mults = Vec::new();
        let mut left = d;
        while left > 0 {
            let m = 1 + (seed_rng.random::<u32>() as usize) % left;
            mults.push(m);
            left -= m;
        }
        let pvm = gen_random_pvm(d, &mults, 101_000 + trial, &tol).unwrap();
        let start = Instant::now();
        let outcome = ic_pure_witness(&pvm, &WitnessConfig::with_seed(trial), &tol);
        let elapsed = start.elapsed().as_secs_f64();
        worst_time = worst_time.max(elapsed);
        match outcome {
            SearchOutcome::Found(w) => {
                worst_residual = worst_residual.max(w.residual);
                assert!(
                    w.residual < 1e-8,
                    "trial {trial}: residual {:.3e}",
                    w.residual
                );
            }
            SearchOutcome::Inconclusive { best_residual, .. } => {
                panic!("trial {trial}: no witness (best {best_residual:.3e})")
            }
        }
        assert!(
            elapsed < 1.0,
            "trial {trial}: witness search took {elapsed:.2}s"
        );
    }

    // A complete observable yields no witness at budget 1e4.
    let full = gen_frame_family(&FrameFamilyConfig::full_grid(2), &tol).unwrap();
    let config = WitnessConfig {
        budget: 10_000,
        ..WitnessConfig::with_seed(7)
    };
    assert!(
        !ic_pure_witness(&full, &config, &tol).is_found(),
        "complete observable must stay witness-free"
    );
    println!(
        "[criterion 10] PASS: 50 PVM witnesses (worst residual {worst_residual:.3e}, \
         max time {worst_time:.3}s), complete family witness-free"
    );
}

#[test]
fn criterion_11_simulation_statistics() {
    let tol = tol();
    let mut seed_rng = ChaCha12Rng::seed_from_u64(1111);
    let n_shots = 100_000u64;
    let mut worst_sigma = 0.0_f64;
    for trial in 0..20u64 {
        let d = 2 + (seed_rng.random::<u32>() as usize) % 5;
        let n = 2 + (seed_rng.random::<u32>() as usize) % 5;
        let ranks: Vec<usize> = (0..n)
            .map(|_| 1 + (seed_rng.random::<u32>() as usize) % d)
            .collect();
        if ranks.iter().sum::<usize>() < d {
            continue;
        }
        let povm = gen_random_povm(d, &ranks, 111_000 + trial, &tol).unwrap();
        let state = gen_random_state(d, 112_000 + trial, &tol).unwrap();
        let result = simulate_povm(&povm, &state, n_shots, 113_000 + trial, &tol).unwrap();
        assert_eq!(result.counts.iter().sum::<u64>(), n_shots);
        for (freq, p) in result.empirical.iter().zip(&result.analytic) {
            let sigma = (p * (1.0 - p) / n_shots as f64).sqrt();
            let dev = (freq - p).abs();
            if sigma > 0.0 {
                worst_sigma = worst_sigma.max(dev / sigma);
            }
            assert!(
                dev <= 3.0 * sigma + 1e-12,
                "trial {trial}: deviation {dev:.3e} over 3 sigma {:.3e}",
                3.0 * sigma
            );
        }
    }

    // Sequential pair frequencies within 4 sigma.
    let mut worst_pair_sigma = 0.0_f64;
    for trial in 0..5u64 {
        let d = 2 + (trial as usize) % 3;
        let povm = gen_random_povm(d, &vec![1; d + 1], 114_000 + trial, &tol).unwrap();
        let posteriors: Vec<State> = (0..povm.n_outcomes())
            .map(|k| gen_random_state(d, 115_000 + trial * 17 + k as u64, &tol).unwrap())
            .collect();
        let instrument = nuclear_instrument(&povm, &posteriors, &tol).unwrap();
        let second = gen_random_povm(d, &[1, d], 116_000 + trial, &tol).unwrap();
        let state = gen_random_state(d, 117_000 + trial, &tol).unwrap();
        let result =
            simulate_sequential(&instrument, &second, &state, n_shots, 118_000 + trial, &tol)
                .unwrap();
        let total: u64 = result.counts.iter().flatten().sum();
        assert_eq!(total, n_shots);
        for i in 0..result.counts.len() {
            for j in 0..result.counts[i].len() {
                let p = result.analytic[i][j];
                let sigma = (p * (1.0 - p) / n_shots as f64).sqrt();
                let dev = (result.empirical[i][j] - p).abs();
                if sigma > 0.0 {
                    worst_pair_sigma = worst_pair_sigma.max(dev / sigma);
                }
                assert!(
                    dev <= 4.0 * sigma + 1e-12,
                    "trial {trial}: pair ({i},{j}) deviation {dev:.3e} over 4 sigma"
                );
            }
        }
    }
    println!(
        "[criterion 11] PASS: simulation statistics (singles worst {worst_sigma:.2}σ, \
         pairs worst {worst_pair_sigma:.2}σ)"
    );
}

#[test]
fn criterion_12_pvm_preprocessing_instantiation() {
    let tol = tol();
    let mut seed_rng = ChaCha12Rng::seed_from_u64(1212);
    let mut worst = 0.0_f64;
    for trial in 0..100u64 {
        let n = 2 + (seed_rng.random::<u32>() as usize) % 4; // outcomes
        let d = 2 + (seed_rng.random::<u32>() as usize) % 5; // target space
        let extra = (seed_rng.random::<u32>() as usize) % 3;
        let d_pvm = n + extra;
        let mut mults = vec![1usize; n];
        for _ in 0..extra {
            let k = (seed_rng.random::<u32>() as usize) % n;
            mults[k] += 1;
        }
        let pvm = gen_random_pvm(d_pvm, &mults, 121_000 + trial, &tol).unwrap();
        let ranks: Vec<usize> = (0..n)
            .map(|_| 1 + (seed_rng.random::<u32>() as usize) % d)
            .collect();
        if ranks.iter().sum::<usize>() < d {
            continue;
        }
        let target = gen_random_povm(d, &ranks, 122_000 + trial, &tol).unwrap();
        let channel = pvm_preprocessing_channel(&pvm, &target, &tol).unwrap();
        for (p, m) in pvm.effects().iter().zip(target.effects()) {
            let image = channel.apply_heisenberg(p).unwrap();
            worst = worst.max((&image - m).operator_norm());
        }
    }
    assert!(worst < 1e-10, "channel deviation {worst:.3e}");
    println!("[criterion 12] PASS: 100 measure-and-prepare channels (worst {worst:.3e})");
}

/// Not a numbered criterion: keeps witness artifacts honest by re-verifying
/// a serialized report end to end through the file layer.
#[test]
fn report_serialization_round_trip() {
    let tol = tol();
    let trine = gen_trine(&tol);
    let report = full_report(&trine, &report_config(42)).unwrap();
    let text = serde_json::to_string_pretty(&report).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed["rank1"], serde_json::json!(true));
    assert_eq!(parsed["seed"], serde_json::json!(42));
    assert!(parsed["tolerances"]["eigval1_tol"].is_number());
    let _ = PathBuf::from("unused");
}
