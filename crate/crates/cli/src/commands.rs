//! Implementations behind the CLI subcommands. Each returns the JSON value
//! to emit; `main` handles envelopes, output targets, and exit codes.

use std::fs;
use std::path::Path;

use qobs::certify::{
    full_report, ic_pure_witness, zw_falsifier, ReportConfig, SearchOutcome, SubsetStrategy,
    WitnessConfig,
};
use qobs::dilation::{minimal_naimark, rank1_refinement, verify_dilation};
use qobs::generate::{
    gen_frame_family, gen_intro_examples, gen_random_povm, gen_random_pvm, gen_random_state,
    gen_trine, FrameFamilyConfig,
};
use qobs::instrument::{luders_instrument, nuclear_instrument, Instrument};
use qobs::numerics::Tolerances;
use qobs::observable::{DiscretePovm, State};
use qobs::process::{extract_kernel, pvm_preprocessing_channel, smear};
use qobs::schema::{
    ChannelFile, DilationFile, InstrumentFile, JointFile, KernelFile, PovmFile, StateFile,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::sim::{simulate_povm, simulate_sequential};

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::parse(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::parse(format!("cannot parse {}: {e}", path.display())))
}

pub fn load_povm(path: &Path, tol: &Tolerances) -> CliResult<DiscretePovm> {
    let file: PovmFile = read_json(path)?;
    Ok(file.into_povm(tol)?)
}

pub fn load_state(path: &Path, tol: &Tolerances) -> CliResult<State> {
    let file: StateFile = read_json(path)?;
    Ok(file.into_state(tol)?)
}

pub fn load_instrument(path: &Path, tol: &Tolerances) -> CliResult<Instrument> {
    let file: InstrumentFile = read_json(path)?;
    Ok(file.into_instrument(tol)?)
}

fn to_value<T: Serialize>(value: &T) -> CliResult<Value> {
    Ok(serde_json::to_value(value)?)
}

/// `validate`: full residual report; domain failure when invalid.
pub fn cmd_validate(input: &Path, tol: &Tolerances) -> CliResult<Value> {
    let file: PovmFile = read_json(input)?;
    let (dim, labels, effects) = file.into_parts()?;
    let report = DiscretePovm::validate_parts(dim, &labels, &effects, tol)?;
    let value = to_value(&report)?;
    if !report.is_valid() {
        return Err(CliError {
            class: crate::error::ExitClass::Domain,
            message: format!(
                "invalid POVM: {}",
                serde_json::to_string(&value).unwrap_or_default()
            ),
        });
    }
    Ok(value)
}

/// `certify`: the aggregate optimality report.
pub fn cmd_certify(
    input: &Path,
    tol: &Tolerances,
    seed: u64,
    budget: usize,
    starts: usize,
    parallel: bool,
    sample_subsets: Option<usize>,
) -> CliResult<Value> {
    let povm = load_povm(input, tol)?;
    let config = ReportConfig {
        tolerances: *tol,
        witness: WitnessConfig {
            seed,
            budget,
            starts,
            parallel,
            ..WitnessConfig::default()
        },
        subset_strategy: match sample_subsets {
            Some(max_subsets) => SubsetStrategy::Sampled { max_subsets, seed },
            None => SubsetStrategy::Exhaustive,
        },
    };
    let report = full_report(&povm, &config)?;
    to_value(&report)
}

/// `dilate`: minimal dilation file plus its verification residual.
pub fn cmd_dilate(input: &Path, tol: &Tolerances) -> CliResult<Value> {
    let povm = load_povm(input, tol)?;
    let dilation = minimal_naimark(&povm, tol)?;
    let residual = verify_dilation(&dilation, &povm)?;
    let mut value = to_value(&DilationFile::from_dilation(&dilation, povm.labels()))?;
    value["verification_residual"] = json!(residual);
    Ok(value)
}

/// `refine`: the maximal rank-1 refinement as a POVM file, with the parent
/// outcome of each refined outcome recorded alongside.
pub fn cmd_refine(input: &Path, tol: &Tolerances) -> CliResult<Value> {
    let povm = load_povm(input, tol)?;
    let refinement = rank1_refinement(&povm, tol)?;
    let mut value = to_value(&PovmFile::from_povm(&refinement.refined))?;
    let parents: Vec<String> = refinement
        .parent_map
        .iter()
        .map(|&i| refinement.parent_labels[i].clone())
        .collect();
    value["parent_outcomes"] = json!(parents);
    Ok(value)
}

/// `smear`: classical post-processing by a Markov kernel file.
pub fn cmd_smear(input: &Path, kernel_path: &Path, tol: &Tolerances) -> CliResult<Value> {
    let povm = load_povm(input, tol)?;
    let kernel_file: KernelFile = read_json(kernel_path)?;
    let kernel = kernel_file.into_markov(tol)?;
    let smeared = smear(&povm, &kernel, tol)?;
    let mut value = to_value(&PovmFile::from_povm(&smeared.povm))?;
    value["dropped_columns"] = json!(smeared.dropped_columns);
    Ok(value)
}

/// `preprocess`: measure-and-prepare channel realizing the target POVM from
/// an index-aligned PVM.
pub fn cmd_preprocess(pvm_path: &Path, target_path: &Path, tol: &Tolerances) -> CliResult<Value> {
    let pvm = load_povm(pvm_path, tol)?;
    let target = load_povm(target_path, tol)?;
    let channel = pvm_preprocessing_channel(&pvm, &target, tol)?;
    to_value(&ChannelFile::from_channel(&channel))
}

/// `extract-kernel`: fit the transition matrix of a smearing.
pub fn cmd_extract_kernel(
    povm_path: &Path,
    second_path: &Path,
    tol: &Tolerances,
) -> CliResult<Value> {
    let povm = load_povm(povm_path, tol)?;
    let second = load_povm(second_path, tol)?;
    let extraction = extract_kernel(&povm, &second, tol)?;
    to_value(&extraction)
}

/// `simulate`: i.i.d. sampling of one observable.
pub fn cmd_simulate(
    povm_path: &Path,
    state_path: &Path,
    shots: u64,
    seed: u64,
    tol: &Tolerances,
) -> CliResult<Value> {
    let povm = load_povm(povm_path, tol)?;
    let state = load_state(state_path, tol)?;
    let result = simulate_povm(&povm, &state, shots, seed, tol)?;
    to_value(&result)
}

/// `sequential`: two-stage sampling through an instrument.
pub fn cmd_sequential(
    instrument_path: &Path,
    second_path: &Path,
    state_path: &Path,
    shots: u64,
    seed: u64,
    tol: &Tolerances,
) -> CliResult<Value> {
    let instrument = load_instrument(instrument_path, tol)?;
    let second = load_povm(second_path, tol)?;
    let state = load_state(state_path, tol)?;
    let result = simulate_sequential(&instrument, &second, &state, shots, seed, tol)?;
    to_value(&result)
}

/// `witness`: pure-state incompleteness searches.
pub fn cmd_witness(
    input: &Path,
    method: &str,
    tol: &Tolerances,
    seed: u64,
    budget: usize,
    starts: usize,
    parallel: bool,
) -> CliResult<Value> {
    let povm = load_povm(input, tol)?;
    let config = WitnessConfig {
        seed,
        budget,
        starts,
        parallel,
        ..WitnessConfig::default()
    };
    let span = |povm: &DiscretePovm| -> Value {
        match ic_pure_witness(povm, &config, tol) {
            SearchOutcome::Found(w) => json!({
                "method": "span",
                "proves_not_ic_pure": true,
                "witness": serde_json::to_value(&w).unwrap_or(Value::Null),
            }),
            SearchOutcome::Inconclusive {
                best_residual,
                iterations,
            } => json!({
                "method": "span",
                "proves_not_ic_pure": false,
                "inconclusive": true,
                "best_residual": best_residual,
                "iterations": iterations,
            }),
        }
    };
    let phases = |povm: &DiscretePovm| -> CliResult<Value> {
        Ok(match zw_falsifier(povm, &config, tol)? {
            SearchOutcome::Found(w) => json!({
                "method": "phase",
                "proves_not_ic_pure": true,
                "witness": serde_json::to_value(&w).unwrap_or(Value::Null),
            }),
            SearchOutcome::Inconclusive {
                best_residual,
                iterations,
            } => json!({
                "method": "phase",
                "proves_not_ic_pure": false,
                "inconclusive": true,
                "best_norm_deficit": best_residual,
                "iterations": iterations,
            }),
        })
    };
    let value = match method {
        "span" => json!({ "seed": seed, "searches": [span(&povm)] }),
        "phase" => json!({ "seed": seed, "searches": [phases(&povm)?] }),
        _ => {
            // auto: span first, phase search for rank-1 inputs if needed.
            let first = span(&povm);
            let mut searches = vec![first.clone()];
            let found = first["proves_not_ic_pure"].as_bool().unwrap_or(false);
            if !found && qobs::certify::certify_rank1(&povm, tol).value {
                searches.push(phases(&povm)?);
            }
            json!({ "seed": seed, "searches": searches })
        }
    };
    Ok(value)
}

/// `generate`: example families and seeded random inputs.
#[allow(clippy::too_many_arguments)]
pub fn cmd_generate(
    family: &str,
    dim: Option<usize>,
    grid: Option<&str>,
    pairs: Option<&str>,
    weights: Option<&str>,
    ranks: Option<&str>,
    multiplicities: Option<&str>,
    source_povm: Option<&Path>,
    posterior_states: &[std::path::PathBuf],
    seed: u64,
    tol: &Tolerances,
) -> CliResult<Value> {
    match family {
        "trine" => to_value(&PovmFile::from_povm(&gen_trine(tol))),
        "norm1-c3" => to_value(&PovmFile::from_povm(&gen_intro_examples(tol).c3_norm1)),
        "regular-not-norm1" => to_value(&PovmFile::from_povm(
            &gen_intro_examples(tol).regular_not_norm1,
        )),
        "joint-c2" => to_value(&JointFile::from_joint(
            &gen_intro_examples(tol).c2_joint_blocks,
        )),
        "frame" => {
            let d = dim.ok_or_else(|| CliError::infeasible("frame family needs --dim"))?;
            let mut config = match grid.unwrap_or("full") {
                "full" => FrameFamilyConfig::full_grid(d),
                "diagonal" => FrameFamilyConfig::diagonal(d),
                "custom" => {
                    let pairs = pairs.ok_or_else(|| {
                        CliError::infeasible("custom grid needs --pairs n,m;n,m;...")
                    })?;
                    let index_set = parse_pairs(pairs)?;
                    let w = 1.0 / index_set.len() as f64;
                    let weights = vec![w; index_set.len()];
                    FrameFamilyConfig {
                        dim: d,
                        index_set,
                        weights,
                    }
                }
                other => {
                    return Err(CliError::infeasible(format!(
                        "unknown grid '{other}' (expected full, diagonal, or custom)"
                    )))
                }
            };
            if let Some(w) = weights {
                config.weights = parse_floats(w)?;
            }
            to_value(&PovmFile::from_povm(&gen_frame_family(&config, tol)?))
        }
        "random-povm" => {
            let d = dim.ok_or_else(|| CliError::infeasible("random-povm needs --dim"))?;
            let ranks = parse_usizes(
                ranks.ok_or_else(|| CliError::infeasible("random-povm needs --ranks"))?,
            )?;
            to_value(&PovmFile::from_povm(&gen_random_povm(
                d, &ranks, seed, tol,
            )?))
        }
        "random-pvm" => {
            let d = dim.ok_or_else(|| CliError::infeasible("random-pvm needs --dim"))?;
            let mults = parse_usizes(
                multiplicities
                    .ok_or_else(|| CliError::infeasible("random-pvm needs --multiplicities"))?,
            )?;
            to_value(&PovmFile::from_povm(&gen_random_pvm(d, &mults, seed, tol)?))
        }
        "random-state" => {
            let d = dim.ok_or_else(|| CliError::infeasible("random-state needs --dim"))?;
            to_value(&StateFile::from_state(&gen_random_state(d, seed, tol)?))
        }
        "luders" => {
            let path =
                source_povm.ok_or_else(|| CliError::infeasible("luders needs --povm <file>"))?;
            let povm = load_povm(path, tol)?;
            let instrument = luders_instrument(&povm, tol)?;
            to_value(&InstrumentFile::from_instrument(&instrument))
        }
        "nuclear" => {
            let path =
                source_povm.ok_or_else(|| CliError::infeasible("nuclear needs --povm <file>"))?;
            let povm = load_povm(path, tol)?;
            if posterior_states.is_empty() {
                return Err(CliError::infeasible(
                    "nuclear needs one --state <file> per outcome",
                ));
            }
            let states: CliResult<Vec<State>> = posterior_states
                .iter()
                .map(|p| load_state(p, tol))
                .collect();
            let instrument = nuclear_instrument(&povm, &states?, tol)?;
            to_value(&InstrumentFile::from_instrument(&instrument))
        }
        other => Err(CliError::infeasible(format!(
            "unknown family '{other}' (expected trine, norm1-c3, regular-not-norm1, joint-c2, \
             frame, random-povm, random-pvm, random-state, luders, or nuclear)"
        ))),
    }
}

fn parse_pairs(text: &str) -> CliResult<Vec<(usize, usize)>> {
    text.split(';')
        .map(|pair| {
            let mut it = pair.split(',');
            let n = it
                .next()
                .and_then(|x| x.trim().parse().ok())
                .ok_or_else(|| CliError::infeasible(format!("bad index pair '{pair}'")))?;
            let m = it
                .next()
                .and_then(|x| x.trim().parse().ok())
                .ok_or_else(|| CliError::infeasible(format!("bad index pair '{pair}'")))?;
            if it.next().is_some() {
                return Err(CliError::infeasible(format!("bad index pair '{pair}'")));
            }
            Ok((n, m))
        })
        .collect()
}

fn parse_floats(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| CliError::infeasible(format!("bad number '{x}'")))
        })
        .collect()
}

fn parse_usizes(text: &str) -> CliResult<Vec<usize>> {
    text.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| CliError::infeasible(format!("bad count '{x}'")))
        })
        .collect()
}
