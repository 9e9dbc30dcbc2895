use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qobs::numerics::Tolerances;
use qobs_cli::{commands, envelope, render, CliError};

/// Discrete quantum observables: validation, optimality certificates,
/// dilations, refinements, transformations, and Monte-Carlo simulation.
///
/// Files are UTF-8 JSON with `"schema_version": 1`; matrices are nested
/// row-major arrays of `[re, im]` pairs. Exit codes: 0 success, 2 domain
/// failure, 3 parse failure, 4 infeasible request.
#[derive(Parser)]
#[command(name = "qobs", version, about)]
struct Cli {
    #[command(flatten)]
    tol: TolArgs,

    /// Suppress the generated_at timestamp for byte-reproducible output.
    #[arg(long, global = true)]
    no_timestamp: bool,

    /// Write the JSON result here instead of stdout.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TolArgs {
    /// Hermiticity tolerance.
    #[arg(long, global = true)]
    tol_herm: Option<f64>,
    /// Positive semidefiniteness slack.
    #[arg(long, global = true)]
    tol_psd: Option<f64>,
    /// Identity / completeness tolerance.
    #[arg(long, global = true)]
    tol_id: Option<f64>,
    /// Relative rank cutoff.
    #[arg(long, global = true)]
    tol_rank_rel: Option<f64>,
    /// Eigendecomposition residual tolerance.
    #[arg(long, global = true)]
    tol_eig: Option<f64>,
    /// Slack for the norm-1 / eigenvalue-1 threshold.
    #[arg(long, global = true)]
    tol_eigval1: Option<f64>,
}

impl TolArgs {
    fn resolve(&self) -> Result<Tolerances, CliError> {
        let mut tol = Tolerances::default();
        if let Some(x) = self.tol_herm {
            tol.herm_tol = x;
        }
        if let Some(x) = self.tol_psd {
            tol.psd_tol = x;
        }
        if let Some(x) = self.tol_id {
            tol.id_tol = x;
        }
        if let Some(x) = self.tol_rank_rel {
            tol.rank_rel_tol = x;
        }
        if let Some(x) = self.tol_eig {
            tol.eig_tol = x;
        }
        if let Some(x) = self.tol_eigval1 {
            tol.eigval1_tol = x;
        }
        tol.validate().map_err(CliError::from)?;
        Ok(tol)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check every POVM invariant of a file and report residuals.
    Validate { input: PathBuf },

    /// Run all optimality certificates and print the aggregate report.
    Certify {
        input: PathBuf,
        /// Seed for the witness searches.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Total iteration budget for witness searches.
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
        /// Multistart count for witness searches.
        #[arg(long, default_value_t = 64)]
        starts: usize,
        /// Evaluate witness-search starts on multiple threads.
        #[arg(long)]
        parallel: bool,
        /// Sample this many outcome subsets instead of exhausting 2^N.
        #[arg(long)]
        sample_subsets: Option<usize>,
    },

    /// Build the minimal Naimark dilation of a POVM.
    Dilate { input: PathBuf },

    /// Build the maximal rank-1 refinement of a POVM.
    Refine { input: PathBuf },

    /// Construct an example family or a seeded random input.
    Generate {
        /// trine | norm1-c3 | regular-not-norm1 | joint-c2 | frame |
        /// random-povm | random-pvm | random-state | luders | nuclear
        family: String,
        #[arg(long)]
        dim: Option<usize>,
        /// Index grid for the frame family: full | diagonal | custom.
        #[arg(long)]
        grid: Option<String>,
        /// Custom index pairs "n,m;n,m;..." (1-based) for --grid custom.
        #[arg(long)]
        pairs: Option<String>,
        /// Comma-separated weights for the frame family.
        #[arg(long)]
        weights: Option<String>,
        /// Comma-separated effect ranks for random-povm.
        #[arg(long)]
        ranks: Option<String>,
        /// Comma-separated block sizes for random-pvm.
        #[arg(long)]
        multiplicities: Option<String>,
        /// Source POVM file for the luders / nuclear instrument families.
        #[arg(long)]
        povm: Option<PathBuf>,
        /// Posterior state file, once per outcome (nuclear family).
        #[arg(long = "state")]
        states: Vec<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },

    /// Classically post-process a POVM by a Markov kernel file.
    Smear { input: PathBuf, kernel: PathBuf },

    /// Fit the Markov kernel expressing one POVM as a smearing of a rank-1
    /// POVM.
    ExtractKernel { input: PathBuf, second: PathBuf },

    /// Build the measure-and-prepare channel realizing a POVM from an
    /// index-aligned PVM.
    Preprocess { pvm: PathBuf, target: PathBuf },

    /// Sample i.i.d. outcomes of a POVM in a state.
    Simulate {
        povm: PathBuf,
        state: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },

    /// Sample a sequential measurement: an instrument followed by a POVM on
    /// its output space.
    Sequential {
        instrument: PathBuf,
        second: PathBuf,
        state: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },

    /// Search for pure-state indistinguishability witnesses.
    Witness {
        input: PathBuf,
        /// auto | span | phase
        #[arg(long, default_value = "auto")]
        method: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
        #[arg(long, default_value_t = 64)]
        starts: usize,
        #[arg(long)]
        parallel: bool,
    },
}

fn run(cli: &Cli) -> Result<serde_json::Value, CliError> {
    let tol = cli.tol.resolve()?;
    match &cli.command {
        Command::Validate { input } => commands::cmd_validate(input, &tol),
        Command::Certify {
            input,
            seed,
            budget,
            starts,
            parallel,
            sample_subsets,
        } => commands::cmd_certify(
            input,
            &tol,
            *seed,
            *budget,
            *starts,
            *parallel,
            *sample_subsets,
        ),
        Command::Dilate { input } => commands::cmd_dilate(input, &tol),
        Command::Refine { input } => commands::cmd_refine(input, &tol),
        Command::Generate {
            family,
            dim,
            grid,
            pairs,
            weights,
            ranks,
            multiplicities,
            povm,
            states,
            seed,
        } => commands::cmd_generate(
            family,
            *dim,
            grid.as_deref(),
            pairs.as_deref(),
            weights.as_deref(),
            ranks.as_deref(),
            multiplicities.as_deref(),
            povm.as_deref(),
            states,
            *seed,
            &tol,
        ),
        Command::Smear { input, kernel } => commands::cmd_smear(input, kernel, &tol),
        Command::ExtractKernel { input, second } => {
            commands::cmd_extract_kernel(input, second, &tol)
        }
        Command::Preprocess { pvm, target } => commands::cmd_preprocess(pvm, target, &tol),
        Command::Simulate {
            povm,
            state,
            shots,
            seed,
        } => commands::cmd_simulate(povm, state, *shots, *seed, &tol),
        Command::Sequential {
            instrument,
            second,
            state,
            shots,
            seed,
        } => commands::cmd_sequential(instrument, second, state, *shots, *seed, &tol),
        Command::Witness {
            input,
            method,
            seed,
            budget,
            starts,
            parallel,
        } => commands::cmd_witness(input, method, &tol, *seed, *budget, *starts, *parallel),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let tol = match cli.tol.resolve() {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(&cli) {
        Ok(value) => {
            let text = render(&envelope(value, &tol, !cli.no_timestamp));
            match &cli.output {
                Some(path) => {
                    if let Err(e) = fs::write(path, &text) {
                        eprintln!("error: cannot write {}: {e}", path.display());
                        return ExitCode::from(3);
                    }
                }
                None => print!("{text}"),
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
