use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ptspec::ir::library_interface;
use ptspec::learner::Sampler;
use ptspec::synth::Strategy;
use ptspec_cli::*;

/// Infers points-to specifications for library code from unit tests.
#[derive(Parser)]
#[command(name = "ptspec", version)]
struct Cli {
    /// Flat `key = value` file of parameters; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of sampled candidate specifications.
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Candidate sampler: random or mcts.
    #[arg(long, global = true)]
    sampler: Option<Sampler>,
    /// Learning rate of the tree sampler.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Longest specification, in variables, checked while learning.
    #[arg(long = "max-len", global = true)]
    n_max: Option<usize>,
    /// Function-hop bound of the ground truth.
    #[arg(short, long, global = true)]
    k: Option<usize>,
    /// Initialization of unit-test variables: null or instantiate.
    #[arg(long, global = true)]
    strategy: Option<Strategy>,
    /// Seed of every random choice in a run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Interpreter step budget per unit test.
    #[arg(long, global = true)]
    fuel: Option<u64>,
    /// Upper bound on worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

/// Where the library (and client) come from.
#[derive(Args)]
struct Inputs {
    /// Library source file.
    #[arg(long)]
    library: Option<PathBuf>,
    /// Corpus benchmark name, resolved under the corpus directory.
    #[arg(long, conflicts_with = "library")]
    bench: Option<String>,
}

impl Inputs {
    fn library_path(&self) -> Result<PathBuf> {
        match (&self.library, &self.bench) {
            (Some(p), _) => Ok(p.clone()),
            (None, Some(b)) => Ok(bench_paths(b).0),
            (None, None) => bail!("either --library or --bench is required"),
        }
    }

    fn client_path(&self) -> Option<PathBuf> {
        self.bench.as_ref().map(|b| bench_paths(b).1)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Analyse a client against library code or generated fragments.
    Analyze {
        #[command(flatten)]
        inputs: Inputs,
        /// Client source files.
        #[arg(long)]
        client: Vec<PathBuf>,
        /// Generated fragments to use in place of the library.
        #[arg(long, conflicts_with_all = ["library", "bench"])]
        fragments: Option<PathBuf>,
    },
    /// Sample, learn and generate code fragments.
    Infer {
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Synthesize and run the unit test of one specification.
    Synth {
        #[command(flatten)]
        inputs: Inputs,
        /// Specification, e.g. "ob_set this_set this_get r_get".
        #[arg(long)]
        spec: String,
    },
    /// Generate code fragments for an automaton or a list of specifications.
    GenFragments {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        automaton: Option<PathBuf>,
        /// File with one specification per line.
        #[arg(long, conflicts_with = "automaton")]
        specs: Option<PathBuf>,
    },
    /// Score an inferred automaton against the ground truth.
    Eval {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        automaton: PathBuf,
        /// Client source files for the points-to ratio.
        #[arg(long)]
        client: Vec<PathBuf>,
    },
    /// Compute the ground truth and the oracle's known false negatives.
    GroundTruth {
        #[command(flatten)]
        inputs: Inputs,
    },
}

fn config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    let o = &cli.overrides;
    macro_rules! over {
        ($($field:ident),*) => { $( if let Some(v) = o.$field.clone() { cfg.$field = v; } )* };
    }
    over!(out, budget, sampler, alpha, n_max, k, strategy, seed, fuel);
    if o.jobs.is_some() {
        cfg.jobs = o.jobs;
    }
    Ok(cfg)
}

fn clients(library: &Path, paths: &[PathBuf]) -> Result<Vec<(String, ptspec::ir::Program)>> {
    paths
        .iter()
        .map(|c| Ok((c.display().to_string(), load_program(&[library.to_path_buf(), c.clone()])?)))
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    let cfg = config(&cli)?;
    match &cli.command {
        Command::Analyze { inputs, client, fragments } => {
            let code = match fragments {
                Some(f) => f.clone(),
                None => inputs.library_path()?,
            };
            let mut files = vec![code];
            files.extend(client.iter().cloned());
            if client.is_empty() {
                files.extend(inputs.client_path());
            }
            let report = cmd_analyze(&load_program(&files)?, &cfg.out)?;
            print!("{}", render_points_to(&report.points_to));
            eprintln!("{} closure edges; reports in {}", report.edges, cfg.out.display());
        }
        Command::Infer { inputs } => {
            let lib = load_library(&inputs.library_path()?)?;
            let report = cmd_infer(&lib, &cfg)?;
            let iface = library_interface(&lib);
            print!("{}", render_language(&iface, &report.automaton, cfg.n_max));
            eprintln!(
                "{} positives, {} states, {} oracle queries; artifacts in {}",
                report.positives.len(),
                report.automaton.num_states(),
                report.oracle_queries,
                cfg.out.display()
            );
        }
        Command::Synth { inputs, spec } => {
            let lib = load_library(&inputs.library_path()?)?;
            let (test, verdict) = cmd_synth(&lib, spec, &cfg)?;
            print!("{test}");
            let status = if verdict.accepted { "accepted".to_string() } else { format!("rejected: {}", verdict.reason) };
            println!("// {status}");
        }
        Command::GenFragments { inputs, automaton, specs } => {
            let lib = load_library(&inputs.library_path()?)?;
            let iface = library_interface(&lib);
            let a = match (automaton, specs) {
                (Some(p), _) => load_automaton(&iface, p)?,
                (None, Some(p)) => {
                    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    automaton_of_specs(&iface, &text)?
                }
                (None, None) => bail!("either --automaton or --specs is required"),
            };
            print!("{}", cmd_gen_fragments(&lib, &a, &cfg.out)?.render());
        }
        Command::Eval { inputs, automaton, client } => {
            let path = inputs.library_path()?;
            let lib = load_library(&path)?;
            let a = load_automaton(&library_interface(&lib), automaton)?;
            let mut client_paths = client.clone();
            if client_paths.is_empty() {
                client_paths.extend(inputs.client_path());
            }
            let report = cmd_eval(&lib, &a, &clients(&path, &client_paths)?, &cfg)?;
            print!("{}", std::fs::read_to_string(cfg.out.join("metrics.txt"))?);
            if report.metrics.precision < 1.0 {
                eprintln!("warning: inferred specifications outside the ground truth");
            }
        }
        Command::GroundTruth { inputs } => {
            let lib = load_library(&inputs.library_path()?)?;
            let (truth, fns) = cmd_ground_truth(&lib, &cfg)?;
            eprintln!(
                "{} specifications within {} hops, {} rejected by the oracle; reports in {}",
                truth.specs.len(),
                truth.bound,
                fns.len(),
                cfg.out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<NoSpecifications>() => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
