use anyhow::Result;
use bocoa::bo::DEFAULT_BUDGET_MULTIPLIER;
use bocoa_cli::{
    cmd_plotdata, cmd_regress, cmd_replay, cmd_run, parse_configs, parse_dims, parse_functions, parse_variants,
    resolve_seed, CampaignSpec, RegressSpec,
};
use clap::{Parser, Subcommand};
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "bocoa", version, about = "Benchmark campaigns for EGO configurations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark campaign and write provenance, evals.csv and ertd.csv.
    Run {
        /// Comma-separated configuration names, `all`, and/or `random`.
        #[arg(long, default_value = "M")]
        configs: String,
        /// Comma-separated function ids (f1, f3, ...) or `all`.
        #[arg(long, default_value = "all")]
        functions: String,
        #[arg(long, default_value = "3")]
        dims: String,
        #[arg(long, default_value_t = 15)]
        instances: usize,
        /// Base seed; BOCOA_SEED takes precedence when set.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads (0: one per core).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
        /// Evaluation budget per dimension.
        #[arg(long, default_value_t = DEFAULT_BUDGET_MULTIPLIER)]
        budget_multiplier: usize,
        /// Comma-separated target precisions (default 1e2 down to 1e-3).
        #[arg(long)]
        precisions: Option<String>,
    },
    /// Held-out prediction quality of GP variants; writes q2.csv.
    Regress {
        #[arg(long, default_value = "all")]
        variants: String,
        #[arg(long, default_value = "all")]
        functions: String,
        #[arg(long, default_value = "5")]
        dims: String,
        #[arg(long, default_value_t = 15)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
        /// ertd.csv of a campaign, used to fill the rank_ertd column.
        #[arg(long)]
        ertd: Option<PathBuf>,
    },
    /// Add x = log10(evals / d) to ertd.csv rows.
    Plotdata {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-execute the runs recorded in a provenance directory.
    Replay {
        /// Directory of <run_id>.json records.
        runs: PathBuf,
        /// Where to write the reproduced evals.csv.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
}

fn parse_precisions(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| anyhow::anyhow!("bad precision `{t}`: {e}")))
        .collect()
}

fn main_inner(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            configs,
            functions,
            dims,
            instances,
            seed,
            jobs,
            out,
            budget_multiplier,
            precisions,
        } => {
            let mut spec = CampaignSpec::new(
                parse_configs(&configs)?,
                parse_functions(&functions)?,
                parse_dims(&dims)?,
                instances,
                out,
            );
            spec.seed = resolve_seed(seed)?;
            spec.jobs = jobs;
            spec.budget_multiplier = budget_multiplier;
            if let Some(p) = precisions {
                spec.precisions = parse_precisions(&p)?;
            }
            let campaign = cmd_run(&spec)?;
            eprintln!("{} runs written to {}", campaign.runs.len(), spec.out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Regress {
            variants,
            functions,
            dims,
            instances,
            seed,
            jobs,
            out,
            ertd,
        } => {
            let spec = RegressSpec {
                variants: parse_variants(&variants)?,
                functions: parse_functions(&functions)?,
                dims: parse_dims(&dims)?,
                instances,
                seed: resolve_seed(seed)?,
                out,
                jobs,
                ertd,
            };
            let outcome = cmd_regress(&spec)?;
            if outcome.skipped.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("{}", outcome.summary());
                Ok(ExitCode::from(1))
            }
        }
        Command::Plotdata { inputs, out } => {
            match out {
                Some(p) => {
                    let f = std::fs::File::create(&p)?;
                    cmd_plotdata(&inputs, io::BufWriter::new(f))?;
                }
                None => {
                    let stdout = io::stdout();
                    let mut lock = stdout.lock();
                    cmd_plotdata(&inputs, &mut lock)?;
                    lock.flush()?;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Replay { runs, out, jobs } => {
            let results = cmd_replay(&runs, &out, jobs)?;
            eprintln!("{} runs replayed", results.len());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe)
            || c.downcast_ref::<csv::Error>().is_some_and(|e| matches!(e.kind(), csv::ErrorKind::Io(io) if io.kind() == io::ErrorKind::BrokenPipe))
    })
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(code) => code,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
