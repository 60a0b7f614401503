use std::path::{Path, PathBuf};
use std::process::ExitCode;

use blws_bench::checks::{augmented_identity, fixed_point, prox_agreement, CheckReport};
use blws_bench::scenario::{repro_grid, worker_slots};
use blws_bench::{emit_table, run_all, Backend, BenchError, Format, Problem, ReportRow, Result, ScenarioConfig};
use clap::{Args, Parser, Subcommand};

/// Robust PCA and matrix completion benchmarks with Lanczos and warm-started
/// block Lanczos partial SVDs.
#[derive(Debug, Parser)]
#[command(name = "blws-bench", version)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Robust PCA by ADM on a generated low-rank plus sparse matrix.
    Rpca(ScenarioArgs),
    /// Matrix completion by SVT on a generated low-rank matrix.
    Mc(ScenarioArgs),
    /// Randomized checks of the SVD backends against dense factorizations.
    SvdCheck(CheckArgs),
    /// Desk-scale grid of both problems with the baseline and block Lanczos.
    Repro(ReproArgs),
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// JSON file with scenario fields; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    rank_frac: Option<f64>,
    #[arg(long)]
    corrupt_frac: Option<f64>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    ratio: Option<f64>,
    /// One row per listed backend, e.g. `lanczos,blws`.
    #[arg(long, value_enum, value_delimiter = ',')]
    backend: Vec<Backend>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl ScenarioArgs {
    fn configs(&self, problem: Problem) -> Result<Vec<ScenarioConfig>> {
        let mut base = match &self.config {
            Some(path) => ScenarioConfig::from_json_file(path)?,
            None => ScenarioConfig::default(),
        };
        if self.config.is_some() && base.problem != problem {
            return Err(BenchError::Config(format!("config file describes {:?}, not {problem:?}", base.problem)));
        }
        base.problem = problem;
        if problem == Problem::Mc && self.config.is_none() && self.m.is_none() {
            base.m = 1000;
        }
        macro_rules! set {
            ($($field:ident),*) => { $(if let Some(v) = self.$field.clone() { base.$field = v; })* };
        }
        set!(m, rank_frac, corrupt_frac, rank, ratio, k, seed, format);
        if self.tol.is_some() {
            base.tol = self.tol;
        }
        if self.max_iter.is_some() {
            base.max_iter = self.max_iter;
        }
        if self.out.is_some() {
            base.out = self.out.clone();
        }
        let backends = if self.backend.is_empty() { vec![base.backend] } else { self.backend.clone() };
        let configs: Vec<_> = backends.into_iter().map(|backend| ScenarioConfig { backend, ..base.clone() }).collect();
        for cfg in &configs {
            cfg.validate()?;
        }
        Ok(configs)
    }
}

#[derive(Debug, Args)]
struct CheckArgs {
    /// Random matrices for the augmented spectrum check.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Random sequences for the thresholding comparison.
    #[arg(long, default_value_t = 50)]
    prox_trials: usize,
    /// Size of the matrices in the thresholding comparison.
    #[arg(long, default_value_t = 200)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ReproArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [500, 1000])]
    rpca_sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [1000, 2000])]
    mc_sizes: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Scenarios run concurrently; more than one distorts timings.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Directory receiving `rpca.<ext>` and `mc.<ext>`; stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Markdown)]
    format: Format,
}

fn write_output(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Runs the scenarios and returns whether every solve converged.
fn scenarios(configs: Vec<ScenarioConfig>) -> Result<bool> {
    let format = configs[0].format;
    let out = configs[0].out.clone();
    let rows: Vec<ReportRow> = run_all(&configs, 1)?.into_iter().map(|o| o.row).collect();
    write_output(&emit_table(&rows, format)?, out.as_deref())?;
    Ok(rows.iter().all(ReportRow::converged))
}

fn svd_check(args: &CheckArgs) -> Result<bool> {
    let (spectrum, vectors) = augmented_identity(args.trials, args.seed)?;
    let (lanczos, blws) = prox_agreement(args.prox_trials, args.size, 3, args.seed)?;
    let fixed = fixed_point(args.trials, args.seed)?;
    let reports: [CheckReport; 5] = [spectrum, vectors, lanczos, blws, fixed];
    for r in &reports {
        println!("{r}");
    }
    Ok(reports.iter().all(CheckReport::passed))
}

fn repro(args: &ReproArgs) -> Result<bool> {
    let grid = repro_grid(&args.rpca_sizes, &args.mc_sizes, args.seed, args.k);
    let outcomes = run_all(&grid, worker_slots(args.jobs)?)?;
    let rows: Vec<ReportRow> = outcomes.into_iter().map(|o| o.row).collect();
    let ext = match args.format {
        Format::Csv => "csv",
        Format::Markdown => "md",
    };
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
    }
    let mut first = true;
    for problem in [Problem::Rpca, Problem::Mc] {
        let part: Vec<ReportRow> = rows.iter().filter(|r| r.problem() == problem).cloned().collect();
        if part.is_empty() {
            continue;
        }
        let text = emit_table(&part, args.format)?;
        let name = match problem {
            Problem::Rpca => "rpca",
            Problem::Mc => "mc",
        };
        match &args.out {
            Some(dir) => write_output(&text, Some(&dir.join(format!("{name}.{ext}"))))?,
            None => {
                if !first {
                    println!();
                }
                print!("{text}");
            }
        }
        first = false;
    }
    Ok(rows.iter().all(ReportRow::converged))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = match &cli.command {
        Command::Rpca(args) => args.configs(Problem::Rpca).and_then(scenarios),
        Command::Mc(args) => args.configs(Problem::Mc).and_then(scenarios),
        Command::SvdCheck(args) => svd_check(args).inspect(|&ok| {
            if !ok {
                eprintln!("some checks failed");
            }
        }),
        Command::Repro(args) => repro(args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => match cli.command {
            Command::SvdCheck(_) => ExitCode::from(1),
            _ => {
                eprintln!("warning: some solves stopped at max-iter without converging");
                ExitCode::from(3)
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
