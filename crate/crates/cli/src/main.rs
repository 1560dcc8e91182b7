use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use clap::{Args, Parser, Subcommand};
use sdwsn::config::{ConfigError, ScenarioConfig};
use sdwsn::metrics::{emit_csv, series_csv, summary_csv, MetricsReport};
use sdwsn::policy::PolicyKind;
use sdwsn::sim::{run_with_seed, SimError};

/// Batch runner for the zoned sensor-network simulator.
#[derive(Parser)]
#[command(name = "sdwsn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write summary.csv and series.csv.
    Run(RunArgs),
    /// Validate a config file and print the effective settings.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// First seed; defaults to the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Policy to run; repeat the flag to compare several.
    #[arg(long = "policy")]
    policies: Vec<String>,
    /// Number of consecutive seeds per policy.
    #[arg(long, default_value_t = 1)]
    repeat: u64,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    jobs: Option<usize>,
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => c.into(),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Check { config } => load(&config).map(|cfg| print!("{}", cfg.to_text())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn load(path: &Path) -> Result<ScenarioConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Runtime(format!("reading {}: {e}", path.display())))?;
    Ok(ScenarioConfig::parse(&text)?)
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let base = load(&args.config)?;
    if args.repeat == 0 {
        return Err(Failure::Invalid("--repeat must be at least 1".into()));
    }
    let policies = if args.policies.is_empty() {
        vec![base.policy]
    } else {
        args.policies
            .iter()
            .map(|p| p.parse::<PolicyKind>().map_err(|e| Failure::Invalid(e.to_string())))
            .collect::<Result<_, _>>()?
    };
    let first = args.seed.unwrap_or(base.seed);
    let jobs: Vec<(PolicyKind, u64)> = policies
        .iter()
        .flat_map(|p| (0..args.repeat).map(move |k| (*p, first + k)))
        .collect();

    let runs_dir = args.out.join("runs");
    std::fs::create_dir_all(&runs_dir)
        .map_err(|e| Failure::Runtime(format!("creating {}: {e}", runs_dir.display())))?;

    let workers = args
        .jobs
        .unwrap_or_else(|| thread::available_parallelism().map_or(1, |n| n.get()))
        .clamp(1, jobs.len());
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<MetricsReport, Failure>>>> =
        Mutex::new((0..jobs.len()).map(|_| None).collect());
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(policy, seed)) = jobs.get(i) else {
                    break;
                };
                let out = one_run(&base, policy, seed, &runs_dir);
                results.lock().expect("no worker panicked")[i] = Some(out);
            });
        }
    });

    let mut reports = Vec::with_capacity(jobs.len());
    for r in results.into_inner().expect("no worker panicked") {
        reports.push(r.expect("every job ran")?);
    }
    reports.sort_by(|a, b| (&a.policy, a.seed).cmp(&(&b.policy, b.seed)));
    write(&summary_csv(&reports), &args.out.join("summary.csv"))?;
    write(&series_csv(&reports), &args.out.join("series.csv"))?;
    eprintln!("{} runs written to {}", reports.len(), args.out.display());
    Ok(())
}

fn one_run(
    base: &ScenarioConfig,
    policy: PolicyKind,
    seed: u64,
    dir: &Path,
) -> Result<MetricsReport, Failure> {
    let mut cfg = base.clone();
    cfg.policy = policy;
    cfg.seed = seed;
    let report = run_with_seed(&cfg, seed)?.report;
    let stem = format!("{}-{seed}", policy.name());
    let one = std::slice::from_ref(&report);
    write(&summary_csv(one), &dir.join(format!("{stem}.summary.csv")))?;
    write(&series_csv(one), &dir.join(format!("{stem}.series.csv")))?;
    Ok(report)
}

fn write(content: &str, path: &Path) -> Result<(), Failure> {
    emit_csv(content, path).map_err(|e| Failure::Runtime(format!("writing {}: {e}", path.display())))
}
