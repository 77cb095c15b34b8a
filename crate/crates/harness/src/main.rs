use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use scrn_harness::bench::subsolver_bench;
use scrn_harness::config::ALGORITHMS;
use scrn_harness::run::headline_metric;
use scrn_harness::{emit, load_config, run_experiment, ConfigError, HarnessError};

#[derive(Debug, Parser)]
#[command(
    name = "scrn",
    version,
    about = "Run stochastic cubic Newton experiments"
)]
struct Cli {
    /// Print the available algorithm ids and exit.
    #[arg(long, global = true)]
    list_algorithms: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a synthetic-problem experiment.
    Synthetic(RunArgs),
    /// Run a reinforcement-learning experiment.
    Rl(RunArgs),
    /// Check both sub-problem solvers on random cubic models.
    SubsolverBench {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory for runs.csv, aggregate.csv and manifest.json.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the master seed of the config file.
    #[arg(long)]
    seed: Option<u64>,
}

fn run(kind: &str, args: &RunArgs) -> Result<(), HarnessError> {
    let mut config = load_config(&args.config)?;
    if config.kind() != kind {
        return Err(ConfigError::new(
            "kind",
            format!("`{}` config given to the `{kind}` command", config.kind()),
        )
        .into());
    }
    if let Some(seed) = args.seed {
        config.run_settings_mut().seed = seed;
    }
    let out = run_experiment(&config)?;
    let metric = headline_metric(&config);
    emit(
        &args.out,
        &config,
        &out.records,
        out.series.as_ref(),
        &out.failures,
        metric,
        out.wall_clock_ms,
    )?;
    let total = config.run_settings().instances;
    eprintln!(
        "{} of {total} instances finished in {:.1} s; results in {}",
        out.records.len(),
        out.wall_clock_ms / 1e3,
        args.out.display()
    );
    if let Some(p) = out.series.as_ref().and_then(|s| s.success_percentage) {
        eprintln!("success: {p:.1}%");
    }
    if let Some((i, msg)) = out.failures.first() {
        return Err(HarnessError::InstancesFailed {
            failed: out.failures.len(),
            total,
            first: format!("instance {i}: {msg}"),
        });
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.list_algorithms {
        for (kind, id, desc) in ALGORITHMS {
            println!("{kind:<10} {id:<10} {desc}");
        }
        return ExitCode::SUCCESS;
    }
    let result = match &cli.command {
        Some(Command::Synthetic(args)) => run("synthetic", args),
        Some(Command::Rl(args)) => run("rl", args),
        Some(Command::SubsolverBench { dim, trials, seed }) => {
            if *dim == 0 || *trials == 0 {
                Err(ConfigError::new("dim", "dim and trials must be ≥ 1").into())
            } else {
                let r = subsolver_bench(*dim, *trials, *seed);
                println!("trials            {}", r.trials);
                println!("exact violations  {}", r.exact_violations);
                println!("side violations   {}", r.side_violations);
                println!("gd converged      {}", r.gd_converged);
                println!("gd within 1e-4    {}", r.gd_close);
                println!("worst residual    {:e}", r.worst_first_order);
                if r.exact_violations + r.side_violations > 0 {
                    std::process::exit(3);
                }
                Ok(())
            }
        }
        None => {
            eprintln!("no command given; see --help");
            return ExitCode::from(2);
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
