//! `epchiral` command-line front end.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Overrides, RunConfig};

#[derive(Debug)]
pub enum CliError {
    /// Bad or missing configuration (exit code 2).
    Config(String),
    /// The computation itself failed (exit code 1).
    Compute(String),
}

#[derive(Parser)]
#[command(name = "epchiral", version, about = "Exceptional-point encircling: exact transfer matrices, noisy dynamics, chirality")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Requested significant digits.
    #[arg(long, global = true)]
    digits: Option<u32>,
    /// RK4 steps per cycle.
    #[arg(long, global = true)]
    steps: Option<u64>,
    /// Noise strength ε.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Noise seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel work.
    #[arg(long, global = true, env = "EPCHIRAL_WORKERS")]
    workers: Option<usize>,
    /// Print the report as JSON.
    #[arg(long, global = true)]
    json: bool,
    /// Treat partial sweep failures as errors.
    #[arg(long, global = true)]
    strict: bool,
    /// Output file (report, profile, boundary table or sweep CSV).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact one-cycle transfer matrix and its symmetry residuals.
    Exact,
    /// RK4 one-cycle propagator, with noise if ε > 0.
    Evolve,
    /// Non-chirality degree of the two encircling directions.
    Chirality {
        /// Use the same matrix for both directions; must give χ = 1.
        #[arg(long)]
        self_test: bool,
    },
    /// Condition-number profile C(t) and critical ε from its maxima.
    Profile,
    /// χ = threshold boundary in the (1/ω, ε) plane.
    Boundary,
    /// Parameter grid from the [sweep] section.
    Sweep,
    /// Symmetry and integrator checks on the configured loop.
    Validate,
}

fn run(cli: &Cli) -> Result<commands::Outcome, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    cfg.apply(&Overrides {
        digits: cli.digits,
        steps: cli.steps,
        epsilon: cli.epsilon,
        seed: cli.seed,
        json: cli.json,
        out: cli.out.clone(),
    });
    eprintln!("# effective config\n{}", cfg.to_toml());
    let resolved = cfg.resolve()?;
    let workers = match cli.workers {
        Some(0) => return Err(CliError::Config("workers: must be positive".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    // the global pool serves the boundary scan; sweeps build their own
    let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    match &cli.command {
        Command::Exact => commands::exact(&resolved),
        Command::Evolve => commands::evolve(&resolved),
        Command::Chirality { self_test } => commands::chirality(&resolved, *self_test),
        Command::Profile => commands::profile(&cfg, &resolved),
        Command::Boundary => commands::boundary(&cfg, &resolved),
        Command::Sweep => commands::sweep(&cfg, &resolved, workers, cli.strict),
        Command::Validate => commands::validate(&cfg, &resolved),
    }
    .map(|mut out| {
        // reports go to --out as JSON for commands without a file format of their own
        if matches!(cli.command, Command::Exact | Command::Evolve | Command::Chirality { .. } | Command::Validate) {
            if let Some(p) = &cfg.output.path {
                if let Err(e) = std::fs::write(p, serde_json::to_string_pretty(&out.report).unwrap_or_default()) {
                    out.warnings.push(format!("{}: {e}", p.display()));
                }
            }
        }
        out.report["json_output"] = serde_json::Value::Null;
        if let Some(m) = out.report.as_object_mut() {
            m.remove("json_output");
        }
        out
    })
    .map(|out| {
        if cfg.output.json {
            println!("{}", serde_json::to_string_pretty(&out.report).unwrap_or_default());
        } else {
            print!("{}", commands::render_text(&out.report));
        }
        out
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            if out.violations.is_empty() {
                ExitCode::SUCCESS
            } else {
                for v in &out.violations {
                    eprintln!("violation: {v}");
                }
                ExitCode::from(1)
            }
        }
        Err(CliError::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Compute(msg)) => {
            eprintln!("computation failed: {msg}");
            ExitCode::from(1)
        }
    }
}
