use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use liftlab_cli::commands;
use liftlab_cli::config::Config;
use liftlab_cli::CliError;

#[derive(Parser, Debug)]
#[command(name = "liftlab", version, about = "Lift on convex obstacles in steady channel flow")]
struct Cli {
    /// TOML configuration; missing keys take their defaults.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
    /// Directory for artifacts.
    #[arg(short, long, global = true, default_value = "liftlab-out")]
    out: PathBuf,
    /// JSON-lines run store; defaults to `<out>/runs.jsonl`.
    #[arg(long, global = true, env = "LIFTLAB_STORE")]
    store: Option<PathBuf>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true, env = "LIFTLAB_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the mesh and export it as JSON and SVG.
    Mesh,
    /// Solve once at `flow.lambda` and export the field.
    Solve,
    /// Lift on an equispaced grid over `[0, flow.lambda_max]`.
    LiftCurve,
    /// Bolzano search for a zero-lift configuration along the homotopy.
    ZeroLift,
    /// Estimate the instability measure of the configured body.
    Gamma,
    /// Search the body class for the smallest instability measure.
    Optimize,
    /// Run acceptance criteria.
    Validate {
        #[arg(long, value_enum, default_value = "trivial")]
        suite: SuiteArg,
        /// Run only these criteria.
        #[arg(long = "criterion")]
        criteria: Vec<u8>,
    },
    /// Re-render SVG plots from stored CSV or JSON artifacts.
    Plot {
        input: PathBuf,
        #[arg(short = 'O', long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SuiteArg {
    Trivial,
    Acceptance,
}

fn load_config(path: Option<&PathBuf>) -> Result<Config, CliError> {
    let cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(vec![format!("{}: {e}", p.display())]))?;
            Config::from_toml(&text).map_err(CliError::Config)?
        }
        None => Config::default(),
    };
    let errs = cfg.validate();
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(CliError::Config(errs))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        liftlab::set_threads(n.max(1));
    }
    let cfg = load_config(cli.config.as_ref())?;
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(CliError::Config(vec!["no subcommand given (see --help)".into()]));
    };
    let store = cli.store.clone().unwrap_or_else(|| cli.out.join("runs.jsonl"));
    let ctx = commands::Context { cfg, out: cli.out.clone(), store };
    match command {
        Command::Mesh => ctx.record("mesh", commands::mesh),
        Command::Solve => ctx.record("solve", commands::solve),
        Command::LiftCurve => ctx.record("lift-curve", commands::lift_curve),
        Command::ZeroLift => ctx.record("zero-lift", commands::zero_lift),
        Command::Gamma => ctx.record("gamma", commands::gamma),
        Command::Optimize => ctx.record("optimize", commands::optimize),
        Command::Validate { suite, criteria } => {
            let suite = match suite {
                SuiteArg::Trivial => liftlab::validation::Suite::Trivial,
                SuiteArg::Acceptance => liftlab::validation::Suite::Acceptance,
            };
            ctx.record("validate", |c| commands::validate(c, suite, &criteria))
        }
        Command::Plot { input, output } => commands::plot(&input, output.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            e.report();
            ExitCode::from(e.code())
        }
    }
}
