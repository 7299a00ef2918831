use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use tdho::scenario::{parse_scenario, run, write_output, Scenario};

/// Time-dependent harmonic oscillator toolkit: classical solution pairs,
/// exact propagators, transition amplitudes, semiclassical sweeps and
/// field-mode unitarity diagnostics, driven by JSON scenarios.
#[derive(Parser)]
#[command(name = "tdho", version)]
struct Cli {
    /// Integration tolerance passed to the solvers.
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol: f64,

    /// Worker threads (default: all cores). The TDHO_WORKERS environment
    /// variable overrides this flag.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Output directory for CSV/JSON artifacts.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fundamental solution pairs c, s along a time sweep.
    Solve {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Pointwise propagator values on a (q, q0) grid.
    Propagate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Eigenstate transition amplitude table.
    Transition {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Coherent-state expectations and uncertainties along a sweep.
    Semiclassical {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Model-family tooling.
    Models {
        #[command(subcommand)]
        sub: ModelsCmd,
    },
    /// Infinite-mode field diagnostics.
    Field {
        #[command(subcommand)]
        sub: FieldCmd,
    },
    /// CSV bundles for the three standard figures.
    Figures {
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ModelsCmd {
    /// Closed-form vs ODE validation suite.
    Validate,
}

#[derive(Subcommand)]
enum FieldCmd {
    /// Square-summability of the mode Bogoliubov B sequence.
    Unitarity {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Factorization obstruction and block-composition checks.
    Factorize {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Coherent-state variances per mode.
    Variances {
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn load(path: &PathBuf, expected: &str) -> tdho::Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    let scenario = parse_scenario(&text)?;
    if scenario.command() != expected {
        return Err(tdho::Error::Usage(format!(
            "scenario command {:?} does not match subcommand {expected:?}",
            scenario.command()
        )));
    }
    Ok(scenario)
}

fn dispatch(cli: &Cli) -> tdho::Result<()> {
    let scenario = match &cli.cmd {
        Cmd::Solve { scenario } => load(scenario, "solve")?,
        Cmd::Propagate { scenario } => load(scenario, "propagate")?,
        Cmd::Transition { scenario } => load(scenario, "transition")?,
        Cmd::Semiclassical { scenario } => load(scenario, "semiclassical")?,
        Cmd::Models {
            sub: ModelsCmd::Validate,
        } => Scenario::ModelsValidate,
        Cmd::Field { sub } => match sub {
            FieldCmd::Unitarity { scenario } => load(scenario, "field_unitarity")?,
            FieldCmd::Factorize { scenario } => load(scenario, "field_factorize")?,
            FieldCmd::Variances { scenario } => load(scenario, "field_variances")?,
        },
        Cmd::Figures { scenario } => match scenario {
            Some(path) => load(path, "figures")?,
            None => Scenario::Figures(Default::default()),
        },
    };
    let output = run(&scenario, cli.tol)?;
    for path in write_output(&output, &cli.out)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let workers = std::env::var("TDHO_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .or(cli.workers);
    if let Some(n) = workers {
        if n == 0 {
            eprintln!("error: worker count must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: failed to configure worker pool: {e}");
            return ExitCode::from(3);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
