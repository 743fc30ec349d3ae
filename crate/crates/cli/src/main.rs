use std::path::PathBuf;
use std::process::ExitCode;

use chargeplan::scenario::{run, Command, Format, ScenarioConfig};
use chargeplan::Error;
use clap::{Parser, Subcommand, ValueEnum};

/// Charging-infrastructure planner for an autonomous ride-hailing fleet.
#[derive(Parser)]
#[command(name = "chargeplan", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Scenario file (TOML). Built-in defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write `<command>.<format>` into this directory instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Platform optimum at the plan in `[plan]`.
    Solve,
    /// Welfare-optimal plan for each strategy.
    Plan,
    /// Optimal plans across the values in `[sweep]`.
    Sweep,
    /// Swap minus plug-in welfare over the costs in `[compare]`.
    Compare,
    /// Analytic station metrics against simulation.
    Validate,
    /// Fits the square-root search-time law by simulation.
    Calibrate,
}

#[derive(ValueEnum, Clone, Copy)]
enum OutFormat {
    Csv,
    Json,
}

fn execute(cli: &Cli) -> Result<(), Error> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config {
                field: "--threads".into(),
                message: "must be at least 1".into(),
            });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    let mut config = match &cli.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::from_toml("")?,
    };
    if let Some(s) = cli.seed {
        config = config.with_seed(s);
    }
    let command = match cli.command {
        Cmd::Solve => Command::Solve,
        Cmd::Plan => Command::Plan,
        Cmd::Sweep => Command::Sweep,
        Cmd::Compare => Command::Compare,
        Cmd::Validate => Command::Validate,
        Cmd::Calibrate => Command::Calibrate,
    };
    let format = match cli.format {
        OutFormat::Csv => Format::Csv,
        OutFormat::Json => Format::Json,
    };
    let doc = run(command, &config, format)?;
    match &cli.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("{}.{}", command.name(), format.extension()));
            std::fs::write(&path, doc)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{doc}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
