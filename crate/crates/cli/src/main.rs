use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use trilevel_cli::{describe_map, parse_scenario, run, Task};

/// Driven three-level atoms: master equations, equivalence maps and photon statistics.
///
/// Log verbosity is read from TRILEVEL_LOG (for example `TRILEVEL_LOG=info`).
#[derive(Parser)]
#[command(name = "trilevel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the task named in the scenario file.
    Run(Common),
    /// Propagate the master equation and write populations.
    Simulate(Common),
    /// Integrate a system and its mapped partner and compare the trajectories.
    EquivCheck(Common),
    /// Incoherent resonance-fluorescence spectrum.
    Spectrum(Common),
    /// Photon detection rate after a detection.
    G2(Common),
    /// Next-photon waiting-time density.
    WaitingTime(Common),
    /// Quantum-jump trajectories and bright/dark period statistics.
    Trajectories(Common),
    /// Print the dressed-basis map of the scenario's system.
    DescribeMap {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the scenario.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed, overriding the scenario.
    #[arg(long)]
    seed: Option<u64>,
    /// Tolerance of the task's main check, overriding the scenario.
    #[arg(long)]
    tol: Option<f64>,
}

fn execute(common: Common, task: Option<Task>) -> anyhow::Result<bool> {
    let mut scenario = parse_scenario(&common.config)?;
    if let Some(task) = task {
        scenario.task = task;
    }
    if let Some(out) = common.out {
        scenario.output = out;
    }
    if let Some(seed) = common.seed {
        scenario.seed = seed;
    }
    if let Some(tol) = common.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            anyhow::bail!("--tol must be positive, got {tol}");
        }
        scenario.tolerances.set_primary(scenario.task, tol);
    }
    let report = run(&scenario)?;
    for check in &report.checks {
        println!(
            "{:<4} {}: {:e} {} {:e}",
            if check.pass { "ok" } else { "FAIL" },
            check.name,
            check.measured,
            check.relation,
            check.tolerance
        );
    }
    for (name, value) in &report.results {
        println!("     {name}: {value}");
    }
    println!("report written to {}", scenario.output.join("report.json").display());
    Ok(report.pass)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("TRILEVEL_LOG", "warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(c) => execute(c, None),
        Command::Simulate(c) => execute(c, Some(Task::Simulate)),
        Command::EquivCheck(c) => execute(c, Some(Task::EquivCheck)),
        Command::Spectrum(c) => execute(c, Some(Task::Spectrum)),
        Command::G2(c) => execute(c, Some(Task::G2)),
        Command::WaitingTime(c) => execute(c, Some(Task::WaitingTime)),
        Command::Trajectories(c) => execute(c, Some(Task::Trajectories)),
        Command::DescribeMap { config } => {
            parse_scenario(&config).map_err(anyhow::Error::from).and_then(|s| describe_map(&s.system)).map(|m| {
                print!("{}", m.render());
                true
            })
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            error!("{e:#}");
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
