use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use collapse_core::experiments::{run_fig1, run_fig2, run_limits, run_sweep, write_manifest, SweepConfig};
use collapse_core::params::parse_kv;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Fig1,
    Fig2,
    Limits,
    Sweep,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SolverArg {
    Closed,
    Grid,
}

/// Gaussian-state dynamics of the non-Markovian dissipative QMUPL model.
#[derive(Debug, Parser)]
#[command(name = "collapse-dyn", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// flat key = value config file
    #[arg(long)]
    config: PathBuf,
    /// output directory (created if missing)
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "grid-n")]
    grid_n: Option<usize>,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
}

fn run(cli: &Cli) -> Result<bool, String> {
    let text = std::fs::read_to_string(&cli.config).map_err(|e| format!("{}: {e}", cli.config.display()))?;
    let mut map = parse_kv(&text).map_err(|e| e.to_string())?;
    if let Some(s) = cli.seed {
        map.insert("seed".into(), s.to_string());
    }
    if let Some(n) = cli.grid_n {
        map.insert("grid_n".into(), n.to_string());
    }
    if let Some(s) = cli.solver {
        let v = match s {
            SolverArg::Closed => "closed",
            SolverArg::Grid => "grid",
        };
        map.insert("solver".into(), v.into());
    }
    let cfg = SweepConfig::from_map(map).map_err(|e| e.to_string())?;
    let (name, out) = match cli.command {
        Command::Fig1 => ("fig1", run_fig1(&cfg, &cli.out)),
        Command::Fig2 => ("fig2", run_fig2(&cfg, &cli.out)),
        Command::Limits => ("limits", run_limits(&cfg, &cli.out)),
        Command::Sweep => ("sweep", run_sweep(&cfg, &cli.out)),
    };
    let out = out.map_err(|e| e.to_string())?;
    for c in &out.checks {
        println!("{}", c.line());
    }
    let versions = [("collapse-core", collapse_core::VERSION), ("collapse-dyn", env!("CARGO_PKG_VERSION"))];
    write_manifest(cli.out.join("manifest.txt"), name, &cfg, &out, &versions).map_err(|e| e.to_string())?;
    Ok(out.finite)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("non-finite values in the output");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
