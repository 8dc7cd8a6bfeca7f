mod commands;
mod error;
mod output;
mod presets;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::{CliError, CliResult};
use crate::output::{OutputDir, DEFAULT_OUTPUT};
use crate::settings::Settings;

/// Exact and perturbative survival of quantum and classical walks on rings with traps.
#[derive(Parser)]
#[command(name = "trapwalk", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Common {
    /// Flat TOML config, or a manifest.json from an earlier run; flags override it.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Directory receiving CSV, JSON and manifest files.
    #[arg(long, short, value_name = "DIR")]
    output: Option<PathBuf>,
    /// Parallel workers for ensembles (0 = all cores). Defaults to $TRAPWALK_WORKERS.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Default)]
struct System {
    /// Ring size; a comma list runs several systems.
    #[arg(long, value_name = "N[,N..]")]
    n: Option<String>,
    /// periodic, sequential, random or custom.
    #[arg(long)]
    arrangement: Option<String>,
    /// Number of traps.
    #[arg(long, value_name = "M[,M..]")]
    m: Option<String>,
    /// Capture strength Γ.
    #[arg(long, value_name = "GAMMA[,..]")]
    gamma: Option<String>,
    /// Seed of a random arrangement (master seed for ensembles).
    #[arg(long)]
    seed: Option<String>,
    /// Trap labels (1-based) for a custom arrangement.
    #[arg(long, value_name = "I,J,..")]
    traps: Option<String>,
}

#[derive(Args, Default)]
struct Grid {
    #[arg(long)]
    t_min: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    /// logarithmic or linear.
    #[arg(long)]
    spacing: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Complex spectrum of the trapped quantum operator.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        system: System,
    },
    /// Exact survival curves on a time grid.
    Survival {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        system: System,
        #[command(flatten)]
        grid: Grid,
        /// quantum, classical or both.
        #[arg(long)]
        model: Option<String>,
        /// Also emit the long-time asymptotic curves.
        #[arg(long)]
        asymptotic: bool,
    },
    /// First-order perturbative decay rates.
    Perturb {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        system: System,
        /// Compare against the exact numerical rates.
        #[arg(long)]
        compare: bool,
    },
    /// Random-trap ensemble averages and decay-law fits.
    Ensemble {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        system: System,
        #[command(flatten)]
        grid: Grid,
        /// Realizations per ensemble.
        #[arg(long, short)]
        realizations: Option<usize>,
    },
    /// Power-law exponent against trap concentration over n × m.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        system: System,
        #[command(flatten)]
        grid: Grid,
        #[arg(long, short)]
        realizations: Option<usize>,
    },
    /// Spectral propagator against the matrix exponential on small rings.
    Validate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        system: System,
    },
    /// Write the figure config files.
    Presets {
        /// Directory for the preset files.
        #[arg(long, short, default_value = "presets")]
        output: PathBuf,
        /// Only this preset (fig2, fig3, fig4 or fig5).
        #[arg(long)]
        name: Option<String>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Spectrum { .. } => "spectrum",
            Command::Survival { .. } => "survival",
            Command::Perturb { .. } => "perturb",
            Command::Ensemble { .. } => "ensemble",
            Command::Sweep { .. } => "sweep",
            Command::Validate { .. } => "validate",
            Command::Presets { .. } => "presets",
        }
    }
}

fn resolve(command: &str, common: &Common, system: &System, grid: Option<&Grid>) -> CliResult<Settings> {
    let mut s = match &common.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    if let Some(c) = s.raw("command") {
        if c != command {
            return Err(CliError::config(format!("config is for `{c}`, not `{command}`")));
        }
    }
    s.set("command", command)?;
    s.overlay("output", common.output.as_ref().map(|p| p.display().to_string()))?;
    s.overlay("workers", common.workers)?;
    s.overlay("n", system.n.as_ref())?;
    s.overlay("arrangement", system.arrangement.as_ref())?;
    s.overlay("m", system.m.as_ref())?;
    s.overlay("gamma", system.gamma.as_ref())?;
    s.overlay("seed", system.seed.as_ref())?;
    s.overlay("traps", system.traps.as_ref())?;
    if let Some(g) = grid {
        s.overlay("t_min", g.t_min)?;
        s.overlay("t_max", g.t_max)?;
        s.overlay("points", g.points)?;
        s.overlay("spacing", g.spacing.as_ref())?;
    }
    Ok(s)
}

type Runner = fn(&mut Settings, &mut OutputDir) -> CliResult<Vec<u64>>;

fn execute(command: &str, mut s: Settings, runner: Runner) -> CliResult<()> {
    s.set_default("output", DEFAULT_OUTPUT);
    let root = PathBuf::from(s.raw("output").unwrap_or(DEFAULT_OUTPUT));
    let mut out = OutputDir::create(&root)?;
    let seeds = runner(&mut s, &mut out)?;
    out.finish(command, &s, &seeds)?;
    Ok(())
}

fn write_presets(dir: &PathBuf, name: Option<&str>) -> CliResult<()> {
    let chosen: Vec<_> = match name {
        Some(n) => vec![presets::find(n).ok_or_else(|| CliError::config(format!("unknown preset `{n}`")))?],
        None => presets::PRESETS.iter().collect(),
    };
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    for p in chosen {
        let path = dir.join(format!("{}.toml", p.name));
        std::fs::write(&path, p.text).map_err(|e| CliError::io(&path, e))?;
        println!("{}: trapwalk {} --config {}", p.name, p.command, path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let name = cli.command.name();
    match &cli.command {
        Command::Spectrum { common, system } => execute(name, resolve(name, common, system, None)?, commands::spectrum),
        Command::Survival {
            common,
            system,
            grid,
            model,
            asymptotic,
        } => {
            let mut s = resolve(name, common, system, Some(grid))?;
            s.overlay("model", model.as_ref())?;
            if *asymptotic {
                s.set("asymptotic", "true")?;
            }
            execute(name, s, commands::survival)
        }
        Command::Perturb {
            common,
            system,
            compare,
        } => {
            let mut s = resolve(name, common, system, None)?;
            if *compare {
                s.set("compare", "true")?;
            }
            execute(name, s, commands::perturb)
        }
        Command::Ensemble {
            common,
            system,
            grid,
            realizations,
        } => {
            let mut s = resolve(name, common, system, Some(grid))?;
            s.overlay("realizations", *realizations)?;
            execute(name, s, commands::ensemble)
        }
        Command::Sweep {
            common,
            system,
            grid,
            realizations,
        } => {
            let mut s = resolve(name, common, system, Some(grid))?;
            s.overlay("realizations", *realizations)?;
            execute(name, s, commands::sweep)
        }
        Command::Validate { common, system } => execute(name, resolve(name, common, system, None)?, commands::validate),
        Command::Presets { output, name } => write_presets(output, name.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.code)
        }
    }
}
