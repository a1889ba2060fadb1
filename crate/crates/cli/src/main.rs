use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use kinkgate_cli::artifact::Cache;
use kinkgate_cli::config::OnStale;
use kinkgate_cli::{execute, CliError, Command, Context, ExperimentConfig, EXIT_CRITERION};

#[derive(Parser)]
#[command(name = "kinkgate", version, about = "Kink-mediated gates in ion Coulomb crystals")]
struct Cli {
    /// TOML experiment configuration; defaults apply to missing keys.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set gate.heating_rate=0`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for data-parallel stages.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, value_enum, global = true)]
    on_stale: Option<StaleArg>,
    #[arg(long, global = true)]
    no_cache: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum StaleArg {
    Recompute,
    Abort,
}

#[derive(Subcommand)]
enum Cmd {
    /// Equilibrium crystal, periodic orbit and kink classification.
    Crystal,
    /// Floquet spectrum, localized modes and bus coupling.
    Modes,
    /// Gate simulation with the configured heating rate.
    Gate,
    /// Classical heating-rate surrogate for the bus mode.
    Heating,
    /// Ring transport protocol.
    Transport,
    /// Reproduction pipelines.
    Paper {
        #[command(subcommand)]
        which: PaperCmd,
    },
    /// Print the effective configuration as TOML.
    Config,
}

#[derive(Subcommand)]
enum PaperCmd {
    Fig2,
    Table1Row,
    Eq4Alpha,
    TransportDemo,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let base = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let mut config = base.with_overrides(&cli.set)?;
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(o) = &cli.out {
        config.output.dir = o.display().to_string();
    }
    if let Some(s) = cli.on_stale {
        config.output.on_stale = match s {
            StaleArg::Recompute => OnStale::Recompute,
            StaleArg::Abort => OnStale::Abort,
        };
    }
    if cli.no_cache {
        config.output.cache = false;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<i32, CliError> {
    if let Some(n) = cli.threads {
        kinkgate::par::set_threads(n);
    }
    let config = load(&cli)?;
    let cmd = match &cli.command {
        Cmd::Config => {
            config.resolve()?;
            print!("{}", config.to_toml());
            return Ok(0);
        }
        Cmd::Crystal => Command::Crystal,
        Cmd::Modes => Command::Modes,
        Cmd::Gate => Command::Gate,
        Cmd::Heating => Command::Heating,
        Cmd::Transport => Command::Transport,
        Cmd::Paper { which } => match which {
            PaperCmd::Fig2 => Command::Fig2,
            PaperCmd::Table1Row => Command::Table1Row,
            PaperCmd::Eq4Alpha => Command::Eq4Alpha,
            PaperCmd::TransportDemo => Command::TransportDemo,
        },
    };
    let resolved = config.resolve()?;
    let out = PathBuf::from(&config.output.dir);
    let cache = Cache { dir: out.join("cache"), enabled: config.output.cache, on_stale: config.output.on_stale };
    let ctx = Context { config, resolved, out, cache };
    let (doc, path) = execute(cmd, &ctx)?;
    for (k, v) in &doc.scalars {
        println!("{k} = {v}");
    }
    for (k, v) in &doc.labels {
        println!("{k} = {v}");
    }
    for c in &doc.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        println!("{status} {}: {} in [{}, {}]", c.name, c.value, c.min, c.max);
    }
    println!("wrote {}", path.display());
    Ok(if doc.passed() { 0 } else { EXIT_CRITERION })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
