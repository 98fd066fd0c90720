use clap::{Parser, Subcommand};
use enose_cli::commands::{
    cmd_canlog, cmd_classify, cmd_simulate, cmd_sweep, parse_mixture, LogFilter,
};
use enose_cli::config::{ResolvedConfig, RunConfig};
use enose_cli::error::CliError;
use enose_core::gas::GasSpecies;
use std::path::PathBuf;

/// Deterministic electronic-nose simulator with CAN telemetry.
#[derive(Parser)]
#[command(name = "enose", version, about)]
struct Cli {
    /// Path to a run configuration file (built-in defaults when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the noise seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for generated files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full sampling protocol and emit traces, features,
    /// classification, plot, and CAN bus log.
    Simulate {
        /// Gas mixture as repeated `species=ppm` (omit for clean air).
        #[arg(long = "mix", value_name = "SPECIES=PPM")]
        mix: Vec<String>,
    },
    /// Steady-state sensitivity sweep over a log-spaced grid.
    Sweep {
        /// Gas species to sweep.
        #[arg(long)]
        species: String,
        /// Lowest concentration, ppm.
        #[arg(long)]
        min: f64,
        /// Highest concentration, ppm.
        #[arg(long)]
        max: f64,
        /// Grid points.
        #[arg(long, default_value_t = 50)]
        points: usize,
        /// Also write an SVG plot.
        #[arg(long)]
        svg: bool,
    },
    /// Classify a fingerprint file (five steady Rs/Ro ratios).
    Classify { file: PathBuf },
    /// Decode a bus log file into a readable listing.
    Canlog {
        file: PathBuf,
        /// Keep only one message kind: all|reading|classification|alert.
        #[arg(long, default_value = "all")]
        filter: String,
    },
}

fn load_config(cli: &Cli) -> Result<ResolvedConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.noise.seed = seed;
    }
    cfg.resolve()
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate { mix } => {
            let cfg = load_config(cli)?;
            let mixture = parse_mixture(mix)?;
            let output = cmd_simulate(&cfg, &mixture, &cli.out)?;
            let verdict = output
                .result
                .species
                .map(|s| s.name().to_string())
                .unwrap_or_else(|| "Unknown".to_string());
            println!(
                "classification: {} at {:.1} ppm (residual {:.4}, confidence {:.3})",
                verdict, output.result.concentration, output.result.residual,
                output.result.confidence
            );
            if output.alert.is_some() {
                println!("alert raised");
            }
            for f in &output.files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::Sweep {
            species,
            min,
            max,
            points,
            svg,
        } => {
            let cfg = load_config(cli)?;
            let species = GasSpecies::parse(species)
                .ok_or_else(|| CliError::Parse(format!("unknown gas species '{}'", species)))?;
            let files = cmd_sweep(&cfg, species, *min, *max, *points, *svg, &cli.out)?;
            for f in &files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::Classify { file } => {
            let cfg = load_config(cli)?;
            print!("{}", cmd_classify(&cfg, file)?);
            Ok(())
        }
        Command::Canlog { file, filter } => {
            let filter = LogFilter::parse(filter)?;
            print!("{}", cmd_canlog(file, filter)?);
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {}", e);
        std::process::exit(e.exit_code());
    }
}
