//! `hardy-lab`: command-line front end for the hardy-lab library.

mod commands;
mod error;
mod provenance;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "hardy-lab", version, about = "Hardy spaces on finite metric measure spaces")]
#[command(after_help = "Set HARDY_LAB_THREADS to cap the number of worker threads.\n\
Exit status: 0 success, 1 a checked property failed, 2 invalid input.")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a space file or report its geometric constants.
    #[command(subcommand)]
    Space(SpaceCmd),
    /// Spectral diagnostics of an operator on a space.
    #[command(subcommand)]
    Spectral(SpectralCmd),
    /// Build or check admissible profiles.
    #[command(subcommand)]
    Profile(ProfileCmd),
    /// Maximal function of a signal.
    Maximal(MaximalArgs),
    /// Whitney cover of a subset.
    Whitney(WhitneyArgs),
    /// Atomic decomposition of a signal.
    Decompose(DecomposeArgs),
    /// Recheck every atom of a decomposition file.
    ValidateAtoms(DecompFileArgs),
    /// Summarize a decomposition file.
    Report(ReportArgs),
    /// Write a seeded random signal for a space.
    Signal(SignalArgs),
    /// Write the space and operator files of a bundled model (P8, P32, C16, G8x8).
    Fixture(FixtureArgs),
}

#[derive(Subcommand, Debug)]
enum SpaceCmd {
    /// Check symmetry, the triangle inequality and positivity of the measure.
    Validate {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Doubling, reverse doubling and non-collapsing constants.
    Report {
        file: PathBuf,
        /// Length mapped to the unit scale (default: median nearest-neighbour distance).
        #[arg(long)]
        unit: Option<f64>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand, Debug)]
enum SpectralCmd {
    /// Markov defect, heat-kernel fit, subordination and finite speed.
    Diagnose {
        space: PathBuf,
        operator: PathBuf,
        /// Heat scales as `2^a..2^b` (powers of two) or `t0..t1` (doubling from t0).
        #[arg(long, default_value = "2^-8..2^2")]
        tgrid: String,
        /// Quadrature nodes for the subordinated Poisson kernel.
        #[arg(long, default_value_t = 64)]
        nodes: usize,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand, Debug)]
enum ProfileCmd {
    /// Sample the band-limited admissible profile of order `m`.
    Build {
        #[arg(long, default_value_t = 6)]
        m: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.125)]
        step: f64,
        #[arg(long, default_value_t = 4096.0)]
        u_max: f64,
        #[arg(long)]
        json: bool,
    },
    /// Check a profile file against its construction and its certificates.
    Check {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaximalKindArg {
    Radial,
    Nontangential,
    Tangential,
    Grand,
    Heat,
    Poisson,
    Hl,
}

#[derive(Args, Debug)]
pub struct MaximalArgs {
    space: PathBuf,
    operator: PathBuf,
    signal: PathBuf,
    #[arg(long, value_enum, default_value = "grand")]
    kind: MaximalKindArg,
    /// Exponent of the reported `L^p` norm.
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    /// Smoothing profile: gaussian, exp, stein or admissible:<m>.
    #[arg(long, default_value = "gaussian")]
    profile: String,
    /// Aperture of the nontangential maximal function.
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    /// Decay exponent of the tangential maximal function (default `2d/θ + 1`).
    #[arg(long)]
    gamma: Option<f64>,
    /// Exponent of the Hardy–Littlewood maximal function (default `p/2`).
    #[arg(long)]
    theta: Option<f64>,
    /// Order of the grand maximal function (default from `d` and `p`).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    json: bool,
    /// Write `point,value` rows.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct WhitneyArgs {
    space: PathBuf,
    /// JSON array of point indices.
    #[arg(long)]
    omega: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
pub struct DecomposeArgs {
    space: PathBuf,
    operator: PathBuf,
    signal: PathBuf,
    #[arg(long, default_value_t = 0.7)]
    p: f64,
    #[arg(long)]
    out: PathBuf,
    /// Extra scales beyond the default finest one.
    #[arg(long, default_value_t = 0)]
    k_extra: i32,
    /// Drop the outstanding atom and start the telescoping this many scales lower.
    #[arg(long)]
    noncompact: Option<u32>,
    #[arg(long)]
    profile_order: Option<usize>,
    #[arg(long)]
    grand_order: Option<usize>,
    #[arg(long)]
    json: bool,
    /// Write per-level budget rows.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DecompFileArgs {
    file: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    file: PathBuf,
    #[arg(long)]
    json: bool,
    /// Write per-atom rows.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SignalArgs {
    space: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct FixtureArgs {
    name: String,
    /// Directory receiving `<name>.space.json` and `<name>.operator.json`.
    #[arg(long, default_value = ".")]
    dir: PathBuf,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("HARDY_LAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::input("BAD_THREADS", format!("HARDY_LAB_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::input("BAD_THREADS", e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Space(SpaceCmd::Validate { file, json }) => commands::space_validate(&file, json),
        Command::Space(SpaceCmd::Report { file, unit, json }) => commands::space_report(&file, unit, json),
        Command::Spectral(SpectralCmd::Diagnose { space, operator, tgrid, nodes, json }) => {
            commands::spectral_diagnose(&space, &operator, &tgrid, nodes, json)
        }
        Command::Profile(ProfileCmd::Build { m, out, step, u_max, json }) => commands::profile_build(m, &out, step, u_max, json),
        Command::Profile(ProfileCmd::Check { file, json }) => commands::profile_check(&file, json),
        Command::Maximal(args) => commands::maximal(&args),
        Command::Whitney(args) => commands::whitney(&args),
        Command::Decompose(args) => commands::decompose(&args),
        Command::ValidateAtoms(args) => commands::validate_atoms(&args),
        Command::Report(args) => commands::report(&args),
        Command::Signal(args) => commands::signal(&args),
        Command::Fixture(args) => commands::fixture(&args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": e });
            eprintln!("{body}");
            ExitCode::from(e.exit)
        }
    }
}
