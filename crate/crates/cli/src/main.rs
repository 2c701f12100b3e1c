use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

use config::ScenarioFile;

#[derive(Parser, Debug)]
#[command(name = "feshbach-opt", version, about = "Optimal control protocols for a trapped condensate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Equilibrium,
    Synthesize,
    Validate,
    Cycle,
    Sweep,
    Mc,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Equilibrium width and energy from the ansatz and the GPE
    Equilibrium(Args),
    /// Optimal strokes for each mu of the [stroke] section
    Synthesize(Args),
    /// GPE run of a protocol file or of the [step] section
    Validate(ValidateArgs),
    /// Engine cycles of the [cycle] section
    Cycle(Args),
    /// Power and efficiency versus cycle time
    Sweep(Args),
    /// Monte-Carlo check of the stochastic analogue
    Mc(Args),
}

#[derive(clap::Args, Debug, Clone)]
pub struct Args {
    /// Scenario file (TOML)
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output_dir`
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Random seed; overrides `seed`
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for parallel sections
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(clap::Args, Debug, Clone)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub common: Args,
    /// Protocol CSV (t, kappa, g, s_pred); overrides [validate].protocol
    #[arg(long)]
    pub protocol: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(feshbach_core::Error),
    Io(std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config: {m}"),
            CliError::Numerical(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "io: {e}"),
        }
    }
}

impl From<feshbach_core::Error> for CliError {
    fn from(e: feshbach_core::Error) -> Self {
        if e.is_input_error() {
            CliError::Config(e.to_string())
        } else {
            CliError::Numerical(e)
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

fn setup(args: &Args) -> Result<(ScenarioFile, PathBuf), CliError> {
    let mut sc = ScenarioFile::load(&args.config)?;
    if let Some(seed) = args.seed {
        sc.seed = Some(seed);
    }
    if let Some(out) = &args.out {
        sc.output_dir = Some(out.clone());
    }
    let dir = sc.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        #[cfg(feature = "parallel")]
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    Ok((sc, dir))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (kind, args, protocol) = match cli.command {
        Command::Equilibrium(a) => (Kind::Equilibrium, a, None),
        Command::Synthesize(a) => (Kind::Synthesize, a, None),
        Command::Validate(v) => (Kind::Validate, v.common, v.protocol),
        Command::Cycle(a) => (Kind::Cycle, a, None),
        Command::Sweep(a) => (Kind::Sweep, a, None),
        Command::Mc(a) => (Kind::Mc, a, None),
    };
    let (sc, dir) = setup(&args)?;
    let written = match kind {
        Kind::Equilibrium => commands::equilibrium(&sc, &dir)?,
        Kind::Synthesize => commands::synthesize(&sc, &dir)?,
        Kind::Validate => commands::validate(&sc, &dir, protocol)?,
        Kind::Cycle => commands::cycle(&sc, &dir)?,
        Kind::Sweep => commands::sweep(&sc, &dir)?,
        Kind::Mc => commands::mc(&sc, &dir)?,
    };
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
