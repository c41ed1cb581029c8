use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hjcheck::config::{parse_config, ExperimentConfig};
use hjcheck::drivers::{run_experiment, write_outputs, Format, RunError, Suite};

#[derive(Parser)]
#[command(
    name = "hjcheck",
    version,
    about = "Numerical checks for metric gradient flows and Hamilton-Jacobi equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment configuration; defaults are used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; the report goes to stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// EVI, contraction, energy identity and growth checks.
    EviCheck,
    /// Smoothing profile and Tataru distance properties.
    Tataru,
    /// Laplace functionals and their limits.
    LaplaceConverge,
    /// Inequalities along the Hamiltonian chain.
    HamChain {
        /// Restrict to one link: 1-2, 4-5 or 0-1-overlap.
        #[arg(long)]
        link: Option<String>,
        /// Samples per link and space.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Resolvent solver accuracy and equivariance.
    Resolvent,
    /// Viscosity sub/supersolution tests and comparison.
    Comparison,
    /// Every suite in order.
    All,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, RunError> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|source| RunError::Io { path: path.display().to_string(), source })?;
            parse_config(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Command::HamChain { link, samples } = &cli.command {
        if let Some(link) = link {
            config.chain.links = vec![link.clone()];
        }
        if let Some(samples) = samples {
            config.chain.samples = *samples;
        }
    }
    Ok(config)
}

fn run(cli: &Cli) -> Result<bool, RunError> {
    let config = load(cli)?;
    let suite = match cli.command {
        Command::EviCheck => Suite::Evi,
        Command::Tataru => Suite::Tataru,
        Command::LaplaceConverge => Suite::Laplace,
        Command::HamChain { .. } => Suite::Chain,
        Command::Resolvent => Suite::Resolvent,
        Command::Comparison => Suite::Comparison,
        Command::All => Suite::All,
    };
    let format = match cli.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };
    let outcome = run_experiment(&config, suite)?;
    let out = cli.out.clone().or_else(|| config.out.as_ref().map(PathBuf::from));
    match out {
        Some(dir) => write_outputs(&outcome, &dir, format)?,
        None => match format {
            Format::Csv => print!("{}", outcome.report.to_csv()),
            Format::Json => println!("{}", outcome.report.to_json()),
        },
    }
    eprintln!("{}", outcome.report.summary_line());
    Ok(outcome.report.all_pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
