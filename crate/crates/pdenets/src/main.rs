use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use pdenets::finite_diff::{make_stencil_biased, Bias};
use pdenets::harness::{self, ExperimentConfig, Format};
use pdenets::net::TanhNetwork;

#[derive(Parser)]
#[command(name = "pdenets", version, about = "Convergence studies for constructed tanh networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its CSV and JSON reports.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config; the environment variable overrides both).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a configuration without running it.
    Validate { config: PathBuf },
    /// Print the coefficients of a finite-difference stencil as CSV.
    StencilDump {
        /// Multi-index, e.g. `2,0`.
        #[arg(long, value_delimiter = ',')]
        alpha: Vec<usize>,
        #[arg(long)]
        accuracy: usize,
        #[arg(long, value_enum, default_value_t = BiasArg::Central)]
        bias: BiasArg,
    },
    /// Evaluate a serialized network at a point.
    NetEval {
        net: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        at: Vec<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BiasArg {
    Forward,
    Backward,
    Central,
}

impl From<BiasArg> for Bias {
    fn from(b: BiasArg) -> Self {
        match b {
            BiasArg::Forward => Bias::Forward,
            BiasArg::Backward => Bias::Backward,
            BiasArg::Central => Bias::Central,
        }
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<bool> {
    match Cli::parse().command {
        Command::Run { config, out } => {
            let mut cfg = ExperimentConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            if let Some(dir) = out {
                cfg.output = Some(dir.to_string_lossy().into_owned());
            }
            let report = harness::run(&cfg)?;
            let dir = cfg.output_dir();
            let csv = harness::emit(&report, Format::Csv, &dir)?;
            let json = harness::emit(&report, Format::Json, &dir)?;
            print!("{}", harness::summary(&report));
            println!("wrote {} and {}", csv.display(), json.display());
            Ok(report.pass)
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            println!("{}: valid {} configuration", config.display(), cfg.experiment.kind());
            Ok(true)
        }
        Command::StencilDump { alpha, accuracy, bias } => {
            if alpha.is_empty() {
                bail!("--alpha must name at least one axis");
            }
            let biases = vec![Bias::from(bias); alpha.len()];
            let st = make_stencil_biased(&alpha, accuracy, &biases)?;
            print!("{}", st.to_csv());
            Ok(true)
        }
        Command::NetEval { net, at } => {
            let text = std::fs::read_to_string(&net).with_context(|| format!("reading {}", net.display()))?;
            let n = TanhNetwork::from_json(&text)?;
            let y = n.evaluate(&at)?;
            println!("{}", y.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
            Ok(true)
        }
    }
}
