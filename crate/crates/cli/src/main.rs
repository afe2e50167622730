use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qosp_core::scenario::{describe, run_scenario, Scenario, ScenarioKind};
use qosp_core::{load_config, ConfigFile, Error};

const EXIT_CONFIG: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "qosp",
    version,
    about = "Raman-memory conversion and photon-counting scenarios"
)]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON config file; missing keys take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    #[arg(long, global = true, value_name = "N", default_value_t = 1)]
    seed: u64,

    /// Trigger slots per simulated point (default depends on the scenario).
    #[arg(long, global = true, value_name = "N")]
    trials: Option<u64>,

    /// Skip the Monte Carlo and write closed-form expectations only.
    #[arg(long, global = true)]
    analytic_only: bool,

    /// Worker shards; results do not depend on this.
    #[arg(long, global = true, value_name = "N")]
    shards: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// g2 versus read wavelength, with the non-classical range.
    FreqSweep {
        /// Read centre wavelengths (nm), comma separated.
        #[arg(long, value_delimiter = ',')]
        read_nm: Option<Vec<f64>>,
        #[arg(long, default_value_t = 3.5)]
        read_fwhm: f64,
    },
    /// Retrieved coincidences versus read delay, with an exponential fit.
    DelayScan {
        #[arg(long, default_value_t = 800.0)]
        read_nm: f64,
        /// Read delays (ps), comma separated.
        #[arg(long, value_delimiter = ',')]
        delays: Option<Vec<f64>>,
    },
    /// Input, read and output spectra for several read bandwidths.
    Bandwidth {
        #[arg(long, default_value_t = 801.0)]
        read_nm: f64,
        /// Read FWHMs (nm), comma separated.
        #[arg(long, value_delimiter = ',')]
        read_fwhm: Option<Vec<f64>>,
    },
    /// Coincidences in the central and four neighbouring slots.
    Histogram {
        #[arg(long, default_value_t = 800.0)]
        read_nm: f64,
        #[arg(long, default_value_t = 0.0)]
        delay: f64,
    },
    /// One g2 measurement and its Cauchy-Schwarz verdict.
    G2Point {
        #[arg(long, default_value_t = 800.0)]
        read_nm: f64,
        #[arg(long, default_value_t = 0.0)]
        delay: f64,
    },
}

impl Command {
    fn into_kind(self) -> ScenarioKind {
        match self {
            Command::FreqSweep { read_nm, read_fwhm } => match read_nm {
                Some(read_nm) => ScenarioKind::FreqSweep { read_nm, read_fwhm },
                None => match ScenarioKind::freq_sweep_default() {
                    ScenarioKind::FreqSweep { read_nm, .. } => {
                        ScenarioKind::FreqSweep { read_nm, read_fwhm }
                    }
                    _ => unreachable!(),
                },
            },
            Command::DelayScan { read_nm, delays } => match delays {
                Some(delays_ps) => ScenarioKind::DelayScan { read_nm, delays_ps },
                None => match ScenarioKind::delay_scan_default() {
                    ScenarioKind::DelayScan { delays_ps, .. } => {
                        ScenarioKind::DelayScan { read_nm, delays_ps }
                    }
                    _ => unreachable!(),
                },
            },
            Command::Bandwidth { read_nm, read_fwhm } => ScenarioKind::Bandwidth {
                read_nm,
                read_fwhm: read_fwhm.unwrap_or_else(|| vec![2.1, 12.1]),
            },
            Command::Histogram { read_nm, delay } => ScenarioKind::Histogram {
                read_nm,
                delay_ps: delay,
            },
            Command::G2Point { read_nm, delay } => ScenarioKind::G2Point {
                read_nm,
                delay_ps: delay,
            },
        }
    }
}

fn run(cli: Cli) -> Result<String, Error> {
    let cfg = match &cli.common.config {
        Some(path) => load_config(path)?,
        None => ConfigFile::default(),
    };
    let mut scenario = Scenario::new(cli.command.into_kind(), cli.common.seed);
    if let Some(trials) = cli.common.trials {
        scenario.trials = trials;
    }
    scenario.analytic_only = cli.common.analytic_only;
    let shards = cli
        .common
        .shards
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let files = run_scenario(&scenario, &cfg, &cli.common.out, shards)?;
    Ok(describe(&files))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("qosp: {e}");
            ExitCode::from(if e.is_config() {
                EXIT_CONFIG
            } else {
                EXIT_RUNTIME
            })
        }
    }
}
