//! `rnm-sim`: runs one experiment and writes its CSV to `--out` or stdout.
//!
//! Exit codes: 0 success, 2 configuration error, 3 slot budget exceeded,
//! 1 anything else.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use rnm_core::experiment::{
    inject_demo, run, run_energy, run_feedback, run_spectrum, write_results_csv, ExperimentConfig,
    ReceiverKind, SchemeKind,
};
use rnm_core::feedback_codec::write_table_csv;
use rnm_core::{Execution, PpmConfig, RnmConfig, SimError};

#[derive(Debug, Parser)]
#[command(name = "rnm-sim", version, about = "Random number modulation link simulator")]
struct Cli {
    /// JSON experiment file; without it each subcommand uses a built-in default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output CSV path (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 1 runs sequentially. Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// RNM over AWGN with the slot-by-slot receiver.
    Rnm,
    /// Two-stage PPM frames over AWGN.
    Ppm,
    /// RNM with both the naive receiver and the ML sequence decoder.
    Seqdet,
    /// Feedback compression latency table.
    Feedback,
    /// Energy and latency per bit over the standard grid.
    Energy,
    /// Occupied bandwidth of RNM vs continuous PSK at equal bit rate.
    Spectrum,
    /// Noiseless streams with one injected error of each type.
    InjectDemo,
}

impl Command {
    fn default_config(&self) -> ExperimentConfig {
        let snrs = vec![0.0, 5.0, 10.0, 15.0];
        let rnm = RnmConfig::new(8, 4).expect("valid");
        match self {
            Command::Rnm => ExperimentConfig::rnm("rnm", rnm, snrs),
            Command::Ppm => ExperimentConfig::ppm("ppm", PpmConfig::new(8, 4).expect("valid"), snrs),
            Command::Seqdet => {
                let mut c = ExperimentConfig::rnm("seqdet", rnm, snrs);
                c.receiver = ReceiverKind::Both;
                c
            }
            Command::Feedback => {
                let mut c = ExperimentConfig::rnm("feedback", rnm, Vec::new());
                c.scheme = SchemeKind::Feedback;
                c.rnm = None;
                c.trials = 1000;
                c
            }
            Command::Energy => ExperimentConfig::rnm("energy", rnm, snrs),
            Command::Spectrum => ExperimentConfig::rnm("spectrum", rnm, snrs),
            Command::InjectDemo => ExperimentConfig::rnm("inject", rnm, snrs),
        }
    }

    /// Subcommand-specific adjustments applied to a loaded config.
    fn adapt(&self, config: &mut ExperimentConfig) {
        match self {
            Command::Seqdet => config.receiver = ReceiverKind::Both,
            Command::Feedback => config.scheme = SchemeKind::Feedback,
            _ => {}
        }
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| SimError::Config(format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => cli.command.default_config(),
    };
    cli.command.adapt(&mut config);
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(trials) = cli.trials {
        config.trials = trials;
    }
    if let Some(out) = &cli.out {
        config.output = Some(out.clone());
    }
    config.validate()?;
    Ok(config)
}

fn open_output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn execute(cli: &Cli) -> anyhow::Result<()> {
    let config = load_config(cli)?;
    let exec = Execution::from_threads(cli.threads);
    let out = open_output(config.output.as_deref())?;
    match cli.command {
        Command::Rnm | Command::Ppm | Command::Seqdet => write_results_csv(&run(&config, exec)?, out)?,
        Command::Feedback => write_table_csv(&run_feedback(&config, exec)?, out)?,
        Command::Energy => write_results_csv(&run_energy(&config)?, out)?,
        Command::Spectrum => run_spectrum(&config)?.write_csv(out)?,
        Command::InjectDemo => write_results_csv(&inject_demo(&config)?, out)?,
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<SimError>() {
        Some(SimError::Config(_)) => 2,
        Some(SimError::SlotBudgetExceeded { .. }) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("rnm-sim: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
