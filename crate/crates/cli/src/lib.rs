//! Command-line front end for `qndsim-core`.

pub mod commands;
pub mod config;
pub mod output;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::{CommonArgs, DesignArgs, EntropyArgs, ModelArgs, ProtocolArgs, SweepArgs};

#[derive(Debug, Error, PartialEq)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    /// Input errors raised while assembling a configuration are validation
    /// failures even when the core reports them as numerical (an
    /// unnormalized user-supplied state, say).
    pub fn input(e: qndsim_core::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<qndsim_core::Error> for CliError {
    fn from(e: qndsim_core::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else if let qndsim_core::Error::Infeasible(_) = e {
            CliError::Infeasible(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qndsim", version, about = "QND photon-number measurement simulator and detector design tool")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Strong and weak QND conditions for one coupling.
    #[command(allow_negative_numbers = true)]
    QndCheck {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// One Monte-Carlo run of the interferometric readout protocol.
    #[command(allow_negative_numbers = true)]
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        protocol: ProtocolArgs,
    },
    /// Protocol runs over a list of values of one parameter.
    #[command(allow_negative_numbers = true)]
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        protocol: ProtocolArgs,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Detector design optimization under error and backaction targets.
    #[command(allow_negative_numbers = true)]
    Design {
        #[command(flatten)]
        design: DesignArgs,
    },
    /// Information entropy of a response range.
    #[command(allow_negative_numbers = true)]
    Entropy {
        #[command(flatten)]
        entropy: EntropyArgs,
    },
}

/// Runs a parsed command line, writing the report to `--out` or stdout.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let file = match &cli.common.config {
        Some(path) => config::ConfigFile::load(path)?,
        None => config::ConfigFile::default(),
    };
    let seed = cli.common.seed.or(file.seed).unwrap_or(0);
    let out = cli.common.out.clone().or(file.out.clone());
    let format = cli.common.format.or(file.format);

    let (report, default_format, status) = match &cli.command {
        Command::QndCheck { model } => {
            let m = config::overlay("model", &file.model, model)?;
            (commands::qnd_check(&m)?, config::Format::Json, Ok(()))
        }
        Command::Simulate { model, protocol } => {
            let m = config::overlay("model", &file.model, model)?;
            let p = config::overlay("protocol", &file.protocol, protocol)?;
            (commands::simulate(&m, &p, seed)?, config::Format::Json, Ok(()))
        }
        Command::Sweep { model, protocol, sweep } => {
            let m = config::overlay("model", &file.model, model)?;
            let p = config::overlay("protocol", &file.protocol, protocol)?;
            let s = config::overlay("sweep", &file.sweep, sweep)?;
            (commands::sweep(&m, &p, &s, seed)?, config::Format::Csv, Ok(()))
        }
        Command::Design { design } => {
            let d = config::overlay("design", &file.design, design)?;
            let (report, status) = commands::design(&d)?;
            (report, config::Format::Json, status)
        }
        Command::Entropy { entropy } => {
            let e = config::overlay("entropy", &file.entropy, entropy)?;
            (commands::entropy(&e)?, config::Format::Json, Ok(()))
        }
    };
    report.write(format.unwrap_or(default_format), out.as_deref())?;
    status
}
