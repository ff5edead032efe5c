//! `cplp`: local passivity checks, extraction SDP, bounds, sweeps and the
//! classical case from JSON model files.

mod commands;
mod input;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cplp_core::Error;
use serde_json::json;

/// Exit codes are part of the interface.
pub mod exit {
    pub const PASSIVE: u8 = 0;
    pub const NON_PASSIVE: u8 = 1;
    pub const INPUT: u8 = 2;
    pub const NOT_CONVERGED: u8 = 3;
    pub const PRECONDITION: u8 = 4;
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => exit::INPUT,
            CliError::Core(Error::NotConverged(_)) => exit::NOT_CONVERGED,
            CliError::Core(Error::DegenerateGround { .. } | Error::RankDeficientGround { .. }) => exit::PRECONDITION,
            CliError::Core(_) => exit::INPUT,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Input(_) => "input",
            CliError::Core(Error::NotConverged(_)) => "not_converged",
            CliError::Core(Error::DegenerateGround { .. }) => "degenerate_ground",
            CliError::Core(Error::RankDeficientGround { .. }) => "rank_deficient_ground",
            CliError::Core(Error::Oversize(_)) => "oversize",
            CliError::Core(_) => "invalid_input",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Input(m) => m.clone(),
            CliError::Core(e) => e.to_string(),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "cplp", version, about = "Local energy extraction limits for bipartite quantum states")]
struct Cli {
    /// SDP solver tolerance.
    #[arg(long, global = true, env = "CPLP_TOL", default_value_t = 1e-8)]
    tol: f64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Spectral passivity test; exit 0 if passive, 1 if not.
    Check {
        model: PathBuf,
        /// Also solve the extraction SDP and attach its summary.
        #[arg(long)]
        sdp: bool,
    },
    /// Optimal local channel and the energy it extracts.
    Extract {
        model: PathBuf,
        /// Write the optimal Choi matrix and dual certificate to this file.
        #[arg(long)]
        choi_out: Option<PathBuf>,
    },
    /// Re-verify a saved channel and certificate against a model.
    Verify {
        model: PathBuf,
        #[arg(long)]
        choi: PathBuf,
    },
    /// Threshold temperature across a parameter grid.
    Scan {
        model: PathBuf,
        #[arg(long, default_value = "kappa")]
        param: String,
        /// `lo:hi:n`, linearly spaced.
        #[arg(long)]
        grid: String,
        /// CSV output path; JSON metadata is written next to it.
        #[arg(long)]
        out: PathBuf,
        /// Temperature window `lo:hi`.
        #[arg(long, default_value = "0.01:100")]
        t_window: String,
        /// Comma-separated chain lengths; one curve per length.
        #[arg(long, value_delimiter = ',')]
        chain_lengths: Option<Vec<usize>>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Analytic sufficient conditions and the frustration chain.
    Bounds {
        model: PathBuf,
        /// Seed for the correlation estimate.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Optimal deterministic map for a product-basis instance.
    Classical { instance: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check { model, sdp } => commands::check(&model, cli.tol, sdp),
        Command::Extract { model, choi_out } => commands::extract(&model, cli.tol, choi_out.as_deref()),
        Command::Verify { model, choi } => commands::verify(&model, &choi, cli.tol),
        Command::Scan { model, param, grid, out, t_window, chain_lengths, jobs } => {
            commands::scan(&commands::ScanArgs { model, param, grid, out, t_window, chain_lengths, jobs })
        }
        Command::Bounds { model, seed } => commands::bounds(&model, seed),
        Command::Classical { instance } => commands::classical(&instance),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let mut body = json!({ "error": e.kind(), "message": e.message() });
            if let CliError::Core(Error::NotConverged(sol)) = &e {
                body["best_iterate"] = commands::solution_json(sol, None);
            }
            println!("{}", serde_json::to_string_pretty(&body).expect("error report serializes"));
            eprintln!("cplp: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
