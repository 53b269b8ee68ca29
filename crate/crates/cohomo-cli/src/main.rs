//! `cohomo` — driver for the circle-dynamics experiments in cohomolib.
//!
//! Every subcommand prints one JSON report to stdout (config echo, named
//! pass/fail checks with measured values, result payload) and can mirror it
//! to a file with `--json` or dump its tabular data with `--csv`. Outputs
//! are byte-identical across runs of the same configuration.
//!
//! Exit codes: 0 success, 2 a check failed or a run-level invariant broke,
//! 3 an iteration/depth/denominator budget ran out, 4 unusable input.

mod cmds;
mod config;
mod emit;
mod errors;
mod spec;

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::cmds::CommandOutput;
use crate::errors::CliError;

#[derive(Parser)]
#[command(
    name = "cohomo",
    version,
    about = "circle dynamics: continued fractions, return maps, cocycle bounds, cohomological solvers"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Clone, Args)]
struct IoArgs {
    /// JSON config file; explicit flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write the JSON report to this path.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write the per-row CSV table to this path.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Continued-fraction expansion with exact convergent data
    Cf {
        #[command(flatten)]
        io: IoArgs,
        /// `golden`, `sqrt:D`, `pi-3`, `P/Q`, decimal, or `quotients:a0,a1,...`
        #[arg(long)]
        alpha: Option<String>,
        #[arg(long)]
        depth: Option<usize>,
        /// Working precision in bits
        #[arg(long)]
        bits: Option<u64>,
        /// Report fast-approximation levels for this exponent, e.g. `11/2`
        #[arg(long)]
        tau: Option<String>,
    },
    /// Dump one chain-rule polynomial and its invariants
    Calculus {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long = "print-pr")]
        print_pr: Option<usize>,
    },
    /// Return-map geometry of a circle map at one level
    Map {
        #[command(flatten)]
        io: IoArgs,
        /// Family spec, e.g. `arnold:eps=0.5,rho=golden`
        family: Option<String>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        level: Option<usize>,
    },
    /// Birkhoff-sum deviation bounds at return times
    Dk {
        #[command(flatten)]
        io: IoArgs,
        family: Option<String>,
        #[arg(long)]
        phi: Option<String>,
        /// Comma-separated levels; default is every level within budget
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<usize>>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        level_budget: Option<u64>,
    },
    /// Derivative contraction along return times
    Herman {
        #[command(flatten)]
        io: IoArgs,
        family: Option<String>,
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<usize>>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Decay of normalized Birkhoff sums at deep return times
    #[command(name = "deep-sums")]
    DeepSums {
        #[command(flatten)]
        io: IoArgs,
        family: Option<String>,
        #[arg(long)]
        phi: Option<String>,
        #[arg(long)]
        level_budget: Option<u64>,
    },
    /// Mode-by-mode solve of the rotation cohomological equation
    #[command(name = "solve-rotation")]
    SolveRotation {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long)]
        alpha: Option<String>,
        #[arg(long)]
        psi: Option<String>,
        #[arg(long)]
        modes: Option<usize>,
    },
    /// Renormalized action generators and their matrix
    Renorm {
        #[command(flatten)]
        io: IoArgs,
        family: Option<String>,
        #[arg(long)]
        phi: Option<String>,
        #[arg(long)]
        level: Option<usize>,
    },
    /// Level-by-level coboundary approximation with certificates
    Coboundary {
        #[command(flatten)]
        io: IoArgs,
        family: Option<String>,
        #[arg(long)]
        phi: Option<String>,
        #[arg(long)]
        r: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Explicit levels, bypassing the qualifying-level scan
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<usize>>,
        /// Shallowest level the construction will touch
        #[arg(long = "n-min")]
        n_min: Option<usize>,
        #[arg(long = "budget-qn")]
        budget_qn: Option<u64>,
        /// Visit every level in budget, not only qualifying ones
        #[arg(long)]
        waive_qualifying: bool,
        /// Skip the per-level certificate re-verification
        #[arg(long)]
        no_verify: bool,
    },
}

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                0
            } else {
                4
            };
        }
    };
    let threads = match threads_from_env() {
        Ok(t) => t,
        Err(m) => {
            eprintln!("config error: {m}");
            return 4;
        }
    };
    match dispatch(cli, threads) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

/// The library runs sequentially; the cap is validated, echoed in every
/// report, and honored trivially (one worker never exceeds any cap).
fn threads_from_env() -> Result<usize, String> {
    match std::env::var("COHOMOLIB_THREADS") {
        Err(std::env::VarError::NotPresent) => Ok(1),
        Err(e) => Err(format!("COHOMOLIB_THREADS: {e}")),
        Ok(v) => {
            let t: usize = v
                .trim()
                .parse()
                .map_err(|_| format!("COHOMOLIB_THREADS must be a positive integer, got `{v}`"))?;
            if t == 0 {
                return Err("COHOMOLIB_THREADS must be at least 1".into());
            }
            Ok(t)
        }
    }
}

fn dispatch(cli: Cli, threads: usize) -> Result<i32, CliError> {
    match cli.cmd {
        Cmd::Cf {
            io,
            alpha,
            depth,
            bits,
            tau,
        } => {
            let mut cfg: config::CfConfig = config::load(io.config.as_deref())?;
            if let Some(v) = alpha {
                cfg.alpha = v;
            }
            if let Some(v) = depth {
                cfg.depth = v;
            }
            if let Some(v) = bits {
                cfg.bits = v;
            }
            if let Some(v) = tau {
                cfg.tau = Some(v);
            }
            finish("cf", threads, &cfg, cmds::run_cf(&cfg)?, &io)
        }
        Cmd::Calculus { io, print_pr } => {
            let mut cfg: config::CalculusConfig = config::load(io.config.as_deref())?;
            if let Some(v) = print_pr {
                cfg.print_pr = v;
            }
            finish("calculus", threads, &cfg, cmds::run_calculus(&cfg)?, &io)
        }
        Cmd::Map {
            io,
            family,
            grid,
            level,
        } => {
            let mut cfg: config::MapConfig = config::load(io.config.as_deref())?;
            if let Some(v) = family {
                cfg.family = v;
            }
            if let Some(v) = grid {
                cfg.grid = v;
            }
            if let Some(v) = level {
                cfg.level = v;
            }
            finish("map", threads, &cfg, cmds::run_map(&cfg)?, &io)
        }
        Cmd::Dk {
            io,
            family,
            phi,
            levels,
            grid,
            level_budget,
        } => {
            let mut cfg: config::DkConfig = config::load(io.config.as_deref())?;
            if let Some(v) = family {
                cfg.family = v;
            }
            if let Some(v) = phi {
                cfg.phi = v;
            }
            if let Some(v) = levels {
                cfg.levels = Some(v);
            }
            if let Some(v) = grid {
                cfg.grid = v;
            }
            if let Some(v) = level_budget {
                cfg.level_budget = v;
            }
            finish("dk", threads, &cfg, cmds::run_dk(&cfg)?, &io)
        }
        Cmd::Herman {
            io,
            family,
            levels,
            grid,
            budget,
        } => {
            let mut cfg: config::HermanConfig = config::load(io.config.as_deref())?;
            if let Some(v) = family {
                cfg.family = v;
            }
            if let Some(v) = levels {
                cfg.levels = Some(v);
            }
            if let Some(v) = grid {
                cfg.grid = v;
            }
            if let Some(v) = budget {
                cfg.budget = v;
            }
            finish("herman", threads, &cfg, cmds::run_herman(&cfg)?, &io)
        }
        Cmd::DeepSums {
            io,
            family,
            phi,
            level_budget,
        } => {
            let mut cfg: config::DeepSumsConfig = config::load(io.config.as_deref())?;
            if let Some(v) = family {
                cfg.family = v;
            }
            if let Some(v) = phi {
                cfg.phi = v;
            }
            if let Some(v) = level_budget {
                cfg.level_budget = v;
            }
            finish(
                "deep-sums",
                threads,
                &cfg,
                cmds::run_deep_sums(&cfg)?,
                &io,
            )
        }
        Cmd::SolveRotation {
            io,
            alpha,
            psi,
            modes,
        } => {
            let mut cfg: config::SolveRotationConfig = config::load(io.config.as_deref())?;
            if let Some(v) = alpha {
                cfg.alpha = v;
            }
            if let Some(v) = psi {
                cfg.psi = v;
            }
            if let Some(v) = modes {
                cfg.modes = v;
            }
            finish(
                "solve-rotation",
                threads,
                &cfg,
                cmds::run_solve_rotation(&cfg)?,
                &io,
            )
        }
        Cmd::Renorm {
            io,
            family,
            phi,
            level,
        } => {
            let mut cfg: config::RenormConfig = config::load(io.config.as_deref())?;
            if let Some(v) = family {
                cfg.family = v;
            }
            if let Some(v) = phi {
                cfg.phi = v;
            }
            if let Some(v) = level {
                cfg.level = v;
            }
            finish("renorm", threads, &cfg, cmds::run_renorm(&cfg)?, &io)
        }
        Cmd::Coboundary {
            io,
            family,
            phi,
            r,
            epsilon,
            levels,
            n_min,
            budget_qn,
            waive_qualifying,
            no_verify,
        } => {
            let mut cfg: config::CoboundaryConfig = config::load(io.config.as_deref())?;
            if let Some(v) = family {
                cfg.family = v;
            }
            if let Some(v) = phi {
                cfg.phi = v;
            }
            if let Some(v) = r {
                cfg.r = v;
            }
            if let Some(v) = epsilon {
                cfg.epsilon = v;
            }
            if let Some(v) = levels {
                cfg.levels = Some(v);
            }
            if let Some(v) = n_min {
                cfg.n_min = v;
            }
            if let Some(v) = budget_qn {
                cfg.budget_qn = v;
            }
            if waive_qualifying {
                cfg.require_qualifying = false;
            }
            if no_verify {
                cfg.verify = false;
            }
            finish("coboundary", threads, &cfg, cmds::run_coboundary(&cfg)?, &io)
        }
    }
}

fn finish<C: Serialize>(
    command: &str,
    threads: usize,
    cfg: &C,
    out: CommandOutput,
    io: &IoArgs,
) -> Result<i32, CliError> {
    let any_failed = out.checks.iter().any(|c| !c.passed);
    let envelope = emit::Envelope {
        command,
        version: env!("CARGO_PKG_VERSION"),
        threads,
        config: cfg,
        checks: &out.checks,
        result: &out.result,
    };
    let mut text = serde_json::to_string_pretty(&envelope)
        .map_err(|e| CliError::Failure(format!("report serialization: {e}")))?;
    text.push('\n');
    print!("{text}");
    if let Some(p) = &io.json {
        fs::write(p, &text)
            .map_err(|e| CliError::Failure(format!("write {}: {e}", p.display())))?;
    }
    if let Some(p) = &io.csv {
        match &out.csv {
            Some(t) => fs::write(p, t.to_bytes())
                .map_err(|e| CliError::Failure(format!("write {}: {e}", p.display())))?,
            None => return Err(CliError::config("this subcommand produces no CSV table")),
        }
    }
    Ok(if any_failed { 2 } else { 0 })
}
