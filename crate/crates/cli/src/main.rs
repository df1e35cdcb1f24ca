use std::path::PathBuf;
use std::process::ExitCode;

use circsynth_cli::config::{parse_topologies, parse_variant};
use circsynth_cli::{run, CliError, Command, RunConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "circsynth", version, about = "Equivalent-circuit synthesis from a porous-electrode supercapacitor model")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Config file (`key = value` parameters plus an optional `[run]` section).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of stable states kept by the reduction.
    #[arg(long, global = true)]
    order: Option<usize>,
    /// baseline, kappa_of_c or aC_of_phi.
    #[arg(long, global = true)]
    variant: Option<String>,
    /// Comma-separated list: classical, dynamic, ladder, ladder_cauer2.
    #[arg(long, global = true)]
    topology: Option<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Write the model dimension report and matrix dump.
    Assemble,
    /// Balanced truncation report and Hankel singular values.
    Reduce,
    /// Component tables and netlists.
    Synth,
    /// Bode data for the full model, the reduced model and each circuit.
    Bode,
    /// Nonlinear time-domain simulation.
    Simulate,
    /// Circuit time constants along the current profile.
    Track,
}

fn config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    if let Some(r) = cli.order {
        cfg.r_stable = r;
    }
    if let Some(v) = &cli.variant {
        cfg.variant = parse_variant(v)?;
    }
    if let Some(t) = &cli.topology {
        cfg.topologies = parse_topologies(t)?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            eprintln!("error[config]: {}", e.to_string().lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let command = match cli.command {
        Cmd::Assemble => Command::Assemble,
        Cmd::Reduce => Command::Reduce,
        Cmd::Synth => Command::Synth,
        Cmd::Bode => Command::Bode,
        Cmd::Simulate => Command::Simulate,
        Cmd::Track => Command::Track,
    };
    match config(&cli).and_then(|cfg| run(command, &cfg)) {
        Ok(files) => {
            for f in files {
                println!("{f}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
