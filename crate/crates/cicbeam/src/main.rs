use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use cicbeam::association::StreamAssociation;
use cicbeam::harness::experiments::{
    dof_csv, revalidate, sweep_csv, sweep_raw_csv, write_file, write_single,
};
use cicbeam::harness::{
    parse_config, run_convergence, run_dof_vs_m, run_single, run_sweep_power, run_sweep_theta, summarize,
    ExperimentConfig,
};

/// Cooperative interference cancellation for multi-beam UAV uplink.
#[derive(Parser)]
#[command(name = "cicbeam", version)]
struct Cli {
    /// Experiment config (TOML). Defaults to the built-in reference setup.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Scenario seed; sweeps use this many consecutive seeds from here.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for CSV files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Pin a stream association, e.g. "[[4,7],[5,8],[6]]".
    #[arg(long, global = true)]
    assoc: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Maximum DoF versus antenna count for all three schemes.
    Dof,
    /// Per-iteration sum rate of one SCA run.
    Convergence,
    /// Sum rate versus interference temperature.
    SweepTheta,
    /// Sum rate versus transmit power.
    SweepPower,
    /// Optimize one channel draw and write the solution.
    Optimize,
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => parse_config(p)?,
        None => ExperimentConfig::reference(),
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_first_seed(seed);
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(lit) = &cli.assoc {
        let a = StreamAssociation::parse(lit)?;
        a.check_against(&cfg.scenario.topology)?;
        cfg.association = Some(a);
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load(&cli)?;
    let out = &cfg.output_dir;
    match cli.command {
        Command::Dof => {
            let rows = run_dof_vs_m(&cfg);
            let p = write_file(out, "dof.csv", &dof_csv(&rows))?;
            print!("{}", dof_csv(&rows));
            eprintln!("wrote {}", p.display());
        }
        Command::Convergence => {
            let (a, tr) = run_convergence(&cfg)?;
            let p = write_file(out, "convergence.csv", &tr.to_csv())?;
            println!(
                "association {a}: {:.4} bps/Hz after {} iterations (converged: {})",
                tr.sum_rate(),
                tr.iterations(),
                tr.converged
            );
            eprintln!("wrote {}", p.display());
        }
        Command::SweepTheta | Command::SweepPower => {
            let theta = matches!(cli.command, Command::SweepTheta);
            let (points, x_name, stem) = if theta {
                (run_sweep_theta(&cfg)?, "theta_dbm", "sweep_theta")
            } else {
                (run_sweep_power(&cfg)?, "power_dbm", "sweep_power")
            };
            let table = sweep_csv(x_name, &summarize(&points));
            let p = write_file(out, &format!("{stem}.csv"), &table)?;
            let raw = write_file(out, &format!("{stem}_raw.csv"), &sweep_raw_csv(x_name, &points))?;
            print!("{table}");
            eprintln!("wrote {} and {}", p.display(), raw.display());
        }
        Command::Optimize => {
            let run = run_single(&cfg)?;
            let files = write_single(&run, &cfg.scenario, out)?;
            let violation = revalidate(&cfg.scenario, out).context("re-validating the written solution")?;
            println!(
                "association {}: {:.4} bps/Hz (CoMP {:.4}, cognitive {:.4}), max violation {:.2e}",
                run.association,
                run.trace.sum_rate(),
                run.comp,
                run.cognitive,
                violation
            );
            for f in files {
                eprintln!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
