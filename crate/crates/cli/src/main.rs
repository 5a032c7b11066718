use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use starrad_cli::commands::{cmd_pinn, cmd_quad};
use starrad_cli::config::{parse_criteria, parse_seed_list, ExperimentConfig, Mode};
use starrad_cli::verify::Battery;

#[derive(Parser)]
#[command(name = "starrad", version, about = "Curvature-driven quadrature and adaptive PINN sampling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare the uniform and refined trapezoid rules.
    Quad {
        #[arg(long)]
        config: PathBuf,
        /// Output directory, overriding the configuration file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train networks for each requested criterion and seed.
    Pinn {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated seeds, e.g. `0,1,2`.
        #[arg(long)]
        seeds: Option<String>,
        /// Comma-separated subset of res,grad,hessian,unif.
        #[arg(long)]
        criteria: Option<String>,
    },
    /// Run the property battery and the reference quadrature cases.
    Verify,
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Quad { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let Mode::Quadrature(plan) = cfg.mode()? else {
                anyhow::bail!("{} is not a quadrature configuration", config.display());
            };
            let dir = out.unwrap_or(cfg.output.directory.clone());
            for path in cmd_quad(&plan, &dir, cfg.output.emit_plots)? {
                println!("{}", path.display());
            }
            Ok(true)
        }
        Command::Pinn {
            config,
            out,
            seeds,
            criteria,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let Mode::Pinn(mut plan) = cfg.mode()? else {
                anyhow::bail!("{} is not a pinn configuration", config.display());
            };
            if let Some(s) = seeds {
                plan.seeds = parse_seed_list(&s)?;
            }
            if let Some(c) = criteria {
                plan.criteria = parse_criteria(&c.split(',').collect::<Vec<_>>())?;
            }
            let dir = out.unwrap_or(cfg.output.directory.clone());
            let (written, _) = cmd_pinn(&plan, &dir, cfg.output.emit_plots, cfg.output.timing)?;
            for path in written {
                println!("{}", path.display());
            }
            Ok(true)
        }
        Command::Verify => {
            let checks = Battery::default().run();
            for c in &checks {
                println!("{c}");
            }
            Ok(checks.iter().all(|c| c.passed))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
