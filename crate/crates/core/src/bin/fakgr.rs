use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fakgr::channel::CovarianceMode;
use fakgr::experiment::{cmd_compare, cmd_layout, cmd_sweep, ExperimentConfig};
use fakgr::trace::fmt_float;

#[derive(Parser)]
#[command(name = "fakgr", version, about = "Fluid-antenna key generation rate experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured method on every seed and summarize.
    Compare(Common),
    /// Dump UPA and optimized antenna positions.
    Layout(Common),
    /// Joint swarm over a list of path counts.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seeds (overrides the config).
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Use the Monte-Carlo covariance estimate instead of the analytic one.
    #[arg(long)]
    mc: bool,
}

impl Common {
    fn resolve(&self) -> fakgr::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.experiment.output_dir = out.clone();
        }
        if let Some(seeds) = &self.seeds {
            cfg.experiment.seeds = seeds.clone();
        }
        if self.mc {
            cfg.experiment.covariance = CovarianceMode::MonteCarlo;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> fakgr::Result<()> {
    match cli.command {
        Command::Compare(c) => {
            let cfg = c.resolve()?;
            let summary = cmd_compare(&cfg)?;
            for (m, s) in &summary.per_method {
                println!("{:<10} median {} min {} max {}", m.name(), fmt_float(s.median), fmt_float(s.min), fmt_float(s.max));
            }
            for (m, r) in &summary.improvement_over_upa {
                println!("{}/upa - 1 = {:.2}%", m.name(), 100.0 * r);
            }
        }
        Command::Layout(c) => {
            let cfg = c.resolve()?;
            for report in cmd_layout(&cfg)? {
                for (m, l) in &report.methods {
                    let max_disp = l.displacement.iter().copied().fold(0.0, f64::max);
                    println!("seed {} {:<10} kgr {} max displacement {}", report.seed, m.name(), fmt_float(l.kgr), fmt_float(max_disp));
                }
            }
        }
        Command::Sweep(c) => {
            let cfg = c.resolve()?;
            let summary = cmd_sweep(&cfg)?;
            for (l, s) in &summary.per_paths {
                println!("L={l:<3} median {} min {} max {}", fmt_float(s.median), fmt_float(s.min), fmt_float(s.max));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fakgr: error: {e}");
            ExitCode::FAILURE
        }
    }
}
