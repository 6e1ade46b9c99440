use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use sysid_cli::truth::truth_report;
use sysid_cli::{
    exit_code, run_compare, run_identify, run_simulate, sweep, write_json, ConfigError,
    Experiment, ExperimentConfig, Overrides,
};
use sysid_core::io::load_model;
use sysid_core::lti::DEFAULT_HINF_GRID;

#[derive(Parser)]
#[command(name = "sysid", version, about = "Finite-sample LTI system identification")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed, overriding `base_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    delta: Option<f64>,
    #[arg(long, global = true)]
    kappa: Option<f64>,
    #[arg(long = "delta-plus", global = true)]
    delta_plus: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the first (T, seed) cell and write its trajectory CSV.
    Simulate,
    /// Identify a model from a trajectory CSV, or from the first simulated cell.
    Identify {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Run every (T, seed) cell and write sweep.csv and sweep.gp.
    Sweep,
    /// Report Hankel singular values, norms and truncation errors of a model.
    Truth {
        /// Model JSON; defaults to the config's model.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_HINF_GRID)]
        grid: usize,
    },
    /// Distances between two model JSON files.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 200)]
        horizon: usize,
        #[arg(long, default_value_t = DEFAULT_HINF_GRID)]
        grid: usize,
    },
}

impl Global {
    fn overrides(&self) -> Overrides {
        Overrides {
            out: self.out.clone(),
            seed: self.seed,
            workers: self.workers,
            delta: self.delta,
            kappa: self.kappa,
            delta_plus: self.delta_plus,
        }
    }

    fn experiment(&self) -> Result<Experiment> {
        let Some(path) = &self.config else {
            bail!(ConfigError("--config is required for this command".into()));
        };
        Experiment::load(path, &self.overrides())
    }

    fn out_dir(&self, exp: Option<&Experiment>) -> PathBuf {
        self.out
            .clone()
            .or_else(|| exp.map(|e| e.config.output_dir.clone()))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Simulate => {
            let exp = g.experiment()?;
            let path = g.out_dir(Some(&exp)).join("trajectory.csv");
            std::fs::create_dir_all(path.parent().unwrap_or(Path::new(".")))?;
            let traj = run_simulate(&exp, &path)?;
            eprintln!("wrote {} samples to {}", traj.len(), path.display());
        }
        Command::Identify { data } => {
            let exp = g.experiment()?;
            let result = run_identify(&exp, data.as_deref())?;
            let path = g.out_dir(Some(&exp)).join("identify.json");
            write_json(&result, &path)?;
            eprintln!(
                "d_hat = {}, k = {}{}; wrote {}",
                result.d_hat,
                result.k,
                result
                    .status
                    .as_deref()
                    .map(|s| format!(" ({s})"))
                    .unwrap_or_default(),
                path.display()
            );
        }
        Command::Sweep => {
            let exp = g.experiment()?;
            let dir = g.out_dir(Some(&exp));
            let path = sweep::run_sweep(&exp, &dir, g.workers)?;
            eprintln!("wrote {}", path.display());
        }
        Command::Truth { model, grid } => {
            let (truth, out) = match model {
                Some(path) => (load_model(&path)?, g.out_dir(None)),
                None => {
                    let Some(cfg_path) = &g.config else {
                        bail!(ConfigError("truth needs --model or --config".into()));
                    };
                    let mut cfg = ExperimentConfig::load(cfg_path)?;
                    g.overrides().apply(&mut cfg)?;
                    let base = cfg_path.parent().unwrap_or(Path::new("."));
                    (cfg.model.build(base)?, cfg.output_dir)
                }
            };
            let report = truth_report(&truth, grid)?;
            write_json(&report, &out.join("truth.json"))?;
            print_json(&report)?;
        }
        Command::Compare {
            a,
            b,
            horizon,
            grid,
        } => print_json(&run_compare(&a, &b, horizon, grid)?)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
