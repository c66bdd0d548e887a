use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use wpreach_cli::{
    configure_threads, read_json, run_hum, run_ingham, run_simulate, run_spectrum, run_verify_all, ControlsFile,
    ExperimentConfig,
};
use wpreach_core::FinalData;

#[derive(Parser)]
#[command(name = "wpreach", about = "Spectral, Ingham and HUM experiments for the wave-Petrovsky system with memory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Roots of the characteristic quintic and hypothesis diagnostics.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 64)]
        modes: usize,
    },
    /// Monte-Carlo Ingham constants and kernel-sum bounds.
    Ingham {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "T")]
        horizon: Option<f64>,
        #[arg(long)]
        modes: Option<usize>,
        #[arg(long)]
        draws: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Directory for `ratios.csv` and `summary.json`.
        #[arg(long, default_value = "out")]
        report: PathBuf,
    },
    /// Controls steering zero to a target.
    Hum {
        #[command(flatten)]
        common: Common,
        /// JSON with arrays `alpha1`, `rho1`, `alpha2`, `rho2`.
        #[arg(long)]
        target_file: Option<PathBuf>,
        #[arg(long)]
        modes: Option<usize>,
        #[arg(long = "T")]
        horizon: Option<f64>,
    },
    /// Forward simulation under controls written by `hum`.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        controls_file: Option<PathBuf>,
        /// Controlled modes used for the final error; all modes of the controls file when absent.
        #[arg(long)]
        modes: Option<usize>,
        #[arg(long)]
        sim_modes: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Runs every acceptance criterion; exit status 0 iff all pass.
    VerifyAll {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn checked(mut cfg: ExperimentConfig, edit: impl FnOnce(&mut ExperimentConfig)) -> Result<ExperimentConfig> {
    edit(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool> {
    configure_threads()?;
    match cli.command {
        Command::Spectrum { common, modes } => {
            let cfg = ExperimentConfig::load_or_default(common.config.as_deref())?;
            let h = run_spectrum(&cfg, modes, &common.out)?;
            println!("{}", serde_json::to_string_pretty(&h)?);
        }
        Command::Ingham {
            config,
            horizon,
            modes,
            draws,
            seed,
            epsilon,
            report,
        } => {
            let cfg = checked(ExperimentConfig::load_or_default(config.as_deref())?, |c| {
                if let Some(t) = horizon {
                    c.params.horizon = t;
                }
                c.ingham_modes = modes.unwrap_or(c.ingham_modes);
                c.draws = draws.unwrap_or(c.draws);
                c.seed = seed.unwrap_or(c.seed);
                c.epsilon = epsilon.unwrap_or(c.epsilon);
            })?;
            let s = run_ingham(&cfg, &report)?;
            println!(
                "c1_hat = {:.6e}, c2_hat = {:.6e} (sharp {:.6e}, {:.6e}); kernel sums hold on tail: {}",
                s.estimate.c1_hat, s.estimate.c2_hat, s.estimate.c1_exact, s.estimate.c2_exact, s.kernel_sums.tail_holds
            );
        }
        Command::Hum {
            common,
            target_file,
            modes,
            horizon,
        } => {
            let base = ExperimentConfig::load_or_default(common.config.as_deref())?;
            let path = target_file.or(base.target_file.clone());
            let cfg = checked(base, |c| {
                c.params.modes = modes.unwrap_or(c.params.modes);
                c.params.horizon = horizon.unwrap_or(c.params.horizon);
            })?;
            let target: FinalData = match path {
                Some(p) => read_json(&p)?,
                None => wpreach_cli::criteria::mixed_target(cfg.params.modes),
            };
            let f = run_hum(&cfg, &target, &common.out)?;
            println!(
                "Gram eigenvalues [{:.4e}, {:.4e}], |g1|^2 = {:.6e}, |g2|^2 = {:.6e}",
                f.gram_min_eigenvalue, f.gram_max_eigenvalue, f.g1_norm_sq, f.g2_norm_sq
            );
        }
        Command::Simulate {
            common,
            controls_file,
            modes,
            sim_modes,
            dt,
        } => {
            let base = ExperimentConfig::load_or_default(common.config.as_deref())?;
            let path = controls_file
                .or(base.controls_file.clone())
                .ok_or_else(|| anyhow::anyhow!("simulate needs --controls-file"))?;
            let controls: ControlsFile = read_json(&path)?;
            let cfg = checked(base, |c| {
                c.params.horizon = controls.horizon;
                c.sim_modes = Some(sim_modes.or(c.sim_modes).unwrap_or(controls.modes));
                c.dt = dt.or(c.dt);
            })?;
            let s = run_simulate(&cfg, &controls, modes.unwrap_or(controls.modes), &common.out)?;
            println!(
                "final relative error {:.3e} (combined {:.3e}), spillover {:.3e}",
                s.final_error.max_relative(),
                s.final_error.combined,
                s.final_error.spillover
            );
        }
        Command::VerifyAll { common, seed } => {
            let cfg = checked(ExperimentConfig::load_or_default(common.config.as_deref())?, |c| {
                c.seed = seed.unwrap_or(c.seed);
            })?;
            let report = run_verify_all(&cfg, &common.out)?;
            print!("{}", report.summary());
            return Ok(report.passed);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
