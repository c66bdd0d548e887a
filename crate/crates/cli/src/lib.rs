//! Command implementations for the `wpreach` binary.

pub mod config;
pub mod criteria;

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use wpreach_core::forward_sim::{final_error, run_to_t, SimOptions};
use wpreach_core::hum::solve_hum;
use wpreach_core::ingham::{ingham_estimates, kernel_sum_bounds};
use wpreach_core::spectrum::{solve_spectrum, validate_hypotheses};
use wpreach_core::{BoundReport, ExponentialSum, FinalData, FinalError, HypothesisReport, InghamEstimate};

pub use config::ExperimentConfig;
pub use criteria::{verify_all, Report};

/// Caps the rayon pool at `LAB_THREADS` when that variable holds a positive integer.
pub fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("LAB_THREADS") {
        let n: usize = v.trim().parse().with_context(|| format!("LAB_THREADS = {v:?}"))?;
        if n > 0 {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
        }
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Writes `spectrum.csv` and `hypotheses.json`.
pub fn run_spectrum(cfg: &ExperimentConfig, modes: usize, out: &Path) -> Result<HypothesisReport> {
    create_dir(out)?;
    let bs = solve_spectrum(&cfg.params, modes)?;
    let mut w = csv::Writer::from_path(out.join("spectrum.csv"))?;
    w.write_record(["n", "r_n", "re_omega", "im_omega", "re_p", "im_p", "max_residual"])?;
    for b in &bs {
        w.serialize((b.n, b.r, b.omega.re, b.omega.im, b.p.re, b.p.im, b.max_residual()))?;
    }
    w.flush()?;
    let h = validate_hypotheses(&cfg.params, &bs);
    write_json(&out.join("hypotheses.json"), &h)?;
    Ok(h)
}

#[derive(Debug, Clone, Serialize)]
pub struct InghamSummary {
    pub hypotheses: HypothesisReport,
    pub estimate: InghamEstimate,
    pub kernel_sums: BoundReport,
}

/// Writes the per-draw ratios to `ratios.csv` and the constants to `summary.json`.
pub fn run_ingham(cfg: &ExperimentConfig, out: &Path) -> Result<InghamSummary> {
    create_dir(out)?;
    let p = &cfg.params;
    let bs = solve_spectrum(p, cfg.ingham_modes)?;
    let hypotheses = validate_hypotheses(p, &bs);
    let estimate = ingham_estimates(p, &bs, &hypotheses, p.horizon, cfg.draws, cfg.seed)?;
    let kernel_sums = kernel_sum_bounds(&bs, p.horizon, cfg.epsilon, hypotheses.gamma_hat)?;
    let mut w = csv::Writer::from_path(out.join("ratios.csv"))?;
    w.write_record(["draw", "inverse_ratio", "direct_ratio"])?;
    for r in &estimate.ratios {
        w.serialize((r.draw, r.inverse, r.direct))?;
    }
    w.flush()?;
    let summary = InghamSummary {
        hypotheses,
        estimate,
        kernel_sums,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Controls as closed-form exponential sums, the input of `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlsFile {
    pub modes: usize,
    pub horizon: f64,
    pub target: FinalData,
    pub g1: ExponentialSum,
    pub g2: ExponentialSum,
    pub g1_norm_sq: f64,
    pub g2_norm_sq: f64,
    pub gram_min_eigenvalue: f64,
    pub gram_max_eigenvalue: f64,
    pub solve_residual: f64,
}

/// Writes `controls.json` and the sampled controls to `controls.csv`.
pub fn run_hum(cfg: &ExperimentConfig, target: &FinalData, out: &Path) -> Result<ControlsFile> {
    create_dir(out)?;
    let p = &cfg.params;
    let bs = solve_spectrum(p, p.modes)?;
    let h = solve_hum(p, &bs, &target.truncated(p.modes))?;
    let file = ControlsFile {
        modes: p.modes,
        horizon: p.horizon,
        target: target.truncated(p.modes),
        g1_norm_sq: h.controls.g1_norm_sq,
        g2_norm_sq: h.controls.g2_norm_sq,
        g1: h.controls.g1,
        g2: h.controls.g2,
        gram_min_eigenvalue: h.system.min_eigenvalue,
        gram_max_eigenvalue: h.system.max_eigenvalue,
        solve_residual: h.solution.relative_residual,
    };
    write_json(&out.join("controls.json"), &file)?;
    let mut w = csv::Writer::from_path(out.join("controls.csv"))?;
    w.write_record(["t", "g1", "g2"])?;
    let samples = 2000;
    for i in 0..=samples {
        let t = p.horizon * i as f64 / samples as f64;
        w.serialize((t, file.g1.eval_re(t), file.g2.eval_re(t)))?;
    }
    w.flush()?;
    Ok(file)
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationSummary {
    pub dt: f64,
    pub steps: usize,
    pub sim_modes: usize,
    pub control_modes: usize,
    pub final_error: FinalError,
    pub memory_residual: f64,
    pub final_state: FinalData,
}

/// Writes modal energies to `energies.csv` and the final error to `final_error.json`.
pub fn run_simulate(
    cfg: &ExperimentConfig,
    controls: &ControlsFile,
    control_modes: usize,
    out: &Path,
) -> Result<SimulationSummary> {
    create_dir(out)?;
    let p = cfg.params.with_horizon(controls.horizon);
    let opts = SimOptions::new(cfg.dt(), cfg.sim_modes());
    let run = run_to_t(&p, &controls.g1, &controls.g2, None, &opts)?;
    let mut w = csv::Writer::from_path(out.join("energies.csv"))?;
    w.write_record(["t", "n", "wave_energy", "beam_energy"])?;
    for (k, &t) in run.times.iter().enumerate() {
        for (i, (e1, e2)) in run.energies(k).into_iter().enumerate() {
            w.serialize((t, i + 1, e1, e2))?;
        }
    }
    w.flush()?;
    let summary = SimulationSummary {
        dt: run.dt,
        steps: run.steps,
        sim_modes: opts.sim_modes,
        control_modes,
        final_error: final_error(&run.final_state, &controls.target, control_modes),
        memory_residual: run.memory_residual,
        final_state: run.final_state,
    };
    write_json(&out.join("final_error.json"), &summary)?;
    Ok(summary)
}

/// Writes `report.json` and `summary.txt`.
pub fn run_verify_all(cfg: &ExperimentConfig, out: &Path) -> Result<Report> {
    create_dir(out)?;
    let report = verify_all(cfg);
    write_json(&out.join("report.json"), &report)?;
    fs::write(out.join("summary.txt"), report.summary())?;
    Ok(report)
}
