//! Spectral-Galerkin forward simulation of the controlled system
//!
//! ```text
//! u1tt - u1xx + beta int_0^t e^{-eta(t-s)} u1xx(s) ds + a u2 = 0
//! u2tt + u2xxxx + b u1 = 0
//! u1(t, 0) = 0, u1(t, pi) = g1(t), u2 = u2xx = 0 at x = 0, u2(t, pi) = 0, u2xx(t, pi) = g2(t)
//! ```
//!
//! The boundary data are lifted with `l1 = (x / pi) g1` and `l2 = (x^3 - pi^2 x) / (6 pi) g2`,
//! the memory is carried by `m' = -eta m + a`, and every sine mode is advanced by RK4. Modes do
//! not interact, so the truncation is exact on the modes it keeps.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::expsum::ExponentialSum;
use crate::modal::FinalData;
use crate::ode::Rk4;
use crate::params::{lambda, ModelParams};

/// Sine coefficient of `x / pi`: `2 (-1)^{n+1} / (n pi)`.
pub fn lift_first_coefficient(n: usize) -> f64 {
    let sign = if n % 2 == 0 { -1.0 } else { 1.0 };
    2.0 * sign / (n as f64 * std::f64::consts::PI)
}

/// Sine coefficient of `(x^3 - pi^2 x) / (6 pi)`: `2 (-1)^n / (pi n^3)`.
pub fn lift_second_coefficient(n: usize) -> f64 {
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    2.0 * sign / (std::f64::consts::PI * (n as f64).powi(3))
}

/// Controls with the derivatives the lifted source terms need.
#[derive(Debug, Clone)]
pub struct Lifting {
    pub g1: ExponentialSum,
    pub g2: ExponentialSum,
    g1d: ExponentialSum,
    g1dd: ExponentialSum,
    g2d: ExponentialSum,
    g2dd: ExponentialSum,
}

pub fn lift_controls(g1: &ExponentialSum, g2: &ExponentialSum) -> Lifting {
    Lifting {
        g1: g1.clone(),
        g2: g2.clone(),
        g1d: g1.derivative(),
        g1dd: g1.nth_derivative(2),
        g2d: g2.derivative(),
        g2dd: g2.nth_derivative(2),
    }
}

impl Lifting {
    /// `[g1, g1'', g2, g2'']` at `t`.
    pub fn forcing(&self, t: f64) -> [f64; 4] {
        [
            self.g1.eval_re(t),
            self.g1dd.eval_re(t),
            self.g2.eval_re(t),
            self.g2dd.eval_re(t),
        ]
    }

    /// Lifting contribution `[l1, l1t, l2, l2t]` to mode `n` at `t`.
    pub fn mode_offset(&self, n: usize, t: f64) -> [f64; 4] {
        let (s, q) = (lift_first_coefficient(n), lift_second_coefficient(n));
        [
            s * self.g1.eval_re(t),
            s * self.g1d.eval_re(t),
            q * self.g2.eval_re(t),
            q * self.g2d.eval_re(t),
        ]
    }
}

/// `y = (a, a', m, b, b')` of the homogeneous part of mode `n`.
fn mode_rhs(params: &ModelParams, n: usize, f: [f64; 4], y: &[f64], dy: &mut [f64]) {
    let l = lambda(n);
    let (s, q) = (lift_first_coefficient(n), lift_second_coefficient(n));
    let [g1, g1dd, g2, g2dd] = f;
    dy[0] = y[1];
    dy[1] = -l * y[0] + l * params.beta * y[2] - params.a * y[3] - s * g1dd - params.a * q * g2;
    dy[2] = -params.eta * y[2] + y[0];
    dy[3] = y[4];
    dy[4] = -l * l * y[3] - params.b * y[0] - q * g2dd - params.b * s * g1;
}

/// Homogeneous-part state of every simulated mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimState {
    pub t: f64,
    pub modes: Vec<[f64; 5]>,
}

impl SimState {
    /// Zero `u` at `t = 0`, which puts the negated lifting into the homogeneous part.
    pub fn initial(lifting: &Lifting, modes: usize, data: Option<&FinalData>) -> Self {
        let modes = (1..=modes)
            .map(|n| {
                let u = data.map(|d| d.mode(n)).unwrap_or([0.0; 4]);
                let off = lifting.mode_offset(n, 0.0);
                [u[0] - off[0], u[1] - off[1], 0.0, u[2] - off[2], u[3] - off[3]]
            })
            .collect();
        SimState { t: 0.0, modes }
    }

    /// `[u1, u1t, u2, u2t]` of mode `n`.
    pub fn physical(&self, lifting: &Lifting, n: usize) -> [f64; 4] {
        let y = &self.modes[n - 1];
        let off = lifting.mode_offset(n, self.t);
        [y[0] + off[0], y[1] + off[1], y[3] + off[2], y[4] + off[3]]
    }
}

fn check_finite(y: &[f64], step: usize, time: f64) -> Result<()> {
    if y.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(LabError::Divergence { step, time })
    }
}

/// One RK4 step of every mode.
pub fn step(params: &ModelParams, lifting: &Lifting, state: &SimState, dt: f64) -> Result<SimState> {
    if !(dt > 0.0) {
        return Err(LabError::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let mut rk = Rk4::new(5);
    let mut modes = state.modes.clone();
    for (i, y) in modes.iter_mut().enumerate() {
        let f = |t: f64, y: &[f64], dy: &mut [f64]| mode_rhs(params, i + 1, lifting.forcing(t), y, dy);
        rk.step(&f, state.t, y, dt);
        check_finite(y, 1, state.t + dt)?;
    }
    Ok(SimState {
        t: state.t + dt,
        modes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimOptions {
    pub dt: f64,
    pub sim_modes: usize,
    /// Store every `record_every`-th step.
    pub record_every: usize,
}

impl SimOptions {
    pub fn new(dt: f64, sim_modes: usize) -> Self {
        SimOptions {
            dt,
            sim_modes,
            record_every: 100,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimRun {
    pub horizon: f64,
    pub dt: f64,
    pub steps: usize,
    /// Recorded times.
    pub times: Vec<f64>,
    /// `[u1, u1t, u2, u2t]` per recorded time and mode.
    pub records: Vec<Vec<[f64; 4]>>,
    /// Memory variable `m_n` per recorded time and mode.
    pub memory: Vec<Vec<f64>>,
    pub final_state: FinalData,
    /// Largest `|m' + eta m - a|` by centred differences, relative to `max |a|`.
    pub memory_residual: f64,
}

impl SimRun {
    /// `(u1t^2 + lambda u1^2, u2t^2 + lambda^2 u2^2)` per mode at record `k`.
    pub fn energies(&self, k: usize) -> Vec<(f64, f64)> {
        self.records[k]
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let l = lambda(i + 1);
                (u[1] * u[1] + l * u[0] * u[0], u[3] * u[3] + l * l * u[2] * u[2])
            })
            .collect()
    }
}

/// Integrates `[0, T]` from `initial` (zero when absent) under the controls.
pub fn run_to_t(
    params: &ModelParams,
    g1: &ExponentialSum,
    g2: &ExponentialSum,
    initial: Option<&FinalData>,
    opts: &SimOptions,
) -> Result<SimRun> {
    params.validate()?;
    if !(opts.dt > 0.0) || opts.sim_modes == 0 || opts.record_every == 0 {
        return Err(LabError::InvalidParameter(
            "dt, sim_modes and record_every must be positive".into(),
        ));
    }
    let horizon = params.horizon;
    let steps = (horizon / opts.dt).round().max(1.0) as usize;
    let dt = horizon / steps as f64;
    let lifting = lift_controls(g1, g2);
    // forcing on the half-step grid shared by all modes
    let table: Vec<[f64; 4]> = (0..=2 * steps)
        .into_par_iter()
        .map(|j| lifting.forcing(0.5 * dt * j as f64))
        .collect();
    let init = SimState::initial(&lifting, opts.sim_modes, initial);
    let lookup = |t: f64| table[(2.0 * t / dt).round() as usize];

    let per_mode: Vec<(Vec<[f64; 5]>, f64)> = init
        .modes
        .par_iter()
        .enumerate()
        .map(|(i, y0)| -> Result<(Vec<[f64; 5]>, f64)> {
            let n = i + 1;
            let f = |t: f64, y: &[f64], dy: &mut [f64]| mode_rhs(params, n, lookup(t), y, dy);
            let mut rk = Rk4::new(5);
            let mut y = *y0;
            let mut rec = vec![y];
            let (mut prev, mut cur) = (y, y);
            let (mut worst, mut amax) = (0.0f64, y[0].abs());
            for k in 0..steps {
                rk.step(&f, k as f64 * dt, &mut y, dt);
                check_finite(&y, k + 1, (k + 1) as f64 * dt)?;
                if k >= 1 {
                    let dm = (y[2] - prev[2]) / (2.0 * dt);
                    worst = worst.max((dm + params.eta * cur[2] - cur[0]).abs());
                }
                prev = cur;
                cur = y;
                amax = amax.max(y[0].abs());
                if (k + 1) % opts.record_every == 0 || k + 1 == steps {
                    rec.push(y);
                }
            }
            Ok((rec, if amax > 0.0 { worst / amax } else { 0.0 }))
        })
        .collect::<Result<_>>()?;

    let mut times: Vec<f64> = (0..=steps)
        .step_by(opts.record_every)
        .map(|k| k as f64 * dt)
        .collect();
    if steps % opts.record_every != 0 {
        times.push(horizon);
    }
    let records: Vec<Vec<[f64; 4]>> = times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let state = SimState {
                t,
                modes: per_mode.iter().map(|(r, _)| r[k]).collect(),
            };
            (1..=opts.sim_modes).map(|n| state.physical(&lifting, n)).collect()
        })
        .collect();
    let memory = (0..times.len())
        .map(|k| per_mode.iter().map(|(r, _)| r[k][2]).collect())
        .collect();
    let mut final_state = FinalData::zeros(opts.sim_modes);
    for (i, u) in records.last().expect("at least two records").iter().enumerate() {
        final_state.set_mode(i + 1, *u);
    }
    Ok(SimRun {
        horizon,
        dt,
        steps,
        times,
        records,
        memory,
        final_state,
        memory_residual: per_mode.iter().map(|(_, r)| *r).fold(0.0, f64::max),
    })
}

/// Final-state errors in `L^2 x H^{-1} x H^1_0 x H^{-1}`, the space of reachable targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FinalError {
    /// Per component, relative to the target component (or to the whole target when that
    /// component vanishes).
    pub relative: [f64; 4],
    pub combined: f64,
    /// Norm of the simulated modes above the controlled range, relative to the target.
    pub spillover: f64,
}

impl FinalError {
    pub fn max_relative(&self) -> f64 {
        self.relative.iter().copied().fold(self.combined, f64::max)
    }
}

fn target_weights(n: usize) -> [f64; 4] {
    let n2 = (n * n) as f64;
    [1.0, 1.0 / n2, n2, 1.0 / n2]
}

pub fn final_error(state: &FinalData, target: &FinalData, control_modes: usize) -> FinalError {
    let mut err = [0.0; 4];
    let mut tgt = [0.0; 4];
    for n in 1..=control_modes {
        let (s, t, w) = (state.mode(n), target.mode(n), target_weights(n));
        for k in 0..4 {
            err[k] += w[k] * (s[k] - t[k]).powi(2);
            tgt[k] += w[k] * t[k] * t[k];
        }
    }
    let total_t: f64 = tgt.iter().sum();
    let total_e: f64 = err.iter().sum();
    let mut spill = 0.0;
    for n in control_modes + 1..=state.modes() {
        let (s, w) = (state.mode(n), target_weights(n));
        spill += (0..4).map(|k| w[k] * s[k] * s[k]).sum::<f64>();
    }
    let rel = |e: f64, t: f64| {
        if t > 0.0 {
            (e / t).sqrt()
        } else if total_t > 0.0 {
            (e / total_t).sqrt()
        } else {
            e.sqrt()
        }
    };
    FinalError {
        relative: [
            rel(err[0], tgt[0]),
            rel(err[1], tgt[1]),
            rel(err[2], tgt[2]),
            rel(err[3], tgt[3]),
        ],
        combined: rel(total_e, total_t),
        spillover: rel(spill, total_t),
    }
}
