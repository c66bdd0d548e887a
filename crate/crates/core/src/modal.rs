//! Modal synthesis: Cauchy data, the Vandermonde solve for the five coefficients of each
//! mode, exact exponential-sum solutions, and the `d_n` / `calD` objects of the abstract
//! representation.
//!
//! Mode `n` of `(u1, u2)` is `(f1(t), f2(t)) sin(n x)` with
//!
//! ```text
//! f1'' + lambda f1 - lambda beta int_0^t e^{-eta(t-s)} f1(s) ds + a f2 = 0
//! f2'' + lambda^2 f2 + b f1 = 0
//! ```
//!
//! and `f1 = sum_k C_k e^{Lambda_k t}`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::expsum::ExponentialSum;
use crate::ode::Rk4;
use crate::params::{lambda, ModelParams};
use crate::spectrum::{quintic_coeffs, SpectralBranch};

/// Sine coefficients `(u10, u11, u20, u21)` of a state, one entry per mode starting at `n = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinalData {
    pub alpha1: Vec<f64>,
    pub rho1: Vec<f64>,
    pub alpha2: Vec<f64>,
    pub rho2: Vec<f64>,
}

impl FinalData {
    pub fn zeros(modes: usize) -> Self {
        FinalData {
            alpha1: vec![0.0; modes],
            rho1: vec![0.0; modes],
            alpha2: vec![0.0; modes],
            rho2: vec![0.0; modes],
        }
    }

    /// Independent standard normal coefficients.
    pub fn random(modes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || -> Vec<f64> { (0..modes).map(|_| StandardNormal.sample(&mut rng)).collect() };
        FinalData {
            alpha1: draw(),
            rho1: draw(),
            alpha2: draw(),
            rho2: draw(),
        }
    }

    pub fn modes(&self) -> usize {
        self.alpha1.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.alpha1.len();
        if self.rho1.len() != n || self.alpha2.len() != n || self.rho2.len() != n {
            return Err(LabError::InvalidInput(
                "the four coefficient arrays must have equal length".into(),
            ));
        }
        let all = [&self.alpha1, &self.rho1, &self.alpha2, &self.rho2];
        if !all.iter().all(|v| v.iter().all(|x| x.is_finite())) {
            return Err(LabError::InvalidInput("coefficients must be finite".into()));
        }
        Ok(())
    }

    /// `[alpha1, rho1, alpha2, rho2]` of mode `n`, zero past the stored range.
    pub fn mode(&self, n: usize) -> [f64; 4] {
        let get = |v: &Vec<f64>| v.get(n - 1).copied().unwrap_or(0.0);
        [
            get(&self.alpha1),
            get(&self.rho1),
            get(&self.alpha2),
            get(&self.rho2),
        ]
    }

    pub fn set_mode(&mut self, n: usize, v: [f64; 4]) {
        self.alpha1[n - 1] = v[0];
        self.rho1[n - 1] = v[1];
        self.alpha2[n - 1] = v[2];
        self.rho2[n - 1] = v[3];
    }

    /// Restriction to the first `modes` modes, zero padded.
    pub fn truncated(&self, modes: usize) -> Self {
        let mut out = FinalData::zeros(modes);
        for n in 1..=modes {
            out.set_mode(n, self.mode(n));
        }
        out
    }
}

/// `(f, f', f'', f''', f'''')(0)` of the first component from the data of one mode.
pub fn cauchy_init_vector(params: &ModelParams, n: usize, data: [f64; 4]) -> [f64; 5] {
    let l = lambda(n);
    let (beta, eta, a, b) = (params.beta, params.eta, params.a, params.b);
    let [a1, r1, a2, r2] = data;
    [
        a1,
        r1,
        -l * a1 - a * a2,
        -a * r2 - l * r1 + l * beta * a1,
        (l * l + l) * (l * a1 + a * a2) + l * beta * r1 - l * eta * beta * a1 - (l * l * l - a * b) * a1,
    ]
}

fn check_nodes(x: &[Complex64; 5]) -> Result<f64> {
    let s = x.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if s == 0.0 || !s.is_finite() {
        return Err(LabError::Conditioning {
            what: "vandermonde".into(),
            detail: "degenerate nodes".into(),
        });
    }
    for i in 0..5 {
        for j in 0..i {
            if (x[i] - x[j]).norm() < 1e-13 * s {
                return Err(LabError::Conditioning {
                    what: "vandermonde".into(),
                    detail: format!("nodes {i} and {j} coincide to 1e-13"),
                });
            }
        }
    }
    Ok(s)
}

/// Solves `sum_i C_i x_i^k = y_k`, `k = 0..4`, by Gaussian elimination with partial pivoting
/// after scaling the nodes to unit maximum modulus.
pub fn solve_vandermonde_gauss(x: &[Complex64; 5], y: &[Complex64; 5]) -> Result<[Complex64; 5]> {
    let s = check_nodes(x)?;
    let mut m = [[Complex64::new(0.0, 0.0); 5]; 5];
    let mut b = [Complex64::new(0.0, 0.0); 5];
    for k in 0..5 {
        for i in 0..5 {
            m[k][i] = (x[i] / s).powu(k as u32);
        }
        b[k] = y[k] / s.powi(k as i32);
    }
    let scale = m.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max);
    for col in 0..5 {
        let piv = (col..5)
            .max_by(|&p, &q| m[p][col].norm().total_cmp(&m[q][col].norm()))
            .unwrap_or(col);
        if m[piv][col].norm() <= 1e-14 * scale {
            return Err(LabError::Conditioning {
                what: "vandermonde".into(),
                detail: format!("pivot {:.3e} at column {col}", m[piv][col].norm()),
            });
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..5 {
            let f = m[row][col] / m[col][col];
            for k in col..5 {
                let v = m[col][k];
                m[row][k] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut c = [Complex64::new(0.0, 0.0); 5];
    for row in (0..5).rev() {
        let mut acc = b[row];
        for k in row + 1..5 {
            acc -= m[row][k] * c[k];
        }
        c[row] = acc / m[row][row];
    }
    Ok(c)
}

/// Bjorck-Pereyra algorithm for the same system.
pub fn solve_vandermonde_bp(x: &[Complex64; 5], y: &[Complex64; 5]) -> Result<[Complex64; 5]> {
    check_nodes(x)?;
    let n = 4;
    let mut b = *y;
    for k in 0..n {
        for i in (k + 1..=n).rev() {
            b[i] = b[i] - x[k] * b[i - 1];
        }
    }
    for k in (0..n).rev() {
        for i in k + 1..=n {
            b[i] /= x[i] - x[i - k - 1];
        }
        for i in k..n {
            b[i] = b[i] - b[i + 1];
        }
    }
    Ok(b)
}

/// Coefficients `C_1..C_5` of mode `branch.n` from its Cauchy vector, with the conjugate
/// structure (`C_1` real, `C_3 = conj C_2`, `C_5 = conj C_4`) enforced.
pub fn solve_vandermonde(branch: &SpectralBranch, init: &[f64; 5]) -> Result<[Complex64; 5]> {
    let x = branch.roots();
    let y = init.map(|v| Complex64::new(v, 0.0));
    let c = solve_vandermonde_bp(&x, &y).map_err(|e| e.at_mode(branch.n))?;
    let c2 = 0.5 * (c[1] + c[2].conj());
    let c4 = 0.5 * (c[3] + c[4].conj());
    Ok([Complex64::new(c[0].re, 0.0), c2, c2.conj(), c4, c4.conj()])
}

/// `d_n = (p_n^2 - Re p_n + beta Re p_n / (eta + i p_n)) / a`, the beam amplitude factor of
/// the abstract second component.
pub fn compute_dn(params: &ModelParams, branch: &SpectralBranch) -> Result<Complex64> {
    if params.a == 0.0 {
        return Err(LabError::InvalidParameter("d_n needs a != 0".into()));
    }
    let p = branch.p;
    let rp = p.re;
    let i = Complex64::new(0.0, 1.0);
    Ok((p * p - rp + params.beta * rp / (params.eta + i * p)) / params.a)
}

/// `calD_n` for a single mode with beam coefficient `d`.
pub fn cal_d_term(params: &ModelParams, branch: &SpectralBranch, d: Complex64) -> f64 {
    let i = Complex64::new(0.0, 1.0);
    let q = d / (params.eta + i * branch.p);
    -(params.beta / params.a) * branch.p.re * 2.0 * q.re
}

/// `calD = -(beta / a) sum_n Re p_n (D_n / (eta + i p_n) + conj)`, real by construction.
pub fn compute_cal_d(params: &ModelParams, branches: &[SpectralBranch], d: &[Complex64]) -> Result<f64> {
    if params.a == 0.0 {
        return Err(LabError::InvalidParameter("calD needs a != 0".into()));
    }
    if d.len() != branches.len() {
        return Err(LabError::InvalidInput("one D_n per branch is required".into()));
    }
    Ok(branches
        .iter()
        .zip(d)
        .map(|(b, &dn)| cal_d_term(params, b, dn))
        .sum())
}

/// Constants `C` in `calD^2 <= C sum |D_n|^2 |p_n|^4`, with
/// `S = sum 1 / ((eta - Im p_n)^2 + (Re p_n)^2)` and `a0 = min |p_n|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalDBound {
    pub a0: f64,
    pub sum: f64,
    /// `4 (beta / a)^2 S / a0^2`, what the Cauchy-Schwarz step and `|p_n| >= a0` give.
    pub derived: f64,
    /// `4 a0^2 (beta / a) S` as printed alongside the estimate.
    pub printed: f64,
}

pub fn cal_d_bound_constant(params: &ModelParams, branches: &[SpectralBranch]) -> Result<CalDBound> {
    if params.a == 0.0 {
        return Err(LabError::InvalidParameter("calD needs a != 0".into()));
    }
    let a0 = branches.iter().map(|b| b.p.norm()).fold(f64::INFINITY, f64::min);
    let sum: f64 = branches
        .iter()
        .map(|b| 1.0 / ((params.eta - b.p.im).powi(2) + b.p.re * b.p.re))
        .sum();
    let k = params.beta / params.a;
    Ok(CalDBound {
        a0,
        sum,
        derived: 4.0 * k * k * sum / (a0 * a0),
        printed: 4.0 * a0 * a0 * k.abs() * sum,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeCoefficients {
    pub n: usize,
    /// `C_1..C_5`; `R_n = C_1`, `C_n = C_2`, `D_n = C_4` in the abstract notation.
    pub c: [Complex64; 5],
    pub d_n: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModalCoefficients {
    pub modes: Vec<ModeCoefficients>,
    pub cal_d: f64,
}

pub fn modal_coefficients(
    params: &ModelParams,
    branches: &[SpectralBranch],
    data: &FinalData,
) -> Result<ModalCoefficients> {
    data.validate()?;
    let mut modes = Vec::with_capacity(branches.len());
    for b in branches {
        let init = cauchy_init_vector(params, b.n, data.mode(b.n));
        let c = solve_vandermonde(b, &init)?;
        let d_n = compute_dn(params, b).map_err(|e| e.at_mode(b.n))?;
        modes.push(ModeCoefficients { n: b.n, c, d_n });
    }
    let ds: Vec<Complex64> = modes.iter().map(|m| m.c[3]).collect();
    let cal_d = compute_cal_d(params, branches, &ds)?;
    Ok(ModalCoefficients { modes, cal_d })
}

/// Exact time functions of one mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSolution {
    pub n: usize,
    pub f1: ExponentialSum,
    pub f2: ExponentialSum,
}

fn first_component(branch: &SpectralBranch, c: &[Complex64; 5]) -> ExponentialSum {
    let mut f1 = ExponentialSum::new();
    for (ck, lk) in c.iter().zip(branch.roots()) {
        f1.push(*ck, lk);
    }
    f1
}

/// `f2 = -(f1'' + lambda f1 - lambda beta (e^{-eta .} * f1)) / a`.
pub fn second_from_first(params: &ModelParams, lambda: f64, f1: &ExponentialSum) -> Result<ExponentialSum> {
    if params.a == 0.0 {
        return Err(LabError::InvalidParameter(
            "the second component is recovered from the first only when a != 0".into(),
        ));
    }
    let mut acc = f1.nth_derivative(2);
    acc.extend(&f1.scale_re(lambda));
    if params.beta != 0.0 {
        acc.extend(&f1.conv_exp(params.eta)?.scale_re(-lambda * params.beta));
    }
    Ok(acc.scale_re(-1.0 / params.a).merged())
}

/// Second component from the beam equation, `g_k = -b C_k / (Lambda_k^2 + lambda^2)`.
pub fn second_from_beam_equation(params: &ModelParams, branch: &SpectralBranch, c: &[Complex64; 5]) -> ExponentialSum {
    let mut f2 = ExponentialSum::new();
    for (k, (ck, lk)) in c.iter().zip(branch.roots()).enumerate() {
        f2.push(-params.b * ck / branch.beam_factor(k), lk);
    }
    f2
}

/// The beam-branch second component: the first-equation recovery applied to the `C_4, C_5`
/// terms alone.
pub fn beam_branch_second(params: &ModelParams, branch: &SpectralBranch, c: &[Complex64; 5]) -> Result<ExponentialSum> {
    let mut d_part = [Complex64::new(0.0, 0.0); 5];
    d_part[3] = c[3];
    d_part[4] = c[4];
    second_from_first(params, branch.lambda, &first_component(branch, &d_part))
}

/// Mode solution from its five coefficients.
pub fn mode_solution(params: &ModelParams, branch: &SpectralBranch, c: &[Complex64; 5]) -> Result<ModeSolution> {
    let f1 = first_component(branch, c);
    let f2 = second_from_first(params, branch.lambda, &f1).map_err(|e| e.at_mode(branch.n))?;
    Ok(ModeSolution { n: branch.n, f1, f2 })
}

/// Mode solution from the data `[alpha1, rho1, alpha2, rho2]` at `t = 0`.
pub fn mode_solution_from_data(params: &ModelParams, branch: &SpectralBranch, data: [f64; 4]) -> Result<ModeSolution> {
    let init = cauchy_init_vector(params, branch.n, data);
    let c = solve_vandermonde(branch, &init)?;
    mode_solution(params, branch, &c)
}

pub fn synthesize_solutions(
    params: &ModelParams,
    branches: &[SpectralBranch],
    coeffs: &ModalCoefficients,
) -> Result<Vec<ModeSolution>> {
    branches
        .iter()
        .zip(&coeffs.modes)
        .map(|(b, m)| mode_solution(params, b, &m.c))
        .collect()
}

/// `[alpha1, rho1, alpha2, rho2]` recovered from a mode solution at time `t`.
pub fn state_at(sol: &ModeSolution, t: f64) -> [f64; 4] {
    [
        sol.f1.eval_re(t),
        sol.f1.derivative().eval_re(t),
        sol.f2.eval_re(t),
        sol.f2.derivative().eval_re(t),
    ]
}

/// Largest relative residual of both modal equations on `samples + 1` points of `[0, horizon]`.
pub fn modal_residual(params: &ModelParams, sol: &ModeSolution, horizon: f64, samples: usize) -> Result<f64> {
    let l = lambda(sol.n);
    let f1pp = sol.f1.nth_derivative(2);
    let f2pp = sol.f2.nth_derivative(2);
    let mem = sol.f1.conv_exp(params.eta)?;
    let mut worst: f64 = 0.0;
    for k in 0..=samples {
        let t = horizon * k as f64 / samples as f64;
        let (a, b, c, d) = (
            f1pp.eval_re(t),
            l * sol.f1.eval_re(t),
            l * params.beta * mem.eval_re(t),
            params.a * sol.f2.eval_re(t),
        );
        let scale1 = a.abs() + b.abs() + c.abs() + d.abs();
        let e = f2pp.eval_re(t);
        let g = l * l * sol.f2.eval_re(t);
        let h = params.b * sol.f1.eval_re(t);
        let scale2 = e.abs() + g.abs() + h.abs();
        if scale1 > 0.0 {
            worst = worst.max((a + b - c + d).abs() / scale1);
        }
        if scale2 > 0.0 {
            worst = worst.max((e + g + h).abs() / scale2);
        }
    }
    Ok(worst)
}

/// Per-mode ratios of the coefficient asymptotics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoefficientRatios {
    pub n: usize,
    /// `lambda |C_2|^2 / (alpha1^2 lambda + rho1^2)`, tends to `1/4`.
    pub wave: Option<f64>,
    /// `sqrt(lambda) |C_1| / |C_2|`, bounded.
    pub real_over_wave: Option<f64>,
    /// `lambda^5 |C_4|^2 / (alpha2^2 lambda + rho2^2 / lambda)`, tends to `a^2 / 4`.
    pub beam: Option<f64>,
}

pub fn coefficient_estimates(coeffs: &ModalCoefficients, data: &FinalData) -> Vec<CoefficientRatios> {
    coeffs
        .modes
        .iter()
        .map(|m| {
            let l = lambda(m.n);
            let [a1, r1, a2, r2] = data.mode(m.n);
            let wave_den = a1 * a1 * l + r1 * r1;
            let beam_den = a2 * a2 * l + r2 * r2 / l;
            let c2 = m.c[1].norm();
            CoefficientRatios {
                n: m.n,
                wave: (wave_den > 0.0).then(|| l * c2 * c2 / wave_den),
                real_over_wave: (c2 > 0.0).then(|| l.sqrt() * m.c[0].norm() / c2),
                beam: (beam_den > 0.0).then(|| l.powi(5) * m.c[3].norm_sqr() / beam_den),
            }
        })
        .collect()
}

/// Integrates the coupled mode system and the fifth-order scalar equation for `f1` side by
/// side with RK4 and returns `sup |f1_coupled - f1_scalar| / sup |f1_coupled|` on `[0, t_end]`.
pub fn fifth_order_equivalence(params: &ModelParams, n: usize, data: [f64; 4], t_end: f64, steps: usize) -> f64 {
    let l = lambda(n);
    let q = quintic_coeffs(params, n);
    let (beta, eta, a, b) = (params.beta, params.eta, params.a, params.b);
    // coupled state: f, f', m, g, g'
    let coupled = move |_t: f64, y: &[f64], dy: &mut [f64]| {
        dy[0] = y[1];
        dy[1] = -l * y[0] + l * beta * y[2] - a * y[3];
        dy[2] = y[0] - eta * y[2];
        dy[3] = y[4];
        dy[4] = -l * l * y[3] - b * y[0];
    };
    let scalar = move |_t: f64, y: &[f64], dy: &mut [f64]| {
        dy[..4].copy_from_slice(&y[1..5]);
        dy[4] = -(0..5).map(|k| q.coeffs[k] * y[k]).sum::<f64>();
    };
    let mut yc = [data[0], data[1], 0.0, data[2], data[3]];
    let mut ys = cauchy_init_vector(params, n, data);
    let (mut rc, mut rs) = (Rk4::new(5), Rk4::new(5));
    let dt = t_end / steps as f64;
    let (mut diff, mut size): (f64, f64) = (0.0, yc[0].abs());
    for k in 0..steps {
        let t = k as f64 * dt;
        rc.step(&coupled, t, &mut yc, dt);
        rs.step(&scalar, t, &mut ys, dt);
        diff = diff.max((yc[0] - ys[0]).abs());
        size = size.max(yc[0].abs());
    }
    if size == 0.0 {
        diff
    } else {
        diff / size
    }
}

/// Per-mode record of a solution snapshot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeRecord {
    pub n: usize,
    pub roots: [Complex64; 5],
    pub coefficients: [Complex64; 5],
    pub d_n: Complex64,
}

/// Coefficients plus `u1`, `u2` sampled on a `(t, x)` grid, for plotting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionSnapshot {
    pub modes: Vec<ModeRecord>,
    pub cal_d: f64,
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    /// `u1[i][j] = u1(t_i, x_j)`.
    pub u1: Vec<Vec<f64>>,
    pub u2: Vec<Vec<f64>>,
}

pub fn snapshot(
    branches: &[SpectralBranch],
    coeffs: &ModalCoefficients,
    sols: &[ModeSolution],
    horizon: f64,
    t_samples: usize,
    x_samples: usize,
) -> SolutionSnapshot {
    let t: Vec<f64> = (0..=t_samples).map(|i| horizon * i as f64 / t_samples as f64).collect();
    let x: Vec<f64> = (0..=x_samples)
        .map(|j| std::f64::consts::PI * j as f64 / x_samples as f64)
        .collect();
    let field = |pick: fn(&ModeSolution) -> &ExponentialSum| -> Vec<Vec<f64>> {
        t.iter()
            .map(|&ti| {
                let amps: Vec<(f64, f64)> = sols
                    .iter()
                    .map(|s| (s.n as f64, pick(s).eval_re(ti)))
                    .collect();
                x.iter()
                    .map(|&xj| amps.iter().map(|(n, a)| a * (n * xj).sin()).sum())
                    .collect()
            })
            .collect()
    };
    SolutionSnapshot {
        modes: branches
            .iter()
            .zip(&coeffs.modes)
            .map(|(b, m)| ModeRecord {
                n: b.n,
                roots: b.roots(),
                coefficients: m.c,
                d_n: m.d_n,
            })
            .collect(),
        cal_d: coeffs.cal_d,
        u1: field(|s| &s.f1),
        u2: field(|s| &s.f2),
        t,
        x,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{solve_branch, solve_spectrum};

    #[test]
    fn decoupled_dn_example() {
        // p = 1, eta = 1, beta = 0.5, a = 0.1: d = (1 - 1 + 0.5 / (1 + i)) / 0.1 = 2.5 - 2.5 i
        let params = ModelParams::new(0.5, 1.0, 0.1, 0.0, 1, 7.0).unwrap();
        let mut b = solve_branch(&params, 1).unwrap();
        b.p = Complex64::new(1.0, 0.0);
        let d = compute_dn(&params, &b).unwrap();
        assert!((d - Complex64::new(2.5, -2.5)).norm() < 1e-14);
        let cal = compute_cal_d(&params, &[b], &[Complex64::new(1.0, 0.0)]).unwrap();
        assert!((cal + 5.0).abs() < 1e-14);
        let no_a = ModelParams { a: 0.0, ..params };
        assert!(compute_dn(&no_a, &b).is_err());
    }

    #[test]
    fn vandermonde_solvers_agree_with_each_other() {
        let params = ModelParams::default();
        for n in [1, 5, 17, 64] {
            let b = solve_branch(&params, n).unwrap();
            let init = cauchy_init_vector(&params, n, [0.7, -1.1, 0.4, 2.0]);
            let y = init.map(|v| Complex64::new(v, 0.0));
            let g = solve_vandermonde_gauss(&b.roots(), &y).unwrap();
            let p = solve_vandermonde_bp(&b.roots(), &y).unwrap();
            for k in 0..5 {
                let scale = g[k].norm().max(1e-300);
                assert!((g[k] - p[k]).norm() <= 1e-8 * scale, "n={n} k={k} {} {}", g[k], p[k]);
            }
        }
    }

    #[test]
    fn vandermonde_rejects_coincident_nodes() {
        let z = Complex64::new(1.0, 2.0);
        let x = [Complex64::new(0.5, 0.0), z, z, z.conj(), Complex64::new(3.0, 0.0)];
        let y = [Complex64::new(1.0, 0.0); 5];
        assert!(matches!(solve_vandermonde_bp(&x, &y), Err(LabError::Conditioning { .. })));
    }

    #[test]
    fn synthesis_reproduces_initial_data_and_equations() {
        let params = ModelParams::default();
        let data = FinalData::random(16, 3);
        let bs = solve_spectrum(&params, 16).unwrap();
        let coeffs = modal_coefficients(&params, &bs, &data).unwrap();
        let sols = synthesize_solutions(&params, &bs, &coeffs).unwrap();
        for (s, b) in sols.iter().zip(&bs) {
            let got = state_at(s, 0.0);
            let want = data.mode(s.n);
            for k in 0..4 {
                assert!((got[k] - want[k]).abs() < 1e-9 * (1.0 + want[k].abs()), "n={} k={k}", s.n);
            }
            assert!(s.f1.realness_residual() < 1e-12);
            assert!(s.f2.realness_residual() < 1e-12);
            assert!(modal_residual(&params, s, 7.0, 200).unwrap() < 1e-9);
            let beam = second_from_beam_equation(&params, b, &coeffs.modes[s.n - 1].c);
            for t in [0.0, 1.3, 7.0] {
                let diff = (beam.eval_re(t) - s.f2.eval_re(t)).abs();
                assert!(diff < 1e-9 * (1.0 + s.f2.eval_re(t).abs()), "n={} t={t}", s.n);
            }
        }
    }

    #[test]
    fn fifth_order_equation_tracks_coupled_system() {
        let params = ModelParams::default();
        let dev = fifth_order_equivalence(&params, 2, [1.0, -0.5, 0.3, 0.8], 5.0, 20000);
        assert!(dev < 1e-6, "{dev}");
    }
}
