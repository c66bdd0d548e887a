//! Finite-modal Hilbert Uniqueness Method.
//!
//! The adjoint system runs backward from final data `(z10, z11, z20, z21)`. In reversed time
//! `tau = T - t` it is the forward system with `a` and `b` swapped and initial data
//! `(z10, -z11, z20, -z21)`, so every adjoint mode is a modal solution of [`crate::modal`].
//! The controls are
//!
//! ```text
//! g1(t) = z1x(t, pi) - beta int_t^T e^{-eta (s - t)} z1x(s, pi) ds,    g2(t) = -z2x(t, pi)
//! ```

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::expsum::ExponentialSum;
use crate::memory_kernel::{apply_backward_memory, ExpKernel, SampledFunction};
use crate::modal::{mode_solution_from_data, FinalData, ModeSolution};
use crate::params::ModelParams;
use crate::quadrature::simpson_weights;
use crate::spectrum::SpectralBranch;

const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;

/// Boundary traces of one adjoint solution on `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracePair {
    /// `z1x(t, pi)` with the backward memory applied.
    pub w: ExponentialSum,
    /// `z2x(t, pi)`.
    pub v: ExponentialSum,
}

impl TracePair {
    pub fn realness_residual(&self) -> f64 {
        self.w.realness_residual().max(self.v.realness_residual())
    }
}

/// Adjoint mode `n` in reversed time, from its final data `[alpha1, rho1, alpha2, rho2]`.
pub fn adjoint_mode(params: &ModelParams, branch: &SpectralBranch, data: [f64; 4]) -> Result<ModeSolution> {
    // The quintic depends on a and b only through a b, so the branches are shared.
    let [a1, r1, a2, r2] = data;
    mode_solution_from_data(&params.adjoint(), branch, [a1, -r1, a2, -r2])
}

/// Traces of the adjoint solution with the given final data.
pub fn adjoint_traces(params: &ModelParams, branches: &[SpectralBranch], data: &FinalData) -> Result<TracePair> {
    data.validate()?;
    let mut z = ExponentialSum::new();
    let mut v = ExponentialSum::new();
    for b in branches {
        let d = data.mode(b.n);
        if d == [0.0; 4] {
            continue;
        }
        let sol = adjoint_mode(params, b, d)?;
        let sign = if b.n % 2 == 0 { 1.0 } else { -1.0 };
        let k = sign * b.n as f64;
        z.extend(&sol.f1.scale_re(k));
        v.extend(&sol.f2.scale_re(k));
    }
    // The backward convolution becomes a causal one in reversed time.
    let mut w = z.clone();
    if params.beta != 0.0 && !z.is_empty() {
        w.extend(&z.conv_exp(params.eta)?.scale_re(-params.beta));
    }
    let horizon = params.horizon;
    Ok(TracePair {
        w: w.merged().reflect(horizon),
        v: v.merged().reflect(horizon),
    })
}

/// Basis index `a = 4 (n - 1) + slot` with slots `alpha1, rho1, alpha2, rho2`.
pub fn basis_element(modes: usize, a: usize) -> FinalData {
    let mut d = FinalData::zeros(modes);
    let mut v = [0.0; 4];
    v[a % 4] = 1.0;
    d.set_mode(a / 4 + 1, v);
    d
}

/// `H^1_0 x L^2 x H^1_0 x H^{-1}` weights `(n, 1, n, 1/n)` of the basis.
pub fn sobolev_scale(modes: usize) -> Vec<f64> {
    (0..4 * modes)
        .map(|a| {
            let n = (a / 4 + 1) as f64;
            match a % 4 {
                0 | 2 => n,
                1 => 1.0,
                _ => 1.0 / n,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct GramSystem {
    pub modes: usize,
    pub horizon: f64,
    /// `G_ab = int_0^T (w_a w_b + v_a v_b) dt`.
    #[serde(skip)]
    pub matrix: DMatrix<f64>,
    pub scale: Vec<f64>,
    /// Extreme eigenvalues of `S^{-1} G S^{-1}`.
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub symmetry_error: f64,
    #[serde(skip)]
    pub traces: Vec<TracePair>,
}

pub fn assemble_gram(params: &ModelParams, branches: &[SpectralBranch]) -> Result<GramSystem> {
    params.validate()?;
    params.require_coupled()?;
    let horizon = params.horizon;
    if horizon <= 2.0 * std::f64::consts::PI {
        return Err(LabError::Precondition(format!(
            "reachability needs T > 2 pi, got T = {horizon}"
        )));
    }
    let modes = params.modes;
    if branches.len() < modes {
        return Err(LabError::InvalidInput(format!(
            "{} branches for {modes} modes",
            branches.len()
        )));
    }
    let bs = &branches[..modes];
    let dim = 4 * modes;
    let traces: Vec<TracePair> = (0..dim)
        .into_par_iter()
        .map(|a| adjoint_traces(params, bs, &basis_element(modes, a)))
        .collect::<Result<_>>()?;
    let entries: Vec<f64> = (0..dim * dim)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / dim, idx % dim);
            let (x, y) = (&traces[i], &traces[j]);
            (x.w.inner(&y.w, 0.0, horizon) + x.v.inner(&y.v, 0.0, horizon)).re
        })
        .collect();
    let raw = DMatrix::from_row_slice(dim, dim, &entries);
    let symmetry_error = (&raw - raw.transpose()).amax() / raw.amax().max(f64::MIN_POSITIVE);
    let matrix = (&raw + raw.transpose()) * 0.5;
    let scale = sobolev_scale(modes);
    let scaled = scaled_matrix(&matrix, &scale);
    let eig = scaled.clone().symmetric_eigenvalues();
    let (min_eigenvalue, max_eigenvalue) = (eig.min(), eig.max());
    if !(min_eigenvalue > 1e-12 * max_eigenvalue) {
        return Err(LabError::NotControllable {
            min_eig: min_eigenvalue,
            max_eig: max_eigenvalue,
        });
    }
    Ok(GramSystem {
        modes,
        horizon,
        matrix,
        scale,
        min_eigenvalue,
        max_eigenvalue,
        symmetry_error,
        traces,
    })
}

fn scaled_matrix(g: &DMatrix<f64>, s: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(g.nrows(), g.ncols(), |i, j| g[(i, j)] / (s[i] * s[j]))
}

/// `b_a = <(-u11, u10, -u21, u20), e_a>_{L^2(0, pi)}`.
pub fn rhs_vector(target: &FinalData, modes: usize) -> Result<DVector<f64>> {
    target.validate()?;
    if target.modes() > modes && (modes..target.modes()).any(|i| target.mode(i + 1) != [0.0; 4]) {
        return Err(LabError::InvalidInput(format!(
            "target has modes beyond the {modes} controlled ones"
        )));
    }
    let mut b = DVector::zeros(4 * modes);
    for n in 1..=modes {
        let [u10, u11, u20, u21] = target.mode(n);
        let k = 4 * (n - 1);
        b[k] = -HALF_PI * u11;
        b[k + 1] = HALF_PI * u10;
        b[k + 2] = -HALF_PI * u21;
        b[k + 3] = HALF_PI * u20;
    }
    Ok(b)
}

#[derive(Debug, Clone, Serialize)]
pub struct HumSolution {
    /// Optimal adjoint final data.
    pub adjoint_data: FinalData,
    pub relative_residual: f64,
}

impl GramSystem {
    pub fn solve(&self, b: &DVector<f64>) -> Result<HumSolution> {
        let s = &self.scale;
        let scaled = scaled_matrix(&self.matrix, s);
        let rhs = DVector::from_fn(b.len(), |i, _| b[i] / s[i]);
        let chol = scaled.cholesky().ok_or(LabError::NotControllable {
            min_eig: self.min_eigenvalue,
            max_eig: self.max_eigenvalue,
        })?;
        let y = chol.solve(&rhs);
        let c = DVector::from_fn(b.len(), |i, _| y[i] / s[i]);
        let bn = b.norm();
        let relative_residual = if bn == 0.0 { 0.0 } else { (&self.matrix * &c - b).norm() / bn };
        if relative_residual >= 1e-8 {
            return Err(LabError::Conditioning {
                what: "Gram system".into(),
                detail: format!("relative residual {relative_residual:.3e}"),
            });
        }
        let mut adjoint_data = FinalData::zeros(self.modes);
        for n in 1..=self.modes {
            let k = 4 * (n - 1);
            adjoint_data.set_mode(n, [c[k], c[k + 1], c[k + 2], c[k + 3]]);
        }
        Ok(HumSolution {
            adjoint_data,
            relative_residual,
        })
    }

    /// `c^T G c / sum (s_a c_a)^2`, the F-norm against the Sobolev norm of the adjoint data.
    pub fn norm_ratio(&self, c: &DVector<f64>) -> f64 {
        let den: f64 = c.iter().zip(&self.scale).map(|(x, s)| (x * s).powi(2)).sum();
        c.dot(&(&self.matrix * c)) / den
    }

    /// Smallest and largest `norm_ratio` over `draws` standard normal vectors.
    pub fn norm_equivalence_range(&self, draws: usize, seed: u64) -> (f64, f64) {
        let dim = self.matrix.nrows();
        (0..draws)
            .into_par_iter()
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
                let c = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
                let r = self.norm_ratio(&c);
                (r, r)
            })
            .reduce(|| (f64::INFINITY, 0.0), |a, b| (a.0.min(b.0), a.1.max(b.1)))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Controls {
    /// `u1(t, pi)`.
    pub g1: ExponentialSum,
    /// `u2xx(t, pi)`.
    pub g2: ExponentialSum,
    pub g1_norm_sq: f64,
    pub g2_norm_sq: f64,
}

pub fn synthesize_controls(params: &ModelParams, branches: &[SpectralBranch], solution: &HumSolution) -> Result<Controls> {
    let tr = adjoint_traces(params, &branches[..params.modes], &solution.adjoint_data)?;
    let g1 = tr.w;
    let g2 = tr.v.scale_re(-1.0);
    let t = params.horizon;
    Ok(Controls {
        g1_norm_sq: g1.norm_sq(0.0, t),
        g2_norm_sq: g2.norm_sq(0.0, t),
        g1,
        g2,
    })
}

/// Gram assembly, solve and control synthesis for one target.
#[derive(Debug, Clone, Serialize)]
pub struct HumResult {
    pub system: GramSystem,
    pub solution: HumSolution,
    pub controls: Controls,
}

pub fn solve_hum(params: &ModelParams, branches: &[SpectralBranch], target: &FinalData) -> Result<HumResult> {
    let system = assemble_gram(params, branches)?;
    let b = rhs_vector(target, params.modes)?;
    let solution = system.solve(&b)?;
    let controls = synthesize_controls(params, branches, &solution)?;
    Ok(HumResult {
        system,
        solution,
        controls,
    })
}

/// `G_ab` by Simpson quadrature on sampled traces, with the memory applied by the sampled
/// backward sweep instead of the closed-form convolution.
pub fn gram_entry_quadrature(
    params: &ModelParams,
    branches: &[SpectralBranch],
    a: usize,
    b: usize,
    intervals: usize,
) -> Result<f64> {
    let modes = params.modes;
    let horizon = params.horizon;
    let kernel = ExpKernel::new(params.beta, params.eta)?;
    let sampled = |idx: usize| -> Result<(SampledFunction, SampledFunction)> {
        let data = basis_element(modes, idx);
        let n = idx / 4 + 1;
        let sol = adjoint_mode(params, &branches[n - 1], data.mode(n))?;
        let k = if n % 2 == 0 { n as f64 } else { -(n as f64) };
        let z = SampledFunction::from_fn(horizon, intervals, |t| k * sol.f1.eval_re(horizon - t));
        let v = SampledFunction::from_fn(horizon, intervals, |t| k * sol.f2.eval_re(horizon - t));
        Ok((apply_backward_memory(&kernel, &z), v))
    };
    let (wa, va) = sampled(a)?;
    let (wb, vb) = sampled(b)?;
    let weights = simpson_weights(intervals, horizon / intervals as f64);
    Ok(weights
        .iter()
        .enumerate()
        .map(|(k, wt)| wt * (wa.values()[k] * wb.values()[k] + va.values()[k] * vb.values()[k]))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::solve_spectrum;

    fn setup(modes: usize) -> (ModelParams, Vec<SpectralBranch>) {
        let p = ModelParams::default().with_modes(modes);
        let bs = solve_spectrum(&p, modes).unwrap();
        (p, bs)
    }

    #[test]
    fn zero_data_gives_zero_traces() {
        let (p, bs) = setup(3);
        let tr = adjoint_traces(&p, &bs, &FinalData::zeros(3)).unwrap();
        assert!(tr.w.is_empty() && tr.v.is_empty());
    }

    #[test]
    fn traces_match_direct_evaluation() {
        let (p, bs) = setup(2);
        let data = basis_element(2, 5);
        let tr = adjoint_traces(&p, &bs, &data).unwrap();
        assert!(tr.realness_residual() < 1e-10);
        let sol = adjoint_mode(&p, &bs[1], data.mode(2)).unwrap();
        for t in [0.0, 1.3, 6.9] {
            let z = 2.0 * sol.f1.eval_re(p.horizon - t);
            assert!((tr.v.eval_re(t) - 2.0 * sol.f2.eval_re(p.horizon - t)).abs() < 1e-12);
            let mem = crate::quadrature::CompositeGauss::new(t, p.horizon, 32, 12)
                .integrate(|s| (-p.eta * (s - t)).exp() * 2.0 * sol.f1.eval_re(p.horizon - s));
            assert!((tr.w.eval_re(t) - (z - p.beta * mem)).abs() < 1e-11);
        }
    }

    #[test]
    fn memoryless_trace_is_unmodified() {
        let mut p = ModelParams::default().with_modes(1);
        p.beta = 0.0;
        let bs0 = solve_spectrum(&p, 1).unwrap();
        let data = basis_element(1, 0);
        let tr = adjoint_traces(&p, &bs0, &data).unwrap();
        let sol = adjoint_mode(&p, &bs0[0], data.mode(1)).unwrap();
        assert!((tr.w.eval_re(2.0) + sol.f1.eval_re(p.horizon - 2.0)).abs() < 1e-13);
    }

    #[test]
    fn gram_is_positive_and_rejects_short_horizon() {
        let (p, bs) = setup(4);
        let g = assemble_gram(&p, &bs).unwrap();
        assert!(g.min_eigenvalue > 0.0);
        assert!(g.symmetry_error < 1e-10);
        for a in 0..16 {
            let tr = &g.traces[a];
            let diag = tr.w.norm_sq(0.0, 7.0) + tr.v.norm_sq(0.0, 7.0);
            assert!((g.matrix[(a, a)] - diag).abs() < 1e-12 * diag);
        }
        let short = p.with_horizon(5.0);
        assert!(matches!(assemble_gram(&short, &bs), Err(LabError::Precondition(_))));
    }

    #[test]
    fn quadrature_agrees_with_closed_form() {
        let (p, bs) = setup(3);
        let g = assemble_gram(&p, &bs).unwrap();
        for (a, b) in [(0, 5), (3, 10), (7, 7)] {
            let q = gram_entry_quadrature(&p, &bs, a, b, 4000).unwrap();
            let scale = (g.matrix[(a, a)] * g.matrix[(b, b)]).sqrt();
            assert!((q - g.matrix[(a, b)]).abs() < 1e-6 * scale, "{a} {b}");
        }
    }

    #[test]
    fn rhs_pairs_positions_with_velocity_slots() {
        let mut t = FinalData::zeros(2);
        t.alpha1[0] = 1.0;
        let b = rhs_vector(&t, 2).unwrap();
        assert_eq!(b[1], HALF_PI);
        assert_eq!(b.iter().filter(|x| **x != 0.0).count(), 1);
    }
}
