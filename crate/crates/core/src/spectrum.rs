//! Characteristic roots of the modal equations.
//!
//! Mode `n` (with `lambda = n^2`) has five exponents: a real root `r_n`, a wave pair
//! `i omega_n, -i conj(omega_n)` and a beam pair `i p_n, -i conj(p_n)`. They are the roots of
//!
//! ```text
//! L^5 + eta L^4 + (lambda^2 + lambda) L^3 + (eta lambda^2 + lambda (eta - beta)) L^2
//!     + (lambda^3 - a b) L + lambda^3 (eta - beta) - eta a b
//!   = (L^2 + lambda^2) Q(L) - a b (L + eta),   Q(L) = L^3 + eta L^2 + lambda L + lambda (eta - beta).
//! ```

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::params::{lambda, ModelParams};

const MAX_SWEEPS: usize = 200;
const CLASSIFY_MARGIN: f64 = 1e-6;

/// Monic quintic stored as `c[0] + c[1] L + ... + c[5] L^5`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quintic {
    pub coeffs: [f64; 6],
}

impl Quintic {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    /// `sum_k |c_k| |z|^k`, the natural size of the terms cancelling in `P(z)`.
    pub fn magnitude(&self, z: Complex64) -> f64 {
        let r = z.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.abs())
    }

    /// Backward-error residual `|P(z)| / sum_k |c_k| |z|^k`.
    pub fn relative_residual(&self, z: Complex64) -> f64 {
        let m = self.magnitude(z);
        if m == 0.0 {
            0.0
        } else {
            self.eval(z).norm() / m
        }
    }

    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

pub fn quintic_coeffs(params: &ModelParams, n: usize) -> Quintic {
    let l = lambda(n);
    let (beta, eta) = (params.beta, params.eta);
    let ab = params.coupling_product();
    Quintic {
        coeffs: [
            l * l * l * (eta - beta) - eta * ab,
            l * l * l - ab,
            eta * l * l + l * (eta - beta),
            l * l + l,
            eta,
            1.0,
        ],
    }
}

/// Leading-order predictions of `Lambda_1`, `Lambda_2` and `Lambda_4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticRoots {
    pub real: f64,
    pub wave: Complex64,
    pub beam: Complex64,
}

pub fn asymptotic_roots(params: &ModelParams, n: usize) -> AsymptoticRoots {
    let l = lambda(n);
    let (beta, eta) = (params.beta, params.eta);
    let ab = params.coupling_product();
    let d = beta - eta;
    let sl = l.sqrt();
    AsymptoticRoots {
        real: d - beta * d * d / l,
        wave: Complex64::new(
            -beta / 2.0 + beta * d * d / (2.0 * l),
            sl + (beta / 2.0) * (0.75 * beta - eta) / sl,
        ),
        beam: Complex64::new(
            -beta * ab / (2.0 * l.powi(5)),
            l + ab / (2.0 * l.powi(3)) + ab / (2.0 * l.powi(4)) + ab / (2.0 * l.powi(5)),
        ),
    }
}

/// The five classified roots of one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralBranch {
    pub n: usize,
    pub lambda: f64,
    /// `Lambda_1 = r_n`.
    pub r: f64,
    /// `Lambda_2 = i omega_n`.
    pub omega: Complex64,
    /// `Lambda_4 = i p_n`.
    pub p: Complex64,
    /// `p_n - lambda_n`, resolved below the rounding level of `p_n` itself.
    pub p_shift: Complex64,
    /// Backward-error residuals of the real, wave and beam roots.
    pub residuals: [f64; 3],
}

const I: Complex64 = Complex64::new(0.0, 1.0);

impl SpectralBranch {
    /// `[Lambda_1, ..., Lambda_5]`.
    pub fn roots(&self) -> [Complex64; 5] {
        let l2 = I * self.omega;
        let l4 = I * self.p;
        [Complex64::new(self.r, 0.0), l2, l2.conj(), l4, l4.conj()]
    }

    /// `Lambda_4 - i lambda_n`.
    pub fn beam_offset(&self) -> Complex64 {
        I * self.p_shift
    }

    /// `Lambda_k^2 + lambda_n^2` without cancellation on the beam pair.
    pub fn beam_factor(&self, k: usize) -> Complex64 {
        let l = self.lambda;
        match k {
            3 => {
                let d = self.beam_offset();
                d * (Complex64::new(0.0, 2.0 * l) + d)
            }
            4 => {
                let d = self.beam_offset().conj();
                d * (Complex64::new(0.0, -2.0 * l) + d)
            }
            _ => {
                let z = self.roots()[k];
                z * z + l * l
            }
        }
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(*r))
    }
}

fn aberth(q: &Quintic, seeds: [Complex64; 5], mode: usize) -> Result<[Complex64; 5]> {
    let mut z = seeds;
    // Separate coincident seeds so the repulsion term is defined.
    for k in 0..5 {
        for j in 0..k {
            if (z[k] - z[j]).norm() < 1e-10 * z[k].norm().max(1.0) {
                z[k] += Complex64::new(1e-3, 1e-3) * z[k].norm().max(1.0);
            }
        }
    }
    let mut quiet = 0;
    for _ in 0..MAX_SWEEPS {
        let mut max_step: f64 = 0.0;
        for k in 0..5 {
            let (p, dp) = q.eval_with_derivative(z[k]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..5)
                .filter(|&j| j != k)
                .map(|j| (z[k] - z[j]).inv())
                .sum();
            let w = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            z[k] -= w;
            max_step = max_step.max(w.norm() / z[k].norm().max(1e-300));
        }
        if !z.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            break;
        }
        if max_step < 1e-15 {
            quiet += 1;
            if quiet >= 2 {
                return Ok(z);
            }
        }
    }
    let residual = z.iter().map(|&v| q.relative_residual(v)).fold(0.0, f64::max);
    if residual < 1e-13 {
        return Ok(z);
    }
    Err(LabError::Convergence {
        mode,
        sweeps: MAX_SWEEPS,
        residual,
    })
}

/// Newton on `F(d) = d (2 i lambda + d) Q(i lambda + d) - a b (i lambda + d + eta)`,
/// whose root is `Lambda_4 - i lambda`.
fn refine_beam_offset(params: &ModelParams, l: f64, start: Complex64) -> Complex64 {
    let ab = params.coupling_product();
    if ab == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let (beta, eta) = (params.beta, params.eta);
    let il = Complex64::new(0.0, l);
    let cubic = |z: Complex64| ((z + eta) * z + l) * z + l * (eta - beta);
    let cubic_d = |z: Complex64| (3.0 * z + 2.0 * eta) * z + l;
    let mut d = start;
    for _ in 0..50 {
        let z = il + d;
        let f_val = d * (2.0 * il + d) * cubic(z) - ab * (z + eta);
        let f_der = (2.0 * il + 2.0 * d) * cubic(z) + d * (2.0 * il + d) * cubic_d(z) - ab;
        let step = f_val / f_der;
        d -= step;
        if step.norm() <= 1e-16 * d.norm() {
            break;
        }
    }
    d
}

fn polish(q: &Quintic, mut z: Complex64) -> Complex64 {
    for _ in 0..3 {
        let (p, dp) = q.eval_with_derivative(z);
        if dp.norm() == 0.0 {
            break;
        }
        let next = z - p / dp;
        if q.relative_residual(next) <= q.relative_residual(z) {
            z = next;
        } else {
            break;
        }
    }
    z
}

/// Computes and classifies the five roots of mode `n`.
pub fn solve_branch(params: &ModelParams, n: usize) -> Result<SpectralBranch> {
    if n == 0 {
        return Err(LabError::InvalidInput("mode index starts at 1".into()));
    }
    params.validate()?;
    let q = quintic_coeffs(params, n);
    let guess = asymptotic_roots(params, n);
    let seeds = [
        Complex64::new(guess.real, 0.0),
        guess.wave,
        guess.wave.conj(),
        guess.beam,
        guess.beam.conj(),
    ];
    let raw = aberth(&q, seeds, n)?;
    let raw: Vec<Complex64> = raw.iter().map(|&z| polish(&q, z)).collect();

    let classify = |reason: String| LabError::Classification { mode: n, reason };
    let real_tol = 1e-8;
    let (reals, complex): (Vec<Complex64>, Vec<Complex64>) = raw
        .iter()
        .partition(|z| z.im.abs() <= real_tol * z.norm().max(1.0));
    if reals.len() != 1 {
        return Err(classify(format!(
            "expected one real root, found {}",
            reals.len()
        )));
    }
    let mut upper: Vec<Complex64> = complex.iter().copied().filter(|z| z.im > 0.0).collect();
    let lower: Vec<Complex64> = complex.iter().copied().filter(|z| z.im < 0.0).collect();
    if upper.len() != 2 || lower.len() != 2 {
        return Err(classify("roots do not form two conjugate pairs".into()));
    }
    for u in &upper {
        let pair_err = lower
            .iter()
            .map(|w| (w.conj() - u).norm())
            .fold(f64::INFINITY, f64::min);
        if pair_err > 1e-10 * u.norm().max(1.0) {
            return Err(classify(format!(
                "conjugate pairing error {pair_err:.3e}"
            )));
        }
    }
    upper.sort_by(|a, b| a.im.total_cmp(&b.im));
    let (wave, beam) = (upper[0], upper[1]);
    if beam.im - wave.im < CLASSIFY_MARGIN {
        return Err(classify(format!(
            "wave and beam frequencies {:.9} and {:.9} are not separated",
            wave.im, beam.im
        )));
    }
    let by_distance = (wave - guess.wave).norm() + (beam - guess.beam).norm()
        <= (beam - guess.wave).norm() + (wave - guess.beam).norm();
    if !by_distance {
        return Err(classify(
            "frequency ordering disagrees with the asymptotic predictions".into(),
        ));
    }

    let r = polish(&q, Complex64::new(reals[0].re, 0.0)).re;
    let l = lambda(n);
    let offset = refine_beam_offset(params, l, beam - Complex64::new(0.0, l));
    let beam = Complex64::new(offset.re, l + offset.im);
    let p_shift = -I * offset;
    let branch = SpectralBranch {
        n,
        lambda: l,
        r,
        omega: -I * wave,
        p: -I * beam,
        p_shift,
        residuals: [
            q.relative_residual(Complex64::new(r, 0.0)),
            q.relative_residual(wave),
            q.relative_residual(beam),
        ],
    };
    Ok(branch)
}

/// Branches for modes `1..=n_max`, computed in parallel.
pub fn solve_spectrum(params: &ModelParams, n_max: usize) -> Result<Vec<SpectralBranch>> {
    (1..=n_max)
        .into_par_iter()
        .map(|n| solve_branch(params, n))
        .collect()
}

/// Least-squares slopes of `log |Lambda_1 - (beta - eta)|` and `log |Lambda_4 - i lambda|`
/// against `log lambda` over the given branches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecaySlopes {
    pub real_root: f64,
    pub beam_root: f64,
}

pub fn decay_slopes(params: &ModelParams, branches: &[SpectralBranch]) -> DecaySlopes {
    let x: Vec<f64> = branches.iter().map(|b| b.lambda.ln()).collect();
    let y1: Vec<f64> = branches
        .iter()
        .map(|b| (b.r - (params.beta - params.eta)).abs().ln())
        .collect();
    let y4: Vec<f64> = branches
        .iter()
        .map(|b| b.beam_offset().norm().ln())
        .collect();
    DecaySlopes {
        real_root: ls_slope(&x, &y1),
        beam_root: ls_slope(&x, &y4),
    }
}

fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Finite-range diagnostics for the structural hypotheses on the spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub modes: usize,
    /// `Re p_{n+1} - Re p_n` is increasing.
    pub beam_gaps_increasing: bool,
    /// `|Im p_n|` is smaller on the upper half of the modes than on the lower half.
    pub beam_damping_decays: bool,
    /// Minimum of `Re omega_{n+1} - Re omega_n` over the upper half of the modes.
    pub gamma_hat: f64,
    /// `Im omega_n` at the largest mode, to compare with `beta / 2`.
    pub alpha_hat: f64,
    pub alpha_matches: bool,
    /// Smallest `n'` with `r_m <= -Im omega_m` for every computed `m >= n'`.
    pub n_prime_hat: Option<usize>,
    /// Smallest distance between any two exponents, including `-eta`.
    pub min_separation: f64,
    pub distinct: bool,
    /// `min_n |p_n|`.
    pub a0_hat: f64,
    pub passed: bool,
}

pub fn validate_hypotheses(params: &ModelParams, branches: &[SpectralBranch]) -> HypothesisReport {
    let nb = branches.len();
    let half = nb / 2;
    let gaps: Vec<f64> = branches.windows(2).map(|w| w[1].p.re - w[0].p.re).collect();
    let beam_gaps_increasing = gaps.windows(2).all(|g| g[1] > g[0]);

    let max_im = |bs: &[SpectralBranch]| bs.iter().fold(0.0f64, |m, b| m.max(b.p.im.abs()));
    let beam_damping_decays = nb >= 2 && max_im(&branches[half..]) <= max_im(&branches[..half]);

    let gamma_hat = branches[half.min(nb.saturating_sub(1))..]
        .windows(2)
        .map(|w| w[1].omega.re - w[0].omega.re)
        .fold(f64::INFINITY, f64::min);

    let alpha_hat = branches.last().map(|b| b.omega.im).unwrap_or(f64::NAN);
    let alpha_target = params.beta / 2.0;
    let alpha_matches = (alpha_hat - alpha_target).abs() <= (0.1 * alpha_target).max(1e-6);

    let mut n_prime_hat = None;
    for b in branches.iter().rev() {
        if b.r <= -b.omega.im {
            n_prime_hat = Some(b.n);
        } else {
            break;
        }
    }

    let mut all: Vec<Complex64> = branches.iter().flat_map(|b| b.roots()).collect();
    all.push(Complex64::new(-params.eta, 0.0));
    let mut min_separation = f64::INFINITY;
    for i in 0..all.len() {
        for j in 0..i {
            min_separation = min_separation.min((all[i] - all[j]).norm());
        }
    }
    let distinct = min_separation > 1e-9;
    let a0_hat = branches.iter().map(|b| b.p.norm()).fold(f64::INFINITY, f64::min);

    let passed = beam_gaps_increasing
        && beam_damping_decays
        && gamma_hat > 0.0
        && alpha_matches
        && n_prime_hat.is_some()
        && distinct
        && a0_hat > 0.0;
    HypothesisReport {
        modes: nb,
        beam_gaps_increasing,
        beam_damping_decays,
        gamma_hat,
        alpha_hat,
        alpha_matches,
        n_prime_hat,
        min_separation,
        distinct,
        a0_hat,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expand(roots: &[Complex64]) -> Vec<Complex64> {
        let mut c = vec![Complex64::new(1.0, 0.0)];
        for &z in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
            for (k, &ck) in c.iter().enumerate() {
                next[k + 1] += ck;
                next[k] -= ck * z;
            }
            c = next;
        }
        c
    }

    #[test]
    fn coefficients_match_factored_form() {
        let p = ModelParams::default();
        let q = quintic_coeffs(&p, 3);
        let l = 9.0;
        for z in [Complex64::new(0.3, -1.2), Complex64::new(-2.0, 5.0)] {
            let cubic = ((z + p.eta) * z + l) * z + l * (p.eta - p.beta);
            let factored = (z * z + l * l) * cubic - p.a * p.b * (z + p.eta);
            assert!((q.eval(z) - factored).norm() < 1e-12 * factored.norm());
        }
    }

    #[test]
    fn decoupled_beam_root_is_exact() {
        let p = ModelParams::new(0.5, 1.0, 0.0, 0.0, 8, 7.0).unwrap();
        for n in 1..=64 {
            let b = solve_branch(&p, n).unwrap();
            assert_eq!(b.p, Complex64::new((n * n) as f64, 0.0));
            let roots = b.roots();
            let prod = expand(&roots);
            let q = quintic_coeffs(&p, n);
            for k in 0..6 {
                let scale = q.coeffs[k].abs().max(1.0);
                assert!((prod[k].re - q.coeffs[k]).abs() <= 1e-12 * scale, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn mode_one_defaults_classify() {
        let b = solve_branch(&ModelParams::default(), 1).unwrap();
        assert!((b.omega.re - 0.84).abs() < 0.02);
        assert!((b.p.re - 1.005).abs() < 0.01);
        assert!(b.max_residual() < 1e-14);
    }

    #[test]
    fn coincident_wave_and_beam_roots_are_rejected() {
        // beta = 0 and a b = 0: i sqrt(lambda) = i lambda at n = 1
        let p = ModelParams::new(0.0, 1.0, 0.0, 0.0, 4, 7.0).unwrap();
        assert!(matches!(
            solve_branch(&p, 1),
            Err(LabError::Classification { mode: 1, .. })
        ));
        assert!(solve_branch(&p, 2).is_ok());
    }

    #[test]
    fn duplicate_mode_breaks_distinctness() {
        let p = ModelParams::default();
        let mut bs = solve_spectrum(&p, 8).unwrap();
        assert!(validate_hypotheses(&p, &bs).distinct);
        bs.push(bs[3]);
        assert!(!validate_hypotheses(&p, &bs).distinct);
    }
}
