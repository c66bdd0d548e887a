//! The exponential memory kernel `k(t) = beta e^{-eta t}`, its resolvent, and the
//! backward Volterra operator that converts adjoint traces into observations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::quadrature::simpson_weights;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpKernel {
    beta: f64,
    eta: f64,
}

impl ExpKernel {
    /// Requires `0 <= beta < eta`; `beta = 0` gives the zero kernel.
    pub fn new(beta: f64, eta: f64) -> Result<Self> {
        if !(beta.is_finite() && eta.is_finite()) || beta < 0.0 || beta >= eta {
            return Err(LabError::InvalidParameter(format!(
                "kernel needs 0 <= beta < eta, got beta = {beta}, eta = {eta}"
            )));
        }
        Ok(ExpKernel { beta, eta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.beta * (-self.eta * t).exp()
    }

    /// Resolvent `rho = k + k * rho`, which for this kernel is `beta e^{(beta - eta) t}`.
    pub fn resolvent(&self, t: f64) -> f64 {
        self.beta * ((self.beta - self.eta) * t).exp()
    }

    /// Closed form of `(k * rho)(t) = int_0^t k(t - s) rho(s) ds`.
    pub fn kernel_conv_resolvent(&self, t: f64) -> f64 {
        self.resolvent(t) - self.eval(t)
    }

    pub fn l1_norm(&self, horizon: f64) -> f64 {
        self.beta * (-(-self.eta * horizon).exp_m1()) / self.eta
    }

    pub fn resolvent_l1_norm(&self, horizon: f64) -> f64 {
        let gap = self.eta - self.beta;
        self.beta * (-(-gap * horizon).exp_m1()) / gap
    }
}

/// Samples of a real function on the uniform grid `t_k = k h`, `k = 0..=m`, covering `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledFunction {
    horizon: f64,
    values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(horizon: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 || horizon <= 0.0 {
            return Err(LabError::InvalidInput(
                "sampled function needs at least two samples on a positive horizon".into(),
            ));
        }
        Ok(SampledFunction { horizon, values })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(horizon: f64, intervals: usize, f: F) -> Self {
        let h = horizon / intervals as f64;
        let values = (0..=intervals).map(|k| f(k as f64 * h)).collect();
        SampledFunction { horizon, values }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn intervals(&self) -> usize {
        self.values.len() - 1
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.intervals() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step()
    }

    pub fn l2_norm(&self) -> f64 {
        let w = simpson_weights(self.intervals(), self.step());
        w.iter()
            .zip(&self.values)
            .map(|(w, v)| w * v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `I_k = int_{t_k}^T e^{c (s - t_k)} f(s) ds` at every grid node.
///
/// Pairs of intervals are swept with Simpson's rule from the right end. Nodes an odd number
/// of intervals away from `T` start from a one-interval quadratic end rule.
fn backward_exp_integrals(f: &SampledFunction, c: f64) -> Vec<f64> {
    let m = f.intervals();
    let h = f.step();
    let v = &f.values;
    let e1 = (c * h).exp();
    let e2 = e1 * e1;
    let mut out = vec![0.0; m + 1];
    if m == 1 {
        out[0] = 0.5 * h * (v[0] + e1 * v[1]);
        return out;
    }
    out[m - 1] = h / 12.0 * (-v[m - 2] / e1 + 8.0 * v[m - 1] + 5.0 * e1 * v[m]);
    for k in (0..m - 1).rev() {
        let simpson = h / 3.0 * (v[k] + 4.0 * e1 * v[k + 1] + e2 * v[k + 2]);
        out[k] = e2 * out[k + 2] + simpson;
    }
    out
}

/// `psi(t) = phi(t) - beta int_t^T e^{-eta (s - t)} phi(s) ds`.
pub fn apply_backward_memory(kernel: &ExpKernel, phi: &SampledFunction) -> SampledFunction {
    let integrals = backward_exp_integrals(phi, -kernel.eta);
    let values = phi
        .values
        .iter()
        .zip(&integrals)
        .map(|(p, i)| p - kernel.beta * i)
        .collect();
    SampledFunction {
        horizon: phi.horizon,
        values,
    }
}

/// Inverts [`apply_backward_memory`] through the resolvent:
/// `phi(t) = psi(t) + int_t^T rho(s - t) psi(s) ds`.
pub fn solve_backward_volterra(kernel: &ExpKernel, psi: &SampledFunction) -> SampledFunction {
    let integrals = backward_exp_integrals(psi, kernel.beta - kernel.eta);
    let values = psi
        .values
        .iter()
        .zip(&integrals)
        .map(|(p, i)| p + kernel.beta * i)
        .collect();
    SampledFunction {
        horizon: psi.horizon,
        values,
    }
}

/// Empirical and theoretical constants of `c ||phi|| <= ||psi|| <= C ||phi||` in `L^2(0, T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormEquivalence {
    pub lower_empirical: f64,
    pub upper_empirical: f64,
    pub lower_theory: f64,
    pub upper_theory: f64,
    pub trials: usize,
}

/// Random trigonometric polynomial with 16 standard-normal coefficients on `[0, T]`.
pub fn random_trig_poly(horizon: f64, intervals: usize, seed: u64) -> SampledFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<f64> = (0..16).map(|_| StandardNormal.sample(&mut rng)).collect();
    let w = std::f64::consts::PI / horizon;
    SampledFunction::from_fn(horizon, intervals, |t| {
        let mut s = 0.0;
        for k in 0..8 {
            s += coeffs[k] * (k as f64 * w * t).cos();
            s += coeffs[8 + k] * ((k + 1) as f64 * w * t).sin();
        }
        s
    })
}

pub fn norm_equivalence_constants(
    kernel: &ExpKernel,
    horizon: f64,
    intervals: usize,
    trials: usize,
    seed: u64,
) -> NormEquivalence {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for trial in 0..trials {
        let phi = random_trig_poly(horizon, intervals, seed.wrapping_add(trial as u64));
        let psi = apply_backward_memory(kernel, &phi);
        let ratio = psi.l2_norm() / phi.l2_norm();
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    NormEquivalence {
        lower_empirical: lo,
        upper_empirical: hi,
        lower_theory: 1.0 / (1.0 + kernel.resolvent_l1_norm(horizon)),
        upper_theory: 1.0 + kernel.l1_norm(horizon),
        trials,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::CompositeGauss;

    #[test]
    fn kernel_rejects_beta_at_or_above_eta() {
        assert!(ExpKernel::new(1.0, 1.0).is_err());
        assert!(ExpKernel::new(-0.1, 1.0).is_err());
        assert!(ExpKernel::new(0.0, 1.0).is_ok());
    }

    #[test]
    fn resolvent_identity_by_quadrature() {
        let k = ExpKernel::new(0.5, 1.0).unwrap();
        for t in [0.1, 1.0, 3.3, 7.0] {
            let q = CompositeGauss::new(0.0, t, 8, 16);
            let conv = q.integrate(|s| k.eval(t - s) * k.resolvent(s));
            assert!((conv - k.kernel_conv_resolvent(t)).abs() < 1e-13);
            assert!((k.resolvent(t) - k.eval(t) - conv).abs() < 1e-13);
        }
    }

    #[test]
    fn backward_memory_on_exponential_matches_closed_form() {
        // phi = e^{a t}: psi = e^{a t} - beta (e^{(a-eta)T + eta t} - e^{a t}) / (a - eta)
        let k = ExpKernel::new(0.5, 1.0).unwrap();
        let (a, big_t) = (0.3, 2.0);
        let phi = SampledFunction::from_fn(big_t, 401, |t| (a * t).exp());
        let psi = apply_backward_memory(&k, &phi);
        for i in [0, 17, 200, 399, 400] {
            let t = phi.time(i);
            let expect = (a * t).exp()
                - 0.5 * (((a - 1.0) * big_t + t).exp() - (a * t).exp()) / (a - 1.0);
            assert!((psi.values()[i] - expect).abs() < 1e-9, "i = {i}");
        }
    }

    #[test]
    fn zero_kernel_is_identity() {
        let k = ExpKernel::new(0.0, 1.0).unwrap();
        let phi = random_trig_poly(3.0, 300, 9);
        assert_eq!(solve_backward_volterra(&k, &phi), phi);
        assert_eq!(k.resolvent(2.0), 0.0);
    }
}
