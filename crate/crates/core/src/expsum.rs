//! Finite exponential sums `f(t) = sum_k a_k e^{mu_k t}` with complex amplitudes and rates.
//!
//! Every object the lab synthesises (modal solutions, boundary traces, controls) is one of
//! these, so integrals, inner products and memory convolutions are evaluated in closed form.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

const MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub amp: Complex64,
    pub rate: Complex64,
}

impl Term {
    pub fn new(amp: Complex64, rate: Complex64) -> Self {
        Term { amp, rate }
    }

    #[inline]
    pub fn eval(&self, t: f64) -> Complex64 {
        self.amp * (self.rate * t).exp()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExponentialSum {
    terms: Vec<Term>,
}

/// `(e^z - 1) / z`, accurate near zero.
pub fn exprel(z: Complex64) -> Complex64 {
    if z.norm() < 0.5 {
        // Taylor series sum z^k / (k+1)!, 24 terms is far below rounding for |z| < 0.5.
        let mut acc = Complex64::new(0.0, 0.0);
        for k in (0..24).rev() {
            acc = acc * z / ((k + 2) as f64) + 1.0;
        }
        acc
    } else {
        (z.exp() - 1.0) / z
    }
}

/// `int_a^b e^{z t} dt`.
pub fn exp_integral(z: Complex64, a: f64, b: f64) -> Complex64 {
    let h = b - a;
    (z * a).exp() * h * exprel(z * h)
}

fn rates_collide(x: Complex64, y: Complex64) -> bool {
    (x - y).norm() <= MERGE_TOL * x.norm().max(y.norm()).max(1.0)
}

impl ExponentialSum {
    pub fn new() -> Self {
        ExponentialSum { terms: Vec::new() }
    }

    pub fn from_terms(terms: Vec<Term>) -> Self {
        ExponentialSum { terms }
    }

    pub fn constant(c: f64) -> Self {
        let mut s = Self::new();
        s.push(Complex64::new(c, 0.0), Complex64::new(0.0, 0.0));
        s
    }

    pub fn push(&mut self, amp: Complex64, rate: Complex64) {
        self.terms.push(Term { amp, rate });
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        self.terms.iter().map(|term| term.eval(t)).sum()
    }

    /// Real part of the value; meaningful when the sum is closed under conjugation.
    pub fn eval_re(&self, t: f64) -> f64 {
        self.eval(t).re
    }

    pub fn derivative(&self) -> Self {
        self.map(|term| Term::new(term.amp * term.rate, term.rate))
    }

    pub fn nth_derivative(&self, k: usize) -> Self {
        self.map(|term| Term::new(term.amp * term.rate.powu(k as u32), term.rate))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(|term| Term::new(term.amp * c, term.rate))
    }

    pub fn scale_re(&self, c: f64) -> Self {
        self.map(|term| Term::new(term.amp * c, term.rate))
    }

    pub fn map<F: Fn(&Term) -> Term>(&self, f: F) -> Self {
        ExponentialSum {
            terms: self.terms.iter().map(f).collect(),
        }
    }

    /// Sum of two exponential sums, with colliding rates merged.
    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        ExponentialSum { terms }.merged()
    }

    pub fn extend(&mut self, other: &Self) {
        self.terms.extend_from_slice(&other.terms);
    }

    /// Merges terms whose rates agree to `1e-12` (relative) and drops exact zeros.
    pub fn merged(&self) -> Self {
        let mut out: Vec<Term> = Vec::with_capacity(self.terms.len());
        for term in &self.terms {
            match out.iter_mut().find(|o| rates_collide(o.rate, term.rate)) {
                Some(o) => o.amp += term.amp,
                None => out.push(*term),
            }
        }
        out.retain(|t| t.amp != Complex64::new(0.0, 0.0));
        ExponentialSum { terms: out }
    }

    /// `t -> f(horizon - t)`.
    pub fn reflect(&self, horizon: f64) -> Self {
        self.map(|term| Term::new(term.amp * (term.rate * horizon).exp(), -term.rate))
    }

    /// `t -> f(t + s)`.
    pub fn shift(&self, s: f64) -> Self {
        self.map(|term| Term::new(term.amp * (term.rate * s).exp(), term.rate))
    }

    /// `t -> e^{c t} f(t)`.
    pub fn mul_exp(&self, c: Complex64) -> Self {
        self.map(|term| Term::new(term.amp, term.rate + c))
    }

    /// Causal memory convolution `int_0^t e^{-eta (t - s)} f(s) ds`.
    pub fn conv_exp(&self, eta: f64) -> Result<Self> {
        let mut out = Self::new();
        let decay = Complex64::new(-eta, 0.0);
        for term in &self.terms {
            let denom = term.rate + eta;
            if denom.norm() <= MERGE_TOL * eta.abs().max(1.0) {
                return Err(LabError::InvalidInput(format!(
                    "rate {} resonates with the memory decay -{eta}",
                    term.rate
                )));
            }
            let c = term.amp / denom;
            out.push(c, term.rate);
            out.push(-c, decay);
        }
        Ok(out.merged())
    }

    /// `int_a^b f(t) dt`.
    pub fn integral(&self, a: f64, b: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|term| term.amp * exp_integral(term.rate, a, b))
            .sum()
    }

    /// `int_a^b f(t) conj(g(t)) dt`.
    pub fn inner(&self, g: &Self, a: f64, b: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for x in &self.terms {
            for y in &g.terms {
                acc += x.amp * y.amp.conj() * exp_integral(x.rate + y.rate.conj(), a, b);
            }
        }
        acc
    }

    /// `int_a^b |f(t)|^2 dt`.
    pub fn norm_sq(&self, a: f64, b: f64) -> f64 {
        self.inner(self, a, b).re
    }

    pub fn max_amplitude(&self) -> f64 {
        self.terms.iter().map(|t| t.amp.norm()).fold(0.0, f64::max)
    }

    /// Largest mismatch between the sum and its conjugate, relative to the largest amplitude.
    /// Zero for a real-valued function.
    pub fn realness_residual(&self) -> f64 {
        let scale = self.max_amplitude();
        if scale == 0.0 {
            return 0.0;
        }
        let conj: Vec<Term> = self
            .terms
            .iter()
            .map(|t| Term::new(-t.amp.conj(), t.rate.conj()))
            .collect();
        let mut diff = self.terms.clone();
        diff.extend(conj);
        ExponentialSum { terms: diff }.merged().max_amplitude() / scale
    }

    /// Amplitude attached to `rate` after merging, zero if absent.
    pub fn amplitude_at(&self, rate: Complex64) -> Complex64 {
        self.terms
            .iter()
            .filter(|t| rates_collide(t.rate, rate))
            .map(|t| t.amp)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn exprel_matches_direct_formula_away_from_zero() {
        for z in [c(0.4, 0.3), c(-0.49, 0.0), c(1.0, 2.0), c(-3.0, 0.5)] {
            let direct = (z.exp() - 1.0) / z;
            assert!((exprel(z) - direct).norm() < 1e-14 * direct.norm());
        }
        assert!((exprel(c(1e-9, 0.0)) - c(1.0 + 0.5e-9, 0.0)).norm() < 1e-17);
    }

    #[test]
    fn integral_of_oscillation_over_period_vanishes() {
        let mut f = ExponentialSum::new();
        f.push(c(1.0, 0.0), c(0.0, 1.0));
        let v = f.integral(0.0, 2.0 * std::f64::consts::PI);
        assert!(v.norm() < 1e-15);
        // int_0^1 e^{2t} dt = (e^2 - 1)/2
        let g = ExponentialSum::from_terms(vec![Term::new(c(1.0, 0.0), c(2.0, 0.0))]);
        assert!((g.integral(0.0, 1.0).re - (2f64.exp() - 1.0) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn cosine_norm_closed_form() {
        // cos t = (e^{it} + e^{-it}) / 2, int_0^T cos^2 = T/2 + sin(2T)/4
        let f = ExponentialSum::from_terms(vec![
            Term::new(c(0.5, 0.0), c(0.0, 1.0)),
            Term::new(c(0.5, 0.0), c(0.0, -1.0)),
        ]);
        let t: f64 = 3.7;
        let expect = t / 2.0 + (2.0 * t).sin() / 4.0;
        assert!((f.norm_sq(0.0, t) - expect).abs() < 1e-14);
        assert!(f.realness_residual() < 1e-16);
    }

    #[test]
    fn memory_convolution_closed_form() {
        // int_0^t e^{-(t-s)} e^{-2s} ds = e^{-t} - e^{-2t}
        let f = ExponentialSum::from_terms(vec![Term::new(c(1.0, 0.0), c(-2.0, 0.0))]);
        let g = f.conv_exp(1.0).unwrap();
        for t in [0.0, 0.3, 2.5] {
            let expect = (-t as f64).exp() - (-2.0 * t as f64).exp();
            assert!((g.eval_re(t) - expect).abs() < 1e-15);
        }
        assert!(f.scale_re(0.0).mul_exp(c(1.0, 0.0)).conv_exp(1.0).is_err());
    }

    #[test]
    fn reflect_and_shift() {
        let f = ExponentialSum::from_terms(vec![Term::new(c(0.3, -1.0), c(-0.2, 4.0))]);
        let r = f.reflect(2.0);
        let s = f.shift(0.7);
        for t in [0.0, 0.4, 1.9] {
            assert!((r.eval(t) - f.eval(2.0 - t)).norm() < 1e-14);
            assert!((s.eval(t) - f.eval(t + 0.7)).norm() < 1e-14);
        }
    }

    #[test]
    fn merge_combines_equal_rates() {
        let f = ExponentialSum::from_terms(vec![
            Term::new(c(1.0, 0.0), c(0.0, 3.0)),
            Term::new(c(2.0, 0.0), c(0.0, 3.0)),
            Term::new(c(1.0, 0.0), c(0.0, -3.0)),
        ]);
        let m = f.merged();
        assert_eq!(m.len(), 2);
        assert_eq!(m.amplitude_at(c(0.0, 3.0)), c(3.0, 0.0));
    }
}
