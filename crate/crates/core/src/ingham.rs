//! Ingham-type estimates for the abstract solution
//!
//! ```text
//! u1(t) = sum_n R_n e^{r_n t} + C_n e^{i omega_n t} + conj + D_n e^{i p_n t} + conj
//! u2(t) = sum_n d_n D_n e^{i p_n t} + conj + calD e^{-eta t}
//! ```
//!
//! with the sine and cosine windows, the kernel sums behind the gap estimate, Monte-Carlo estimates of the
//! inverse and direct constants, and the Haraux annihilation operators.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::expsum::{exprel, ExponentialSum, Term};
use crate::modal::{cal_d_term, compute_dn};
use crate::params::ModelParams;
use crate::quadrature::CompositeGauss;
use crate::spectrum::{HypothesisReport, SpectralBranch};

const I: Complex64 = Complex64::new(0.0, 1.0);

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `k(t) = sin(pi t / T)` on `[0, T]`, zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowSine {
    pub horizon: f64,
}

/// `k*(t) = cos(pi t / 2T)` on `[-T, T]`, zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowCosine {
    pub horizon: f64,
}

impl WindowSine {
    pub fn eval(&self, t: f64) -> f64 {
        if (0.0..=self.horizon).contains(&t) {
            (PI * t / self.horizon).sin()
        } else {
            0.0
        }
    }

    /// `K(u) = pi T / (pi^2 - T^2 u^2)`.
    pub fn kernel(&self, u: Complex64) -> Complex64 {
        let t = self.horizon;
        PI * t / (PI * PI - t * t * u * u)
    }

    /// `int k(t) e^{i u t} dt = (1 + e^{i u T}) K(u)`.
    pub fn transform(&self, u: Complex64) -> Complex64 {
        (1.0 + (I * u * self.horizon).exp()) * self.kernel(u)
    }

    /// `k` on its support as an exponential sum.
    pub fn as_expsum(&self) -> ExponentialSum {
        let w = PI / self.horizon;
        ExponentialSum::from_terms(vec![
            Term::new(-0.5 * I, Complex64::new(0.0, w)),
            Term::new(0.5 * I, Complex64::new(0.0, -w)),
        ])
    }

    fn pole_distance(&self, u: Complex64) -> f64 {
        (PI * PI - self.horizon * self.horizon * u * u).norm()
    }
}

impl WindowCosine {
    pub fn eval(&self, t: f64) -> f64 {
        if t.abs() <= self.horizon {
            (PI * t / (2.0 * self.horizon)).cos()
        } else {
            0.0
        }
    }

    /// `K*(u) = 4 T pi / (pi^2 - 4 T^2 u^2)`.
    pub fn kernel(&self, u: Complex64) -> Complex64 {
        let t = self.horizon;
        4.0 * t * PI / (PI * PI - 4.0 * t * t * u * u)
    }

    /// `int k*(t) e^{i u t} dt = cos(u T) K*(u)`.
    pub fn transform(&self, u: Complex64) -> Complex64 {
        (u * self.horizon).cos() * self.kernel(u)
    }

    fn pole_distance(&self, u: Complex64) -> f64 {
        (PI * PI - 4.0 * self.horizon * self.horizon * u * u).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Window {
    Sine(WindowSine),
    Cosine(WindowCosine),
}

/// Absolute difference between a high-order quadrature of the window transform and its
/// closed form.
pub fn window_transform_identity_check(w: &Window, u: Complex64) -> Result<f64> {
    let (dist, a, b, horizon) = match w {
        Window::Sine(s) => (s.pole_distance(u), 0.0, s.horizon, s.horizon),
        Window::Cosine(s) => (s.pole_distance(u), -s.horizon, s.horizon, s.horizon),
    };
    if horizon <= 0.0 {
        return Err(LabError::InvalidParameter("window horizon must be positive".into()));
    }
    if dist <= 1e-12 {
        return Err(LabError::InvalidInput(format!(
            "u = {u} sits on a pole of the window transform; pick another u"
        )));
    }
    let panels = 16 + (4.0 * u.re.abs() * (b - a)) as usize;
    let q = CompositeGauss::new(a, b, panels, 16);
    let (numeric, closed) = match w {
        Window::Sine(s) => (
            q.integrate_c(|t| s.eval(t) * (I * u * t).exp()),
            s.transform(u),
        ),
        Window::Cosine(s) => (
            q.integrate_c(|t| s.eval(t) * (I * u * t).exp()),
            s.transform(u),
        ),
    };
    Ok((numeric - closed).norm())
}

/// Off-diagonal and reflected kernel sums for one mode against their bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelSumRow {
    pub n: usize,
    pub minus_sum: f64,
    pub minus_bound: f64,
    pub plus_sum: f64,
    pub plus_bound: f64,
}

impl KernelSumRow {
    pub fn holds(&self) -> bool {
        self.minus_sum <= self.minus_bound && self.plus_sum <= self.plus_bound
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub horizon: f64,
    pub epsilon: f64,
    pub m: f64,
    /// Smallest `n0` for which both sums are bounded for every computed `n >= n0`.
    pub n0_hat: Option<usize>,
    /// First mode of the upper half of the computed range.
    pub tail_start: usize,
    pub tail_rows: Vec<KernelSumRow>,
    pub tail_holds: bool,
}

fn kernel_rows(bs: &[SpectralBranch], win: &WindowSine, m: f64) -> Vec<KernelSumRow> {
    let t = win.horizon;
    let n0 = bs.first().map(|b| b.n).unwrap_or(1) as f64;
    // sum_{m >= n0} 1 / (4 m^2 - 1) telescopes to 1 / (2 (2 n0 - 1)).
    let tail = 1.0 / (2.0 * (2.0 * n0 - 1.0));
    bs.iter()
        .map(|bn| {
            let minus_sum = bs
                .iter()
                .filter(|bm| bm.n != bn.n)
                .map(|bm| win.kernel(bn.p - bm.p.conj()).norm())
                .sum();
            let plus_sum = bs.iter().map(|bm| win.kernel(bn.p + bm.p).norm()).sum();
            KernelSumRow {
                n: bn.n,
                minus_sum,
                minus_bound: 2.0 * PI / (t * m * m),
                plus_sum,
                plus_bound: 4.0 * PI / (t * m * m) * tail,
            }
        })
        .collect()
}

pub fn kernel_sum_bounds(branches: &[SpectralBranch], horizon: f64, epsilon: f64, m: f64) -> Result<BoundReport> {
    if !(0.0..1.0).contains(&epsilon) || epsilon == 0.0 {
        return Err(LabError::InvalidParameter(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if m <= 2.0 * PI / (horizon * (1.0 - epsilon)) {
        return Err(LabError::Precondition(format!(
            "M = {m} must exceed 2 pi / (T (1 - eps)) = {}",
            2.0 * PI / (horizon * (1.0 - epsilon))
        )));
    }
    let win = WindowSine { horizon };
    let n0_hat = (0..branches.len())
        .find(|&i| kernel_rows(&branches[i..], &win, m).iter().all(|r| r.holds()))
        .map(|i| branches[i].n);
    let half = branches.len() / 2;
    let tail_rows = kernel_rows(&branches[half..], &win, m);
    let tail_holds = tail_rows.iter().all(|r| r.holds());
    Ok(BoundReport {
        horizon,
        epsilon,
        m,
        n0_hat,
        tail_start: branches.get(half).map(|b| b.n).unwrap_or(0),
        tail_rows,
        tail_holds,
    })
}

/// Coefficients `C_n`, `D_n` of the abstract solution, index 0 for mode 1.
/// `R_n = Re(C_n) / n`, which satisfies the growth condition with `mu = nu = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbstractCoefficients {
    pub c: Vec<Complex64>,
    pub d: Vec<Complex64>,
}

fn complex_normal(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

impl AbstractCoefficients {
    /// `C_n ~ CN(0, 1)`, `D_n ~ CN(0, 1) / |p_n|^2`, zero below `first_mode`.
    pub fn random(branches: &[SpectralBranch], first_mode: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = Vec::with_capacity(branches.len());
        let mut d = Vec::with_capacity(branches.len());
        for b in branches {
            let (cn, dn) = (complex_normal(&mut rng), complex_normal(&mut rng));
            if b.n < first_mode {
                c.push(Complex64::new(0.0, 0.0));
                d.push(Complex64::new(0.0, 0.0));
            } else {
                c.push(cn);
                d.push(dn / b.p.norm_sqr());
            }
        }
        AbstractCoefficients { c, d }
    }

    pub fn scaled(&self, s: f64) -> Self {
        AbstractCoefficients {
            c: self.c.iter().map(|v| v * s).collect(),
            d: self.d.iter().map(|v| v * s).collect(),
        }
    }

    fn wave_part(&self, branches: &[SpectralBranch]) -> ExponentialSum {
        let mut f = ExponentialSum::new();
        for (b, &cn) in branches.iter().zip(&self.c) {
            f.push(c(cn.re / b.n as f64), c(b.r));
            f.push(cn, I * b.omega);
            f.push(cn.conj(), (I * b.omega).conj());
        }
        f
    }

    fn beam_part(&self, branches: &[SpectralBranch]) -> ExponentialSum {
        let mut f = ExponentialSum::new();
        for (b, &dn) in branches.iter().zip(&self.d) {
            f.push(dn, I * b.p);
            f.push(dn.conj(), (I * b.p).conj());
        }
        f
    }

    pub fn u1(&self, branches: &[SpectralBranch]) -> ExponentialSum {
        let mut f = self.wave_part(branches);
        f.extend(&self.beam_part(branches));
        f
    }

    /// `G(t) = sum_n d_n D_n e^{i p_n t} + conj`.
    pub fn beam_second(&self, params: &ModelParams, branches: &[SpectralBranch]) -> Result<ExponentialSum> {
        let mut g = ExponentialSum::new();
        for (b, &dn) in branches.iter().zip(&self.d) {
            let amp = compute_dn(params, b)? * dn;
            g.push(amp, I * b.p);
            g.push(amp.conj(), (I * b.p).conj());
        }
        Ok(g)
    }

    pub fn cal_d(&self, params: &ModelParams, branches: &[SpectralBranch]) -> f64 {
        branches
            .iter()
            .zip(&self.d)
            .map(|(b, &dn)| cal_d_term(params, b, dn))
            .sum()
    }

    pub fn u2(&self, params: &ModelParams, branches: &[SpectralBranch]) -> Result<ExponentialSum> {
        let mut g = self.beam_second(params, branches)?;
        g.push(c(self.cal_d(params, branches)), c(-params.eta));
        Ok(g)
    }

    /// `sum |C_n|^2 + sum |D_n|^2 |p_n|^4`.
    pub fn coefficient_norm_sq(&self, branches: &[SpectralBranch]) -> f64 {
        branches
            .iter()
            .zip(self.c.iter().zip(&self.d))
            .map(|(b, (cn, dn))| cn.norm_sqr() + dn.norm_sqr() * b.p.norm_sqr() * b.p.norm_sqr())
            .sum()
    }
}

/// Quadratic forms of the abstract solution in the real coordinates
/// `(Re C_n, Im C_n, |p_n|^2 Re D_n, |p_n|^2 Im D_n)`.
#[derive(Debug, Clone)]
pub struct InghamForms {
    pub modes: Vec<usize>,
    /// `int_0^T (u1^2 + u2^2)`.
    pub inverse_gram: DMatrix<f64>,
    /// `int_{-T}^T (u1^2 + u2^2)`.
    pub direct_gram: DMatrix<f64>,
    /// `sum |C|^2 + sum |D|^2 |p|^4 + calD^2`.
    pub inverse_weight: DMatrix<f64>,
    /// `sum |C|^2 + sum |D|^2 |p|^4`.
    pub direct_weight: DMatrix<f64>,
}

fn gram(fs: &[(ExponentialSum, ExponentialSum)], a: f64, b: f64) -> DMatrix<f64> {
    let n = fs.len();
    let entries: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            if j < i {
                return 0.0;
            }
            (fs[i].0.inner(&fs[j].0, a, b) + fs[i].1.inner(&fs[j].1, a, b)).re
        })
        .collect();
    let mut g = DMatrix::from_row_slice(n, n, &entries);
    for i in 0..n {
        for j in 0..i {
            g[(i, j)] = g[(j, i)];
        }
    }
    g
}

pub fn ingham_forms(params: &ModelParams, branches: &[SpectralBranch], horizon: f64) -> Result<InghamForms> {
    let mut basis = Vec::with_capacity(4 * branches.len());
    let mut cal_d = Vec::with_capacity(4 * branches.len());
    for b in branches {
        let dn = compute_dn(params, b)?;
        let wave = |cn: Complex64| {
            let mut f = ExponentialSum::new();
            f.push(c(cn.re / b.n as f64), c(b.r));
            f.push(cn, I * b.omega);
            f.push(cn.conj(), (I * b.omega).conj());
            f
        };
        let beam = |dv: Complex64| {
            let mut f = ExponentialSum::new();
            f.push(dv, I * b.p);
            f.push(dv.conj(), (I * b.p).conj());
            let mut g = ExponentialSum::new();
            g.push(dn * dv, I * b.p);
            g.push((dn * dv).conj(), (I * b.p).conj());
            let cd = cal_d_term(params, b, dv);
            g.push(c(cd), c(-params.eta));
            (f, g, cd)
        };
        basis.push((wave(c(1.0)), ExponentialSum::new()));
        cal_d.push(0.0);
        basis.push((wave(I), ExponentialSum::new()));
        cal_d.push(0.0);
        let s = 1.0 / b.p.norm_sqr();
        for dv in [c(s), I * s] {
            let (f, g, cd) = beam(dv);
            basis.push((f, g));
            cal_d.push(cd);
        }
    }
    let inverse_gram = gram(&basis, 0.0, horizon);
    let direct_gram = gram(&basis, -horizon, horizon);
    let n = basis.len();
    let direct_weight = DMatrix::<f64>::identity(n, n);
    let h = DVector::from_vec(cal_d);
    let inverse_weight = &direct_weight + &h * h.transpose();
    Ok(InghamForms {
        modes: branches.iter().map(|b| b.n).collect(),
        inverse_gram,
        direct_gram,
        inverse_weight,
        direct_weight,
    })
}

impl InghamForms {
    /// Inverse and direct ratios at coordinate vector `x`.
    pub fn ratios(&self, x: &DVector<f64>) -> (f64, f64) {
        let q = |m: &DMatrix<f64>| x.dot(&(m * x));
        (
            q(&self.inverse_gram) / q(&self.inverse_weight),
            q(&self.direct_gram) / q(&self.direct_weight),
        )
    }

    /// Extreme generalized eigenvalues `(min of inverse pencil, max of direct pencil)`.
    pub fn exact_constants(&self) -> Result<(f64, f64)> {
        let lo = generalized_eigenvalues(&self.inverse_gram, &self.inverse_weight)?;
        let hi = generalized_eigenvalues(&self.direct_gram, &self.direct_weight)?;
        Ok((lo.min(), hi.max()))
    }
}

/// Eigenvalues of `L^{-1} A L^{-T}` with `B = L L^T`.
pub fn generalized_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DVector<f64>> {
    let chol = b.clone().cholesky().ok_or_else(|| LabError::Conditioning {
        what: "weight matrix".into(),
        detail: "not positive definite".into(),
    })?;
    let l = chol.l();
    let left = l
        .solve_lower_triangular(a)
        .ok_or_else(|| LabError::Conditioning {
            what: "weight matrix".into(),
            detail: "singular factor".into(),
        })?;
    let m = l
        .solve_lower_triangular(&left.transpose())
        .ok_or_else(|| LabError::Conditioning {
            what: "weight matrix".into(),
            detail: "singular factor".into(),
        })?;
    let sym = (&m + m.transpose()) * 0.5;
    Ok(sym.symmetric_eigenvalues())
}

/// Trial `k` draws from its own stream seeded with `seed + k`.
fn draw_coordinates(dim: usize, seed: u64, draw: usize) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(draw as u64));
    loop {
        let x = DVector::from_fn(dim, |_, _| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v * std::f64::consts::FRAC_1_SQRT_2
        });
        if x.norm() > 0.0 {
            return x;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DrawRatio {
    pub draw: usize,
    pub inverse: f64,
    pub direct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InghamEstimate {
    pub horizon: f64,
    pub modes: usize,
    pub draws: usize,
    pub seed: u64,
    pub c1_hat: f64,
    pub c2_hat: f64,
    /// Sharp constants of the truncated family (extreme generalized eigenvalues).
    pub c1_exact: f64,
    pub c2_exact: f64,
    #[serde(skip)]
    pub ratios: Vec<DrawRatio>,
}

fn check_ingham_pre(hyp: &HypothesisReport, horizon: f64, draws: usize, threshold: f64) -> Result<()> {
    if !hyp.passed {
        return Err(LabError::Precondition("spectral hypotheses failed validation".into()));
    }
    if draws < 100 {
        return Err(LabError::Precondition(format!("need at least 100 draws, got {draws}")));
    }
    if horizon <= threshold {
        return Err(LabError::Precondition(format!(
            "T = {horizon} must exceed {threshold:.6}"
        )));
    }
    Ok(())
}

/// Monte-Carlo inverse and direct constants over `draws` random coefficient vectors.
pub fn ingham_estimates(
    params: &ModelParams,
    branches: &[SpectralBranch],
    hyp: &HypothesisReport,
    horizon: f64,
    draws: usize,
    seed: u64,
) -> Result<InghamEstimate> {
    check_ingham_pre(hyp, horizon, draws, 2.0 * PI / hyp.gamma_hat)?;
    let forms = ingham_forms(params, branches, horizon)?;
    let dim = forms.inverse_gram.nrows();
    let ratios: Vec<DrawRatio> = (0..draws)
        .into_par_iter()
        .map(|k| {
            let x = draw_coordinates(dim, seed, k);
            let (inverse, direct) = forms.ratios(&x);
            DrawRatio { draw: k, inverse, direct }
        })
        .collect();
    let c1_hat = ratios.iter().map(|r| r.inverse).fold(f64::INFINITY, f64::min);
    let c2_hat = ratios.iter().map(|r| r.direct).fold(0.0, f64::max);
    let (c1_exact, c2_exact) = forms.exact_constants()?;
    Ok(InghamEstimate {
        horizon,
        modes: branches.len(),
        draws,
        seed,
        c1_hat,
        c2_hat,
        c1_exact,
        c2_exact,
        ratios,
    })
}

pub fn estimate_inverse_constant(
    params: &ModelParams,
    branches: &[SpectralBranch],
    hyp: &HypothesisReport,
    horizon: f64,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    Ok(ingham_estimates(params, branches, hyp, horizon, draws, seed)?.c1_hat)
}

pub fn estimate_direct_constant(
    params: &ModelParams,
    branches: &[SpectralBranch],
    hyp: &HypothesisReport,
    horizon: f64,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    check_ingham_pre(hyp, horizon, draws, PI / hyp.gamma_hat)?;
    let forms = ingham_forms(params, branches, horizon)?;
    let dim = forms.inverse_gram.nrows();
    Ok((0..draws)
        .into_par_iter()
        .map(|k| forms.ratios(&draw_coordinates(dim, seed, k)).1)
        .reduce(|| 0.0, f64::max))
}

/// `I_{delta,z} u(t) = u(t) - (1/delta) int_0^delta e^{-i z s} u(t + s) ds`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Annihilator {
    pub delta: f64,
    pub z: Complex64,
}

fn frequency_of(rate: Complex64) -> Complex64 {
    -I * rate
}

impl Annihilator {
    pub fn new(delta: f64, z: Complex64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(LabError::InvalidParameter(format!("delta must be positive, got {delta}")));
        }
        Ok(Annihilator { delta, z })
    }

    /// Multiplier of `e^{rate t}`: `1 - (e^{i(z'-z) delta} - 1) / (i (z'-z) delta)` with `rate = i z'`.
    pub fn factor(&self, rate: Complex64) -> Complex64 {
        let zp = frequency_of(rate);
        if (zp - self.z).norm() <= 1e-12 {
            return Complex64::new(0.0, 0.0);
        }
        1.0 - exprel(I * (zp - self.z) * self.delta)
    }

    /// Evaluates the defining integral by quadrature, as an independent check.
    pub fn apply_numeric(&self, f: &ExponentialSum, t: f64) -> Complex64 {
        let q = CompositeGauss::new(0.0, self.delta, 8, 16);
        f.eval(t) - q.integrate_c(|s| (-I * self.z * s).exp() * f.eval(t + s)) / self.delta
    }
}

/// Exact symbolic action; killed terms are removed.
pub fn annihilate(op: &Annihilator, f: &ExponentialSum) -> ExponentialSum {
    let terms = f
        .terms()
        .iter()
        .filter_map(|t| {
            let k = op.factor(t.rate);
            (k != Complex64::new(0.0, 0.0)).then(|| Term::new(t.amp * k, t.rate))
        })
        .collect();
    ExponentialSum::from_terms(terms)
}

/// Composition of annihilators; the factors multiply because the operators commute.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComposedAnnihilator {
    pub ops: Vec<Annihilator>,
}

impl ComposedAnnihilator {
    /// `I_{delta,-ir} I_{delta,omega} I_{delta,-conj(omega)} I_{delta,p} I_{delta,-conj(p)}`.
    pub fn for_mode(branch: &SpectralBranch, delta: f64) -> Result<Self> {
        Self::for_modes(std::slice::from_ref(branch), delta)
    }

    pub fn for_modes(branches: &[SpectralBranch], delta: f64) -> Result<Self> {
        let mut ops = Vec::with_capacity(5 * branches.len());
        for b in branches {
            for z in [-I * b.r, b.omega, -b.omega.conj(), b.p, -b.p.conj()] {
                ops.push(Annihilator::new(delta, z)?);
            }
        }
        Ok(ComposedAnnihilator { ops })
    }

    pub fn factor(&self, rate: Complex64) -> Complex64 {
        self.ops.iter().map(|op| op.factor(rate)).product()
    }

    pub fn apply(&self, f: &ExponentialSum) -> ExponentialSum {
        self.ops.iter().fold(f.clone(), |acc, op| annihilate(op, &acc))
    }
}

pub fn composed_annihilator(delta: f64, branch: &SpectralBranch) -> Result<ComposedAnnihilator> {
    ComposedAnnihilator::for_mode(branch, delta)
}

/// `2^5 (1 + e^{2|r| delta}) (1 + e^{2|Im omega| delta})^2 (1 + e^{2|Im p| delta})^2`, the
/// amplification of `int_0^{T + 5 delta} |f|^2` into `int_0^T |I f|^2`.
pub fn growth_bound(branch: &SpectralBranch, delta: f64) -> f64 {
    let f = |x: f64| 1.0 + (2.0 * x.abs() * delta).exp();
    32.0 * f(branch.r) * f(branch.omega.im).powi(2) * f(branch.p.im).powi(2)
}

/// `delta = min(eps / (5 n0), T0 / 8)`, nudged by `1e-3` until every survivor factor of the
/// composed annihilator of `low` exceeds `1e-12` in modulus.
pub fn select_delta(low: &[SpectralBranch], survivors: &[Complex64], epsilon: f64, n0: usize, t0: f64) -> Result<f64> {
    let mut delta = (epsilon / (5.0 * n0 as f64)).min(t0 / 8.0);
    for _ in 0..1000 {
        let op = ComposedAnnihilator::for_modes(low, delta)?;
        if survivors.iter().all(|&r| op.factor(r).norm() > 1e-12) {
            return Ok(delta);
        }
        delta += 1e-3;
    }
    Err(LabError::Precondition(
        "no admissible delta found within 1000 increments".into(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Slack {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

impl Slack {
    fn new(lhs: f64, rhs: f64) -> Self {
        Slack { lhs, rhs, slack: lhs - rhs }
    }
}

/// The three finite-deficiency lower bounds evaluated on one draw.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteDeficiencyReport {
    pub n0: usize,
    pub m: f64,
    pub alpha: f64,
    /// Sharp windowed wave constant of the truncated family, `min int k |F1|^2 / sum w_n |C_n|^2`.
    pub window_constant: f64,
    pub m1_hat: f64,
    pub t0: f64,
    pub delta: f64,
    pub c0: f64,
    /// Half the squared distance of the constant 1 from the span of `e^{eta t} e^{+-i p_n t}`.
    pub constant_coercivity: f64,
    /// `min_n 1/(pi^2 + 4 T^2 (Im p_n)^2) - 2/(T^2 M^2)`.
    pub positivity_min: f64,
    /// `int_0^T |u1|^2` against the wave lower bound minus the beam correction.
    pub first_component: Slack,
    /// `int_0^T |e^{eta t} G|^2` against the `|p_n|^4`-weighted beam sum.
    pub beam_component: Slack,
    /// `int_0^T |e^{eta t} G + calD|^2` against the beam sum plus `|calD|^2`.
    pub beam_with_constant: Slack,
}

/// Evaluates the finite-deficiency bounds on `coeffs`, whose modes below `n0` must vanish.
/// `m` plays the gap constant (usually `gamma_hat`), `alpha` the limit of `Im omega_n`.
#[allow(clippy::too_many_arguments)]
pub fn finite_deficiency_inverse(
    params: &ModelParams,
    branches: &[SpectralBranch],
    coeffs: &AbstractCoefficients,
    n0: usize,
    horizon: f64,
    epsilon: f64,
    m: f64,
    alpha: f64,
) -> Result<FiniteDeficiencyReport> {
    if n0 == 0 || n0 > branches.len() {
        return Err(LabError::InvalidInput(format!("n0 = {n0} outside the computed modes")));
    }
    for i in 0..n0 - 1 {
        if coeffs.c[i] != Complex64::new(0.0, 0.0) || coeffs.d[i] != Complex64::new(0.0, 0.0) {
            return Err(LabError::Precondition(format!(
                "mode {} must vanish below n0 = {n0}",
                i + 1
            )));
        }
    }
    if m <= 2.0 * PI / (horizon * (1.0 - epsilon)) {
        return Err(LabError::Precondition(format!(
            "M = {m} must exceed 2 pi / (T (1 - eps))"
        )));
    }
    let bs = &branches[n0 - 1..];
    let tail = AbstractCoefficients {
        c: coeffs.c[n0 - 1..].to_vec(),
        d: coeffs.d[n0 - 1..].to_vec(),
    };
    let t = horizon;
    let window = WindowSine { horizon: t }.as_expsum();
    let weight_c = |b: &SpectralBranch| 1.0 + (-2.0 * (b.omega.im - alpha) * t).exp();
    let beam_w = |b: &SpectralBranch| 1.0 + (-2.0 * b.p.im * t).exp();
    let resolution = |b: &SpectralBranch| 1.0 / (PI * PI + 4.0 * t * t * b.p.im * b.p.im);
    let gap_term = 2.0 / (t * t * m * m);

    // sharp windowed constant over the wave coordinates
    let mut wave_basis = Vec::new();
    let mut wave_weights = Vec::new();
    for b in bs {
        for cn in [c(1.0), I] {
            let mut f = ExponentialSum::new();
            f.push(c(cn.re / b.n as f64), c(b.r));
            f.push(cn, I * b.omega);
            f.push(cn.conj(), (I * b.omega).conj());
            wave_basis.push(f);
            wave_weights.push(weight_c(b));
        }
    }
    let k = wave_basis.len();
    let mut gw = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        let kf = {
            let mut acc = ExponentialSum::new();
            for term in window.terms() {
                acc.extend(&wave_basis[i].mul_exp(term.rate).scale(term.amp));
            }
            acc
        };
        for j in 0..k {
            gw[(i, j)] = kf.inner(&wave_basis[j], 0.0, t).re;
        }
    }
    let gw = (&gw + gw.transpose()) * 0.5;
    let window_constant = generalized_eigenvalues(&gw, &DMatrix::from_diagonal(&DVector::from_vec(wave_weights)))?.min();

    let u1 = tail.u1(bs);
    let first_lhs = u1.norm_sq(0.0, t);
    let c_sum: f64 = bs.iter().zip(&tail.c).map(|(b, cn)| weight_c(b) * cn.norm_sqr()).sum();
    let d_corr: f64 = bs
        .iter()
        .zip(&tail.d)
        .map(|(b, dn)| (resolution(b) + gap_term) * beam_w(b) * dn.norm_sqr())
        .sum();
    let first_component = Slack::new(first_lhs, 0.5 * window_constant * c_sum - 2.0 * PI * t * d_corr);

    let mut m1_hat = f64::INFINITY;
    for b in bs {
        m1_hat = m1_hat.min(compute_dn(params, b)?.norm() / b.p.norm_sqr());
    }
    let positivity_min = bs.iter().map(|b| resolution(b) - gap_term).fold(f64::INFINITY, f64::min);
    let d_sum: f64 = bs
        .iter()
        .zip(&tail.d)
        .map(|(b, dn)| (resolution(b) - gap_term) * beam_w(b) * dn.norm_sqr() * b.p.norm_sqr().powi(2))
        .sum();
    let eg = tail.beam_second(params, bs)?.mul_exp(c(params.eta));
    let beam_component = Slack::new(eg.norm_sq(0.0, t), 2.0 * PI * t * m1_hat * m1_hat * d_sum);

    let t0 = 2.0 * PI / m;
    let delta = 3.0 * t0 / 8.0;
    let sup_im_p = bs.iter().map(|b| b.p.im.abs()).fold(0.0, f64::max);
    let c0 = (delta - t0 / 4.0).powi(2) / (8.0 * delta * delta) * (-t0 * sup_im_p).exp() * m1_hat * m1_hat;
    let constant_coercivity = 0.5 * distance_sq_from_constant(params, bs, t)?;
    let cal_d = tail.cal_d(params, bs);
    let mut g1 = eg.clone();
    g1.push(c(cal_d), c(0.0));
    let beam_with_constant = Slack::new(
        g1.norm_sq(0.0, t),
        PI * c0 * t * d_sum + constant_coercivity * cal_d * cal_d,
    );

    Ok(FiniteDeficiencyReport {
        n0,
        m,
        alpha,
        window_constant,
        m1_hat,
        t0,
        delta,
        c0,
        constant_coercivity,
        positivity_min,
        first_component,
        beam_component,
        beam_with_constant,
    })
}

/// `min_D int_0^T |e^{eta t} G_D(t) + 1|^2`: squared distance of the constant from the span.
fn distance_sq_from_constant(params: &ModelParams, bs: &[SpectralBranch], horizon: f64) -> Result<f64> {
    let mut basis = Vec::new();
    for b in bs {
        let dn = compute_dn(params, b)?;
        for dv in [c(1.0), I] {
            let mut g = ExponentialSum::new();
            g.push(dn * dv, I * b.p + params.eta);
            g.push((dn * dv).conj(), (I * b.p).conj() + params.eta);
            let s = g.norm_sq(0.0, horizon).sqrt();
            basis.push(g.scale_re(1.0 / s));
        }
    }
    let one = ExponentialSum::constant(1.0);
    let k = basis.len();
    let mut g = DMatrix::<f64>::zeros(k, k);
    let mut rhs = DVector::<f64>::zeros(k);
    for i in 0..k {
        rhs[i] = basis[i].inner(&one, 0.0, horizon).re;
        for j in 0..k {
            g[(i, j)] = basis[i].inner(&basis[j], 0.0, horizon).re;
        }
    }
    let sol = g
        .clone()
        .cholesky()
        .ok_or_else(|| LabError::Conditioning {
            what: "beam family".into(),
            detail: "Gram matrix not positive definite".into(),
        })?
        .solve(&rhs);
    Ok(horizon - rhs.dot(&sol))
}

/// Random exponential sum with `terms` terms, frequencies `z'` with real part in
/// `[-10, 10]` and imaginary part in `[-0.5, 0.5]`.
pub fn random_expsum(terms: usize, seed: u64) -> ExponentialSum {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = ExponentialSum::new();
    for _ in 0..terms {
        let z = Complex64::new(rng.random_range(-10.0..10.0), rng.random_range(-0.5..0.5));
        let a = complex_normal(&mut rng);
        f.push(a, I * z);
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{solve_spectrum, validate_hypotheses};

    #[test]
    fn window_transforms_at_zero() {
        let s = WindowSine { horizon: 7.0 };
        assert!((s.transform(c(0.0)).re - 14.0 / PI).abs() < 1e-14);
        let r = window_transform_identity_check(&Window::Sine(s), Complex64::new(1.0, 0.3)).unwrap();
        assert!(r < 1e-10, "{r}");
        let u = Complex64::new(0.7, -0.4);
        assert!((s.kernel(u).norm() - s.kernel(u.conj()).norm()).abs() < 1e-15);
        let pole = Complex64::new(PI / 7.0, 0.0);
        assert!(window_transform_identity_check(&Window::Sine(s), pole).is_err());
    }

    #[test]
    fn annihilator_kills_its_exponential() {
        let z = Complex64::new(2.0, 0.3);
        let op = Annihilator::new(0.4, z).unwrap();
        let f = ExponentialSum::from_terms(vec![Term::new(c(1.0), I * z)]);
        assert!(annihilate(&op, &f).is_empty());
        for t in [0.0, 1.0, 2.5] {
            assert!(op.apply_numeric(&f, t).norm() < 1e-12);
        }
        // constant term: factor 1 - (e^{-i z delta} - 1)/(-i z delta)
        let k = op.factor(c(0.0));
        let w = -I * z * 0.4;
        assert!((k - (1.0 - (w.exp() - 1.0) / w)).norm() < 1e-14);
    }

    #[test]
    fn single_mode_inverse_ratio_matches_closed_form() {
        let params = ModelParams::default();
        let bs = solve_spectrum(&params, 1).unwrap();
        let forms = ingham_forms(&params, &bs, 7.0).unwrap();
        let x = DVector::from_vec(vec![0.3, -0.8, 0.0, 0.0]);
        let (inv, _) = forms.ratios(&x);
        let coeffs = AbstractCoefficients {
            c: vec![Complex64::new(0.3, -0.8)],
            d: vec![c(0.0)],
        };
        let direct = coeffs.u1(&bs).norm_sq(0.0, 7.0) / coeffs.c[0].norm_sqr();
        assert!((inv - direct).abs() < 1e-12 * direct);
        assert!(inv > 0.0);
    }

    #[test]
    fn gram_ratio_matches_synthesis() {
        let params = ModelParams::default();
        let bs = solve_spectrum(&params, 6).unwrap();
        let forms = ingham_forms(&params, &bs, 7.0).unwrap();
        let coeffs = AbstractCoefficients::random(&bs, 1, 5);
        let mut x = Vec::new();
        for (b, (cn, dn)) in bs.iter().zip(coeffs.c.iter().zip(&coeffs.d)) {
            let s = b.p.norm_sqr();
            x.extend([cn.re, cn.im, dn.re * s, dn.im * s]);
        }
        let (inv, dir) = forms.ratios(&DVector::from_vec(x));
        let u1 = coeffs.u1(&bs);
        let u2 = coeffs.u2(&params, &bs).unwrap();
        let norm = coeffs.coefficient_norm_sq(&bs);
        let cal = coeffs.cal_d(&params, &bs);
        let inv_direct = (u1.norm_sq(0.0, 7.0) + u2.norm_sq(0.0, 7.0)) / (norm + cal * cal);
        let dir_direct = (u1.norm_sq(-7.0, 7.0) + u2.norm_sq(-7.0, 7.0)) / norm;
        assert!((inv - inv_direct).abs() < 1e-10 * inv_direct);
        assert!((dir - dir_direct).abs() < 1e-10 * dir_direct);
    }

    #[test]
    fn estimates_respect_exact_envelope() {
        let params = ModelParams::default();
        let bs = solve_spectrum(&params, 8).unwrap();
        let hyp = validate_hypotheses(&params, &bs);
        let est = ingham_estimates(&params, &bs, &hyp, 7.0, 200, 1).unwrap();
        assert!(est.c1_exact > 0.0 && est.c1_exact <= est.c1_hat);
        assert!(est.c2_hat <= est.c2_exact * (1.0 + 1e-12));
        assert!(ingham_estimates(&params, &bs, &hyp, 5.0, 200, 1).is_err());
    }
}
