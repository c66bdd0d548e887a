use proptest::prelude::*;
use wpreach_core::ingham::{annihilate, Annihilator};
use wpreach_core::modal::{solve_vandermonde_bp, solve_vandermonde_gauss};
use wpreach_core::{Complex64, ExponentialSum, FinalData, ModelParams, Term};

fn c64() -> impl Strategy<Value = Complex64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

fn expsum() -> impl Strategy<Value = ExponentialSum> {
    prop::collection::vec((c64(), (-1.0..0.5f64, -6.0..6.0f64)), 1..6).prop_map(|v| {
        ExponentialSum::from_terms(
            v.into_iter()
                .map(|(a, (re, im))| Term::new(a, Complex64::new(re, im)))
                .collect(),
        )
    })
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sum_is_linear(f in expsum(), g in expsum(), c in c64(), t in 0.0..7.0f64) {
        let lhs = f.scale(c).add(&g).eval(t);
        prop_assert!(rel(lhs, c * f.eval(t) + g.eval(t)) < 1e-12);
    }

    #[test]
    fn reflect_and_shift(f in expsum(), t in 0.0..7.0f64, s in 0.0..2.0f64) {
        prop_assert!(rel(f.reflect(7.0).eval(t), f.eval(7.0 - t)) < 1e-12);
        prop_assert!(rel(f.shift(s).eval(t), f.eval(t + s)) < 1e-12);
        prop_assert!(rel(f.reflect(7.0).reflect(7.0).eval(t), f.eval(t)) < 1e-12);
    }

    #[test]
    fn closed_form_integral_matches_derivative(f in expsum()) {
        let d = f.derivative();
        prop_assert!(rel(d.integral(0.0, 3.0), f.eval(3.0) - f.eval(0.0)) < 1e-11);
    }

    #[test]
    fn cauchy_schwarz(f in expsum(), g in expsum()) {
        let ip = f.inner(&g, 0.0, 5.0).norm();
        prop_assert!(ip <= (f.norm_sq(0.0, 5.0) * g.norm_sq(0.0, 5.0)).sqrt() * (1.0 + 1e-10) + 1e-12);
    }

    #[test]
    fn annihilators_commute(
        f in expsum(),
        d1 in 0.05..0.6f64,
        d2 in 0.05..0.6f64,
        z1 in c64(),
        z2 in c64(),
        t in 0.0..5.0f64,
    ) {
        let a = Annihilator::new(d1, z1).unwrap();
        let b = Annihilator::new(d2, z2).unwrap();
        let ab = annihilate(&a, &annihilate(&b, &f)).eval(t);
        let ba = annihilate(&b, &annihilate(&a, &f)).eval(t);
        prop_assert!((ab - ba).norm() <= 1e-10 * (1.0 + ab.norm()));
    }

    #[test]
    fn annihilator_kills_its_exponential(d in 0.05..0.6f64, z in c64(), amp in c64()) {
        let a = Annihilator::new(d, z).unwrap();
        let f = ExponentialSum::from_terms(vec![Term::new(amp, Complex64::new(0.0, 1.0) * z)]);
        prop_assert!(annihilate(&a, &f).is_empty());
    }

    #[test]
    fn vandermonde_round_trip(xs in prop::collection::vec(c64(), 5), ys in prop::collection::vec(c64(), 5)) {
        let x: [Complex64; 5] = xs.clone().try_into().unwrap();
        let y: [Complex64; 5] = ys.try_into().unwrap();
        let min_gap = (0..5)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| (x[i] - x[j]).norm())
            .fold(f64::INFINITY, f64::min);
        prop_assume!(min_gap > 0.3);
        let bp = solve_vandermonde_bp(&x, &y).unwrap();
        let ge = solve_vandermonde_gauss(&x, &y).unwrap();
        for (k, yk) in y.iter().enumerate() {
            let back: Complex64 = bp.iter().enumerate().map(|(j, c)| c * x[j].powi(k as i32)).sum();
            prop_assert!((back - yk).norm() < 1e-8 * (1.0 + y.iter().map(|v| v.norm()).sum::<f64>()));
        }
        for j in 0..5 {
            prop_assert!((bp[j] - ge[j]).norm() < 1e-6 * (1.0 + ge[j].norm()));
        }
    }

    #[test]
    fn params_reject_memory_at_or_above_decay(eta in 0.1..3.0f64, excess in 0.0..1.0f64) {
        prop_assert!(ModelParams::new(eta + excess, eta, 0.1, 0.1, 4, 7.0).is_err());
    }

    #[test]
    fn final_data_round_trips_through_json(seed in 0u64..1000, modes in 1usize..12) {
        let d = FinalData::random(modes, seed);
        let s = serde_json::to_string(&d).unwrap();
        let back: FinalData = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(d, back);
    }
}
