use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use proptest::prelude::*;

use dsrn_core::geometry::{horizon_roots, metric_f, RwMap};
use dsrn_core::inverse::{b_operator_recovery, kappa_from_ratios, Coefficient, ReflectionDataset};
use dsrn_core::jost::transfer_sweep;
use dsrn_core::par;
use dsrn_core::qd::Qd;
use dsrn_core::scattering::ScatteringTriple;
use dsrn_core::specialfn::{bessel_i, bessel_i_prime, complex_gamma};
use dsrn_core::{translate_gauge, BlackHoleParams, Complex64, Method, PotentialModel};

fn valid_params() -> impl Strategy<Value = BlackHoleParams> {
    (0.5f64..2.0, 0.0f64..0.8, 0.005f64..0.12).prop_filter_map("not a dS-RN exterior", |(m, qf, l)| {
        let p = BlackHoleParams::from_q2(m, qf * m * m, l).ok()?;
        horizon_roots(&p).ok().map(|_| p)
    })
}

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

fn qd_value(q: Qd) -> BigRational {
    q.0.iter().fold(BigRational::zero(), |acc, &c| acc + rational(c))
}

fn rel_gap(exact: &BigRational, q: Qd) -> f64 {
    if exact.is_zero() {
        return qd_value(q).abs().to_f64().unwrap();
    }
    ((qd_value(q) - exact) / exact).abs().to_f64().unwrap()
}

fn qd_from(parts: (f64, f64, f64)) -> Qd {
    Qd::from_f64(parts.0).add_qd(Qd::from_f64(parts.1)).add_qd(Qd::from_f64(parts.2))
}

fn qd_parts() -> impl Strategy<Value = (f64, f64, f64)> {
    (-1e3f64..1e3, -1e-14f64..1e-14, -1e-29f64..1e-29)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn qd_sum_is_exact_to_212_bits(a in qd_parts(), b in qd_parts()) {
        let (x, y) = (qd_from(a), qd_from(b));
        let exact = qd_value(x) + qd_value(y);
        prop_assert!(rel_gap(&exact, x.add_qd(y)) < 1e-60);
    }

    #[test]
    fn qd_product_is_exact_to_200_bits(a in qd_parts(), b in qd_parts()) {
        let (x, y) = (qd_from(a), qd_from(b));
        let exact = qd_value(x) * qd_value(y);
        prop_assert!(rel_gap(&exact, x.mul_qd(y)) < 1e-60);
    }

    #[test]
    fn qd_scalar_product(a in qd_parts(), s in -1e6f64..1e6) {
        let x = qd_from(a);
        let exact = qd_value(x) * rational(s);
        prop_assert!(rel_gap(&exact, x.mul_f64(s)) < 1e-60);
    }

    #[test]
    fn horizons_are_ordered_roots(p in valid_params()) {
        let h = horizon_roots(&p).unwrap();
        let [rn, rc, rm, rp] = h.roots();
        prop_assert!(rn < 0.0 && 0.0 < rc && rc < rm && rm < rp);
        let scale = p.poly_coeffs().iter().fold(1.0f64, |m, c| m.max(c.abs()));
        for r in h.roots() {
            prop_assert!(p.poly(r).abs() <= 1e-12 * scale * r.abs().max(1.0).powi(4));
        }
        prop_assert!(metric_f(&p, 0.5 * (rm + rp)).unwrap() > 0.0);
        prop_assert!(h.kappa_minus > 0.0 && h.kappa_plus < 0.0);
    }

    #[test]
    fn tortoise_round_trip(p in valid_params(), frac in -1.0f64..1.0) {
        let map = RwMap::new(p, 0.0).unwrap();
        let h = horizon_roots(&p).unwrap();
        let x = if frac < 0.0 { frac * 50.0 / h.kappa_minus } else { frac * 50.0 / -h.kappa_plus };
        let pt = map.point_of_x(x).unwrap();
        let back = map.x_of_point(&pt);
        prop_assert!((back - x).abs() <= 1e-10 * (1.0 + x.abs()), "x = {x}, back = {back}");
        // Through the bare radius wherever it still resolves the horizons.
        if pt.to_minus.min(pt.to_plus) > 1e-6 * pt.r {
            let back = map.rw_x(pt.r).unwrap();
            prop_assert!((back - x).abs() <= 1e-8 * (1.0 + x.abs()), "x = {x}, back = {back}");
        }
    }

    #[test]
    fn gamma_functional_equation(re in -5.0f64..5.0, im in -50.0f64..50.0) {
        let w = Complex64::new(re, im);
        prop_assume!(w.norm() > 1e-3 && (w.re.fract().abs() > 1e-3 || w.im.abs() > 1e-3));
        let lhs = complex_gamma(w + 1.0).unwrap();
        let rhs = w * complex_gamma(w).unwrap();
        prop_assert!(((lhs / rhs) - 1.0).norm() < 1e-12);
    }

    #[test]
    fn bessel_derivative_recurrence(nu_re in -2.0f64..2.0, nu_im in -3.0f64..3.0, x in 0.1f64..40.0) {
        let nu = Complex64::new(nu_re, nu_im);
        let m = -nu;
        let lhs = 2.0 * bessel_i_prime(m, x).unwrap();
        let rhs = bessel_i(m - 1.0, x).unwrap() + bessel_i(m + 1.0, x).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-10 * rhs.norm().max(1.0));
    }

    #[test]
    fn gauge_translation_composes(
        t in 0.0f64..1.0, phase in -3.0f64..3.0, lambda in -3.0f64..3.0,
        c1 in -10.0f64..10.0, c2 in -10.0f64..10.0,
    ) {
        let l = Complex64::from_polar((1.0 - t * t).sqrt(), phase);
        let s = ScatteringTriple {
            lambda,
            z: Complex64::new(2.0, 0.0),
            t: Complex64::new(t, 0.0),
            r: -l.conj(),
            l,
            method: Method::Series,
        };
        let twice = translate_gauge(&translate_gauge(&s, c1), c2);
        let once = translate_gauge(&s, c1 + c2);
        prop_assert!((twice.l - once.l).norm() < 1e-14 * (1.0 + lambda.abs() * (c1.abs() + c2.abs())));
        prop_assert!((twice.r - once.r).norm() < 1e-14 * (1.0 + lambda.abs() * (c1.abs() + c2.abs())));
        prop_assert_eq!(twice.t, s.t);
        prop_assert!((twice.unitarity_defect() - s.unitarity_defect()).abs() < 1e-14);
    }

    #[test]
    fn exact_law_kappa_for_every_p(
        kappa in 0.05f64..1.0, lambda in 0.2f64..2.0, p in 2u32..5, g in -3.0f64..3.0,
    ) {
        let gamma = Complex64::from_polar(0.9, g);
        let entries: Vec<(f64, Complex64)> = (1..=400)
            .map(|n| {
                let n = n as f64;
                (n, gamma * Complex64::from_polar(1.0, -2.0 * lambda / kappa * n.ln()))
            })
            .collect();
        let data = ReflectionDataset::new(lambda, Coefficient::L, entries).unwrap();
        let est = kappa_from_ratios(&data, p).unwrap();
        prop_assert!((est.kappa / kappa - 1.0).abs() < 1e-11, "{} vs {kappa}", est.kappa);
    }

    #[test]
    fn parallel_map_matches_sequential(v in prop::collection::vec(-1e6f64..1e6, 0..300)) {
        let f = |x: &f64| (x.sin() * 3.0, x.to_bits());
        prop_assert_eq!(par::map(&v, f), par::map_sequential(&v, f));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn b_recovery_is_exact_and_point_independent(p in valid_params(), x0 in -3.0f64..3.0, x1 in 3.0f64..6.0) {
        let model = PotentialModel::new(p, 0.0).unwrap();
        let a = b_operator_recovery(&model, x0).unwrap();
        let b = b_operator_recovery(&model, x1).unwrap();
        let q_scale = p.mass * p.mass;
        prop_assert!((a.mass / p.mass - 1.0).abs() < 1e-9);
        prop_assert!((a.q_squared - p.q2()).abs() < 1e-9 * q_scale);
        prop_assert!((a.lambda / p.lambda - 1.0).abs() < 1e-8);
        prop_assert!((a.mass - b.mass).abs() < 1e-9 * p.mass);
        prop_assert!((a.q_squared - b.q_squared).abs() < 1e-9 * q_scale);
        prop_assert!(a.q_squared >= 0.0);
    }

    #[test]
    fn parity_conjugation_and_det(
        p in valid_params(), lambda in -2.0f64..2.0, re in 0.05f64..2.5, im in -2.5f64..2.5,
    ) {
        let model = PotentialModel::new(p, 0.0).unwrap();
        let z = Complex64::new(re, im);
        let zs = [z, -z, z.conj()];
        for method in [Method::Series, Method::Ode] {
            let m = transfer_sweep(&model, lambda, &zs, method).unwrap();
            let scale = (model.total_a() * re).exp();
            let tol = 1e-9 * scale;
            prop_assert!((m[0].a_l1() - m[1].a_l1()).norm() < tol);
            prop_assert!((m[0].a_l3() + m[1].a_l3()).norm() < tol);
            prop_assert!((m[0].a_l1() - m[2].a_l4().conj()).norm() < tol);
            prop_assert!((m[0].a_l2() - m[2].a_l3().conj()).norm() < tol);
            prop_assert!((m[0].det() - 1.0).norm() < 1e-9 * scale * scale);
        }
    }
}

#[test]
fn big_rational_oracle_sanity() {
    let third = Qd::from_f64(1.0).add_qd(Qd::from_f64(-2.0 / 3.0));
    let exact = BigRational::new(BigInt::from(1), BigInt::from(1)) - rational(2.0 / 3.0);
    assert!(rel_gap(&exact, third) == 0.0);
}
