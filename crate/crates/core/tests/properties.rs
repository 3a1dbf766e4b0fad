use approx::assert_relative_eq;
use num_complex::Complex64;
use proptest::prelude::*;

use quasilocal_core::embedding::Lorentz;
use quasilocal_core::foliation::Schedule;
use quasilocal_core::mass::{extrapolate_tail, identity_check, monotonicity_check};
use quasilocal_core::minkowski::{causal_class, polar_normal, polar_param, FourVector, HyperboloidPoint};
use quasilocal_core::spinor::{killing_norm_expansion, killing_norm_sq, zeta, zeta_clifford, CliffordRep, Spinor};

fn spinor() -> impl Strategy<Value = Spinor> {
    prop::array::uniform4(-2.0f64..2.0)
        .prop_filter("nonzero", |c| c.iter().any(|v| v.abs() > 1e-3))
        .prop_map(|c| Spinor::new(Complex64::new(c[0], c[1]), Complex64::new(c[2], c[3])))
}

proptest! {
    #[test]
    fn lapse_identity_vanishes(u in 0.05f64..20.0, rr in -5.0f64..50.0, kappa in 0.01f64..5.0) {
        let k2 = kappa * kappa;
        let scale = (rr.abs() + 6.0 * k2) * (u + 1.0 / u) * (1.0 + u);
        prop_assert!(identity_check(u, rr, kappa).abs() <= 1e-14 * scale);
    }

    #[test]
    fn zeta_is_future_null(a in spinor()) {
        let z = zeta(&a);
        prop_assert!(z.norm_sq().abs() <= 1e-13 * z.t * z.t);
        assert_relative_eq!(z.t, a.norm_sq(), max_relative = 1e-14);
        let c = zeta_clifford(&a, &CliffordRep::default());
        prop_assert!((z - c).max_abs() <= 1e-13 * z.t);
    }

    #[test]
    fn zeta_ignores_phase_and_scales_quadratically(a in spinor(), phi in 0.0f64..6.3, lam in 0.1f64..3.0) {
        let e = Complex64::from_polar(lam, phi);
        let b = Spinor::new(a.a1 * e, a.a2 * e);
        let (za, zb) = (zeta(&a), zeta(&b));
        prop_assert!((zb - za * (lam * lam)).max_abs() <= 1e-12 * zb.t);
    }

    #[test]
    fn null_direction_round_trip(th in 0.0f64..std::f64::consts::PI, ps in 0.0f64..6.3) {
        let y = [th.cos(), th.sin() * ps.cos(), th.sin() * ps.sin()];
        let z = zeta(&Spinor::from_null_direction(y));
        prop_assert!((z - FourVector::new(y[0], y[1], y[2], 1.0)).max_abs() <= 1e-12);
    }

    #[test]
    fn polar_frame_is_orthonormal(r in 0.0f64..6.0, th in 0.0f64..3.14, ps in 0.0f64..6.3, kappa in 0.1f64..3.0) {
        let x = polar_param(r, th, ps, kappa);
        let n = polar_normal(r, th, ps, kappa);
        let s = (kappa * x.t).powi(2);
        prop_assert!((kappa * kappa * x.norm_sq() + 1.0).abs() <= 1e-12 * s);
        prop_assert!(x.dot(&n).abs() <= 1e-12 * s / kappa);
        prop_assert!((n.norm_sq() - 1.0).abs() <= 1e-12 * s);
        let origin = HyperboloidPoint::new(FourVector::new(0.0, 0.0, 0.0, 1.0 / kappa), kappa).unwrap();
        let p = HyperboloidPoint::new(x, kappa).unwrap();
        prop_assert!((origin.distance(&p) - r).abs() <= 1e-7 * (1.0 + r));
    }

    #[test]
    fn killing_norm_forms_agree(a in spinor(), r in 0.0f64..4.0, th in 0.0f64..3.14, ps in 0.0f64..6.3, kappa in 0.2f64..2.0) {
        let x = polar_param(r, th, ps, kappa);
        let lin = killing_norm_sq(&a, &x, kappa).unwrap();
        let exp = killing_norm_expansion(&a, r, th, ps, kappa);
        prop_assert!(lin > 0.0);
        prop_assert!((lin - exp).abs() <= 1e-11 * lin.max(a.norm_sq() * (kappa * r).cosh()));
    }

    #[test]
    fn lorentz_maps_preserve_the_metric(g in prop::array::uniform6(-0.8f64..0.8), v in prop::array::uniform4(-3.0f64..3.0), w in prop::array::uniform4(-3.0f64..3.0)) {
        let l = Lorentz::from_generators(&g);
        let (v, w) = (FourVector::from_array(v), FourVector::from_array(w));
        let (lv, lw) = (l.apply(&v), l.apply(&w));
        let scale = 1.0 + lv.max_abs() * lw.max_abs() + v.max_abs() * w.max_abs();
        prop_assert!((lv.dot(&lw) - v.dot(&w)).abs() <= 1e-12 * scale);
    }

    #[test]
    fn future_timelike_vectors_classify(x in prop::array::uniform3(-1.0f64..1.0), extra in 0.01f64..2.0) {
        let t = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt() + extra;
        let v = FourVector::new(x[0], x[1], x[2], t);
        prop_assert!(causal_class(&v, 1e-12).is_future_causal());
        prop_assert!(!causal_class(&(-v), 1e-12).is_future_causal());
    }

    #[test]
    fn blended_schedule_is_well_formed(kappa in 0.02f64..4.0, length in 0.1f64..5.0, extra in 0.0f64..6.0, steps in 16usize..300) {
        let r_max = (2.0 + extra) / kappa;
        let s = Schedule::blended(kappa, length, r_max, steps).unwrap();
        prop_assert_eq!(s.len(), steps + 1);
        prop_assert_eq!(s.r[0], 0.0);
        prop_assert_eq!(s.r_max(), r_max);
        prop_assert!(s.r.windows(2).all(|w| w[1] > w[0]));
        for k in 0..s.len() {
            assert_relative_eq!(s.s[k], (-2.0 * kappa * s.r[k]).exp(), max_relative = 1e-14);
            assert_relative_eq!(s.t(k), -s.tau(k));
        }
    }

    #[test]
    fn uniform_t_schedule_has_equal_steps(kappa in 0.05f64..4.0, extra in 0.0f64..6.0, steps in 16usize..300) {
        let s = Schedule::uniform_in_t(kappa, (2.0 + extra) / kappa, steps).unwrap();
        let dt: Vec<f64> = (0..steps).map(|k| s.t(k + 1) - s.t(k)).collect();
        prop_assert!(dt.iter().all(|d| (d - dt[0]).abs() <= 1e-12 * dt[0].abs().max(1e-300) + 1e-15 / kappa));
    }

    #[test]
    fn decreasing_profiles_are_monotone(start in -10.0f64..10.0, drops in prop::collection::vec(0.0f64..1.0, 3..60)) {
        let mut m = vec![start];
        for d in &drops {
            m.push(m.last().unwrap() - d);
        }
        prop_assert!(monotonicity_check(&m, 1e-12).unwrap().pass);
        let k = drops.len() / 2;
        m[k + 1] = m[k] + 1e-3 * (1.0 + m[k].abs());
        prop_assert!(!monotonicity_check(&m, 1e-6).unwrap().pass);
    }

    #[test]
    fn tail_extrapolation_is_exact_for_lines_in_sigma(c0 in -5.0f64..5.0, c1 in -5.0f64..5.0, s1 in 0.01f64..0.5, ratio in 0.1f64..0.9) {
        let s = [s1, s1 * ratio * ratio];
        let y: Vec<f64> = s.iter().map(|v| c0 + c1 * v.sqrt()).collect();
        prop_assert!((extrapolate_tail(&s, &y) - c0).abs() <= 1e-12 * (1.0 + c0.abs() + c1.abs()));
    }
}
