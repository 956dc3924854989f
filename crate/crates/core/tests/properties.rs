use proptest::prelude::*;
use sps::oracle::sup_error;
use sps::series::build_coefficients_with;
use sps::{
    build_coefficients, fit_sum, integrate, residual_spectrum, LogisticParams, Matrix, Spectral, System,
    TruncationSpec,
};

/// Competitive systems `A = −D + εB` with a chosen positive equilibrium.
fn competitive() -> impl Strategy<Value = (System, Vec<f64>)> {
    (
        prop::collection::vec(0.5f64..3.0, 2),
        prop::collection::vec(-0.4f64..0.0, 2),
        prop::collection::vec(0.5f64..2.5, 2),
    )
        .prop_map(|(d, off, c)| {
            let a = Matrix::from_rows(&[vec![-d[0], off[0]], vec![off[1], -d[1]]]).unwrap();
            let b: Vec<f64> = a.matvec(&c).iter().map(|x| -x).collect();
            (System::new(a, b, None).unwrap(), c)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn recursion_leaves_no_in_truncation_residual((s, _) in competitive()) {
        let Ok(sp) = Spectral::analyze(&s) else { return Ok(()) };
        let trunc = TruncationSpec::PerIndex(3);
        let Ok(unit) = build_coefficients(&s, &sp, trunc) else { return Ok(()) };
        let scale = unit.iter().fold(1.0f64, |m, (_, v)| v.iter().fold(m, |m, x| m.max(x.abs())));
        for (n, r) in residual_spectrum(&s, &unit).unwrap() {
            if trunc.admits(n.components()) {
                prop_assert!(r.iter().all(|x| x.abs() <= 1e-9 * scale), "{:?}: {:?}", n, r);
            }
        }
    }

    #[test]
    fn free_parameters_enter_as_monomials(
        (s, _) in competitive(),
        p in prop::collection::vec(-3.0f64..3.0, 2),
    ) {
        let Ok(sp) = Spectral::analyze(&s) else { return Ok(()) };
        let trunc = TruncationSpec::TotalDegree(5);
        let Ok(unit) = build_coefficients(&s, &sp, trunc) else { return Ok(()) };
        let direct = build_coefficients_with(&s, &sp, trunc, &p).unwrap();
        let scaled = unit.scale_free_parameters(&p);
        for (n, v) in direct.iter() {
            let w = scaled.get(n).unwrap();
            let size = v.iter().chain(&w).fold(f64::MIN_POSITIVE, |m, x| m.max(x.abs()));
            for (a, b) in v.iter().zip(&w) {
                prop_assert!((a - b).abs() <= 1e-10 * size, "{:?}: {:?} vs {:?}", n, v, w);
            }
        }
    }

    #[test]
    fn small_perturbations_are_resolved(
        (s, c) in competitive(),
        dir in prop::collection::vec(-1.0f64..1.0, 2),
    ) {
        let Ok(sp) = Spectral::analyze(&s) else { return Ok(()) };
        let x0: Vec<f64> = c.iter().zip(&dir).map(|(ci, d)| ci * (1.0 + 0.05 * d)).collect();
        let Ok(unit) = build_coefficients(&s, &sp, TruncationSpec::PerIndex(6)) else { return Ok(()) };
        let fit = fit_sum(&unit, &x0, 0.0).unwrap();
        let series = unit.scale_free_parameters(&fit.p);
        let at0 = series.evaluate(0.0).unwrap();
        for (a, b) in at0.iter().zip(&x0) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        let tr = integrate(&s, &x0, 5.0, 1e-3).unwrap();
        prop_assert!(sup_error(&tr, 0.0, |t| series.evaluate(t)).unwrap() <= 1e-6);
    }

    #[test]
    fn logistic_series_converges_past_t0(r in 0.2f64..3.0, k in 0.5f64..5.0, frac in 0.05f64..3.0) {
        let l = LogisticParams::new(r, k, frac * k).unwrap();
        // past t0 + 1/(2r) the geometric ratio is at most e^{-1/2}
        let t = l.t0_exact() + 0.5 / r;
        let err = (l.series_value(200, t) - l.closed_form(t)).abs();
        prop_assert!(err <= 1e-8 * k, "err {err} at t {t}");
    }
}
