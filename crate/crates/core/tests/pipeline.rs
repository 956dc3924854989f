use approx::assert_abs_diff_eq;
use sps::oracle::sup_error;
use sps::{
    build_coefficients, certificate, emit_system, fit_sum, integrate, parse_system, CertificateOptions,
    LogisticParams, Reduced, Spectral, SpectralData, System, System32, TruncationSpec,
};

const THREE: &str = r#"{
    "A": [[-2, -0.3, -0.1], [-0.2, -2, -0.1], [-0.1, -0.4, -2]],
    "b": [2, 2.5, 3],
    "x0": [1.5, 1, 1.5],
    "truncation": {"per_index": 3}
}"#;

#[test]
fn file_to_series_to_oracle() {
    let file = parse_system::<f64>(THREE).unwrap();
    let system = file.system;
    let x0 = system.x0().unwrap().to_vec();
    let sp = Spectral::analyze(&system).unwrap();
    let unit = build_coefficients(&system, &sp, file.truncation.unwrap()).unwrap();
    let fit = fit_sum(&unit, &x0, 0.0).unwrap();
    let series = unit.scale_free_parameters(&fit.p);
    assert_abs_diff_eq!(series.evaluate(0.0).unwrap().as_slice(), x0.as_slice(), epsilon = 1e-9);
    let tr = integrate(&system, &x0, 10.0, 1e-3).unwrap();
    assert!(sup_error(&tr, 1.0, |t| series.evaluate(t)).unwrap() < 5e-2);
    assert!(sup_error(&tr, 5.0, |t| series.evaluate(t)).unwrap() < 1e-3);
}

#[test]
fn emitted_file_parses_back() {
    let file = parse_system::<f64>(THREE).unwrap();
    let again = parse_system::<f64>(&emit_system(&file)).unwrap();
    assert_eq!(file, again);
}

#[test]
fn single_precision_tracks_double() {
    let file = parse_system::<f64>(THREE).unwrap();
    let x0 = file.system.x0().unwrap().to_vec();
    let s64 = file.system.clone();
    let s32: System32 = file.system.cast();
    let sp64 = Spectral::analyze(&s64).unwrap();
    let sp32 = SpectralData::analyze(&s32).unwrap();
    let trunc = TruncationSpec::PerIndex(2);
    let u64_ = build_coefficients(&s64, &sp64, trunc).unwrap();
    let u32_ = build_coefficients(&s32, &sp32, trunc).unwrap();
    let x0_32: Vec<f32> = x0.iter().map(|&v| v as f32).collect();
    let p64 = fit_sum(&u64_, &x0, 0.0).unwrap().p;
    let p32 = fit_sum(&u32_, &x0_32, 0.0).unwrap().p;
    for (a, b) in p64.iter().zip(&p32) {
        assert!((a - *b as f64).abs() < 1e-3, "{p64:?} vs {p32:?}");
    }
    let y64 = u64_.scale_free_parameters(&p64).evaluate(2.0).unwrap();
    let y32 = u32_.scale_free_parameters(&p32).evaluate(2.0).unwrap();
    for (a, b) in y64.iter().zip(&y32) {
        assert!((a - *b as f64).abs() < 1e-4);
    }
}

#[test]
fn corrected_model_feeds_the_series_machinery() {
    let file = parse_system::<f64>(THREE).unwrap();
    let reduced = Reduced::new(&file.system, 2).unwrap();
    let small = reduced.system().unwrap();
    let sp = Spectral::analyze(&small).unwrap();
    for (a, b) in sp.lambda.iter().zip(&reduced.lambda_hat) {
        assert!((a - b).abs() < 1e-10);
    }
    let unit = build_coefficients(&small, &sp, TruncationSpec::PerIndex(3)).unwrap();
    let fit = fit_sum(&unit, &[1.0, 1.0], 0.0).unwrap();
    let tr = integrate(&small, &[1.0, 1.0], 10.0, 1e-3).unwrap();
    let series = unit.scale_free_parameters(&fit.p);
    assert!(sup_error(&tr, 1.0, |t| series.evaluate(t)).unwrap() < 5e-2);
}

#[test]
fn logistic_certificate_is_cheap_and_complete() {
    let l = LogisticParams::new(1.0, 1.0, 0.75).unwrap();
    let s: System = l.as_system();
    let sp = Spectral::analyze(&s).unwrap();
    let cert = certificate(&s, &sp, Some(&[l.alpha1()]), &CertificateOptions::default()).unwrap();
    assert!(!cert.partial);
    let v: serde_json::Value = serde_json::from_str(&cert.to_json()).unwrap();
    for key in [
        "n0",
        "n1",
        "n2",
        "k",
        "t0",
        "k_unit",
        "t0_unit",
        "delta",
        "opnorm_a",
        "opnorm_j",
        "opnorm_inverse_bound",
        "lambda1",
        "free_params",
        "degree_scanned",
        "partial",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    // the bound dominates the exact geometric growth |α₁/k|
    assert!(cert.k >= (l.alpha1() / l.k).abs() - 1e-12);
}
