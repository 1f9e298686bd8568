use sbheom::bath::{
    matsubara_decomposition, pade_decomposition, quadrature_reference, reconstruction_error, BathSpec,
};

fn reference_bath() -> BathSpec {
    BathSpec::new(0.3, 1.0, 25.0).unwrap()
}

fn relative_error(n_pade: usize, t_min: f64) -> f64 {
    let spec = reference_bath();
    let reference = quadrature_reference(&spec, t_min, 20.0, 60).unwrap();
    let scale = reference.iter().map(|(_, c)| c.norm()).fold(0.0, f64::max);
    reconstruction_error(&pade_decomposition(&spec, n_pade).unwrap(), &reference) / scale
}

#[test]
fn pade_error_shrinks_with_pole_count() {
    let errs: Vec<f64> = [5, 10, 20, 40].iter().map(|&n| relative_error(n, 0.05)).collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(errs[3] < 2e-4, "{errs:?}");
}

// Re C(t) is log-singular at t → 0, so the error concentrates at short times.
#[test]
fn pade_is_accurate_away_from_the_origin() {
    assert!(relative_error(10, 0.5) < 1e-2);
    assert!(relative_error(20, 0.5) < 1e-4);
    assert!(relative_error(20, 2.0) < 1e-9);
}

#[test]
fn long_matsubara_sum_matches_quadrature() {
    let spec = reference_bath();
    let reference = quadrature_reference(&spec, 0.5, 20.0, 40).unwrap();
    let mats = matsubara_decomposition(&spec, 1000).unwrap();
    assert!(reconstruction_error(&mats, &reference) < 1e-10);
}

#[test]
fn pade_and_matsubara_agree_at_large_order() {
    let spec = reference_bath();
    let pade = pade_decomposition(&spec, 30).unwrap();
    let mats = matsubara_decomposition(&spec, 1000).unwrap();
    for i in 5..=200 {
        let t = 0.1 * i as f64;
        let (p, m) = (pade.evaluate(t), mats.evaluate(t));
        assert!((p - m).norm() < 1e-6 * m.norm().max(1e-2), "t = {t}: {p} vs {m}");
    }
}
