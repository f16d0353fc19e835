use super::*;
use crate::chain::Mode;
use crate::protocols::{Engine, Protocol};

#[test]
fn thermal_prefix_half_occupation() {
    let e = thermal_ensemble(0.5, 1e-6);
    assert_eq!(e.len(), 13);
    let total: f64 = e.iter().map(|(_, w)| w).sum();
    assert!((total - 1.0).abs() < 1e-14);
    // geometric ratio n̄/(1+n̄)
    for w in e.windows(2) {
        assert!((w[1].1 / w[0].1 - 1.0 / 3.0).abs() < 1e-12);
    }
    assert_eq!(thermal_ensemble(0.0, 1e-6), vec![(0, 1.0)]);
}

#[test]
fn thermal_prefix_mass() {
    for nbar in [0.05, 0.3, 2.0] {
        let e = thermal_ensemble(nbar, 1e-6);
        let q = nbar / (1.0 + nbar);
        let kept = 1.0 - q.powi(e.len() as i32);
        let dropped_one_less = 1.0 - q.powi(e.len() as i32 - 1);
        assert!(kept >= 1.0 - 1e-6 && dropped_one_less < 1.0 - 1e-6);
    }
}

#[test]
fn gauss_hermite_phase_moments() {
    let sigma = 0.2;
    let nodes = phase_nodes(sigma, 41);
    let w: f64 = nodes.iter().map(|(_, w)| w).sum();
    let m2: f64 = nodes.iter().map(|(x, w)| w * x * x).sum();
    let c: f64 = nodes.iter().map(|(x, w)| w * (2.0 * x).cos()).sum();
    assert!((w - 1.0).abs() < 1e-13);
    assert!((m2 - sigma * sigma).abs() < 1e-13);
    assert!((c - (-2.0 * sigma * sigma).exp()).abs() < 1e-13);
}

#[test]
fn wrapped_phase_moments() {
    for sigma in [0.7, 1.5, 3.0] {
        let nodes = phase_nodes(sigma, 41);
        let c: f64 = nodes.iter().map(|(x, w)| w * (2.0 * x).cos()).sum();
        let c4: f64 = nodes.iter().map(|(x, w)| w * (4.0 * x).cos()).sum();
        assert!((c - (-2.0 * sigma * sigma).exp()).abs() < 1e-12, "σ = {sigma}");
        assert!((c4 - (-8.0 * sigma * sigma).exp()).abs() < 1e-12, "σ = {sigma}");
    }
}

#[test]
fn phase_average_zero_sigma_is_point() {
    let m = phase_average(0.0, 41, |d| Ok(vec![Moments { mean: d + 1.0, second: 2.0 }])).unwrap();
    assert_eq!(m, vec![Moments { mean: 1.0, second: 2.0 }]);
}

#[test]
fn phase_average_flags_unresolved_integrand() {
    let r = phase_average(0.3, 11, |d| Ok(vec![Moments { mean: (40.0 * d).cos(), second: 0.0 }]));
    assert!(matches!(r, Err(Error::QuadratureOrder { .. })));
}

#[test]
fn exact_thermal_matches_member_sum() {
    let mut cfg = ProtocolConfig::new(Protocol::Nr, Mode::Cm, 3, 0.3);
    cfg.nbar = 0.2;
    let chain = ChainModel::new(3).unwrap();
    let thetas = [0.0, 0.1];
    let (m, meta) = exact_moments(&cfg, &chain, &thetas).unwrap();
    let op = cfg.observable_for(&chain).operator(3).unwrap();
    let q: f64 = 0.2 / 1.2;
    let mut want = [0.0; 2];
    let mut mass = 0.0;
    for n in 0..20 {
        let p = (1.0 - q) * q.powi(n as i32);
        mass += p;
        let trace = exact_trace(&cfg, &chain, &thetas, n, 0.0).unwrap();
        for (w, s) in want.iter_mut().zip(&trace.finals) {
            *w += p * op.expectation(s);
        }
    }
    for (a, b) in m.iter().zip(want) {
        assert!((a.mean - b / mass).abs() < 1e-6);
    }
    assert!(meta.n_max >= 20);
}

#[test]
fn phase_noise_degrades_nr() {
    let base = ProtocolConfig::new(Protocol::Nr, Mode::Cm, 4, 0.6);
    let mut last = 0.0;
    for sigma in [0.0, 0.05, 0.1, 0.2] {
        let cfg = ProtocolConfig { sigma_phase: sigma, ..base.clone() };
        let g = crate::metrology::gain_from_observable(&cfg, 1e-4).unwrap().gain;
        assert!(g > last, "σ = {sigma}: {g} ≤ {last}");
        last = g;
    }
}

#[test]
fn zero_noise_matches_pure_engine() {
    let cfg = ProtocolConfig::new(Protocol::Sa, Mode::Cm, 4, 0.5).with_engine(Engine::Exact);
    let chain = ChainModel::new(4).unwrap();
    let (m, _) = exact_moments(&cfg, &chain, &[0.05]).unwrap();
    let trace = exact_trace(&cfg, &chain, &[0.05], 0, 0.0).unwrap();
    let op = cfg.observable_for(&chain).operator(4).unwrap();
    let (a, b) = op.moments(&trace.finals[0]);
    assert_eq!((m[0].mean, m[0].second), (a, b));
}

#[test]
fn nr_phase_closed_form() {
    assert!((analytic_nr_phase(0.7, 0.0) - (-1.4f64).exp()).abs() < 1e-15);
    for sigma in [0.02, 0.05, 0.1] {
        let opt = analytic_nr_phase_optimum(sigma);
        let c = (-2.0 * sigma * sigma).exp();
        // exact minimiser of the closed form
        let r_star = 0.25 * ((1.0 + c) / (1.0 - c)).ln();
        assert!((analytic_nr_phase(r_star, sigma) - opt.gain_opt).abs() < 1e-12);
        assert!((opt.r_opt.unwrap() - r_star).abs() < 5e-3);
        for k in 0..200 {
            assert!(analytic_nr_phase(0.02 * k as f64, sigma) >= opt.gain_opt - 1e-15);
        }
        // the optimum tracks 2σ at small σ
        assert!((opt.gain_opt / (2.0 * sigma) - 1.0).abs() < 2.0 * sigma * sigma);
    }
    assert!(analytic_nr_phase_optimum(1.2).r_opt.is_none());
}

#[test]
fn sa_phase_limits() {
    assert!((analytic_sa_phase(0.9, 0.0) - (-1.8f64).exp()).abs() < 1e-14);
    let wide = analytic_sa_phase(1.0, 3.0);
    assert!((wide - 1.0f64.cosh().powi(-2)).abs() < 1e-7);
}

#[test]
fn thermal_closed_form() {
    let (r, s) = analytic_thermal(0.0, 27);
    assert!((r - 0.5 * 9f64.ln()).abs() < 1e-14);
    assert_eq!(s, 1.0);
    let (_, s) = analytic_thermal(0.5, 8);
    assert_eq!(s, 4.0);
}

#[test]
fn noise_spec_validation() {
    assert!(NoiseSpec::default().validate().is_ok());
    let bad = NoiseSpec { sigma_phase: 0.1, phase_quadrature_nodes: 5, ..NoiseSpec::default() };
    assert!(bad.validate().is_err());
}
