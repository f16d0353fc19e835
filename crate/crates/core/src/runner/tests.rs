use super::*;
use crate::noise;
use rand_distr::{Distribution, Normal};

fn report(gain: f64) -> GainReport {
    GainReport {
        variance: gain,
        derivative: 1.0,
        gain,
        gain_db: metrology::to_db(gain),
        delta_theta_used: 1e-4,
        qcrb: None,
        stderr_gain: None,
        n_traj: None,
        n_max: None,
    }
}

#[test]
fn empty_plan_rejected() {
    let plan = SweepPlan::default();
    assert!(plan.validate().is_err());
    let unsorted = SweepPlan { values: vec![0.2, 0.1], ..SweepPlan::default() };
    assert!(unsorted.validate().is_err());
    let nan = SweepPlan { values: vec![f64::NAN], ..SweepPlan::default() };
    assert!(nan.validate().is_err());
    let ions = SweepPlan { axis: SweepAxis::NIons, values: vec![4.5], ..SweepPlan::default() };
    assert!(ions.validate().is_err());
}

#[test]
fn seeds_are_distinct_and_stable() {
    let a: Vec<u64> = (0..8).map(|i| derive_seed(7, i)).collect();
    let b: Vec<u64> = (0..8).map(|i| derive_seed(7, i)).collect();
    assert_eq!(a, b);
    let mut s = a.clone();
    s.sort();
    s.dedup();
    assert_eq!(s.len(), 8);
}

#[test]
fn nr_b_sweep_emits_both_observables() {
    let base = ProtocolConfig::new(Protocol::Nr, Mode::B, 3, 0.0);
    let plan = SweepPlan { base, values: vec![0.1, 0.2], ..SweepPlan::default() };
    let kinds: Vec<_> = plan.configs().unwrap().iter().map(|c| (c.r, c.observable.kind)).collect();
    assert_eq!(
        kinds,
        vec![
            (0.1, ObservableKind::SWeightedZ),
            (0.1, ObservableKind::SZMinus),
            (0.2, ObservableKind::SWeightedZ),
            (0.2, ObservableKind::SZMinus)
        ]
    );
}

#[test]
fn analytic_optimum_recovered() {
    let sigma = 0.1;
    let opt = optimize_by(&OptimizeOptions::default(), |r| Ok(report(noise::analytic_nr_phase(r, sigma)))).unwrap();
    let want = noise::analytic_nr_phase_optimum(sigma);
    assert!(opt.warning.is_none());
    let c = (-2.0 * sigma * sigma).exp();
    let exact = 0.25 * ((1.0 + c) / (1.0 - c)).ln();
    assert!((opt.r_opt - exact).abs() < 1e-3, "{}", opt.r_opt);
    assert!((opt.r_opt - want.r_opt.unwrap()).abs() < 5e-3);
    assert!((opt.report.gain - want.gain_opt).abs() < 1e-6);
}

#[test]
fn monotone_bracket_returns_edge() {
    let opt = optimize_by(&OptimizeOptions::default(), |r| Ok(report((-r).exp()))).unwrap();
    assert_eq!(opt.r_opt, 1.6);
    assert!(opt.warning.unwrap().contains("edge"));
    assert_eq!(opt.evaluations, 12);
}

#[test]
fn bimodal_scan_returns_grid_minimum() {
    let f = |r: f64| 2.0 + (8.0 * r).cos() + 0.01 * r;
    let opt = optimize_by(&OptimizeOptions::default(), |r| Ok(report(f(r)))).unwrap();
    assert!(opt.warning.unwrap().contains("unimodal"));
    assert_eq!(opt.evaluations, 12);
}

#[test]
fn exact_power_law_fit() {
    let pts: Vec<(f64, f64)> = (2..=25).map(|k| (2.0 * k as f64, 0.45 * (2.0 * k as f64).powf(-0.68))).collect();
    let fit = fit_scaling(&pts).unwrap();
    assert!((fit.a - 0.45).abs() < 1e-12 && (fit.b - 0.68).abs() < 1e-12);
    assert!(fit.a_err < 1e-10 && fit.b_err < 1e-10);
    assert!(fit.residual_rms < 1e-12);
}

#[test]
fn fit_rejects_bad_input() {
    assert!(fit_scaling(&[(4.0, 1.0), (6.0, 0.8), (8.0, 0.7)]).is_err());
    assert!(fit_scaling(&[(4.0, 1.0), (6.0, 0.0), (8.0, 0.7), (10.0, 0.6)]).is_err());
}

#[test]
fn fit_interval_matches_t_quantile() {
    // 4 points: t_{0.975, 2} = 4.302652729...
    let pts = [(1f64.exp(), 1.0), (2f64.exp(), (-1.1f64).exp()), (3f64.exp(), (-1.9f64).exp()), (4f64.exp(), (-3.0f64).exp())];
    let fit = fit_scaling(&pts).unwrap();
    let x = [1.0f64, 2.0, 3.0, 4.0];
    let y = [0.0f64, -1.1, -1.9, -3.0];
    let slope = -0.98;
    let icpt = 0.95;
    let ss: f64 = x.iter().zip(&y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
    let se = (ss / 2.0 / 5.0f64).sqrt();
    assert!((fit.b - 0.98).abs() < 1e-12);
    assert!((fit.b_err - 4.302652729911275 * se).abs() < 1e-9);
}

#[test]
fn fit_coverage_with_multiplicative_noise() {
    let ns: Vec<f64> = (2..=25).map(|k| 2.0 * k as f64).collect();
    let noise = Normal::new(0.0, 0.05).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut covered = 0;
    for _ in 0..200 {
        let pts: Vec<(f64, f64)> =
            ns.iter().map(|&n| (n, 0.45 * n.powf(-0.68) * (1.0 + noise.sample(&mut rng)))).collect();
        let fit = fit_scaling(&pts).unwrap();
        if (fit.b - 0.68).abs() <= fit.b_err {
            covered += 1;
        }
    }
    assert!(covered >= 190, "{covered}");
}

#[test]
fn sweep_reproduces_small_curve() {
    let base = ProtocolConfig::new(Protocol::Nr, Mode::Cm, 2, 0.0);
    let plan = SweepPlan { base, values: vec![0.0, 0.3, 0.6], record_wall_time: false, ..SweepPlan::default() };
    let recs = run_sweep(&plan).unwrap();
    assert_eq!(recs.len(), 3);
    assert!(recs.iter().all(|r| r.status == "ok"));
    assert!((recs[0].gain.unwrap() - 1.0).abs() < 1e-6);
    assert!(recs[1].gain.unwrap() < 1.0);
    assert!(recs.iter().all(|r| r.qfi.is_some() && r.renyi.is_some() && r.stderr_gain.is_none()));
    assert!((recs[1].xi2b_db - 10.0 * 0.6 / std::f64::consts::LN_10).abs() < 1e-12);
    let again = run_sweep(&plan).unwrap();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    write_csv(&recs, &mut a).unwrap();
    write_csv(&again, &mut b).unwrap();
    assert_eq!(a, b);
}

#[test]
fn csv_header_and_roundtrip() {
    let base = ProtocolConfig::new(Protocol::Sa, Mode::Cm, 2, 0.0);
    let plan = SweepPlan {
        base,
        values: vec![0.2, 0.4],
        analyses: Analyses { qfi: true, qfi_spin: true, cfi: true, renyi: true },
        ..SweepPlan::default()
    };
    let recs = run_sweep(&plan).unwrap();
    let mut buf = Vec::new();
    write_csv(&recs, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "protocol,mode,engine,n_ions,n_max,r,xi2b_db,phi,theta_delta,nbar,sigma_phase,observable,gain,gain_db,\
         variance,derivative,qfi,qfi_spin,cfi_spin,renyi,stderr_gain,n_traj,seed,wall_ms,status"
    );
    assert_eq!(read_csv(&buf[..]).unwrap(), recs);
    let json: Vec<SweepRecord> = serde_json::from_str(&serde_json::to_string(&recs).unwrap()).unwrap();
    assert_eq!(json, recs);
    let r = &recs[1];
    assert!(r.cfi_spin.unwrap() <= r.qfi_spin.unwrap() * (1.0 + 1e-6));
    assert!(r.qfi_spin.unwrap() <= r.qfi.unwrap() * (1.0 + 1e-6));
}

#[test]
fn failing_point_recorded_in_row() {
    let base = ProtocolConfig { n_max: Some(2), ..ProtocolConfig::new(Protocol::Nr, Mode::Cm, 2, 0.0) };
    let plan = SweepPlan { base, values: vec![0.0, 1.5], ..SweepPlan::default() };
    let recs = run_sweep(&plan).unwrap();
    assert!(recs[0].succeeded());
    assert!(!recs[1].succeeded());
    assert!(recs[1].status.starts_with("error: "));
    assert!(recs[1].gain.is_none());
}

#[test]
fn n_ions_axis_resets_weights() {
    let mut base = ProtocolConfig::new(Protocol::Nr, Mode::Cm, 2, 0.3);
    base.observable.weights = Some(vec![1.0, 1.0]);
    let plan = SweepPlan { base, axis: SweepAxis::NIons, values: vec![2.0, 3.0], ..SweepPlan::default() };
    let recs = run_sweep(&plan).unwrap();
    assert!(recs.iter().all(SweepRecord::succeeded));
    assert_eq!(recs[1].n_ions, 3);
}

#[test]
fn analytic_rows_follow_closed_forms() {
    let rows = analytic_rows(AnalyticModel::SaPhase, &[0.5, 1.0], 3.0, 100, None);
    assert!((rows[1].gain - 1.0f64.cosh().powi(-2)).abs() < 1e-7);
    let t = analytic_rows(AnalyticModel::Thermal, &[0.1], 0.0, 20, Some(0.2));
    assert!((t[0].gain - 0.2 * 1.44).abs() < 1e-12);
    let nr = analytic_rows(AnalyticModel::NrPhase, &[0.0], 0.1, 100, None);
    assert!((nr[0].gain - 1.0).abs() < 1e-12);
}
