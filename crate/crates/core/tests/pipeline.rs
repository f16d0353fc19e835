use ionsq::chain::Mode;
use ionsq::fockspace::{load_state, save_state};
use ionsq::metrology::{gain_from_observable, DELTA_EXACT, DELTA_TWA};
use ionsq::protocols::{probe_state, Engine, Protocol, ProtocolConfig};
use ionsq::runner::{self, OptimizeOptions, SweepAxis, SweepPlan};

#[test]
fn optimiser_beats_coarse_sweep() {
    let base = ProtocolConfig::new(Protocol::Nr, Mode::Cm, 4, 0.0);
    let plan = SweepPlan { base: base.clone(), values: (0..=16).map(|k| 0.05 * k as f64).collect(), ..SweepPlan::default() };
    let recs = runner::run_sweep(&plan).unwrap();
    let coarse = recs.iter().map(|r| r.gain.unwrap()).fold(f64::INFINITY, f64::min);
    let opt = runner::optimize_r(&base, &OptimizeOptions { bracket: [0.05, 1.0], ..Default::default() }).unwrap();
    assert!(opt.warning.is_none());
    assert!(opt.report.gain <= coarse + 1e-9);
    assert!(opt.report.gain > 0.9 * coarse);
}

#[test]
fn optimised_n_sweep_feeds_fit() {
    let base = ProtocolConfig::new(Protocol::Nr, Mode::Cm, 2, 0.0);
    let plan = SweepPlan {
        base,
        axis: SweepAxis::NIons,
        values: vec![2.0, 3.0, 4.0, 5.0],
        optimize_r: true,
        optimize: OptimizeOptions { bracket: [0.05, 1.2], prescan: 12, tol: 1e-2 },
        ..SweepPlan::default()
    };
    let recs = runner::run_sweep(&plan).unwrap();
    assert!(recs.iter().all(|r| r.status == "ok"), "{recs:?}");
    let pts: Vec<(f64, f64)> = recs.iter().map(|r| (r.n_ions as f64, r.gain.unwrap())).collect();
    assert!(pts.windows(2).all(|w| w[1].1 < w[0].1));
    let fit = runner::fit_scaling(&pts).unwrap();
    assert!(fit.b > 0.0 && fit.b_err >= 0.0);
}

#[test]
fn probe_container_roundtrip() {
    let cfg = ProtocolConfig::new(Protocol::Nr, Mode::B, 4, 0.4);
    let probe = probe_state(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("probe.bin");
    save_state(&path, &probe, serde_json::to_value(&cfg).unwrap()).unwrap();
    let (back, header) = load_state(&path).unwrap();
    assert_eq!(back.amps, probe.amps);
    let cfg_back: ProtocolConfig = serde_json::from_value(header.metadata).unwrap();
    assert_eq!(cfg_back, cfg);
}

#[test]
fn twa_tracks_exact_gain_at_small_n() {
    for protocol in [Protocol::Nr, Protocol::Sa] {
        let exact = ProtocolConfig::new(protocol, Mode::Cm, 4, 0.4);
        let twa = ProtocolConfig { n_traj: Some(20_000), seed: 5, ..exact.clone().with_engine(Engine::Twa) };
        let e = gain_from_observable(&exact, DELTA_EXACT).unwrap();
        let t = gain_from_observable(&twa, DELTA_TWA).unwrap();
        assert!((e.gain_db - t.gain_db).abs() < 0.6, "{protocol:?}: {} vs {}", e.gain_db, t.gain_db);
        assert!(t.stderr_gain.unwrap() > 0.0);
    }
}

#[test]
fn zero_noise_matches_pure_engine() {
    let pure = ProtocolConfig::new(Protocol::Nr, Mode::Cm, 3, 0.5);
    let noisy = ProtocolConfig { sigma_phase: 1e-9, ..pure.clone() };
    let a = gain_from_observable(&pure, DELTA_EXACT).unwrap();
    let b = gain_from_observable(&noisy, DELTA_EXACT).unwrap();
    assert!((a.gain - b.gain).abs() < 1e-8);
}
