use super::*;
use crate::chain::{ChainModel, Mode};
use crate::protocols::{Engine, Protocol, ProtocolConfig};

fn sample(seed: u64, n: usize, collective: bool) -> Trajectory {
    Trajectory::sample(&mut rng_for(seed, 0), n, &[0.0], collective)
}

#[test]
fn initial_spin_symbols() {
    let t = sample(3, 70, false);
    let Spins::PerSite(s) = &t.spins else { unreachable!() };
    assert_eq!(s.len(), 70);
    for v in s {
        assert_eq!(v[2], -1.0);
        assert!(v[0].abs() == 1.0 && v[1].abs() == 1.0);
    }
}

#[test]
fn squeezed_boson_sample_variances() {
    let ens = sample_initial(20000, 2, 0.5, 0.0, 0.0, 1);
    let x = ens.estimate(&ObservableSpec::boson(ObservableKind::BosonX, 0)).unwrap();
    let y = ens.estimate(&ObservableSpec::boson(ObservableKind::BosonY, 0)).unwrap();
    // five standard errors of a Gaussian variance estimate
    let tol = |v: f64| 5.0 * v * (2.0 / 20000f64).sqrt();
    assert!((x.variance - (-1f64).exp()).abs() < tol(x.variance), "{}", x.variance);
    assert!((y.variance - 1f64.exp()).abs() < tol(y.variance), "{}", y.variance);
    let sx = ens.estimate(&ObservableSpec::new(ObservableKind::SXPlus)).unwrap();
    assert!((sx.variance - 0.5).abs() < 0.03);
    assert!(x.stderr.is_some());
}

#[test]
fn thermal_boson_sample_occupation() {
    let mut rng = rng_for(5, 0);
    let n = 40000;
    let mean: f64 = (0..n).map(|_| Trajectory::sample(&mut rng, 1, &[0.3], false).bosons[0].norm_sqr()).sum::<f64>() / n as f64;
    // Weyl symbol of a†a is |a|² − ½
    assert!((mean - 0.8).abs() < 0.02, "{mean}");
}

#[test]
fn streams_are_reproducible_and_distinct() {
    let a = Trajectory::sample(&mut rng_for(9, 4), 10, &[0.0], false);
    let b = Trajectory::sample(&mut rng_for(9, 4), 10, &[0.0], false);
    let c = Trajectory::sample(&mut rng_for(9, 5), 10, &[0.0], false);
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn rotation_geometry() {
    let mut t = sample(1, 3, false);
    t.spins = Spins::PerSite(vec![[0.0, 0.0, -1.0]; 3]);
    t.rotate([0.0, 1.0, 0.0], std::f64::consts::FRAC_PI_2, &[1.0; 3]).unwrap();
    let Spins::PerSite(s) = &t.spins else { unreachable!() };
    for v in s {
        assert!((v[0] + 1.0).abs() < 1e-15 && v[2].abs() < 1e-15);
    }
    let mut c = sample(1, 3, true);
    assert!(c.rotate([0.0, 0.0, 1.0], 0.1, &[1.0, -1.0, 1.0]).is_err());
}

#[test]
fn classical_tc_invariants() {
    let chain = ChainModel::new(6).unwrap();
    let mut t = sample(11, 6, false);
    t.squeeze(0, 0.6, 0.0, false);
    let start = t.clone();
    let e0 = t.excitation();
    t.evolve_tc(0, &chain.couplings_b, 1.3, false).unwrap();
    assert!((t.excitation() - e0).abs() < 1e-7);
    let Spins::PerSite(s) = &t.spins else { unreachable!() };
    for v in s {
        assert!((v[0] * v[0] + v[1] * v[1] + v[2] * v[2] - 3.0).abs() < 1e-7);
    }
    t.evolve_tc(0, &chain.couplings_b, 1.3, true).unwrap();
    let (Spins::PerSite(a), Spins::PerSite(b)) = (&t.spins, &start.spins) else { unreachable!() };
    for (x, y) in a.iter().zip(b) {
        for k in 0..3 {
            assert!((x[k] - y[k]).abs() < 1e-6);
        }
    }
}

#[test]
fn single_excitation_exchange_is_linear_at_small_amplitude() {
    // with the spins along −z and a tiny field, the TC flow is a beam splitter:
    // after t_π the field amplitude has moved into the transverse spin sum
    let mut t = Trajectory { spins: Spins::PerSite(vec![[0.0, 0.0, -1.0]; 4]), bosons: vec![C64::new(1e-3, 0.0)] };
    t.evolve_tc(0, &[0.5; 4], std::f64::consts::FRAC_PI_2, false).unwrap();
    let Spins::PerSite(s) = &t.spins else { unreachable!() };
    let sy: f64 = s.iter().map(|v| v[1]).sum();
    assert!(t.bosons[0].norm() < 1e-8);
    assert!((sy - 4e-3).abs() < 1e-7, "{sy}");
}

#[test]
fn collective_path_matches_per_site() {
    let chain = ChainModel::new(5).unwrap();
    for seed in 0..5 {
        let mut a = sample(seed, 5, false);
        let mut b = sample(seed, 5, true);
        for t in [&mut a, &mut b] {
            t.squeeze(0, 0.7, 0.2, false);
            t.evolve_tc(0, &chain.couplings_cm, std::f64::consts::FRAC_PI_2, false).unwrap();
            t.rotate([0.0, 1.0, 0.0], 0.9, &[1.0; 5]).unwrap();
            t.evolve_tc(0, &chain.couplings_cm, 0.7, true).unwrap();
        }
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            let (ma, sa) = a.spin_moments(axis, &[1.0; 5]);
            let (mb, sb) = b.spin_moments(axis, &[1.0; 5]);
            assert!((ma - mb).abs() < 1e-6 && (sa - sb).abs() < 1e-5);
        }
        assert!((a.bosons[0] - b.bosons[0]).norm() < 1e-6);
    }
}

#[test]
fn beam_splitter_swap_phase() {
    let mut t = Trajectory { spins: Spins::PerSite(vec![]), bosons: vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)] };
    t.beam_splitter(std::f64::consts::PI);
    assert!(t.bosons[0].norm() < 1e-15);
    assert!((t.bosons[1] - C64::new(0.0, 1.0)).norm() < 1e-15);
}

#[test]
fn jackknife_of_mean_matches_block_formula() {
    let rows: Vec<Option<Vec<f64>>> = (0..640).map(|i| Some(vec![((i * 37) % 101) as f64])).collect();
    let b = Blocks::from_rows(&rows, 1);
    let means: Vec<f64> = b.sums.iter().zip(&b.counts).map(|(s, c)| s[0] / *c as f64).collect();
    let m = means.iter().sum::<f64>() / 32.0;
    let want = (means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (32.0 * 31.0)).sqrt();
    assert!((b.jackknife(|v| v[0]).unwrap() - want).abs() < 1e-10);
    assert!((b.mean()[0] - m).abs() < 1e-12);
    let few = Blocks::from_rows(&rows[..40], 1);
    assert!(few.jackknife(|v| v[0]).is_none());
}

#[test]
fn failures_above_threshold_are_fatal() {
    assert!(check_failures(1, 1000).is_ok());
    assert!(matches!(check_failures(2, 1000), Err(Error::TrajectoryFailures { excluded: 2, total: 1000 })));
}

#[test]
fn unsqueezed_protocol_moments() {
    // coherent spin state readout: ⟨S_z⟩ = −(N/2) sin θ, Var = N/4 (TWA exact here up to vacuum-field effects)
    let mut cfg = ProtocolConfig::new(Protocol::Nr, Mode::Cm, 4, 0.0).with_engine(Engine::Twa);
    cfg.n_traj = Some(4000);
    let chain = ChainModel::new(4).unwrap();
    let est = protocol_moments(&cfg, &chain, &[0.0, 0.2]).unwrap();
    assert!(est.collective);
    let m = est.moments();
    assert!((m[0].variance() - 1.0).abs() < 0.1, "{}", m[0].variance());
    assert!((m[1].mean - m[0].mean + 2.0 * 0.2f64.sin()).abs() < 0.1);
    assert!(est.warnings.is_empty());
}

#[test]
fn small_runs_warn() {
    let mut cfg = ProtocolConfig::new(Protocol::Nr, Mode::B, 4, 0.3).with_engine(Engine::Twa);
    cfg.n_traj = Some(10);
    let est = protocol_moments(&cfg, &ChainModel::new(4).unwrap(), &[0.0]).unwrap();
    assert!(!est.collective);
    assert_eq!(est.warnings.len(), 1);
    assert!(est.jackknife(|m| m[0].mean).is_none());
}

#[test]
fn quadrature_curve_follows_linear_exchange_at_large_n() {
    // Holstein–Primakoff limit: Var S_y(t) = N/4 [cos² t + e^{−2r} sin² t]
    let n = 100;
    let chain = ChainModel::new(n).unwrap();
    let r = 0.3;
    let times = [0.0, std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2];
    let curve = spin_quadrature_curve(&chain, Mode::Cm, r, &times, 4000, 2).unwrap();
    for p in &curve {
        let (c, s) = (p.time.cos().powi(2), p.time.sin().powi(2));
        let want_y = 25.0 * (c + (-2.0 * r).exp() * s);
        let want_x = 25.0 * (c + (2.0 * r).exp() * s);
        assert!((p.var_y - want_y).abs() < 5.0 * p.stderr_y.unwrap() + 0.02 * want_y, "{p:?} {want_y}");
        assert!((p.var_x - want_x).abs() < 5.0 * p.stderr_x.unwrap() + 0.02 * want_x, "{p:?} {want_x}");
    }
}

#[test]
fn ensemble_export_round_trip() {
    let ens = sample_initial(8, 3, 0.2, 0.0, 0.0, 4);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ens.bin");
    ens.save(&path).unwrap();
    let (header, payload) = crate::fockspace::read_container(&path).unwrap();
    assert_eq!(header.format, "twa_ensemble");
    assert_eq!(payload.len(), 8 * (9 + 2));
    assert_eq!(payload[2], -1.0);
}
