use proptest::prelude::*;

use ionsq::chain::{ChainModel, Mode};
use ionsq::dynamics::{apply_beam_splitter, apply_rotation, apply_squeeze, evolve_tc, RotationAxis, RotationParams, SqueezeParams};
use ionsq::fockspace::{initial_state, Axis, Operator, SpaceSpec, SpinBosonState};
use ionsq::metrology::{self, DirectionGrid, QFI_SPIN_THETAS};
use ionsq::protocols::{self, apply_step, build_sequence, Protocol, ProtocolConfig};
use ionsq::runner::{derive_seed, fit_scaling};

fn rotated(n: usize, n_max: usize, occ: usize, polar: f64, azimuth: f64) -> SpinBosonState {
    let mut s = initial_state(&SpaceSpec::new(n, n_max, vec![Mode::Cm]), &[occ]).unwrap();
    apply_rotation(&mut s, &RotationParams::global(RotationAxis::Azimuthal(azimuth), polar)).unwrap();
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn breathing_mode_parallel_to_positions(n in 2usize..=24) {
        let chain = ChainModel::new(n).unwrap();
        let u = &chain.positions;
        let v = &chain.mode_vectors[1];
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / norm;
        prop_assert!((dot.abs() - 1.0).abs() < 1e-9);
        prop_assert!((chain.mode_freqs[1] - 3f64.sqrt()).abs() < 1e-9);
        prop_assert!(u.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(u.iter().zip(u.iter().rev()).all(|(a, b)| (a + b).abs() < 1e-9));
    }

    #[test]
    fn tc_evolution_is_unitary_and_conserves_excitations(
        n in 1usize..=4,
        occ in 0usize..4,
        polar in 0.0..std::f64::consts::PI,
        azimuth in 0.0..std::f64::consts::TAU,
        t in 0.0..2.0f64,
        scale in 0.2..1.5f64,
    ) {
        let mut s = rotated(n, 24, occ, polar, azimuth);
        let couplings: Vec<f64> = (0..n).map(|j| scale * (1.0 + 0.3 * j as f64)).collect();
        let before = Operator::Excitation.expectation(&s);
        let before_var = Operator::Excitation.variance(&s);
        evolve_tc(&mut s, &couplings, 0, t, false).unwrap();
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-9);
        prop_assert!((Operator::Excitation.expectation(&s) - before).abs() < 1e-9);
        prop_assert!((Operator::Excitation.variance(&s) - before_var).abs() < 1e-9);
    }

    #[test]
    fn gates_preserve_norm(
        r in 0.0..0.8f64,
        phi in 0.0..std::f64::consts::TAU,
        kappa in 0.0..std::f64::consts::PI,
        polar in 0.0..std::f64::consts::PI,
    ) {
        let mut s = initial_state(&SpaceSpec::new(2, 60, vec![Mode::B, Mode::Cm]), &[1, 0]).unwrap();
        apply_rotation(&mut s, &RotationParams::global(RotationAxis::X, polar)).unwrap();
        apply_squeeze(&mut s, &SqueezeParams { r, phi, mode_slot: 0 }, false).unwrap();
        apply_beam_splitter(&mut s, kappa, (0, 1)).unwrap();
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn jaynes_cummings_rabi_oscillation(n in 1usize..8, g in 0.2..1.5f64, t in 0.0..3.0f64) {
        let mut s = initial_state(&SpaceSpec::new(1, 20, vec![Mode::Cm]), &[n]).unwrap();
        evolve_tc(&mut s, &[g], 0, t, false).unwrap();
        let sz = Operator::SpinSum { axis: Axis::Z, weights: vec![1.0] }.expectation(&s);
        let want = (g * (n as f64).sqrt() * t).sin().powi(2) - 0.5;
        prop_assert!((sz - want).abs() < 1e-9, "{} vs {}", sz, want);
    }

    #[test]
    fn sa_without_signal_is_identity(r in 0.0..0.9f64, b_mode in any::<bool>()) {
        let mode = if b_mode { Mode::B } else { Mode::Cm };
        let cfg = ProtocolConfig::new(Protocol::Sa, mode, 4, r);
        let chain = ChainModel::new(4).unwrap();
        let seq = build_sequence(&cfg, &chain, 0.0).unwrap();
        let start = initial_state(&cfg.space_spec(), &[0]).unwrap();
        let mut s = start.clone();
        for step in seq.prefix.iter().chain(&seq.suffix[..3]) {
            apply_step(&mut s, step).unwrap();
        }
        prop_assert!(s.fidelity(&start) > 1.0 - 1e-8);
    }

    #[test]
    fn fit_is_scale_covariant(a in 0.05..5.0f64, b in 0.1..1.2f64, k in 0.1..10.0f64) {
        let pts: Vec<(f64, f64)> = [4.0, 8.0, 12.0, 20.0, 30.0].iter().map(|&n| (n, a * f64::powf(n, -b) * (1.0 + 0.01 * n.sin()))).collect();
        let scaled: Vec<(f64, f64)> = pts.iter().map(|&(n, g)| (n, k * g)).collect();
        let f = fit_scaling(&pts).unwrap();
        let h = fit_scaling(&scaled).unwrap();
        prop_assert!((h.b - f.b).abs() < 1e-9 && (h.b_err - f.b_err).abs() < 1e-9);
        prop_assert!((h.a / f.a - k).abs() < 1e-9 * k);
        prop_assert!(f.a_err >= 0.0 && f.b_err >= 0.0);
    }

    #[test]
    fn db_roundtrip(x in 1e-6..1e6f64) {
        prop_assert!((metrology::from_db(metrology::to_db(x)) / x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn seed_derivation_is_pure(master in any::<u64>(), idx in 0u64..1000) {
        prop_assert_eq!(derive_seed(master, idx), derive_seed(master, idx));
        prop_assert_ne!(derive_seed(master, idx), derive_seed(master, idx + 1));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn fisher_hierarchy(r in 0.05..0.9f64, n in 2usize..=4, sa in any::<bool>()) {
        let protocol = if sa { Protocol::Sa } else { Protocol::Nr };
        let cfg = ProtocolConfig::new(protocol, Mode::Cm, n, r);
        let chain = ChainModel::new(n).unwrap();
        let report = metrology::gain_with_qcrb(&cfg, metrology::DELTA_EXACT).unwrap();
        let probe = protocols::probe_state(&cfg).unwrap();
        let gen = protocols::imprint_generator(&cfg).unwrap();
        let fq = metrology::qfi_full(&probe, &gen);
        prop_assert!(report.gain >= n as f64 / fq * (1.0 - 1e-6));
        prop_assert!((report.qcrb.unwrap() - n as f64 / fq).abs() < 1e-9);
        let w = vec![1.0; n];
        let (fqs, fcs) = if sa {
            (
                metrology::qfi_spin_final(&cfg, &chain, QFI_SPIN_THETAS).unwrap(),
                metrology::cfi_spin_final(&cfg, &chain, DirectionGrid::default()).unwrap().0,
            )
        } else {
            let ens = [(1.0, probe.clone())];
            (
                metrology::qfi_spin(&ens, &w, QFI_SPIN_THETAS).unwrap(),
                metrology::cfi_spin(&ens, &w, DirectionGrid::default()).unwrap().0,
            )
        };
        prop_assert!(fcs <= fqs * (1.0 + 1e-4), "{} {}", fcs, fqs);
        prop_assert!(fqs <= fq * (1.0 + 1e-4), "{} {}", fqs, fq);
    }
}
