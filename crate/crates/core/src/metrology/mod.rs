//! Metrological gain, Fisher informations and spin-boson entanglement.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::chain::ChainModel;
use crate::dynamics::{apply_rotation, RotationAxis, RotationParams, RotationTarget};
use crate::error::{Error, Result};
use crate::fockspace::{Axis, Operator, SpinBosonState};
use crate::par;
use crate::protocols::{self, Engine, ProtocolConfig};

/// Default θ step of the central difference, per engine.
pub const DELTA_EXACT: f64 = 1e-4;
pub const DELTA_TWA: f64 = 1e-3;
/// θ values of the fidelity limit, largest first.
pub const QFI_SPIN_THETAS: [f64; 2] = [1e-2, 5e-3];
/// CFI outcome probabilities below this are dropped from the sum.
pub const CFI_MIN_PROBABILITY: f64 = 1e-14;
const CFI_STEP: f64 = 1e-4;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GainReport {
    pub variance: f64,
    pub derivative: f64,
    /// `N (Δθ)² = N Var(M) / (∂_θ⟨M⟩)²`.
    pub gain: f64,
    pub gain_db: f64,
    pub delta_theta_used: f64,
    /// `N / F_Q` of the probe, when requested.
    pub qcrb: Option<f64>,
    /// Jackknife error of the gain (TWA only).
    pub stderr_gain: Option<f64>,
    pub n_traj: Option<usize>,
    pub n_max: Option<usize>,
}

/// `−10 log10 x`, so smaller gains are larger dB values.
pub fn to_db(x: f64) -> f64 {
    -10.0 * x.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

fn gain_of(n: usize, m_minus: f64, m0: f64, second0: f64, m_plus: f64, delta: f64) -> (f64, f64, f64) {
    let derivative = (m_plus - m_minus) / (2.0 * delta);
    let variance = (second0 - m0 * m0).max(0.0);
    (n as f64 * variance / (derivative * derivative), variance, derivative)
}

/// Gain of `cfg.observable` around `cfg.theta` from a central difference.
/// The TWA engine evaluates the three angles on identical trajectories.
pub fn gain_from_observable(cfg: &ProtocolConfig, delta_theta: f64) -> Result<GainReport> {
    if !(delta_theta > 0.0) {
        return Err(Error::InvalidArgument("delta_theta must be positive".into()));
    }
    cfg.validate()?;
    let chain = ChainModel::new(cfg.n_ions)?;
    gain_with_chain(cfg, &chain, delta_theta)
}

pub fn gain_with_chain(cfg: &ProtocolConfig, chain: &ChainModel, delta: f64) -> Result<GainReport> {
    let n = cfg.n_ions;
    let t0 = cfg.theta;
    let thetas = [t0 - delta, t0, t0 + delta];
    let mut report = match cfg.engine {
        Engine::Exact => {
            let (m, meta) = protocols::moments(cfg, chain, &thetas)?;
            let (gain, variance, derivative) = gain_of(n, m[0].mean, m[1].mean, m[1].second, m[2].mean, delta);
            GainReport { variance, derivative, gain, n_max: Some(meta.n_max), ..GainReport::default() }
        }
        Engine::Twa => {
            let est = crate::twa::protocol_moments(cfg, chain, &thetas)?;
            let m = est.moments();
            let (gain, variance, derivative) = gain_of(n, m[0].mean, m[1].mean, m[1].second, m[2].mean, delta);
            let stderr = est.jackknife(|b| gain_of(n, b[0].mean, b[1].mean, b[1].second, b[2].mean, delta).0);
            GainReport {
                variance,
                derivative,
                gain,
                stderr_gain: stderr,
                n_traj: Some(est.n_traj),
                ..GainReport::default()
            }
        }
    };
    if !(report.derivative.abs() >= 1e-12) {
        return Err(Error::InsensitiveObservable { derivative: report.derivative });
    }
    report.gain_db = to_db(report.gain);
    report.delta_theta_used = delta;
    Ok(report)
}

/// Gain plus the QCRB `N/F_Q` of the noiseless probe (exact engine).
pub fn gain_with_qcrb(cfg: &ProtocolConfig, delta_theta: f64) -> Result<GainReport> {
    let mut g = gain_from_observable(cfg, delta_theta)?;
    let probe = protocols::probe_state(cfg)?;
    let gen = protocols::imprint_generator(cfg)?;
    g.qcrb = Some(cfg.n_ions as f64 / qfi_full(&probe, &gen));
    Ok(g)
}

/// `F_Q = 4 Var(G)` on a pure probe.
pub fn qfi_full(probe: &SpinBosonState, generator: &Operator) -> f64 {
    4.0 * generator.variance(probe)
}

/// Pure-state QFI of a weighted ensemble; errors unless the ensemble has a
/// single member.
pub fn qfi_full_ensemble(ensemble: &[(f64, SpinBosonState)], generator: &Operator) -> Result<f64> {
    match ensemble {
        [(_, s)] => Ok(qfi_full(s, generator)),
        _ => Err(Error::InvalidArgument("full QFI is defined here for pure states only".into())),
    }
}

/// Weighted average of reduced spin density matrices.
pub fn reduced_spin_ensemble(ensemble: &[(f64, SpinBosonState)]) -> DMatrix<C64> {
    let mut rho: Option<DMatrix<C64>> = None;
    for (w, s) in ensemble {
        let r = s.reduced_spin_density() * C64::new(*w, 0.0);
        rho = Some(match rho {
            Some(acc) => acc + r,
            None => r,
        });
    }
    rho.expect("empty ensemble")
}

/// Support of a density matrix: eigenvectors with eigenvalue above
/// `1e-12 λ_max`.
fn sqrt_density(rho: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let eig = SymmetricEigen::new(rho.clone());
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    if let Some(bad) = eig.eigenvalues.iter().find(|&&l| l < -1e-10) {
        return Err(Error::Numerical(format!("density matrix eigenvalue {bad:e}")));
    }
    let mut v = eig.eigenvectors.clone();
    for (c, &l) in eig.eigenvalues.iter().enumerate() {
        let s = if l > 1e-12 * lmax { l.sqrt() } else { 0.0 };
        v.column_mut(c).iter_mut().for_each(|x| *x *= s);
    }
    Ok(&v * eig.eigenvectors.adjoint())
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))² = ‖√ρ √σ‖₁²`, with the trace norm
/// taken from singular values.
pub fn uhlmann_fidelity(rho: &DMatrix<C64>, sigma: &DMatrix<C64>) -> Result<f64> {
    let m = sqrt_density(rho)? * sqrt_density(sigma)?;
    let t: f64 = m.singular_values().iter().sum();
    Ok(t * t)
}

/// `exp(−iθ G)` for `G = ½ Σ w_j σ^z_j`, as a diagonal on the spin index.
fn z_phase(weights: &[f64], theta: f64, spin_dim: usize) -> Vec<C64> {
    (0..spin_dim)
        .map(|s| {
            let g: f64 = weights.iter().enumerate().map(|(j, w)| if s >> j & 1 == 1 { 0.5 * w } else { -0.5 * w }).sum();
            C64::from_polar(1.0, -theta * g)
        })
        .collect()
}

fn rotate_density(rho: &DMatrix<C64>, phase: &[C64]) -> DMatrix<C64> {
    DMatrix::from_fn(rho.nrows(), rho.ncols(), |i, j| phase[i] * rho[(i, j)] * phase[j].conj())
}

/// `4 (1 − F(ρ_0, ρ_θ)) / θ²`, Richardson-extrapolated over `thetas`
/// (`thetas[1] = thetas[0]/2`).
pub fn qfi_from_family<F>(rho0: &DMatrix<C64>, rho_at: F, thetas: [f64; 2]) -> Result<f64>
where
    F: Fn(f64) -> Result<DMatrix<C64>>,
{
    let f = |t: f64| -> Result<f64> { Ok(4.0 * (1.0 - uhlmann_fidelity(rho0, &rho_at(t)?)?) / (t * t)) };
    let (f1, f2) = (f(thetas[0])?, f(thetas[1])?);
    let ratio = thetas[0] / thetas[1];
    let k = ratio * ratio;
    Ok((k * f2 - f1) / (k - 1.0))
}

/// Spin-subsystem QFI of an imprint `exp(−iθ Σ w_j σ^z_j/2)` acting on the
/// ensemble-averaged reduced spin state.
pub fn qfi_spin(ensemble: &[(f64, SpinBosonState)], weights: &[f64], thetas: [f64; 2]) -> Result<f64> {
    let rho = reduced_spin_ensemble(ensemble);
    let dim = rho.nrows();
    qfi_from_family(&rho, |t| Ok(rotate_density(&rho, &z_phase(weights, t, dim))), thetas)
}

/// Spin-subsystem QFI of the protocol's final states, with `θ` imprinted
/// on the probe and the readout sequence applied (noiseless).
pub fn qfi_spin_final(cfg: &ProtocolConfig, chain: &ChainModel, thetas: [f64; 2]) -> Result<f64> {
    let trace = protocols::exact_trace(cfg, chain, &[0.0, thetas[0], thetas[1]], 0, 0.0)?;
    let rhos: Vec<DMatrix<C64>> = trace.finals.iter().map(|s| s.reduced_spin_density()).collect();
    let at = |t: f64| if t == thetas[0] { Ok(rhos[1].clone()) } else { Ok(rhos[2].clone()) };
    qfi_from_family(&rhos[0], at, thetas)
}

/// SLD formula `2 Σ (λ_i − λ_j)²/(λ_i + λ_j) |G_ij|²` for a diagonal-in-z
/// generator; used as an independent check of [`qfi_spin`].
pub fn qfi_sld(rho: &DMatrix<C64>, weights: &[f64]) -> f64 {
    let dim = rho.nrows();
    let eig = SymmetricEigen::new(rho.clone());
    let gdiag: Vec<f64> = (0..dim)
        .map(|s| weights.iter().enumerate().map(|(j, w)| if s >> j & 1 == 1 { 0.5 * w } else { -0.5 * w }).sum())
        .collect();
    let v = &eig.eigenvectors;
    let g = DMatrix::from_fn(dim, dim, |a, b| {
        (0..dim).fold(C64::new(0.0, 0.0), |acc, s| acc + v[(s, a)].conj() * gdiag[s] * v[(s, b)])
    });
    let mut f = 0.0;
    for a in 0..dim {
        for b in 0..dim {
            let (la, lb) = (eig.eigenvalues[a].max(0.0), eig.eigenvalues[b].max(0.0));
            if la + lb > 1e-14 {
                f += 2.0 * (la - lb).powi(2) / (la + lb) * g[(a, b)].norm_sqr();
            }
        }
    }
    f
}

/// Measurement directions for [`cfi_spin`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionGrid {
    /// `count` directions on the great circle perpendicular to the mean spin.
    Transverse { count: usize },
    /// `polar × azimuthal` grid over the upper hemisphere (antipodal
    /// directions give the same distribution).
    Sphere { polar: usize, azimuthal: usize },
}

impl Default for DirectionGrid {
    fn default() -> Self {
        Self::Transverse { count: 64 }
    }
}

fn mean_spin(ensemble: &[(f64, SpinBosonState)]) -> [f64; 3] {
    let n = ensemble[0].1.n_ions();
    let mut out = [0.0; 3];
    for (k, axis) in [Axis::X, Axis::Y, Axis::Z].into_iter().enumerate() {
        let op = Operator::SpinSum { axis, weights: vec![1.0; n] };
        out[k] = ensemble.iter().map(|(w, s)| w * op.expectation(s)).sum();
    }
    out
}

fn directions(grid: DirectionGrid, mean: [f64; 3]) -> Vec<[f64; 3]> {
    match grid {
        DirectionGrid::Transverse { count } => {
            let len = (mean[0] * mean[0] + mean[1] * mean[1] + mean[2] * mean[2]).sqrt();
            let m = if len > 1e-9 { [mean[0] / len, mean[1] / len, mean[2] / len] } else { [1.0, 0.0, 0.0] };
            // any vector not parallel to m, orthonormalised
            let seed = if m[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [0.0, 1.0, 0.0] };
            let d = seed[0] * m[0] + seed[1] * m[1] + seed[2] * m[2];
            let mut e1 = [seed[0] - d * m[0], seed[1] - d * m[1], seed[2] - d * m[2]];
            let l1 = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
            e1.iter_mut().for_each(|x| *x /= l1);
            let e2 = [m[1] * e1[2] - m[2] * e1[1], m[2] * e1[0] - m[0] * e1[2], m[0] * e1[1] - m[1] * e1[0]];
            (0..count)
                .map(|k| {
                    let a = std::f64::consts::PI * k as f64 / count as f64;
                    let (s, c) = a.sin_cos();
                    [c * e1[0] + s * e2[0], c * e1[1] + s * e2[1], c * e1[2] + s * e2[2]]
                })
                .collect()
        }
        DirectionGrid::Sphere { polar, azimuthal } => {
            let mut out = Vec::with_capacity(polar * azimuthal);
            for p in 0..polar {
                let beta = 0.5 * std::f64::consts::PI * (p as f64 + 0.5) / polar as f64;
                for a in 0..azimuthal {
                    let alpha = 2.0 * std::f64::consts::PI * a as f64 / azimuthal as f64;
                    out.push([beta.sin() * alpha.cos(), beta.sin() * alpha.sin(), beta.cos()]);
                }
            }
            out
        }
    }
}

/// Magnetisation distribution `P(m)` of `n·S` on an ensemble, indexed by
/// the number of spins found along `+n`.
fn magnetisation_distribution(ensemble: &[(f64, SpinBosonState)], n: [f64; 3]) -> Result<Vec<f64>> {
    let n_ions = ensemble[0].1.n_ions();
    // R = R_z(α) R_y(β) carries ẑ to n; measuring n·S on ψ is measuring S_z on R†ψ
    let beta = n[2].clamp(-1.0, 1.0).acos();
    let alpha = n[1].atan2(n[0]);
    let mut p = vec![0.0; n_ions + 1];
    for (w, s) in ensemble {
        let mut t = s.clone();
        apply_rotation(&mut t, &RotationParams::global(RotationAxis::Z, -alpha))?;
        apply_rotation(&mut t, &RotationParams::global(RotationAxis::Y, -beta))?;
        let fd = t.basis.fock_dim;
        for (spin, block) in t.amps.chunks(fd).enumerate() {
            p[spin.count_ones() as usize] += w * block.iter().map(|a| a.norm_sqr()).sum::<f64>();
        }
    }
    Ok(p)
}

/// Spin CFI of collective projective measurements for the ensembles at
/// `θ = 0, +CFI_STEP, −CFI_STEP`, maximised over `grid`.
fn cfi_from_family(
    family: [&[(f64, SpinBosonState)]; 3],
    grid: DirectionGrid,
) -> Result<(f64, [f64; 3])> {
    let dirs = directions(grid, mean_spin(family[0]));
    let per: Vec<Result<f64>> = par::map_slice(&dirs, |&n| {
        let p0 = magnetisation_distribution(family[0], n)?;
        let pp = magnetisation_distribution(family[1], n)?;
        let pm = magnetisation_distribution(family[2], n)?;
        Ok(p0
            .iter()
            .zip(pp.iter().zip(&pm))
            .filter(|(p, _)| **p >= CFI_MIN_PROBABILITY)
            .map(|(p, (a, b))| {
                let d = (a - b) / (2.0 * CFI_STEP);
                d * d / p
            })
            .sum())
    });
    let mut best = (f64::NEG_INFINITY, [0.0; 3]);
    for (f, n) in per.into_iter().zip(dirs) {
        let f = f?;
        if f > best.0 {
            best = (f, n);
        }
    }
    Ok(best)
}

/// Spin-only classical Fisher information of collective projective
/// measurements after the imprint `exp(−iθ Σ w_j σ^z_j/2)`, maximised over
/// `grid`. Returns `(F_C, best direction)`.
pub fn cfi_spin(
    ensemble: &[(f64, SpinBosonState)],
    weights: &[f64],
    grid: DirectionGrid,
) -> Result<(f64, [f64; 3])> {
    let imprinted = |theta: f64| -> Result<Vec<(f64, SpinBosonState)>> {
        let p = RotationParams { axis: RotationAxis::Z, angle: theta, target: RotationTarget::Weighted(weights.to_vec()) };
        ensemble
            .iter()
            .map(|(w, s)| {
                let mut t = s.clone();
                apply_rotation(&mut t, &p)?;
                Ok((*w, t))
            })
            .collect()
    };
    let (p, m) = (imprinted(CFI_STEP)?, imprinted(-CFI_STEP)?);
    cfi_from_family([ensemble, &p, &m], grid)
}

/// Spin CFI of the protocol's final states (noiseless), as [`qfi_spin_final`].
pub fn cfi_spin_final(cfg: &ProtocolConfig, chain: &ChainModel, grid: DirectionGrid) -> Result<(f64, [f64; 3])> {
    let trace = protocols::exact_trace(cfg, chain, &[0.0, CFI_STEP, -CFI_STEP], 0, 0.0)?;
    let ens: Vec<Vec<(f64, SpinBosonState)>> = trace.finals.into_iter().map(|s| vec![(1.0, s)]).collect();
    cfi_from_family([&ens[0], &ens[1], &ens[2]], grid)
}

/// Rényi-2 spin-boson entanglement entropy `−ln Tr ρ_s²`.
pub fn renyi_entropy(state: &SpinBosonState) -> f64 {
    let rho = state.reduced_spin_density();
    let purity: f64 = rho.iter().map(|x| x.norm_sqr()).sum();
    (-purity.ln()).max(0.0)
}
