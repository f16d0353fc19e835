//! Discrete truncated Wigner engine.
//!
//! Each trajectory carries classical Pauli symbols `s_j = (s^x, s^y, s^z)`
//! sampled from the discrete Wigner function of `|↓⟩` (`s^z = −1`,
//! `s^x, s^y = ±1`) and complex boson amplitudes `a = (X + iY)/2` sampled
//! from the Gaussian Wigner function. Gates act as the classical maps of
//! their Heisenberg equations.

mod engine;
pub mod integrator;

pub use engine::{protocol_moments, spin_quadrature_curve, QuadraturePoint, TwaEstimate};
pub(crate) use engine::quadrature_weights;

use std::path::Path;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fockspace::{write_container, Axis, ObservableKind, ObservableSpec, StateHeader, FORMAT_VERSION};
use crate::par;
use integrator::{integrate, StepFailure, STEP_TOL};

pub const DEFAULT_TRAJ_MOMENTS: usize = 10_000;
pub const DEFAULT_TRAJ_GAIN: usize = 100_000;
pub const JACKKNIFE_BLOCKS: usize = 32;
/// Runs with a larger fraction of failed trajectories are rejected.
pub const MAX_EXCLUDED_FRACTION: f64 = 1e-3;

/// Random stream of trajectory `stream` under master `seed`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Spin part of a phase-space point.
#[derive(Clone, Debug, PartialEq)]
pub enum Spins {
    PerSite(Vec<[f64; 3]>),
    /// Sum `S = Σ s_j` only; exact when every coupling, rotation and
    /// observable weight is uniform across the chain.
    Collective { sum: [f64; 3], n: usize },
}

impl Spins {
    pub fn collect(sites: &[[f64; 3]]) -> Self {
        let mut sum = [0.0; 3];
        for s in sites {
            for a in 0..3 {
                sum[a] += s[a];
            }
        }
        Spins::Collective { sum, n: sites.len() }
    }
}

/// One phase-space point.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub spins: Spins,
    pub bosons: Vec<C64>,
}

fn rotation_matrix(n: [f64; 3], angle: f64) -> [[f64; 3]; 3] {
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    let [x, y, z] = n;
    [
        [c + t * x * x, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, c + t * y * y, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, c + t * z * z],
    ]
}

fn mat_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

fn axis_index(axis: Axis) -> usize {
    match axis {
        Axis::X => 0,
        Axis::Y => 1,
        Axis::Z => 2,
    }
}

impl Trajectory {
    /// Draws a point for `n_ions` spins in `|↓⟩` and boson slots in thermal
    /// states with the given occupations.
    pub fn sample<R: Rng>(rng: &mut R, n_ions: usize, nbar: &[f64], collective: bool) -> Self {
        let mut sites = Vec::with_capacity(n_ions);
        let mut bits = 0u64;
        for j in 0..n_ions {
            if j % 32 == 0 {
                bits = rng.random();
            }
            let k = 2 * (j % 32);
            let sx = if bits >> k & 1 == 1 { 1.0 } else { -1.0 };
            let sy = if bits >> (k + 1) & 1 == 1 { 1.0 } else { -1.0 };
            sites.push([sx, sy, -1.0]);
        }
        let bosons = nbar
            .iter()
            .map(|n| {
                let w = (2.0 * n + 1.0).sqrt();
                let x: f64 = rng.sample(StandardNormal);
                let y: f64 = rng.sample(StandardNormal);
                C64::new(0.5 * w * x, 0.5 * w * y)
            })
            .collect();
        let spins = if collective { Spins::collect(&sites) } else { Spins::PerSite(sites) };
        Trajectory { spins, bosons }
    }

    pub fn n_ions(&self) -> usize {
        match &self.spins {
            Spins::PerSite(s) => s.len(),
            Spins::Collective { n, .. } => *n,
        }
    }

    /// `a → a cosh r ∓ a* e^{iφ} sinh r` (upper sign for `S(ζ)`).
    pub fn squeeze(&mut self, slot: usize, r: f64, phi: f64, adjoint: bool) {
        let a = self.bosons[slot];
        let e = C64::from_polar(r.sinh(), phi);
        let sign = if adjoint { 1.0 } else { -1.0 };
        self.bosons[slot] = a * r.cosh() + sign * a.conj() * e;
    }

    /// `a_m → cos(κ/2) a_m + i sin(κ/2) a_n` for the two slots.
    pub fn beam_splitter(&mut self, kappa: f64) {
        let (s, c) = (0.5 * kappa).sin_cos();
        let i = C64::new(0.0, 1.0);
        let (a0, a1) = (self.bosons[0], self.bosons[1]);
        self.bosons[0] = c * a0 + i * s * a1;
        self.bosons[1] = c * a1 + i * s * a0;
    }

    /// Active rotation of each spin by `angle · w_j` about `n`.
    pub fn rotate(&mut self, n: [f64; 3], angle: f64, weights: &[f64]) -> Result<()> {
        match &mut self.spins {
            Spins::PerSite(sites) => {
                let uniform = weights.iter().all(|w| *w == weights[0]);
                let r0 = rotation_matrix(n, angle * weights[0]);
                for (s, w) in sites.iter_mut().zip(weights) {
                    let r = if uniform { r0 } else { rotation_matrix(n, angle * w) };
                    *s = mat_vec(&r, *s);
                }
            }
            Spins::Collective { sum, .. } => {
                if weights.iter().any(|w| (w - weights[0]).abs() > 1e-15) {
                    return Err(Error::InvalidArgument("collective trajectories need uniform rotations".into()));
                }
                *sum = mat_vec(&rotation_matrix(n, angle * weights[0]), *sum);
            }
        }
        Ok(())
    }

    /// Mean-field TC flow for `duration` on `slot` (couplings negated for
    /// the adjoint).
    pub fn evolve_tc(
        &mut self,
        slot: usize,
        couplings: &[f64],
        duration: f64,
        adjoint: bool,
    ) -> std::result::Result<(), StepFailure> {
        let sg = if adjoint { -1.0 } else { 1.0 };
        let a = self.bosons[slot];
        match &mut self.spins {
            Spins::PerSite(sites) => {
                let n = sites.len();
                let mut y = Vec::with_capacity(3 * n + 2);
                sites.iter().for_each(|s| y.extend_from_slice(s));
                y.extend_from_slice(&[a.re, a.im]);
                let g: Vec<f64> = couplings.iter().map(|g| sg * g).collect();
                integrate(&mut y, duration, STEP_TOL, |y, d| per_site_rhs(&g, y, d))?;
                for (j, s) in sites.iter_mut().enumerate() {
                    *s = [y[3 * j], y[3 * j + 1], y[3 * j + 2]];
                }
                self.bosons[slot] = C64::new(y[3 * n], y[3 * n + 1]);
            }
            Spins::Collective { sum, .. } => {
                let g = sg * couplings[0];
                let mut y = [sum[0], sum[1], sum[2], a.re, a.im];
                integrate(&mut y, duration, STEP_TOL, |y, d| collective_rhs(g, y, d))?;
                sum.copy_from_slice(&y[..3]);
                self.bosons[slot] = C64::new(y[3], y[4]);
            }
        }
        Ok(())
    }

    /// Symbol of `O = ½ Σ w_j σ^axis_j` and its square, the estimator of
    /// `O²`.
    pub fn spin_moments(&self, axis: Axis, weights: &[f64]) -> (f64, f64) {
        let k = axis_index(axis);
        let m = match &self.spins {
            Spins::PerSite(sites) => 0.5 * sites.iter().zip(weights).map(|(s, w)| w * s[k]).sum::<f64>(),
            Spins::Collective { sum, .. } => 0.5 * weights[0] * sum[k],
        };
        (m, m * m)
    }

    /// `(X, X²)` or `(Y, Y²)` symbols of a boson slot.
    pub fn boson_moments(&self, slot: usize, y: bool) -> (f64, f64) {
        let a = self.bosons[slot];
        let q = if y { 2.0 * a.im } else { 2.0 * a.re };
        (q, q * q)
    }

    /// Classical excitation number `Σ_j (s^z_j + 1)/2 + Σ |a|²`.
    pub fn excitation(&self) -> f64 {
        let spins = match &self.spins {
            Spins::PerSite(s) => s.iter().map(|s| 0.5 * (s[2] + 1.0)).sum::<f64>(),
            Spins::Collective { sum, n, .. } => 0.5 * (sum[2] + *n as f64),
        };
        spins + self.bosons.iter().map(|a| a.norm_sqr()).sum::<f64>()
    }
}

fn per_site_rhs(g: &[f64], y: &[f64], d: &mut [f64]) {
    let n = g.len();
    let (ar, ai) = (y[3 * n], y[3 * n + 1]);
    let (mut dar, mut dai) = (0.0, 0.0);
    for (j, &gj) in g.iter().enumerate() {
        let (sx, sy, sz) = (y[3 * j], y[3 * j + 1], y[3 * j + 2]);
        d[3 * j] = -2.0 * gj * ai * sz;
        d[3 * j + 1] = -2.0 * gj * ar * sz;
        d[3 * j + 2] = 2.0 * gj * (ar * sy + ai * sx);
        dar -= 0.5 * gj * sy;
        dai -= 0.5 * gj * sx;
    }
    d[3 * n] = dar;
    d[3 * n + 1] = dai;
}

fn collective_rhs(g: f64, y: &[f64], d: &mut [f64]) {
    let (sx, sy, sz, ar, ai) = (y[0], y[1], y[2], y[3], y[4]);
    d[0] = -2.0 * g * ai * sz;
    d[1] = -2.0 * g * ar * sz;
    d[2] = 2.0 * g * (ar * sy + ai * sx);
    d[3] = -0.5 * g * sy;
    d[4] = -0.5 * g * sx;
}

/// Per-block sums of per-trajectory statistics, for means and jackknife
/// errors. Blocks are contiguous ranges of trajectory index.
#[derive(Clone, Debug, PartialEq)]
pub struct Blocks {
    pub sums: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
}

impl Blocks {
    /// Reduces ordered per-trajectory rows (`None` = excluded).
    pub fn from_rows(rows: &[Option<Vec<f64>>], width: usize) -> Self {
        let n = rows.len();
        let k = JACKKNIFE_BLOCKS.min(n.max(1));
        let mut sums = vec![vec![0.0; width]; k];
        let mut counts = vec![0; k];
        for b in 0..k {
            let lo = b * n / k;
            let hi = (b + 1) * n / k;
            let included: Vec<&Vec<f64>> = rows[lo..hi].iter().flatten().collect();
            counts[b] = included.len();
            for (c, sum) in sums[b].iter_mut().enumerate() {
                let col: Vec<f64> = included.iter().map(|r| r[c]).collect();
                *sum = par::pairwise_sum(&col);
            }
        }
        Blocks { sums, counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn mean(&self) -> Vec<f64> {
        let width = self.sums[0].len();
        let n = self.total() as f64;
        (0..width).map(|c| par::pairwise_sum(&self.sums.iter().map(|s| s[c]).collect::<Vec<_>>()) / n).collect()
    }

    /// Jackknife standard error of `f(means)` over leave-one-block-out
    /// samples; `None` below 64 trajectories.
    pub fn jackknife<F: Fn(&[f64]) -> f64>(&self, f: F) -> Option<f64> {
        if self.total() < 64 {
            return None;
        }
        let width = self.sums[0].len();
        let n = self.total() as f64;
        let k = self.sums.len();
        let totals: Vec<f64> = (0..width).map(|c| self.sums.iter().map(|s| s[c]).sum()).collect();
        let loo: Vec<f64> = (0..k)
            .map(|b| {
                let m: Vec<f64> = (0..width).map(|c| (totals[c] - self.sums[b][c]) / (n - self.counts[b] as f64)).collect();
                f(&m)
            })
            .collect();
        let avg = loo.iter().sum::<f64>() / k as f64;
        let var = loo.iter().map(|x| (x - avg).powi(2)).sum::<f64>() * (k as f64 - 1.0) / k as f64;
        Some(var.sqrt())
    }
}

/// Stored ensemble of phase-space points.
#[derive(Clone, Debug)]
pub struct TrajectoryEnsemble {
    pub n_traj: usize,
    pub n_ions: usize,
    pub trajectories: Vec<Trajectory>,
    pub seed: u64,
    pub stream_ids: Vec<u64>,
    /// Trajectories dropped after integrator failures.
    pub excluded: Vec<bool>,
}

/// Mean, variance and jackknife error of a TWA estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentEstimate {
    pub mean: f64,
    pub variance: f64,
    /// Error of the variance; `None` below 64 trajectories.
    pub stderr: Option<f64>,
    pub stderr_mean: Option<f64>,
}

/// Samples `n_traj` points for `n_ions` spins and one boson slot in a
/// squeezed thermal state.
pub fn sample_initial(n_traj: usize, n_ions: usize, r: f64, phi: f64, nbar: f64, seed: u64) -> TrajectoryEnsemble {
    let trajectories = par::map_indexed(n_traj, |i| {
        let mut rng = rng_for(seed, i as u64);
        let mut t = Trajectory::sample(&mut rng, n_ions, &[nbar], false);
        t.squeeze(0, r, phi, false);
        t
    });
    TrajectoryEnsemble {
        n_traj,
        n_ions,
        trajectories,
        seed,
        stream_ids: (0..n_traj as u64).collect(),
        excluded: vec![false; n_traj],
    }
}

fn check_failures(excluded: usize, total: usize) -> Result<()> {
    if excluded as f64 > MAX_EXCLUDED_FRACTION * total as f64 {
        return Err(Error::TrajectoryFailures { excluded, total });
    }
    Ok(())
}

impl TrajectoryEnsemble {
    /// TC flow on every trajectory; returns the number of newly excluded
    /// trajectories.
    pub fn evolve(&mut self, couplings: &[f64], slot: usize, duration: f64, adjoint: bool) -> Result<usize> {
        if couplings.len() != self.n_ions {
            return Err(Error::InvalidArgument(format!("{} couplings for {} ions", couplings.len(), self.n_ions)));
        }
        let excluded = &self.excluded;
        let out: Vec<(Trajectory, bool)> = par::map_indexed(self.n_traj, |i| {
            let mut t = self.trajectories[i].clone();
            let failed = excluded[i] || t.evolve_tc(slot, couplings, duration, adjoint).is_err();
            (t, failed)
        });
        let mut newly = 0;
        for (i, (t, failed)) in out.into_iter().enumerate() {
            if failed && !self.excluded[i] {
                newly += 1;
                self.excluded[i] = true;
            }
            self.trajectories[i] = t;
        }
        check_failures(self.excluded.iter().filter(|x| **x).count(), self.n_traj)?;
        Ok(newly)
    }

    /// Moments of a spin or boson quadrature observable.
    pub fn estimate(&self, obs: &ObservableSpec) -> Result<MomentEstimate> {
        let rows: Vec<Option<Vec<f64>>> = match obs.kind {
            ObservableKind::BosonX | ObservableKind::BosonY => {
                let slot = obs.mode_slot.unwrap_or(0);
                let y = obs.kind == ObservableKind::BosonY;
                self.rows(|t| {
                    let (a, b) = t.boson_moments(slot, y);
                    vec![a, b]
                })
            }
            ObservableKind::ExcitationNumber => {
                return Err(Error::InvalidArgument("excitation number has no TWA second-moment estimator".into()))
            }
            _ => {
                let w = obs.spin_weights(self.n_ions)?;
                let axis = obs.axis().unwrap();
                self.rows(|t| {
                    let (a, b) = t.spin_moments(axis, &w);
                    vec![a, b]
                })
            }
        };
        let blocks = Blocks::from_rows(&rows, 2);
        let m = blocks.mean();
        Ok(MomentEstimate {
            mean: m[0],
            variance: m[1] - m[0] * m[0],
            stderr: blocks.jackknife(|m| m[1] - m[0] * m[0]),
            stderr_mean: blocks.jackknife(|m| m[0]),
        })
    }

    fn rows<F: Fn(&Trajectory) -> Vec<f64> + Sync + Send>(&self, f: F) -> Vec<Option<Vec<f64>>> {
        par::map_indexed(self.n_traj, |i| (!self.excluded[i]).then(|| f(&self.trajectories[i])))
    }

    /// Writes the ensemble to the binary container: per trajectory the
    /// `3N` spin symbols followed by `re, im` of each boson slot.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut payload = Vec::new();
        for t in &self.trajectories {
            match &t.spins {
                Spins::PerSite(s) => s.iter().for_each(|v| payload.extend_from_slice(v)),
                Spins::Collective { .. } => {
                    return Err(Error::InvalidArgument("only per-site ensembles can be exported".into()))
                }
            }
            t.bosons.iter().for_each(|a| payload.extend_from_slice(&[a.re, a.im]));
        }
        let header = StateHeader {
            format: "twa_ensemble".into(),
            version: FORMAT_VERSION,
            basis_ordering: "trajectory-major(sx,sy,sz per ion; re,im per slot)".into(),
            spec: None,
            payload_len: payload.len(),
            metadata: serde_json::json!({
                "n_traj": self.n_traj,
                "n_ions": self.n_ions,
                "n_slots": self.trajectories.first().map_or(0, |t| t.bosons.len()),
                "seed": self.seed,
                "excluded": self.excluded.iter().filter(|x| **x).count(),
            }),
        };
        write_container(path, &header, &payload)
    }
}

#[cfg(test)]
mod tests;
