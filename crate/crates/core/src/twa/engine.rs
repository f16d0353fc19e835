use rand::Rng;
use rand_distr::StandardNormal;

use super::{check_failures, rng_for, Blocks, Trajectory, DEFAULT_TRAJ_MOMENTS};
use crate::chain::{ChainModel, Mode};
use crate::dynamics::T_PI;
use crate::error::{Error, Result};
use crate::fockspace::Axis;
use crate::par;
use crate::protocols::{build_sequence, Imprint, Moments, ProtocolConfig, Step};

/// TWA moments at each requested θ, with block sums for error analysis.
#[derive(Clone, Debug)]
pub struct TwaEstimate {
    pub thetas: Vec<f64>,
    pub n_traj: usize,
    pub excluded: usize,
    pub collective: bool,
    pub blocks: Blocks,
    pub warnings: Vec<String>,
}

fn unpack(flat: &[f64]) -> Vec<Moments> {
    flat.chunks(2).map(|c| Moments { mean: c[0], second: c[1] }).collect()
}

impl TwaEstimate {
    pub fn moments(&self) -> Vec<Moments> {
        unpack(&self.blocks.mean())
    }

    /// Jackknife error of `f` applied to the per-θ moments.
    pub fn jackknife<F: Fn(&[Moments]) -> f64>(&self, f: F) -> Option<f64> {
        self.blocks.jackknife(|flat| f(&unpack(flat)))
    }
}

fn apply_step(t: &mut Trajectory, step: &Step, delta: f64, n_ions: usize) -> Result<bool> {
    match step {
        Step::Squeeze { slot, r, phi, adjoint } => t.squeeze(*slot, *r, phi + 2.0 * delta, *adjoint),
        Step::Tc { slot, couplings, adjoint } => {
            if t.evolve_tc(*slot, couplings, T_PI, *adjoint).is_err() {
                return Ok(false);
            }
        }
        Step::Rotate(p) => t.rotate(p.axis.unit_vector(), p.angle, &p.target.weights(n_ions)?)?,
        Step::BeamSplitter { kappa, .. } => t.beam_splitter(*kappa),
    }
    Ok(true)
}

/// Moments of the readout observable of `cfg` at each θ. Every trajectory
/// carries all θ copies of one initial sample, so differences between
/// angles are free of sampling noise from the initial state.
pub fn protocol_moments(cfg: &ProtocolConfig, chain: &ChainModel, thetas: &[f64]) -> Result<TwaEstimate> {
    cfg.validate()?;
    let n = cfg.n_ions;
    let seq = build_sequence(cfg, chain, 0.0)?;
    let obs = cfg.observable_for(chain);
    let weights = obs.spin_weights(n)?;
    let axis = obs.axis().ok_or_else(|| Error::InvalidArgument("TWA readout must be a spin observable".into()))?;
    let uniform = |w: &[f64]| w.iter().all(|x| (x - w[0]).abs() <= 1e-15);
    let collective = cfg.mode == Mode::Cm
        && !cfg.bs_swap()
        && cfg.imprint == Imprint::GlobalZ
        && uniform(&weights)
        && uniform(&chain.couplings_cm);
    let n_slots = if cfg.bs_swap() { 2 } else { 1 };
    let nbar: Vec<f64> = (0..n_slots).map(|k| if k == 0 { cfg.nbar } else { 0.0 }).collect();
    let n_traj = cfg.n_traj.unwrap_or(DEFAULT_TRAJ_MOMENTS);
    if n_traj == 0 {
        return Err(Error::InvalidArgument("n_traj must be positive".into()));
    }
    let run_one = |i: usize| -> Result<Option<Vec<f64>>> {
        let mut rng = rng_for(cfg.seed, i as u64);
        let mut t = Trajectory::sample(&mut rng, n, &nbar, collective);
        let delta = if cfg.sigma_phase > 0.0 { cfg.sigma_phase * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
        for step in &seq.prefix {
            if !apply_step(&mut t, step, delta, n)? {
                return Ok(None);
            }
        }
        let mut row = Vec::with_capacity(2 * thetas.len());
        for &theta in thetas {
            let mut c = t.clone();
            c.rotate([0.0, 0.0, 1.0], theta, &seq.imprint_weights)?;
            for step in &seq.suffix {
                if !apply_step(&mut c, step, delta, n)? {
                    return Ok(None);
                }
            }
            let (m, m2) = c.spin_moments(axis, &weights);
            if !(m.is_finite() && m2.is_finite()) {
                return Ok(None);
            }
            row.extend_from_slice(&[m, m2]);
        }
        Ok(Some(row))
    };
    let rows = par::map_indexed(n_traj, run_one).into_iter().collect::<Result<Vec<_>>>()?;
    let excluded = rows.iter().filter(|r| r.is_none()).count();
    check_failures(excluded, n_traj)?;
    let mut warnings = Vec::new();
    if n_traj < 64 {
        warnings.push(format!("{n_traj} trajectories: no error estimate"));
    }
    if excluded > 0 {
        warnings.push(format!("{excluded} of {n_traj} trajectories excluded"));
    }
    Ok(TwaEstimate {
        thetas: thetas.to_vec(),
        n_traj,
        excluded,
        collective,
        blocks: Blocks::from_rows(&rows, 2 * thetas.len()),
        warnings,
    })
}

/// Spin quadrature variances during the squeezing-transfer stage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraturePoint {
    pub time: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub stderr_x: Option<f64>,
    pub stderr_y: Option<f64>,
}

/// Variances of `½ Σ w_j σ^x_j` and `½ Σ w_j σ^y_j` at each of the
/// increasing `times` of TC evolution after squeezing by `r` (phase 0).
/// `weights` defaults to the mode's spin weights: ones for CM, `√N g_B`
/// for B.
pub fn spin_quadrature_curve(
    chain: &ChainModel,
    mode: Mode,
    r: f64,
    times: &[f64],
    n_traj: usize,
    seed: u64,
) -> Result<Vec<QuadraturePoint>> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|t| *t < 0.0) {
        return Err(Error::InvalidArgument("times must be non-negative and increasing".into()));
    }
    let n = chain.n_ions;
    let g = chain.coupling_vector(mode).to_vec();
    let weights = quadrature_weights(chain, mode);
    let rows = par::map_indexed(n_traj, |i| {
        let mut rng = rng_for(seed, i as u64);
        let mut t = Trajectory::sample(&mut rng, n, &[0.0], false);
        t.squeeze(0, r, 0.0, false);
        let mut row = Vec::with_capacity(4 * times.len());
        let mut now = 0.0;
        for &time in times {
            t.evolve_tc(0, &g, time - now, false).ok()?;
            now = time;
            let (x, x2) = t.spin_moments(Axis::X, &weights);
            let (y, y2) = t.spin_moments(Axis::Y, &weights);
            row.extend_from_slice(&[x, x2, y, y2]);
        }
        Some(row)
    });
    let excluded = rows.iter().filter(|r| r.is_none()).count();
    check_failures(excluded, n_traj)?;
    let blocks = Blocks::from_rows(&rows, 4 * times.len());
    let mean = blocks.mean();
    Ok(times
        .iter()
        .enumerate()
        .map(|(k, &time)| {
            let o = 4 * k;
            QuadraturePoint {
                time,
                var_x: mean[o + 1] - mean[o] * mean[o],
                var_y: mean[o + 3] - mean[o + 2] * mean[o + 2],
                stderr_x: blocks.jackknife(|m| m[o + 1] - m[o] * m[o]),
                stderr_y: blocks.jackknife(|m| m[o + 3] - m[o + 2] * m[o + 2]),
            }
        })
        .collect())
}

pub(crate) fn quadrature_weights(chain: &ChainModel, mode: Mode) -> Vec<f64> {
    match mode {
        Mode::Cm => vec![1.0; chain.n_ions],
        Mode::B => {
            let s = (chain.n_ions as f64).sqrt();
            chain.couplings_b.iter().map(|g| s * g).collect()
        }
    }
}

