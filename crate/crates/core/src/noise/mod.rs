//! Thermal and squeezing-phase noise, and closed-form large-N references.
//!
//! Phase noise: the squeezing phase of a trial is `φ + 2δ` with
//! `δ ~ N(0, σ²)`, i.e. the squeezed quadrature is rotated by `δ`; squeeze
//! and unsqueeze within a trial share `δ`.

use serde::{Deserialize, Serialize};

use crate::chain::ChainModel;
use crate::error::{Error, Result};
use crate::numerics::quadrature::normal_nodes;
use crate::par;
use crate::protocols::{exact_trace, Moments, ProtocolConfig, RunMetadata};

/// Largest σ handled with Gauss–Hermite nodes; wider distributions use the
/// periodic rule on the wrapped normal.
const GH_SIGMA_LIMIT: f64 = 0.5;
/// Relative change tolerated when the node count is doubled.
pub const QUADRATURE_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub nbar: f64,
    pub sigma_phase: f64,
    pub phase_quadrature_nodes: usize,
    pub thermal_tail_eps: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { nbar: 0.0, sigma_phase: 0.0, phase_quadrature_nodes: 41, thermal_tail_eps: 1e-6 }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sigma_phase > 0.0 && self.phase_quadrature_nodes < 11 {
            return Err(Error::InvalidArgument("phase quadrature needs at least 11 nodes".into()));
        }
        if !(self.thermal_tail_eps > 0.0 && self.thermal_tail_eps <= 1e-6) {
            return Err(Error::InvalidArgument("thermal tail mass must lie in (0, 1e-6]".into()));
        }
        Ok(())
    }
}

/// Shortest prefix of `p_n = n̄ⁿ/(1+n̄)ⁿ⁺¹` with mass at least `1 − eps`,
/// renormalised.
pub fn thermal_ensemble(nbar: f64, eps: f64) -> Vec<(usize, f64)> {
    if nbar <= 0.0 {
        return vec![(0, 1.0)];
    }
    let q = nbar / (1.0 + nbar);
    let mut out = Vec::new();
    let mut p = 1.0 / (1.0 + nbar);
    let mut total = 0.0;
    let mut n = 0;
    while total < 1.0 - eps {
        out.push((n, p));
        total += p;
        p *= q;
        n += 1;
    }
    out.iter_mut().for_each(|(_, w)| *w /= total);
    out
}

/// Quadrature rule `(δ, weight)` for `δ ~ N(0, σ²)` applied to a function
/// that is π-periodic in `δ`.
pub fn phase_nodes(sigma: f64, order: usize) -> Vec<(f64, f64)> {
    if sigma == 0.0 {
        return vec![(0.0, 1.0)];
    }
    if sigma <= GH_SIGMA_LIMIT {
        return normal_nodes(order, sigma);
    }
    // periodic trapezoid rule against the wrapped-normal density on [−π/2, π/2)
    let period = std::f64::consts::PI;
    let h = period / order as f64;
    let nodes: Vec<f64> = (0..order).map(|k| -0.5 * period + (k as f64 + 0.5) * h).collect();
    let images = (6.0 * sigma / period).ceil() as i64 + 2;
    let density = |x: f64| {
        (-images..=images)
            .map(|m| {
                let y = x + m as f64 * period;
                (-0.5 * y * y / (sigma * sigma)).exp()
            })
            .sum::<f64>()
    };
    let raw: Vec<f64> = nodes.iter().map(|&x| density(x)).collect();
    let total: f64 = raw.iter().sum();
    nodes.into_iter().zip(raw).map(|(x, w)| (x, w / total)).collect()
}

/// Averages `eval(δ)` over the phase distribution, checking the result
/// against a rule with twice the nodes.
pub fn phase_average<F>(sigma: f64, order: usize, eval: F) -> Result<Vec<Moments>>
where
    F: Fn(f64) -> Result<Vec<Moments>> + Sync + Send,
{
    if sigma == 0.0 {
        return eval(0.0);
    }
    let avg = |nodes: Vec<(f64, f64)>| -> Result<Vec<Moments>> {
        let per: Vec<Result<Vec<Moments>>> = par::map_slice(&nodes, |(x, _)| eval(*x));
        let mut acc: Option<Vec<Moments>> = None;
        for ((_, w), m) in nodes.iter().zip(per) {
            let m = m?;
            let a = acc.get_or_insert_with(|| vec![Moments::default(); m.len()]);
            for (a, m) in a.iter_mut().zip(&m) {
                a.mean += w * m.mean;
                a.second += w * m.second;
            }
        }
        Ok(acc.unwrap_or_default())
    };
    let coarse = avg(phase_nodes(sigma, order))?;
    let fine = avg(phase_nodes(sigma, 2 * order))?;
    let mut worst = 0.0f64;
    for (c, f) in coarse.iter().zip(&fine) {
        for (x, y) in [(c.mean, f.mean), (c.second, f.second)] {
            worst = worst.max((x - y).abs() / y.abs().max(1.0));
        }
    }
    if worst > QUADRATURE_TOL {
        return Err(Error::QuadratureOrder { relative_change: worst });
    }
    Ok(fine)
}

/// Exact-engine moments at each θ, averaged over the thermal mixture and
/// the phase distribution of `cfg`.
pub fn exact_moments(cfg: &ProtocolConfig, chain: &ChainModel, thetas: &[f64]) -> Result<(Vec<Moments>, RunMetadata)> {
    let op = cfg.observable_for(chain).operator(cfg.n_ions)?;
    let members = thermal_ensemble(cfg.nbar, 1e-6);
    let meta = std::sync::Mutex::new(RunMetadata::default());
    let eval = |occupation: usize, delta: f64| -> Result<Vec<Moments>> {
        let trace = exact_trace(cfg, chain, thetas, occupation, delta)?;
        {
            let mut m = meta.lock().unwrap();
            m.n_max = m.n_max.max(trace.n_max);
            m.leakage = m.leakage.max(trace.leakage);
        }
        Ok(trace
            .finals
            .iter()
            .map(|s| {
                let (mean, second) = op.moments(s);
                Moments { mean, second }
            })
            .collect())
    };
    let mut total = vec![Moments::default(); thetas.len()];
    for (occupation, w) in members {
        let m = phase_average(cfg.sigma_phase, cfg.gh_nodes, |d| eval(occupation, d))?;
        for (t, m) in total.iter_mut().zip(&m) {
            t.mean += w * m.mean;
            t.second += w * m.second;
        }
    }
    Ok((total, meta.into_inner().unwrap()))
}

/// Large-N NR gain with phase noise.
pub fn analytic_nr_phase(r: f64, sigma: f64) -> f64 {
    let c = (-2.0 * sigma * sigma).exp();
    0.5 * (-2.0 * r).exp() * (1.0 + c) + 0.5 * (2.0 * r).exp() * (1.0 - c)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NrPhaseOptimum {
    /// `½ log(√(1−σ²)/σ)`; `None` for `σ ≥ 1`.
    pub r_opt: Option<f64>,
    /// `√((1 − e^{−2σ²})(1 + e^{−2σ²}))`.
    pub gain_opt: f64,
}

pub fn analytic_nr_phase_optimum(sigma: f64) -> NrPhaseOptimum {
    let c = (-2.0 * sigma * sigma).exp();
    let r_opt = (sigma > 0.0 && sigma < 1.0).then(|| 0.5 * ((1.0 - sigma * sigma).sqrt() / sigma).ln());
    NrPhaseOptimum { r_opt, gain_opt: ((1.0 - c) * (1.0 + c)).sqrt() }
}

/// Large-N SA gain with phase noise, `[cosh r + e^{−2σ²} sinh r]^{−2}`.
pub fn analytic_sa_phase(r: f64, sigma: f64) -> f64 {
    let c = (-2.0 * sigma * sigma).exp();
    (r.cosh() + c * r.sinh()).powi(-2)
}

/// Thermal optimum `r_opt = ½ log(N^{2/3}/(2n̄+1))` and gain scale `(2n̄+1)²`.
pub fn analytic_thermal(nbar: f64, n_ions: usize) -> (f64, f64) {
    let k = 2.0 * nbar + 1.0;
    (0.5 * ((n_ions as f64).powf(2.0 / 3.0) / k).ln(), k * k)
}

#[cfg(test)]
mod tests;
