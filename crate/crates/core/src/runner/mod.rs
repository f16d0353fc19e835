//! Sweeps, optimal-gain search, scaling fits and tabular output.

use std::io::Write;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::chain::{ChainModel, Mode};
use crate::dynamics::T_PI;
use crate::error::{Error, Result};
use crate::fockspace::{default_cutoff, ObservableKind, ObservableSpec};
use crate::metrology::{self, DirectionGrid, GainReport, DELTA_EXACT, DELTA_TWA, QFI_SPIN_THETAS};
use crate::protocols::{self, Engine, Protocol, ProtocolConfig};
use crate::twa;

/// Parameter varied by a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    R,
    Nbar,
    SigmaPhase,
    NIons,
    Theta,
}

/// Optional exact-engine analyses attached to each record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Analyses {
    pub qfi: bool,
    pub qfi_spin: bool,
    pub cfi: bool,
    pub renyi: bool,
}

impl Default for Analyses {
    fn default() -> Self {
        Self { qfi: true, qfi_spin: false, cfi: false, renyi: true }
    }
}

/// Settings of [`optimize_r`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizeOptions {
    pub bracket: [f64; 2],
    pub prescan: usize,
    /// Final bracket width in `r`.
    pub tol: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self { bracket: [0.05, 1.6], prescan: 12, tol: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepPlan {
    pub base: ProtocolConfig,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// Replace each point by the optimum over `r`.
    pub optimize_r: bool,
    pub optimize: OptimizeOptions,
    pub analyses: Analyses,
    /// NR on the B mode: emit rows for both weighted 𝒮_z and S_{z,−}.
    pub both_b_observables: bool,
    /// Fill `wall_ms`; disable for byte-identical reruns.
    pub record_wall_time: bool,
}

impl Default for SweepPlan {
    fn default() -> Self {
        Self {
            base: ProtocolConfig::default(),
            axis: SweepAxis::R,
            values: Vec::new(),
            optimize_r: false,
            optimize: OptimizeOptions::default(),
            analyses: Analyses::default(),
            both_b_observables: true,
            record_wall_time: true,
        }
    }
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.values.is_empty() {
            return bad("sweep has no values");
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return bad("sweep values must be finite");
        }
        if self.values.windows(2).any(|w| w[1] < w[0]) {
            return bad("sweep values must be sorted");
        }
        if self.axis == SweepAxis::NIons && self.values.iter().any(|v| v.fract() != 0.0 || *v < 2.0) {
            return bad("ion counts must be integers ≥ 2");
        }
        if self.optimize_r && self.axis == SweepAxis::R {
            return bad("cannot optimise r while sweeping r");
        }
        let [lo, hi] = self.optimize.bracket;
        if self.optimize_r && !(lo >= 0.0 && hi > lo && self.optimize.prescan >= 3 && self.optimize.tol > 0.0) {
            return bad("invalid optimisation bracket");
        }
        Ok(())
    }

    /// Configurations of every row, in output order.
    pub fn configs(&self) -> Result<Vec<ProtocolConfig>> {
        self.validate()?;
        let mut out = Vec::new();
        for (i, &v) in self.values.iter().enumerate() {
            let mut cfg = self.base.clone();
            match self.axis {
                SweepAxis::R => cfg.r = v,
                SweepAxis::Nbar => cfg.nbar = v,
                SweepAxis::SigmaPhase => cfg.sigma_phase = v,
                SweepAxis::NIons => {
                    cfg.n_ions = v as usize;
                    cfg.observable.weights = None;
                }
                SweepAxis::Theta => cfg.theta = v,
            }
            cfg.seed = derive_seed(self.base.seed, i as u64);
            if self.both_b_observables && cfg.protocol == Protocol::Nr && cfg.mode == Mode::B {
                for kind in [ObservableKind::SWeightedZ, ObservableKind::SZMinus] {
                    out.push(ProtocolConfig { observable: ObservableSpec::new(kind), ..cfg.clone() });
                }
            } else {
                out.push(cfg);
            }
        }
        Ok(out)
    }
}

/// Seed of sweep point `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

/// One output row; field order is the CSV column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub protocol: Protocol,
    pub mode: Mode,
    pub engine: Engine,
    pub n_ions: usize,
    pub n_max: Option<usize>,
    pub r: f64,
    pub xi2b_db: f64,
    pub phi: f64,
    pub theta_delta: f64,
    pub nbar: f64,
    pub sigma_phase: f64,
    pub observable: ObservableKind,
    pub gain: Option<f64>,
    pub gain_db: Option<f64>,
    pub variance: Option<f64>,
    pub derivative: Option<f64>,
    pub qfi: Option<f64>,
    pub qfi_spin: Option<f64>,
    pub cfi_spin: Option<f64>,
    pub renyi: Option<f64>,
    pub stderr_gain: Option<f64>,
    pub n_traj: Option<usize>,
    pub seed: u64,
    pub wall_ms: f64,
    /// `ok`, `warning: …` or `error: …`.
    pub status: String,
}

impl SweepRecord {
    pub fn succeeded(&self) -> bool {
        !self.status.starts_with("error")
    }
}

/// Boson squeezing `ξ²_b = e^{−2r}` in dB.
pub fn xi2b_db(r: f64) -> f64 {
    metrology::to_db((-2.0 * r).exp())
}

pub fn default_delta(cfg: &ProtocolConfig) -> f64 {
    cfg.delta_theta.unwrap_or(match cfg.engine {
        Engine::Exact => DELTA_EXACT,
        Engine::Twa => DELTA_TWA,
    })
}

fn blank_record(cfg: &ProtocolConfig) -> SweepRecord {
    SweepRecord {
        protocol: cfg.protocol,
        mode: cfg.mode,
        engine: cfg.engine,
        n_ions: cfg.n_ions,
        n_max: None,
        r: cfg.r,
        xi2b_db: xi2b_db(cfg.r),
        phi: cfg.phi,
        theta_delta: default_delta(cfg),
        nbar: cfg.nbar,
        sigma_phase: cfg.sigma_phase,
        observable: cfg.observable.kind,
        gain: None,
        gain_db: None,
        variance: None,
        derivative: None,
        qfi: None,
        qfi_spin: None,
        cfi_spin: None,
        renyi: None,
        stderr_gain: None,
        n_traj: None,
        seed: cfg.seed,
        wall_ms: 0.0,
        status: "ok".into(),
    }
}

/// Result of [`optimize_r`].
#[derive(Clone, Debug, PartialEq)]
pub struct Optimum {
    pub r_opt: f64,
    pub report: GainReport,
    pub evaluations: usize,
    pub warning: Option<String>,
}

/// Minimises the gain of `cfg` over `r`: a uniform pre-scan locates the
/// bracket, then golden-section search narrows it to `opts.tol`. All
/// evaluations share `cfg.seed`.
pub fn optimize_r(cfg: &ProtocolConfig, opts: &OptimizeOptions) -> Result<Optimum> {
    optimize_by(opts, |r| metrology::gain_from_observable(&ProtocolConfig { r, ..cfg.clone() }, default_delta(cfg)))
}

/// [`optimize_r`] for an arbitrary gain evaluator.
pub fn optimize_by<F>(opts: &OptimizeOptions, eval: F) -> Result<Optimum>
where
    F: Fn(f64) -> Result<GainReport>,
{
    let [lo, hi] = opts.bracket;
    let k = opts.prescan.max(3);
    let grid: Vec<f64> = (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect();
    let mut evaluations = 0;
    let mut scan = Vec::with_capacity(k);
    let mut last_err = None;
    for &r in &grid {
        evaluations += 1;
        match eval(r) {
            Ok(g) => scan.push(Some(g)),
            Err(e) => {
                last_err = Some(e);
                scan.push(None);
            }
        }
    }
    let value = |g: &Option<GainReport>| g.as_ref().map_or(f64::INFINITY, |g| g.gain);
    let best = (0..k).min_by(|&a, &b| value(&scan[a]).total_cmp(&value(&scan[b]))).unwrap();
    let Some(best_report) = scan[best].clone() else {
        return Err(last_err.unwrap_or_else(|| Error::InvalidArgument("empty scan".into())));
    };
    if best == 0 || best == k - 1 {
        return Ok(Optimum {
            r_opt: grid[best],
            report: best_report,
            evaluations,
            warning: Some(format!("optimum at bracket edge r = {}", grid[best])),
        });
    }
    // unimodality up to the sampling error of each point
    let slack = |g: &Option<GainReport>| g.as_ref().map_or(0.0, |g| 3.0 * g.stderr_gain.unwrap_or(0.0) + 1e-12 * g.gain);
    let descending = (1..=best).all(|i| value(&scan[i]) <= value(&scan[i - 1]) + slack(&scan[i]) + slack(&scan[i - 1]));
    let ascending = (best..k - 1).all(|i| value(&scan[i + 1]) + slack(&scan[i]) + slack(&scan[i + 1]) >= value(&scan[i]));
    if !(descending && ascending) {
        return Ok(Optimum {
            r_opt: grid[best],
            report: best_report,
            evaluations,
            warning: Some("pre-scan is not unimodal; returning the grid minimum".into()),
        });
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (grid[best - 1], grid[best + 1]);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut gc = eval(c)?;
    let mut gd = eval(d)?;
    evaluations += 2;
    let mut champion = (grid[best], best_report);
    while b - a > opts.tol {
        if gc.gain < gd.gain {
            b = d;
            d = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = eval(c)?;
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + inv_phi * (b - a);
            gd = eval(d)?;
        }
        evaluations += 1;
    }
    for (r, g) in [(c, gc), (d, gd)] {
        if g.gain < champion.1.gain {
            champion = (r, g);
        }
    }
    Ok(Optimum { r_opt: champion.0, report: champion.1, evaluations, warning: None })
}

fn fill_report(rec: &mut SweepRecord, g: &GainReport) {
    rec.gain = Some(g.gain);
    rec.gain_db = Some(g.gain_db);
    rec.variance = Some(g.variance);
    rec.derivative = Some(g.derivative);
    rec.stderr_gain = g.stderr_gain;
    rec.n_traj = g.n_traj;
    rec.n_max = g.n_max;
    rec.theta_delta = g.delta_theta_used;
}

fn fill_analyses(rec: &mut SweepRecord, cfg: &ProtocolConfig, analyses: &Analyses) -> Result<()> {
    let noiseless = cfg.nbar == 0.0 && cfg.sigma_phase == 0.0;
    if cfg.engine != Engine::Exact || !noiseless {
        return Ok(());
    }
    let chain = ChainModel::new(cfg.n_ions)?;
    let trace = protocols::exact_trace(cfg, &chain, &[0.0], 0, 0.0)?;
    let gen = protocols::imprint_generator(cfg)?;
    let crate::fockspace::Operator::SpinSum { weights, .. } = &gen else { unreachable!() };
    let sa = cfg.protocol == Protocol::Sa;
    if analyses.qfi {
        rec.qfi = Some(metrology::qfi_full(&trace.probe, &gen));
    }
    if analyses.renyi {
        let s = if sa { &trace.finals[0] } else { &trace.probe };
        rec.renyi = Some(metrology::renyi_entropy(s));
    }
    if analyses.qfi_spin {
        rec.qfi_spin = Some(if sa {
            metrology::qfi_spin_final(cfg, &chain, QFI_SPIN_THETAS)?
        } else {
            metrology::qfi_spin(&[(1.0, trace.probe.clone())], weights, QFI_SPIN_THETAS)?
        });
    }
    if analyses.cfi {
        let grid = DirectionGrid::default();
        rec.cfi_spin = Some(if sa {
            metrology::cfi_spin_final(cfg, &chain, grid)?.0
        } else {
            metrology::cfi_spin(&[(1.0, trace.probe.clone())], weights, grid)?.0
        });
    }
    Ok(())
}

/// Evaluates one row, recording failures in `status`.
pub fn evaluate_point(cfg: &ProtocolConfig, analyses: &Analyses, optimize: Option<&OptimizeOptions>) -> SweepRecord {
    let start = Instant::now();
    let mut rec = blank_record(cfg);
    let outcome = (|| -> Result<Option<String>> {
        let (cfg, g, warning) = match optimize {
            Some(opts) => {
                let o = optimize_r(cfg, opts)?;
                (ProtocolConfig { r: o.r_opt, ..cfg.clone() }, o.report, o.warning)
            }
            None => (cfg.clone(), metrology::gain_from_observable(cfg, default_delta(cfg))?, None),
        };
        rec.r = cfg.r;
        rec.xi2b_db = xi2b_db(cfg.r);
        fill_report(&mut rec, &g);
        fill_analyses(&mut rec, &cfg, analyses)?;
        Ok(warning)
    })();
    rec.status = match outcome {
        Ok(None) => "ok".into(),
        Ok(Some(w)) => format!("warning: {w}"),
        Err(e) => format!("error: {e}"),
    };
    rec.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    rec
}

/// Runs every point of `plan`; rows come back in axis order.
pub fn run_sweep(plan: &SweepPlan) -> Result<Vec<SweepRecord>> {
    let configs = plan.configs()?;
    let optimize = plan.optimize_r.then_some(&plan.optimize);
    Ok(crate::par::map_slice(&configs, |cfg| {
        let mut rec = evaluate_point(cfg, &plan.analyses, optimize);
        if !plan.record_wall_time {
            rec.wall_ms = 0.0;
        }
        rec
    }))
}

pub fn write_csv<W: Write>(records: &[SweepRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<SweepRecord>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|x| x.map_err(Error::from)).collect()
}

/// Power law `gain = a N^{−b}` with 95% confidence half-widths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub a: f64,
    pub b: f64,
    pub a_err: f64,
    pub b_err: f64,
    /// RMS residual of `log gain`.
    pub residual_rms: f64,
    /// Set when the slope's interval exceeds a quarter of its value.
    pub poorly_conditioned: bool,
}

/// Least squares on `log gain = log a − b log N`; intervals use the
/// t-distribution with `n − 2` degrees of freedom.
pub fn fit_scaling(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 4 {
        return Err(Error::Fit(format!("need at least 4 points, got {}", points.len())));
    }
    if points.iter().any(|(n, g)| !(*n > 0.0 && *g > 0.0)) {
        return Err(Error::Fit("ion counts and gains must be positive".into()));
    }
    let n = points.len() as f64;
    let x: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all ion counts are equal".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let s2 = ss / (n - 2.0);
    let se_slope = (s2 / sxx).sqrt();
    let se_intercept = (s2 * (1.0 / n + mx * mx / sxx)).sqrt();
    let t = StudentsT::new(0.0, 1.0, n - 2.0).map_err(|e| Error::Fit(e.to_string()))?.inverse_cdf(0.975);
    let a = intercept.exp();
    let b = -slope;
    let b_err = t * se_slope;
    Ok(FitResult {
        a,
        b,
        a_err: a * t * se_intercept,
        b_err,
        residual_rms: (ss / n).sqrt(),
        poorly_conditioned: b_err > 0.25 * b.abs(),
    })
}

/// Closed-form large-N references.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticModel {
    NrPhase,
    SaPhase,
    Thermal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticRow {
    pub model: AnalyticModel,
    /// `r` for the phase models, `n̄` for the thermal model.
    pub x: f64,
    pub sigma_phase: f64,
    pub n_ions: usize,
    pub gain: f64,
    pub gain_db: f64,
    pub r_opt: Option<f64>,
}

/// Evaluates `model` at each `x`. The thermal rows carry the rescaled
/// optimum `scale · noiseless_opt` when `noiseless_opt` is given, else the
/// scale itself.
pub fn analytic_rows(
    model: AnalyticModel,
    xs: &[f64],
    sigma: f64,
    n_ions: usize,
    noiseless_opt: Option<f64>,
) -> Vec<AnalyticRow> {
    xs.iter()
        .map(|&x| {
            let (gain, r_opt) = match model {
                AnalyticModel::NrPhase => {
                    (crate::noise::analytic_nr_phase(x, sigma), crate::noise::analytic_nr_phase_optimum(sigma).r_opt)
                }
                AnalyticModel::SaPhase => (crate::noise::analytic_sa_phase(x, sigma), None),
                AnalyticModel::Thermal => {
                    let (r_opt, scale) = crate::noise::analytic_thermal(x, n_ions);
                    (scale * noiseless_opt.unwrap_or(1.0), Some(r_opt))
                }
            };
            AnalyticRow { model, x, sigma_phase: sigma, n_ions, gain, gain_db: metrology::to_db(gain), r_opt }
        })
        .collect()
}

/// Settings of the exact-vs-TWA comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchTwaPlan {
    pub n_ions: usize,
    pub quadrature_r: Vec<f64>,
    pub quadrature_times: usize,
    pub quadrature_traj: usize,
    pub gain_r: Vec<f64>,
    pub gain_traj: usize,
    pub protocols: Vec<Protocol>,
    pub modes: Vec<Mode>,
    pub seed: u64,
}

impl Default for BenchTwaPlan {
    fn default() -> Self {
        Self {
            n_ions: 8,
            quadrature_r: vec![0.4, 0.8],
            quadrature_times: 11,
            quadrature_traj: 10_000,
            gain_r: (1..=12).map(|k| 0.1 * k as f64).collect(),
            gain_traj: twa::DEFAULT_TRAJ_GAIN,
            protocols: vec![Protocol::Nr, Protocol::Sa],
            modes: vec![Mode::Cm, Mode::B],
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRow {
    pub mode: Mode,
    pub r: f64,
    pub time: f64,
    pub exact_var_x: f64,
    pub exact_var_y: f64,
    pub twa_var_x: f64,
    pub twa_var_y: f64,
    pub stderr_x: Option<f64>,
    pub stderr_y: Option<f64>,
}

impl QuadratureRow {
    /// Largest deviation in units of the TWA standard error.
    pub fn z_score(&self) -> Option<f64> {
        let zx = (self.twa_var_x - self.exact_var_x).abs() / self.stderr_x?;
        let zy = (self.twa_var_y - self.exact_var_y).abs() / self.stderr_y?;
        Some(zx.max(zy))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainComparisonRow {
    pub protocol: Protocol,
    pub mode: Mode,
    pub r: f64,
    pub exact_db: Option<f64>,
    pub twa_db: Option<f64>,
    pub twa_stderr_db: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchTwaReport {
    pub quadratures: Vec<QuadratureRow>,
    pub gains: Vec<GainComparisonRow>,
}

/// Quadrature variances during the exchange on `[0, t_π]`, exact and TWA.
pub fn quadrature_comparison(chain: &ChainModel, mode: Mode, r: f64, times: usize, n_traj: usize, seed: u64) -> Result<Vec<QuadratureRow>> {
    let ts: Vec<f64> = (0..times).map(|k| T_PI * k as f64 / (times.max(2) - 1) as f64).collect();
    let exact = protocols::exact_spin_quadrature_curve(chain, mode, r, &ts, default_cutoff(r, 0.0))?;
    let approx = twa::spin_quadrature_curve(chain, mode, r, &ts, n_traj, seed)?;
    Ok(exact
        .iter()
        .zip(&approx)
        .map(|(e, t)| QuadratureRow {
            mode,
            r,
            time: e.0,
            exact_var_x: e.1,
            exact_var_y: e.2,
            twa_var_x: t.var_x,
            twa_var_y: t.var_y,
            stderr_x: t.stderr_x,
            stderr_y: t.stderr_y,
        })
        .collect())
}

/// Gain of one protocol, mode and `r` from both engines.
pub fn gain_comparison(protocol: Protocol, mode: Mode, n_ions: usize, r: f64, n_traj: usize, seed: u64) -> GainComparisonRow {
    let exact = ProtocolConfig::new(protocol, mode, n_ions, r);
    let approx = ProtocolConfig { n_traj: Some(n_traj), seed, ..exact.clone().with_engine(Engine::Twa) };
    let e = metrology::gain_from_observable(&exact, DELTA_EXACT).ok();
    let t = metrology::gain_from_observable(&approx, DELTA_TWA).ok();
    GainComparisonRow {
        protocol,
        mode,
        r,
        exact_db: e.map(|g| g.gain_db),
        twa_db: t.as_ref().map(|g| g.gain_db),
        twa_stderr_db: t.and_then(|g| g.stderr_gain.map(|s| 10.0 / std::f64::consts::LN_10 * s / g.gain)),
    }
}

pub fn bench_twa(plan: &BenchTwaPlan) -> Result<BenchTwaReport> {
    let chain = ChainModel::new(plan.n_ions)?;
    let mut report = BenchTwaReport::default();
    for &mode in &plan.modes {
        for &r in &plan.quadrature_r {
            report.quadratures.extend(quadrature_comparison(&chain, mode, r, plan.quadrature_times, plan.quadrature_traj, plan.seed)?);
        }
    }
    for &protocol in &plan.protocols {
        for &mode in &plan.modes {
            for &r in &plan.gain_r {
                report.gains.push(gain_comparison(protocol, mode, plan.n_ions, r, plan.gain_traj, plan.seed));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests;
