//! NR and SA sequences as step lists, with the exact executor.
//!
//! A sequence is split at the imprint: `prefix` prepares the probe state,
//! the imprint is `R_z^θ` with per-ion weights, and `suffix` performs the
//! readout. Both the exact engine and the TWA engine interpret the same steps.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::chain::{ChainModel, Mode};
use crate::dynamics::{
    apply_beam_splitter, apply_rotation, apply_squeeze, evolve_tc, RotationAxis, RotationParams, RotationTarget,
    SqueezeParams, T_PI,
};
use crate::error::{Error, Result};
use crate::fockspace::{
    build_space, default_cutoff, differential_weights, initial_state, ObservableKind, ObservableSpec, Operator,
    SpaceSpec, SpinBosonState,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Nr,
    Sa,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Imprint {
    GlobalZ,
    DifferentialZ,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SaReadout {
    Direct,
    BeamSplitterSwap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Exact,
    Twa,
}

/// Full description of one protocol evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub protocol: Protocol,
    pub mode: Mode,
    pub n_ions: usize,
    pub r: f64,
    pub phi: f64,
    pub theta: f64,
    pub imprint: Imprint,
    pub observable: ObservableSpec,
    pub sa_readout: SaReadout,
    pub nbar: f64,
    pub sigma_phase: f64,
    pub engine: Engine,
    /// Fock cutoff; `None` selects [`default_cutoff`].
    pub n_max: Option<usize>,
    /// TWA trajectory count; `None` selects the engine default.
    pub n_traj: Option<usize>,
    pub seed: u64,
    /// Gauss–Hermite order for phase-noise averaging in the exact engine.
    pub gh_nodes: usize,
    /// Finite-difference step for gains; `None` selects the engine default.
    pub delta_theta: Option<f64>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            protocol: Protocol::Nr,
            mode: Mode::Cm,
            n_ions: 6,
            r: 0.0,
            phi: 0.0,
            theta: 0.0,
            imprint: Imprint::GlobalZ,
            observable: ObservableSpec::new(ObservableKind::SZPlus),
            sa_readout: SaReadout::Direct,
            nbar: 0.0,
            sigma_phase: 0.0,
            engine: Engine::Exact,
            n_max: None,
            n_traj: None,
            seed: 0,
            gh_nodes: 41,
            delta_theta: None,
        }
    }
}

impl ProtocolConfig {
    /// Config with the imprint and observable the paper pairs with `mode`
    /// (`S_{z,+}` for CM, weighted `𝒮_z` for B).
    pub fn new(protocol: Protocol, mode: Mode, n_ions: usize, r: f64) -> Self {
        let (imprint, kind) = match mode {
            Mode::Cm => (Imprint::GlobalZ, ObservableKind::SZPlus),
            Mode::B => (Imprint::DifferentialZ, ObservableKind::SWeightedZ),
        };
        Self { protocol, mode, n_ions, r, imprint, observable: ObservableSpec::new(kind), ..Self::default() }
    }

    pub fn with_observable(mut self, kind: ObservableKind) -> Self {
        self.observable = ObservableSpec::new(kind);
        self
    }

    pub fn with_engine(mut self, engine: Engine) -> Self {
        self.engine = engine;
        self
    }

    pub fn bs_swap(&self) -> bool {
        self.protocol == Protocol::Sa && self.sa_readout == SaReadout::BeamSplitterSwap
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_ions < 2 {
            return bad(format!("need at least 2 ions, got {}", self.n_ions));
        }
        for (name, v) in [("r", self.r), ("phi", self.phi), ("theta", self.theta)] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        if self.r < 0.0 {
            return bad("r must be non-negative".into());
        }
        if !(self.nbar >= 0.0 && self.nbar.is_finite()) || !(self.sigma_phase >= 0.0 && self.sigma_phase.is_finite()) {
            return bad("noise parameters must be finite and non-negative".into());
        }
        match (self.mode, self.imprint) {
            (Mode::Cm, Imprint::GlobalZ) | (Mode::B, Imprint::DifferentialZ) => {}
            (m, i) => return bad(format!("imprint {i:?} does not match mode {m:?}")),
        }
        if self.imprint == Imprint::DifferentialZ && !self.n_ions.is_multiple_of(2) {
            return bad(format!("differential imprint needs an even ion count, got {}", self.n_ions));
        }
        if self.sa_readout == SaReadout::BeamSplitterSwap && (self.protocol != Protocol::Sa || self.mode != Mode::B) {
            return bad("beam-splitter readout requires the SA protocol on the B mode".into());
        }
        if self.observable.kind.is_boson() || self.observable.kind == ObservableKind::ExcitationNumber {
            return bad(format!("{:?} is not a readout observable", self.observable.kind));
        }
        if self.sigma_phase > 0.0 && self.gh_nodes < 11 {
            return bad(format!("phase averaging needs at least 11 nodes, got {}", self.gh_nodes));
        }
        if let Some(d) = self.delta_theta {
            if !(d > 0.0) {
                return bad("delta_theta must be positive".into());
            }
        }
        Ok(())
    }

    /// Readout observable with weighted kinds resolved against `chain`.
    pub fn observable_for(&self, chain: &ChainModel) -> ObservableSpec {
        let mut o = self.observable.clone();
        if o.kind.is_weighted() && o.weights.is_none() {
            o = ObservableSpec::weighted(o.kind, chain);
        }
        o
    }

    pub fn space_spec(&self) -> SpaceSpec {
        let modes = if self.bs_swap() { vec![Mode::B, Mode::Cm] } else { vec![self.mode] };
        SpaceSpec::new(self.n_ions, self.n_max.unwrap_or_else(|| default_cutoff(self.r, self.nbar)), modes)
    }
}

/// One gate of a protocol sequence.
#[derive(Clone, Debug, PartialEq)]
pub enum Step {
    Squeeze { slot: usize, r: f64, phi: f64, adjoint: bool },
    /// TC evolution for `t_π` on `slot`.
    Tc { slot: usize, couplings: Vec<f64>, adjoint: bool },
    Rotate(RotationParams),
    BeamSplitter { kappa: f64, slots: (usize, usize) },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    pub prefix: Vec<Step>,
    /// Weights of the imprint `R_z^θ = exp(−iθ Σ_j w_j σ^z_j / 2)`.
    pub imprint_weights: Vec<f64>,
    pub suffix: Vec<Step>,
}

/// Builds the gate list of `cfg`, with the squeezing phase shifted by
/// `2·phase_offset` (a quadrature rotation by `phase_offset`).
pub fn build_sequence(cfg: &ProtocolConfig, chain: &ChainModel, phase_offset: f64) -> Result<Sequence> {
    cfg.validate()?;
    let g = chain.coupling_vector(cfg.mode).to_vec();
    let phi = cfg.phi + 2.0 * phase_offset;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let rot = |axis, angle| Step::Rotate(RotationParams::global(axis, angle));
    let prefix = vec![
        Step::Squeeze { slot: 0, r: cfg.r, phi, adjoint: false },
        Step::Tc { slot: 0, couplings: g.clone(), adjoint: false },
        rot(RotationAxis::Y, half_pi),
    ];
    let imprint_weights = match cfg.imprint {
        Imprint::GlobalZ => vec![1.0; cfg.n_ions],
        Imprint::DifferentialZ => differential_weights(cfg.n_ions)?,
    };
    let suffix = match cfg.protocol {
        Protocol::Nr => vec![rot(RotationAxis::X, half_pi)],
        Protocol::Sa => {
            let mut s = vec![
                rot(RotationAxis::Y, -half_pi),
                Step::Tc { slot: 0, couplings: g.clone(), adjoint: true },
                Step::Squeeze { slot: 0, r: cfg.r, phi, adjoint: true },
            ];
            if cfg.bs_swap() {
                // the swap carries a quarter-turn phase, which moves the
                // signal to S_x after readout; R_y brings it to S_z
                s.push(Step::BeamSplitter { kappa: std::f64::consts::PI, slots: (0, 1) });
                s.push(Step::Tc { slot: 1, couplings: chain.couplings_cm.clone(), adjoint: false });
                s.push(rot(RotationAxis::Y, half_pi));
            } else {
                s.push(Step::Tc { slot: 0, couplings: g, adjoint: false });
                s.push(rot(RotationAxis::X, half_pi));
            }
            s
        }
    };
    Ok(Sequence { prefix, imprint_weights, suffix })
}

pub fn apply_step(state: &mut SpinBosonState, step: &Step) -> Result<()> {
    match step {
        Step::Squeeze { slot, r, phi, adjoint } => {
            apply_squeeze(state, &SqueezeParams { r: *r, phi: *phi, mode_slot: *slot }, *adjoint)
        }
        Step::Tc { slot, couplings, adjoint } => evolve_tc(state, couplings, *slot, T_PI, *adjoint).map(|_| ()),
        Step::Rotate(p) => apply_rotation(state, p),
        Step::BeamSplitter { kappa, slots } => apply_beam_splitter(state, *kappa, *slots),
    }
}

pub fn apply_imprint(state: &mut SpinBosonState, weights: &[f64], theta: f64) -> Result<()> {
    let p = RotationParams { axis: RotationAxis::Z, angle: theta, target: RotationTarget::Weighted(weights.to_vec()) };
    apply_rotation(state, &p)
}

/// States of one pure-state member of the (noise) ensemble.
#[derive(Clone, Debug)]
pub struct ExactTrace {
    pub probe: SpinBosonState,
    /// Final states, one per requested θ.
    pub finals: Vec<SpinBosonState>,
    pub n_max: usize,
    pub leakage: f64,
}

/// Runs the exact engine for the member with initial Fock `occupation` of
/// the squeezed slot and squeezing-phase offset `phase_offset`. On a cutoff
/// violation the cutoff is doubled once and the run repeated.
pub fn exact_trace(
    cfg: &ProtocolConfig,
    chain: &ChainModel,
    thetas: &[f64],
    occupation: usize,
    phase_offset: f64,
) -> Result<ExactTrace> {
    let spec = cfg.space_spec();
    match exact_trace_with(cfg, chain, thetas, occupation, phase_offset, &spec) {
        Err(Error::CutoffTooSmall { .. }) if cfg.n_max.is_none() => {
            let doubled = SpaceSpec { n_max: 2 * spec.n_max, ..spec };
            exact_trace_with(cfg, chain, thetas, occupation, phase_offset, &doubled)
        }
        other => other,
    }
}

fn exact_trace_with(
    cfg: &ProtocolConfig,
    chain: &ChainModel,
    thetas: &[f64],
    occupation: usize,
    phase_offset: f64,
    spec: &SpaceSpec,
) -> Result<ExactTrace> {
    build_space(spec)?;
    let seq = build_sequence(cfg, chain, phase_offset)?;
    let mut occ = vec![0; spec.mode_ids.len()];
    occ[0] = occupation;
    let mut state = initial_state(spec, &occ)?;
    for step in &seq.prefix {
        apply_step(&mut state, step)?;
    }
    let probe = state.clone();
    let mut finals = Vec::with_capacity(thetas.len());
    let mut leakage = probe.leakage();
    for &theta in thetas {
        let mut s = probe.clone();
        apply_imprint(&mut s, &seq.imprint_weights, theta)?;
        for step in &seq.suffix {
            apply_step(&mut s, step)?;
        }
        leakage = leakage.max(s.leakage());
        finals.push(s);
    }
    Ok(ExactTrace { probe, finals, n_max: spec.n_max, leakage })
}

/// First and second moments of a readout observable.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub second: f64,
}

impl Moments {
    pub fn variance(&self) -> f64 {
        (self.second - self.mean * self.mean).max(0.0)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub n_max: usize,
    pub leakage: f64,
    pub wall_ms: f64,
    pub n_traj: Option<usize>,
    pub excluded_trajectories: usize,
}

#[derive(Clone, Debug)]
pub struct ProtocolResult {
    /// Pre-imprint state; absent for noise mixtures and the TWA engine.
    pub probe_state: Option<SpinBosonState>,
    pub final_state: Option<SpinBosonState>,
    pub expectation: f64,
    pub variance: f64,
    pub metadata: RunMetadata,
}

/// Noise-averaged moments of the readout observable at each θ, together with
/// the largest cutoff used. Dispatches on `cfg.engine`.
pub fn moments(cfg: &ProtocolConfig, chain: &ChainModel, thetas: &[f64]) -> Result<(Vec<Moments>, RunMetadata)> {
    match cfg.engine {
        Engine::Exact => crate::noise::exact_moments(cfg, chain, thetas),
        Engine::Twa => {
            let est = crate::twa::protocol_moments(cfg, chain, thetas)?;
            let meta = RunMetadata {
                n_traj: Some(est.n_traj),
                excluded_trajectories: est.excluded,
                ..RunMetadata::default()
            };
            Ok((est.moments(), meta))
        }
    }
}

fn run(cfg: &ProtocolConfig) -> Result<ProtocolResult> {
    let start = Instant::now();
    let chain = ChainModel::new(cfg.n_ions)?;
    let noiseless = cfg.nbar == 0.0 && cfg.sigma_phase == 0.0;
    if cfg.engine == Engine::Exact && noiseless {
        let trace = exact_trace(cfg, &chain, &[cfg.theta], 0, 0.0)?;
        let op = cfg.observable_for(&chain).operator(cfg.n_ions)?;
        let fin = trace.finals.into_iter().next().unwrap();
        let (m1, m2) = op.moments(&fin);
        return Ok(ProtocolResult {
            expectation: m1,
            variance: (m2 - m1 * m1).max(0.0),
            metadata: RunMetadata {
                n_max: trace.n_max,
                leakage: trace.leakage,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
                ..RunMetadata::default()
            },
            probe_state: Some(trace.probe),
            final_state: Some(fin),
        });
    }
    let (m, mut meta) = moments(cfg, &chain, &[cfg.theta])?;
    meta.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(ProtocolResult {
        probe_state: None,
        final_state: None,
        expectation: m[0].mean,
        variance: m[0].variance(),
        metadata: meta,
    })
}

pub fn run_nr(cfg: &ProtocolConfig) -> Result<ProtocolResult> {
    if cfg.protocol != Protocol::Nr {
        return Err(Error::InvalidArgument("run_nr called with an SA config".into()));
    }
    run(cfg)
}

pub fn run_sa(cfg: &ProtocolConfig) -> Result<ProtocolResult> {
    if cfg.protocol != Protocol::Sa {
        return Err(Error::InvalidArgument("run_sa called with an NR config".into()));
    }
    run(cfg)
}

/// Pure pre-imprint state of the noiseless sequence.
pub fn probe_state(cfg: &ProtocolConfig) -> Result<SpinBosonState> {
    let chain = ChainModel::new(cfg.n_ions)?;
    Ok(exact_trace(cfg, &chain, &[], 0, 0.0)?.probe)
}

/// Imprint generator `½ Σ_j w_j σ^z_j` of `cfg`.
pub fn imprint_generator(cfg: &ProtocolConfig) -> Result<Operator> {
    let weights = match cfg.imprint {
        Imprint::GlobalZ => vec![1.0; cfg.n_ions],
        Imprint::DifferentialZ => differential_weights(cfg.n_ions)?,
    };
    Ok(Operator::SpinSum { axis: crate::fockspace::Axis::Z, weights })
}

/// Exact counterpart of [`crate::twa::spin_quadrature_curve`]: variances of
/// the weighted `x` and `y` spin quadratures at increasing `times` of TC
/// evolution after squeezing the vacuum of `mode` by `r`.
pub fn exact_spin_quadrature_curve(
    chain: &ChainModel,
    mode: Mode,
    r: f64,
    times: &[f64],
    n_max: usize,
) -> Result<Vec<(f64, f64, f64)>> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|t| *t < 0.0) {
        return Err(Error::InvalidArgument("times must be non-negative and increasing".into()));
    }
    let spec = SpaceSpec::new(chain.n_ions, n_max, vec![mode]);
    let mut state = initial_state(&spec, &[0])?;
    apply_squeeze(&mut state, &SqueezeParams { r, phi: 0.0, mode_slot: 0 }, false)?;
    let g = chain.coupling_vector(mode).to_vec();
    let w = crate::twa::quadrature_weights(chain, mode);
    let ox = Operator::SpinSum { axis: crate::fockspace::Axis::X, weights: w.clone() };
    let oy = Operator::SpinSum { axis: crate::fockspace::Axis::Y, weights: w };
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if t > now {
            evolve_tc(&mut state, &g, 0, t - now, false)?;
        }
        now = t;
        out.push((t, ox.variance(&state), oy.variance(&state)));
    }
    Ok(out)
}
