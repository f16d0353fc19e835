//! Exact unitaries on [`SpinBosonState`]: boson squeezing, displacement and
//! beam splitter, global/weighted spin rotations and Tavis–Cummings evolution.
//!
//! Conventions:
//! - `S(ζ) = exp(½(ζ* a² − ζ a†²))`, so `S† a S = a cosh r − a† e^{iφ} sinh r`;
//! - `D(β) = exp(β a† − β* a)`;
//! - `U_bs(κ) = exp(iκ(a_m† a_n + a_n† a_m)/2)`;
//! - `R_n^θ = exp(−iθ Σ_j w_j n·σ_j / 2)`;
//! - TC evolution `exp(∓iHt)`, sideband phases gauged to zero.

mod boson;

pub use boson::{boson_gate, BosonGate};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{tc_hamiltonian, SpinBosonState};
use crate::numerics::chebyshev;
use crate::par;

/// Mass allowed on the top Fock level after any gate.
pub const LEAKAGE_TOL: f64 = 1e-8;
/// Local tolerance of the TC propagator.
pub const PROPAGATOR_TOL: f64 = 1e-12;
/// Exchange time `t_π = π/(2 g_0)`.
pub const T_PI: f64 = std::f64::consts::FRAC_PI_2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezeParams {
    pub r: f64,
    pub phi: f64,
    pub mode_slot: usize,
}

impl SqueezeParams {
    pub fn zeta(&self) -> C64 {
        C64::from_polar(self.r, self.phi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationAxis {
    X,
    Y,
    Z,
    /// Equatorial axis `(cos φ, sin φ, 0)`.
    Azimuthal(f64),
}

impl RotationAxis {
    pub fn unit_vector(self) -> [f64; 3] {
        match self {
            Self::X => [1.0, 0.0, 0.0],
            Self::Y => [0.0, 1.0, 0.0],
            Self::Z => [0.0, 0.0, 1.0],
            Self::Azimuthal(p) => [p.cos(), p.sin(), 0.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationTarget {
    Global,
    Differential,
    Weighted(Vec<f64>),
}

impl RotationTarget {
    pub fn weights(&self, n_ions: usize) -> Result<Vec<f64>> {
        match self {
            Self::Global => Ok(vec![1.0; n_ions]),
            Self::Differential => crate::fockspace::differential_weights(n_ions),
            Self::Weighted(w) if w.len() == n_ions => Ok(w.clone()),
            Self::Weighted(w) => Err(Error::InvalidArgument(format!("{} weights for {} ions", w.len(), n_ions))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationParams {
    pub axis: RotationAxis,
    pub angle: f64,
    pub target: RotationTarget,
}

impl RotationParams {
    pub fn global(axis: RotationAxis, angle: f64) -> Self {
        Self { axis, angle, target: RotationTarget::Global }
    }
}

fn check_slot(state: &SpinBosonState, slot: usize) -> Result<()> {
    if slot >= state.basis.n_slots() {
        return Err(Error::InvalidArgument(format!("boson slot {slot} not present")));
    }
    Ok(())
}

pub fn apply_squeeze(state: &mut SpinBosonState, p: &SqueezeParams, adjoint: bool) -> Result<()> {
    check_slot(state, p.mode_slot)?;
    if p.r == 0.0 {
        return Ok(());
    }
    let zeta = if adjoint { -p.zeta() } else { p.zeta() };
    let gate = BosonGate::squeeze(state.basis.spec.n_max, zeta);
    gate.apply(state, p.mode_slot);
    state.check_leakage(LEAKAGE_TOL)?;
    Ok(())
}

pub fn apply_displacement(state: &mut SpinBosonState, beta: C64, mode_slot: usize) -> Result<()> {
    check_slot(state, mode_slot)?;
    if beta == C64::new(0.0, 0.0) {
        return Ok(());
    }
    BosonGate::displacement(state.basis.spec.n_max, beta).apply(state, mode_slot);
    state.check_leakage(LEAKAGE_TOL)?;
    Ok(())
}

pub fn apply_beam_splitter(state: &mut SpinBosonState, kappa: f64, slots: (usize, usize)) -> Result<()> {
    if state.basis.n_slots() != 2 {
        return Err(Error::InvalidArgument("beam splitter needs two boson slots".into()));
    }
    let (m, n) = slots;
    if m == n || m > 1 || n > 1 {
        return Err(Error::InvalidArgument(format!("invalid slot pair ({m}, {n})")));
    }
    if kappa == 0.0 {
        return Ok(());
    }
    boson::beam_splitter(state, kappa, m);
    state.check_leakage(LEAKAGE_TOL)?;
    Ok(())
}

/// Product of single-spin rotations `exp(−iθ w_j n·σ_j/2)`.
pub fn apply_rotation(state: &mut SpinBosonState, p: &RotationParams) -> Result<()> {
    let n_ions = state.n_ions();
    let w = p.target.weights(n_ions)?;
    let [nx, ny, nz] = p.axis.unit_vector();
    let fd = state.basis.fock_dim;
    for (j, &wj) in w.iter().enumerate() {
        let half = 0.5 * p.angle * wj;
        if half == 0.0 {
            continue;
        }
        let (s, c) = half.sin_cos();
        let mi = C64::new(0.0, -s);
        // exp(−i h n·σ) = cos h − i sin h n·σ in the (↓, ↑) basis,
        // n·σ = [[−n_z, n_x + i n_y], [n_x − i n_y, n_z]]
        let u_dd = C64::new(c, 0.0) + mi * (-nz);
        let u_du = mi * C64::new(nx, ny);
        let u_ud = mi * C64::new(nx, -ny);
        let u_uu = C64::new(c, 0.0) + mi * nz;
        let block = fd << j;
        par::for_each_chunk_mut(&mut state.amps, 2 * block, |_, chunk| {
            let (lo, hi) = chunk.split_at_mut(block);
            for (d, u) in lo.iter_mut().zip(hi.iter_mut()) {
                let (a, b) = (*d, *u);
                *d = u_dd * a + u_du * b;
                *u = u_ud * a + u_uu * b;
            }
        });
    }
    Ok(())
}

/// `|ψ⟩ → exp(∓iHt)|ψ⟩` with `H` the TC Hamiltonian on `mode_slot`.
/// Returns the propagator's truncation-error bound.
pub fn evolve_tc(
    state: &mut SpinBosonState,
    couplings: &[f64],
    mode_slot: usize,
    duration: f64,
    adjoint: bool,
) -> Result<f64> {
    if duration < 0.0 {
        return Err(Error::InvalidArgument("duration must be non-negative".into()));
    }
    let h = tc_hamiltonian(&state.basis, couplings, mode_slot)?;
    let basis = state.basis.clone();
    let bound = h.spectral_bound(&basis);
    let t = if adjoint { -duration } else { duration };
    let err = chebyshev::propagate(&mut state.amps, bound, t, PROPAGATOR_TOL, |x, y| h.apply(&basis, x, y))?;
    state.check_leakage(LEAKAGE_TOL)?;
    Ok(err)
}
