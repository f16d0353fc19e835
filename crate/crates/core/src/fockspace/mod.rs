//! Joint Hilbert space of `N` spin-1/2 ions and one or two truncated
//! boson modes.
//!
//! Basis ordering (fixed, recorded in saved states as [`BASIS_ORDERING`]):
//! the flat index is `spin * fock_dim + fock`. In `spin`, ion `j` (0-based)
//! is bit `j` and a set bit means `|↑⟩`. In `fock`, slot 0 varies fastest:
//! `fock = n_0 + (n_max + 1) * n_1`.

mod io;
mod operators;
mod state;

pub use io::{load_state, read_container, save_state, write_container, StateHeader, FORMAT_VERSION};
pub use operators::{differential_weights, tc_hamiltonian, Axis, ObservableKind, ObservableSpec, Operator};
pub use state::{initial_state, SpinBosonState};

use serde::{Deserialize, Serialize};

use crate::chain::Mode;
use crate::error::{Error, Result};

pub const BASIS_ORDERING: &str = "spin-major(ion0=lsb,1=up)/fock-minor(slot0-fastest)";

/// Default cap on the number of amplitudes (512 MiB of complex doubles).
pub const DEFAULT_MEMORY_BUDGET: usize = 1 << 25;

/// Shape of the joint space.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceSpec {
    pub n_ions: usize,
    pub n_max: usize,
    /// Physical mode carried by each boson slot (length 1 or 2).
    pub mode_ids: Vec<Mode>,
}

impl SpaceSpec {
    pub fn new(n_ions: usize, n_max: usize, mode_ids: Vec<Mode>) -> Self {
        Self { n_ions, n_max, mode_ids }
    }

    pub fn n_boson_modes(&self) -> usize {
        self.mode_ids.len()
    }

    pub fn slot_of(&self, mode: Mode) -> Option<usize> {
        self.mode_ids.iter().position(|&m| m == mode)
    }
}

/// Index bookkeeping for a validated [`SpaceSpec`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Basis {
    pub spec: SpaceSpec,
    pub spin_dim: usize,
    /// Levels per slot, `n_max + 1`.
    pub levels: usize,
    pub fock_dim: usize,
    pub dim: usize,
}

impl Basis {
    #[inline]
    pub fn index(&self, spin: usize, fock: usize) -> usize {
        spin * self.fock_dim + fock
    }

    /// Stride of slot `m` inside the Fock index.
    #[inline]
    pub fn stride(&self, slot: usize) -> usize {
        if slot == 0 {
            1
        } else {
            self.levels
        }
    }

    /// Occupation of `slot` encoded in Fock index `fock`.
    #[inline]
    pub fn occupation(&self, fock: usize, slot: usize) -> usize {
        (fock / self.stride(slot)) % self.levels
    }

    pub fn n_ions(&self) -> usize {
        self.spec.n_ions
    }

    pub fn n_slots(&self) -> usize {
        self.spec.mode_ids.len()
    }
}

/// Validates `spec` against the default memory budget.
pub fn build_space(spec: &SpaceSpec) -> Result<Basis> {
    build_space_with_budget(spec, DEFAULT_MEMORY_BUDGET)
}

pub fn build_space_with_budget(spec: &SpaceSpec, budget: usize) -> Result<Basis> {
    if spec.n_ions == 0 || spec.n_ions > 40 {
        return Err(Error::InvalidArgument(format!("unsupported ion count {}", spec.n_ions)));
    }
    if spec.n_max < 1 {
        return Err(Error::InvalidArgument("Fock cutoff must be at least 1".into()));
    }
    let slots = spec.mode_ids.len();
    if !(1..=2).contains(&slots) {
        return Err(Error::InvalidArgument(format!("expected 1 or 2 boson slots, got {slots}")));
    }
    if slots == 2 && spec.mode_ids[0] == spec.mode_ids[1] {
        return Err(Error::InvalidArgument("boson slots must carry distinct modes".into()));
    }
    let levels = spec.n_max + 1;
    let overflow = || Error::DimensionOverflow { dim: usize::MAX, limit: budget };
    let fock_dim = levels.checked_pow(slots as u32).ok_or_else(overflow)?;
    let spin_dim = 1usize << spec.n_ions;
    let dim = spin_dim.checked_mul(fock_dim).ok_or_else(overflow)?;
    if dim > budget {
        return Err(Error::DimensionOverflow { dim, limit: budget });
    }
    Ok(Basis { spec: spec.clone(), spin_dim, levels, fock_dim, dim })
}

/// Default Fock cutoff `max(20, ceil(12 e^{2r} (2 n̄ + 1)))`.
pub fn default_cutoff(r: f64, nbar: f64) -> usize {
    let n = (12.0 * (2.0 * r).exp() * (2.0 * nbar + 1.0)).ceil() as usize;
    n.max(20)
}
