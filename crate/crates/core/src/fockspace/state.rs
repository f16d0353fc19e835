use num_complex::Complex64 as C64;

use super::{build_space, Basis, SpaceSpec};
use crate::error::{Error, Result};
use crate::par;

/// Pure state of the joint spin-boson system.
#[derive(Clone, Debug)]
pub struct SpinBosonState {
    pub basis: Basis,
    pub amps: Vec<C64>,
}

/// All spins `|↓⟩`, boson slots in the given Fock states.
pub fn initial_state(spec: &SpaceSpec, occupations: &[usize]) -> Result<SpinBosonState> {
    let basis = build_space(spec)?;
    if occupations.len() != basis.n_slots() {
        return Err(Error::InvalidArgument(format!(
            "expected {} occupations, got {}",
            basis.n_slots(),
            occupations.len()
        )));
    }
    let mut fock = 0;
    for (slot, &n) in occupations.iter().enumerate() {
        if n > spec.n_max {
            return Err(Error::OccupationOutOfRange { occupation: n, n_max: spec.n_max });
        }
        fock += n * basis.stride(slot);
    }
    let mut amps = vec![C64::new(0.0, 0.0); basis.dim];
    amps[basis.index(0, fock)] = C64::new(1.0, 0.0);
    Ok(SpinBosonState { basis, amps })
}

impl SpinBosonState {
    pub fn from_amplitudes(basis: Basis, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != basis.dim {
            return Err(Error::InvalidArgument(format!(
                "amplitude count {} does not match dimension {}",
                amps.len(),
                basis.dim
            )));
        }
        Ok(Self { basis, amps })
    }

    pub fn n_ions(&self) -> usize {
        self.basis.spec.n_ions
    }

    pub fn norm_sqr(&self) -> f64 {
        let a = &self.amps;
        par::sum_indexed(a.len(), |i| a[i].norm_sqr())
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        self.amps.iter_mut().for_each(|a| *a /= n);
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &SpinBosonState) -> C64 {
        let (a, b) = (&self.amps, &other.amps);
        par::sum_indexed(a.len(), |i| a[i].conj() * b[i])
    }

    pub fn fidelity(&self, other: &SpinBosonState) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Probability mass on the top two Fock levels of each slot, maximised over slots.
    pub fn leakage(&self) -> f64 {
        let b = &self.basis;
        // two levels, so parity-selective gates cannot hide the tail
        let top = b.spec.n_max.saturating_sub(1);
        (0..b.n_slots())
            .map(|slot| {
                let a = &self.amps;
                par::sum_indexed(a.len(), |i| {
                    if b.occupation(i % b.fock_dim, slot) >= top {
                        a[i].norm_sqr()
                    } else {
                        0.0
                    }
                })
            })
            .fold(0.0, f64::max)
    }

    /// Fails with [`Error::CutoffTooSmall`] when the top two Fock levels carry
    /// more than `tol` of the norm.
    pub fn check_leakage(&self, tol: f64) -> Result<f64> {
        let l = self.leakage();
        if l > tol {
            return Err(Error::CutoffTooSmall { n_max: self.basis.spec.n_max, leakage: l, tolerance: tol });
        }
        Ok(l)
    }

    /// Occupation distribution of boson `slot`.
    pub fn fock_distribution(&self, slot: usize) -> Vec<f64> {
        let b = &self.basis;
        let mut p = vec![0.0; b.levels];
        for (i, a) in self.amps.iter().enumerate() {
            p[b.occupation(i % b.fock_dim, slot)] += a.norm_sqr();
        }
        p
    }

    /// Reduced spin density matrix `Tr_boson |ψ⟩⟨ψ|`, row-major `spin_dim²`.
    pub fn reduced_spin_density(&self) -> nalgebra::DMatrix<C64> {
        let b = &self.basis;
        let (sd, fd) = (b.spin_dim, b.fock_dim);
        let rows = par::map_indexed(sd, |s| {
            let row = &self.amps[s * fd..(s + 1) * fd];
            (0..sd)
                .map(|t| {
                    let col = &self.amps[t * fd..(t + 1) * fd];
                    row.iter().zip(col).fold(C64::new(0.0, 0.0), |acc, (x, y)| acc + x * y.conj())
                })
                .collect::<Vec<_>>()
        });
        nalgebra::DMatrix::from_fn(sd, sd, |i, j| rows[i][j])
    }
}
