use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{Basis, SpinBosonState};
use crate::chain::ChainModel;
use crate::error::{Error, Result};
use crate::par;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    SZPlus,
    SZMinus,
    SWeightedZ,
    SXPlus,
    SYPlus,
    SWeightedX,
    SWeightedY,
    BosonX,
    BosonY,
    ExcitationNumber,
}

impl ObservableKind {
    pub fn is_weighted(self) -> bool {
        matches!(self, Self::SWeightedX | Self::SWeightedY | Self::SWeightedZ)
    }

    pub fn is_boson(self) -> bool {
        matches!(self, Self::BosonX | Self::BosonY)
    }
}

/// A measurable quantity, resolved against a concrete space by
/// [`ObservableSpec::operator`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableSpec {
    pub kind: ObservableKind,
    #[serde(default)]
    pub mode_slot: Option<usize>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

impl ObservableSpec {
    pub fn new(kind: ObservableKind) -> Self {
        Self { kind, mode_slot: None, weights: None }
    }

    pub fn boson(kind: ObservableKind, slot: usize) -> Self {
        Self { kind, mode_slot: Some(slot), weights: None }
    }

    /// Weighted collective operator `(√N/2g₀) Σ g_{j,B} σ^α_j` for `chain`.
    pub fn weighted(kind: ObservableKind, chain: &ChainModel) -> Self {
        let s = (chain.n_ions as f64).sqrt();
        Self { kind, mode_slot: None, weights: Some(chain.couplings_b.iter().map(|g| s * g).collect()) }
    }

    /// Per-ion weights `w_j` of a spin observable `½ Σ w_j σ^α_j`.
    pub fn spin_weights(&self, n_ions: usize) -> Result<Vec<f64>> {
        use ObservableKind::*;
        match self.kind {
            SZPlus | SXPlus | SYPlus => Ok(vec![1.0; n_ions]),
            SZMinus => differential_weights(n_ions),
            SWeightedX | SWeightedY | SWeightedZ => {
                let w = self
                    .weights
                    .clone()
                    .ok_or_else(|| Error::InvalidArgument("weighted observable requested without weights".into()))?;
                if w.len() != n_ions {
                    return Err(Error::InvalidArgument(format!("{} weights for {} ions", w.len(), n_ions)));
                }
                Ok(w)
            }
            BosonX | BosonY | ExcitationNumber => {
                Err(Error::InvalidArgument(format!("{:?} is not a spin observable", self.kind)))
            }
        }
    }

    pub fn axis(&self) -> Option<Axis> {
        use ObservableKind::*;
        match self.kind {
            SZPlus | SZMinus | SWeightedZ => Some(Axis::Z),
            SXPlus | SWeightedX => Some(Axis::X),
            SYPlus | SWeightedY => Some(Axis::Y),
            _ => None,
        }
    }

    pub fn operator(&self, n_ions: usize) -> Result<Operator> {
        use ObservableKind::*;
        if self.weights.is_some() && !self.kind.is_weighted() {
            return Err(Error::InvalidArgument(format!("{:?} does not take weights", self.kind)));
        }
        Ok(match self.kind {
            BosonX | BosonY => Operator::Quadrature { slot: self.mode_slot.unwrap_or(0), y: self.kind == BosonY },
            ExcitationNumber => Operator::Excitation,
            _ => Operator::SpinSum { axis: self.axis().unwrap(), weights: self.spin_weights(n_ions)? },
        })
    }
}

/// `+1` on the first half of the chain and `-1` on the second half.
pub fn differential_weights(n_ions: usize) -> Result<Vec<f64>> {
    if !n_ions.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("differential split needs an even ion count, got {n_ions}")));
    }
    Ok((0..n_ions).map(|j| if j < n_ions / 2 { 1.0 } else { -1.0 }).collect())
}

/// Hermitian operator acting matrix-free on [`SpinBosonState`] amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub enum Operator {
    /// `½ Σ_j w_j σ^axis_j`.
    SpinSum { axis: Axis, weights: Vec<f64> },
    /// `X = a + a†` or `Y = i(a† − a)` on a boson slot.
    Quadrature { slot: usize, y: bool },
    /// `Σ_j (σ^z_j + 1)/2 + Σ_slots a†a`.
    Excitation,
    /// `Σ_j g_j (a† σ⁻_j + a σ⁺_j)` on one boson slot.
    Tc { slot: usize, couplings: Vec<f64> },
}

/// Tavis–Cummings Hamiltonian on `slot` with per-ion couplings (units of `g_0`).
pub fn tc_hamiltonian(basis: &Basis, couplings: &[f64], slot: usize) -> Result<Operator> {
    if couplings.len() != basis.n_ions() {
        return Err(Error::InvalidArgument(format!("{} couplings for {} ions", couplings.len(), basis.n_ions())));
    }
    if slot >= basis.n_slots() {
        return Err(Error::InvalidArgument(format!("slot {slot} not present")));
    }
    Ok(Operator::Tc { slot, couplings: couplings.to_vec() })
}

impl Operator {
    fn diagonal(&self, basis: &Basis, idx: usize) -> Option<f64> {
        match self {
            Operator::SpinSum { axis: Axis::Z, weights } => {
                let s = idx / basis.fock_dim;
                Some(0.5 * weights.iter().enumerate().map(|(j, w)| if s >> j & 1 == 1 { *w } else { -*w }).sum::<f64>())
            }
            Operator::Excitation => {
                let s = idx / basis.fock_dim;
                let f = idx % basis.fock_dim;
                let bosons: usize = (0..basis.n_slots()).map(|m| basis.occupation(f, m)).sum();
                Some((s.count_ones() as usize + bosons) as f64)
            }
            _ => None,
        }
    }

    /// Gershgorin bound on the spectral radius.
    pub fn spectral_bound(&self, basis: &Basis) -> f64 {
        match self {
            Operator::SpinSum { weights, .. } => 0.5 * weights.iter().map(|w| w.abs()).sum::<f64>(),
            Operator::Quadrature { .. } => 2.0 * (basis.spec.n_max as f64).sqrt(),
            Operator::Excitation => (basis.n_ions() + basis.n_slots() * basis.spec.n_max) as f64,
            Operator::Tc { couplings, .. } => {
                couplings.iter().map(|g| g.abs()).sum::<f64>() * (basis.spec.n_max as f64).sqrt()
            }
        }
    }

    /// Writes `O·input` into `output`.
    pub fn apply(&self, basis: &Basis, input: &[C64], output: &mut [C64]) {
        let fd = basis.fock_dim;
        match self {
            Operator::SpinSum { axis: Axis::Z, .. } | Operator::Excitation => {
                par::for_each_chunk_mut(output, par::REDUCE_CHUNK, |c, chunk| {
                    let off = c * par::REDUCE_CHUNK;
                    for (k, o) in chunk.iter_mut().enumerate() {
                        let i = off + k;
                        *o = input[i] * self.diagonal(basis, i).unwrap();
                    }
                });
            }
            Operator::SpinSum { axis, weights } => {
                let n = weights.len();
                par::for_each_chunk_mut(output, fd, |s, block| {
                    block.iter_mut().for_each(|o| *o = ZERO);
                    for j in 0..n {
                        let t = s ^ (1 << j);
                        let coef = match axis {
                            Axis::X => C64::new(0.5 * weights[j], 0.0),
                            // ⟨↑|σ^y|↓⟩ = −i, ⟨↓|σ^y|↑⟩ = +i
                            _ => {
                                if s >> j & 1 == 1 {
                                    -I * 0.5 * weights[j]
                                } else {
                                    I * 0.5 * weights[j]
                                }
                            }
                        };
                        let src = &input[t * fd..(t + 1) * fd];
                        for (o, x) in block.iter_mut().zip(src) {
                            *o += coef * x;
                        }
                    }
                });
            }
            Operator::Quadrature { slot, y } => {
                let st = basis.stride(*slot);
                let top = basis.spec.n_max;
                par::for_each_chunk_mut(output, fd, |s, block| {
                    let src = &input[s * fd..(s + 1) * fd];
                    for (f, o) in block.iter_mut().enumerate() {
                        let n = basis.occupation(f, *slot);
                        // a†ψ[n] = √n ψ[n−1], aψ[n] = √(n+1) ψ[n+1]
                        let up = if n > 0 { src[f - st] * (n as f64).sqrt() } else { ZERO };
                        let down = if n < top { src[f + st] * ((n + 1) as f64).sqrt() } else { ZERO };
                        *o = if *y { I * (up - down) } else { up + down };
                    }
                });
            }
            Operator::Tc { slot, couplings } => {
                let st = basis.stride(*slot);
                let top = basis.spec.n_max;
                let n_ions = couplings.len();
                par::for_each_chunk_mut(output, fd, |s, block| {
                    block.iter_mut().for_each(|o| *o = ZERO);
                    for (j, &g) in couplings.iter().enumerate().take(n_ions) {
                        if g == 0.0 {
                            continue;
                        }
                        let t = s ^ (1 << j);
                        let src = &input[t * fd..(t + 1) * fd];
                        if s >> j & 1 == 0 {
                            // a†σ⁻ from |t = s+j, n−1⟩
                            for (f, o) in block.iter_mut().enumerate() {
                                let n = basis.occupation(f, *slot);
                                if n > 0 {
                                    *o += src[f - st] * (g * (n as f64).sqrt());
                                }
                            }
                        } else {
                            // aσ⁺ from |t = s−j, n+1⟩
                            for (f, o) in block.iter_mut().enumerate() {
                                let n = basis.occupation(f, *slot);
                                if n < top {
                                    *o += src[f + st] * (g * ((n + 1) as f64).sqrt());
                                }
                            }
                        }
                    }
                });
            }
        }
    }

    /// `(⟨O⟩, ⟨O²⟩)` on a normalised state.
    pub fn moments(&self, state: &SpinBosonState) -> (f64, f64) {
        let b = &state.basis;
        let a = &state.amps;
        if self.diagonal(b, 0).is_some() {
            let m1 = par::sum_indexed(a.len(), |i| a[i].norm_sqr() * self.diagonal(b, i).unwrap());
            let m2 = par::sum_indexed(a.len(), |i| {
                let d = self.diagonal(b, i).unwrap();
                a[i].norm_sqr() * d * d
            });
            return (m1, m2);
        }
        let mut out = vec![ZERO; a.len()];
        self.apply(b, a, &mut out);
        let m1 = par::sum_indexed(a.len(), |i| (a[i].conj() * out[i]).re);
        let m2 = par::sum_indexed(a.len(), |i| out[i].norm_sqr());
        (m1, m2)
    }

    pub fn expectation(&self, state: &SpinBosonState) -> f64 {
        self.moments(state).0
    }

    pub fn variance(&self, state: &SpinBosonState) -> f64 {
        let (m1, m2) = self.moments(state);
        (m2 - m1 * m1).max(0.0)
    }
}
