use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::fockspace::SpinBosonState;
use crate::numerics::expm::expm_hermitian;
use crate::par;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Dense single-slot unitary on the truncated Fock space.
#[derive(Clone, Debug)]
pub struct BosonGate {
    pub matrix: DMatrix<C64>,
}

/// `exp(−iK)` for a Hermitian single-slot generator `K`.
pub fn boson_gate(generator: &DMatrix<C64>) -> BosonGate {
    BosonGate { matrix: expm_hermitian(generator, 1.0) }
}

impl BosonGate {
    /// `S(ζ) = exp(½(ζ* a² − ζ a†²))`.
    pub fn squeeze(n_max: usize, zeta: C64) -> Self {
        let l = n_max + 1;
        let mut k = DMatrix::<C64>::zeros(l, l);
        let half_i = C64::new(0.0, 0.5);
        for n in 0..l.saturating_sub(2) {
            let s = (((n + 1) * (n + 2)) as f64).sqrt();
            k[(n, n + 2)] = half_i * zeta.conj() * s;
            k[(n + 2, n)] = -half_i * zeta * s;
        }
        boson_gate(&k)
    }

    /// `D(β) = exp(β a† − β* a)`.
    pub fn displacement(n_max: usize, beta: C64) -> Self {
        let l = n_max + 1;
        let mut k = DMatrix::<C64>::zeros(l, l);
        let i = C64::new(0.0, 1.0);
        for n in 0..n_max {
            let s = ((n + 1) as f64).sqrt();
            k[(n + 1, n)] = i * beta * s;
            k[(n, n + 1)] = -i * beta.conj() * s;
        }
        boson_gate(&k)
    }

    pub fn apply(&self, state: &mut SpinBosonState, slot: usize) {
        let b = &state.basis;
        let l = b.levels;
        let st = b.stride(slot);
        let fd = b.fock_dim;
        let u = &self.matrix;
        par::for_each_chunk_mut(&mut state.amps, fd, |_, block| {
            let mut v = vec![ZERO; l];
            for base in 0..fd {
                if !(base / st).is_multiple_of(l) {
                    continue;
                }
                for (n, x) in v.iter_mut().enumerate() {
                    *x = block[base + n * st];
                }
                for m in 0..l {
                    let mut acc = ZERO;
                    for (n, x) in v.iter().enumerate() {
                        acc += u[(m, n)] * x;
                    }
                    block[base + m * st] = acc;
                }
            }
        });
    }
}

/// `exp(iκ(a_0† a_1 + a_1† a_0)/2)` on a two-slot space, built per block
/// of fixed total occupation.
pub(super) fn beam_splitter(state: &mut SpinBosonState, kappa: f64, _first: usize) {
    let b = &state.basis;
    let l = b.levels;
    let nmax = b.spec.n_max;
    let fd = b.fock_dim;
    // (fock indices, unitary) per total occupation
    let blocks: Vec<(Vec<usize>, DMatrix<C64>)> = (0..=2 * nmax)
        .map(|total| {
            let lo = total.saturating_sub(nmax);
            let hi = total.min(nmax);
            let n0s: Vec<usize> = (lo..=hi).collect();
            let d = n0s.len();
            let mut h = DMatrix::<C64>::zeros(d, d);
            for (i, &n0) in n0s.iter().enumerate().take(d.saturating_sub(1)) {
                // ⟨n0+1, n1−1| a_0† a_1 |n0, n1⟩
                let n1 = total - n0;
                let amp = -0.5 * kappa * (((n0 + 1) * n1) as f64).sqrt();
                h[(i + 1, i)] = C64::new(amp, 0.0);
                h[(i, i + 1)] = C64::new(amp, 0.0);
            }
            let idx = n0s.iter().map(|&n0| n0 + l * (total - n0)).collect();
            (idx, expm_hermitian(&h, 1.0))
        })
        .collect();
    par::for_each_chunk_mut(&mut state.amps, fd, |_, block| {
        for (idx, u) in &blocks {
            let v: Vec<C64> = idx.iter().map(|&f| block[f]).collect();
            for (m, &f) in idx.iter().enumerate() {
                block[f] = v.iter().enumerate().fold(ZERO, |acc, (n, x)| acc + u[(m, n)] * x);
            }
        }
    });
}
