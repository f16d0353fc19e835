//! Axial equilibrium and normal modes of a linear ion chain.
//!
//! Lengths are in units of the Coulomb length `(e²/4πε₀ M ω_z²)^{1/3}` and
//! frequencies in units of the axial trap frequency, so the trap drops out.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which axial mode a spin-boson coupling refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Centre-of-mass mode, uniform participation.
    Cm,
    /// Breathing mode, participation proportional to equilibrium position.
    B,
}

/// Equilibrium configuration and axial modes for `n_ions` ions.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainModel {
    pub n_ions: usize,
    pub positions: Vec<f64>,
    pub mode_freqs: Vec<f64>,
    /// `mode_vectors[m][j]` is the participation of ion `j` in mode `m`.
    pub mode_vectors: Vec<Vec<f64>>,
    pub couplings_cm: Vec<f64>,
    pub couplings_b: Vec<f64>,
}

impl ChainModel {
    pub fn new(n_ions: usize) -> Result<Self> {
        let positions = solve_equilibrium(n_ions)?;
        let (mode_freqs, mode_vectors) = normal_modes(&positions)?;
        let couplings_cm = uniform_coupling(n_ions);
        let couplings_b = breathing_coupling(&positions);
        Ok(Self { n_ions, positions, mode_freqs, mode_vectors, couplings_cm, couplings_b })
    }

    /// Coupling vector in units of `g_0`; unit Euclidean norm.
    pub fn coupling_vector(&self, mode: Mode) -> &[f64] {
        match mode {
            Mode::Cm => &self.couplings_cm,
            Mode::B => &self.couplings_b,
        }
    }
}

const MAX_NEWTON: usize = 200;
const RESIDUAL_TOL: f64 = 1e-13;

/// Force-balance residual of each ion, with compensated summation so the
/// residual floor stays near machine precision for long chains.
pub fn force_residuals(u: &[f64]) -> Vec<f64> {
    let n = u.len();
    (0..n)
        .map(|m| {
            let (mut sum, mut comp) = (u[m], 0.0);
            for k in 0..n {
                if k == m {
                    continue;
                }
                let d = u[m] - u[k];
                let x = -d.signum() / (d * d);
                let t = sum + x;
                comp += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
                sum = t;
            }
            sum + comp
        })
        .collect()
}

/// Dimensionless axial Hessian at positions `u`.
pub fn axial_hessian(u: &[f64]) -> DMatrix<f64> {
    let n = u.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for m in 0..n {
        let mut diag = 1.0;
        for k in 0..n {
            if k == m {
                continue;
            }
            let c = 2.0 / (u[m] - u[k]).abs().powi(3);
            a[(m, k)] = -c;
            diag += c;
        }
        a[(m, m)] = diag;
    }
    a
}

/// Equilibrium positions, ascending, from damped Newton iteration.
pub fn solve_equilibrium(n_ions: usize) -> Result<Vec<f64>> {
    if n_ions < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 ions, got {n_ions}")));
    }
    let n = n_ions;
    let spacing = 2.018 * (n as f64).powf(-0.559);
    let centre = (n as f64 + 1.0) / 2.0;
    let mut u: Vec<f64> = (1..=n).map(|j| spacing * (j as f64 - centre)).collect();
    let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut res = force_residuals(&u);
    let mut iterations = 0;
    let mut stalled = 0;
    while norm(&res) > RESIDUAL_TOL && iterations < MAX_NEWTON && stalled < 3 {
        iterations += 1;
        let jac = axial_hessian(&u);
        let rhs = DVector::from_vec(res.iter().map(|r| -r).collect());
        let step = jac
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("singular Jacobian in equilibrium solver".into()))?;
        let current = norm(&res);
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, s)| a + lambda * s).collect();
            let ordered = trial.windows(2).all(|w| w[0] < w[1]);
            if ordered {
                let r = force_residuals(&trial);
                if norm(&r) < current || lambda < 1e-6 {
                    stalled = if norm(&r) < current { 0 } else { stalled + 1 };
                    u = trial;
                    res = r;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-12 {
                return Err(Error::EquilibriumNotConverged { iterations, max_residual: current });
            }
        }
    }
    // reflection symmetry, then ulp-level polishing of mirrored pairs
    let mut sym: Vec<f64> = (0..n).map(|j| 0.5 * (u[j] - u[n - 1 - j])).collect();
    if norm(&force_residuals(&sym)) > RESIDUAL_TOL {
        polish(&mut sym);
    }
    let r = norm(&force_residuals(&sym));
    if r > 1e-12_f64.max(rounding_floor(&sym)) {
        return Err(Error::EquilibriumNotConverged { iterations, max_residual: r });
    }
    Ok(sym)
}

/// Residual change caused by a one-ulp move of the stiffest ion; below this
/// no representable set of positions does better.
pub fn rounding_floor(u: &[f64]) -> f64 {
    let a = axial_hessian(u);
    (0..u.len()).map(|m| a[(m, m)] * (u[m].abs().next_up() - u[m].abs())).fold(0.0, f64::max)
}

/// Coordinate descent over few-ulp moves of mirrored pairs, for long chains
/// where Newton stalls at the rounding floor of the positions.
fn polish(u: &mut [f64]) {
    let n = u.len();
    // smooth surrogate for the max norm
    let score = |u: &[f64]| force_residuals(u).iter().map(|r| (r * 1e12).powi(8)).sum::<f64>();
    let mut best = score(u);
    for _ in 0..20 {
        let mut improved = false;
        for m in n.div_ceil(2)..n {
            for steps in [-2i32, -1, 1, 2] {
                let mut x = u[m];
                for _ in 0..steps.abs() {
                    x = if steps > 0 { x.next_up() } else { x.next_down() };
                }
                let mut trial = u.to_vec();
                trial[m] = x;
                trial[n - 1 - m] = -x;
                let sc = score(&trial);
                if sc < best {
                    best = sc;
                    u.copy_from_slice(&trial);
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
}

/// Mode frequencies (ascending) and orthonormal eigenvectors of the axial
/// Hessian. Each eigenvector's largest-magnitude entry is made positive;
/// near-ties (within 1e-9) go to the lowest index.
pub fn normal_modes(positions: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let a = axial_hessian(positions);
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..positions.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut freqs = Vec::with_capacity(order.len());
    let mut vecs = Vec::with_capacity(order.len());
    for (rank, &i) in order.iter().enumerate() {
        let lam = eig.eigenvalues[i];
        if lam <= 0.0 {
            return Err(Error::NonPositiveMode { index: rank, value: lam });
        }
        freqs.push(lam.sqrt());
        let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let lead = v.iter().position(|x| x.abs() >= vmax - 1e-9).unwrap_or(0);
        if v[lead] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        vecs.push(v);
    }
    Ok((freqs, vecs))
}

fn uniform_coupling(n: usize) -> Vec<f64> {
    vec![1.0 / (n as f64).sqrt(); n]
}

fn breathing_coupling(u: &[f64]) -> Vec<f64> {
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    u.iter().map(|x| x / norm).collect()
}

/// Coupling vector of `mode` for a chain of `n_ions`, in units of `g_0`.
pub fn coupling_vector(chain: &ChainModel, mode: Mode) -> Vec<f64> {
    chain.coupling_vector(mode).to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_ions_closed_form() {
        let u = solve_equilibrium(2).unwrap();
        let x = 0.25f64.cbrt();
        assert!((u[0] + x).abs() < 1e-12 && (u[1] - x).abs() < 1e-12);
        let (f, _) = normal_modes(&u).unwrap();
        assert!((f[0] - 1.0).abs() < 1e-10);
        assert!((f[1] - 3f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn three_ions_closed_form() {
        let u = solve_equilibrium(3).unwrap();
        let x = 1.25f64.cbrt();
        assert!((u[0] + x).abs() < 1e-12);
        assert!(u[1].abs() < 1e-14);
        assert!((u[2] - x).abs() < 1e-12);
    }

    #[test]
    fn couplings_examples() {
        let c4 = ChainModel::new(4).unwrap();
        assert!(c4.couplings_cm.iter().all(|g| (g - 0.5).abs() < 1e-15));
        let c2 = ChainModel::new(2).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((c2.couplings_b[0] + h).abs() < 1e-12 && (c2.couplings_b[1] - h).abs() < 1e-12);
    }

    #[test]
    fn single_ion_rejected() {
        assert!(matches!(solve_equilibrium(1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn mode_structure_across_sizes() {
        for n in [2usize, 3, 5, 8, 13, 20, 37, 64, 100] {
            let c = ChainModel::new(n).unwrap();
            let res = force_residuals(&c.positions);
            assert!(res.iter().all(|r| r.abs() < 1e-12), "n={n}");
            assert!(c.positions.windows(2).all(|w| w[0] < w[1]));
            for j in 0..n {
                assert!((c.positions[j] + c.positions[n - 1 - j]).abs() < 1e-10);
            }
            assert!(c.positions.iter().sum::<f64>().abs() < 1e-12);
            assert!((c.mode_freqs[0] - 1.0).abs() < 1e-8);
            assert!((c.mode_freqs[1] - 3f64.sqrt()).abs() < 1e-8);
            // orthonormality
            for a in 0..n {
                for b in 0..n {
                    let d: f64 = c.mode_vectors[a].iter().zip(&c.mode_vectors[b]).map(|(x, y)| x * y).sum();
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert!((d - want).abs() < 1e-10);
                }
            }
            // CM mode uniform, breathing mode parallel to positions
            let inv = 1.0 / (n as f64).sqrt();
            assert!(c.mode_vectors[0].iter().all(|x| (x - inv).abs() < 1e-10));
            let cos: f64 = c.mode_vectors[1].iter().zip(&c.couplings_b).map(|(x, y)| x * y).sum();
            assert!(cos.abs() > 1.0 - 1e-10);
            for (x, y) in c.mode_vectors[1].iter().zip(&c.couplings_b) {
                assert!((x.abs() - y.abs()).abs() < 1e-8);
            }
            assert!(c.couplings_b.iter().sum::<f64>().abs() < 1e-12);
            let nb: f64 = c.couplings_b.iter().map(|g| g * g).sum();
            let nc: f64 = c.couplings_cm.iter().map(|g| g * g).sum();
            assert!((nb - 1.0).abs() < 1e-12 && (nc - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn large_chain_converges() {
        for n in [50, 100, 150, 200] {
            let u = solve_equilibrium(n).unwrap();
            let worst = force_residuals(&u).iter().fold(0.0f64, |m, r| m.max(r.abs()));
            assert!(worst < 1e-12_f64.max(rounding_floor(&u)), "N={n}: {worst:e}");
        }
    }
}
