//! Exponentials of small dense Hermitian generators.

use super::C64;
use nalgebra::{DMatrix, SymmetricEigen};

/// `exp(-i K t)` for Hermitian `K`, via its eigendecomposition.
pub fn expm_hermitian(k: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    let n = k.nrows();
    if n == 1 {
        return DMatrix::from_element(1, 1, C64::from_polar(1.0, -k[(0, 0)].re * t));
    }
    let eig = SymmetricEigen::new(k.clone());
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (c, &lam) in eig.eigenvalues.iter().enumerate() {
        let ph = C64::from_polar(1.0, -lam * t);
        scaled.column_mut(c).iter_mut().for_each(|x| *x *= ph);
    }
    scaled * v.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_y_rotation() {
        let mut k = DMatrix::<C64>::zeros(2, 2);
        k[(0, 1)] = C64::new(0.0, -1.0);
        k[(1, 0)] = C64::new(0.0, 1.0);
        let u = expm_hermitian(&k, 0.4);
        // exp(-i θ σ_y) = cos θ I - i sin θ σ_y
        assert!((u[(0, 0)] - C64::new(0.4f64.cos(), 0.0)).norm() < 1e-14);
        assert!((u[(0, 1)] - C64::new(-(0.4f64.sin()), 0.0)).norm() < 1e-14);
        assert!((u[(1, 0)] - C64::new(0.4f64.sin(), 0.0)).norm() < 1e-14);
    }
}
