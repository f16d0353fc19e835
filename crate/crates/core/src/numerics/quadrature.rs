//! Gauss–Hermite quadrature.

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights for `∫ f(x) e^{-x²} dx ≈ Σ w_i f(x_i)` (Golub–Welsch).
pub fn gauss_hermite(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let mut jac = DMatrix::<f64>::zeros(order, order);
    for k in 1..order {
        let b = (k as f64 / 2.0).sqrt();
        jac[(k, k - 1)] = b;
        jac[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Nodes and probability weights for expectations over `N(0, sigma²)`.
pub fn normal_nodes(order: usize, sigma: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_hermite(order);
    let norm = std::f64::consts::PI.sqrt();
    x.into_iter()
        .zip(w)
        .map(|(xi, wi)| (std::f64::consts::SQRT_2 * sigma * xi, wi / norm))
        .collect()
}
