//! Numerical kernels shared by the engines.

pub mod bessel;
pub mod chebyshev;
pub mod expm;
pub mod quadrature;

pub use num_complex::Complex64 as C64;
