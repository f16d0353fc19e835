//! Spin-boson simulation of squeezing-enhanced Ramsey protocols in trapped-ion
//! chains.
//!
//! Units: spin-boson coupling `g_0 = 1`, so the exchange time is `t_π = π/2`.

pub mod chain;
pub mod dynamics;
pub mod error;
pub mod fockspace;
pub mod metrology;
pub mod noise;
pub mod numerics;
pub mod par;
pub mod protocols;
pub mod runner;
pub mod twa;

pub use error::{Error, Result};
