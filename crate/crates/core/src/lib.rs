//! Minimisers of the anisotropic interaction energy
//! I(μ) = ∫(W∗μ)dμ + ∫|x|²dμ with W(x) = Ψ(x/|x|)/|x| in three dimensions.

pub mod cli;
pub mod energy;
pub mod equilibrium;
pub mod error;
pub mod harmonics;
pub mod potential;
pub mod quadrature;
pub mod shape;

pub use error::{Error, Result};
