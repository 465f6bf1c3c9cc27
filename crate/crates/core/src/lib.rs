//! Finite-difference laboratory for vector-valued parabolic systems
//! `Lf = div(Q grad f) - F . grad f + div(C f) - V f` with matrix potentials.

pub mod check;
pub mod coeffs;
pub mod grid;
pub mod assembly;
pub mod linalg;
pub mod evolve;
pub mod props;
pub mod cli;
