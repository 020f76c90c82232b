//! Numerical laboratory for relative quantum energy inequalities: matrix models with
//! exact modular theory and a lattice free scalar field on a truncated Fock space.

pub mod fock;
pub mod modular;
pub mod operator;
pub mod precision;
pub mod qei;
pub mod quadrature;
pub mod scalar;
pub mod search;
pub mod toy;
