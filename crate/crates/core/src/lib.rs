//! Normal-mode construction for the inhomogeneous damped-polariton model in
//! the one-dimensional transverse sector, together with a brute-force
//! diagonalization of the discretized Hamiltonian used to verify it.

pub mod export;
pub mod fields;
pub mod greenfn;
pub mod material;
pub mod modes;
pub mod oracle;
pub mod quadrature;
pub mod units;
