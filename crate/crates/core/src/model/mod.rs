//! The stochastic Hamiltonian system, its kinetic Langevin special case,
//! Lyapunov functions, and grid verifiers for the drift assumptions.

mod certificate;
mod grid;
mod lyapunov;
mod potential;

pub use certificate::{auto_certificate, verify_b1, B1Report, InequalitySlack, PotentialCertificate};
pub use grid::GridSpec;
pub use lyapunov::{choose_r_eps, verify_a2ii, A2Report, F1Choice, LyapunovSpec, V0Spec};
pub use potential::{CustomPotential, Force, HamiltonianSystemSpec, KineticLangevinSpec, Potential};
