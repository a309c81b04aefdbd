//! Simulation of the refined basic coupling of two copies of the system.

mod simulate;
mod state;
mod step;

pub use simulate::{replica_rng, simulate_ensemble, simulate_pair, simulate_single, write_trajectory_csv, SimConfig, Snapshots, Trajectory};
pub use state::{CouplingParams, PairState};
pub use step::{classify_branch, classify_jump, modification_shift, Branch, Stepper, BLOW_UP};

#[cfg(test)]
mod tests;
