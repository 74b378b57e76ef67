//! Simulation of a pump-driven Kerr parametric oscillator (superconducting
//! parametron) in a truncated Fock space.
//!
//! The crate builds the rotating-frame Hamiltonian of a parametron both with
//! and without its non-resonant rapidly oscillating terms (NROTs), propagates
//! pure states and density matrices with a fixed-step RK4 integrator, and
//! derives the observables used to judge cat-state creation and single-qubit
//! gates: populations of the instantaneous eigenlevels, adiabatic
//! coefficients, Wigner functions and fidelity statistics.
//!
//! Frequencies are angular throughout (rad/ns); times are in ns. Conversion
//! from the `f/2π` values quoted in experiment configs happens once, at the
//! boundary (see the `parametron-cli` crate).

pub mod error;
pub mod experiments;
pub mod fockspace;
pub mod model;
pub mod observables;
pub mod parallel;
pub mod propagation;
pub mod schedules;

pub use error::{Error, Result};
pub use fockspace::{
    annihilation, cat_states, coherent_state, creation, even_cat, hermitian_eigh,
    number_operator, parity_projectors, DensityMatrix, EigenSystem, OperatorMatrix, Parity,
    StateVector,
};
pub use model::{build_drive, build_h_rwa, build_term_set, h_rot_at, ModelParams, TermSet};
pub use observables::{
    adiabatic_h, alpha_amplitude, dephasing_rate, fidelity_stats, instantaneous_populations,
    wigner, FidelityStats, WignerGrid, WignerGridSpec,
};
pub use propagation::{
    convergence_check, lindblad_rhs, propagate_density, propagate_state, rk4_step, HamiltonianOp,
    TimeGrid, Trajectory,
};
pub use schedules::{rz_phase, Schedule};

/// Convert an ordinary frequency `f/2π` in MHz to an angular frequency in rad/ns.
pub fn mhz_to_rad_per_ns(f_mhz: f64) -> f64 {
    2.0 * std::f64::consts::PI * f_mhz * 1e-3
}

/// Convert an ordinary frequency `f/2π` in GHz to an angular frequency in rad/ns.
pub fn ghz_to_rad_per_ns(f_ghz: f64) -> f64 {
    2.0 * std::f64::consts::PI * f_ghz
}

/// Convert an ordinary rate `f/2π` in kHz to an angular rate in rad/ns.
pub fn khz_to_rad_per_ns(f_khz: f64) -> f64 {
    2.0 * std::f64::consts::PI * f_khz * 1e-6
}
