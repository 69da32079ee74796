//! Simulation of entangled microwave-beam generation by a ring of transmon
//! qubits in a waveguide.
//!
//! A coherent plasmon excitation of the qubit array decays into pairs of
//! counter-propagating photons, building two-mode squeezed (EPR-correlated)
//! output beams. The crate integrates the variational Gaussian equations of
//! motion for the plasmon amplitude and the per-mode squeezing parameters,
//! and checks the numerics against independent closed-form oracles: the
//! continuum decay law, the detuned squeezing integral, the two-mode
//! closed-form solution, and Rabi-like photon-number oscillations.
//!
//! Unit convention: hbar = 1 and every energy or frequency is an angular
//! frequency in rad/ns (1 unit is about 0.159 GHz of ordinary frequency).

pub mod device;
pub mod dynamics;
pub mod error;
pub mod observables;
pub mod oracles;
pub mod quad;
pub mod scenario;

pub use device::{
    build_mode_spectrum, decay_rate, fourier_capacitance_energies, initial_amplitude,
    ModeSpectrum, PhysicalParams,
};
pub use dynamics::{
    coupling_strength, integrate, squeezing_of, EvolutionTrace, IntegratorConfig, PlasmonSystem,
    SystemState,
};
pub use error::{Error, Result};
pub use observables::{
    depletion_report, epr_quadrature_variance, fock_oracle_variance, number_difference_variance,
    photon_number, squeezing_spectrum, EprReport,
};
pub use oracles::{
    continuum_amplitude, continuum_squeezing, estimate_report, fig3_surface, max_squeezing,
    photon_number_continuum, rabi_photon_number, two_mode_closed_form, DimensionlessFrame,
};
pub use scenario::{parse_config, run_scenario, ScenarioConfig};
