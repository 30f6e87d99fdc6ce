//! Closed-system simulation of qubits coupled to microwave resonators.
//!
//! The crate builds multi-level qubit/resonator Hamiltonians, evolves states
//! exactly through a single Hermitian eigendecomposition, maps
//! selective-resonance structure over parameter grids and runs the
//! resonator-mediated controlled-phase, doubly-controlled-phase and Fredkin
//! protocols with fidelity reporting.
//!
//! Units: every frequency crossing the public API is a linear frequency
//! `ν = ω/2π` in GHz, every time is in ns. Hamiltonians are stored in
//! angular units (rad/ns) with ħ = 1.

pub mod dynamics;
pub mod error;
pub mod gates;
pub mod hamiltonian;
pub mod hilbert;
pub(crate) mod search;
pub mod sweep;

pub use num_complex::Complex64 as C64;

pub use dynamics::{evolve, maev, propagator, rabi_frequency, transition_probability, Maev, Spectrum, Trajectory};
pub use error::{Error, Result};
pub use gates::{
    build_ccphase_protocol, build_cphase_protocol, build_fredkin_protocol, find_resonance, gate_fidelity,
    run_protocol, ControlledPhaseParams, DurationMode, FidelityReport, FredkinParams, GateKind, GateProtocol,
    Scan,
};
pub use hamiltonian::{build_hamiltonian, cutoff_convergence, CouplingSpec, CutoffCheck, SystemSpec};
pub use hilbert::{basis_index, basis_label, BasisLabel, ModeKind, ModeSpec, Operator, StateVector};
pub use sweep::{run_sweep, write_csv, MaevCell, MaevMap, Oscillation, SweepGrid};
