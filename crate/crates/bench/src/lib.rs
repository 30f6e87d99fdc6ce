//! Fixtures shared by the criterion benchmarks.

use srqed_core::sweep::two_qubit_base;
use srqed_core::{BasisLabel, ControlledPhaseParams, StateVector, SystemSpec};

/// Two-level qubit on a 6 GHz resonator plus a second qubit at `freq`,
/// resonator cutoff `cutoff`.
pub fn two_qubit_system(freq: f64, cutoff: usize) -> SystemSpec {
    two_qubit_base(6.0, 7.0, 0.2, cutoff).with_qubit_frequency(1, freq).expect("valid").with_coupling(1, 2, 0.05).expect("valid")
}

/// The three-qubit charge system used by the doubly-controlled phase gate.
pub fn ccphase_system() -> SystemSpec {
    ControlledPhaseParams::charge_ccphase().spec
}

pub fn basis_state(spec: &SystemSpec, occ: &[usize]) -> StateVector {
    StateVector::basis(&BasisLabel::new(occ.to_vec()), &spec.dims()).expect("valid label")
}
