//! Hamiltonian assembly for qubits coupled to resonators, and the
//! second-order dispersive shift predictors.
//!
//! The full model is
//!
//! ```text
//! H = Σ_r ω_r a_r†a_r + Σ_q Σ_i E_{i;q} |i⟩_q⟨i|
//!     + Σ_(q,r) Σ_i g_{i,i+1;q} (a_r + a_r†)(σ⁺_{i+1,i} + σ⁻_{i,i+1})
//! ```
//!
//! with every coupling term optionally reduced to its rotating-wave form
//! `g (a σ⁺ + a† σ⁻)`. Inputs are linear frequencies in GHz; the assembled
//! matrix is angular (rad/ns).

use std::f64::consts::TAU;

use nalgebra::DMatrix;

use crate::error::{input, Error, Result};
use crate::hilbert::{
    annihilation_op, basis_index, basis_label, embed_many, total_dim, transition_op, BasisLabel, ModeSpec,
    Operator, StateVector,
};
use crate::C64;

/// Capacitive coupling between one qubit and one resonator, one strength per
/// qubit ladder transition `i ↔ i+1`.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingSpec {
    pub qubit_index: usize,
    pub resonator_index: usize,
    pub g_per_transition: Vec<f64>,
    /// Drop the counter-rotating terms `a σ⁻ + a† σ⁺`.
    pub rwa: bool,
}

impl CouplingSpec {
    pub fn new(qubit_index: usize, resonator_index: usize, g_per_transition: Vec<f64>) -> Self {
        Self { qubit_index, resonator_index, g_per_transition, rwa: false }
    }

    pub fn with_rwa(mut self, rwa: bool) -> Self {
        self.rwa = rwa;
        self
    }
}

/// Ordered modes plus qubit–resonator couplings. Qubits never couple to each
/// other directly.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemSpec {
    pub modes: Vec<ModeSpec>,
    pub couplings: Vec<CouplingSpec>,
}

impl SystemSpec {
    pub fn new(modes: Vec<ModeSpec>, couplings: Vec<CouplingSpec>) -> Result<Self> {
        let spec = Self { modes, couplings };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return input("system has no modes");
        }
        let mut seen = Vec::new();
        for c in &self.couplings {
            let (q, r) = (c.qubit_index, c.resonator_index);
            let qm = self.modes.get(q).ok_or_else(|| Error::Input(format!("coupling qubit index {q} out of range")))?;
            let rm = self
                .modes
                .get(r)
                .ok_or_else(|| Error::Input(format!("coupling resonator index {r} out of range")))?;
            if !qm.is_qubit() {
                return input(format!("coupling endpoint {q} is not a qubit"));
            }
            if rm.is_qubit() {
                return input(format!("coupling endpoint {r} is not a resonator (qubit-qubit couplings are not modelled)"));
            }
            if c.g_per_transition.len() != qm.dim() - 1 {
                return input(format!(
                    "coupling ({q},{r}) lists {} strengths for a {}-level qubit",
                    c.g_per_transition.len(),
                    qm.dim()
                ));
            }
            if let Some(g) = c.g_per_transition.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
                return input(format!("coupling ({q},{r}) strength {g} must be finite and non-negative"));
            }
            if seen.contains(&(q, r)) {
                return input(format!("duplicate coupling between qubit {q} and resonator {r}"));
            }
            seen.push((q, r));
        }
        Ok(())
    }

    pub fn dims(&self) -> Vec<usize> {
        self.modes.iter().map(ModeSpec::dim).collect()
    }

    pub fn total_dim(&self) -> usize {
        total_dim(&self.dims())
    }

    pub fn without_couplings(&self) -> Self {
        Self { modes: self.modes.clone(), couplings: Vec::new() }
    }

    pub fn coupling(&self, qubit: usize, resonator: usize) -> Option<&CouplingSpec> {
        self.couplings.iter().find(|c| c.qubit_index == qubit && c.resonator_index == resonator)
    }

    /// Largest `0 ↔ 1` coupling strength of `qubit` over all resonators.
    pub fn g01(&self, qubit: usize) -> Option<f64> {
        self.couplings
            .iter()
            .filter(|c| c.qubit_index == qubit)
            .filter_map(|c| c.g_per_transition.first().copied())
            .reduce(f64::max)
    }

    /// Retunes `qubit` so its `0 ↔ 1` transition sits at `freq_ghz`; higher
    /// transitions move rigidly, preserving the anharmonicity.
    pub fn with_qubit_frequency(&self, qubit: usize, freq_ghz: f64) -> Result<Self> {
        let mode = self.modes.get(qubit).ok_or_else(|| Error::Input(format!("mode index {qubit} out of range")))?;
        if !mode.is_qubit() {
            return input(format!("mode {qubit} is not a qubit"));
        }
        let shift = freq_ghz - mode.level_freqs()[0];
        let freqs: Vec<f64> = mode.level_freqs().iter().map(|f| f + shift).collect();
        let mut out = self.clone();
        out.modes[qubit] = ModeSpec::qubit(&freqs)?;
        Ok(out)
    }

    /// Sets every transition of the `(qubit, resonator)` coupling to `g_ghz`,
    /// adding the coupling if it is absent.
    pub fn with_coupling(&self, qubit: usize, resonator: usize, g_ghz: f64) -> Result<Self> {
        let mode = self.modes.get(qubit).ok_or_else(|| Error::Input(format!("mode index {qubit} out of range")))?;
        let n = mode.dim().saturating_sub(1);
        let mut out = self.clone();
        match out.couplings.iter_mut().find(|c| c.qubit_index == qubit && c.resonator_index == resonator) {
            Some(c) => c.g_per_transition = vec![g_ghz; n],
            None => out.couplings.push(CouplingSpec::new(qubit, resonator, vec![g_ghz; n])),
        }
        out.validate()?;
        Ok(out)
    }

    /// Replaces every resonator's Fock cutoff.
    pub fn with_cutoff(&self, cutoff: usize) -> Result<Self> {
        let mut out = self.clone();
        for m in out.modes.iter_mut().filter(|m| !m.is_qubit()) {
            *m = ModeSpec::resonator(m.level_freqs()[0], cutoff)?;
        }
        Ok(out)
    }

    /// Raises every resonator's Fock cutoff by `extra`.
    pub fn with_cutoff_raised(&self, extra: usize) -> Result<Self> {
        let mut out = self.clone();
        for m in out.modes.iter_mut().filter(|m| !m.is_qubit()) {
            *m = ModeSpec::resonator(m.level_freqs()[0], m.dim() - 1 + extra)?;
        }
        Ok(out)
    }

    /// Diagonal of the uncoupled Hamiltonian in rad/ns, indexed like the basis.
    pub fn bare_energies(&self) -> Vec<f64> {
        let dims = self.dims();
        let levels: Vec<Vec<f64>> = self.modes.iter().map(ModeSpec::level_energies_ghz).collect();
        (0..total_dim(&dims))
            .map(|idx| {
                let label = basis_label(idx, &dims).expect("index within range");
                TAU * label.occupations().iter().zip(&levels).map(|(&n, e)| e[n]).sum::<f64>()
            })
            .collect()
    }
}

/// Observable change tolerated when the resonator cutoff is raised by two.
pub const CUTOFF_CONVERGENCE_TOL: f64 = 1e-6;

/// An observable evaluated at a cutoff and at that cutoff plus two.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffCheck {
    pub value: f64,
    pub refined: f64,
}

impl CutoffCheck {
    pub fn change(&self) -> f64 {
        (self.refined - self.value).abs()
    }

    pub fn converged(&self) -> bool {
        self.change() < CUTOFF_CONVERGENCE_TOL
    }
}

/// Truncation check: reruns `observable` with every resonator cutoff raised
/// by two. Basis labels valid for `spec` stay valid for the larger system.
pub fn cutoff_convergence<F>(spec: &SystemSpec, observable: F) -> Result<CutoffCheck>
where
    F: Fn(&SystemSpec) -> Result<f64>,
{
    Ok(CutoffCheck { value: observable(spec)?, refined: observable(&spec.with_cutoff_raised(2)?)? })
}

/// Assembles the Hamiltonian of `spec` in rad/ns.
pub fn build_hamiltonian(spec: &SystemSpec) -> Result<Operator> {
    spec.validate()?;
    let dims = spec.dims();
    let mut h = Operator::zeros(&dims);
    let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        spec.total_dim(),
        spec.bare_energies().into_iter().map(|e| C64::new(e, 0.0)),
    ));
    h.add_assign_matrix(&diag);

    for c in &spec.couplings {
        let qd = dims[c.qubit_index];
        let a = annihilation_op(dims[c.resonator_index])?;
        let a_dag = a.adjoint();
        for (i, &g) in c.g_per_transition.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let raise = transition_op(qd, i + 1, i)?;
            let lower = transition_op(qd, i, i + 1)?;
            let w = C64::new(TAU * g, 0.0);
            let term = if c.rwa {
                embed_many(&[(c.resonator_index, &a), (c.qubit_index, &raise)], &dims)?
                    .add(&embed_many(&[(c.resonator_index, &a_dag), (c.qubit_index, &lower)], &dims)?)?
            } else {
                let x = a.add(&a_dag)?;
                let sx = raise.add(&lower)?;
                embed_many(&[(c.resonator_index, &x), (c.qubit_index, &sx)], &dims)?
            };
            h.add_assign_matrix(&(term.into_matrix() * w));
        }
    }
    Ok(h)
}

/// Total excitation number `Σ_r a†a + Σ_q Σ_i i |i⟩⟨i|`, conserved by the
/// rotating-wave Hamiltonian.
pub fn excitation_number(spec: &SystemSpec) -> Operator {
    let dims = spec.dims();
    let d = total_dim(&dims);
    let mut m = DMatrix::zeros(d, d);
    for idx in 0..d {
        let label = basis_label(idx, &dims).expect("index within range");
        m[(idx, idx)] = C64::new(label.occupations().iter().sum::<usize>() as f64, 0.0);
    }
    Operator::new(dims, m).expect("shape built from dims")
}

/// Eigenstate of `spec`'s Hamiltonian with the largest weight on the bare
/// state `label`, phased so that weight is real and positive.
///
/// Used to start oscillations from states already dressed by every coupling
/// in `spec` (typically the system minus the couplings that drive the
/// oscillation of interest).
pub fn dressed_state(spec: &SystemSpec, label: &BasisLabel) -> Result<StateVector> {
    let dims = spec.dims();
    let idx = basis_index(label, &dims)?;
    let spectrum = crate::dynamics::Spectrum::new(&build_hamiltonian(spec)?)?;
    let vecs = spectrum.eigenvectors();
    let best = (0..vecs.ncols())
        .max_by(|&a, &b| vecs[(idx, a)].norm_sqr().total_cmp(&vecs[(idx, b)].norm_sqr()))
        .ok_or_else(|| Error::Numerical("empty spectrum".into()))?;
    let col = vecs.column(best).into_owned();
    let phase = col[idx].conj() / col[idx].norm();
    StateVector::new(dims, col * phase)
}

fn detuning(nu_q: f64, nu_r: f64) -> Result<f64> {
    let delta = nu_q - nu_r;
    if delta == 0.0 || !delta.is_finite() {
        return Err(Error::Domain(format!(
            "qubit ({nu_q} GHz) and resonator ({nu_r} GHz) are resonant; the dispersive frame is undefined"
        )));
    }
    Ok(delta)
}

fn sigma_z(state: u8) -> Result<f64> {
    match state {
        0 => Ok(-1.0),
        1 => Ok(1.0),
        s => input(format!("qubit state must be 0 or 1, got {s}")),
    }
}

/// Photon-number-dependent qubit frequency `ν_q + (g²/Δ)(2n+1)`.
///
/// `Δ = ν_q − ν_r`: a qubit above the resonator is pushed further up. This
/// matches exact diagonalization of the two-level Rabi model to second order
/// in `g/Δ`.
pub fn dispersive_qubit_frequency(nu_q: f64, nu_r: f64, g: f64, n: u32) -> Result<f64> {
    let delta = detuning(nu_q, nu_r)?;
    Ok(nu_q + g * g / delta * (2.0 * n as f64 + 1.0))
}

/// Qubit-state-dependent resonator frequency `ν_r + s·g²/Δ`, `s = ±1` the
/// `σ_z` eigenvalue of `qubit_state` (`|1⟩ → +1`) and `Δ = ν_q − ν_r`.
pub fn dispersive_resonator_frequency(nu_r: f64, nu_q: f64, g: f64, qubit_state: u8) -> Result<f64> {
    let delta = detuning(nu_q, nu_r)?;
    Ok(nu_r + sigma_z(qubit_state)? * g * g / delta)
}

/// Resonator frequency shifted by several qubits, `ν_r + Σ_i s_i χ_i`. The
/// shifts `χ_i` are supplied by the caller; for a single qubit,
/// `χ = g²/Δ` reproduces [`dispersive_resonator_frequency`].
pub fn qsd_shifted_frequency(nu_r: f64, chi: &[f64], states: &[u8]) -> Result<f64> {
    if chi.len() != states.len() {
        return input(format!("{} shifts for {} qubit states", chi.len(), states.len()));
    }
    chi.iter().zip(states).try_fold(nu_r, |acc, (x, &s)| Ok(acc + sigma_z(s)? * x))
}
