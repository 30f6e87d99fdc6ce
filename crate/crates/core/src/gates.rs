//! Resonator-mediated entangling gates driven by selective resonance.
//!
//! A target qubit is tuned onto the resonator frequency that the resonator
//! takes when the control qubits are in one particular state. For that
//! control state the target's excitation swaps into the resonator and back,
//! picking up a sign after a full exchange (`2π g t = π`); for every other
//! control state the exchange is detuned and (ideally) returns without a sign.
//!
//! Fidelities are evaluated in the frame rotating with the uncoupled
//! Hamiltonian, after the best single-qubit Z corrections (free frame
//! updates); see [`FidelityReport`].

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::dynamics::{default_window, Spectrum};
use crate::error::{input, Error, Result};
use crate::hamiltonian::{build_hamiltonian, CouplingSpec, SystemSpec};
use crate::hilbert::{basis_index, BasisLabel, ModeSpec, Operator, StateVector};
use crate::search::golden_section_max;
use crate::sweep::Oscillation;
use crate::C64;

/// Relative mismatch tolerated between the two couplings that must share one
/// Fredkin stage duration.
pub const FREDKIN_COUPLING_TOL: f64 = 1e-6;

/// Resonance scans stop refining below this width (GHz), i.e. 0.1 MHz.
pub const RESONANCE_TOL_GHZ: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateKind {
    CPhase,
    CCPhase,
    Fredkin,
}

impl GateKind {
    pub fn name(self) -> &'static str {
        match self {
            GateKind::CPhase => "cphase",
            GateKind::CCPhase => "ccphase",
            GateKind::Fredkin => "fredkin",
        }
    }
}

/// How a controlled-phase gate's duration is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DurationMode {
    /// `2π g t = π`, i.e. `t = 1/(2g)` with `g` the target's `0 ↔ 1` coupling.
    Nominal,
    Fixed(f64),
    /// Twice the time of maximal transfer of the wanted oscillation.
    Peak,
    /// Maximizes the gate fidelity over `[0.9, 1.1] ×` nominal.
    Optimize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stage {
    pub duration_ns: f64,
    pub spec: SystemSpec,
}

#[derive(Clone, Debug, PartialEq)]
enum Ideal {
    /// Sign flip when the control bits equal `control_state` and the target
    /// bit is 1. Positions index into the protocol's qubit list.
    Phase { controls: Vec<usize>, target: usize, control_state: Vec<u8> },
    /// Swap of two bits when the control bit is 1.
    Fredkin { control: usize, swap: (usize, usize) },
}

/// A physical system plus its stage schedule and the ideal action on the
/// computational subspace.
#[derive(Clone, Debug, PartialEq)]
pub struct GateProtocol {
    pub kind: GateKind,
    pub stages: Vec<Stage>,
    /// Mode indices of the computational qubits, most significant first.
    pub qubits: Vec<usize>,
    ideal: Ideal,
}

impl GateProtocol {
    /// The first stage's system.
    pub fn spec(&self) -> &SystemSpec {
        &self.stages[0].spec
    }

    pub fn dims(&self) -> Vec<usize> {
        self.spec().dims()
    }

    pub fn duration_ns(&self) -> f64 {
        self.stages.iter().map(|s| s.duration_ns).sum()
    }

    /// Computational basis inputs in binary order over [`GateProtocol::qubits`].
    pub fn computational_inputs(&self) -> Vec<Vec<u8>> {
        let n = self.qubits.len();
        (0..1usize << n).map(|k| (0..n).map(|i| ((k >> (n - 1 - i)) & 1) as u8).collect()).collect()
    }

    /// `|bits⟩ ⊗ |0⟩` over every non-computational mode.
    pub fn label(&self, bits: &[u8]) -> BasisLabel {
        let mut occ = vec![0; self.spec().modes.len()];
        for (&q, &b) in self.qubits.iter().zip(bits) {
            occ[q] = b as usize;
        }
        BasisLabel(occ)
    }

    /// Ideal image of a computational input: output bits and sign.
    pub fn ideal_output(&self, bits: &[u8]) -> (Vec<u8>, f64) {
        match &self.ideal {
            Ideal::Phase { controls, target, control_state } => {
                let hit = controls.iter().zip(control_state).all(|(&c, &s)| bits[c] == s) && bits[*target] == 1;
                (bits.to_vec(), if hit { -1.0 } else { 1.0 })
            }
            Ideal::Fredkin { control, swap } => {
                let mut out = bits.to_vec();
                if bits[*control] == 1 {
                    out.swap(swap.0, swap.1);
                }
                (out, 1.0)
            }
        }
    }

    /// Equal superposition of every computational input, resonators empty.
    pub fn reference_input(&self) -> Result<StateVector> {
        let terms: Vec<(BasisLabel, f64)> = self.computational_inputs().iter().map(|b| (self.label(b), 1.0)).collect();
        StateVector::superposition(&terms, &self.dims())
    }

    /// The ideal gate applied to [`GateProtocol::reference_input`].
    pub fn ideal_reference_output(&self) -> Result<StateVector> {
        let terms: Vec<(BasisLabel, f64)> = self
            .computational_inputs()
            .iter()
            .map(|b| {
                let (out, sign) = self.ideal_output(b);
                (self.label(&out), sign)
            })
            .collect();
        StateVector::superposition(&terms, &self.dims())
    }

    fn validate(&self) -> Result<()> {
        let first = self.stages.first().ok_or_else(|| Error::Input("protocol has no stages".into()))?;
        for s in &self.stages {
            s.spec.validate()?;
            if !(s.duration_ns > 0.0 && s.duration_ns.is_finite()) {
                return input(format!("stage duration must be positive, got {}", s.duration_ns));
            }
            if s.spec.dims() != first.spec.dims()
                || s.spec.modes.iter().zip(&first.spec.modes).any(|(a, b)| a.kind() != b.kind())
            {
                return input("all stages must share mode kinds and dimensions");
            }
        }
        for &q in &self.qubits {
            if !first.spec.modes.get(q).is_some_and(ModeSpec::is_qubit) {
                return input(format!("computational mode {q} is not a qubit"));
            }
        }
        Ok(())
    }

    /// Accumulated free-evolution phase `Σ_s E⁰_s(k) t_s` per basis index.
    fn frame_angles(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.spec().total_dim()];
        for s in &self.stages {
            for (a, e) in acc.iter_mut().zip(s.spec.bare_energies()) {
                *a += e * s.duration_ns;
            }
        }
        acc
    }

    /// Removes the free evolution of the uncoupled modes from a lab-frame
    /// final state.
    pub fn to_rotating_frame(&self, state: &StateVector) -> Result<StateVector> {
        if state.dims() != self.dims() {
            return input("state does not live on this protocol's system");
        }
        let amps = state
            .amplitudes()
            .iter()
            .zip(self.frame_angles())
            .map(|(a, phi)| a * C64::from_polar(1.0, phi))
            .collect::<Vec<_>>();
        Ok(StateVector::from_normalized(state.dims().to_vec(), DVector::from_vec(amps)))
    }

    fn with_single_duration(&self, t: f64) -> Self {
        let mut p = self.clone();
        p.stages[0].duration_ns = t;
        p
    }
}

/// Physical system and roles for a (multiply) controlled-phase gate.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlledPhaseParams {
    pub spec: SystemSpec,
    pub controls: Vec<usize>,
    pub target: usize,
    pub resonator: usize,
    /// Control bits for which the target is resonant (and its `|1⟩` flips sign).
    pub control_state: Vec<u8>,
    pub duration: DurationMode,
}

/// Default resonator cutoff for gate runs (Fock states 0..=3).
pub const GATE_CUTOFF: usize = 3;

impl ControlledPhaseParams {
    /// Two three-level charge qubits on one resonator: ν_r = 6.0 GHz;
    /// control 5.0/6.2 GHz with g = 0.2 GHz on both transitions; target
    /// 6.035/7.335 GHz with g = 0.0488 GHz.
    pub fn charge_cphase() -> Self {
        let spec = SystemSpec::new(
            vec![
                ModeSpec::qubit(&[5.0, 6.2]).expect("valid"),
                ModeSpec::qubit(&[6.035, 7.335]).expect("valid"),
                ModeSpec::resonator(6.0, GATE_CUTOFF).expect("valid"),
            ],
            vec![CouplingSpec::new(0, 2, vec![0.2, 0.2]), CouplingSpec::new(1, 2, vec![0.0488, 0.0488])],
        )
        .expect("valid system");
        Self { spec, controls: vec![0], target: 1, resonator: 2, control_state: vec![0], duration: DurationMode::Nominal }
    }

    /// Two-level ("perfect") qubits: ν_r = 6.0, control 7.0 GHz with g = 0.2;
    /// target on the control-|0⟩ resonance with `g = δ/(2√3)`, where
    /// `δ = 2·0.2²/1.0` GHz is the control-state splitting of the resonator.
    /// That coupling makes the unwanted oscillation run exactly twice as fast
    /// as the wanted one.
    pub fn perfect_cphase() -> Self {
        let split = 2.0 * 0.2 * 0.2 / 1.0;
        let g = split / (2.0 * 3f64.sqrt());
        let spec = SystemSpec::new(
            vec![
                ModeSpec::qubit(&[7.0]).expect("valid"),
                ModeSpec::qubit(&[PERFECT_TARGET_GHZ]).expect("valid"),
                ModeSpec::resonator(6.0, GATE_CUTOFF).expect("valid"),
            ],
            vec![CouplingSpec::new(0, 2, vec![0.2]), CouplingSpec::new(1, 2, vec![g])],
        )
        .expect("valid system");
        Self { spec, controls: vec![0], target: 1, resonator: 2, control_state: vec![0], duration: DurationMode::Nominal }
    }

    /// Three three-level charge qubits on one resonator: ν_r = 6.0 GHz;
    /// controls 5.0/6.3 GHz with g = 0.2; target 6.068/7.3 GHz with
    /// g = 0.035 GHz. The target is resonant when both controls are in `|0⟩`.
    pub fn charge_ccphase() -> Self {
        let spec = SystemSpec::new(
            vec![
                ModeSpec::qubit(&[5.0, 6.3]).expect("valid"),
                ModeSpec::qubit(&[5.0, 6.3]).expect("valid"),
                ModeSpec::qubit(&[6.068, 7.3]).expect("valid"),
                ModeSpec::resonator(6.0, GATE_CUTOFF).expect("valid"),
            ],
            vec![
                CouplingSpec::new(0, 3, vec![0.2, 0.2]),
                CouplingSpec::new(1, 3, vec![0.2, 0.2]),
                CouplingSpec::new(2, 3, vec![0.035, 0.035]),
            ],
        )
        .expect("valid system");
        Self {
            spec,
            controls: vec![0, 1],
            target: 2,
            resonator: 3,
            control_state: vec![0, 0],
            duration: DurationMode::Nominal,
        }
    }

    pub fn with_duration(mut self, duration: DurationMode) -> Self {
        self.duration = duration;
        self
    }

    /// Target `0 ↔ 1` coupling to the gate resonator.
    pub fn target_g01(&self) -> Result<f64> {
        self.spec
            .coupling(self.target, self.resonator)
            .and_then(|c| c.g_per_transition.first().copied())
            .filter(|g| *g > 0.0)
            .ok_or_else(|| Error::Protocol("target qubit is not coupled to the gate resonator".into()))
    }

    pub fn nominal_duration(&self) -> Result<f64> {
        Ok(1.0 / (2.0 * self.target_g01()?))
    }

    /// The oscillation that should be resonant: target excited, controls in
    /// the selected state, resonator empty ↔ target relaxed, one photon.
    pub fn wanted_oscillation(&self) -> Oscillation {
        let n = self.spec.modes.len();
        let mut a = vec![0; n];
        for (&c, &s) in self.controls.iter().zip(&self.control_state) {
            a[c] = s as usize;
        }
        let mut b = a.clone();
        a[self.target] = 1;
        b[self.resonator] = 1;
        Oscillation::new(a, b)
    }
}

/// Two-level target frequency on the control-|0⟩ resonance of
/// [`ControlledPhaseParams::perfect_cphase`], located with [`find_resonance`].
pub const PERFECT_TARGET_GHZ: f64 = 5.958_5;

fn controlled_phase(kind: GateKind, params: &ControlledPhaseParams) -> Result<GateProtocol> {
    params.spec.validate()?;
    if params.controls.len() != params.control_state.len() {
        return input("one control state bit per control qubit is required");
    }
    if params.control_state.iter().any(|&b| b > 1) {
        return input("control state bits must be 0 or 1");
    }
    let mut qubits = params.controls.clone();
    qubits.push(params.target);
    let mut sorted = qubits.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != qubits.len() {
        return input("control and target qubits must be distinct");
    }
    if params.spec.modes.get(params.resonator).is_none_or(ModeSpec::is_qubit) {
        return input(format!("mode {} is not a resonator", params.resonator));
    }
    let n = qubits.len();
    let ideal = Ideal::Phase { controls: (0..n - 1).collect(), target: n - 1, control_state: params.control_state.clone() };
    let mut protocol = GateProtocol {
        kind,
        stages: vec![Stage { duration_ns: 1.0, spec: params.spec.clone() }],
        qubits,
        ideal,
    };
    protocol.validate()?;

    let duration = match params.duration {
        DurationMode::Nominal => params.nominal_duration()?,
        DurationMode::Fixed(t) => t,
        DurationMode::Peak => {
            let osc = params.wanted_oscillation();
            let dims = params.spec.dims();
            let spectrum = Spectrum::new(&build_hamiltonian(&params.spec)?)?;
            let (dt, t_max) = default_window(params.target_g01()?)?;
            let m = spectrum.maev(&StateVector::basis(&osc.initial, &dims)?, &StateVector::basis(&osc.target, &dims)?, t_max, dt)?;
            2.0 * m.t_at_max
        }
        DurationMode::Optimize => {
            let nominal = params.nominal_duration()?;
            optimize_duration(&protocol, 0.9 * nominal, 1.1 * nominal)?
        }
    };
    protocol.stages[0].duration_ns = duration;
    protocol.validate()?;
    Ok(protocol)
}

/// Two-qubit controlled-phase gate (one control).
pub fn build_cphase_protocol(params: &ControlledPhaseParams) -> Result<GateProtocol> {
    if params.controls.len() != 1 {
        return input(format!("c-phase takes one control qubit, got {}", params.controls.len()));
    }
    controlled_phase(GateKind::CPhase, params)
}

/// Three-qubit doubly-controlled phase gate (two controls).
pub fn build_ccphase_protocol(params: &ControlledPhaseParams) -> Result<GateProtocol> {
    if params.controls.len() != 2 {
        return input(format!("cc-phase takes two control qubits, got {}", params.controls.len()));
    }
    controlled_phase(GateKind::CCPhase, params)
}

/// Scans the single-stage duration on `[lo, hi]` at 0.01 ns and refines the
/// best point by golden section.
fn optimize_duration(protocol: &GateProtocol, lo: f64, hi: f64) -> Result<f64> {
    let stage = &protocol.stages[0];
    let spectrum = Spectrum::new(&build_hamiltonian(&stage.spec)?)?;
    let psi0 = protocol.reference_input()?;
    let eval = |t: f64| -> Result<f64> {
        let p = protocol.with_single_duration(t);
        let lab = spectrum.evolve_state(&psi0, t)?;
        Ok(phase_corrected(&p, &p.to_rotating_frame(&lab)?)?.0)
    };
    let step = 0.01;
    let n = ((hi - lo) / step).ceil() as usize;
    let mut best = (lo, f64::NEG_INFINITY);
    for k in 0..=n {
        let t = (lo + k as f64 * step).min(hi);
        let f = eval(t)?;
        if f > best.1 {
            best = (t, f);
        }
    }
    let (t, f) = golden_section_max(eval, (best.0 - step).max(lo), (best.0 + step).min(hi), 1e-4)?;
    Ok(if f > best.1 { t } else { best.0 })
}

/// Device and roles for the two-stage controlled-swap.
///
/// Stage 1 tunes qubit `swap.0` onto resonator `resonators.0` and `swap.1`
/// onto `resonators.1`, each at the resonance they see with the control in
/// `|1⟩`, for `2π g t = 1.5π`. Stage 2 exchanges the roles for
/// `2π g t = 0.5π`. Excitations thereby travel `swap.0 → R_a → swap.1` and
/// `swap.1 → R_b → swap.0` only when the control is excited.
#[derive(Clone, Debug, PartialEq)]
pub struct FredkinParams {
    pub stage1: SystemSpec,
    pub stage2: SystemSpec,
    pub control: usize,
    pub swap: (usize, usize),
    pub resonators: (usize, usize),
}

/// Shared `0 ↔ 1` coupling of the swap qubits in the default Fredkin device
/// (GHz). The control-state splittings are δ_a ≈ 0.155 GHz on `R_a` and
/// δ_b ≈ 0.070 GHz on `R_b`, so `δ_a/g ≈ √60` and `δ_b/g ≈ 2√3`: detuned
/// exchanges on either resonator complete whole cycles in both the
/// `0.75/g` and the `0.25/g` stage.
pub const FREDKIN_G_GHZ: f64 = 0.02;

/// Control-qubit coupling to `R_b` (GHz), tuned to set `δ_a/δ_b ≈ √5`.
pub const FREDKIN_CONTROL_G_B_GHZ: f64 = 0.21;

/// Control-|1⟩ resonances of the default Fredkin device (GHz), located with
/// [`find_resonance`]: the swap qubits' `0 ↔ 1` frequency on `R_a` and on
/// `R_b`.
pub const FREDKIN_RES_A_GHZ: f64 = 5.881_02;
pub const FREDKIN_RES_B_GHZ: f64 = 4.022_04;

impl FredkinParams {
    /// Control qubit (5.0/6.3 GHz) coupled with g = 0.2 GHz to `R_a` at
    /// 6.0 GHz and with [`FREDKIN_CONTROL_G_B_GHZ`] to `R_b` at 4.0 GHz; swap
    /// qubits with 1.3 GHz anharmonicity and couplings [`FREDKIN_G_GHZ`].
    /// Modes: `[q1, q2, q3, R_a, R_b]`.
    pub fn default_device() -> Self {
        Self::device(FREDKIN_RES_A_GHZ, FREDKIN_RES_B_GHZ, FREDKIN_G_GHZ, GATE_CUTOFF)
    }

    /// The default layout with explicit swap-qubit resonances and coupling.
    pub fn device(res_a: f64, res_b: f64, g: f64, cutoff: usize) -> Self {
        let qubit = |f: f64| ModeSpec::qubit(&[f, f + 1.3]).expect("valid");
        let modes = |f2: f64, f3: f64| {
            vec![
                ModeSpec::qubit(&[5.0, 6.3]).expect("valid"),
                qubit(f2),
                qubit(f3),
                ModeSpec::resonator(6.0, cutoff).expect("valid"),
                ModeSpec::resonator(4.0, cutoff).expect("valid"),
            ]
        };
        let control = vec![
            CouplingSpec::new(0, 3, vec![0.2, 0.2]),
            CouplingSpec::new(0, 4, vec![FREDKIN_CONTROL_G_B_GHZ, FREDKIN_CONTROL_G_B_GHZ]),
        ];
        let stage = |f2, f3, q_on_a: usize, q_on_b: usize| {
            let mut c = control.clone();
            c.push(CouplingSpec::new(q_on_a, 3, vec![g, g]));
            c.push(CouplingSpec::new(q_on_b, 4, vec![g, g]));
            SystemSpec::new(modes(f2, f3), c).expect("valid system")
        };
        Self {
            stage1: stage(res_a, res_b, 1, 2),
            stage2: stage(res_b, res_a, 2, 1),
            control: 0,
            swap: (1, 2),
            resonators: (3, 4),
        }
    }

    fn g01(spec: &SystemSpec, qubit: usize, resonator: usize, stage: usize) -> Result<f64> {
        spec.coupling(qubit, resonator)
            .and_then(|c| c.g_per_transition.first().copied())
            .filter(|g| *g > 0.0)
            .ok_or_else(|| {
                Error::Protocol(format!("stage {stage}: qubit {qubit} has no coupling to resonator {resonator}"))
            })
    }

    /// Stage durations from `2π g t = 1.5π` and `2π g t = 0.5π`.
    pub fn stage_durations(&self) -> Result<(f64, f64)> {
        let (q2, q3) = self.swap;
        let (ra, rb) = self.resonators;
        let shared = |x: f64, y: f64, stage: usize| -> Result<f64> {
            if (x - y).abs() > FREDKIN_COUPLING_TOL * x.max(y) {
                return Err(Error::Protocol(format!(
                    "stage {stage} needs equal couplings for a common duration, got {x} and {y} GHz"
                )));
            }
            Ok(0.5 * (x + y))
        };
        let g1 = shared(Self::g01(&self.stage1, q2, ra, 1)?, Self::g01(&self.stage1, q3, rb, 1)?, 1)?;
        let g2 = shared(Self::g01(&self.stage2, q3, ra, 2)?, Self::g01(&self.stage2, q2, rb, 2)?, 2)?;
        Ok((0.75 / g1, 0.25 / g2))
    }
}

pub fn build_fredkin_protocol(params: &FredkinParams) -> Result<GateProtocol> {
    let (t1, t2) = params.stage_durations()?;
    let (q2, q3) = params.swap;
    let protocol = GateProtocol {
        kind: GateKind::Fredkin,
        stages: vec![
            Stage { duration_ns: t1, spec: params.stage1.clone() },
            Stage { duration_ns: t2, spec: params.stage2.clone() },
        ],
        qubits: vec![params.control, q2, q3],
        ideal: Ideal::Fredkin { control: 0, swap: (1, 2) },
    };
    protocol.validate()?;
    Ok(protocol)
}

/// Applies every stage's propagator in order to `psi0` (lab frame).
pub fn run_protocol(protocol: &GateProtocol, psi0: &StateVector) -> Result<StateVector> {
    protocol.validate()?;
    let mut psi = psi0.clone();
    for stage in &protocol.stages {
        psi = Spectrum::new(&build_hamiltonian(&stage.spec)?)?.evolve_state(&psi, stage.duration_ns)?;
    }
    Ok(psi)
}

/// Full lab-frame propagator of the protocol.
pub fn protocol_propagator(protocol: &GateProtocol) -> Result<Operator> {
    protocol.validate()?;
    let mut u = Operator::identity(&protocol.dims());
    for stage in &protocol.stages {
        let step = Spectrum::new(&build_hamiltonian(&stage.spec)?)?.propagator(stage.duration_ns);
        u = step.matmul(&u)?;
    }
    Ok(u)
}

/// Pure-state fidelity `|⟨ideal|final⟩|²`; insensitive to global phase.
pub fn gate_fidelity(final_state: &StateVector, ideal: &StateVector) -> Result<f64> {
    Ok(ideal.inner(final_state)?.norm_sqr())
}

/// Best single-qubit Z phases for matching a rotating-frame state to the
/// ideal output: maximizes `|Σ_x conj(ideal_x) e^{iφ·x} ψ_x|²` over the
/// computational amplitudes `x` by coordinate ascent from a grid of starts.
fn phase_corrected(protocol: &GateProtocol, rotating: &StateVector) -> Result<(f64, Vec<f64>)> {
    let ideal = protocol.ideal_reference_output()?;
    let dims = protocol.dims();
    let inputs = protocol.computational_inputs();
    let mut terms = Vec::with_capacity(inputs.len());
    for bits in &inputs {
        let idx = basis_index(&protocol.label(bits), &dims)?;
        terms.push((bits.clone(), ideal.amplitudes()[idx].conj() * rotating.amplitudes()[idx]));
    }
    Ok(optimal_local_phases(&terms, protocol.qubits.len()))
}

pub(crate) fn optimal_local_phases(terms: &[(Vec<u8>, C64)], n: usize) -> (f64, Vec<f64>) {
    let value = |phi: &[f64]| -> C64 {
        terms
            .iter()
            .map(|(bits, c)| {
                let angle: f64 = bits.iter().zip(phi).map(|(&b, p)| b as f64 * p).sum();
                c * C64::from_polar(1.0, angle)
            })
            .sum()
    };
    let mut best = (value(&vec![0.0; n]).norm_sqr(), vec![0.0; n]);
    let starts = 4usize.pow(n as u32);
    for s in 0..starts {
        let mut phi: Vec<f64> = (0..n).map(|i| ((s / 4usize.pow(i as u32)) % 4) as f64 * PI / 2.0).collect();
        let mut last = f64::NEG_INFINITY;
        for _ in 0..200 {
            for j in 0..n {
                // split the sum into terms with and without bit j set
                let (mut with, mut without) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
                for (bits, c) in terms {
                    let angle: f64 =
                        bits.iter().zip(&phi).enumerate().filter(|(k, _)| *k != j).map(|(_, (&b, p))| b as f64 * p).sum();
                    let z = c * C64::from_polar(1.0, angle);
                    if bits[j] == 1 {
                        with += z;
                    } else {
                        without += z;
                    }
                }
                if with.norm() > 0.0 {
                    phi[j] = (without.arg() - with.arg()).rem_euclid(TAU);
                }
            }
            let v = value(&phi).norm_sqr();
            if v - last < 1e-15 {
                break;
            }
            last = v;
        }
        let v = value(&phi).norm_sqr();
        if v > best.0 + 1e-15 {
            best = (v, phi);
        }
    }
    best
}

/// One computational input's image.
#[derive(Clone, Debug, PartialEq)]
pub struct InputOverlap {
    pub input: Vec<u8>,
    /// Ideal output bits.
    pub output: Vec<u8>,
    /// `⟨ideal(input)|Ũ|input⟩`, ideal sign included, with `Ũ` the
    /// rotating-frame, Z-corrected evolution and the global phase fixed by the
    /// all-zeros input.
    pub overlap: C64,
}

impl InputOverlap {
    pub fn probability(&self) -> f64 {
        self.overlap.norm_sqr()
    }

    pub fn input_label(&self) -> String {
        self.input.iter().map(|b| b.to_string()).collect()
    }
}

/// Gate protocol outcome.
///
/// For the phase gates `total_fidelity` is `|⟨ideal|ψ⟩|²` between the ideal
/// output and the final state for the equal-superposition input, in the frame
/// rotating with the uncoupled Hamiltonian and after the best single-qubit Z
/// phases (`local_phases`). For the Fredkin gate, whose per-branch phases are
/// not prescribed, it is the mean truth-table probability over the
/// computational inputs and no Z correction is applied.
#[derive(Clone, Debug, PartialEq)]
pub struct FidelityReport {
    pub kind: GateKind,
    pub duration_ns: f64,
    pub stage_durations_ns: Vec<f64>,
    pub total_fidelity: f64,
    /// Rotating-frame superposition fidelity without Z corrections.
    pub uncorrected_fidelity: f64,
    pub local_phases: Vec<f64>,
    /// Population left outside the computational ⊗ vacuum subspace for the
    /// superposition input.
    pub leakage: f64,
    pub per_input: Vec<InputOverlap>,
}

impl FidelityReport {
    pub fn summary_line(&self) -> String {
        format!("{} {:.6} {:.4} {:.6}", self.kind.name(), self.total_fidelity, self.duration_ns, self.leakage)
    }

    /// `key: value` lines.
    pub fn to_text(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:.9}")).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let _ = writeln!(s, "kind: {}", self.kind.name());
        let _ = writeln!(s, "duration_ns: {:.9}", self.duration_ns);
        let _ = writeln!(s, "stage_durations_ns: {}", list(&self.stage_durations_ns));
        let _ = writeln!(s, "total_fidelity: {:.9}", self.total_fidelity);
        let _ = writeln!(s, "uncorrected_fidelity: {:.9}", self.uncorrected_fidelity);
        let _ = writeln!(s, "local_phases_rad: {}", list(&self.local_phases));
        let _ = writeln!(s, "leakage: {:.9}", self.leakage);
        for o in &self.per_input {
            let out: String = o.output.iter().map(|b| b.to_string()).collect();
            let _ = writeln!(
                s,
                "overlap[{}->{}]: {:.9},{:.9} probability={:.9}",
                o.input_label(),
                out,
                o.overlap.re,
                o.overlap.im,
                o.probability()
            );
        }
        s
    }

    /// `input,overlap_re,overlap_im,probability` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("input,overlap_re,overlap_im,probability\n");
        for o in &self.per_input {
            let _ = writeln!(s, "{},{:.9},{:.9},{:.9}", o.input_label(), o.overlap.re, o.overlap.im, o.probability());
        }
        s
    }
}

/// Runs the protocol on every computational input and on their equal
/// superposition and scores the result.
pub fn fidelity_report(protocol: &GateProtocol) -> Result<FidelityReport> {
    let u = protocol_propagator(protocol)?;
    let dims = protocol.dims();
    let frame = protocol.frame_angles();
    let inputs = protocol.computational_inputs();

    let psi0 = protocol.reference_input()?;
    let lab = StateVector::from_normalized(dims.clone(), u.apply(&psi0)?);
    let rotating = protocol.to_rotating_frame(&lab)?;
    let ideal = protocol.ideal_reference_output()?;
    let uncorrected = gate_fidelity(&rotating, &ideal)?;

    let comp_indices = inputs.iter().map(|b| basis_index(&protocol.label(b), &dims)).collect::<Result<Vec<_>>>()?;
    let leakage = (1.0 - comp_indices.iter().map(|&i| rotating.amplitudes()[i].norm_sqr()).sum::<f64>()).clamp(0.0, 1.0);

    let (corrected, phases) = match protocol.kind {
        GateKind::Fredkin => (None, vec![0.0; protocol.qubits.len()]),
        _ => {
            let (f, p) = phase_corrected(protocol, &rotating)?;
            (Some(f), p)
        }
    };

    // per-input images in the corrected rotating frame
    let raw: Vec<(Vec<u8>, Vec<u8>, C64)> = inputs
        .par_iter()
        .zip(comp_indices.par_iter())
        .map(|(bits, &col)| {
            let (out, sign) = protocol.ideal_output(bits);
            let row = basis_index(&protocol.label(&out), &dims)?;
            let z: f64 = out.iter().zip(&phases).map(|(&b, p)| b as f64 * p).sum();
            let amp = u.matrix()[(row, col)] * C64::from_polar(1.0, frame[row] + z) * sign;
            Ok((bits.clone(), out, amp))
        })
        .collect::<Result<_>>()?;
    let reference = raw[0].2;
    let global = if reference.norm() > 0.0 { reference.conj() / reference.norm() } else { C64::new(1.0, 0.0) };
    let per_input: Vec<InputOverlap> =
        raw.into_iter().map(|(input, output, amp)| InputOverlap { input, output, overlap: amp * global }).collect();

    let total_fidelity = match corrected {
        Some(f) => f,
        None => per_input.iter().map(InputOverlap::probability).sum::<f64>() / per_input.len() as f64,
    };
    if !total_fidelity.is_finite() {
        return Err(Error::Numerical("fidelity is not finite".into()));
    }

    Ok(FidelityReport {
        kind: protocol.kind,
        duration_ns: protocol.duration_ns(),
        stage_durations_ns: protocol.stages.iter().map(|s| s.duration_ns).collect(),
        total_fidelity: total_fidelity.clamp(0.0, 1.0),
        uncorrected_fidelity: uncorrected,
        local_phases: phases,
        leakage,
        per_input,
    })
}

/// Phase-corrected rotating-frame amplitudes of the superposition output,
/// one per computational input, for inspecting sign structure.
pub fn corrected_amplitudes(protocol: &GateProtocol) -> Result<Vec<(Vec<u8>, C64)>> {
    let lab = run_protocol(protocol, &protocol.reference_input()?)?;
    let rotating = protocol.to_rotating_frame(&lab)?;
    let (_, phases) = phase_corrected(protocol, &rotating)?;
    let dims = protocol.dims();
    protocol
        .computational_inputs()
        .into_iter()
        .map(|bits| {
            let idx = basis_index(&protocol.label(&bits), &dims)?;
            let z: f64 = bits.iter().zip(&phases).map(|(&b, p)| b as f64 * p).sum();
            Ok((bits, rotating.amplitudes()[idx] * C64::from_polar(1.0, z)))
        })
        .collect()
}

/// Frequency scan `lo..=hi` in steps of `step` (GHz).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scan {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Scan {
    pub fn new(lo: f64, hi: f64, step: f64) -> Self {
        Self { lo, hi, step }
    }

    fn points(&self) -> Result<Vec<f64>> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo > 0.0 && self.lo <= self.hi) {
            return input(format!("empty or invalid scan [{}, {}]", self.lo, self.hi));
        }
        if !(self.step > 0.0) {
            return input(format!("scan step must be positive, got {}", self.step));
        }
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize;
        Ok((0..=n).map(|k| self.lo + k as f64 * self.step).collect())
    }
}

/// The `0 ↔ 1` frequency of `target_qubit` that maximizes the maximal
/// expectation value of `osc`: grid scan, then golden-section refinement to
/// 0.1 MHz around the best grid point. The time window is 1.25 resonant swap
/// periods of the qubit's strongest `0 ↔ 1` coupling.
pub fn find_resonance(spec: &SystemSpec, target_qubit: usize, scan: Scan, osc: &Oscillation) -> Result<f64> {
    let points = scan.points()?;
    let g = spec
        .g01(target_qubit)
        .filter(|g| *g > 0.0)
        .ok_or_else(|| Error::Input(format!("qubit {target_qubit} has no nonzero coupling")))?;
    let (dt, t_max) = default_window(g)?;
    let dims = spec.dims();
    let a = StateVector::basis(&osc.initial, &dims)?;
    let b = StateVector::basis(&osc.target, &dims)?;
    let eval = |f: f64| -> Result<f64> {
        let s = spec.with_qubit_frequency(target_qubit, f)?;
        Spectrum::new(&build_hamiltonian(&s)?)?.maev(&a, &b, t_max, dt).map(|m| m.max_prob)
    };
    let values = points.par_iter().map(|&f| eval(f)).collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = k;
        }
    }
    let lo = (points[best] - scan.step).max(scan.lo);
    let hi = (points[best] + scan.step).min(scan.hi);
    if hi <= lo {
        return Ok(points[best]);
    }
    let (f, v) = golden_section_max(eval, lo, hi, RESONANCE_TOL_GHZ)?;
    Ok(if v > values[best] { f } else { points[best] })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nominal_cphase_duration() {
        let p = build_cphase_protocol(&ControlledPhaseParams::charge_cphase()).unwrap();
        assert_eq!(p.stages.len(), 1);
        assert!((p.duration_ns() - 1.0 / (2.0 * 0.0488)).abs() < 1e-12);
        assert_eq!(p.kind, GateKind::CPhase);
        assert_eq!(p.dims(), vec![3, 3, 4]);
    }

    #[test]
    fn perfect_variant_uses_two_level_modes() {
        let p = build_cphase_protocol(&ControlledPhaseParams::perfect_cphase()).unwrap();
        assert_eq!(p.dims(), vec![2, 2, 4]);
    }

    #[test]
    fn ccphase_dimension_and_duration() {
        let p = build_ccphase_protocol(&ControlledPhaseParams::charge_ccphase()).unwrap();
        assert_eq!(p.spec().total_dim(), 27 * 4);
        assert!((p.duration_ns() - 1.0 / 0.07).abs() < 1e-12);
    }

    #[test]
    fn builders_check_control_count() {
        assert!(build_ccphase_protocol(&ControlledPhaseParams::charge_cphase()).is_err());
        assert!(build_cphase_protocol(&ControlledPhaseParams::charge_ccphase()).is_err());
        let mut p = ControlledPhaseParams::charge_cphase();
        p.spec = p.spec.with_coupling(1, 2, 0.0).unwrap();
        assert!(matches!(build_cphase_protocol(&p), Err(Error::Protocol(_))));
    }

    #[test]
    fn ideal_truth_tables() {
        let cp = build_cphase_protocol(&ControlledPhaseParams::charge_cphase()).unwrap();
        let signs: Vec<f64> = cp.computational_inputs().iter().map(|b| cp.ideal_output(b).1).collect();
        assert_eq!(signs, vec![1.0, -1.0, 1.0, 1.0]);
        let mut flipped = ControlledPhaseParams::charge_cphase();
        flipped.control_state = vec![1];
        let cp = build_cphase_protocol(&flipped).unwrap();
        let signs: Vec<f64> = cp.computational_inputs().iter().map(|b| cp.ideal_output(b).1).collect();
        assert_eq!(signs, vec![1.0, 1.0, 1.0, -1.0]);

        let ccp = build_ccphase_protocol(&ControlledPhaseParams::charge_ccphase()).unwrap();
        let flips: Vec<Vec<u8>> =
            ccp.computational_inputs().into_iter().filter(|b| ccp.ideal_output(b).1 < 0.0).collect();
        assert_eq!(flips, vec![vec![0, 0, 1]]);

        let fr = build_fredkin_protocol(&FredkinParams::default_device()).unwrap();
        assert_eq!(fr.ideal_output(&[1, 0, 1]).0, vec![1, 1, 0]);
        assert_eq!(fr.ideal_output(&[0, 0, 1]).0, vec![0, 0, 1]);
    }

    #[test]
    fn fredkin_stage_durations() {
        let p = FredkinParams::device(5.9, 4.1, 0.05, 1);
        let (t1, t2) = p.stage_durations().unwrap();
        assert!((t1 - 15.0).abs() < 1e-12 && (t2 - 5.0).abs() < 1e-12);
    }

    #[test]
    fn fredkin_rejects_mismatched_couplings() {
        let mut p = FredkinParams::device(5.9, 4.1, 0.05, 1);
        p.stage1 = p.stage1.with_coupling(2, 4, 0.06).unwrap();
        assert!(matches!(build_fredkin_protocol(&p), Err(Error::Protocol(_))));
        let mut p = FredkinParams::device(5.9, 4.1, 0.05, 1);
        p.stage2.couplings.retain(|c| c.qubit_index != 1);
        assert!(matches!(build_fredkin_protocol(&p), Err(Error::Protocol(_))));
    }

    #[test]
    fn gate_fidelity_basics() {
        let dims = [2, 2];
        let a = StateVector::basis(&BasisLabel::new([0, 1]), &dims).unwrap();
        let b = StateVector::basis(&BasisLabel::new([1, 1]), &dims).unwrap();
        assert!((gate_fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(gate_fidelity(&a, &b).unwrap(), 0.0);
        let rotated = StateVector::new(dims.to_vec(), a.amplitudes() * C64::from_polar(1.0, 0.83)).unwrap();
        assert!((gate_fidelity(&rotated, &a).unwrap() - 1.0).abs() < 1e-15);
        assert!(gate_fidelity(&a, &StateVector::basis(&BasisLabel::new([1]), &[2]).unwrap()).is_err());
    }

    #[test]
    fn zero_coupling_leaves_phases_only() {
        let mut params = ControlledPhaseParams::charge_cphase().with_duration(DurationMode::Fixed(7.3));
        params.spec = params.spec.with_coupling(0, 2, 0.0).unwrap();
        let mut p = build_cphase_protocol(&params).unwrap();
        p.stages[0].spec = p.spec().with_coupling(1, 2, 0.0).unwrap();
        let psi0 = p.reference_input().unwrap();
        let out = run_protocol(&p, &psi0).unwrap();
        for (a, b) in out.amplitudes().iter().zip(psi0.amplitudes().iter()) {
            assert!((a.norm() - b.norm()).abs() < 1e-12);
        }
        let rotating = p.to_rotating_frame(&out).unwrap();
        assert!((gate_fidelity(&rotating, &psi0).unwrap() - 1.0).abs() < 1e-12);
        let report = fidelity_report(&p).unwrap();
        assert!(report.leakage < 1e-12);
        // identity evolution scores 1/4·|1+1+1-1|²/4 against a c-phase target
        assert!((report.uncorrected_fidelity - 0.25).abs() < 1e-12);
    }

    #[test]
    fn local_phase_optimizer_recovers_z_rotations() {
        let phi = [0.7, -1.9];
        let terms: Vec<(Vec<u8>, C64)> = [[0u8, 0], [0, 1], [1, 0], [1, 1]]
            .iter()
            .map(|b| {
                let angle = -(b[0] as f64 * phi[0] + b[1] as f64 * phi[1]);
                (b.to_vec(), C64::from_polar(0.25, angle))
            })
            .collect();
        let (f, found) = optimal_local_phases(&terms, 2);
        assert!((f - 1.0).abs() < 1e-12);
        for (a, b) in found.iter().zip(phi) {
            assert!(((a - b).rem_euclid(TAU) + 1e-9) % TAU < 1e-6);
        }
    }

    #[test]
    fn scan_validation() {
        let spec = ControlledPhaseParams::charge_cphase().spec;
        let osc = Oscillation::new([0, 1, 0], [0, 0, 1]);
        assert!(find_resonance(&spec, 1, Scan::new(6.1, 6.0, 0.01), &osc).is_err());
        assert!(find_resonance(&spec, 1, Scan::new(6.0, 6.1, 0.0), &osc).is_err());
    }
}
