//! Exact closed-system evolution.
//!
//! Every Hamiltonian here is time independent, so a single Hermitian
//! eigendecomposition `H = V diag(E) V†` serves all times:
//! `U(t) = V diag(e^{−iEt}) V†`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{input, Error, Result};
use crate::hilbert::{Operator, StateVector};
use crate::search::golden_section_max;
use crate::C64;

/// Default sampling step for maximal-expectation-value scans (ns).
pub const DEFAULT_DT_NS: f64 = 0.01;
/// Default scan window as a multiple of the resonant swap period `1/(2g)`.
pub const DEFAULT_WINDOW_FACTOR: f64 = 1.25;
/// Golden-section tolerance for peak refinement (ns).
pub const REFINE_TOL_NS: f64 = 1e-4;

const HERMITIAN_TOL: f64 = 1e-12;

/// Eigendecomposition of a Hermitian operator, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Spectrum {
    dims: Vec<usize>,
    energies: Vec<f64>,
    vectors: DMatrix<C64>,
}

impl Spectrum {
    pub fn new(h: &Operator) -> Result<Self> {
        let err = h.hermiticity_error();
        if !(err < HERMITIAN_TOL * h.max_abs().max(1.0)) {
            return input(format!("operator is not Hermitian (max |H - H†| = {err:e})"));
        }
        let eig = SymmetricEigen::new(h.matrix().clone());
        let mut order: Vec<usize> = (0..h.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let energies: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::Numerical("eigendecomposition produced non-finite energies".into()));
        }
        let vectors = DMatrix::from_fn(h.dim(), h.dim(), |i, j| eig.eigenvectors[(i, order[j])]);
        Ok(Self { dims: h.dims().to_vec(), energies, vectors })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Eigenvalues in rad/ns, ascending.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Eigenvectors as columns, ordered like [`Spectrum::energies`].
    pub fn eigenvectors(&self) -> &DMatrix<C64> {
        &self.vectors
    }

    fn phases(&self, t: f64) -> impl Iterator<Item = C64> + '_ {
        self.energies.iter().map(move |e| C64::from_polar(1.0, -e * t))
    }

    /// `U(t) = exp(−iHt)`.
    pub fn propagator(&self, t: f64) -> Operator {
        let mut scaled = self.vectors.clone();
        for (mut col, ph) in scaled.column_iter_mut().zip(self.phases(t)) {
            col *= ph;
        }
        Operator::new(self.dims.clone(), scaled * self.vectors.adjoint()).expect("dims unchanged")
    }

    fn check(&self, psi: &StateVector) -> Result<()> {
        if psi.dims() != self.dims {
            return input(format!("state dims {:?} do not match Hamiltonian dims {:?}", psi.dims(), self.dims));
        }
        Ok(())
    }

    /// Coordinates of `psi` in the eigenbasis.
    fn project(&self, psi: &StateVector) -> Result<DVector<C64>> {
        self.check(psi)?;
        Ok(self.vectors.ad_mul(psi.amplitudes()))
    }

    fn reassemble(&self, coeffs: &DVector<C64>, t: f64) -> DVector<C64> {
        let evolved = DVector::from_iterator(coeffs.len(), coeffs.iter().zip(self.phases(t)).map(|(c, p)| c * p));
        &self.vectors * evolved
    }

    /// `exp(−iHt)|ψ⟩`.
    pub fn evolve_state(&self, psi: &StateVector, t: f64) -> Result<StateVector> {
        let coeffs = self.project(psi)?;
        Ok(StateVector::from_normalized(self.dims.clone(), self.reassemble(&coeffs, t)))
    }

    /// Precomputes `⟨target|exp(−iHt)|ψ₀⟩` as a sum over eigenmodes so each
    /// time costs O(D).
    pub fn overlap(&self, psi0: &StateVector, target: &StateVector) -> Result<OverlapSeries> {
        let c0 = self.project(psi0)?;
        let ct = self.project(target)?;
        let weights = ct.iter().zip(c0.iter()).map(|(a, b)| a.conj() * b).collect();
        Ok(OverlapSeries { energies: self.energies.clone(), weights })
    }

    pub fn evolve(&self, psi0: &StateVector, times: &[f64], targets: &[StateVector]) -> Result<Trajectory> {
        if times.is_empty() {
            return input("no sample times given");
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] < w[0]) {
            return input("sample times must be finite and sorted ascending");
        }
        let coeffs = self.project(psi0)?;
        let target_coeffs = targets.iter().map(|t| self.project(t)).collect::<Result<Vec<_>>>()?;
        let mut probabilities = Vec::with_capacity(times.len());
        let mut max_norm_error = 0.0f64;
        for &t in times {
            let evolved: DVector<C64> =
                DVector::from_iterator(coeffs.len(), coeffs.iter().zip(self.phases(t)).map(|(c, p)| c * p));
            max_norm_error = max_norm_error.max((evolved.norm() - 1.0).abs());
            probabilities.push(target_coeffs.iter().map(|tc| tc.dotc(&evolved).norm_sqr().min(1.0)).collect());
        }
        let t_end = *times.last().expect("nonempty");
        let final_state = StateVector::from_normalized(self.dims.clone(), self.reassemble(&coeffs, t_end));
        max_norm_error = max_norm_error.max((final_state.norm() - 1.0).abs());
        Ok(Trajectory { times: times.to_vec(), probabilities, final_state, max_norm_error })
    }

    pub fn maev(&self, psi0: &StateVector, target: &StateVector, t_max: f64, dt: f64) -> Result<Maev> {
        self.overlap(psi0, target)?.maev(t_max, dt)
    }
}

/// `t ↦ ⟨target|exp(−iHt)|ψ₀⟩` for a fixed pair of states.
#[derive(Clone, Debug)]
pub struct OverlapSeries {
    energies: Vec<f64>,
    weights: Vec<C64>,
}

impl OverlapSeries {
    pub fn amplitude(&self, t: f64) -> C64 {
        self.energies.iter().zip(&self.weights).map(|(e, w)| w * C64::from_polar(1.0, -e * t)).sum()
    }

    pub fn probability(&self, t: f64) -> f64 {
        self.amplitude(t).norm_sqr().min(1.0)
    }

    /// Maximum of the transition probability over `{dt, 2dt, …, t_max}`,
    /// refined by golden-section search within `±dt` of the grid argmax.
    /// The earliest grid point wins ties.
    pub fn maev(&self, t_max: f64, dt: f64) -> Result<Maev> {
        if !(dt > 0.0 && dt.is_finite()) {
            return input(format!("time step must be positive, got {dt}"));
        }
        if !(t_max >= dt && t_max.is_finite()) {
            return input(format!("window {t_max} ns shorter than the step {dt} ns"));
        }
        let steps = (t_max / dt + 1e-9).floor() as usize;
        let mut best = Maev { max_prob: f64::NEG_INFINITY, t_at_max: dt };
        for k in 1..=steps {
            let t = k as f64 * dt;
            let p = self.probability(t);
            if p > best.max_prob {
                best = Maev { max_prob: p, t_at_max: t };
            }
        }
        let lo = (best.t_at_max - dt).max(0.0);
        let hi = (best.t_at_max + dt).min(t_max);
        let (t, p) = golden_section_max(|t| Ok::<_, Error>(self.probability(t)), lo, hi, REFINE_TOL_NS)?;
        if p > best.max_prob + 1e-14 {
            best = Maev { max_prob: p, t_at_max: t };
        }
        Ok(best)
    }

    /// Refined local maxima of the probability on `(0, t_max]`, sampled at
    /// `dt`, in time order.
    pub fn peaks(&self, t_max: f64, dt: f64) -> Result<Vec<(f64, f64)>> {
        if !(dt > 0.0) || !(t_max > 2.0 * dt) {
            return input("peak search needs dt > 0 and a window of at least two steps");
        }
        let steps = (t_max / dt).floor() as usize;
        let samples: Vec<f64> = (0..=steps).map(|k| self.probability(k as f64 * dt)).collect();
        let mut out = Vec::new();
        for k in 1..steps {
            if samples[k] > samples[k - 1] && samples[k] >= samples[k + 1] {
                let t0 = k as f64 * dt;
                out.push(golden_section_max(
                    |t| Ok::<_, Error>(self.probability(t)),
                    t0 - dt,
                    (t0 + dt).min(t_max),
                    REFINE_TOL_NS,
                )?);
            }
        }
        Ok(out)
    }

    /// Time of the first return of the probability to at least `threshold`
    /// (the peak of the first revival reaching it). Used as a period
    /// estimator for survival probabilities.
    pub fn first_return_time(&self, t_max: f64, dt: f64, threshold: f64) -> Result<Option<f64>> {
        Ok(self.peaks(t_max, dt)?.into_iter().find(|&(_, p)| p >= threshold).map(|(t, _)| t))
    }
}

/// Sampled transition probabilities from one initial state.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `probabilities[i][k] = |⟨target_k|ψ(times[i])⟩|²`.
    pub probabilities: Vec<Vec<f64>>,
    pub final_state: StateVector,
    /// Largest `|‖ψ(t)‖ − 1|` over the samples.
    pub max_norm_error: f64,
}

/// Maximal expectation value of a transition and where it occurs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Maev {
    pub max_prob: f64,
    pub t_at_max: f64,
}

/// Default `(dt, t_max)` scan window for an oscillation driven by a coupling
/// `g` (GHz): 1.25 resonant swap periods `1/(2g)`.
pub fn default_window(g_ghz: f64) -> Result<(f64, f64)> {
    if !(g_ghz > 0.0 && g_ghz.is_finite()) {
        return input(format!("default scan window needs a positive coupling, got {g_ghz}"));
    }
    Ok((DEFAULT_DT_NS, DEFAULT_WINDOW_FACTOR / (2.0 * g_ghz)))
}

pub fn propagator(h: &Operator, t: f64) -> Result<Operator> {
    Ok(Spectrum::new(h)?.propagator(t))
}

pub fn evolve(h: &Operator, psi0: &StateVector, times: &[f64], targets: &[StateVector]) -> Result<Trajectory> {
    Spectrum::new(h)?.evolve(psi0, times, targets)
}

/// `|⟨target|exp(−iHt)|ψ₀⟩|²`.
pub fn transition_probability(h: &Operator, psi0: &StateVector, target: &StateVector, t: f64) -> Result<f64> {
    Ok(Spectrum::new(h)?.overlap(psi0, target)?.probability(t))
}

pub fn maev(h: &Operator, psi0: &StateVector, target: &StateVector, t_max: f64, dt: f64) -> Result<Maev> {
    Spectrum::new(h)?.maev(psi0, target, t_max, dt)
}

/// Generalized Rabi frequency `√(Δ² + 4g²(n+1))` in GHz for detuning `Δ` and
/// coupling `g` (GHz) with `n` photons.
pub fn rabi_frequency(delta: f64, g: f64, n: i64) -> Result<f64> {
    if n < 0 {
        return input(format!("photon number must be non-negative, got {n}"));
    }
    Ok((delta * delta + 4.0 * g * g * (n as f64 + 1.0)).sqrt())
}
