//! Scenario configuration documents (JSON).
//!
//! Every key that carries a physical quantity names its unit: `freq_ghz`,
//! `g_ghz`, `t_ns`. Unknown keys are rejected.

use std::path::Path;

use serde::Deserialize;
use srqed_core::{
    BasisLabel, ControlledPhaseParams, CouplingSpec, DurationMode, FredkinParams, ModeSpec, Scan, SweepGrid,
    SystemSpec,
};
use srqed_core::dynamics::DEFAULT_DT_NS;
use srqed_core::sweep::{linspace, Oscillation};

use crate::CliError;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub system: Option<SystemConfig>,
    #[serde(default)]
    pub trajectory: Option<TrajectoryConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub gate: Option<GateConfig>,
    #[serde(default)]
    pub find_resonance: Option<FindResonanceConfig>,
    #[serde(default)]
    pub controls: Controls,
}

/// Numeric controls shared by all commands.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Controls {
    /// Sampling step for trajectories (when no explicit step is given) and
    /// MAEV scans.
    pub dt_ns: Option<f64>,
    /// Fixed MAEV window for sweeps; default is 1.25 resonant swap periods.
    pub t_max_ns: Option<f64>,
    /// Overrides every resonator's Fock cutoff.
    pub cutoff: Option<usize>,
    pub workers: Option<usize>,
    #[serde(default)]
    pub refine: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub modes: Vec<ModeConfig>,
    #[serde(default)]
    pub couplings: Vec<CouplingConfig>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModeConfig {
    /// `freq_ghz[k]` is the `k → k+1` transition frequency.
    Qubit { freq_ghz: Vec<f64> },
    Resonator { freq_ghz: f64, cutoff: usize },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub qubit: usize,
    pub resonator: usize,
    /// One coupling per qubit transition (`0↔1`, `1↔2`, ...).
    pub g_ghz: Vec<f64>,
    #[serde(default)]
    pub rwa: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesConfig {
    pub name: String,
    pub initial: Vec<usize>,
    pub target: Vec<usize>,
}

/// Either an explicit list or `start_ns..=stop_ns` at `step_ns`
/// (default `controls.dt_ns`).
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimesConfig {
    pub t_ns: Option<Vec<f64>>,
    pub start_ns: Option<f64>,
    pub stop_ns: Option<f64>,
    pub step_ns: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub series: Vec<SeriesConfig>,
    pub times: TimesConfig,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeConfig {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillationConfig {
    pub initial: Vec<usize>,
    pub target: Vec<usize>,
}

impl OscillationConfig {
    fn to_core(&self) -> Oscillation {
        Oscillation::new(self.initial.clone(), self.target.clone())
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub g_ghz: RangeConfig,
    pub freq_ghz: RangeConfig,
    pub target_qubit: usize,
    pub resonator: usize,
    pub rot0: OscillationConfig,
    pub rot1: OscillationConfig,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum DurationKind {
    #[default]
    Nominal,
    Peak,
    Optimize,
    Fixed,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseGateConfig {
    pub control_qubits: Vec<usize>,
    pub target_qubit: usize,
    pub resonator: usize,
    pub control_state: Vec<u8>,
    #[serde(default)]
    pub duration: DurationKind,
    /// Required with `"duration": "fixed"`.
    pub t_ns: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FredkinConfig {
    pub stage1: SystemConfig,
    pub stage2: SystemConfig,
    pub control_qubit: usize,
    pub swap_qubits: [usize; 2],
    pub resonators: [usize; 2],
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GateConfig {
    Cphase(PhaseGateConfig),
    Ccphase(PhaseGateConfig),
    Fredkin(FredkinConfig),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub lo_ghz: f64,
    pub hi_ghz: f64,
    pub step_ghz: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FindResonanceConfig {
    pub target_qubit: usize,
    pub scan: ScanConfig,
    pub initial: Vec<usize>,
    pub target: Vec<usize>,
}

fn config_err(section: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{section}: {e}"))
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

impl SystemConfig {
    pub fn to_spec(&self, cutoff: Option<usize>) -> Result<SystemSpec, CliError> {
        let modes = self
            .modes
            .iter()
            .enumerate()
            .map(|(i, m)| match m {
                ModeConfig::Qubit { freq_ghz } => ModeSpec::qubit(freq_ghz),
                ModeConfig::Resonator { freq_ghz, cutoff } => ModeSpec::resonator(*freq_ghz, *cutoff),
            }
            .map_err(|e| config_err(&format!("system.modes[{i}]"), e)))
            .collect::<Result<Vec<_>, _>>()?;
        let couplings = self
            .couplings
            .iter()
            .map(|c| CouplingSpec::new(c.qubit, c.resonator, c.g_ghz.clone()).with_rwa(c.rwa))
            .collect();
        let spec = SystemSpec::new(modes, couplings).map_err(|e| config_err("system", e))?;
        match cutoff {
            Some(c) => spec.with_cutoff(c).map_err(|e| config_err("controls.cutoff", e)),
            None => Ok(spec),
        }
    }
}

impl ScenarioConfig {
    pub fn system_spec(&self) -> Result<SystemSpec, CliError> {
        self.system
            .as_ref()
            .ok_or_else(|| CliError::Config("missing `system` section".into()))?
            .to_spec(self.controls.cutoff)
    }

    pub fn dt_ns(&self) -> f64 {
        self.controls.dt_ns.unwrap_or(DEFAULT_DT_NS)
    }

    /// Sample times of the trajectory section.
    pub fn times(&self) -> Result<Vec<f64>, CliError> {
        let tr = self.trajectory.as_ref().ok_or_else(|| CliError::Config("missing `trajectory` section".into()))?;
        let t = &tr.times;
        let times = match (&t.t_ns, t.stop_ns) {
            (Some(list), None) if t.start_ns.is_none() && t.step_ns.is_none() => list.clone(),
            (None, Some(stop)) => {
                let start = t.start_ns.unwrap_or(0.0);
                let step = t.step_ns.unwrap_or(self.dt_ns());
                if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
                    return Err(config_err("trajectory.times", "need start_ns <= stop_ns and step_ns > 0"));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                (0..=n).map(|k| start + k as f64 * step).collect()
            }
            _ => return Err(config_err("trajectory.times", "give either `t_ns` or `stop_ns` (with optional `start_ns`, `step_ns`)")),
        };
        if times.is_empty() {
            return Err(config_err("trajectory.times", "time list is empty"));
        }
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(config_err("trajectory.times", "times must be finite and non-negative"));
        }
        Ok(times)
    }

    pub fn sweep_grid(&self) -> Result<SweepGrid, CliError> {
        let s = self.sweep.as_ref().ok_or_else(|| CliError::Config("missing `sweep` section".into()))?;
        for (name, r) in [("sweep.g_ghz", &s.g_ghz), ("sweep.freq_ghz", &s.freq_ghz)] {
            if r.count == 0 || !(r.start <= r.stop) {
                return Err(config_err(name, "need count >= 1 and start <= stop"));
            }
        }
        let grid = SweepGrid {
            g_values: linspace(s.g_ghz.start, s.g_ghz.stop, s.g_ghz.count),
            freq_values: linspace(s.freq_ghz.start, s.freq_ghz.stop, s.freq_ghz.count),
            base_spec: self.system_spec()?,
            target_qubit: s.target_qubit,
            resonator: s.resonator,
            rot0: s.rot0.to_core(),
            rot1: s.rot1.to_core(),
            dt_ns: self.dt_ns(),
            t_max_ns: self.controls.t_max_ns,
        };
        grid.validate().map_err(|e| config_err("sweep", e))?;
        Ok(grid)
    }

    pub fn phase_params(&self, g: &PhaseGateConfig, refine: bool) -> Result<ControlledPhaseParams, CliError> {
        let duration = if refine || self.controls.refine {
            DurationMode::Optimize
        } else {
            match (g.duration, g.t_ns) {
                (DurationKind::Fixed, Some(t)) => DurationMode::Fixed(t),
                (DurationKind::Fixed, None) => return Err(config_err("gate", "`fixed` duration needs `t_ns`")),
                (_, Some(_)) => return Err(config_err("gate", "`t_ns` is only valid with `\"duration\": \"fixed\"`")),
                (DurationKind::Nominal, None) => DurationMode::Nominal,
                (DurationKind::Peak, None) => DurationMode::Peak,
                (DurationKind::Optimize, None) => DurationMode::Optimize,
            }
        };
        Ok(ControlledPhaseParams {
            spec: self.system_spec()?,
            controls: g.control_qubits.clone(),
            target: g.target_qubit,
            resonator: g.resonator,
            control_state: g.control_state.clone(),
            duration,
        })
    }

    pub fn fredkin_params(&self, f: &FredkinConfig) -> Result<FredkinParams, CliError> {
        Ok(FredkinParams {
            stage1: f.stage1.to_spec(self.controls.cutoff).map_err(|e| config_err("gate.stage1", e))?,
            stage2: f.stage2.to_spec(self.controls.cutoff).map_err(|e| config_err("gate.stage2", e))?,
            control: f.control_qubit,
            swap: (f.swap_qubits[0], f.swap_qubits[1]),
            resonators: (f.resonators[0], f.resonators[1]),
        })
    }

    pub fn resonance_scan(&self) -> Result<(&FindResonanceConfig, Scan, Oscillation), CliError> {
        let f = self
            .find_resonance
            .as_ref()
            .ok_or_else(|| CliError::Config("missing `find_resonance` section".into()))?;
        let scan = Scan::new(f.scan.lo_ghz, f.scan.hi_ghz, f.scan.step_ghz);
        if !(scan.lo <= scan.hi) {
            return Err(config_err("find_resonance.scan", "lo_ghz must not exceed hi_ghz"));
        }
        Ok((f, scan, Oscillation::new(f.initial.clone(), f.target.clone())))
    }
}

/// Labels of the trajectory series, validated against `dims`.
pub(crate) fn labels(series: &SeriesConfig, dims: &[usize]) -> Result<(BasisLabel, BasisLabel), CliError> {
    let a = BasisLabel::new(series.initial.clone());
    let b = BasisLabel::new(series.target.clone());
    for l in [&a, &b] {
        l.validate(dims).map_err(|e| config_err(&format!("trajectory.series `{}`", series.name), e))?;
    }
    Ok((a, b))
}
