//! Command-line driver: reads a scenario configuration, runs one of the
//! simulator's commands and writes CSV or report files.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical or I/O failure,
//! 4 gate-protocol constraint violation.

pub mod config;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use srqed_core::sweep::{build_pool, format_sig, run_sweep_to_csv};
use srqed_core::{
    build_ccphase_protocol, build_cphase_protocol, build_fredkin_protocol, build_hamiltonian, find_resonance,
    gates::fidelity_report, FidelityReport, Spectrum, StateVector,
};

pub use config::{load_config, parse_config, ScenarioConfig};
use config::GateConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Protocol(_) => 4,
        }
    }
}

impl From<srqed_core::Error> for CliError {
    fn from(e: srqed_core::Error) -> Self {
        use srqed_core::Error as E;
        let root = {
            let mut r = &e;
            while let E::Cell { source, .. } = r {
                r = source;
            }
            r
        };
        match root {
            E::Input(_) | E::Domain(_) => CliError::Config(e.to_string()),
            E::Protocol(_) => CliError::Protocol(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Numerical(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "srqed", version, about = "Qubit/resonator dynamics, selective-resonance sweeps and gate fidelities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transition probabilities over time; writes `t_ns,<series...>` CSV.
    Simulate(CommonArgs),
    /// MAEV map over coupling and frequency; writes CSV with checkpointing.
    Sweep(CommonArgs),
    /// Gate protocol fidelity report; prints `kind fidelity duration_ns leakage`.
    Gate(CommonArgs),
    /// Prints the qubit frequency (GHz) that maximizes an oscillation's MAEV.
    FindResonance(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, env = "SRQED_WORKERS")]
    pub workers: Option<usize>,
    /// Maximize gate fidelity over 0.9–1.1 × the nominal duration.
    #[arg(long)]
    pub refine: bool,
}

fn workers(args: &CommonArgs, cfg: &ScenarioConfig) -> usize {
    args.workers
        .or(cfg.controls.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Trajectory CSV for the config's `trajectory` section.
pub fn simulate_csv(cfg: &ScenarioConfig) -> Result<String, CliError> {
    let spec = cfg.system_spec()?;
    let tr = cfg.trajectory.as_ref().ok_or_else(|| CliError::Config("missing `trajectory` section".into()))?;
    if tr.series.is_empty() {
        return Err(CliError::Config("trajectory.series: at least one series is required".into()));
    }
    for s in &tr.series {
        if s.name.is_empty() || s.name.contains([',', '\n', '"']) {
            return Err(CliError::Config(format!("trajectory.series: invalid column name {:?}", s.name)));
        }
    }
    let times = cfg.times()?;
    let dims = spec.dims();
    let spectrum = Spectrum::new(&build_hamiltonian(&spec)?)?;

    let mut columns = Vec::with_capacity(tr.series.len());
    let mut initial_cache: BTreeMap<Vec<usize>, StateVector> = BTreeMap::new();
    for s in &tr.series {
        let (a, b) = config::labels(s, &dims)?;
        let psi0 = match initial_cache.get(&a.0) {
            Some(p) => p.clone(),
            None => {
                let p = StateVector::basis(&a, &dims)?;
                initial_cache.insert(a.0.clone(), p.clone());
                p
            }
        };
        let series = spectrum.overlap(&psi0, &StateVector::basis(&b, &dims)?)?;
        columns.push(times.iter().map(|&t| series.probability(t)).collect::<Vec<_>>());
    }

    let mut out = String::from("t_ns");
    for s in &tr.series {
        out.push(',');
        out.push_str(&s.name);
    }
    out.push('\n');
    for (k, &t) in times.iter().enumerate() {
        out.push_str(&format_sig(t, 9));
        for c in &columns {
            out.push(',');
            out.push_str(&format_sig(c[k], 9));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Fidelity report for the config's `gate` section.
pub fn gate_report(cfg: &ScenarioConfig, refine: bool, workers: usize) -> Result<FidelityReport, CliError> {
    let gate = cfg.gate.as_ref().ok_or_else(|| CliError::Config("missing `gate` section".into()))?;
    let pool = build_pool(workers)?;
    pool.install(|| {
        let protocol = match gate {
            GateConfig::Cphase(g) => build_cphase_protocol(&cfg.phase_params(g, refine)?)?,
            GateConfig::Ccphase(g) => build_ccphase_protocol(&cfg.phase_params(g, refine)?)?,
            GateConfig::Fredkin(f) => {
                if refine || cfg.controls.refine {
                    return Err(CliError::Config("gate: duration refinement applies to phase gates only".into()));
                }
                build_fredkin_protocol(&cfg.fredkin_params(f)?)?
            }
        };
        Ok(fidelity_report(&protocol)?)
    })
}

/// Located resonance (GHz) for the config's `find_resonance` section.
pub fn resonance_ghz(cfg: &ScenarioConfig, workers: usize) -> Result<f64, CliError> {
    let spec = cfg.system_spec()?;
    let (f, scan, osc) = cfg.resonance_scan()?;
    let pool = build_pool(workers)?;
    Ok(pool.install(|| find_resonance(&spec, f.target_qubit, scan, &osc))?)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| io_err(path, e))
}

/// Runs a parsed command line, writing console output to `stdout`.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let console = |e: std::io::Error| CliError::Numerical(format!("stdout: {e}"));
    match &cli.command {
        Command::Simulate(args) => {
            let cfg = load_config(&args.config)?;
            let csv = simulate_csv(&cfg)?;
            match &args.out {
                Some(p) => write_file(p, &csv)?,
                None => stdout.write_all(csv.as_bytes()).map_err(console)?,
            }
        }
        Command::Sweep(args) => {
            let cfg = load_config(&args.config)?;
            let grid = cfg.sweep_grid()?;
            let out = args.out.as_ref().ok_or_else(|| CliError::Config("sweep needs --out".into()))?;
            run_sweep_to_csv(&grid, workers(args, &cfg), out)?;
        }
        Command::Gate(args) => {
            let cfg = load_config(&args.config)?;
            let report = gate_report(&cfg, args.refine, workers(args, &cfg))?;
            if let Some(p) = &args.out {
                let body = if p.extension().is_some_and(|e| e == "csv") { report.to_csv() } else { report.to_text() };
                write_file(p, &body)?;
            }
            writeln!(stdout, "{}", report.summary_line()).map_err(console)?;
        }
        Command::FindResonance(args) => {
            let cfg = load_config(&args.config)?;
            let f = resonance_ghz(&cfg, workers(args, &cfg))?;
            writeln!(stdout, "{f:.6}").map_err(console)?;
        }
    }
    Ok(())
}

/// Parses `std::env::args`, runs, and maps the outcome to an exit code.
pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match run(&cli, &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("srqed: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
