//! Two-dimensional maximal-expectation-value maps over a target qubit's
//! coupling and frequency.
//!
//! Each cell retunes the target qubit of a base system, then records the
//! maximal transition probability of two oscillations: the one meant to be
//! resonant (`rot0`, control qubit in `|0⟩`) and the one meant to be
//! suppressed (`rot1`, control in `|1⟩`).

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::dynamics::{default_window, Maev, Spectrum, DEFAULT_DT_NS};
use crate::error::{input, Error, Result};
use crate::hamiltonian::{build_hamiltonian, CouplingSpec, SystemSpec};
use crate::hilbert::{BasisLabel, ModeSpec, StateVector};

pub const CSV_HEADER: &str = "g2_ghz,freq_ghz,rot0_maev,rot0_t_ns,rot1_maev,rot1_t_ns";

/// Scan window used for cells whose coupling is zero (no resonant period to
/// scale from).
pub const ZERO_COUPLING_WINDOW_NS: f64 = 100.0;

/// A transition between two bare basis states.
#[derive(Clone, Debug, PartialEq)]
pub struct Oscillation {
    pub initial: BasisLabel,
    pub target: BasisLabel,
}

impl Oscillation {
    pub fn new(initial: impl Into<Vec<usize>>, target: impl Into<Vec<usize>>) -> Self {
        Self { initial: BasisLabel::new(initial), target: BasisLabel::new(target) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepGrid {
    pub g_values: Vec<f64>,
    pub freq_values: Vec<f64>,
    pub base_spec: SystemSpec,
    /// Qubit whose `0 ↔ 1` frequency and coupling are swept.
    pub target_qubit: usize,
    pub resonator: usize,
    pub rot0: Oscillation,
    pub rot1: Oscillation,
    pub dt_ns: f64,
    /// Fixed scan window; `None` uses 1.25 resonant swap periods of each
    /// cell's coupling.
    pub t_max_ns: Option<f64>,
}

impl SweepGrid {
    /// Two two-level qubits sharing one resonator (ν_r = 6.0, ν₁ = 7.0,
    /// g₁ = 0.2 GHz), sweeping qubit 2 over g₂ ∈ [0.01, 0.20] × 40 and
    /// ν₂ ∈ [5.90, 6.15] × 60.
    pub fn two_qubit_default() -> Self {
        Self {
            g_values: linspace(0.01, 0.20, 40),
            freq_values: linspace(5.90, 6.15, 60),
            base_spec: two_qubit_base(6.0, 7.0, 0.2, 3),
            target_qubit: 1,
            resonator: 2,
            rot0: Oscillation::new([0, 1, 0], [0, 0, 1]),
            rot1: Oscillation::new([1, 1, 0], [1, 0, 1]),
            dt_ns: DEFAULT_DT_NS,
            t_max_ns: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("g", &self.g_values), ("frequency", &self.freq_values)] {
            if v.is_empty() {
                return input(format!("{name} grid is empty"));
            }
            if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| w[1] <= w[0]) {
                return input(format!("{name} grid must be finite and strictly increasing"));
            }
        }
        if self.g_values[0] < 0.0 || self.freq_values[0] <= 0.0 {
            return input("couplings must be non-negative and frequencies positive");
        }
        self.base_spec.validate()?;
        let dims = self.base_spec.dims();
        for osc in [&self.rot0, &self.rot1] {
            osc.initial.validate(&dims)?;
            osc.target.validate(&dims)?;
        }
        if !self.base_spec.modes.get(self.target_qubit).is_some_and(ModeSpec::is_qubit) {
            return input(format!("target mode {} is not a qubit", self.target_qubit));
        }
        if self.base_spec.modes.get(self.resonator).is_none_or(ModeSpec::is_qubit) {
            return input(format!("mode {} is not a resonator", self.resonator));
        }
        if !(self.dt_ns > 0.0) {
            return input("time step must be positive");
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.g_values.len()
    }

    pub fn cols(&self) -> usize {
        self.freq_values.len()
    }

    pub fn cell_spec(&self, g: f64, freq: f64) -> Result<SystemSpec> {
        self.base_spec.with_qubit_frequency(self.target_qubit, freq)?.with_coupling(self.target_qubit, self.resonator, g)
    }

    fn window(&self, g: f64) -> Result<(f64, f64)> {
        match self.t_max_ns {
            Some(t) => Ok((self.dt_ns, t)),
            None if g > 0.0 => default_window(g).map(|(_, t)| (self.dt_ns, t)),
            None => Ok((self.dt_ns, ZERO_COUPLING_WINDOW_NS)),
        }
    }

    /// Evaluates one cell.
    pub fn evaluate(&self, g: f64, freq: f64) -> Result<MaevCell> {
        let run = || -> Result<MaevCell> {
            let spec = self.cell_spec(g, freq)?;
            let dims = spec.dims();
            let spectrum = Spectrum::new(&build_hamiltonian(&spec)?)?;
            let (dt, t_max) = self.window(g)?;
            let one = |osc: &Oscillation| -> Result<Maev> {
                let a = StateVector::basis(&osc.initial, &dims)?;
                let b = StateVector::basis(&osc.target, &dims)?;
                spectrum.maev(&a, &b, t_max, dt)
            };
            Ok(MaevCell { rot0: one(&self.rot0)?, rot1: one(&self.rot1)? })
        };
        run().map_err(|e| Error::Cell { g_ghz: g, freq_ghz: freq, source: Box::new(e) })
    }

    fn evaluate_row(&self, row: usize, pool: &rayon::ThreadPool) -> Result<Vec<MaevCell>> {
        let g = self.g_values[row];
        pool.install(|| self.freq_values.par_iter().map(|&f| self.evaluate(g, f)).collect())
    }
}

/// Two two-level qubits (mode 0 the control, mode 1 the target) coupled to
/// one resonator (mode 2). The target starts uncoupled at the resonator
/// frequency; sweeps overwrite both.
pub fn two_qubit_base(nu_r: f64, nu_1: f64, g_1: f64, cutoff: usize) -> SystemSpec {
    SystemSpec::new(
        vec![
            ModeSpec::qubit(&[nu_1]).expect("positive frequency"),
            ModeSpec::qubit(&[nu_r]).expect("positive frequency"),
            ModeSpec::resonator(nu_r, cutoff).expect("cutoff >= 1"),
        ],
        vec![CouplingSpec::new(0, 2, vec![g_1]), CouplingSpec::new(1, 2, vec![0.0])],
    )
    .expect("valid two-qubit system")
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaevCell {
    pub rot0: Maev,
    pub rot1: Maev,
}

/// Row-major (g outer) map of cells.
#[derive(Clone, Debug)]
pub struct MaevMap {
    pub grid: SweepGrid,
    pub values: Vec<MaevCell>,
}

impl MaevMap {
    pub fn cell(&self, row: usize, col: usize) -> &MaevCell {
        &self.values[row * self.grid.cols() + col]
    }

    /// Column of the largest `rot0` value in `row`, earliest on ties.
    pub fn rot0_peak(&self, row: usize) -> usize {
        let mut best = 0;
        for col in 1..self.grid.cols() {
            if self.cell(row, col).rot0.max_prob > self.cell(row, best).rot0.max_prob {
                best = col;
            }
        }
        best
    }

    pub fn rot1_peak(&self, row: usize) -> usize {
        let mut best = 0;
        for col in 1..self.grid.cols() {
            if self.cell(row, col).rot1.max_prob > self.cell(row, best).rot1.max_prob {
                best = col;
            }
        }
        best
    }

    /// Row whose coupling is closest to `g`.
    pub fn nearest_row(&self, g: f64) -> usize {
        let gv = &self.grid.g_values;
        (0..gv.len()).min_by(|&a, &b| (gv[a] - g).abs().total_cmp(&(gv[b] - g).abs())).unwrap_or(0)
    }
}

/// A rayon pool with exactly `workers` threads.
pub fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    if workers == 0 {
        return input("worker count must be at least 1");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Numerical(format!("cannot start worker pool: {e}")))
}

/// Evaluates every cell on `workers` threads. The result does not depend on
/// the worker count.
pub fn run_sweep(grid: &SweepGrid, workers: usize) -> Result<MaevMap> {
    grid.validate()?;
    let pool = build_pool(workers)?;
    let mut values = Vec::with_capacity(grid.rows() * grid.cols());
    for row in 0..grid.rows() {
        values.extend(grid.evaluate_row(row, &pool)?);
    }
    Ok(MaevMap { grid: grid.clone(), values })
}

pub fn checkpoint_path(out: &Path) -> PathBuf {
    sidecar(out, "ckpt")
}

/// Formatted CSV rows of completed sweep rows, keyed by row index.
pub fn partial_path(out: &Path) -> PathBuf {
    sidecar(out, "part")
}

fn sidecar(out: &Path, ext: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Runs the sweep and writes the CSV to `out`, checkpointing after every
/// completed row. Completed row indices go to `<out>.ckpt`, one per line;
/// their formatted lines go to `<out>.part`. A rerun with the same grid skips
/// rows already listed. Both sidecars are removed once `out` is written.
pub fn run_sweep_to_csv(grid: &SweepGrid, workers: usize, out: &Path) -> Result<()> {
    run_sweep_to_csv_limited(grid, workers, out, None).map(|_| ())
}

/// As [`run_sweep_to_csv`], but stops after computing at most `max_new_rows`
/// rows, leaving the checkpoint in place. Returns whether the CSV was
/// completed.
pub fn run_sweep_to_csv_limited(grid: &SweepGrid, workers: usize, out: &Path, max_new_rows: Option<usize>) -> Result<bool> {
    grid.validate()?;
    let pool = build_pool(workers)?;
    let ckpt = checkpoint_path(out);
    let part = partial_path(out);
    let mut done = load_checkpoint(&ckpt, &part, grid.cols())?;

    let mut part_file = OpenOptions::new().create(true).append(true).open(&part)?;
    let mut ckpt_file = OpenOptions::new().create(true).append(true).open(&ckpt)?;
    let mut computed = 0;
    for row in 0..grid.rows() {
        if done.contains_key(&row) {
            continue;
        }
        if max_new_rows.is_some_and(|m| computed >= m) {
            return Ok(false);
        }
        let cells = grid.evaluate_row(row, &pool)?;
        let lines: Vec<String> = cells
            .iter()
            .zip(&grid.freq_values)
            .map(|(c, &f)| format_row(grid.g_values[row], f, c))
            .collect();
        for line in &lines {
            writeln!(part_file, "{row}\t{line}")?;
        }
        part_file.sync_data()?;
        writeln!(ckpt_file, "{row}")?;
        ckpt_file.sync_data()?;
        done.insert(row, lines);
        computed += 1;
    }

    let mut w = BufWriter::new(File::create(out)?);
    write!(w, "{CSV_HEADER}\n")?;
    for lines in done.values() {
        for line in lines {
            write!(w, "{line}\n")?;
        }
    }
    w.flush()?;
    drop(part_file);
    drop(ckpt_file);
    fs::remove_file(&ckpt)?;
    fs::remove_file(&part)?;
    Ok(true)
}

fn load_checkpoint(ckpt: &Path, part: &Path, cols: usize) -> Result<BTreeMap<usize, Vec<String>>> {
    let mut done = BTreeMap::new();
    if !ckpt.exists() {
        // a stale partial file without its index is not trusted
        if part.exists() {
            fs::remove_file(part)?;
        }
        return Ok(done);
    }
    let listed: Vec<usize> = BufReader::new(File::open(ckpt)?)
        .lines()
        .filter_map(|l| l.ok()?.trim().parse().ok())
        .collect();
    let mut rows: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    if part.exists() {
        for line in BufReader::new(File::open(part)?).lines() {
            let line = line?;
            if let Some((idx, rest)) = line.split_once('\t') {
                if let Ok(idx) = idx.parse() {
                    rows.entry(idx).or_default().push(rest.to_string());
                }
            }
        }
    }
    for idx in listed {
        if let Some(lines) = rows.remove(&idx) {
            if lines.len() == cols {
                done.insert(idx, lines);
            }
        }
    }
    // rewrite both sidecars so they hold exactly the trusted rows
    let mut p = BufWriter::new(File::create(part)?);
    let mut c = BufWriter::new(File::create(ckpt)?);
    for (idx, lines) in &done {
        for line in lines {
            writeln!(p, "{idx}\t{line}")?;
        }
        writeln!(c, "{idx}")?;
    }
    p.flush()?;
    c.flush()?;
    Ok(done)
}

fn format_row(g: f64, f: f64, c: &MaevCell) -> String {
    [g, f, c.rot0.max_prob, c.rot0.t_at_max, c.rot1.max_prob, c.rot1.t_at_max]
        .iter()
        .map(|&x| format_sig(x, 9))
        .collect::<Vec<_>>()
        .join(",")
}

/// Writes `map` as CSV with LF line endings and 9 significant digits.
pub fn write_csv(map: &MaevMap, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "{CSV_HEADER}\n")?;
    for (row, &g) in map.grid.g_values.iter().enumerate() {
        for (col, &f) in map.grid.freq_values.iter().enumerate() {
            write!(w, "{}\n", format_row(g, f, map.cell(row, col)))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One parsed CSV row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CsvRow {
    pub g_ghz: f64,
    pub freq_ghz: f64,
    pub rot0: Maev,
    pub rot1: Maev,
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return input(format!("{} does not start with the sweep header", path.display()));
    }
    lines
        .map(|line| {
            let v: Vec<f64> = line
                .split(',')
                .map(|s| s.parse::<f64>().map_err(|e| Error::Input(format!("bad number {s:?}: {e}"))))
                .collect::<Result<_>>()?;
            if v.len() != 6 {
                return input(format!("expected 6 columns, got {}", v.len()));
            }
            Ok(CsvRow {
                g_ghz: v[0],
                freq_ghz: v[1],
                rot0: Maev { max_prob: v[2], t_at_max: v[3] },
                rot1: Maev { max_prob: v[4], t_at_max: v[5] },
            })
        })
        .collect()
}

/// `%.{digits}g`-style formatting: `digits` significant digits, trailing
/// zeros trimmed, exponent notation outside `[1e-5, 1e{digits})`.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        return format!("{m}e{exp}");
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
