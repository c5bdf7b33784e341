//! Temperature sweeps over flux values, cross-method comparison tables,
//! deterministic CSV emission and layered configuration resolution for the
//! command-line front end.
//!
//! Configuration merges three layers: built-in presets (`fig1` for the
//! relativistic closed forms, `fig2` for the non-relativistic ones), then a
//! flat `key=value` config file, then explicit flags. Identical resolved
//! configurations produce byte-identical CSV output.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::partition::{
    z1_direct, z1_euler_maclaurin, z1_geometric_closed_log, z1_high_t_log, Method,
    PartitionError, SummationConfig,
};
use crate::spectrum::{
    nonrelativistic_coefficients, relativistic_coefficients, ChargeSign, Fidelity, Regime,
    RingParams, SpectrumCoefficients,
};
use crate::thermo::{thermo_nonrel_closed, thermo_numeric, thermo_rel_closed, ThermoPoint};

/// Spacing of the temperature grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridScale {
    Linear,
    Log,
}

impl GridScale {
    pub fn token(self) -> &'static str {
        match self {
            GridScale::Linear => "linear",
            GridScale::Log => "log",
        }
    }
}

impl std::fmt::Display for GridScale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.token())
    }
}

impl std::str::FromStr for GridScale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(GridScale::Linear),
            "log" => Ok(GridScale::Log),
            other => Err(format!("unknown grid scale '{other}'; expected linear|log")),
        }
    }
}

/// Built-in starting configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Relativistic closed forms, flux ratios 50..200, `tau` up to 20.
    Fig1,
    /// Non-relativistic closed forms, flux ratios 50..200, `tau` up to 10000.
    Fig2,
}

impl Preset {
    pub fn token(self) -> &'static str {
        match self {
            Preset::Fig1 => "fig1",
            Preset::Fig2 => "fig2",
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.token())
    }
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fig1" => Ok(Preset::Fig1),
            "fig2" => Ok(Preset::Fig2),
            other => Err(format!("unknown preset '{other}'; expected fig1|fig2")),
        }
    }
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown config key '{key}'; accepted keys: {accepted}")]
    UnknownKey { key: String, accepted: &'static str },
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("csv write failed: {0}")]
    Emit(String),
    #[error("empty table: nothing to write")]
    EmptyTable,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub regime: Regime,
    pub flux_ratios: Vec<f64>,
    pub tau_min: f64,
    pub tau_max: f64,
    pub tau_steps: usize,
    pub grid_scale: GridScale,
    pub method: Method,
    pub fidelity: Fidelity,
    pub mass: f64,
    pub radius: f64,
    pub n_fermions: u32,
    pub em_order: u8,
    /// Direct-sum truncation tolerance.
    pub tail_tolerance: f64,
    /// Direct-sum term cap.
    pub max_terms: u64,
    pub output_path: Option<PathBuf>,
}

impl SweepConfig {
    pub fn preset(preset: Preset) -> Self {
        let base = Self {
            regime: Regime::Relativistic,
            flux_ratios: vec![50.0, 100.0, 150.0, 200.0],
            tau_min: 0.1,
            tau_max: 20.0,
            tau_steps: 200,
            grid_scale: GridScale::Linear,
            method: Method::HighTClosed,
            fidelity: Fidelity::Derived,
            mass: 1.0,
            radius: 1.0,
            n_fermions: 1,
            em_order: 2,
            tail_tolerance: 1e-14,
            max_terms: 10_000_000,
            output_path: None,
        };
        match preset {
            Preset::Fig1 => base,
            Preset::Fig2 => Self {
                regime: Regime::NonRelativistic,
                method: Method::GeometricClosed,
                tau_min: 50.0,
                tau_max: 10_000.0,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let bad = |msg: String| Err(SweepError::InvalidConfig(msg));
        if !(self.mass > 0.0) || !self.mass.is_finite() {
            return bad(format!("mass must be > 0 (got {})", self.mass));
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return bad(format!("radius must be > 0 (got {})", self.radius));
        }
        if self.n_fermions < 1 {
            return bad("n_fermions must be >= 1 (got 0)".into());
        }
        if self.flux_ratios.is_empty() {
            return bad("flux_ratios must list at least one value".into());
        }
        let strong_field_method = self.method != Method::DirectSum;
        for &phi in &self.flux_ratios {
            if !(phi >= 0.0) || !phi.is_finite() {
                return bad(format!("flux_ratio values must be >= 0 (got {phi})"));
            }
            if strong_field_method && phi == 0.0 {
                return bad(format!(
                    "flux_ratio must be > 0 for method {} (the strong-field forms \
                     degenerate at zero flux); use method direct instead",
                    self.method
                ));
            }
        }
        if !(self.tau_min > 0.0) || !self.tau_min.is_finite() {
            return bad(format!("tau_min must be > 0 (got {})", self.tau_min));
        }
        if !(self.tau_max > self.tau_min) || !self.tau_max.is_finite() {
            return bad(format!(
                "tau_max must be > tau_min (got tau_min = {}, tau_max = {})",
                self.tau_min, self.tau_max
            ));
        }
        if self.tau_steps < 2 {
            return bad(format!("tau_steps must be >= 2 (got {})", self.tau_steps));
        }
        if self.em_order > 2 {
            return bad(format!("em_order must be 0, 1, or 2 (got {})", self.em_order));
        }
        if !(self.tail_tolerance > 0.0 && self.tail_tolerance < 1.0) {
            return bad(format!(
                "tail_tolerance must lie in (0, 1) (got {})",
                self.tail_tolerance
            ));
        }
        if self.max_terms < 1 {
            return bad("max_terms must be >= 1 (got 0)".into());
        }
        method_allowed(self.regime, self.method).map_err(SweepError::InvalidConfig)
    }

    /// Temperature grid with exact endpoints.
    pub fn tau_grid(&self) -> Vec<f64> {
        let n = self.tau_steps;
        let frac = |i: usize| i as f64 / (n - 1) as f64;
        (0..n)
            .map(|i| {
                if i == 0 {
                    self.tau_min
                } else if i == n - 1 {
                    self.tau_max
                } else {
                    match self.grid_scale {
                        GridScale::Linear => {
                            self.tau_min + (self.tau_max - self.tau_min) * frac(i)
                        }
                        GridScale::Log => {
                            let l0 = self.tau_min.ln();
                            (l0 + (self.tau_max.ln() - l0) * frac(i)).exp()
                        }
                    }
                }
            })
            .collect()
    }

    pub fn ring(&self, flux_ratio: f64) -> Result<RingParams, SweepError> {
        RingParams::new(
            self.mass,
            self.radius,
            flux_ratio,
            ChargeSign::Negative,
            self.n_fermions,
        )
        .map_err(|e| SweepError::InvalidConfig(e.to_string()))
    }

    /// Regime-appropriate coefficients for one flux value.
    pub fn coefficients(&self, flux_ratio: f64) -> Result<SpectrumCoefficients, SweepError> {
        let ring = self.ring(flux_ratio)?;
        let coeffs = match self.regime {
            Regime::Relativistic => relativistic_coefficients(&ring, self.fidelity),
            Regime::NonRelativistic => nonrelativistic_coefficients(&ring),
        };
        coeffs.map_err(|e| SweepError::InvalidConfig(e.to_string()))
    }

    pub fn summation(&self) -> SummationConfig {
        SummationConfig {
            method: self.method,
            tail_tolerance: self.tail_tolerance,
            max_terms: self.max_terms,
            em_beta_order: self.em_order,
        }
    }

    /// Resolved configuration as config-file text; feeding it back through
    /// [`parse_config_text`] reproduces the same configuration.
    pub fn config_text(&self) -> String {
        let flux = self
            .flux_ratios
            .iter()
            .map(|p| p.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let mut out = format!(
            "regime={}\nflux_ratios={}\nmass={}\nradius={}\nn_fermions={}\n\
             tau_min={}\ntau_max={}\ntau_steps={}\ngrid={}\nmethod={}\nfidelity={}\n\
             em_order={}\ntail_tolerance={}\nmax_terms={}\n",
            self.regime,
            flux,
            self.mass,
            self.radius,
            self.n_fermions,
            self.tau_min,
            self.tau_max,
            self.tau_steps,
            self.grid_scale,
            self.method,
            self.fidelity,
            self.em_order,
            self.tail_tolerance,
            self.max_terms,
        );
        if let Some(path) = &self.output_path {
            out.push_str(&format!("out={}\n", path.display()));
        }
        out
    }
}

fn method_allowed(regime: Regime, method: Method) -> Result<(), String> {
    match (regime, method) {
        (_, Method::DirectSum)
        | (Regime::Relativistic, Method::EulerMaclaurin)
        | (Regime::Relativistic, Method::HighTClosed)
        | (Regime::NonRelativistic, Method::GeometricClosed) => Ok(()),
        (Regime::NonRelativistic, m) => Err(format!(
            "method {m} requires regime relativistic; nonrelativistic supports \
             direct|geometric"
        )),
        (Regime::Relativistic, m) => Err(format!(
            "method {m} requires regime nonrelativistic; relativistic supports \
             direct|em|high-t"
        )),
    }
}

/// Successfully evaluated row values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowValues {
    pub f_per_n: f64,
    pub u_per_n: f64,
    pub s_per_nk: f64,
    pub cv_per_nk: f64,
    /// Whether the strong-field preconditions held for this row.
    pub validity: bool,
}

/// One `(flux, tau)` cell of a sweep; failures are recorded, not fatal.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub regime: Regime,
    pub method: Method,
    pub fidelity: Fidelity,
    pub phi: f64,
    pub tau: f64,
    pub outcome: Result<RowValues, String>,
}

/// Evaluate the full `(flux, tau)` grid, ordered by flux then temperature.
/// Per-row evaluation errors land in the row's error slot.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepRow>, SweepError> {
    config.validate()?;
    let grid = config.tau_grid();
    let mut rows = Vec::with_capacity(config.flux_ratios.len() * grid.len());
    for &phi in &config.flux_ratios {
        let coeffs = config.coefficients(phi)?;
        for &tau in &grid {
            let outcome = evaluate_cell(config, &coeffs, tau);
            rows.push(SweepRow {
                regime: config.regime,
                method: config.method,
                fidelity: config.fidelity,
                phi,
                tau,
                outcome,
            });
        }
    }
    Ok(rows)
}

/// Evaluate one `(flux, tau)` cell with the configured method; the backing
/// call for the CLI `point` command.
pub fn evaluate_point(config: &SweepConfig, phi: f64, tau: f64) -> Result<SweepRow, SweepError> {
    config.validate()?;
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(SweepError::InvalidConfig(format!(
            "tau must be > 0 (got {tau})"
        )));
    }
    let coeffs = config.coefficients(phi)?;
    Ok(SweepRow {
        regime: config.regime,
        method: config.method,
        fidelity: config.fidelity,
        phi,
        tau,
        outcome: evaluate_cell(config, &coeffs, tau),
    })
}

fn evaluate_cell(
    config: &SweepConfig,
    coeffs: &SpectrumCoefficients,
    tau: f64,
) -> Result<RowValues, String> {
    let beta = 1.0 / tau;
    let n = config.n_fermions;
    let point: ThermoPoint = match (config.regime, config.method) {
        (Regime::Relativistic, Method::HighTClosed) => {
            thermo_rel_closed(beta, coeffs).map_err(|e| e.to_string())?
        }
        (Regime::NonRelativistic, Method::GeometricClosed) => {
            thermo_nonrel_closed(beta, coeffs, config.fidelity).map_err(|e| e.to_string())?
        }
        (regime, Method::DirectSum) => {
            let summation = config.summation();
            thermo_numeric(
                |b| {
                    z1_direct(|k| coeffs.level(k), b, &summation)
                        .map(|r| f64::from(n) * r.log_value)
                },
                beta,
                None,
                n,
                regime,
            )
            .map_err(|e| e.to_string())?
        }
        (Regime::Relativistic, Method::EulerMaclaurin) => {
            let summation = config.summation();
            thermo_numeric(
                |b| {
                    z1_euler_maclaurin(b, coeffs, &summation)
                        .map(|r| f64::from(n) * r.log_value)
                },
                beta,
                None,
                n,
                Regime::Relativistic,
            )
            .map_err(|e| e.to_string())?
        }
        (regime, method) => return Err(method_allowed(regime, method).unwrap_err()),
    };
    let validity = match config.method {
        Method::DirectSum => true,
        _ => coeffs.strong_field(),
    };
    Ok(RowValues {
        f_per_n: point.f_per_n,
        u_per_n: point.u_per_n,
        s_per_nk: point.s_per_nk,
        cv_per_nk: point.cv_per_nk,
        validity,
    })
}

/// Exact CSV header emitted for sweep tables.
pub const CSV_HEADER: &str =
    "regime,method,fidelity,phi,tau,F_per_N,U_per_N,S_per_NkB,Cv_per_NkB,validity,error";

/// Write sweep rows as CSV. Numbers are rendered in shortest round-trip
/// decimal form; failed rows leave the numeric columns empty and carry the
/// error message. Output bytes are a pure function of the rows.
pub fn write_csv<W: io::Write>(rows: &[SweepRow], out: W) -> Result<(), SweepError> {
    if rows.is_empty() {
        return Err(SweepError::EmptyTable);
    }
    let mut writer = csv::Writer::from_writer(out);
    let emit = |e: csv::Error| SweepError::Emit(e.to_string());
    writer
        .write_record(CSV_HEADER.split(','))
        .map_err(emit)?;
    for row in rows {
        let head = [
            row.regime.to_string(),
            row.method.to_string(),
            row.fidelity.to_string(),
            row.phi.to_string(),
            row.tau.to_string(),
        ];
        let tail = match &row.outcome {
            Ok(v) => [
                v.f_per_n.to_string(),
                v.u_per_n.to_string(),
                v.s_per_nk.to_string(),
                v.cv_per_nk.to_string(),
                v.validity.to_string(),
                String::new(),
            ],
            Err(message) => [
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                message.clone(),
            ],
        };
        writer
            .write_record(head.iter().chain(tail.iter()))
            .map_err(emit)?;
    }
    writer.flush().map_err(|e| SweepError::Emit(e.to_string()))
}

/// Write sweep rows to a file, surfacing IO failures with path context.
pub fn emit_csv(rows: &[SweepRow], path: &Path) -> Result<(), SweepError> {
    let file = fs::File::create(path).map_err(|e| SweepError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    write_csv(rows, io::BufWriter::new(file)).map_err(|e| match e {
        SweepError::Emit(message) => SweepError::Io {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

/// Per-cell method comparison: `ln Z1` per method plus pairwise deviations.
#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub phi: f64,
    pub tau: f64,
    /// `ln Z1` per method, parallel to the table's method list.
    pub log_z1: Vec<Result<f64, String>>,
    /// Pairwise deviations in method-pair order `(0,1), (0,2), ..., (1,2), ...`;
    /// `None` when either side failed.
    pub deviations: Vec<Option<f64>>,
    pub max_deviation: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ComparisonTable {
    pub methods: Vec<Method>,
    pub rows: Vec<ComparisonRow>,
}

/// Deviation between two log-partition values, normalized by the larger
/// magnitude (floored at 1 so near-zero logs do not inflate the measure).
/// Working on `ln Z1` keeps the measure meaningful across engines that
/// differ by an overall exponential prefactor.
fn log_deviation(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Evaluate `ln Z1` for every requested method over the config grid.
///
/// The direct sum runs on the *linearized* level model here — the same model
/// the series engines expand — so deviations isolate series truncation and
/// prefactor differences rather than the linearization error itself. With
/// the direct sum present it serves as the ground truth of the comparison.
pub fn compare_methods(
    config: &SweepConfig,
    methods: &[Method],
) -> Result<ComparisonTable, SweepError> {
    if methods.len() < 2 {
        return Err(SweepError::InvalidConfig(format!(
            "compare requires at least two methods (got {})",
            methods.len()
        )));
    }
    for &m in methods {
        method_allowed(config.regime, m).map_err(SweepError::InvalidConfig)?;
    }
    let probe = SweepConfig {
        method: methods
            .iter()
            .copied()
            .find(|&m| m != Method::DirectSum)
            .unwrap_or(Method::DirectSum),
        ..config.clone()
    };
    probe.validate()?;

    let summation = config.summation();
    let grid = config.tau_grid();
    let mut rows = Vec::with_capacity(config.flux_ratios.len() * grid.len());
    for &phi in &config.flux_ratios {
        let coeffs = config.coefficients(phi)?;
        for &tau in &grid {
            let beta = 1.0 / tau;
            let log_z1: Vec<Result<f64, String>> = methods
                .iter()
                .map(|&m| {
                    log_z1_for(m, beta, &coeffs, &summation).map_err(|e| e.to_string())
                })
                .collect();
            let mut deviations = Vec::new();
            let mut max_deviation: Option<f64> = None;
            for i in 0..methods.len() {
                for j in (i + 1)..methods.len() {
                    let dev = match (&log_z1[i], &log_z1[j]) {
                        (Ok(a), Ok(b)) => Some(log_deviation(*a, *b)),
                        _ => None,
                    };
                    if let Some(d) = dev {
                        max_deviation = Some(max_deviation.map_or(d, |m| m.max(d)));
                    }
                    deviations.push(dev);
                }
            }
            rows.push(ComparisonRow {
                phi,
                tau,
                log_z1,
                deviations,
                max_deviation,
            });
        }
    }
    Ok(ComparisonTable {
        methods: methods.to_vec(),
        rows,
    })
}

fn log_z1_for(
    method: Method,
    beta: f64,
    coeffs: &SpectrumCoefficients,
    summation: &SummationConfig,
) -> Result<f64, PartitionError> {
    match method {
        Method::DirectSum => {
            z1_direct(|n| coeffs.linearized_level(n), beta, summation).map(|r| r.log_value)
        }
        Method::EulerMaclaurin => {
            z1_euler_maclaurin(beta, coeffs, summation).map(|r| r.log_value)
        }
        Method::HighTClosed => z1_high_t_log(beta, coeffs),
        Method::GeometricClosed => z1_geometric_closed_log(beta, coeffs),
    }
}

impl ComparisonTable {
    pub fn csv_header(&self) -> String {
        let mut cols = vec!["phi".to_string(), "tau".to_string()];
        for m in &self.methods {
            cols.push(format!("lnZ1_{m}"));
        }
        for i in 0..self.methods.len() {
            for j in (i + 1)..self.methods.len() {
                cols.push(format!("dev_{}_{}", self.methods[i], self.methods[j]));
            }
        }
        cols.push("max_dev".to_string());
        cols.push("error".to_string());
        cols.join(",")
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), SweepError> {
        if self.rows.is_empty() {
            return Err(SweepError::EmptyTable);
        }
        let mut writer = csv::Writer::from_writer(out);
        let emit = |e: csv::Error| SweepError::Emit(e.to_string());
        writer
            .write_record(self.csv_header().split(','))
            .map_err(emit)?;
        for row in &self.rows {
            let mut record = vec![row.phi.to_string(), row.tau.to_string()];
            let mut errors = Vec::new();
            for (m, lz) in self.methods.iter().zip(&row.log_z1) {
                match lz {
                    Ok(v) => record.push(v.to_string()),
                    Err(e) => {
                        record.push(String::new());
                        errors.push(format!("{m}: {e}"));
                    }
                }
            }
            for dev in &row.deviations {
                record.push(dev.map(|d| d.to_string()).unwrap_or_default());
            }
            record.push(row.max_deviation.map(|d| d.to_string()).unwrap_or_default());
            record.push(errors.join("; "));
            writer.write_record(&record).map_err(emit)?;
        }
        writer.flush().map_err(|e| SweepError::Emit(e.to_string()))
    }

    pub fn emit_csv(&self, path: &Path) -> Result<(), SweepError> {
        let file = fs::File::create(path).map_err(|e| SweepError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        self.write_csv(io::BufWriter::new(file)).map_err(|e| match e {
            SweepError::Emit(message) => SweepError::Io {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }
}

/// Optional overrides from one configuration layer (file or flags).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub preset: Option<Preset>,
    pub regime: Option<Regime>,
    pub flux_ratios: Option<Vec<f64>>,
    pub mass: Option<f64>,
    pub radius: Option<f64>,
    pub n_fermions: Option<u32>,
    pub tau_min: Option<f64>,
    pub tau_max: Option<f64>,
    pub tau_steps: Option<usize>,
    pub grid_scale: Option<GridScale>,
    pub method: Option<Method>,
    pub fidelity: Option<Fidelity>,
    pub em_order: Option<u8>,
    pub tail_tolerance: Option<f64>,
    pub max_terms: Option<u64>,
    pub output_path: Option<PathBuf>,
}

const ACCEPTED_KEYS: &str = "preset, regime, flux_ratios, mass, radius, n_fermions, \
     tau_min, tau_max, tau_steps, grid, method, fidelity, em_order, tail_tolerance, \
     max_terms, out";

/// Parse flat `key=value` config text; `#` starts a comment line, lists are
/// comma-separated. Unknown keys are rejected.
pub fn parse_config_text(text: &str) -> Result<ConfigOverrides, SweepError> {
    let mut overrides = ConfigOverrides::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            SweepError::InvalidConfig(format!(
                "line {}: expected key=value, got '{line}'",
                idx + 1
            ))
        })?;
        let key = key.trim();
        let value = value.trim();
        apply_key(&mut overrides, key, value).map_err(|e| match e {
            SweepError::InvalidConfig(msg) => {
                SweepError::InvalidConfig(format!("line {}: {msg}", idx + 1))
            }
            other => other,
        })?;
    }
    Ok(overrides)
}

fn apply_key(o: &mut ConfigOverrides, key: &str, value: &str) -> Result<(), SweepError> {
    fn num<T: std::str::FromStr>(key: &str, value: &str, range: &str) -> Result<T, SweepError> {
        value.parse().map_err(|_| {
            SweepError::InvalidConfig(format!("{key}: cannot parse '{value}'; expected {range}"))
        })
    }
    match key {
        "preset" => o.preset = Some(value.parse().map_err(SweepError::InvalidConfig)?),
        "regime" => o.regime = Some(value.parse().map_err(SweepError::InvalidConfig)?),
        "flux_ratios" => {
            let mut list = Vec::new();
            for item in value.split(',') {
                list.push(num::<f64>("flux_ratios", item.trim(), "a number > 0")?);
            }
            o.flux_ratios = Some(list);
        }
        "mass" => o.mass = Some(num(key, value, "a number > 0")?),
        "radius" => o.radius = Some(num(key, value, "a number > 0")?),
        "n_fermions" => o.n_fermions = Some(num(key, value, "an integer >= 1")?),
        "tau_min" => o.tau_min = Some(num(key, value, "a number > 0")?),
        "tau_max" => o.tau_max = Some(num(key, value, "a number > tau_min")?),
        "tau_steps" => o.tau_steps = Some(num(key, value, "an integer >= 2")?),
        "grid" => o.grid_scale = Some(value.parse().map_err(SweepError::InvalidConfig)?),
        "method" => o.method = Some(value.parse().map_err(SweepError::InvalidConfig)?),
        "fidelity" => o.fidelity = Some(value.parse().map_err(SweepError::InvalidConfig)?),
        "em_order" => o.em_order = Some(num(key, value, "0, 1, or 2")?),
        "tail_tolerance" => {
            o.tail_tolerance = Some(num(key, value, "a number in (0, 1)")?)
        }
        "max_terms" => o.max_terms = Some(num(key, value, "an integer >= 1")?),
        "out" => o.output_path = Some(PathBuf::from(value)),
        other => {
            return Err(SweepError::UnknownKey {
                key: other.to_string(),
                accepted: ACCEPTED_KEYS,
            })
        }
    }
    Ok(())
}

/// Read and parse a config file.
pub fn parse_config_file(path: &Path) -> Result<ConfigOverrides, SweepError> {
    let text = fs::read_to_string(path).map_err(|e| SweepError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_config_text(&text).map_err(|e| match e {
        SweepError::InvalidConfig(msg) => {
            SweepError::InvalidConfig(format!("{}: {msg}", path.display()))
        }
        other => other,
    })
}

fn apply_overrides(config: &mut SweepConfig, o: &ConfigOverrides) {
    if let Some(v) = o.regime {
        config.regime = v;
    }
    if let Some(v) = &o.flux_ratios {
        config.flux_ratios = v.clone();
    }
    if let Some(v) = o.mass {
        config.mass = v;
    }
    if let Some(v) = o.radius {
        config.radius = v;
    }
    if let Some(v) = o.n_fermions {
        config.n_fermions = v;
    }
    if let Some(v) = o.tau_min {
        config.tau_min = v;
    }
    if let Some(v) = o.tau_max {
        config.tau_max = v;
    }
    if let Some(v) = o.tau_steps {
        config.tau_steps = v;
    }
    if let Some(v) = o.grid_scale {
        config.grid_scale = v;
    }
    if let Some(v) = o.method {
        config.method = v;
    }
    if let Some(v) = o.fidelity {
        config.fidelity = v;
    }
    if let Some(v) = o.em_order {
        config.em_order = v;
    }
    if let Some(v) = o.tail_tolerance {
        config.tail_tolerance = v;
    }
    if let Some(v) = o.max_terms {
        config.max_terms = v;
    }
    if let Some(v) = &o.output_path {
        config.output_path = Some(v.clone());
    }
}

/// Merge flags over config-file values over the preset base.
///
/// The base preset is the explicitly requested one (flag first, then file);
/// with none given it is inferred from the requested regime
/// (non-relativistic selects `fig2`), defaulting to `fig1`.
pub fn resolve_config(
    file: Option<&ConfigOverrides>,
    cli: &ConfigOverrides,
) -> Result<SweepConfig, SweepError> {
    let preset = cli
        .preset
        .or_else(|| file.and_then(|f| f.preset))
        .unwrap_or_else(|| {
            match cli.regime.or_else(|| file.and_then(|f| f.regime)) {
                Some(Regime::NonRelativistic) => Preset::Fig2,
                _ => Preset::Fig1,
            }
        });
    let mut config = SweepConfig::preset(preset);
    if let Some(f) = file {
        apply_overrides(&mut config, f);
    }
    apply_overrides(&mut config, cli);
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1() -> SweepConfig {
        SweepConfig::preset(Preset::Fig1)
    }

    fn fig2() -> SweepConfig {
        SweepConfig::preset(Preset::Fig2)
    }

    #[test]
    fn presets_match_published_setups() {
        let f1 = fig1();
        assert_eq!(f1.regime, Regime::Relativistic);
        assert_eq!(f1.flux_ratios, vec![50.0, 100.0, 150.0, 200.0]);
        assert_eq!(f1.method, Method::HighTClosed);
        assert_eq!(f1.tau_max, 20.0);
        let f2 = fig2();
        assert_eq!(f2.regime, Regime::NonRelativistic);
        assert_eq!(f2.method, Method::GeometricClosed);
        assert_eq!(f2.tau_max, 10_000.0);
        f1.validate().unwrap();
        f2.validate().unwrap();
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut c = fig1();
        c.tau_min = 0.0;
        assert!(c.validate().unwrap_err().to_string().contains("tau_min"));

        let mut c = fig1();
        c.tau_steps = 1;
        assert!(c.validate().unwrap_err().to_string().contains("tau_steps"));

        let mut c = fig1();
        c.flux_ratios = vec![];
        assert!(c.validate().is_err());

        let mut c = fig1();
        c.flux_ratios = vec![50.0, 0.0];
        assert!(c
            .validate()
            .unwrap_err()
            .to_string()
            .contains("zero flux"));

        let mut c = fig1();
        c.method = Method::GeometricClosed;
        assert!(c
            .validate()
            .unwrap_err()
            .to_string()
            .contains("nonrelativistic"));

        let mut c = fig2();
        c.method = Method::EulerMaclaurin;
        assert!(c.validate().is_err());

        let mut c = fig2();
        c.method = Method::DirectSum;
        c.flux_ratios = vec![0.0];
        c.validate().unwrap(); // zero flux is fine for the exact sum
    }

    #[test]
    fn tau_grid_endpoints_and_cardinality() {
        let mut c = fig1();
        c.tau_min = 0.5;
        c.tau_max = 2.0;
        c.tau_steps = 5;
        let grid = c.tau_grid();
        assert_eq!(grid.len(), 5);
        assert_eq!(grid[0], 0.5);
        assert_eq!(grid[4], 2.0);
        c.grid_scale = GridScale::Log;
        let grid = c.tau_grid();
        assert_eq!(grid[0], 0.5);
        assert_eq!(grid[4], 2.0);
        assert!((grid[2] - 1.0).abs() < 1e-12); // geometric midpoint
    }

    #[test]
    fn single_point_sweep_has_two_rows() {
        let mut c = fig1();
        c.flux_ratios = vec![50.0];
        c.tau_steps = 2;
        let rows = run_sweep(&c).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.outcome.is_ok()));
    }

    #[test]
    fn sweep_rows_ordered_by_flux_then_tau() {
        let mut c = fig1();
        c.tau_steps = 3;
        let rows = run_sweep(&c).unwrap();
        assert_eq!(rows.len(), 12);
        let keys: Vec<(f64, f64)> = rows.iter().map(|r| (r.phi, r.tau)).collect();
        let mut sorted = keys.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(keys, sorted);
    }

    #[test]
    fn direct_rows_record_nonconvergence_instead_of_aborting() {
        let mut c = fig1();
        c.method = Method::DirectSum;
        c.flux_ratios = vec![50.0];
        c.tau_min = 1.0e9;
        c.tau_max = 2.0e9;
        c.tau_steps = 2;
        c.max_terms = 100_000;
        let rows = run_sweep(&c).unwrap();
        assert_eq!(rows.len(), 2);
        for row in rows {
            let err = row.outcome.unwrap_err();
            assert!(err.contains("cap"), "unexpected row error: {err}");
        }
    }

    #[test]
    fn csv_shape_and_failed_rows() {
        let ok_row = SweepRow {
            regime: Regime::Relativistic,
            method: Method::HighTClosed,
            fidelity: Fidelity::Derived,
            phi: 50.0,
            tau: 2.0,
            outcome: Ok(RowValues {
                f_per_n: -1.5,
                u_per_n: 2.25,
                s_per_nk: 1.875,
                cv_per_nk: 1.99,
                validity: true,
            }),
        };
        let bad_row = SweepRow {
            outcome: Err("strong-field form degenerates, with a comma".to_string()),
            ..ok_row.clone()
        };
        let mut buf = Vec::new();
        write_csv(&[ok_row, bad_row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(
            lines[1],
            "relativistic,high-t,derived,50,2,-1.5,2.25,1.875,1.99,true,"
        );
        assert!(lines[2].starts_with("relativistic,high-t,derived,50,2,,,,,,"));
        assert!(lines[2].contains("\"strong-field form degenerates, with a comma\""));
    }

    #[test]
    fn csv_identical_across_runs() {
        let mut c = fig1();
        c.tau_steps = 7;
        let rows1 = run_sweep(&c).unwrap();
        let rows2 = run_sweep(&c).unwrap();
        let mut b1 = Vec::new();
        let mut b2 = Vec::new();
        write_csv(&rows1, &mut b1).unwrap();
        write_csv(&rows2, &mut b2).unwrap();
        assert_eq!(b1, b2);
    }

    #[test]
    fn emit_csv_writes_file_and_reports_path_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        let mut c = fig1();
        c.flux_ratios = vec![50.0];
        c.tau_steps = 2;
        let rows = run_sweep(&c).unwrap();
        emit_csv(&rows, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(CSV_HEADER));

        let missing = dir.path().join("no-such-dir").join("rows.csv");
        let err = emit_csv(&rows, &missing).unwrap_err();
        assert!(err.to_string().contains("no-such-dir"));

        assert!(matches!(
            write_csv(&[], &mut Vec::new()),
            Err(SweepError::EmptyTable)
        ));
    }

    #[test]
    fn compare_direct_vs_em_stays_within_a_percent() {
        let mut c = fig1();
        c.flux_ratios = vec![50.0];
        c.grid_scale = GridScale::Log;
        c.tau_min = 100.0;
        c.tau_max = 10_000.0;
        c.tau_steps = 3;
        c.max_terms = 600_000_000;
        let table =
            compare_methods(&c, &[Method::DirectSum, Method::EulerMaclaurin]).unwrap();
        for row in &table.rows {
            let dev = row.max_deviation.unwrap();
            assert!(dev <= 1e-2, "tau={}: dev={dev}", row.tau);
        }
    }

    #[test]
    fn compare_geometric_vs_direct_is_exact_to_twelve_digits() {
        let mut c = fig2();
        c.flux_ratios = vec![50.0];
        c.grid_scale = GridScale::Log;
        c.tau_min = 100.0;
        c.tau_max = 10_000.0;
        c.tau_steps = 3;
        c.tail_tolerance = 1e-17;
        let table =
            compare_methods(&c, &[Method::GeometricClosed, Method::DirectSum]).unwrap();
        for row in &table.rows {
            let dev = row.max_deviation.unwrap();
            assert!(dev <= 1e-12, "tau={}: dev={dev}", row.tau);
        }
    }

    #[test]
    fn compare_high_t_vs_em_at_beta_1e4() {
        let mut c = fig1();
        c.flux_ratios = vec![50.0];
        c.tau_min = 9_999.0;
        c.tau_max = 10_000.0;
        c.tau_steps = 2;
        let table =
            compare_methods(&c, &[Method::HighTClosed, Method::EulerMaclaurin]).unwrap();
        for row in &table.rows {
            assert!(row.max_deviation.unwrap() <= 1e-3);
        }
    }

    #[test]
    fn compare_validation() {
        let c = fig1();
        assert!(compare_methods(&c, &[Method::DirectSum]).is_err());
        assert!(compare_methods(&c, &[Method::DirectSum, Method::GeometricClosed]).is_err());
    }

    #[test]
    fn comparison_csv_shape() {
        let mut c = fig1();
        c.flux_ratios = vec![50.0];
        c.tau_steps = 2;
        let table =
            compare_methods(&c, &[Method::DirectSum, Method::HighTClosed]).unwrap();
        assert_eq!(
            table.csv_header(),
            "phi,tau,lnZ1_direct,lnZ1_high-t,dev_direct_high-t,max_dev,error"
        );
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn config_text_round_trips() {
        let mut c = fig2();
        c.flux_ratios = vec![60.0, 75.5];
        c.tau_steps = 17;
        c.tail_tolerance = 1e-12;
        let text = c.config_text();
        let parsed = parse_config_text(&text).unwrap();
        let resolved = resolve_config(None, &parsed).unwrap();
        assert_eq!(resolved, c);
    }

    #[test]
    fn config_parsing_errors() {
        let err = parse_config_text("unknown_key=1").unwrap_err();
        assert!(matches!(err, SweepError::UnknownKey { .. }));
        assert!(err.to_string().contains("unknown_key"));

        let err = parse_config_text("tau_min").unwrap_err();
        assert!(err.to_string().contains("key=value"));

        let err = parse_config_text("tau_steps=two").unwrap_err();
        assert!(err.to_string().contains("integer >= 2"));

        let parsed =
            parse_config_text("# comment\n\nmethod=em\nflux_ratios=50, 100\n").unwrap();
        assert_eq!(parsed.method, Some(Method::EulerMaclaurin));
        assert_eq!(parsed.flux_ratios, Some(vec![50.0, 100.0]));
    }

    #[test]
    fn resolution_precedence_and_inference() {
        // regime alone selects the matching preset
        let cli = ConfigOverrides {
            regime: Some(Regime::NonRelativistic),
            ..ConfigOverrides::default()
        };
        let cfg = resolve_config(None, &cli).unwrap();
        assert_eq!(cfg.method, Method::GeometricClosed);
        assert_eq!(cfg.tau_max, 10_000.0);

        // flags beat file values, file values beat the preset
        let file = parse_config_text("preset=fig1\ntau_steps=33\nmass=2\n").unwrap();
        let cli = ConfigOverrides {
            mass: Some(3.0),
            ..ConfigOverrides::default()
        };
        let cfg = resolve_config(Some(&file), &cli).unwrap();
        assert_eq!(cfg.tau_steps, 33);
        assert_eq!(cfg.mass, 3.0);
        assert_eq!(cfg.regime, Regime::Relativistic);

        // resolved configs that fail validation surface the key
        let cli = ConfigOverrides {
            tau_min: Some(0.0),
            ..ConfigOverrides::default()
        };
        assert!(resolve_config(None, &cli)
            .unwrap_err()
            .to_string()
            .contains("tau_min"));
    }
}
