//! Run configuration, the stage pipeline for every scheme, run directories and
//! comparison reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{expectation_series, peak_cavity_population, write_dynamics_csv};
use crate::error::{Error, Result};
use crate::functionals::{eval_geo, Functional, GateMatrix};
use crate::gate_analysis::{analyze, closest_diagonal_pe_with, GateMetrics, MultiStart};
use crate::krotov::{ConvergenceLog, IterationRecord, Krotov, KrotovConfig, OptimizationRecord};
use crate::parallel::Execution;
use crate::propagator::{Propagator, Store};
use crate::pulse::{default_shape, sample_analytic, AnalyticPulseParams, ControlField};
use crate::simplex::{run_simplex, CandidateContext, SimplexConfig, SimplexRecord};
use crate::system::{SystemParams, TransmonSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Propagate,
    DirectSm,
    DirectGeo,
    Simplex,
    HybridSm,
    HybridGeo,
}

impl Scheme {
    pub const ALL: [Scheme; 6] =
        [Scheme::Propagate, Scheme::DirectSm, Scheme::DirectGeo, Scheme::Simplex, Scheme::HybridSm, Scheme::HybridGeo];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Propagate => "propagate",
            Scheme::DirectSm => "direct-sm",
            Scheme::DirectGeo => "direct-geo",
            Scheme::Simplex => "simplex",
            Scheme::HybridSm => "hybrid-sm",
            Scheme::HybridGeo => "hybrid-geo",
        }
    }

    pub fn uses_simplex(self) -> bool {
        matches!(self, Scheme::Simplex | Scheme::HybridSm | Scheme::HybridGeo)
    }

    pub fn uses_krotov(self) -> bool {
        matches!(self, Scheme::DirectSm | Scheme::DirectGeo | Scheme::HybridSm | Scheme::HybridGeo)
    }

    fn square_modulus(self) -> bool {
        matches!(self, Scheme::DirectSm | Scheme::HybridSm)
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme `{s}`; expected one of {}", scheme_list())))
    }
}

fn scheme_list() -> String {
    Scheme::ALL.map(|s| s.name()).join(", ")
}

/// Named truncation/time-step profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// 3 qubit and 15 cavity levels at `dt = 0.05 ns`.
    Reduced,
    /// 6 qubit and 70 cavity levels; `dt` as configured.
    Full,
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reduced" => Ok(Preset::Reduced),
            "full" => Ok(Preset::Full),
            _ => Err(Error::Config(format!("unknown preset `{s}`; expected reduced or full"))),
        }
    }
}

/// `[pulse]`: either analytic parameters or a pulse file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseSection {
    pub peak_amplitude: Option<f64>,
    pub duration: Option<f64>,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PulseSource {
    Analytic(AnalyticPulseParams),
    File(PathBuf),
}

impl PulseSection {
    pub fn source(&self) -> Result<PulseSource> {
        match (self.peak_amplitude, self.duration, &self.file) {
            (Some(e0), Some(t), None) => {
                let p = AnalyticPulseParams { peak_amplitude: e0, duration: t };
                p.validate().map_err(|e| Error::Config(format!("pulse: {e}")))?;
                Ok(PulseSource::Analytic(p))
            }
            (None, None, Some(f)) => Ok(PulseSource::File(f.clone())),
            (None, None, None) => Err(Error::Config("pulse: give either peak_amplitude and duration, or file".into())),
            (_, _, Some(_)) => Err(Error::Config("pulse: `file` excludes peak_amplitude/duration".into())),
            _ => Err(Error::Config("pulse: peak_amplitude and duration must be given together".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Seeded random starts added to the grid starts of the closest
    /// perfect-entangler search.
    pub random_starts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Grid stride of `dynamics_00.csv`.
    pub dynamics_stride: usize,
    /// Write `pulse_checkpoint.dat` every this many Krotov iterations (0: never).
    pub checkpoint_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dynamics_stride: 10, checkpoint_every: 10 }
    }
}

fn default_dt() -> f64 {
    0.01
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub scheme: Option<Scheme>,
    #[serde(default)]
    pub preset: Option<Preset>,
    /// ns
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub execution: Execution,
    /// Fixed target phases for the square-modulus functional; by default the
    /// closest diagonal perfect entangler of the starting gate.
    #[serde(default)]
    pub target_phases: Option<[f64; 4]>,
    #[serde(default)]
    pub system: SystemParams,
    pub pulse: PulseSection,
    #[serde(default)]
    pub krotov: Option<KrotovConfig>,
    #[serde(default)]
    pub simplex: Option<SimplexConfig>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    /// A config with defaults everywhere and the given pulse.
    pub fn new(pulse: PulseSection) -> Self {
        toml::from_str::<RunConfig>("[pulse]").map(|mut c| {
            c.pulse = pulse;
            c
        })
        .expect("defaults parse")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))
    }

    /// Reads a config file; a relative pulse file is taken relative to it.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if let Some(f) = &cfg.pulse.file {
            if f.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.pulse.file = Some(base.join(f));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply_preset(&mut self, preset: Preset) {
        self.preset = Some(preset);
        match preset {
            Preset::Reduced => {
                self.system.qubit_levels = 3;
                self.system.cavity_levels = 15;
                self.dt = 0.05;
            }
            Preset::Full => {
                self.system.qubit_levels = 6;
                self.system.cavity_levels = 70;
            }
        }
    }

    pub fn multi_start(&self) -> MultiStart {
        MultiStart { seed: Some(self.seed), random_starts: self.analysis.random_starts }
    }

    /// Checks everything a run of `scheme` needs, with field-level messages.
    pub fn validate(&self, scheme: Scheme) -> Result<()> {
        let cfg = |section: &str, e: Error| Error::Config(format!("{section}: {e}"));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        self.system.validate().map_err(|e| cfg("system", e))?;
        let source = self.pulse.source()?;
        if scheme.uses_krotov() {
            let k = self.krotov.as_ref().ok_or_else(|| Error::Config(format!("scheme {scheme} needs a [krotov] section")))?;
            k.validate().map_err(|e| cfg("krotov", e))?;
        }
        if scheme.uses_simplex() {
            let s = self.simplex.as_ref().ok_or_else(|| Error::Config(format!("scheme {scheme} needs a [simplex] section")))?;
            s.validate().map_err(|e| cfg("simplex", e))?;
            if !matches!(source, PulseSource::Analytic(_)) {
                return Err(Error::Config(format!("scheme {scheme} starts from analytic pulse parameters, not a file")));
            }
        }
        if let PulseSource::Analytic(p) = source {
            if self.dt >= p.duration {
                return Err(Error::Config(format!("dt {} must be below the pulse duration {}", self.dt, p.duration)));
            }
        }
        if self.output.dynamics_stride == 0 {
            return Err(Error::Config("output: dynamics_stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn resolve_scheme(&self, requested: Option<Scheme>) -> Result<Scheme> {
        requested
            .or(self.scheme)
            .ok_or_else(|| Error::Config(format!("no scheme given (config `scheme` or --scheme: {})", scheme_list())))
    }
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scheme: Scheme,
    pub duration_ns: f64,
    pub total_propagations: usize,
    #[serde(rename = "eps_C")]
    pub eps_c: f64,
    pub eps_pop: f64,
    pub eps_avg: f64,
    pub simplex_evaluations: usize,
    pub krotov_iterations: usize,
}

impl RunSummary {
    pub fn new(scheme: Scheme, duration_ns: f64, simplex_evaluations: usize, krotov_iterations: usize, metrics: &GateMetrics) -> Self {
        Self {
            scheme,
            duration_ns,
            total_propagations: simplex_evaluations + 2 * krotov_iterations,
            eps_c: metrics.eps_c,
            eps_pop: metrics.eps_pop,
            eps_avg: metrics.eps_avg,
            simplex_evaluations,
            krotov_iterations,
        }
    }
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub summary: RunSummary,
    pub metrics: GateMetrics,
    pub final_field: ControlField,
    pub simplex: Option<SimplexRecord>,
    pub krotov: Option<OptimizationRecord>,
    pub peak_cavity_population: f64,
}

pub const SUMMARY_FILE: &str = "summary.json";

/// Creates `<out>/<scheme>-<timestamp>/`, disambiguating collisions.
pub fn create_run_dir(out: &Path, scheme: Scheme) -> Result<PathBuf> {
    std::fs::create_dir_all(out)?;
    let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S");
    let base = format!("{scheme}-{stamp}");
    for n in 0.. {
        let name = if n == 0 { base.clone() } else { format!("{base}.{n}") };
        let dir = out.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    unreachable!()
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage { stage: name, source: Box::new(e) })
}

/// Propagates the logical states and builds the projected gate.
pub fn gate_of(propagator: &Propagator, system: &TransmonSystem, field: &ControlField) -> Result<GateMatrix> {
    let set = propagator.propagate_all_forward(field, &system.logical_states(), Store::Final)?;
    Ok(GateMatrix::from_states(&set.into_end_states(), &system.logical))
}

/// Runs `scheme` (already resolved, config validated) into a fresh run directory.
pub fn run(config: &RunConfig, scheme: Scheme) -> Result<RunOutcome> {
    config.validate(scheme)?;
    let dir = create_run_dir(&config.output_dir, scheme)?;
    let mut snapshot = config.clone();
    snapshot.scheme = Some(scheme);
    std::fs::write(dir.join("config.snapshot"), snapshot.to_toml())?;
    log::info!("run directory {}", dir.display());

    let system = stage("setup", TransmonSystem::new(config.system.clone()))?;
    let propagator = Propagator::new(&system).with_execution(config.execution);
    let multi = config.multi_start();

    let initial = stage(
        "setup",
        match config.pulse.source()? {
            PulseSource::Analytic(p) => sample_analytic(&p, config.dt, config.system.envelope),
            PulseSource::File(f) => ControlField::read(&f),
        },
    )?;
    initial.write(&dir.join("pulse_initial.dat"))?;

    let mut field = initial;
    let mut simplex_record = None;
    if scheme.uses_simplex() {
        let PulseSource::Analytic(start) = config.pulse.source()? else { unreachable!("validated") };
        let ctx = CandidateContext { propagator: &propagator, logical: &system.logical, dt: config.dt, envelope: config.system.envelope };
        let simplex_cfg = config.simplex.expect("validated");
        let mut log_file = std::io::BufWriter::new(std::fs::File::create(dir.join("simplex.csv"))?);
        use std::io::Write as _;
        writeln!(log_file, "{}", crate::simplex::SIMPLEX_CSV_HEADER)?;
        let outcome = stage(
            "simplex",
            run_simplex(&ctx, &start, &simplex_cfg, |c| {
                let r = SimplexRecord { candidates: vec![c.clone()], ..Default::default() };
                let csv = r.to_csv();
                log_file.write_all(csv.lines().nth(1).unwrap_or_default().as_bytes())?;
                log_file.write_all(b"\n")?;
                log_file.flush()?;
                Ok(())
            }),
        )?;
        log::info!(
            "simplex: E0 = {:.3} MHz, T = {:.3} ns after {} evaluations",
            outcome.best.peak_amplitude,
            outcome.best.duration,
            outcome.record.n_props()
        );
        if !outcome.record.converged {
            log::warn!("simplex stopped on its evaluation budget");
        }
        field = outcome.field;
        field.write(&dir.join("pulse_simplex.dat"))?;
        simplex_record = Some(outcome.record);
    }

    let mut krotov_record = None;
    let mut reference = None;
    if scheme.uses_krotov() {
        let kcfg = config.krotov.clone().expect("validated");
        let functional = if scheme.square_modulus() {
            let target = match config.target_phases {
                Some(p) => GateMatrix::from_phases(p),
                None => closest_diagonal_pe_with(&stage("krotov", gate_of(&propagator, &system, &field))?, multi),
            };
            reference = Some(target);
            Functional::SquareModulus { target }
        } else {
            Functional::Geometric
        };
        let mut krotov = Krotov::new(&propagator, &system.logical, functional, kcfg);
        krotov.multi_start = multi;
        let shape = default_shape(&field);
        let mut log = ConvergenceLog::create(&dir.join("convergence.csv"))?;
        let every = config.output.checkpoint_every;
        let checkpoint = dir.join("pulse_checkpoint.dat");
        let (optimized, record) = stage(
            "krotov",
            krotov.run_with(field.clone(), &shape, |row: &IterationRecord, f: &ControlField| {
                log.append(row)?;
                if every > 0 && row.iteration > 0 && row.iteration % every == 0 {
                    f.write(&checkpoint)?;
                }
                Ok(())
            }),
        )?;
        log::info!(
            "krotov: J_T = {:.6e} after {} iterations (converged: {})",
            record.final_value().unwrap_or(f64::NAN),
            record.iterations(),
            record.converged
        );
        field = optimized;
        krotov_record = Some(record);
    }
    field.write(&dir.join("pulse_final.dat"))?;

    let gate = stage("analysis", gate_of(&propagator, &system, &field))?;
    let metrics = stage("analysis", analyze(&gate, reference.as_ref(), multi))?;
    if krotov_record.is_none() {
        let v = eval_geo(&gate);
        let n_props = simplex_record.as_ref().map_or(0, |r| r.n_props());
        let row = IterationRecord {
            iteration: 0,
            j_t: v.total,
            j_diag: v.j_diag,
            j_gamma: v.j_gamma,
            delta_j: 0.0,
            sigma: 0.0,
            n_props,
            wall_s: 0.0,
            metrics: Some(metrics.clone()),
        };
        OptimizationRecord { rows: vec![row], converged: false }.write_csv(&dir.join("convergence.csv"))?;
    }
    std::fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(&metrics)?)?;

    let dynamics = stage(
        "analysis",
        expectation_series(
            &propagator,
            &system.params,
            &system.logical,
            &field,
            &system.logical.state(0),
            config.output.dynamics_stride,
        ),
    )?;
    write_dynamics_csv(&dir.join("dynamics_00.csv"), &dynamics)?;

    let summary = RunSummary::new(
        scheme,
        field.duration(),
        simplex_record.as_ref().map_or(0, |r| r.n_props()),
        krotov_record.as_ref().map_or(0, |r| r.iterations()),
        &metrics,
    );
    std::fs::write(dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)?)?;
    Ok(RunOutcome {
        dir,
        summary,
        metrics,
        final_field: field,
        simplex: simplex_record,
        krotov: krotov_record,
        peak_cavity_population: peak_cavity_population(&dynamics),
    })
}

/// Propagates a pulse file and analyzes the resulting gate.
pub fn analyze_pulse(config: &RunConfig, field: &ControlField) -> Result<(GateMetrics, f64)> {
    let system = TransmonSystem::new(config.system.clone())?;
    let propagator = Propagator::new(&system).with_execution(config.execution);
    let gate = gate_of(&propagator, &system, field)?;
    let reference = config.target_phases.map(GateMatrix::from_phases);
    let metrics = analyze(&gate, reference.as_ref(), config.multi_start())?;
    let dynamics = expectation_series(&propagator, &system.params, &system.logical, field, &system.logical.state(0), 10)?;
    Ok((metrics, peak_cavity_population(&dynamics)))
}

/// Collects run summaries from run directories or directories containing them.
pub fn collect_summaries(paths: &[PathBuf]) -> Result<Vec<RunSummary>> {
    let mut out = Vec::new();
    for p in paths {
        let direct = p.join(SUMMARY_FILE);
        if direct.is_file() {
            out.push(read_summary(&direct)?);
            continue;
        }
        let mut children: Vec<PathBuf> = std::fs::read_dir(p)?
            .filter_map(|e| e.ok().map(|e| e.path().join(SUMMARY_FILE)))
            .filter(|f| f.is_file())
            .collect();
        children.sort();
        for c in children {
            out.push(read_summary(&c)?);
        }
    }
    Ok(out)
}

fn read_summary(path: &Path) -> Result<RunSummary> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format { path: path.to_owned(), message: e.to_string() })
}

pub const REPORT_COLUMNS: [&str; 6] = ["scheme", "T [ns]", "prop.", "eps_C", "eps_pop", "eps_avg"];

/// Aligned text table and CSV of the summaries, ordered by scheme.
pub fn report(summaries: &[RunSummary]) -> Result<(String, String)> {
    if summaries.is_empty() {
        return Err(Error::EmptyReport("no run summaries".into()));
    }
    let mut rows: Vec<&RunSummary> = summaries.iter().collect();
    rows.sort_by_key(|s| s.scheme);
    let cells: Vec<[String; 6]> = rows
        .iter()
        .map(|s| {
            [
                s.scheme.to_string(),
                format!("{:.1}", s.duration_ns),
                s.total_propagations.to_string(),
                format!("{:.2e}", s.eps_c),
                format!("{:.2e}", s.eps_pop),
                format!("{:.2e}", s.eps_avg),
            ]
        })
        .collect();
    let widths: Vec<usize> =
        (0..6).map(|j| cells.iter().map(|r| r[j].len()).chain([REPORT_COLUMNS[j].len()]).max().unwrap()).collect();
    let mut table = String::new();
    let line = |t: &mut String, row: [&str; 6]| {
        for (j, c) in row.iter().enumerate() {
            if j == 0 {
                write!(t, "{c:<w$}", w = widths[0]).unwrap();
            } else {
                write!(t, "  {c:>w$}", w = widths[j]).unwrap();
            }
        }
        t.push('\n');
    };
    line(&mut table, REPORT_COLUMNS);
    table.push_str(&"-".repeat(widths.iter().sum::<usize>() + 10));
    table.push('\n');
    for r in &cells {
        line(&mut table, std::array::from_fn(|j| r[j].as_str()));
    }
    let mut csv = String::from("scheme,T_ns,propagations,eps_C,eps_pop,eps_avg\n");
    for s in rows {
        writeln!(csv, "{},{},{},{:e},{:e},{:e}", s.scheme, s.duration_ns, s.total_propagations, s.eps_c, s.eps_pop, s.eps_avg)
            .unwrap();
    }
    Ok((table, csv))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_names_roundtrip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!(matches!("nope".parse::<Scheme>(), Err(Error::Config(_))));
    }

    #[test]
    fn missing_krotov_section_is_a_config_error() {
        let cfg = RunConfig::from_toml("[pulse]\npeak_amplitude = 300\nduration = 200\n").unwrap();
        let err = cfg.validate(Scheme::DirectGeo).unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("[krotov]")), "{err}");
        assert!(cfg.validate(Scheme::Propagate).is_ok());
    }

    #[test]
    fn pulse_source_must_be_unique() {
        let both = "[pulse]\npeak_amplitude = 300\nduration = 200\nfile = \"p.dat\"\n";
        let cfg = RunConfig::from_toml(both).unwrap();
        assert!(matches!(cfg.validate(Scheme::Propagate), Err(Error::Config(_))));
        let none = RunConfig::from_toml("[pulse]\n").unwrap();
        assert!(matches!(none.validate(Scheme::Propagate), Err(Error::Config(_))));
        let file = RunConfig::from_toml("[pulse]\nfile = \"p.dat\"\n[simplex]\n").unwrap();
        assert!(matches!(file.validate(Scheme::Simplex), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml("[pulse]\npeak_amplitude = 300\nduration = 200\n[krotov]\nlambda = 1\n").unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("lambda")), "{err}");
    }

    #[test]
    fn preset_sets_truncation_and_step() {
        let mut cfg = RunConfig::new(PulseSection { peak_amplitude: Some(300.0), duration: Some(200.0), file: None });
        cfg.apply_preset(Preset::Reduced);
        assert_eq!((cfg.system.qubit_levels, cfg.system.cavity_levels, cfg.dt), (3, 15, 0.05));
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    fn summary(scheme: Scheme, t: f64, evals: usize, iters: usize) -> RunSummary {
        let m = GateMetrics {
            gamma: 0.0,
            concurrence: 0.5,
            eps_c: 0.5,
            eps_pop: 1e-3,
            eps_avg: 2e-2,
            phases: [0.0; 4],
            target_phases: [0.0; 4],
            weyl_c1: 0.0,
        };
        RunSummary::new(scheme, t, evals, iters, &m)
    }

    #[test]
    fn propagation_bookkeeping() {
        assert_eq!(summary(Scheme::HybridSm, 185.0, 116, 201).total_propagations, 518);
        assert_eq!(summary(Scheme::HybridGeo, 185.0, 116, 92).total_propagations, 300);
        assert_eq!(summary(Scheme::DirectGeo, 200.0, 0, 5516).total_propagations, 11032);
    }

    #[test]
    fn report_orders_rows_and_rejects_empty() {
        let rows: Vec<RunSummary> =
            Scheme::ALL.iter().rev().map(|&s| summary(s, 200.0, 0, 1)).collect();
        let (table, csv) = report(&rows).unwrap();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 8);
        assert!(lines[0].starts_with("scheme"));
        assert!(lines[2].starts_with("propagate") && lines[7].starts_with("hybrid-geo"));
        assert!(lines.iter().skip(2).all(|l| l.len() == lines[0].len()));
        assert_eq!(csv.lines().count(), 7);
        assert!(matches!(report(&[]), Err(Error::EmptyReport(_))));
    }
}
