//! Experiment configs and the optimize, sweep, robustness and validate jobs.
//!
//! Configs are TOML with a strict schema: unknown keys are errors. Relative
//! paths inside a config are resolved against the config file's directory.
//! Every job writes `config.resolved.toml` next to its artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::{CostWeights, HeraldMetrics, Problem};
use crate::circuit::{CircuitSpec, TargetKind, DEFAULT_R_ADD, DEFAULT_TAU_SUB};
use crate::optimizer::{optimize, robustness_study, IterationRecord, OptimizerOptions, RestartSummary, Termination};
use crate::validate::{run_validation, ValidationOptions, ValidationReport};
use crate::{Error, Result};

pub const TRACE_FILE: &str = "trace.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.toml";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const ROBUSTNESS_FILE: &str = "robustness.csv";

/// Gadget placement: a count spread round-robin over the core modes, or an
/// explicit list of core mode indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GadgetSpec {
    Count(usize),
    Modes(Vec<usize>),
}

impl Default for GadgetSpec {
    fn default() -> Self {
        GadgetSpec::Count(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub additions: Vec<usize>,
    pub subtractions: Vec<usize>,
    pub heralds: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { additions: (0..=4).collect(), subtractions: (0..=2).collect(), heralds: vec![1, 2, 3] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessConfig {
    /// `summary.json` of a previous optimize run.
    pub optimum: PathBuf,
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Defaults to the optimizer seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_levels() -> Vec<f64> {
    vec![0.001, 0.005, 0.01]
}

fn default_trials() -> usize {
    200
}

fn default_n_herald() -> usize {
    2
}

fn default_r_add() -> f64 {
    DEFAULT_R_ADD
}

fn default_tau_sub() -> f64 {
    DEFAULT_TAU_SUB
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub target: TargetKind,
    #[serde(default = "default_n_herald")]
    pub n_herald: usize,
    #[serde(default)]
    pub additions: GadgetSpec,
    #[serde(default)]
    pub subtractions: GadgetSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub herald_counts: Option<Vec<u32>>,
    #[serde(default = "default_r_add")]
    pub r_add: f64,
    #[serde(default = "default_tau_sub")]
    pub tau_sub: f64,
    #[serde(default)]
    pub postselect: bool,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub weights: CostWeights,
    #[serde(default)]
    pub optimizer: OptimizerOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robustness: Option<RobustnessConfig>,
}

fn config_error(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parses a config file and anchors its relative paths at the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config =
            Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), strip(&e))))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.output_dir = anchor(base, &config.output_dir);
        if let Some(r) = config.robustness.as_mut() {
            r.optimum = anchor(base, &r.optimum);
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Circuit for explicit gadget counts, keeping the configured constants.
    pub fn circuit(&self, additions: &GadgetSpec, subtractions: &GadgetSpec, n_herald: usize) -> CircuitSpec {
        let mut spec = CircuitSpec::new(self.target.n_qubits(), n_herald);
        spec.r_add = self.r_add;
        spec.tau_sub = self.tau_sub;
        spec = match additions {
            GadgetSpec::Count(k) => spec.with_additions(*k),
            GadgetSpec::Modes(m) => CircuitSpec { additions: m.clone(), ..spec },
        };
        spec = match subtractions {
            GadgetSpec::Count(k) => spec.with_subtractions(*k),
            GadgetSpec::Modes(m) => CircuitSpec { subtractions: m.clone(), ..spec },
        };
        spec.herald_counts = self.herald_counts.clone();
        spec
    }

    pub fn problem(&self) -> Result<Problem> {
        let spec = self.circuit(&self.additions, &self.subtractions, self.n_herald);
        Problem::new(spec, self.target.state(), self.weights, self.postselect)
    }

    fn check_weights(&self) -> Result<()> {
        let w = &self.weights;
        if ![w.w1, w.w2, w.eps].iter().all(|x| x.is_finite() && *x >= 0.0) {
            return Err(Error::Config("weights must be finite and non-negative".into()));
        }
        Ok(())
    }

    fn check_output_dir(&self) -> Result<()> {
        if self.output_dir.exists() && !self.output_dir.is_dir() {
            return Err(Error::Config(format!("output_dir {} is not a directory", self.output_dir.display())));
        }
        Ok(())
    }

    /// Everything an optimize job needs, checked before any computation.
    pub fn validate_optimize(&self) -> Result<()> {
        self.check_weights()?;
        self.check_output_dir()?;
        self.optimizer.validate().map_err(config_error)?;
        self.problem().map_err(config_error)?;
        Ok(())
    }

    pub fn validate_sweep(&self) -> Result<()> {
        self.check_weights()?;
        self.check_output_dir()?;
        self.optimizer.validate().map_err(config_error)?;
        let sweep = self.sweep.clone().unwrap_or_default();
        if sweep.additions.is_empty() || sweep.subtractions.is_empty() || sweep.heralds.is_empty() {
            return Err(Error::Config("sweep ranges must be non-empty".into()));
        }
        if self.herald_counts.is_some() {
            return Err(Error::Config("herald_counts cannot be combined with a herald sweep".into()));
        }
        for &h in &sweep.heralds {
            self.circuit(&GadgetSpec::Count(0), &GadgetSpec::Count(0), h)
                .validate()
                .map_err(config_error)?;
        }
        Ok(())
    }

    pub fn validate_robustness(&self) -> Result<()> {
        self.check_output_dir()?;
        let r = self
            .robustness
            .as_ref()
            .ok_or_else(|| Error::Config("missing [robustness] table".into()))?;
        if !r.optimum.is_file() {
            return Err(Error::Config(format!("robustness.optimum {} does not exist", r.optimum.display())));
        }
        if r.levels.is_empty() || !r.levels.iter().all(|d| d.is_finite() && *d >= 0.0) {
            return Err(Error::Config("robustness.levels must be non-empty, finite and non-negative".into()));
        }
        if r.trials == 0 {
            return Err(Error::Config("robustness.trials must be positive".into()));
        }
        Ok(())
    }
}

fn strip(e: &Error) -> String {
    match e {
        Error::Config(s) => s.trim().to_string(),
        other => other.to_string(),
    }
}

fn anchor(base: &Path, p: &Path) -> PathBuf {
    let joined = if p.is_relative() { base.join(p) } else { p.to_path_buf() };
    std::path::absolute(&joined).unwrap_or(joined)
}

/// Command-line overrides applied on top of a loaded config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl RunOptions {
    pub fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            config.optimizer.seed = seed;
            if let Some(r) = config.robustness.as_mut() {
                r.seed = Some(seed);
            }
        }
    }
}

#[cfg(feature = "parallel")]
fn with_workers<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn with_workers<T: Send>(_workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    Ok(job())
}

fn prepare_dir(config: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(&config.output_dir)?;
    fs::write(config.output_dir.join(RESOLVED_CONFIG_FILE), config.to_toml()?)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct TraceLine<'a> {
    restart: usize,
    #[serde(flatten)]
    record: &'a IterationRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeSummary {
    pub target: TargetKind,
    pub n_qubits: usize,
    pub n_herald: usize,
    pub additions: Vec<usize>,
    pub subtractions: Vec<usize>,
    pub herald_pattern: Vec<u32>,
    pub postselect: bool,
    pub seed: u64,
    pub best_restart: usize,
    pub best_cost: f64,
    pub metrics: HeraldMetrics,
    /// Heralding probability given that every gadget fired.
    pub p_given_gadgets: f64,
    pub xi: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub restarts: Vec<RestartSummary>,
    pub wall_time_s: f64,
    pub config: ExperimentConfig,
}

/// Runs the configured optimization and writes the trace, summary and
/// resolved config into `config.output_dir`.
pub fn run_optimize(config: &ExperimentConfig, run: &RunOptions) -> Result<OptimizeSummary> {
    let mut config = config.clone();
    run.apply(&mut config);
    config.validate_optimize()?;
    let problem = config.problem()?;
    prepare_dir(&config)?;

    let start = Instant::now();
    let result = with_workers(run.workers, || optimize(&problem, &config.optimizer))??;
    let wall_time_s = start.elapsed().as_secs_f64();

    let mut trace = BufWriter::new(File::create(config.output_dir.join(TRACE_FILE))?);
    for record in &result.best.records {
        serde_json::to_writer(&mut trace, &TraceLine { restart: result.best.restart, record })?;
        trace.write_all(b"\n")?;
    }
    trace.flush()?;

    let best = &result.best;
    let summary = OptimizeSummary {
        target: config.target,
        n_qubits: problem.spec.n_qubits,
        n_herald: problem.spec.n_herald,
        additions: problem.spec.additions.clone(),
        subtractions: problem.spec.subtractions.clone(),
        herald_pattern: problem.herald_pattern().to_vec(),
        postselect: config.postselect,
        seed: config.optimizer.seed,
        best_restart: best.restart,
        best_cost: best.best_cost,
        metrics: best.best_metrics,
        p_given_gadgets: best.best_metrics.p / best.best_metrics.p_gadget,
        xi: best.best.clone(),
        iterations: best.iterations(),
        termination: best.termination,
        restarts: result.restarts.clone(),
        wall_time_s,
        config: config.clone(),
    };
    let file = BufWriter::new(File::create(config.output_dir.join(SUMMARY_FILE))?);
    serde_json::to_writer_pretty(file, &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_add: usize,
    pub n_sub: usize,
    pub n_herald: usize,
    pub p: Option<f64>,
    #[serde(rename = "F")]
    pub fidelity: Option<f64>,
    pub p_eff: Option<f64>,
    #[serde(rename = "F_eff")]
    pub fidelity_eff: Option<f64>,
    pub iterations: usize,
    pub seed: u64,
    pub feasible: bool,
    pub cost: Option<f64>,
    pub p_gadget: Option<f64>,
}

impl SweepRow {
    pub fn p_given_gadgets(&self) -> Option<f64> {
        Some(self.p? / self.p_gadget?)
    }
}

/// One optimization per grid cell, in grid order (additions outermost,
/// heralds innermost). Cell `k` uses seed `optimizer.seed + k`.
pub fn run_sweep(config: &ExperimentConfig, run: &RunOptions) -> Result<Vec<SweepRow>> {
    let mut config = config.clone();
    run.apply(&mut config);
    config.validate_sweep()?;
    prepare_dir(&config)?;
    let sweep = config.sweep.clone().unwrap_or_default();
    let cells: Vec<(usize, usize, usize)> = sweep
        .additions
        .iter()
        .flat_map(|&a| {
            let heralds = &sweep.heralds;
            sweep.subtractions.iter().flat_map(move |&s| heralds.iter().map(move |&h| (a, s, h)))
        })
        .collect();

    let cell = |(k, &(n_add, n_sub, n_herald)): (usize, &(usize, usize, usize))| -> SweepRow {
        let seed = config.optimizer.seed.wrapping_add(k as u64);
        let options = OptimizerOptions { seed, ..config.optimizer.clone() };
        let spec = config.circuit(&GadgetSpec::Count(n_add), &GadgetSpec::Count(n_sub), n_herald);
        let outcome = Problem::new(spec, config.target.state(), config.weights, config.postselect)
            .and_then(|problem| optimize(&problem, &options).map(|r| (problem, r)));
        match outcome {
            Ok((problem, r)) => {
                let m = if problem.postselect {
                    r.best.best_metrics
                } else {
                    problem.report(&r.best.best).unwrap_or(r.best.best_metrics)
                };
                SweepRow {
                    n_add,
                    n_sub,
                    n_herald,
                    p: Some(m.p),
                    fidelity: Some(m.fidelity),
                    p_eff: m.p_effective,
                    fidelity_eff: m.fidelity_effective,
                    iterations: r.best.iterations(),
                    seed,
                    feasible: true,
                    cost: Some(r.best.best_cost),
                    p_gadget: Some(m.p_gadget),
                }
            }
            Err(_) => SweepRow {
                n_add,
                n_sub,
                n_herald,
                p: None,
                fidelity: None,
                p_eff: None,
                fidelity_eff: None,
                iterations: 0,
                seed,
                feasible: false,
                cost: None,
                p_gadget: None,
            },
        }
    };
    let rows: Vec<SweepRow> = with_workers(run.workers, || {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            cells.par_iter().enumerate().map(cell).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            cells.iter().enumerate().map(cell).collect()
        }
    })?;

    let mut out = csv::Writer::from_path(config.output_dir.join(SWEEP_FILE))?;
    for row in &rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub delta_level: f64,
    pub trial: usize,
    pub total_relative_change: f64,
    pub dp_rel: f64,
    pub df_rel: f64,
    pub feasible: bool,
    pub seed: u64,
}

/// Perturbs the optimum of a previous optimize run. The circuit and weights
/// come from the config embedded in that run's summary.
pub fn run_robustness(config: &ExperimentConfig, run: &RunOptions) -> Result<Vec<RobustnessRow>> {
    let mut config = config.clone();
    run.apply(&mut config);
    config.validate_robustness()?;
    let settings = config.robustness.clone().expect("validated");
    let text = fs::read_to_string(&settings.optimum)?;
    let optimum: OptimizeSummary = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: not an optimize summary: {e}", settings.optimum.display())))?;
    let problem = optimum.config.problem().map_err(config_error)?;
    if problem.n_params() != optimum.xi.len() {
        return Err(Error::Config(format!(
            "{}: {} parameters for a {}-parameter circuit",
            settings.optimum.display(),
            optimum.xi.len(),
            problem.n_params()
        )));
    }
    prepare_dir(&config)?;
    let seed = settings.seed.unwrap_or(config.optimizer.seed);
    let samples = with_workers(run.workers, || {
        robustness_study(&problem, &optimum.xi, &settings.levels, settings.trials, seed)
    })??;

    let rows: Vec<RobustnessRow> = samples
        .into_iter()
        .map(|s| RobustnessRow {
            delta_level: s.delta,
            trial: s.trial,
            total_relative_change: s.total_relative_change,
            dp_rel: s.dp_rel,
            df_rel: s.df_rel,
            feasible: s.feasible,
            seed,
        })
        .collect();
    let mut out = csv::Writer::from_path(config.output_dir.join(ROBUSTNESS_FILE))?;
    for row in &rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(rows)
}

/// Runs the oracle suite; a failing check is an [`Error::Validation`].
pub fn run_validate(options: &ValidationOptions, workers: Option<usize>) -> Result<ValidationReport> {
    let report = with_workers(workers, || run_validation(options))?;
    Ok(report)
}

/// Process exit code for a job error.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Config(_) => 2,
        Error::Infeasible => 3,
        Error::Validation(_) => 4,
        _ => 1,
    }
}
