//! Experiment orchestration: a declarative configuration expands into a
//! deterministic grid of (algorithm, ε, trial) cells, trials run in
//! parallel with per-trial seeds derived from the base seed, and results
//! land in fixed-format CSV files plus optional per-trial event logs and
//! plot-ready series files.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algos::{self, AlgoError, AlgoKind, AlgoParams, RunOutcome, RunSeeds};
use crate::env::{best_arm, eps_best_set, expected_return, Dynamics, EnvError, Instance};
use crate::estimation::{RadiusMode, ZetaMode};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Algo(#[from] AlgoError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {what}: {detail}")]
    Parse { what: String, detail: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Instance either written out inline or referenced by file path.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceSource {
    File { file: PathBuf },
    Inline(Instance),
}

impl InstanceSource {
    pub fn resolve(&self) -> Result<Instance, HarnessError> {
        match self {
            InstanceSource::Inline(instance) => Ok(instance.clone()),
            InstanceSource::File { file } => {
                let text = fs::read_to_string(file).map_err(io_err(file))?;
                serde_json::from_str(&text).map_err(|e| HarnessError::Parse {
                    what: format!("instance file {}", file.display()),
                    detail: e.to_string(),
                })
            }
        }
    }
}

fn default_eps_grid() -> Vec<f64> {
    (1..=12).map(|k| 0.03 * 1.35f64.powi(k)).collect()
}
fn default_delta() -> f64 {
    0.05
}
fn default_gamma() -> u64 {
    6
}
fn default_nu() -> f64 {
    1.0
}
fn default_trials() -> usize {
    20
}
fn default_mult() -> u64 {
    1
}
fn default_cap() -> u64 {
    1_000_000_000
}
fn default_true() -> bool {
    true
}
fn default_radius() -> RadiusMode {
    RadiusMode::Tight
}
fn default_zeta() -> ZetaMode {
    ZetaMode::Balanced
}

/// Declarative sweep description. Unset fields fall back to the benchmark
/// defaults; `nu` rescales the segment-length beliefs handed to the
/// algorithms without touching the environment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSource,
    pub algorithms: Vec<AlgoKind>,
    #[serde(default = "default_eps_grid")]
    pub eps_grid: Vec<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_gamma")]
    pub gamma: u64,
    /// Detection window; derived as believed `L_min/(3γ)` rounded to even
    /// when absent.
    #[serde(default)]
    pub window: Option<u64>,
    /// Detection threshold; the per-cell false-alarm formula value when
    /// absent.
    #[serde(default)]
    pub threshold_b: Option<f64>,
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_radius")]
    pub radius_mode: RadiusMode,
    #[serde(default = "default_zeta")]
    pub zeta: ZetaMode,
    #[serde(default = "default_mult")]
    pub lcd_window_mult: u64,
    #[serde(default = "default_cap")]
    pub step_cap: u64,
    #[serde(default)]
    pub allow_violation: bool,
    #[serde(default = "default_true")]
    pub record_events: bool,
}

/// The benchmark reproduction sweep: rotated-basis instance in d = 2 at
/// angle π/8, segments of 3000 or 5000 steps (80/20), δ = 0.05, γ = 6,
/// derived window 166, formula threshold, doubled detector window, all four
/// headline algorithms, 20 trials per cell.
pub fn paper_scaled_profile() -> ExperimentConfig {
    let instance = crate::env::make_example_5_1(2, std::f64::consts::FRAC_PI_8)
        .expect("benchmark instance is valid");
    ExperimentConfig {
        instance: InstanceSource::Inline(instance),
        algorithms: vec![
            AlgoKind::PsebaiPlus,
            AlgoKind::Nebai,
            AlgoKind::Debai,
            AlgoKind::DebaiBeta,
        ],
        eps_grid: default_eps_grid(),
        delta: default_delta(),
        gamma: default_gamma(),
        window: None,
        threshold_b: None,
        nu: default_nu(),
        trials: default_trials(),
        base_seed: 0x5EED_CAB1E,
        radius_mode: default_radius(),
        zeta: default_zeta(),
        lcd_window_mult: 2,
        step_cap: default_cap(),
        allow_violation: false,
        record_events: true,
    }
}

/// One (algorithm, ε) cell with the fully resolved run parameters.
#[derive(Debug, Clone)]
pub struct CellPlan {
    pub algo: AlgoKind,
    pub eps_index: usize,
    pub eps: f64,
    pub params: AlgoParams,
}

/// Validated expansion of a configuration.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub instance: Instance,
    pub cells: Vec<CellPlan>,
    /// ε-best arm sets of the true instance, one per grid position.
    pub eps_best: Vec<Vec<usize>>,
    pub trials: usize,
    pub base_seed: u64,
    pub record_events: bool,
    pub warnings: Vec<String>,
}

const VALID_NAMES: &str = "nebai, psebai, psebai_plus, debai, debai_beta";

fn scale_belief(l: u64, nu: f64) -> u64 {
    ((l as f64 * nu).round() as u64).max(1)
}

/// Validates the configuration and expands it into runnable cells.
pub fn plan(config: &ExperimentConfig) -> Result<ExperimentPlan, HarnessError> {
    let bad = |msg: String| Err(HarnessError::Config(msg));
    if config.algorithms.is_empty() {
        return bad(format!(
            "no algorithms selected; valid names: {VALID_NAMES}"
        ));
    }
    for (i, a) in config.algorithms.iter().enumerate() {
        if config.algorithms[..i].contains(a) {
            return bad(format!("algorithm {a} listed twice"));
        }
    }
    if config.trials == 0 {
        return bad("trials must be at least 1".into());
    }
    if config.eps_grid.is_empty() {
        return bad("eps grid is empty".into());
    }
    if config.eps_grid.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return bad(format!(
            "eps grid must be positive, got {:?}",
            config.eps_grid
        ));
    }
    if !(config.delta > 0.0 && config.delta < 1.0) {
        return bad(format!("delta = {} outside (0, 1)", config.delta));
    }
    if !(config.nu.is_finite() && config.nu > 0.0) {
        return bad(format!(
            "belief multiplier nu = {} must be positive",
            config.nu
        ));
    }
    let instance = config.instance.resolve()?;
    instance.validate()?;

    let l_min = scale_belief(instance.lmin, config.nu);
    let l_max = scale_belief(instance.lmax, config.nu).max(l_min);
    let window = match config.window {
        Some(w) => {
            if w < 2 || w % 2 != 0 {
                return bad(format!("window w = {w} must be even and at least 2"));
            }
            w
        }
        None => crate::bounds::default_window(l_min, config.gamma).max(2),
    };

    let mut warnings = Vec::new();
    let uses_detection = config
        .algorithms
        .iter()
        .any(|a| matches!(a, AlgoKind::Psebai | AlgoKind::PsebaiPlus));
    if uses_detection && 3 * window * config.gamma > l_min {
        if config.allow_violation {
            warnings.push(format!(
                "detectability violated: 3wγ = {} exceeds believed L_min = {l_min}; \
                 running anyway as requested",
                3 * window * config.gamma
            ));
        } else {
            return bad(format!(
                "detectability requires 3wγ ≤ L_min ({} > {l_min}); \
                 pass allow_violation to run anyway",
                3 * window * config.gamma
            ));
        }
    }

    let delta_c = instance.delta_c();
    let mut cells = Vec::new();
    let mut worst_b = 0.0f64;
    for algo in &config.algorithms {
        for (eps_index, &eps) in config.eps_grid.iter().enumerate() {
            let threshold = match config.threshold_b {
                Some(b) => {
                    if !(b > 0.0 && b.is_finite()) {
                        return bad(format!("threshold b = {b} must be positive"));
                    }
                    b
                }
                None => {
                    let tau = crate::bounds::tau_star(
                        instance.num_contexts(),
                        instance.num_arms(),
                        l_max as f64,
                        eps,
                        config.delta,
                    );
                    let dfae = crate::bounds::delta_fae(
                        config.gamma,
                        config.delta,
                        tau,
                        instance.num_arms(),
                    );
                    crate::bounds::threshold_b(window as f64, instance.dim(), dfae)
                        .map_err(|e| HarnessError::Config(e.to_string()))?
                }
            };
            if matches!(algo, AlgoKind::Psebai | AlgoKind::PsebaiPlus) {
                worst_b = worst_b.max(threshold);
            }
            cells.push(CellPlan {
                algo: *algo,
                eps_index,
                eps,
                params: AlgoParams {
                    eps,
                    delta: config.delta,
                    gamma: config.gamma,
                    window,
                    threshold_b: threshold,
                    lcd_window_mult: config.lcd_window_mult,
                    l_min,
                    l_max,
                    num_contexts: instance.num_contexts(),
                    radius_mode: config.radius_mode,
                    zeta: config.zeta,
                    dynamics: if algo.needs_full_info() {
                        Dynamics::FullInfo
                    } else {
                        Dynamics::Hidden
                    },
                    step_cap: config.step_cap,
                    allow_violation: config.allow_violation,
                    record_pulls: false,
                    shadow_check: false,
                    debai_check_every_step: false,
                },
            });
        }
    }
    if uses_detection && 2.0 * worst_b > delta_c {
        warnings.push(format!(
            "distinguishability is not certified: 2b = {:.6} exceeds the context \
             separation {delta_c:.6}, so context changes may go undetected",
            2.0 * worst_b
        ));
    }

    let eps_best = config
        .eps_grid
        .iter()
        .map(|&eps| eps_best_set(&instance, eps))
        .collect();
    Ok(ExperimentPlan {
        instance,
        cells,
        eps_best,
        trials: config.trials,
        base_seed: config.base_seed,
        record_events: config.record_events,
        warnings,
    })
}

fn splitmix_step(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(parts: &[u64]) -> u64 {
    let mut state = 0x243F_6A88_85A3_08D3;
    for &p in parts {
        state = splitmix_step(state ^ p);
    }
    state
}

/// Per-trial key: every (algorithm, ε index, trial) triple gets its own
/// stream, derived only from the base seed.
pub fn trial_key(base_seed: u64, algo: AlgoKind, eps_index: usize, trial: usize) -> u64 {
    mix(&[base_seed, algo.id(), eps_index as u64, trial as u64])
}

fn trial_seeds(key: u64) -> RunSeeds {
    RunSeeds {
        env: mix(&[key, 1]),
        arm: mix(&[key, 2]),
    }
}

/// One trial's outcome row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub algorithm: AlgoKind,
    pub seed: u64,
    pub eps_index: usize,
    pub eps: f64,
    pub tau: u64,
    pub s_tau: u64,
    pub l_tau: u64,
    pub arm: Option<usize>,
    /// Membership of the recommendation in the true instance's ε-best set.
    pub correct: bool,
    pub cap_hit: bool,
    pub wall_ms: f64,
    pub event_log: Option<String>,
}

/// Results plus any validation warnings raised while planning.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<TrialRecord>,
    pub warnings: Vec<String>,
}

/// Runs the full grid on `jobs` worker threads. Results are ordered by
/// (algorithm position, ε index, trial) regardless of the thread count, and
/// a panicking trial is recorded as incorrect instead of aborting the
/// sweep. With an output directory: writes `config.json` (resolved),
/// `results.csv`, `summary.csv`, and per-trial event logs under `logs/`.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: Option<&Path>,
    jobs: usize,
) -> Result<ExperimentOutput, HarnessError> {
    let plan = plan(config)?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        if plan.record_events {
            let logs = dir.join("logs");
            fs::create_dir_all(&logs).map_err(io_err(&logs))?;
        }
        let mut resolved = config.clone();
        resolved.instance = InstanceSource::Inline(plan.instance.clone());
        let path = dir.join("config.json");
        let text = serde_json::to_string_pretty(&resolved).expect("config serializes");
        fs::write(&path, text).map_err(io_err(&path))?;
    }

    let tasks: Vec<(usize, usize)> = (0..plan.cells.len())
        .flat_map(|c| (0..plan.trials).map(move |t| (c, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?;
    let records: Vec<TrialRecord> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(cell, trial)| run_one(&plan, cell, trial, out_dir))
            .collect()
    });

    if let Some(dir) = out_dir {
        write_results_csv(&dir.join("results.csv"), &records)?;
        write_summary_csv(&dir.join("summary.csv"), &records)?;
    }
    Ok(ExperimentOutput {
        records,
        warnings: plan.warnings,
    })
}

fn run_one(
    plan: &ExperimentPlan,
    cell: usize,
    trial: usize,
    out_dir: Option<&Path>,
) -> TrialRecord {
    let cell = &plan.cells[cell];
    let key = trial_key(plan.base_seed, cell.algo, cell.eps_index, trial);
    let seeds = trial_seeds(key);
    let started = Instant::now();
    let run =
        std::panic::catch_unwind(|| algos::run(cell.algo, &plan.instance, &cell.params, seeds));
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;
    let mut record = TrialRecord {
        algorithm: cell.algo,
        seed: key,
        eps_index: cell.eps_index,
        eps: cell.eps,
        tau: 0,
        s_tau: 0,
        l_tau: 0,
        arm: None,
        correct: false,
        cap_hit: false,
        wall_ms,
        event_log: None,
    };
    let result = match run {
        Ok(Ok(result)) => result,
        // Configuration errors are caught at planning time; a per-trial
        // error or panic is recorded as an incorrect trial.
        Ok(Err(_)) | Err(_) => return record,
    };
    record.tau = result.tau;
    record.s_tau = result.s_tau;
    record.l_tau = result.l_tau;
    record.arm = result.arm;
    record.correct = result
        .arm
        .is_some_and(|a| plan.eps_best[cell.eps_index].contains(&a));
    record.cap_hit = result.outcome == RunOutcome::CapExceeded;
    if plan.record_events {
        if let Some(dir) = out_dir {
            let rel = format!(
                "logs/{}_e{:02}_t{:03}.jsonl",
                cell.algo, cell.eps_index, trial
            );
            if write_event_log(&dir.join(&rel), &result.events).is_ok() {
                record.event_log = Some(rel);
            }
        }
    }
    record
}

fn write_event_log(path: &Path, events: &[algos::Event]) -> Result<(), HarnessError> {
    let mut out = Vec::with_capacity(events.len() * 48);
    for event in events {
        serde_json::to_writer(&mut out, event).expect("events serialize");
        out.push(b'\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Nine significant digits, the documented float format of every CSV.
fn fmt_float(x: f64) -> String {
    format!("{x:.8e}")
}

const RESULTS_HEADER: [&str; 12] = [
    "algorithm",
    "seed",
    "eps_index",
    "eps",
    "tau",
    "s_tau",
    "l_tau",
    "arm",
    "correct",
    "cap_hit",
    "wall_ms",
    "event_log",
];

fn write_results_csv(path: &Path, records: &[TrialRecord]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::Parse {
        what: path.display().to_string(),
        detail: e.to_string(),
    })?;
    let fail = |e: csv::Error| HarnessError::Parse {
        what: path.display().to_string(),
        detail: e.to_string(),
    };
    w.write_record(RESULTS_HEADER).map_err(fail)?;
    for r in records {
        w.write_record([
            r.algorithm.name().to_string(),
            r.seed.to_string(),
            r.eps_index.to_string(),
            fmt_float(r.eps),
            r.tau.to_string(),
            r.s_tau.to_string(),
            r.l_tau.to_string(),
            r.arm.map_or(String::new(), |a| a.to_string()),
            r.correct.to_string(),
            r.cap_hit.to_string(),
            fmt_float(r.wall_ms),
            r.event_log.clone().unwrap_or_default(),
        ])
        .map_err(fail)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let values: Vec<f64> = values.collect();
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0, 0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    (mean, var.sqrt(), n)
}

/// Cell key groups preserving first-appearance order.
fn cells_in_order(records: &[TrialRecord]) -> Vec<(AlgoKind, usize)> {
    let mut keys = Vec::new();
    for r in records {
        let key = (r.algorithm, r.eps_index);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys
}

/// Per-cell aggregate of a result table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algorithm: AlgoKind,
    pub eps_index: usize,
    pub eps: f64,
    pub trials: usize,
    pub correct: usize,
    pub cap_hits: usize,
    pub mean_tau: f64,
    pub std_tau: f64,
    pub mean_s_tau: f64,
    pub mean_l_tau: f64,
    pub std_l_tau: f64,
    pub mean_wall_ms: f64,
}

/// Aggregates trials into one row per (algorithm, ε) cell; standard
/// deviations are sample deviations, zero for singleton cells.
pub fn summarize(records: &[TrialRecord]) -> Vec<SummaryRow> {
    cells_in_order(records)
        .into_iter()
        .map(|(algo, eps_index)| {
            let cell: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.algorithm == algo && r.eps_index == eps_index)
                .collect();
            let (mean_tau, std_tau, n) = mean_std(cell.iter().map(|r| r.tau as f64));
            let (mean_s_tau, _, _) = mean_std(cell.iter().map(|r| r.s_tau as f64));
            let (mean_l_tau, std_l_tau, _) = mean_std(cell.iter().map(|r| r.l_tau as f64));
            let (mean_wall_ms, _, _) = mean_std(cell.iter().map(|r| r.wall_ms));
            SummaryRow {
                algorithm: algo,
                eps_index,
                eps: cell[0].eps,
                trials: n,
                correct: cell.iter().filter(|r| r.correct).count(),
                cap_hits: cell.iter().filter(|r| r.cap_hit).count(),
                mean_tau,
                std_tau,
                mean_s_tau,
                mean_l_tau,
                std_l_tau,
                mean_wall_ms,
            }
        })
        .collect()
}

fn write_summary_csv(path: &Path, records: &[TrialRecord]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::Parse {
        what: path.display().to_string(),
        detail: e.to_string(),
    })?;
    let fail = |e: csv::Error| HarnessError::Parse {
        what: path.display().to_string(),
        detail: e.to_string(),
    };
    w.write_record([
        "algorithm",
        "eps_index",
        "eps",
        "trials",
        "correct",
        "cap_hits",
        "mean_tau",
        "std_tau",
        "mean_s_tau",
        "mean_l_tau",
        "std_l_tau",
        "mean_wall_ms",
    ])
    .map_err(fail)?;
    for row in summarize(records) {
        w.write_record([
            row.algorithm.name().to_string(),
            row.eps_index.to_string(),
            fmt_float(row.eps),
            row.trials.to_string(),
            row.correct.to_string(),
            row.cap_hits.to_string(),
            fmt_float(row.mean_tau),
            fmt_float(row.std_tau),
            fmt_float(row.mean_s_tau),
            fmt_float(row.mean_l_tau),
            fmt_float(row.std_l_tau),
            fmt_float(row.mean_wall_ms),
        ])
        .map_err(fail)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Reads back a results directory written by [`run_experiment`].
pub fn load_results(dir: &Path) -> Result<(ExperimentConfig, Vec<TrialRecord>), HarnessError> {
    let config_path = dir.join("config.json");
    let text = fs::read_to_string(&config_path).map_err(io_err(&config_path))?;
    let config: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| HarnessError::Parse {
            what: config_path.display().to_string(),
            detail: e.to_string(),
        })?;
    let results_path = dir.join("results.csv");
    let mut reader = csv::Reader::from_path(&results_path).map_err(|e| HarnessError::Parse {
        what: results_path.display().to_string(),
        detail: e.to_string(),
    })?;
    let parse_err = |detail: String| HarnessError::Parse {
        what: results_path.display().to_string(),
        detail,
    };
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| parse_err(e.to_string()))?;
        if row.len() != RESULTS_HEADER.len() {
            return Err(parse_err(format!(
                "expected {} fields, found {}",
                RESULTS_HEADER.len(),
                row.len()
            )));
        }
        let field = |i: usize| row.get(i).unwrap_or_default();
        let record = TrialRecord {
            algorithm: field(0).parse().map_err(|e: String| parse_err(e))?,
            seed: field(1)
                .parse()
                .map_err(|e| parse_err(format!("seed: {e}")))?,
            eps_index: field(2)
                .parse()
                .map_err(|e| parse_err(format!("eps_index: {e}")))?,
            eps: field(3)
                .parse()
                .map_err(|e| parse_err(format!("eps: {e}")))?,
            tau: field(4)
                .parse()
                .map_err(|e| parse_err(format!("tau: {e}")))?,
            s_tau: field(5)
                .parse()
                .map_err(|e| parse_err(format!("s_tau: {e}")))?,
            l_tau: field(6)
                .parse()
                .map_err(|e| parse_err(format!("l_tau: {e}")))?,
            arm: match field(7) {
                "" => None,
                v => Some(v.parse().map_err(|e| parse_err(format!("arm: {e}")))?),
            },
            correct: field(8)
                .parse()
                .map_err(|e| parse_err(format!("correct: {e}")))?,
            cap_hit: field(9)
                .parse()
                .map_err(|e| parse_err(format!("cap_hit: {e}")))?,
            wall_ms: field(10)
                .parse()
                .map_err(|e| parse_err(format!("wall_ms: {e}")))?,
            event_log: match field(11) {
                "" => None,
                v => Some(v.to_string()),
            },
        };
        records.push(record);
    }
    Ok((config, records))
}

/// Plot-data flavors: stopping time against ε, and context samples against
/// the inverse squared effective gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    ComplexityVsEps,
    ContextSamplesVsInvgap,
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            PlotKind::ComplexityVsEps => "complexity_vs_eps",
            PlotKind::ContextSamplesVsInvgap => "context_samples_vs_invgap",
        }
    }
}

impl std::str::FromStr for PlotKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "complexity_vs_eps" => Ok(PlotKind::ComplexityVsEps),
            "context_samples_vs_invgap" => Ok(PlotKind::ContextSamplesVsInvgap),
            other => Err(format!(
                "unknown plot kind {other:?}; valid kinds: complexity_vs_eps, \
                 context_samples_vs_invgap"
            )),
        }
    }
}

/// Smallest positive mean-return gap of the instance; ties for the best arm
/// contribute zero.
pub fn min_gap(instance: &Instance) -> f64 {
    let star = best_arm(instance);
    let mu_star = expected_return(instance, star);
    (0..instance.num_arms())
        .filter(|&i| i != star)
        .map(|i| mu_star - expected_return(instance, i))
        .fold(f64::INFINITY, f64::min)
}

/// Writes one `series_<kind>_<algorithm>.dat` per algorithm present, rows
/// `x mean stddev` per ε cell. Returns the written paths.
pub fn emit_plot_data(
    records: &[TrialRecord],
    instance: &Instance,
    kind: PlotKind,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::Config("result table is empty".into()));
    }
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let delta_min = min_gap(instance);
    let mut paths = Vec::new();
    for algo in AlgoKind::ALL {
        let rows: Vec<&TrialRecord> = records.iter().filter(|r| r.algorithm == algo).collect();
        if rows.is_empty() {
            continue;
        }
        let mut eps_cells: Vec<(usize, f64)> = Vec::new();
        for r in &rows {
            if !eps_cells.iter().any(|(i, _)| *i == r.eps_index) {
                eps_cells.push((r.eps_index, r.eps));
            }
        }
        eps_cells.sort_by_key(|cell| cell.0);
        let path = out_dir.join(format!("series_{}_{}.dat", kind.name(), algo));
        let mut out = String::new();
        for (eps_index, eps) in eps_cells {
            let (x, values): (f64, Vec<f64>) = match kind {
                PlotKind::ComplexityVsEps => (
                    eps,
                    rows.iter()
                        .filter(|r| r.eps_index == eps_index)
                        .map(|r| r.tau as f64)
                        .collect(),
                ),
                PlotKind::ContextSamplesVsInvgap => (
                    1.0 / (delta_min + eps).powi(2),
                    rows.iter()
                        .filter(|r| r.eps_index == eps_index)
                        .map(|r| r.l_tau as f64)
                        .collect(),
                ),
            };
            let (mean, std, _) = mean_std(values.into_iter());
            let mut line = String::new();
            line.push_str(&fmt_float(x));
            line.push(' ');
            line.push_str(&fmt_float(mean));
            line.push(' ');
            line.push_str(&fmt_float(std));
            line.push('\n');
            out.push_str(&line);
        }
        let mut file = fs::File::create(&path).map_err(io_err(&path))?;
        file.write_all(out.as_bytes()).map_err(io_err(&path))?;
        paths.push(path);
    }
    Ok(paths)
}
