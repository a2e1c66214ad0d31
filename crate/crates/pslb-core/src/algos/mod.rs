//! The five identification procedures as deterministic state machines over
//! the environment interface: a change-oblivious baseline (`nebai`), the
//! change-aware procedure (`psebai`), their parallel combination
//! (`psebai_plus`), and two full-information references that observe
//! contexts and changepoints directly (`debai`, `debai_beta`).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design::DesignError;
use crate::env::{Dynamics, EnvError, Instance, STREAM_ARMS};
use crate::estimation::{RadiusMode, ZetaMode};

mod debai;
mod nebai;
mod psebai;

pub use debai::{run_debai, run_debai_beta, ContextCounter};
pub use nebai::{run_nebai, NaiveState, C3};
pub use psebai::{run_psebai, run_psebai_plus};

#[derive(Debug, Error)]
pub enum AlgoError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dynamics mismatch: this procedure requires {required:?} observations")]
    DynamicsMismatch { required: Dynamics },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Design(#[from] DesignError),
}

/// Which identification procedure to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgoKind {
    Nebai,
    Psebai,
    PsebaiPlus,
    Debai,
    DebaiBeta,
}

impl AlgoKind {
    pub const ALL: [AlgoKind; 5] = [
        AlgoKind::Nebai,
        AlgoKind::Psebai,
        AlgoKind::PsebaiPlus,
        AlgoKind::Debai,
        AlgoKind::DebaiBeta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AlgoKind::Nebai => "nebai",
            AlgoKind::Psebai => "psebai",
            AlgoKind::PsebaiPlus => "psebai_plus",
            AlgoKind::Debai => "debai",
            AlgoKind::DebaiBeta => "debai_beta",
        }
    }

    /// Stable numeric tag mixed into per-run seeds.
    pub fn id(self) -> u64 {
        match self {
            AlgoKind::Nebai => 0,
            AlgoKind::Psebai => 1,
            AlgoKind::PsebaiPlus => 2,
            AlgoKind::Debai => 3,
            AlgoKind::DebaiBeta => 4,
        }
    }

    /// Whether the procedure needs context and changepoint observations.
    pub fn needs_full_info(self) -> bool {
        matches!(self, AlgoKind::Debai | AlgoKind::DebaiBeta)
    }
}

impl std::fmt::Display for AlgoKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AlgoKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nebai" => Ok(AlgoKind::Nebai),
            "psebai" => Ok(AlgoKind::Psebai),
            "psebai_plus" => Ok(AlgoKind::PsebaiPlus),
            "debai" => Ok(AlgoKind::Debai),
            "debai_beta" => Ok(AlgoKind::DebaiBeta),
            other => Err(format!(
                "unknown algorithm {other:?}; valid names: nebai, psebai, psebai_plus, debai, debai_beta"
            )),
        }
    }
}

/// Tuning inputs shared by the run functions. `l_min`, `l_max` and
/// `num_contexts` are the algorithm's beliefs and may deliberately differ
/// from the environment (misspecification experiments).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgoParams {
    pub eps: f64,
    pub delta: f64,
    /// Detection cadence: every γ-th step is a detection sample.
    pub gamma: u64,
    /// Detection window w (even). Alignment windows hold w/2 samples.
    pub window: u64,
    /// Detection and alignment threshold b.
    pub threshold_b: f64,
    /// The change detector fires only once it holds `lcd_window_mult · w`
    /// samples, and tests that many.
    pub lcd_window_mult: u64,
    pub l_min: u64,
    pub l_max: u64,
    pub num_contexts: usize,
    pub radius_mode: RadiusMode,
    pub zeta: ZetaMode,
    pub dynamics: Dynamics,
    /// Safety cap on environment steps, distinct from the procedure's own
    /// budget; hitting it is reported as a separate outcome.
    pub step_cap: u64,
    /// Permit configurations that violate the detectability requirement
    /// 3wγ ≤ L_min (robustness experiments).
    pub allow_violation: bool,
    /// Record the pulled arm index of every step into the result.
    pub record_pulls: bool,
    /// Rebuild the statistics from a parallel history after every reversion
    /// and count mismatches (diagnostic; slows the run down).
    pub shadow_check: bool,
    /// Evaluate the full-information reference's stopping rule every step
    /// instead of only at changepoints (ablation; not the literal rule).
    pub debai_check_every_step: bool,
}

impl AlgoParams {
    /// Baseline parameters for an instance: window `L_min/(3γ)` rounded to
    /// even, threshold from the false-alarm formula, beliefs taken from the
    /// instance, tight radius constants, balanced centering.
    pub fn for_instance(
        instance: &Instance,
        eps: f64,
        delta: f64,
        gamma: u64,
    ) -> Result<Self, AlgoError> {
        let window = crate::bounds::default_window(instance.lmin, gamma).max(2);
        let tau = crate::bounds::tau_star(
            instance.num_contexts(),
            instance.num_arms(),
            instance.lmax as f64,
            eps,
            delta,
        );
        let dfae = crate::bounds::delta_fae(gamma, delta, tau, instance.num_arms());
        let b = crate::bounds::threshold_b(window as f64, instance.dim(), dfae)
            .map_err(|e| AlgoError::InvalidConfig(e.to_string()))?;
        Ok(AlgoParams {
            eps,
            delta,
            gamma,
            window,
            threshold_b: b,
            lcd_window_mult: 1,
            l_min: instance.lmin,
            l_max: instance.lmax,
            num_contexts: instance.num_contexts(),
            radius_mode: RadiusMode::Tight,
            zeta: ZetaMode::Balanced,
            dynamics: Dynamics::Hidden,
            step_cap: 1_000_000_000,
            allow_violation: false,
            record_pulls: false,
            shadow_check: false,
            debai_check_every_step: false,
        })
    }

    pub(crate) fn validate_common(&self) -> Result<(), AlgoError> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(AlgoError::InvalidConfig(format!(
                "eps = {} must be positive",
                self.eps
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(AlgoError::InvalidConfig(format!(
                "delta = {} outside (0, 1)",
                self.delta
            )));
        }
        if self.l_min == 0 || self.l_max < self.l_min {
            return Err(AlgoError::InvalidConfig(format!(
                "segment-length beliefs need 1 <= l_min <= l_max, got [{}, {}]",
                self.l_min, self.l_max
            )));
        }
        if self.step_cap == 0 {
            return Err(AlgoError::InvalidConfig("step cap must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn validate_detection(&self) -> Result<(), AlgoError> {
        self.validate_common()?;
        if self.window < 2 || !self.window.is_multiple_of(2) {
            return Err(AlgoError::InvalidConfig(format!(
                "detection window w = {} must be even and at least 2",
                self.window
            )));
        }
        if self.gamma == 0 {
            return Err(AlgoError::InvalidConfig("gamma must be at least 1".into()));
        }
        if !(self.threshold_b > 0.0 && self.threshold_b.is_finite()) {
            return Err(AlgoError::InvalidConfig(format!(
                "threshold b = {} must be positive",
                self.threshold_b
            )));
        }
        if self.lcd_window_mult == 0 {
            return Err(AlgoError::InvalidConfig(
                "detector window multiplier must be at least 1".into(),
            ));
        }
        if self.num_contexts == 0 {
            return Err(AlgoError::InvalidConfig(
                "context-count belief must be at least 1".into(),
            ));
        }
        if 3 * self.window * self.gamma > self.l_min && !self.allow_violation {
            return Err(AlgoError::InvalidConfig(format!(
                "detectability requires 3wγ ≤ L_min ({} > {}); \
                 set allow_violation to run anyway",
                3 * self.window * self.gamma,
                self.l_min
            )));
        }
        Ok(())
    }
}

/// Seeds of one run. `env` drives the environment (segment lengths, context
/// draws, noise) and is shared across algorithms for paired comparisons;
/// `arm` drives the algorithm's own arm sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub env: u64,
    pub arm: u64,
}

pub(crate) fn arm_stream(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_ARMS);
    rng
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunOutcome {
    /// A stopping rule certified an arm.
    Recommended,
    /// The procedure gave up: it identified more contexts than its belief
    /// allows, or exhausted its own time budget.
    Failed,
    /// The external safety cap ended the run; the arm field carries the
    /// current best guess.
    CapExceeded,
}

/// Step counts by phase; they sum to the stopping time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCounts {
    pub warmup: u64,
    pub exploration: u64,
    pub detection: u64,
    pub alignment: u64,
}

impl PhaseCounts {
    pub fn total(&self) -> u64 {
        self.warmup + self.exploration + self.detection + self.alignment
    }
}

/// One entry of the structured per-run log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    /// Initial sampling that seeds the first context's alignment window.
    Warmup { steps: u64 },
    /// The change detector fired; `samples` is the detection-sample count
    /// at that moment.
    Alarm { t: u64, samples: u64 },
    /// Alignment resolved the post-change context.
    Alignment {
        t: u64,
        context: usize,
        is_new: bool,
    },
    /// Statistics rolled back by `steps` update slots.
    Reverted { t: u64, steps: u64 },
    /// The change-aware half stopped participating (context overflow).
    PsDead { t: u64 },
    /// The change-aware half passed its own time budget (parallel runs
    /// continue under the oblivious rule alone).
    PsExpired { t: u64 },
    /// Stopping condition held; the arm is recorded pending confirmation.
    Recorded { t: u64, arm: usize },
    /// Confirmed recommendation by the change-aware rule.
    Recommended { t: u64, arm: usize },
    /// The change-oblivious rule stopped.
    NaiveStop { t: u64, arm: usize },
    /// External safety cap reached.
    CapHit { t: u64 },
}

/// Outcome and accounting of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgoResult {
    pub kind: AlgoKind,
    pub outcome: RunOutcome,
    /// Recommended arm, or the running best guess on a cap exit; `None`
    /// only for hard failures.
    pub arm: Option<usize>,
    /// Stopping time: total environment steps consumed.
    pub tau: u64,
    /// Exploration pulls feeding the value estimates.
    pub s_tau: u64,
    /// Segments begun by the time the run ended.
    pub l_tau: u64,
    pub phases: PhaseCounts,
    pub events: Vec<Event>,
    /// Pulled arm per step, present when `record_pulls` was set.
    pub pulls: Option<Vec<u32>>,
    /// Reversion audits that failed (always 0 unless the rollback logic is
    /// broken); populated when `shadow_check` was set.
    pub shadow_failures: u32,
}

/// Runs the selected procedure on the instance.
pub fn run(
    kind: AlgoKind,
    instance: &Instance,
    params: &AlgoParams,
    seeds: RunSeeds,
) -> Result<AlgoResult, AlgoError> {
    match kind {
        AlgoKind::Nebai => run_nebai(instance, params, seeds),
        AlgoKind::Psebai => run_psebai(instance, params, seeds),
        AlgoKind::PsebaiPlus => run_psebai_plus(instance, params, seeds),
        AlgoKind::Debai => run_debai(instance, params, seeds),
        AlgoKind::DebaiBeta => run_debai_beta(instance, params, seeds),
    }
}
