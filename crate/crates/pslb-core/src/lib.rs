//! Fixed-confidence ε-best-arm identification in piecewise-stationary
//! linear bandits.
//!
//! A finite arm set X ⊂ ℝ^d is played against an environment whose latent
//! parameter vector is redrawn i.i.d. from a finite pool Θ = {θ_1, …, θ_N}
//! at changepoints; segment lengths lie in [L_min, L_max]. The expected
//! return of arm x is μ_x = Σ_j p_j xᵀθ_j, and the goal is to output, with
//! confidence 1 − δ, an arm whose μ is within ε of the best.
//!
//! Crate layout:
//! - [`design`]: G-optimal experimental design (Frank–Wolfe solver).
//! - [`env`]: instance model, noise, changepoint schedules, seeded dynamics.
//! - [`estimation`]: per-context running estimators, reversion buffer,
//!   confidence radii.
//! - [`changedetect`]: sliding-window change detection and context alignment.
//! - [`algos`]: the identification algorithms as deterministic state machines.
//! - [`bounds`]: closed-form tuning constants and hardness quantities.
//! - [`harness`]: experiment orchestration, CSV/series outputs, profiles.

pub mod algos;
pub mod bounds;
pub mod changedetect;
pub mod design;
pub mod env;
pub mod estimation;
pub mod harness;

pub use algos::{
    run, AlgoError, AlgoKind, AlgoParams, AlgoResult, Event, NaiveState, PhaseCounts, RunOutcome,
    RunSeeds,
};
pub use bounds::{
    assumption_feasible, default_window, delta_fae, hardness_terms, nc_lower_bound, tau_star,
    threshold_b, transductive_singleton_bound, BoundReport, BoundsError,
};
pub use changedetect::{half_shift_statistic, lcd, lcd_statistic, CaArchive, CdBuffer, LcdMonitor};
pub use design::{compute_g_optimal, max_design_norm, sample_arm, Allocation, DesignError};
pub use env::{
    best_arm, eps_best_set, expected_return, make_example_5_1, make_example_i_2, Dynamics,
    EnvError, EnvState, Instance, NoiseModel, Observation, ScheduleSpec,
};
pub use estimation::{empirical_best_arm, RadiusMode, RadiusParams, RunningStats, ZetaMode};
pub use harness::{
    emit_plot_data, load_results, paper_scaled_profile, plan, run_experiment, summarize, CellPlan,
    ExperimentConfig, ExperimentOutput, ExperimentPlan, HarnessError, InstanceSource, PlotKind,
    SummaryRow, TrialRecord,
};
