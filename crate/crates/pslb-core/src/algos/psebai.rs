//! Change-aware identification. Exploration pulls feed per-context
//! estimates; every γ-th step instead feeds a sliding change detector. An
//! alarm triggers a fresh alignment window that re-identifies the active
//! context against the archive, and the statistics roll back far enough to
//! discard every sample that might straddle the changepoint. The parallel
//! variant additionally folds every pull into the change-oblivious rule and
//! stops with whichever rule fires first.

use crate::changedetect::{CaArchive, LcdMonitor};
use crate::design::{compute_g_optimal, sample_arm};
use crate::env::{EnvState, Instance};
use crate::estimation::{
    compute_radius_terms, empirical_best_arm, radius_for_pair, s_floor, RadiusParams, RunningStats,
};

use super::{
    arm_stream, AlgoError, AlgoKind, AlgoParams, AlgoResult, Event, NaiveState, PhaseCounts,
    RunOutcome, RunSeeds,
};

/// One recorded statistics update for the rollback audit: `None` mirrors a
/// placeholder step, `Some` an attributed exploration pull.
type ShadowStep = Option<(usize, usize, f64)>;

pub fn run_psebai(
    instance: &Instance,
    params: &AlgoParams,
    seeds: RunSeeds,
) -> Result<AlgoResult, AlgoError> {
    run_ps(instance, params, seeds, false)
}

pub fn run_psebai_plus(
    instance: &Instance,
    params: &AlgoParams,
    seeds: RunSeeds,
) -> Result<AlgoResult, AlgoError> {
    run_ps(instance, params, seeds, true)
}

/// True when the empirically best arm is separated from every rival by the
/// pair radius up to ε.
fn separated(stats: &RunningStats, rparams: &RadiusParams, eps: f64) -> bool {
    let best = empirical_best_arm(stats);
    let mus = stats.mu_hats();
    let terms = compute_radius_terms(stats, rparams);
    (0..stats.num_arms())
        .filter(|&x| x != best)
        .all(|x| mus[best] - mus[x] - radius_for_pair(stats, &terms, best, x, rparams.zeta) >= -eps)
}

/// Replays the audited history into a fresh accumulator and compares
/// snapshots; a mismatch means rollback reconstructed different state than
/// re-applying the surviving prefix would have.
fn audit_matches(
    history: &[ShadowStep],
    instance: &Instance,
    allocation: &crate::design::Allocation,
    num_contexts: usize,
    capacity: usize,
    stats: &RunningStats,
) -> bool {
    let mut rebuilt = RunningStats::new(num_contexts, &instance.arms, allocation, capacity);
    for step in history {
        match step {
            Some((context, arm, reward)) => rebuilt.push_real(*context, *arm, *reward),
            None => rebuilt.push_noop(),
        }
    }
    rebuilt.snapshot() == stats.snapshot()
}

fn run_ps(
    instance: &Instance,
    params: &AlgoParams,
    seeds: RunSeeds,
    with_naive: bool,
) -> Result<AlgoResult, AlgoError> {
    params.validate_detection()?;
    let kind = if with_naive {
        AlgoKind::PsebaiPlus
    } else {
        AlgoKind::Psebai
    };
    let allocation = compute_g_optimal(&instance.arms, 1e-6)?;
    let mut env = EnvState::new(instance, seeds.env)?;
    let mut rng = arm_stream(seeds.arm);

    let half_w = (params.window / 2) as usize;
    // Rollback depth: one alignment window of placeholders plus the γ·w/2
    // steps that may straddle an undetected changepoint.
    let revert_depth = (params.window * (params.gamma + 1) / 2) as usize;
    let mut stats = RunningStats::new(
        params.num_contexts,
        &instance.arms,
        &allocation,
        revert_depth,
    );
    let m_table = stats.m_table().to_vec();
    let mut monitor = LcdMonitor::new(
        m_table.clone(),
        (params.window * params.lcd_window_mult) as usize,
    );
    let mut archive = CaArchive::new();
    let mut naive = with_naive.then(|| {
        NaiveState::new(
            &instance.arms,
            &allocation,
            params.l_max as f64,
            params.eps,
            params.delta,
        )
    });
    let rparams = RadiusParams {
        dim: instance.dim(),
        num_arms: instance.num_arms(),
        num_contexts: params.num_contexts,
        l_max: params.l_max as f64,
        delta: params.delta,
        mode: params.radius_mode,
        zeta: params.zeta,
    };
    let stop_floor = s_floor(params.l_max as f64, params.num_contexts, params.delta);
    let budget = crate::bounds::tau_star(
        params.num_contexts,
        instance.num_arms(),
        params.l_max as f64,
        params.eps,
        params.delta,
    );

    let mut events: Vec<Event> = Vec::new();
    let mut phases = PhaseCounts::default();
    let mut pulls: Option<Vec<u32>> = params.record_pulls.then(Vec::new);
    let mut shadow: Option<Vec<ShadowStep>> = params.shadow_check.then(Vec::new);
    let mut shadow_failures = 0u32;

    // Warm-up: half a window of design pulls seeds the first archive entry.
    // Time counting starts here, but the estimators stay empty.
    let mut warm = Vec::with_capacity(half_w);
    for _ in 0..half_w {
        if env.t() >= params.step_cap {
            events.push(Event::CapHit { t: env.t() });
            phases.warmup = env.t();
            return Ok(AlgoResult {
                kind,
                outcome: RunOutcome::CapExceeded,
                arm: naive.as_ref().map(|n| n.running_best()),
                tau: env.t(),
                s_tau: 0,
                l_tau: env.segment_index(),
                phases,
                events,
                pulls,
                shadow_failures,
            });
        }
        let arm = sample_arm(&allocation, &mut rng);
        let obs = env.step(arm, params.dynamics)?;
        if let Some(log) = pulls.as_mut() {
            log.push(arm as u32);
        }
        if let Some(n) = naive.as_mut() {
            n.update(arm, obs.reward);
        }
        warm.push((arm, obs.reward));
    }
    phases.warmup = half_w as u64;
    events.push(Event::Warmup {
        steps: half_w as u64,
    });
    archive.append(warm);
    let mut j_hat = 0usize;
    let mut t_ca = env.t();
    // Detection-sample count frozen when an arm is recorded; confirmation
    // requires half a window of further quiet detection samples.
    let mut confirm_at: Option<u64> = None;
    let mut recorded: Option<usize> = None;
    let mut ps_enabled = true;

    let (outcome, arm) = 'main: loop {
        if ps_enabled && env.t() as f64 > budget {
            if with_naive {
                ps_enabled = false;
                events.push(Event::PsExpired { t: env.t() });
            } else {
                break (RunOutcome::Failed, None);
            }
        }
        if env.t() >= params.step_cap {
            events.push(Event::CapHit { t: env.t() });
            let guess = match &naive {
                Some(n) => Some(n.running_best()),
                None if stats.s() > 0 => Some(empirical_best_arm(&stats)),
                None => None,
            };
            break (RunOutcome::CapExceeded, guess);
        }
        let arm = sample_arm(&allocation, &mut rng);
        let obs = env.step(arm, params.dynamics)?;
        if let Some(log) = pulls.as_mut() {
            log.push(arm as u32);
        }
        if let Some(n) = naive.as_mut() {
            n.update(arm, obs.reward);
            if let Some(best) = n.should_stop() {
                events.push(Event::NaiveStop {
                    t: env.t(),
                    arm: best,
                });
                break (RunOutcome::Recommended, Some(best));
            }
        }
        if !ps_enabled {
            phases.exploration += 1;
            continue;
        }
        if (env.t() - t_ca) % params.gamma != 0 {
            phases.exploration += 1;
            stats.push_real(j_hat, arm, obs.reward);
            if let Some(log) = shadow.as_mut() {
                log.push(Some((j_hat, arm, obs.reward)));
            }
        } else {
            phases.detection += 1;
            stats.push_noop();
            if let Some(log) = shadow.as_mut() {
                log.push(None);
            }
            monitor.push(arm, obs.reward);
            if monitor.fires(params.threshold_b) {
                events.push(Event::Alarm {
                    t: env.t(),
                    samples: monitor.total(),
                });
                monitor.clear();
                confirm_at = None;
                recorded = None;
                // Alignment: half a window of fresh pulls identifies the
                // post-change context. They advance time like any other
                // step and occupy placeholder slots so the rollback below
                // is counted in steps.
                let mut fresh = Vec::with_capacity(half_w);
                let mut naive_fired = None;
                while fresh.len() < half_w && env.t() < params.step_cap {
                    let arm = sample_arm(&allocation, &mut rng);
                    let obs = env.step(arm, params.dynamics)?;
                    phases.alignment += 1;
                    if let Some(log) = pulls.as_mut() {
                        log.push(arm as u32);
                    }
                    stats.push_noop();
                    if let Some(log) = shadow.as_mut() {
                        log.push(None);
                    }
                    fresh.push((arm, obs.reward));
                    if let Some(n) = naive.as_mut() {
                        n.update(arm, obs.reward);
                        if let Some(best) = n.should_stop() {
                            naive_fired = Some(best);
                            break;
                        }
                    }
                }
                if let Some(best) = naive_fired {
                    // The oblivious rule fired mid-alignment: recommend
                    // immediately and leave the archive untouched.
                    events.push(Event::NaiveStop {
                        t: env.t(),
                        arm: best,
                    });
                    break 'main (RunOutcome::Recommended, Some(best));
                }
                if fresh.len() < half_w {
                    events.push(Event::CapHit { t: env.t() });
                    let guess = match &naive {
                        Some(n) => Some(n.running_best()),
                        None if stats.s() > 0 => Some(empirical_best_arm(&stats)),
                        None => None,
                    };
                    break 'main (RunOutcome::CapExceeded, guess);
                }
                t_ca = env.t();
                let known = archive.len();
                let aligned = archive.align(fresh, &m_table, params.threshold_b);
                events.push(Event::Alignment {
                    t: env.t(),
                    context: aligned,
                    is_new: aligned == known,
                });
                if aligned >= params.num_contexts {
                    // More contexts than the belief admits.
                    if with_naive {
                        ps_enabled = false;
                        events.push(Event::PsDead { t: env.t() });
                    } else {
                        break 'main (RunOutcome::Failed, None);
                    }
                } else {
                    j_hat = aligned;
                    let undone = stats.revert(revert_depth) as u64;
                    events.push(Event::Reverted {
                        t: env.t(),
                        steps: undone,
                    });
                    if let Some(log) = shadow.as_mut() {
                        log.truncate(log.len() - undone as usize);
                        if !audit_matches(
                            log,
                            instance,
                            &allocation,
                            params.num_contexts,
                            revert_depth,
                            &stats,
                        ) {
                            shadow_failures += 1;
                        }
                    }
                }
            }
        }
        if !ps_enabled {
            continue;
        }
        match (confirm_at, recorded) {
            (None, _) => {
                if stats.s() >= stop_floor && separated(&stats, &rparams, params.eps) {
                    let best = empirical_best_arm(&stats);
                    recorded = Some(best);
                    confirm_at = Some(monitor.total() + half_w as u64);
                    events.push(Event::Recorded {
                        t: env.t(),
                        arm: best,
                    });
                }
            }
            (Some(at), Some(best)) => {
                if monitor.total() == at {
                    events.push(Event::Recommended {
                        t: env.t(),
                        arm: best,
                    });
                    break (RunOutcome::Recommended, Some(best));
                }
            }
            (Some(_), None) => unreachable!("recorded arm always set with its deadline"),
        }
    };

    Ok(AlgoResult {
        kind,
        outcome,
        arm,
        tau: env.t(),
        s_tau: stats.s(),
        l_tau: env.segment_index(),
        phases,
        events,
        pulls,
        shadow_failures,
    })
}
