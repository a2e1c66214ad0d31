//! Full-information references: contexts and changepoints are observed
//! directly, so identification reduces to estimating the context
//! distribution. The first variant counts segments and re-checks its rule at
//! changepoints; the second weights contexts by time in force and re-checks
//! every step with per-context confidence widths.

use crate::env::{Dynamics, EnvState, Instance};

use super::{
    AlgoError, AlgoKind, AlgoParams, AlgoResult, Event, PhaseCounts, RunOutcome, RunSeeds, C3,
};

/// Segment-frequency estimate of the context distribution; exactly the
/// counting rule the full-information procedures use.
#[derive(Debug, Clone)]
pub struct ContextCounter {
    counts: Vec<u64>,
    segments: u64,
}

impl ContextCounter {
    pub fn new(num_contexts: usize) -> Self {
        ContextCounter {
            counts: vec![0; num_contexts],
            segments: 0,
        }
    }

    pub fn observe_segment(&mut self, context: usize) {
        self.counts[context] += 1;
        self.segments += 1;
    }

    pub fn segments(&self) -> u64 {
        self.segments
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Empirical frequencies; uniform before any segment was seen.
    pub fn p_hat(&self) -> Vec<f64> {
        if self.segments == 0 {
            let n = self.counts.len();
            return vec![1.0 / n as f64; n];
        }
        self.counts
            .iter()
            .map(|&c| c as f64 / self.segments as f64)
            .collect()
    }
}

fn require_full_info(params: &AlgoParams) -> Result<(), AlgoError> {
    if params.dynamics != Dynamics::FullInfo {
        return Err(AlgoError::DynamicsMismatch {
            required: Dynamics::FullInfo,
        });
    }
    Ok(())
}

/// Plug-in returns `Σ_j p_j x_iᵀθ_j` and their argmax (lowest index wins).
fn plug_in_best(mu: &[Vec<f64>], p: &[f64]) -> (usize, Vec<f64>) {
    let k = mu[0].len();
    let mut values = vec![0.0; k];
    for (j, row) in mu.iter().enumerate() {
        for (v, &m) in values.iter_mut().zip(row) {
            *v += p[j] * m;
        }
    }
    let mut best = 0;
    for i in 1..k {
        if values[i] > values[best] {
            best = i;
        }
    }
    (best, values)
}

/// Per-pair deviation sums `Σ_j |Δ_j(i, k) - mean_j Δ_j(i, k)|`: the radius
/// between arms `i` and `k` is this times the scalar width.
fn centered_deviation_table(mu: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = mu.len();
    let k = mu[0].len();
    let mut table = vec![vec![0.0; k]; k];
    for i in 0..k {
        for l in 0..k {
            let mut mean = 0.0;
            for row in mu {
                mean += row[i] - row[l];
            }
            mean /= n as f64;
            let mut dev = 0.0;
            for row in mu {
                dev += (row[i] - row[l] - mean).abs();
            }
            table[i][l] = dev;
        }
    }
    table
}

fn finish(
    kind: AlgoKind,
    outcome: RunOutcome,
    arm: Option<usize>,
    env: &EnvState,
    events: Vec<Event>,
) -> AlgoResult {
    let tau = env.t();
    AlgoResult {
        kind,
        outcome,
        arm,
        tau,
        s_tau: 0,
        l_tau: env.segment_index(),
        phases: PhaseCounts {
            exploration: tau,
            ..PhaseCounts::default()
        },
        events,
        pulls: None,
        shadow_failures: 0,
    }
}

/// Segment-counting variant. Pulls are irrelevant under full information, so
/// every step plays arm 0; the rule is evaluated when a changepoint is
/// observed (or every step with `debai_check_every_step`).
pub fn run_debai(
    instance: &Instance,
    params: &AlgoParams,
    seeds: RunSeeds,
) -> Result<AlgoResult, AlgoError> {
    require_full_info(params)?;
    params.validate_common()?;
    let mut env = EnvState::new(instance, seeds.env)?;
    let mu = instance.mean_table();
    let dev = centered_deviation_table(&mu);
    let n = instance.num_contexts() as f64;
    let mut counter = ContextCounter::new(instance.num_contexts());
    // ln(2·C₃·N·l³/δ) = base + 3 ln l.
    let ln_base = (2.0 * C3 * n / params.delta).ln();

    loop {
        let obs = env.step(0, Dynamics::FullInfo)?;
        let changed = obs.changepoint.expect("full info serves changepoints");
        if changed {
            counter.observe_segment(obs.context_index.expect("full info serves context index"));
        }
        if changed || params.debai_check_every_step {
            let l = counter.segments() as f64;
            let beta = ((ln_base + 3.0 * l.ln()) / (2.0 * l)).sqrt();
            let (best, values) = plug_in_best(&mu, &counter.p_hat());
            let separated = (0..values.len())
                .filter(|&x| x != best)
                .all(|x| values[best] - values[x] - beta * dev[best][x] >= -params.eps);
            if separated {
                let events = vec![Event::Recommended {
                    t: env.t(),
                    arm: best,
                }];
                return Ok(finish(
                    AlgoKind::Debai,
                    RunOutcome::Recommended,
                    Some(best),
                    &env,
                    events,
                ));
            }
        }
        if env.t() >= params.step_cap {
            let (best, _) = plug_in_best(&mu, &counter.p_hat());
            let events = vec![Event::CapHit { t: env.t() }];
            return Ok(finish(
                AlgoKind::Debai,
                RunOutcome::CapExceeded,
                Some(best),
                &env,
                events,
            ));
        }
    }
}

/// Time-weighted variant: context frequencies are fractions of elapsed time,
/// each context gets its own width from its occupancy, and the rule is
/// evaluated every step.
pub fn run_debai_beta(
    instance: &Instance,
    params: &AlgoParams,
    seeds: RunSeeds,
) -> Result<AlgoResult, AlgoError> {
    require_full_info(params)?;
    params.validate_common()?;
    let mut env = EnvState::new(instance, seeds.env)?;
    let mu = instance.mean_table();
    let num_contexts = instance.num_contexts();
    let l_max = params.l_max as f64;
    let mut time_in = vec![0u64; num_contexts];
    // ln(2/δ_t) with δ_t = δ/(C₃·N·t³).
    let ln_base = (2.0 * C3 * num_contexts as f64 / params.delta).ln();
    let mut betas = vec![0.0; num_contexts];

    loop {
        let obs = env.step(0, Dynamics::FullInfo)?;
        time_in[obs.context_index.expect("full info serves context index")] += 1;
        let t = env.t() as f64;
        let x_ln = ln_base + 3.0 * t.ln();
        let p_hat: Vec<f64> = time_in.iter().map(|&c| c as f64 / t).collect();
        let head = l_max / 3.0 * x_ln;
        for (beta, &p) in betas.iter_mut().zip(&p_hat) {
            let phi = (4.0 * p.max(6.25 * (l_max / t) * x_ln)).min(0.25);
            let raw = (head + (head * head + 2.0 * phi * l_max / t * x_ln).sqrt()) / t;
            *beta = raw.min(1.0);
        }
        let (best, values) = plug_in_best(&mu, &p_hat);
        let beta_sum: f64 = betas.iter().sum();
        let separated = (0..values.len()).filter(|&x| x != best).all(|x| {
            let mut weighted = 0.0;
            for (j, row) in mu.iter().enumerate() {
                weighted += betas[j] * (row[best] - row[x]);
            }
            let zeta = -weighted / beta_sum;
            let mut rho = 0.0;
            for (j, row) in mu.iter().enumerate() {
                rho += betas[j] * (row[best] - row[x] + zeta).abs();
            }
            values[best] - values[x] - rho >= -params.eps
        });
        if separated {
            let events = vec![Event::Recommended {
                t: env.t(),
                arm: best,
            }];
            return Ok(finish(
                AlgoKind::DebaiBeta,
                RunOutcome::Recommended,
                Some(best),
                &env,
                events,
            ));
        }
        if env.t() >= params.step_cap {
            let (best, _) = plug_in_best(&mu, &p_hat);
            let events = vec![Event::CapHit { t: env.t() }];
            return Ok(finish(
                AlgoKind::DebaiBeta,
                RunOutcome::CapExceeded,
                Some(best),
                &env,
                events,
            ));
        }
    }
}
