//! Change-oblivious identification: sample the optimal design forever,
//! average all rewards into one least-squares estimate, and stop when the
//! anytime confidence radius separates the best arm from the rest.

use nalgebra::DVector;

use crate::design::{compute_g_optimal, sample_arm, Allocation};
use crate::env::Instance;

use super::{
    arm_stream, AlgoError, AlgoKind, AlgoParams, AlgoResult, Event, PhaseCounts, RunOutcome,
    RunSeeds,
};

/// Apéry's constant ζ(3); normalizes the `Σ 1/t³` failure-probability split.
pub const C3: f64 = 1.202_056_903_159_594_3;

/// Steps between refreshes of the cached stopping-rule threshold.
const ANCHOR_PERIOD: u64 = 4096;
/// Relative slack on the cached threshold so that the cheap pre-test never
/// rejects a step the exact rule would accept.
const GATE_SLACK: f64 = 1.0 - 1e-9;

/// Incremental state of the change-oblivious rule: per-arm score sums
/// `raw[i] = Σ_s x_iᵀA⁻¹x_{a_s} Y_s` (so `raw[i]/t = x_iᵀθ̃_t`), plus the
/// unnormalized estimate itself for diagnostics.
#[derive(Debug, Clone)]
pub struct NaiveState {
    /// Flattened `m[a][i] = x_aᵀA⁻¹x_i`, row-major with stride `num_arms`.
    m_flat: Vec<f64>,
    /// `A⁻¹x_a` per arm, for the estimate update.
    ainv_arms: Vec<DVector<f64>>,
    raw_scores: Vec<f64>,
    theta_raw: DVector<f64>,
    num_arms: usize,
    t: u64,
    t_star: u64,
    kappa: f64,
    /// `ln(4KC₃/δ)`; the radius multiplies `κ√((ln_c + 3 ln t)/t)`.
    ln_c: f64,
    eps: f64,
    anchor: u64,
    /// `4κ²(ln_c + 3 ln t_anchor) · (1 - slack)`: the stopping rule can only
    /// hold when `(raw_best - raw_second + εt)² ≥ gate · t`.
    gate: f64,
}

impl NaiveState {
    /// `l_max` is the algorithm's belief about the longest segment; it only
    /// scales the confidence radius.
    pub fn new(
        arms: &[Vec<f64>],
        allocation: &Allocation,
        l_max: f64,
        eps: f64,
        delta: f64,
    ) -> Self {
        let k = arms.len();
        let d = arms.first().map_or(0, Vec::len);
        let ainv = allocation.info_inverse();
        let arm_vecs: Vec<DVector<f64>> =
            arms.iter().map(|a| DVector::from_column_slice(a)).collect();
        let ainv_arms: Vec<DVector<f64>> = arm_vecs.iter().map(|x| ainv * x).collect();
        let mut m_flat = vec![0.0; k * k];
        for a in 0..k {
            for i in 0..k {
                m_flat[a * k + i] = arm_vecs[i].dot(&ainv_arms[a]);
            }
        }
        let t_star = (3.0 * d as f64 * (6.0 * d as f64 * k as f64 * C3 / delta).ln()).ceil();
        NaiveState {
            m_flat,
            ainv_arms,
            raw_scores: vec![0.0; k],
            theta_raw: DVector::zeros(d),
            num_arms: k,
            t: 0,
            t_star: t_star as u64,
            kappa: (8.0 * l_max).sqrt() + 5.0 * (d as f64).sqrt(),
            ln_c: (4.0 * k as f64 * C3 / delta).ln(),
            eps,
            anchor: 0,
            gate: f64::INFINITY,
        }
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    /// Warm-up length: the rule is not evaluated before `t_star` samples.
    pub fn t_star(&self) -> u64 {
        self.t_star
    }

    /// Folds one observed reward into the scores and the estimate.
    pub fn update(&mut self, arm: usize, reward: f64) {
        self.t += 1;
        let k = self.num_arms;
        let row = &self.m_flat[arm * k..(arm + 1) * k];
        for (score, m) in self.raw_scores.iter_mut().zip(row) {
            *score += m * reward;
        }
        self.theta_raw.axpy(reward, &self.ainv_arms[arm], 1.0);
    }

    /// Anytime radius; the pre-warm-up sentinel `2ε` keeps the rule
    /// unsatisfiable there.
    pub fn rho(&self) -> f64 {
        if self.t < self.t_star {
            return 2.0 * self.eps;
        }
        let t = self.t as f64;
        self.kappa * ((self.ln_c + 3.0 * t.ln()) / t).sqrt()
    }

    /// Empirically best arm (lowest index wins ties); `None` during warm-up.
    pub fn best_arm(&self) -> Option<usize> {
        (self.t >= self.t_star).then(|| self.leader().0)
    }

    /// Best guess regardless of warm-up, for cap exits.
    pub fn running_best(&self) -> usize {
        self.leader().0
    }

    /// Mean-score estimates `x_iᵀθ̃_t`.
    pub fn scores(&self) -> Vec<f64> {
        let t = (self.t as f64).max(1.0);
        self.raw_scores.iter().map(|s| s / t).collect()
    }

    /// Current least-squares estimate `θ̃_t`.
    pub fn theta_tilde(&self) -> DVector<f64> {
        &self.theta_raw / (self.t as f64).max(1.0)
    }

    fn leader(&self) -> (usize, f64, f64) {
        let mut best = 0usize;
        let mut best_val = f64::NEG_INFINITY;
        let mut second = f64::NEG_INFINITY;
        for (i, &v) in self.raw_scores.iter().enumerate() {
            if v > best_val {
                second = best_val;
                best_val = v;
                best = i;
            } else if v > second {
                second = v;
            }
        }
        (best, best_val, second)
    }

    /// Evaluates the stopping rule, returning the certified arm when
    /// `x̂ᵀθ̃ - ρ + ε ≥ max_{x≠x̂} xᵀθ̃ + ρ`. A cheap squared comparison
    /// against a cached threshold rejects almost every step without
    /// logarithms; it is strictly conservative, so any step it lets through
    /// is re-checked in the exact form above.
    pub fn should_stop(&mut self) -> Option<usize> {
        if self.t < self.t_star {
            return None;
        }
        if self.anchor == 0 || self.t - self.anchor >= ANCHOR_PERIOD {
            self.anchor = self.t;
            let ln_low = self.ln_c + 3.0 * (self.t as f64).ln();
            self.gate = 4.0 * self.kappa * self.kappa * ln_low * GATE_SLACK;
        }
        let (best, best_val, second) = self.leader();
        let t = self.t as f64;
        let num = best_val - second + self.eps * t;
        if num < 0.0 || num * num < self.gate * t {
            return None;
        }
        let rho = self.kappa * ((self.ln_c + 3.0 * t.ln()) / t).sqrt();
        if best_val / t - rho + self.eps >= second / t + rho {
            Some(best)
        } else {
            None
        }
    }
}

/// Runs the change-oblivious rule alone: `t_star` warm-up pulls, then pull
/// and re-check until the rule fires or the cap is hit.
pub fn run_nebai(
    instance: &Instance,
    params: &AlgoParams,
    seeds: RunSeeds,
) -> Result<AlgoResult, AlgoError> {
    params.validate_common()?;
    let allocation = compute_g_optimal(&instance.arms, 1e-6)?;
    let mut env = crate::env::EnvState::new(instance, seeds.env)?;
    let mut rng = arm_stream(seeds.arm);
    let mut naive = NaiveState::new(
        &instance.arms,
        &allocation,
        params.l_max as f64,
        params.eps,
        params.delta,
    );
    let mut pulls: Option<Vec<u32>> = params.record_pulls.then(Vec::new);
    let mut events = vec![Event::Warmup {
        steps: naive.t_star().min(params.step_cap),
    }];
    let mut phases = PhaseCounts::default();

    let (outcome, arm) = loop {
        if naive.t() >= naive.t_star() {
            if let Some(best) = naive.should_stop() {
                events.push(Event::Recommended {
                    t: naive.t(),
                    arm: best,
                });
                break (RunOutcome::Recommended, Some(best));
            }
        }
        if naive.t() >= params.step_cap {
            events.push(Event::CapHit { t: naive.t() });
            break (RunOutcome::CapExceeded, Some(naive.running_best()));
        }
        let arm = sample_arm(&allocation, &mut rng);
        let obs = env.step(arm, params.dynamics)?;
        naive.update(arm, obs.reward);
        if let Some(log) = pulls.as_mut() {
            log.push(arm as u32);
        }
    };

    let tau = naive.t();
    phases.warmup = tau.min(naive.t_star());
    phases.exploration = tau - phases.warmup;
    Ok(AlgoResult {
        kind: AlgoKind::Nebai,
        outcome,
        arm,
        tau,
        s_tau: tau,
        l_tau: env.segment_index(),
        phases,
        events,
        pulls,
        shadow_failures: 0,
    })
}
