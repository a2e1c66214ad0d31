//! Per-context running estimators, a bounded reversion buffer, and the
//! confidence radii built from them.
//!
//! [`RunningStats`] ingests one exploration pull at a time (arm, reward, and
//! the context label the caller currently believes is active) and maintains,
//! per context j:
//!
//! * arm scores `s[j][i] = x_iᵀ A(λ)⁻¹ Σ_pulls x_pull·Y`, so that the
//!   per-context gap estimate between two arms is a subtraction and a
//!   division, and the mean-return estimate of arm i is `Σ_j s[j][i] / S`;
//! * the unnormalized parameter estimate `u[j] = A(λ)⁻¹ Σ x_pull·Y`
//!   (so `θ̂_j = u[j]/T_j`), the pull count `T_j`, and the exploration
//!   counter `S = Σ_j T_j`.
//!
//! Every update step also lands in a bounded ring, so the most recent k
//! steps can be rolled back bit-exactly after a suspected context change
//! invalidates them; steps that deliberately bypass the estimators (change
//! detection pulls) occupy ring slots as no-ops to keep step counting
//! aligned with the caller's clock.
//!
//! Two interchangeable confidence-radius families are provided: a
//! conservative one whose constants come straight from the analysis
//! ([`RadiusMode::Theory`]) and a sharper one used for experiments
//! ([`RadiusMode::Tight`]). Both share the structure
//! `base + Σ_j β_j·|clip(Δ̂_j) + ζ|` with per-context weights β_j and an
//! optional centering shift ζ.

use std::collections::VecDeque;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::design::Allocation;

/// Per-context gap estimates are clamped to this magnitude inside the
/// radius; means and rewards are bounded by 1 each, so true gaps never
/// exceed 2 in absolute value.
const GAP_CLIP: f64 = 2.0;

/// Family of constants used to assemble the confidence radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusMode {
    /// Constants exactly as in the correctness analysis; very conservative.
    Theory,
    /// Sharper self-normalized constants; the experimental default.
    Tight,
}

/// Choice of the centering shift ζ in `Σ_j β_j |Δ̂_j + ζ|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ZetaMode {
    /// β-weighted centering `ζ = −Σ β_j Δ̂_j / Σ β_j` (zero when all β
    /// vanish), which cancels the common drift of the per-context gaps.
    Balanced,
    /// A fixed shift supplied by the caller.
    Fixed(f64),
}

/// Static inputs of the radius computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusParams {
    /// Ambient dimension d.
    pub dim: usize,
    /// Number of arms K.
    pub num_arms: usize,
    /// Number of latent contexts N.
    pub num_contexts: usize,
    /// Upper bound on segment lengths.
    pub l_max: f64,
    /// Overall failure probability budget δ.
    pub delta: f64,
    pub mode: RadiusMode,
    pub zeta: ZetaMode,
}

/// One reversible update step.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Increment {
    Real {
        context: usize,
        arm: usize,
        reward: f64,
    },
    Noop,
}

/// The revertible accumulator state.
#[derive(Debug, Clone, PartialEq)]
struct StatsCore {
    /// `scores[j][i] = x_iᵀ u[j]`, accumulated incrementally.
    scores: Vec<Vec<f64>>,
    /// `u[j] = A(λ)⁻¹ Σ x·Y` over pulls attributed to context j.
    u: Vec<DVector<f64>>,
    /// Pulls attributed to each context.
    t_counts: Vec<u64>,
    /// Total exploration pulls.
    s: u64,
}

impl StatsCore {
    fn new(num_contexts: usize, num_arms: usize, dim: usize) -> Self {
        StatsCore {
            scores: vec![vec![0.0; num_arms]; num_contexts],
            u: vec![DVector::zeros(dim); num_contexts],
            t_counts: vec![0; num_contexts],
            s: 0,
        }
    }

    fn apply(&mut self, inc: &Increment, m_table: &[Vec<f64>], ainv_arms: &[DVector<f64>]) {
        if let Increment::Real {
            context,
            arm,
            reward,
        } = *inc
        {
            let row = &m_table[arm];
            for (sc, m) in self.scores[context].iter_mut().zip(row) {
                *sc += m * reward;
            }
            self.u[context].axpy(reward, &ainv_arms[arm], 1.0);
            self.t_counts[context] += 1;
            self.s += 1;
        }
    }
}

/// Copyable view of the estimator state, for shadow-rebuild comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsSnapshot {
    pub scores: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub t_counts: Vec<u64>,
    pub s: u64,
}

/// Incremental per-context estimator with a bounded reversion window.
#[derive(Debug, Clone)]
pub struct RunningStats {
    /// `m_table[a][i] = x_aᵀ A(λ)⁻¹ x_i`.
    m_table: Vec<Vec<f64>>,
    /// `A(λ)⁻¹ x_a` per arm.
    ainv_arms: Vec<DVector<f64>>,
    current: StatsCore,
    /// State with the ring contents removed; reverting restores `base` plus
    /// the surviving prefix of the ring.
    base: StatsCore,
    ring: VecDeque<Increment>,
    capacity: usize,
}

impl RunningStats {
    /// `capacity` is the maximum number of most-recent update steps that can
    /// be rolled back; older steps are folded away permanently.
    pub fn new(
        num_contexts: usize,
        arms: &[Vec<f64>],
        allocation: &Allocation,
        capacity: usize,
    ) -> Self {
        let dim = arms.first().map_or(0, Vec::len);
        let ainv_arms: Vec<DVector<f64>> = arms
            .iter()
            .map(|x| allocation.info_inverse() * DVector::from_column_slice(x))
            .collect();
        let m_table: Vec<Vec<f64>> = arms
            .iter()
            .map(|xa| {
                ainv_arms
                    .iter()
                    .map(|col| xa.iter().zip(col.iter()).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect();
        RunningStats {
            m_table,
            ainv_arms,
            current: StatsCore::new(num_contexts, arms.len(), dim),
            base: StatsCore::new(num_contexts, arms.len(), dim),
            ring: VecDeque::with_capacity(capacity + 1),
            capacity,
        }
    }

    pub fn num_arms(&self) -> usize {
        self.m_table.len()
    }

    /// Cross-inverse table `m[a][i] = x_aᵀ A(λ)⁻¹ x_i` shared with the
    /// change detector.
    pub fn m_table(&self) -> &[Vec<f64>] {
        &self.m_table
    }

    pub fn num_contexts(&self) -> usize {
        self.current.t_counts.len()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Update steps currently available for rollback.
    pub fn revertible_len(&self) -> usize {
        self.ring.len()
    }

    /// Total exploration pulls S.
    pub fn s(&self) -> u64 {
        self.current.s
    }

    /// Pulls attributed to context j.
    pub fn t_count(&self, j: usize) -> u64 {
        self.current.t_counts[j]
    }

    /// Empirical context frequency `T_j / S`, zero before any pull.
    pub fn p_hat(&self, j: usize) -> f64 {
        if self.current.s == 0 {
            0.0
        } else {
            self.current.t_counts[j] as f64 / self.current.s as f64
        }
    }

    /// Parameter estimate for context j: `u_j / T_j`, the zero vector while
    /// the context has no pulls.
    pub fn theta_hat(&self, j: usize) -> DVector<f64> {
        let t = self.current.t_counts[j];
        if t == 0 {
            DVector::zeros(self.ainv_arms.first().map_or(0, DVector::len))
        } else {
            &self.current.u[j] / t as f64
        }
    }

    /// Estimated gap `x_iᵀθ̂_j − x_łᵀθ̂_j` between arms `i` and `l` under
    /// context j; zero while the context has no pulls.
    pub fn delta_hat(&self, j: usize, i: usize, l: usize) -> f64 {
        let t = self.current.t_counts[j];
        if t == 0 {
            0.0
        } else {
            (self.current.scores[j][i] - self.current.scores[j][l]) / t as f64
        }
    }

    /// Mean-return estimate of arm i: `Σ_j s[j][i] / S`, zero before any
    /// pull.
    pub fn mu_hat(&self, i: usize) -> f64 {
        if self.current.s == 0 {
            return 0.0;
        }
        let total: f64 = self.current.scores.iter().map(|row| row[i]).sum();
        total / self.current.s as f64
    }

    pub fn mu_hats(&self) -> Vec<f64> {
        (0..self.num_arms()).map(|i| self.mu_hat(i)).collect()
    }

    pub fn snapshot(&self) -> StatsSnapshot {
        StatsSnapshot {
            scores: self.current.scores.clone(),
            u: self
                .current
                .u
                .iter()
                .map(|v| v.as_slice().to_vec())
                .collect(),
            t_counts: self.current.t_counts.clone(),
            s: self.current.s,
        }
    }

    /// Ingests one exploration pull attributed to `context`.
    pub fn push_real(&mut self, context: usize, arm: usize, reward: f64) {
        self.push(Increment::Real {
            context,
            arm,
            reward,
        });
    }

    /// Occupies one update step without touching the estimators, so that
    /// rollback depths can be counted in caller steps.
    pub fn push_noop(&mut self) {
        self.push(Increment::Noop);
    }

    fn push(&mut self, inc: Increment) {
        self.current.apply(&inc, &self.m_table, &self.ainv_arms);
        self.ring.push_back(inc);
        while self.ring.len() > self.capacity {
            let old = self.ring.pop_front().expect("ring is non-empty");
            self.base.apply(&old, &self.m_table, &self.ainv_arms);
        }
    }

    /// Rolls back the effects of the most recent `k` update steps (clamped
    /// to what the ring still holds) and returns how many were undone. The
    /// surviving history is folded into the permanent base, so a later
    /// revert can only reach steps pushed after this call.
    pub fn revert(&mut self, k: usize) -> usize {
        let undone = k.min(self.ring.len());
        let keep = self.ring.len() - undone;
        let mut rebuilt = self.base.clone();
        for inc in self.ring.iter().take(keep) {
            rebuilt.apply(inc, &self.m_table, &self.ainv_arms);
        }
        self.current = rebuilt.clone();
        self.base = rebuilt;
        self.ring.clear();
        undone
    }
}

/// Minimal-index arm maximizing the mean-return estimate. With no pulls yet
/// every estimate is zero and arm 0 is returned.
pub fn empirical_best_arm(stats: &RunningStats) -> usize {
    let mut best = 0usize;
    let mut best_total = f64::NEG_INFINITY;
    for i in 0..stats.num_arms() {
        // argmax of Σ_j s[j][i] equals argmax of μ̂_i; S > 0 cancels.
        let total: f64 = stats.current.scores.iter().map(|row| row[i]).sum();
        if total > best_total {
            best = i;
            best_total = total;
        }
    }
    best
}

/// Pair-independent pieces of the radius: `ρ(x, x̃) = base +
/// Σ_j betas[j]·|clip(Δ̂_j(x, x̃)) + ζ|`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusTerms {
    pub base: f64,
    pub betas: Vec<f64>,
}

/// Confidence-level logarithms at exploration count `s`. The failure budget
/// δ is split as δ/(15·K·S³) over arm-mean events, δ/(15·N·S³) over
/// context-frequency events, and δ/(15·K·N·S³) over per-context-arm events;
/// Σ_S 3/(15S³) < 1/4 keeps the union over all S within δ.
fn split_logs(s: u64, params: &RadiusParams) -> (f64, f64, f64) {
    let s3 = (s as f64).powi(3);
    let lnv = (30.0 * params.num_arms as f64 * s3 / params.delta).ln();
    let lnd = (30.0 * params.num_contexts as f64 * s3 / params.delta).ln();
    let lnm = (30.0 * params.num_arms as f64 * params.num_contexts as f64 * s3 / params.delta).ln();
    (lnv, lnd, lnm)
}

/// Variance proxy for context j: its empirical frequency floored at the
/// resolution the frequency estimate can certify, then capped at 1/4.
fn phi(p_hat: f64, s: f64, l_max: f64, lnd: f64) -> f64 {
    (4.0 * p_hat.max((25.0 / 4.0) * (l_max / s) * lnd)).min(0.25)
}

fn compute_terms_from(s: u64, t_counts: &[u64], params: &RadiusParams) -> RadiusTerms {
    let n = t_counts.len();
    if s == 0 {
        return RadiusTerms {
            base: f64::INFINITY,
            betas: vec![0.0; n],
        };
    }
    let (lnv, lnd, lnm) = split_logs(s, params);
    let sf = s as f64;
    let d = params.dim as f64;
    let l_max = params.l_max;
    let p_hats: Vec<f64> = t_counts.iter().map(|t| *t as f64 / sf).collect();
    let phis: Vec<f64> = p_hats.iter().map(|p| phi(*p, sf, l_max, lnd)).collect();
    match params.mode {
        RadiusMode::Theory => {
            let alpha = 5.0 * (d / sf * lnv).sqrt();
            let xi = 25.0 * std::f64::consts::SQRT_2 * (n as f64 * l_max / sf) * lnm;
            let betas = phis
                .iter()
                .map(|ph| (2.5 * (2.0 * ph * l_max / sf * lnd).sqrt()).min(1.0))
                .collect();
            RadiusTerms {
                base: 2.0 * (alpha + xi),
                betas,
            }
        }
        RadiusMode::Tight => {
            let a1 = d / sf * lnv;
            let alpha = a1 + (a1 * a1 + 4.0 * d / sf * lnv).sqrt();
            let betas: Vec<f64> = phis
                .iter()
                .map(|ph| {
                    let first = l_max / 3.0 * lnd;
                    ((first + (first * first + 2.0 * ph * l_max / sf * lnd).sqrt()) / sf).min(1.0)
                })
                .collect();
            // Frequency-misattribution term, by how well each context's
            // share of pulls is resolved: unseen or unresolvable contexts
            // pay the full clip (4β), poorly resolved ones a
            // self-normalized factor, and well-resolved ones a
            // vector-estimation factor shrinking with their pull count.
            let thin = d / (4.0 * sf) * lnm;
            let resolved = (25.0 / 4.0) * (l_max / sf) * lnd;
            let mut xi = 0.0;
            for j in 0..n {
                let beta = betas[j];
                if p_hats[j] < thin {
                    xi += 4.0 * beta;
                } else if p_hats[j] < resolved {
                    let dt = d / t_counts[j] as f64 * lnm;
                    let xit = dt + (dt * dt + 4.0 * d / t_counts[j] as f64 * lnm).sqrt();
                    xi += (2.0 * xit).min(4.0) * beta;
                } else {
                    xi += 10.0 * (d / t_counts[j] as f64 * lnm).sqrt() * beta;
                }
            }
            RadiusTerms {
                base: 2.0 * alpha + xi,
                betas,
            }
        }
    }
}

/// Pair-independent radius pieces for the current estimator state.
pub fn compute_radius_terms(stats: &RunningStats, params: &RadiusParams) -> RadiusTerms {
    compute_terms_from(stats.s(), &stats.current.t_counts, params)
}

/// Assembles the radius from precomputed terms and the per-context gap
/// estimates of one arm pair.
pub fn radius_from_terms(terms: &RadiusTerms, gaps: &[f64], zeta: ZetaMode) -> f64 {
    let clipped: Vec<f64> = gaps.iter().map(|g| g.clamp(-GAP_CLIP, GAP_CLIP)).collect();
    let z = match zeta {
        ZetaMode::Fixed(v) => v,
        ZetaMode::Balanced => {
            let total: f64 = terms.betas.iter().sum();
            if total > 0.0 {
                -terms
                    .betas
                    .iter()
                    .zip(&clipped)
                    .map(|(b, g)| b * g)
                    .sum::<f64>()
                    / total
            } else {
                0.0
            }
        }
    };
    let spread: f64 = terms
        .betas
        .iter()
        .zip(&clipped)
        .map(|(b, g)| b * (g + z).abs())
        .sum();
    terms.base + spread
}

/// Radius for the arm pair `(i, l)` given precomputed terms.
pub fn radius_for_pair(
    stats: &RunningStats,
    terms: &RadiusTerms,
    i: usize,
    l: usize,
    zeta: ZetaMode,
) -> f64 {
    let gaps: Vec<f64> = (0..stats.num_contexts())
        .map(|j| stats.delta_hat(j, i, l))
        .collect();
    radius_from_terms(terms, &gaps, zeta)
}

/// One-shot radius for an arm pair; recomputes the shared terms each call.
pub fn confidence_radius(stats: &RunningStats, params: &RadiusParams, i: usize, l: usize) -> f64 {
    let terms = compute_radius_terms(stats, params);
    radius_for_pair(stats, &terms, i, l, params.zeta)
}

/// Minimal exploration count S at which the recommendation rule may fire:
/// the smallest S with `S ≥ (2·l_max/9)·ln(30·N·S³/δ)`. Below this count
/// the frequency estimates cannot be certified at level δ.
pub fn s_floor(l_max: f64, num_contexts: usize, delta: f64) -> u64 {
    let ok = |s: u64| -> bool {
        let sf = s as f64;
        sf >= (2.0 * l_max / 9.0) * (30.0 * num_contexts as f64 * sf.powi(3) / delta).ln()
    };
    let mut hi = 1u64;
    while !ok(hi) {
        hi *= 2;
    }
    let mut lo = 1u64;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}
