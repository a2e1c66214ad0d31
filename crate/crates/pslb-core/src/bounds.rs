//! Closed-form tuning constants and hardness/complexity quantities: the
//! global time cap τ*, the change-detection threshold b with its false-alarm
//! budget, the per-instance hardness terms that govern identification
//! complexity, and a context-count lower bound. All calculators are pure.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{best_arm, eps_best_set, expected_return, Instance};

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("parameter outside its domain: {0}")]
    Domain(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
}

/// Global step cap for the change-aware identification algorithm:
/// `(38400·ln(80)·N·L_max/ε²)·ln(N²·K·L_max/(δ·ε²))`.
pub fn tau_star(n: usize, k: usize, l_max: f64, eps: f64, delta: f64) -> f64 {
    let nf = n as f64;
    let kf = k as f64;
    (38400.0 * 80f64.ln() * nf * l_max / (eps * eps))
        * (nf * nf * kf * l_max / (delta * eps * eps)).ln()
}

/// Per-test false-alarm budget for change detection: `γδ/(4·τ*²·K)`.
pub fn delta_fae(gamma: u64, delta: f64, tau_star: f64, k: usize) -> f64 {
    gamma as f64 * delta / (4.0 * tau_star * tau_star * k as f64)
}

/// Detection threshold on the per-arm mean shift across window halves:
/// `(8d/(3w))·X + √(((8d/(3w))·X)² + (24d/w)·X)` with `X = ln(2/δ_FAE)`.
pub fn threshold_b(w: f64, d: usize, delta_fae: f64) -> Result<f64, BoundsError> {
    if !(w.is_finite() && w > 0.0) {
        return Err(BoundsError::Domain(format!(
            "window w = {w} must be positive"
        )));
    }
    if !(delta_fae > 0.0 && delta_fae < 1.0) {
        return Err(BoundsError::Domain(format!(
            "false-alarm budget {delta_fae} outside (0, 1)"
        )));
    }
    let x = (2.0 / delta_fae).ln();
    let lead = 8.0 * d as f64 / (3.0 * w) * x;
    Ok(lead + (lead * lead + 24.0 * d as f64 / w * x).sqrt())
}

/// Whether the instance separation supports reliable detection at threshold
/// b: every context pair must move some arm's mean by more than 2b.
pub fn assumption_feasible(b: f64, delta_c: f64) -> bool {
    2.0 * b <= delta_c
}

/// Default detection window: `L_min/(3γ)` rounded down to an even count, so
/// the window splits into equal halves.
pub fn default_window(lmin: u64, gamma: u64) -> u64 {
    2 * (lmin / (6 * gamma))
}

/// Hardness and tuning quantities of one instance at accuracy ε and
/// confidence δ. Maxima over arm pairs carry the achieving pair
/// `(near_best_arm, alternative_arm)`; they are `None` when no valid pair
/// exists (single-arm instances).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub tau_star: f64,
    pub delta_fae: f64,
    pub b_threshold: f64,
    /// Detection window used for `b_threshold`.
    pub window: u64,
    /// Vector-estimation term `d/(Δ(x*,x)+ε)²·ln(1/δ)`, maximized.
    pub t_v: f64,
    pub t_v_arg: Option<(usize, usize)>,
    /// Distribution-estimation term `H_DE·ln(1/δ)`, maximized.
    pub t_d: f64,
    pub t_d_arg: Option<(usize, usize)>,
    /// Residual term `N·L_max/(Δ(x*,x)+ε)·ln(1/δ)`, maximized.
    pub t_r: f64,
    pub t_r_arg: Option<(usize, usize)>,
    /// `L_max/(Δ(x*,x)+ε)²·H̄`, maximized.
    pub h_de: f64,
    pub h_de_arg: Option<(usize, usize)>,
    /// `(Σ_j √min{16p_j, 1/4}·|Δ_j(x_ε,x)+ε|)²`, maximized.
    pub h_bar: f64,
    pub h_bar_arg: Option<(usize, usize)>,
    /// `max_pairs (T_V + T_D + T_R)`: the change-aware complexity bound.
    pub ps_bound: f64,
    pub ps_bound_arg: Option<(usize, usize)>,
    /// `d/(ε+Δ_min)²·ln(1/δ)`: stationary-style vector-estimation bound.
    pub t_v_n: f64,
    /// `L_max/(ε+Δ_min)²·ln(1/δ)`: stationary-style distribution bound.
    pub t_d_n: f64,
    /// `min(ps_bound, t_v_n + t_d_n)`: the combined-runner bound.
    pub overall: f64,
    /// Context-count lower bound with its achieving alternative arm;
    /// undefined at δ ≥ 1/4.
    pub n_c: Option<(f64, usize)>,
    /// Smallest mean gap to the best arm.
    pub delta_min: f64,
    /// Smallest best-arm separation between context pairs.
    pub delta_c: f64,
    pub best_arm: usize,
    pub eps_best: Vec<usize>,
}

fn unique_best(instance: &Instance, mus: &[f64]) -> Result<usize, BoundsError> {
    let star = best_arm(instance);
    let ties = mus.iter().filter(|m| **m == mus[star]).count();
    if ties > 1 {
        return Err(BoundsError::InvalidInstance(
            "the best mean return is tied; hardness terms need a unique best arm".into(),
        ));
    }
    Ok(star)
}

/// Evaluates every closed-form quantity of one instance. `gamma` sets the
/// change-detection cadence used for the window and threshold fields.
pub fn hardness_terms(
    instance: &Instance,
    eps: f64,
    delta: f64,
    gamma: u64,
) -> Result<BoundReport, BoundsError> {
    instance
        .validate()
        .map_err(|e| BoundsError::InvalidInstance(e.to_string()))?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(BoundsError::Domain(format!("eps = {eps} must be positive")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(BoundsError::Domain(format!(
            "delta = {delta} outside (0, 1)"
        )));
    }
    if gamma == 0 {
        return Err(BoundsError::Domain("gamma must be at least 1".into()));
    }
    let k = instance.num_arms();
    let n = instance.num_contexts();
    let d = instance.dim();
    let l_max = instance.lmax as f64;
    let mus: Vec<f64> = (0..k).map(|i| expected_return(instance, i)).collect();
    let star = unique_best(instance, &mus)?;
    let eps_best = eps_best_set(instance, eps);
    let mean_table = instance.mean_table();
    let ln1d = (1.0 / delta).ln();

    let tau = tau_star(n, k, l_max, eps, delta);
    let dfae = delta_fae(gamma, delta, tau, k);
    let window = default_window(instance.lmin, gamma);
    let b = threshold_b(window.max(2) as f64, d, dfae)?;

    let h_bar_of = |xe: usize, x: usize| -> f64 {
        let total: f64 = (0..n)
            .map(|j| {
                let gap_j = mean_table[j][xe] - mean_table[j][x];
                (16.0 * instance.probs[j]).min(0.25).sqrt() * (gap_j + eps).abs()
            })
            .sum();
        total * total
    };

    let empty = (0.0f64, None::<(usize, usize)>);
    let (mut t_v, mut t_d, mut t_r) = (empty, empty, empty);
    let (mut h_de, mut h_bar, mut ps) = (empty, empty, empty);
    for &xe in &eps_best {
        for x in 0..k {
            if x == xe || x == star {
                continue;
            }
            let relaxed = mus[star] - mus[x] + eps;
            let hb = h_bar_of(xe, x);
            let hd = l_max / (relaxed * relaxed) * hb;
            let tv = d as f64 / (relaxed * relaxed) * ln1d;
            let td = hd * ln1d;
            let tr = n as f64 * l_max / relaxed * ln1d;
            let total = tv + td + tr;
            let pair = Some((xe, x));
            for (slot, value) in [
                (&mut t_v, tv),
                (&mut t_d, td),
                (&mut t_r, tr),
                (&mut h_de, hd),
                (&mut h_bar, hb),
                (&mut ps, total),
            ] {
                if slot.1.is_none() || value > slot.0 {
                    *slot = (value, pair);
                }
            }
        }
    }

    let delta_min = (0..k)
        .filter(|x| *x != star)
        .map(|x| mus[star] - mus[x])
        .fold(f64::INFINITY, f64::min);
    let relaxed_min = eps + delta_min;
    let t_v_n = d as f64 / (relaxed_min * relaxed_min) * ln1d;
    let t_d_n = l_max / (relaxed_min * relaxed_min) * ln1d;
    let n_c = if delta < 0.25 {
        Some(nc_inner(instance, &mus, &mean_table, star, eps, delta))
    } else {
        None
    };

    Ok(BoundReport {
        tau_star: tau,
        delta_fae: dfae,
        b_threshold: b,
        window,
        t_v: t_v.0,
        t_v_arg: t_v.1,
        t_d: t_d.0,
        t_d_arg: t_d.1,
        t_r: t_r.0,
        t_r_arg: t_r.1,
        h_de: h_de.0,
        h_de_arg: h_de.1,
        h_bar: h_bar.0,
        h_bar_arg: h_bar.1,
        ps_bound: ps.0,
        ps_bound_arg: ps.1,
        t_v_n,
        t_d_n,
        overall: ps.0.min(t_v_n + t_d_n),
        n_c,
        delta_min,
        delta_c: instance.delta_c(),
        best_arm: star,
        eps_best,
    })
}

fn nc_inner(
    instance: &Instance,
    mus: &[f64],
    mean_table: &[Vec<f64>],
    star: usize,
    eps: f64,
    delta: f64,
) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, star);
    for x in 0..instance.num_arms() {
        if x == star {
            continue;
        }
        let relaxed = mus[star] - mus[x] + eps;
        let ratio: f64 = (0..instance.num_contexts())
            .map(|j| {
                let gap_j = mean_table[j][star] - mean_table[j][x] + eps;
                instance.probs[j] * gap_j * gap_j
            })
            .sum::<f64>()
            / (relaxed * relaxed);
        if ratio > best.0 {
            best = (ratio, x);
        }
    }
    (best.0 * (1.0 / (4.0 * delta)).ln(), best.1)
}

/// Lower bound on the number of context samples any δ-correct procedure must
/// observe: `max_{x≠x*} Σ_j p_j(Δ_j(x*,x)+ε)²/(Δ(x*,x)+ε)²·ln(1/(4δ))`,
/// returned with the achieving alternative arm.
pub fn nc_lower_bound(
    instance: &Instance,
    eps: f64,
    delta: f64,
) -> Result<(f64, usize), BoundsError> {
    instance
        .validate()
        .map_err(|e| BoundsError::InvalidInstance(e.to_string()))?;
    if !(delta > 0.0 && delta < 0.25) {
        return Err(BoundsError::Domain(format!(
            "delta = {delta} outside (0, 1/4); the bound's logarithm vanishes"
        )));
    }
    if instance.num_arms() < 2 {
        return Err(BoundsError::Domain("need at least two arms".into()));
    }
    let mus: Vec<f64> = (0..instance.num_arms())
        .map(|i| expected_return(instance, i))
        .collect();
    let star = unique_best(instance, &mus)?;
    Ok(nc_inner(
        instance,
        &mus,
        &instance.mean_table(),
        star,
        eps,
        delta,
    ))
}

/// Numerically minimizes `max_{x≠x*} ‖x*−x‖²_{A(v)⁻¹}/(Δ(x*,x)+ε)²` over
/// allocations v on the arm set, the restricted single-context form of the
/// allocation lower bound. Returns the minimized value and the allocation.
/// First-order method with a diminishing step; accuracy is a few parts in a
/// thousand, intended for reporting rather than certification.
pub fn transductive_singleton_bound(
    instance: &Instance,
    eps: f64,
    iterations: usize,
) -> Result<(f64, Vec<f64>), BoundsError> {
    instance
        .validate()
        .map_err(|e| BoundsError::InvalidInstance(e.to_string()))?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(BoundsError::Domain(format!("eps = {eps} must be positive")));
    }
    let k = instance.num_arms();
    if k < 2 {
        return Err(BoundsError::Domain("need at least two arms".into()));
    }
    let d = instance.dim();
    let mus: Vec<f64> = (0..k).map(|i| expected_return(instance, i)).collect();
    let star = unique_best(instance, &mus)?;
    let arms = instance.arm_vectors();
    let directions: Vec<(usize, nalgebra::DVector<f64>, f64)> = (0..k)
        .filter(|x| *x != star)
        .map(|x| {
            let relaxed = mus[star] - mus[x] + eps;
            (x, &arms[star] - &arms[x], relaxed * relaxed)
        })
        .collect();
    let mut v = vec![1.0 / k as f64; k];
    let mut value = f64::INFINITY;
    for it in 0..iterations.max(1) {
        let mut info = nalgebra::DMatrix::zeros(d, d);
        for (x, w) in arms.iter().zip(&v) {
            info += x * x.transpose() * *w;
        }
        let inv = match nalgebra::Cholesky::new(info) {
            Some(c) => c.inverse(),
            None => {
                return Err(BoundsError::InvalidInstance(
                    "allocation information matrix lost rank".into(),
                ))
            }
        };
        // Worst direction under the current allocation.
        let (mut worst_val, mut worst) = (f64::NEG_INFINITY, 0usize);
        for (idx, (_, y, denom)) in directions.iter().enumerate() {
            let r = (&inv * y).dot(y) / denom;
            if r > worst_val {
                worst_val = r;
                worst = idx;
            }
        }
        value = worst_val;
        // Steepest single-arm direction for the worst ratio: the arm whose
        // weight increase shrinks ‖y‖²_{A⁻¹} fastest.
        let y = &directions[worst].1;
        let ay = &inv * y;
        let (mut gain, mut pick) = (f64::NEG_INFINITY, 0usize);
        for (i, x) in arms.iter().enumerate() {
            let g = x.dot(&ay).powi(2);
            if g > gain {
                gain = g;
                pick = i;
            }
        }
        // Step 2/(t+2) counting iterations from 1, so the first move keeps
        // every arm's weight positive and the matrix invertible.
        let step = 2.0 / (it as f64 + 3.0);
        for (i, w) in v.iter_mut().enumerate() {
            *w = (1.0 - step) * *w + if i == pick { step } else { 0.0 };
        }
    }
    Ok((value, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_example_5_1, NoiseModel, ScheduleSpec};
    use approx::assert_relative_eq;

    fn benchmark() -> Instance {
        make_example_5_1(2, std::f64::consts::FRAC_PI_8).unwrap()
    }

    #[test]
    fn global_cap_matches_reference_and_scales() {
        assert_relative_eq!(
            tau_star(2, 3, 5000.0, 0.1, 0.05),
            3.13032390016e12,
            max_relative = 1e-11
        );
        // Doubling L_max more than doubles the cap (extra log growth).
        let base = tau_star(2, 3, 5000.0, 0.1, 0.05);
        assert!(tau_star(2, 3, 10000.0, 0.1, 0.05) > 2.0 * base);
        // Halving ε grows the cap by more than 4 (extra log growth).
        assert!(tau_star(2, 3, 5000.0, 0.05, 0.05) > 4.0 * base);
    }

    #[test]
    fn detection_threshold_matches_reference_and_shrinks_with_window() {
        assert_relative_eq!(
            threshold_b(1000.0, 2, 1e-6).unwrap(),
            0.915474466579,
            max_relative = 1e-11
        );
        let mut last = f64::INFINITY;
        for w in [100.0, 1000.0, 10_000.0, 100_000.0] {
            let b = threshold_b(w, 2, 1e-6).unwrap();
            assert!(b < last, "b did not shrink at w = {w}");
            last = b;
        }
        assert!(threshold_b(1000.0, 2, 1.5).is_err());
        assert!(threshold_b(0.0, 2, 1e-6).is_err());
        assert!(assumption_feasible(0.3, 0.8));
        assert!(!assumption_feasible(0.5, 0.8));
    }

    #[test]
    fn false_alarm_budget_and_window_rules() {
        let tau = tau_star(2, 3, 5000.0, 0.03, 0.05);
        assert_relative_eq!(tau, 3.92834275664e13, max_relative = 1e-11);
        assert_relative_eq!(
            delta_fae(6, 0.05, tau, 3),
            1.62002329995e-29,
            max_relative = 1e-10
        );
        assert_eq!(default_window(3000, 6), 166);
        assert_eq!(default_window(3000, 2), 500);
        // Odd quotients round down to the nearest even window.
        assert_eq!(default_window(1002, 1), 334);
        assert_eq!(default_window(1004, 1), 334);
    }

    #[test]
    fn hardness_terms_match_reference_values() {
        let report = hardness_terms(&benchmark(), 0.1, 0.05, 6).unwrap();
        assert_eq!(report.best_arm, 0);
        assert_eq!(report.eps_best, vec![0, 2]);
        assert_relative_eq!(report.delta_min, 0.070326141918, max_relative = 1e-10);
        assert_relative_eq!(report.t_v, 206.523927409, max_relative = 1e-10);
        assert_eq!(report.t_v_arg, Some((0, 2)));
        assert_relative_eq!(report.t_d, 14978.6613678, max_relative = 1e-10);
        assert_eq!(report.t_d_arg, Some((0, 1)));
        assert_relative_eq!(report.t_r, 175882.118847, max_relative = 1e-10);
        assert_eq!(report.t_r_arg, Some((0, 2)));
        // Both near-best pairs give exactly L_max here; first in scan order
        // wins the annotation.
        assert_relative_eq!(report.h_de, 5000.0, max_relative = 1e-10);
        assert_relative_eq!(report.h_bar, 1.0483292971, max_relative = 1e-10);
        assert_eq!(report.h_bar_arg, Some((0, 1)));
        assert_relative_eq!(report.ps_bound, 191067.304142, max_relative = 1e-10);
        assert_eq!(report.ps_bound_arg, Some((0, 2)));
        assert_relative_eq!(report.t_v_n, 206.523927409, max_relative = 1e-10);
        assert_relative_eq!(report.t_d_n, 516309.818523, max_relative = 1e-10);
        // Combined-runner bound: the change-aware path wins here.
        assert_relative_eq!(
            report.overall,
            report.ps_bound.min(report.t_v_n + report.t_d_n),
            max_relative = 1e-15
        );
        assert!(report.overall < report.t_v_n + report.t_d_n);
        let (nc, arg) = report.n_c.unwrap();
        assert_relative_eq!(nc, 2.79922773949, max_relative = 1e-10);
        assert_eq!(arg, 2);
    }

    #[test]
    fn context_lower_bound_special_cases() {
        // Single context: the ratio is 1 for every alternative, so the bound
        // is exactly ln(1/(4δ)).
        let single = Instance {
            arms: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            thetas: vec![vec![0.8, 0.1]],
            probs: vec![1.0],
            lmin: 10,
            lmax: 20,
            schedule: ScheduleSpec::Random { p_lmin: 0.5 },
            noise: NoiseModel::UniformBounded,
        };
        let (nc, arg) = nc_lower_bound(&single, 0.1, 0.05).unwrap();
        assert_relative_eq!(nc, (1.0f64 / 0.2).ln(), max_relative = 1e-12);
        assert_eq!(arg, 1);
        assert!(matches!(
            nc_lower_bound(&single, 0.1, 0.3),
            Err(BoundsError::Domain(_))
        ));
        // A probability-zero context changes nothing.
        let mut padded = single.clone();
        padded.thetas.push(vec![0.0, 0.9]);
        padded.probs = vec![1.0, 0.0];
        let (nc_padded, _) = nc_lower_bound(&padded, 0.1, 0.05).unwrap();
        assert_relative_eq!(nc, nc_padded, max_relative = 1e-12);
    }

    #[test]
    fn single_context_hardness_collapses() {
        let single = Instance {
            arms: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            thetas: vec![vec![0.8, 0.1]],
            probs: vec![1.0],
            lmin: 10,
            lmax: 20,
            schedule: ScheduleSpec::Random { p_lmin: 0.5 },
            noise: NoiseModel::UniformBounded,
        };
        let eps = 0.1;
        let report = hardness_terms(&single, eps, 0.05, 2).unwrap();
        // One context with p = 1: H̄ = ((Δ₁+ε)/2)².
        let gap = 0.8 - 0.1;
        assert_relative_eq!(
            report.h_bar,
            ((gap + eps) / 2.0) * ((gap + eps) / 2.0),
            max_relative = 1e-12
        );
        // The mean gap equals the single per-context gap, so H_DE = L_max/4.
        assert_relative_eq!(report.h_de, 20.0 / 4.0, max_relative = 1e-12);
    }

    #[test]
    fn hardness_is_monotone_in_segment_length() {
        let mut inst = benchmark();
        let r1 = hardness_terms(&inst, 0.1, 0.05, 6).unwrap();
        inst.lmax = 10_000;
        let r2 = hardness_terms(&inst, 0.1, 0.05, 6).unwrap();
        assert_relative_eq!(r2.h_de, 2.0 * r1.h_de, max_relative = 1e-12);
        assert_relative_eq!(r2.t_d, 2.0 * r1.t_d, max_relative = 1e-12);
        assert_relative_eq!(r2.t_r, 2.0 * r1.t_r, max_relative = 1e-12);
        assert_relative_eq!(r2.t_v, r1.t_v, max_relative = 1e-12);
    }

    #[test]
    fn calculators_are_pure() {
        let a = hardness_terms(&benchmark(), 0.1, 0.05, 6).unwrap();
        let b = hardness_terms(&benchmark(), 0.1, 0.05, 6).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tied_best_arms_are_rejected() {
        let tied = Instance {
            arms: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            thetas: vec![vec![0.5, 0.5]],
            probs: vec![1.0],
            lmin: 10,
            lmax: 20,
            schedule: ScheduleSpec::Random { p_lmin: 0.5 },
            noise: NoiseModel::UniformBounded,
        };
        assert!(hardness_terms(&tied, 0.1, 0.05, 2).is_err());
        assert!(nc_lower_bound(&tied, 0.1, 0.05).is_err());
    }

    #[test]
    fn transductive_allocation_splits_two_orthogonal_arms() {
        // Two orthogonal arms, gap + ε = 1: the only direction is e₁ − e₂
        // whose design norm 1/v₁ + 1/v₂ is minimized at the even split with
        // value 4.
        let inst = Instance {
            arms: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            thetas: vec![vec![0.5, 0.0]],
            probs: vec![1.0],
            lmin: 10,
            lmax: 20,
            schedule: ScheduleSpec::Random { p_lmin: 0.5 },
            noise: NoiseModel::UniformBounded,
        };
        let (value, v) = transductive_singleton_bound(&inst, 0.5, 4000).unwrap();
        assert!((value - 4.0).abs() < 5e-3, "value {value}");
        assert!((v[0] - 0.5).abs() < 1e-2, "allocation {v:?}");
        assert!((v[1] - 0.5).abs() < 1e-2, "allocation {v:?}");
    }
}
