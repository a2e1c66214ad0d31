//! G-optimal experimental design over a finite arm set.
//!
//! For arms x_1, …, x_K spanning ℝ^d and a weight vector λ on the simplex,
//! the information matrix is A(λ) = Σ_i λ_i x_i x_iᵀ and the design
//! objective is g(λ) = max_i ‖x_i‖²_{A(λ)⁻¹}. The Kiefer–Wolfowitz theorem
//! gives min_λ g(λ) = d, so a design is accepted once g(λ) ≤ d(1 + tol).
//!
//! The solver is Frank–Wolfe with Wolfe–Atwood away steps and the
//! Kumar–Yildirim initialization. The Cholesky factor of A(λ) is maintained
//! by symmetric rank-one updates, with a full refactorization every
//! [`REFACTOR_INTERVAL`] updates to control floating-point drift.
//!
//! Everything here is pure and deterministic: identical inputs produce
//! bit-identical allocations, with argmax/argmin ties broken by lowest index.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

/// Default convergence tolerance on g(λ) ≤ d(1 + tol).
pub const DEFAULT_TOLERANCE: f64 = 1e-6;
/// Hard cap on Frank–Wolfe iterations.
pub const MAX_ITERATIONS: usize = 100_000;
/// Weights below this threshold are pruned before renormalization.
pub const PRUNE_THRESHOLD: f64 = 1e-12;
/// Full Cholesky refactorization cadence, in rank-one updates.
pub const REFACTOR_INTERVAL: usize = 256;

/// Failure modes of the design solver.
#[derive(Debug, Error)]
pub enum DesignError {
    #[error("arm set is empty")]
    EmptyArmSet,
    #[error("arm {index} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("arm coordinates must be finite")]
    NonFinite,
    #[error("arms do not span the ambient space of dimension {dim}")]
    RankDeficient { dim: usize },
    #[error("design solver did not converge after {iterations} iterations (g = {g})")]
    NoConvergence { iterations: usize, g: f64 },
}

/// A G-optimal allocation: weights over the arm set together with the
/// information matrix inverse and the certified design value.
///
/// Immutable after construction and safe to share across threads.
#[derive(Debug, Clone)]
pub struct Allocation {
    weights: Vec<f64>,
    info_inverse: DMatrix<f64>,
    g_value: f64,
    cumulative: Vec<f64>,
}

impl Allocation {
    /// Weight vector over the input arm order; sums to 1.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// A(λ)⁻¹ for the returned weights.
    pub fn info_inverse(&self) -> &DMatrix<f64> {
        &self.info_inverse
    }

    /// The certified design value g(λ) = max_i ‖x_i‖²_{A(λ)⁻¹}.
    pub fn g_value(&self) -> f64 {
        self.g_value
    }

    /// Indices with nonzero weight.
    pub fn support(&self) -> Vec<usize> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    /// Maps one uniform draw u ∈ [0, 1) to an arm index by inverting the
    /// cumulative weight function. Consumes exactly the one value given.
    pub fn sample_index(&self, u: f64) -> usize {
        // partition_point returns the count of cumulative entries ≤ u, which
        // is the first index whose cumulative mass strictly exceeds u.
        let idx = self.cumulative.partition_point(|c| *c <= u);
        idx.min(self.weights.len() - 1)
    }
}

/// Draws one arm index from the allocation, consuming exactly one uniform
/// draw from `rng` regardless of the outcome.
pub fn sample_arm<R: Rng>(alloc: &Allocation, rng: &mut R) -> usize {
    alloc.sample_index(rng.random::<f64>())
}

/// Recomputes g(λ) = max_i x_iᵀ A(λ)⁻¹ x_i from the stored inverse.
pub fn max_design_norm(alloc: &Allocation, arms: &[Vec<f64>]) -> f64 {
    let mut g = 0.0f64;
    for x in arms {
        let v = DVector::from_column_slice(x);
        let n = (&alloc.info_inverse * &v).dot(&v);
        if n > g {
            g = n;
        }
    }
    g
}

/// Computes a G-optimal design over `arms` to relative tolerance `tol`.
///
/// Errors if the arms are empty, dimensionally inconsistent, non-finite, or
/// rank-deficient, or if the iteration cap is hit before g ≤ d(1 + tol).
pub fn compute_g_optimal(arms: &[Vec<f64>], tol: f64) -> Result<Allocation, DesignError> {
    if arms.is_empty() {
        return Err(DesignError::EmptyArmSet);
    }
    let d = arms[0].len();
    if d == 0 {
        return Err(DesignError::RankDeficient { dim: 0 });
    }
    for (index, x) in arms.iter().enumerate() {
        if x.len() != d {
            return Err(DesignError::DimensionMismatch {
                index,
                got: x.len(),
                expected: d,
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(DesignError::NonFinite);
        }
    }
    let k = arms.len();
    let xs: Vec<DVector<f64>> = arms.iter().map(|x| DVector::from_column_slice(x)).collect();

    let mut weights = kumar_yildirim_init(&xs, d)?;
    let df = d as f64;
    let mut chol = refactor(&xs, &weights).ok_or(DesignError::RankDeficient { dim: d })?;
    let mut norms = vec![0.0f64; k];
    let mut updates_since_refactor = 0usize;

    let mut iterations = 0usize;
    let mut g = f64::INFINITY;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        for i in 0..k {
            norms[i] = chol_norm(&chol, &xs[i]);
        }
        let (i_plus, g_now) = argmax(&norms);
        g = g_now;
        if g <= df * (1.0 + tol) {
            return finish(xs, weights, tol, d);
        }
        let (i_minus, n_minus) = argmin_support(&norms, &weights);

        // Wolfe–Atwood direction choice: the larger Kiefer–Wolfowitz
        // violation decides between the toward and the away vertex.
        let toward = (g - df) >= (df - n_minus);
        let (i_step, n) = if toward {
            (i_plus, g)
        } else {
            (i_minus, n_minus)
        };

        // Exact line search for the log-det objective along
        // λ ← (1 − α)λ + α e_i; negative α is an away step.
        let alpha_raw = if n > 1.0 + 1e-15 {
            (n - df) / (df * (n - 1.0))
        } else {
            f64::NEG_INFINITY
        };
        let alpha = if toward {
            alpha_raw
        } else {
            let w = weights[i_step];
            if w >= 1.0 - 1e-15 {
                // Away from the entire mass is impossible; no progress left.
                return Err(DesignError::NoConvergence { iterations, g });
            }
            alpha_raw.max(-w / (1.0 - w))
        };
        if !alpha.is_finite() || alpha >= 1.0 {
            return Err(DesignError::NoConvergence { iterations, g });
        }

        let scale = 1.0 - alpha;
        for w in weights.iter_mut() {
            *w *= scale;
        }
        weights[i_step] += alpha;
        if weights[i_step] < PRUNE_THRESHOLD {
            weights[i_step] = 0.0;
        }

        updates_since_refactor += 1;
        if updates_since_refactor >= REFACTOR_INTERVAL {
            chol = refactor(&xs, &weights).ok_or(DesignError::RankDeficient { dim: d })?;
            updates_since_refactor = 0;
        } else {
            // A ← (1 − α)(A + α/(1 − α) · x xᵀ), as factor operations.
            let beta = alpha / scale;
            let ok = if beta >= 0.0 {
                chol_rank_one(&mut chol, &xs[i_step], beta.sqrt(), 1.0)
            } else {
                chol_rank_one(&mut chol, &xs[i_step], (-beta).sqrt(), -1.0)
            };
            if !ok {
                chol = refactor(&xs, &weights).ok_or(DesignError::RankDeficient { dim: d })?;
                updates_since_refactor = 0;
            } else {
                let s = scale.sqrt();
                chol.iter_mut().for_each(|v| *v *= s);
            }
        }
    }
    Err(DesignError::NoConvergence {
        iterations: MAX_ITERATIONS,
        g,
    })
}

/// Kumar–Yildirim initialization: walk the coordinate directions, each time
/// projected orthogonal to the span of the arms already chosen, and take the
/// arm with the largest absolute response. Produces d linearly independent
/// arms (or proves rank deficiency) and the uniform design over them.
fn kumar_yildirim_init(xs: &[DVector<f64>], d: usize) -> Result<Vec<f64>, DesignError> {
    let k = xs.len();
    let mut chosen: Vec<usize> = Vec::with_capacity(d);
    // Orthonormal basis of the span of the arms chosen so far.
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(d);
    for axis in 0..d {
        let mut dir = DVector::zeros(d);
        dir[axis] = 1.0;
        for q in &basis {
            let c = q.dot(&dir);
            dir.axpy(-c, q, 1.0);
        }
        let nd = dir.norm();
        if nd < 1e-12 {
            // This coordinate is already covered by the chosen arms.
            continue;
        }
        dir /= nd;
        let mut best = (0usize, -1.0f64);
        for (i, x) in xs.iter().enumerate() {
            let r = x.dot(&dir).abs();
            if r > best.1 {
                best = (i, r);
            }
        }
        if best.1 < 1e-12 {
            // No arm has a component along a direction outside the current
            // span, so the arm set cannot span ℝ^d.
            return Err(DesignError::RankDeficient { dim: d });
        }
        let idx = best.0;
        chosen.push(idx);
        let mut q = xs[idx].clone();
        for b in &basis {
            let c = b.dot(&q);
            q.axpy(-c, b, 1.0);
        }
        let nq = q.norm();
        if nq < 1e-12 {
            return Err(DesignError::RankDeficient { dim: d });
        }
        basis.push(q / nq);
    }
    if chosen.len() < d {
        return Err(DesignError::RankDeficient { dim: d });
    }
    let mut weights = vec![0.0f64; k];
    let w = 1.0 / chosen.len() as f64;
    for i in chosen {
        weights[i] = w;
    }
    Ok(weights)
}

fn finish(
    xs: Vec<DVector<f64>>,
    mut weights: Vec<f64>,
    tol: f64,
    d: usize,
) -> Result<Allocation, DesignError> {
    for w in weights.iter_mut() {
        if *w < PRUNE_THRESHOLD {
            *w = 0.0;
        }
    }
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    let a = info_matrix(&xs, &weights);
    let chol = nalgebra::Cholesky::new(a).ok_or(DesignError::RankDeficient { dim: d })?;
    let info_inverse = chol.inverse();
    let mut g = 0.0f64;
    for x in &xs {
        let n = (&info_inverse * x).dot(x);
        if n > g {
            g = n;
        }
    }
    debug_assert!(g <= d as f64 * (1.0 + 2.0 * tol.max(DEFAULT_TOLERANCE)));
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0f64;
    for w in &weights {
        acc += w;
        cumulative.push(acc);
    }
    if let Some(last) = cumulative.last_mut() {
        *last = 1.0;
    }
    Ok(Allocation {
        weights,
        info_inverse,
        g_value: g,
        cumulative,
    })
}

fn info_matrix(xs: &[DVector<f64>], weights: &[f64]) -> DMatrix<f64> {
    let d = xs[0].len();
    let mut a = DMatrix::zeros(d, d);
    for (x, w) in xs.iter().zip(weights) {
        if *w > 0.0 {
            for i in 0..d {
                let wi = w * x[i];
                for j in 0..=i {
                    a[(i, j)] += wi * x[j];
                }
            }
        }
    }
    // Only the lower triangle was accumulated; mirror it.
    for i in 0..d {
        for j in (i + 1)..d {
            a[(i, j)] = a[(j, i)];
        }
    }
    a
}

fn refactor(xs: &[DVector<f64>], weights: &[f64]) -> Option<DMatrix<f64>> {
    let a = info_matrix(xs, weights);
    nalgebra::Cholesky::new(a).map(|c| c.unpack())
}

/// ‖L⁻¹x‖² by forward substitution against the lower-triangular factor.
fn chol_norm(l: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    let d = x.len();
    let mut y = x.clone();
    for i in 0..d {
        let mut s = y[i];
        for j in 0..i {
            s -= l[(i, j)] * y[j];
        }
        y[i] = s / l[(i, i)];
    }
    y.norm_squared()
}

/// In-place rank-one Cholesky update (`sign = 1`) or downdate (`sign = -1`)
/// of A = LLᵀ by `v vᵀ`. Returns false if a downdate would destroy positive
/// definiteness, signaling that a full refactorization is needed.
fn chol_rank_one(l: &mut DMatrix<f64>, v: &DVector<f64>, scale: f64, sign: f64) -> bool {
    let n = v.len();
    let mut x = v * scale;
    for k in 0..n {
        let lkk = l[(k, k)];
        let r2 = lkk * lkk + sign * x[k] * x[k];
        if r2 <= 0.0 || !r2.is_finite() {
            return false;
        }
        let r = r2.sqrt();
        let c = r / lkk;
        let s = x[k] / lkk;
        l[(k, k)] = r;
        for i in (k + 1)..n {
            let lik = (l[(i, k)] + sign * s * x[i]) / c;
            x[i] = c * x[i] - s * lik;
            l[(i, k)] = lik;
        }
    }
    true
}

fn argmax(values: &[f64]) -> (usize, f64) {
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, v) in values.iter().enumerate() {
        if *v > best.1 {
            best = (i, *v);
        }
    }
    best
}

fn argmin_support(values: &[f64], weights: &[f64]) -> (usize, f64) {
    let mut best = (0usize, f64::INFINITY);
    for (i, v) in values.iter().enumerate() {
        if weights[i] > 0.0 && *v < best.1 {
            best = (i, *v);
        }
    }
    best
}
