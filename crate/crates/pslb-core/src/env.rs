//! Piecewise-stationary linear bandit environment.
//!
//! An [`Instance`] bundles the arm set, the latent context vectors with their
//! sampling distribution, the changepoint schedule law, and the reward noise
//! model. An [`EnvState`] owns the seeded random streams and serves rewards
//! step by step under one of three observation regimes ([`Dynamics`]): reward
//! only, reward plus context index, or reward plus context vector and
//! changepoint flag.
//!
//! Randomness is split into named sub-streams (segment lengths, context
//! draws, noise) of a counter-based generator, so replays are bit-exact and
//! several algorithms can face the identical changepoint schedule and noise
//! sequence while drawing their own arms from a separate stream.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sub-stream indices of the environment generator. Arm sampling uses a
/// fourth stream owned by the algorithm side, so that two algorithms given
/// the same environment seed face the same schedule and noise.
const STREAM_SEGMENTS: u64 = 0;
const STREAM_CONTEXTS: u64 = 1;
const STREAM_NOISE: u64 = 2;
/// Stream index reserved for arm sampling by algorithm runners.
pub const STREAM_ARMS: u64 = 3;

/// Tolerance for the probability-simplex and normalization checks.
const VALIDATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("arm index {index} out of range for {count} arms")]
    ArmIndexOutOfRange { index: usize, count: usize },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("parameter out of range: {0}")]
    ParameterRange(String),
    #[error("degenerate instance: {0}")]
    Degenerate(String),
}

/// Reward noise law; every sample lies in [-1, 1] and has zero mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    /// Uniform on [-1, 1]. The default experimental noise.
    UniformBounded,
    /// Gaussian with standard deviation `sigma`, redrawn until the sample
    /// lands in [-1, 1].
    ClippedGaussian { sigma: f64 },
    /// No noise; rewards equal the mean exactly.
    #[serde(rename = "none")]
    Noiseless,
}

/// Law of the segment lengths between consecutive changepoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleSpec {
    /// Each segment independently has length `lmin` with probability
    /// `p_lmin`, otherwise `lmax`.
    Random { p_lmin: f64 },
    /// Deterministic lengths, cycled when exhausted. Every entry must lie in
    /// [lmin, lmax].
    Fixed { lengths: Vec<u64> },
}

/// Observation regime served by [`EnvState::step`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dynamics {
    /// Reward only.
    Hidden,
    /// Reward and the index of the active context.
    IndexRevealed,
    /// Reward, the active context vector (and its index), and a flag telling
    /// whether this step started a new segment.
    FullInfo,
}

/// A piecewise-stationary linear bandit problem, independent of any accuracy
/// target. Serializes to a flat document with keys `arms`, `thetas`, `probs`,
/// `lmin`, `lmax`, `schedule`, `noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    /// Arm feature vectors, K rows of dimension d. Must span ℝ^d.
    pub arms: Vec<Vec<f64>>,
    /// Latent context vectors, N rows of dimension d, with |xᵀθ| ≤ 1 for
    /// every arm x and context θ.
    pub thetas: Vec<Vec<f64>>,
    /// Context probabilities, one per theta, nonnegative and summing to 1.
    pub probs: Vec<f64>,
    /// Minimum segment length (inclusive), at least 1.
    pub lmin: u64,
    /// Maximum segment length (inclusive), at least `lmin`.
    pub lmax: u64,
    /// Segment-length law.
    pub schedule: ScheduleSpec,
    /// Reward noise law.
    pub noise: NoiseModel,
}

impl Instance {
    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn num_contexts(&self) -> usize {
        self.thetas.len()
    }

    pub fn dim(&self) -> usize {
        self.arms.first().map_or(0, Vec::len)
    }

    /// Arms as column vectors, for design computations.
    pub fn arm_vectors(&self) -> Vec<DVector<f64>> {
        self.arms
            .iter()
            .map(|a| DVector::from_column_slice(a))
            .collect()
    }

    /// Mean-reward table `m[j][i] = x_iᵀθ_j` (context-major).
    pub fn mean_table(&self) -> Vec<Vec<f64>> {
        self.thetas
            .iter()
            .map(|theta| self.arms.iter().map(|x| dot(x, theta)).collect())
            .collect()
    }

    /// Smallest over context pairs of the best single-arm separation
    /// `max_x |xᵀ(θ_j - θ_j')|`. Infinite when there are fewer than two
    /// contexts (nothing to distinguish).
    pub fn delta_c(&self) -> f64 {
        let n = self.num_contexts();
        let mut best = f64::INFINITY;
        for j in 0..n {
            for jp in (j + 1)..n {
                let sep = self
                    .arms
                    .iter()
                    .map(|x| (dot(x, &self.thetas[j]) - dot(x, &self.thetas[jp])).abs())
                    .fold(0.0f64, f64::max);
                best = best.min(sep);
            }
        }
        best
    }

    /// Checks all structural invariants: shapes, normalization |xᵀθ| ≤ 1,
    /// probability simplex, segment-length ordering, arm span, schedule and
    /// noise parameter ranges.
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |msg: String| Err(EnvError::InvalidInstance(msg));
        if self.arms.is_empty() {
            return bad("no arms".into());
        }
        if self.thetas.is_empty() {
            return bad("no contexts".into());
        }
        let d = self.arms[0].len();
        if d == 0 {
            return bad("zero-dimensional arms".into());
        }
        for (i, x) in self.arms.iter().enumerate() {
            if x.len() != d {
                return bad(format!("arm {i} has dimension {}, expected {d}", x.len()));
            }
            if !x.iter().all(|v| v.is_finite()) {
                return bad(format!("arm {i} has a non-finite entry"));
            }
        }
        for (j, theta) in self.thetas.iter().enumerate() {
            if theta.len() != d {
                return bad(format!(
                    "context {j} has dimension {}, expected {d}",
                    theta.len()
                ));
            }
            if !theta.iter().all(|v| v.is_finite()) {
                return bad(format!("context {j} has a non-finite entry"));
            }
        }
        if self.probs.len() != self.thetas.len() {
            return bad(format!(
                "{} probabilities for {} contexts",
                self.probs.len(),
                self.thetas.len()
            ));
        }
        if self.probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return bad("context probabilities must be finite and nonnegative".into());
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return bad(format!("context probabilities sum to {total}, expected 1"));
        }
        for (i, x) in self.arms.iter().enumerate() {
            for (j, theta) in self.thetas.iter().enumerate() {
                let m = dot(x, theta);
                if m.abs() > 1.0 + VALIDATION_TOLERANCE {
                    return bad(format!(
                        "|arm {i} · context {j}| = {} exceeds the normalization bound 1",
                        m.abs()
                    ));
                }
            }
        }
        if self.lmin == 0 {
            return bad("lmin must be at least 1".into());
        }
        if self.lmin > self.lmax {
            return bad(format!("lmin = {} exceeds lmax = {}", self.lmin, self.lmax));
        }
        match &self.schedule {
            ScheduleSpec::Random { p_lmin } => {
                if !(0.0..=1.0).contains(p_lmin) {
                    return bad(format!("p_lmin = {p_lmin} outside [0, 1]"));
                }
            }
            ScheduleSpec::Fixed { lengths } => {
                if lengths.is_empty() {
                    return bad("fixed schedule has no lengths".into());
                }
                for (l, len) in lengths.iter().enumerate() {
                    if *len < self.lmin || *len > self.lmax {
                        return bad(format!(
                            "fixed segment length {len} at position {l} outside [{}, {}]",
                            self.lmin, self.lmax
                        ));
                    }
                }
            }
        }
        if let NoiseModel::ClippedGaussian { sigma } = self.noise {
            if !(sigma.is_finite() && sigma > 0.0) {
                return bad(format!("clipped-Gaussian sigma = {sigma} must be positive"));
            }
        }
        let rows = nalgebra::DMatrix::from_fn(self.arms.len(), d, |i, j| self.arms[i][j]);
        if rows.rank(1e-9) < d {
            return bad(format!("arms do not span ℝ^{d}"));
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean return of an arm under the context distribution: Σ_j p_j x_iᵀθ_j.
pub fn expected_return(instance: &Instance, arm_index: usize) -> f64 {
    let x = &instance.arms[arm_index];
    instance
        .probs
        .iter()
        .zip(&instance.thetas)
        .map(|(p, theta)| p * dot(x, theta))
        .sum()
}

/// Minimal-index maximizer of the mean return; the canonical best arm when
/// the maximum is tied.
pub fn best_arm(instance: &Instance) -> usize {
    let mut best = 0usize;
    let mut best_mu = f64::NEG_INFINITY;
    for i in 0..instance.num_arms() {
        let mu = expected_return(instance, i);
        if mu > best_mu {
            best = i;
            best_mu = mu;
        }
    }
    best
}

/// Indices (ascending) of all arms whose mean return is within `epsilon` of
/// the best mean return.
pub fn eps_best_set(instance: &Instance, epsilon: f64) -> Vec<usize> {
    let mus: Vec<f64> = (0..instance.num_arms())
        .map(|i| expected_return(instance, i))
        .collect();
    let top = mus.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    mus.iter()
        .enumerate()
        .filter(|(_, mu)| **mu >= top - epsilon)
        .map(|(i, _)| i)
        .collect()
}

/// One step's feedback. `reward` is always present; the other fields depend
/// on the [`Dynamics`] served.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub reward: f64,
    /// Index of the active context; present under `IndexRevealed` and
    /// `FullInfo`.
    pub context_index: Option<usize>,
    /// The active context vector itself; present under `FullInfo`.
    pub context_vector: Option<Vec<f64>>,
    /// Whether this step began a new segment (a fresh context draw); present
    /// under `FullInfo`. The very first step counts as a changepoint.
    pub changepoint: Option<bool>,
}

/// Live environment: owns the instance, the derived mean table, and the
/// seeded random sub-streams. Single-owner and single-threaded; concurrent
/// trials each build their own state.
#[derive(Debug, Clone)]
pub struct EnvState {
    instance: Instance,
    /// `mu[j][i] = x_iᵀθ_j`.
    mu: Vec<Vec<f64>>,
    seg_rng: ChaCha8Rng,
    ctx_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    /// Steps served so far; the next call to `step` serves time `t + 1`.
    t: u64,
    current_context: usize,
    /// Time at which the next fresh context is drawn (before serving).
    next_changepoint: u64,
    /// Number of segments started so far.
    segment_index: u64,
}

impl EnvState {
    /// Validates the instance and prepares the random sub-streams. The first
    /// step always draws a fresh context (the schedule starts at time 1).
    pub fn new(instance: &Instance, seed: u64) -> Result<Self, EnvError> {
        instance.validate()?;
        let mut seg_rng = ChaCha8Rng::seed_from_u64(seed);
        seg_rng.set_stream(STREAM_SEGMENTS);
        let mut ctx_rng = ChaCha8Rng::seed_from_u64(seed);
        ctx_rng.set_stream(STREAM_CONTEXTS);
        let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
        noise_rng.set_stream(STREAM_NOISE);
        Ok(EnvState {
            mu: instance.mean_table(),
            instance: instance.clone(),
            seg_rng,
            ctx_rng,
            noise_rng,
            t: 0,
            current_context: 0,
            next_changepoint: 1,
            segment_index: 0,
        })
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    /// Steps served so far.
    pub fn t(&self) -> u64 {
        self.t
    }

    /// Index of the context currently in force (meaningful once `t ≥ 1`).
    pub fn current_context(&self) -> usize {
        self.current_context
    }

    /// Time at which the next segment begins.
    pub fn next_changepoint(&self) -> u64 {
        self.next_changepoint
    }

    /// Number of segments started so far.
    pub fn segment_index(&self) -> u64 {
        self.segment_index
    }

    /// Serves one step: advances time, redraws the context when a segment
    /// boundary is reached, and returns the noisy reward for `arm_index`
    /// with the side information selected by `dynamics`.
    pub fn step(&mut self, arm_index: usize, dynamics: Dynamics) -> Result<Observation, EnvError> {
        let k = self.instance.num_arms();
        if arm_index >= k {
            return Err(EnvError::ArmIndexOutOfRange {
                index: arm_index,
                count: k,
            });
        }
        self.t += 1;
        let changed = self.t == self.next_changepoint;
        if changed {
            self.current_context = self.draw_context();
            self.segment_index += 1;
            let len = self.draw_segment_length();
            self.next_changepoint = self.t + len;
        }
        let noise = self.draw_noise();
        let reward = self.mu[self.current_context][arm_index] + noise;
        let (context_index, context_vector, changepoint) = match dynamics {
            Dynamics::Hidden => (None, None, None),
            Dynamics::IndexRevealed => (Some(self.current_context), None, None),
            Dynamics::FullInfo => (
                Some(self.current_context),
                Some(self.instance.thetas[self.current_context].clone()),
                Some(changed),
            ),
        };
        Ok(Observation {
            reward,
            context_index,
            context_vector,
            changepoint,
        })
    }

    fn draw_context(&mut self) -> usize {
        let u: f64 = self.ctx_rng.random();
        let mut acc = 0.0;
        for (j, p) in self.instance.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return j;
            }
        }
        self.instance.num_contexts() - 1
    }

    fn draw_segment_length(&mut self) -> u64 {
        match &self.instance.schedule {
            ScheduleSpec::Random { p_lmin } => {
                let u: f64 = self.seg_rng.random();
                if u < *p_lmin {
                    self.instance.lmin
                } else {
                    self.instance.lmax
                }
            }
            ScheduleSpec::Fixed { lengths } => {
                let pos = ((self.segment_index - 1) % lengths.len() as u64) as usize;
                lengths[pos]
            }
        }
    }

    fn draw_noise(&mut self) -> f64 {
        match self.instance.noise {
            NoiseModel::UniformBounded => 2.0 * self.noise_rng.random::<f64>() - 1.0,
            NoiseModel::ClippedGaussian { sigma } => loop {
                let z: f64 = self.noise_rng.sample(StandardNormal);
                let v = sigma * z;
                if v.abs() <= 1.0 {
                    return v;
                }
            },
            NoiseModel::Noiseless => 0.0,
        }
    }
}

/// Builds the rotated-basis benchmark family in dimension `d ≥ 2` with angle
/// `phi ∈ (0, π/4)`:
///
/// * 2d−1 arms: the standard basis e₁, …, e_d plus the rotated arms
///   cos(φ)·e₁ + sin(φ)·e_{i+1} for i = 1, …, d−1;
/// * 2(d−1) equiprobable contexts cos(φ)·e₁ ± sin(φ)·e_{i+1};
/// * e₁ has the best mean return cos φ, the rotated arms have cos²φ, and the
///   remaining basis arms have 0.
///
/// Segment lengths default to the benchmark schedule (3000 or 5000 with
/// P[3000] = 0.8) and the noise defaults to uniform on [-1, 1]; callers can
/// override those fields on the returned instance. `phi = 0` collapses all
/// contexts onto e₁ and is rejected, since no arm can then distinguish any
/// pair of contexts.
pub fn make_example_5_1(d: usize, phi: f64) -> Result<Instance, EnvError> {
    if d < 2 {
        return Err(EnvError::ParameterRange(format!(
            "dimension d = {d} must be at least 2"
        )));
    }
    if !(phi.is_finite() && (0.0..std::f64::consts::FRAC_PI_4).contains(&phi)) {
        return Err(EnvError::ParameterRange(format!(
            "phi = {phi} outside [0, π/4)"
        )));
    }
    let (s, c) = phi.sin_cos();
    let mut arms: Vec<Vec<f64>> = Vec::with_capacity(2 * d - 1);
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        arms.push(e);
    }
    for i in 1..d {
        let mut x = vec![0.0; d];
        x[0] = c;
        x[i] = s;
        arms.push(x);
    }
    let mut thetas: Vec<Vec<f64>> = Vec::with_capacity(2 * (d - 1));
    for i in 1..d {
        for sign in [1.0, -1.0] {
            let mut theta = vec![0.0; d];
            theta[0] = c;
            theta[i] = sign * s;
            thetas.push(theta);
        }
    }
    let n = thetas.len();
    let instance = Instance {
        arms,
        thetas,
        probs: vec![1.0 / n as f64; n],
        lmin: 3000,
        lmax: 5000,
        schedule: ScheduleSpec::Random { p_lmin: 0.8 },
        noise: NoiseModel::UniformBounded,
    };
    let dc = instance.delta_c();
    if dc <= 0.0 {
        return Err(EnvError::Degenerate(format!(
            "phi = {phi} makes all contexts coincide (context separation {dc}); \
             no change in context is detectable"
        )));
    }
    Ok(instance)
}

/// Builds the needle-in-a-haystack family in dimension `d ≥ 2` with
/// `0 < a < b ≤ 1` and context weight `p`:
///
/// * d arms: the standard basis;
/// * N = d contexts: θ₁ = a·e₁ and, for j ≥ 2, θ_j = (a, b, …, b) − b·e_j;
/// * context probabilities 1 − (N−1)p for θ₁ and p for each other context.
///
/// e₁ keeps mean return a in every context while each other basis arm earns
/// b only in the N−2 rare contexts that favor it, so the mean gap is
/// a − (N−2)·p·b. For d > 2, `p < a / ((N−2)·b)` keeps that gap positive.
/// Schedule and noise default as in [`make_example_5_1`].
pub fn make_example_i_2(d: usize, a: f64, b: f64, p: f64) -> Result<Instance, EnvError> {
    if d < 2 {
        return Err(EnvError::ParameterRange(format!(
            "dimension d = {d} must be at least 2"
        )));
    }
    if !(a.is_finite() && b.is_finite() && 0.0 < a && a < b && b <= 1.0) {
        return Err(EnvError::ParameterRange(format!(
            "need 0 < a < b ≤ 1, got a = {a}, b = {b}"
        )));
    }
    let n = d;
    let p_head = 1.0 - (n as f64 - 1.0) * p;
    if !(p.is_finite() && p > 0.0 && p_head > 0.0) {
        return Err(EnvError::ParameterRange(format!(
            "context weight p = {p} must satisfy 0 < p and (N-1)p < 1"
        )));
    }
    if n > 2 && p >= a / ((n as f64 - 2.0) * b) {
        return Err(EnvError::ParameterRange(format!(
            "context weight p = {p} must stay below a/((N-2)b) = {} so that the \
             first arm remains best on average",
            a / ((n as f64 - 2.0) * b)
        )));
    }
    let mut arms: Vec<Vec<f64>> = Vec::with_capacity(d);
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        arms.push(e);
    }
    let mut thetas: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut head = vec![0.0; d];
    head[0] = a;
    thetas.push(head);
    for j in 1..n {
        let mut theta = vec![b; d];
        theta[0] = a;
        theta[j] = 0.0;
        thetas.push(theta);
    }
    let mut probs = vec![p; n];
    probs[0] = p_head;
    Ok(Instance {
        arms,
        thetas,
        probs,
        lmin: 3000,
        lmax: 5000,
        schedule: ScheduleSpec::Random { p_lmin: 0.8 },
        noise: NoiseModel::UniformBounded,
    })
}
