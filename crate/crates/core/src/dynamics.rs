//! Discrete optimisers and the Euler–Maruyama discretisation of the
//! label-noise gradient flow.
//!
//! All algorithms act on `θ` with the quadratic parametrisation
//! `β = θ ⊙ θ`. One step of label-noise gradient descent is
//!
//! ```text
//! θ⁺ = θ − (γ/n) [Xᵀ(Xθ² − y − ξ)] ⊙ θ,     ξ = √Δ · z,  z ~ N(0, I_n)
//! ```
//!
//! and the Euler–Maruyama step of the renormalised flow is
//!
//! ```text
//! θ⁺ = θ − γ [Xnᵀ(Xnθ² − yn)] ⊙ θ + √(δγ) · θ ⊙ (Xnᵀ z),   δ = γΔ/n.
//! ```
//!
//! The two are the same map up to floating-point ordering; the stochastic
//! SGD variants replace the full residual with a uniformly sampled row.
//! Trajectories are deterministic given the seed, and the per-step
//! Gaussian increments can be recorded or replayed so the dual
//! diagnostics can reuse the exact Brownian path.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::Problem;

/// Coordinates whose magnitude passes this limit flag an explosion before
/// the square `β = θ²` can overflow.
const THETA_LIMIT: f64 = 1e150;

/// The simulated update rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Gd,
    Sgd,
    Lngd,
    Lnsgd,
    EulerMaruyama,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Gd => "gd",
            Algorithm::Sgd => "sgd",
            Algorithm::Lngd => "lngd",
            Algorithm::Lnsgd => "lnsgd",
            Algorithm::EulerMaruyama => "em",
        }
    }

    /// Algorithms that sample one row per step.
    pub fn is_sampled(&self) -> bool {
        matches!(self, Algorithm::Sgd | Algorithm::Lnsgd)
    }

    /// Algorithms that inject label noise.
    pub fn uses_label_noise(&self) -> bool {
        matches!(self, Algorithm::Lngd | Algorithm::Lnsgd | Algorithm::EulerMaruyama)
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gd" => Ok(Algorithm::Gd),
            "sgd" => Ok(Algorithm::Sgd),
            "lngd" => Ok(Algorithm::Lngd),
            "lnsgd" => Ok(Algorithm::Lnsgd),
            "em" => Ok(Algorithm::EulerMaruyama),
            other => Err(format!("unknown algorithm '{other}'")),
        }
    }
}

/// Step size, label-noise variance and the derived normalised noise.
#[derive(Debug, Clone, Copy)]
pub struct NoiseConfig {
    /// Step size `γ`.
    pub gamma: f64,
    /// Label-noise variance `Δ`.
    pub label_variance: f64,
    /// Normalised noise `δ = γΔ/n`.
    pub delta: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn new(gamma: f64, label_variance: f64, n: usize, seed: u64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter {
                what: "gamma",
                value: gamma,
            });
        }
        if !(label_variance >= 0.0 && label_variance.is_finite()) {
            return Err(Error::InvalidParameter {
                what: "label_variance",
                value: label_variance,
            });
        }
        Ok(Self {
            gamma,
            label_variance,
            delta: gamma * label_variance / n as f64,
            seed,
        })
    }
}

/// Options for [`simulate_with`].
#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    /// Keep the per-step Gaussian increments in memory (n doubles per
    /// step). Turn off for very long horizons; replay can always
    /// regenerate them from the seed.
    pub record_noise: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { record_noise: true }
    }
}

/// A recorded path of the discrete dynamics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub algorithm: Algorithm,
    pub cfg: NoiseConfig,
    pub record_every: usize,
    /// Steps actually executed (shorter than requested after an explosion).
    pub steps_run: usize,
    /// Step index of each recorded state (starts at 0).
    pub step_indices: Vec<usize>,
    /// `t_j = j γ` for each recorded state.
    pub times: Vec<f64>,
    pub theta: Vec<DVector<f64>>,
    pub beta: Vec<DVector<f64>>,
    /// Flat increments, `n` per executed step, when recording was on.
    pub gaussians: Option<Vec<f64>>,
    /// Coordinate sign changes seen along the whole path.
    pub zero_crossings: usize,
    /// Step at which a non-finite state appeared, if any.
    pub explosion: Option<usize>,
    pub theta0: DVector<f64>,
}

impl Trajectory {
    pub fn last_beta(&self) -> &DVector<f64> {
        self.beta.last().expect("trajectory records its start")
    }

    pub fn last_theta(&self) -> &DVector<f64> {
        self.theta.last().expect("trajectory records its start")
    }

    pub fn n(&self) -> usize {
        self.gaussians
            .as_ref()
            .map(|g| g.len() / self.steps_run.max(1))
            .unwrap_or(0)
    }

    /// Per-step increment source for replaying the exact Brownian path.
    pub fn noise_replay(&self, n: usize) -> NoiseReplay<'_> {
        match &self.gaussians {
            Some(g) => NoiseReplay::Stored { data: g, n, pos: 0 },
            None => NoiseReplay::Seeded {
                stream: NoiseStream::new(self.cfg.seed, self.algorithm, n),
            },
        }
    }
}

/// Per-step draws for one trajectory: a sampled row index (SGD variants)
/// and the Gaussian load.
///
/// Full-batch algorithms consume `n` normals per step; sampled ones
/// consume the row index and a single normal (the sampled label's noise),
/// recorded as `z_i e_i`. This keeps `gd ≡ lngd(Δ=0)` and
/// `sgd ≡ lnsgd(Δ=0)` bit-identical per seed and makes recording not
/// affect the path.
pub struct NoiseStream {
    rng: ChaCha8Rng,
    sampled: bool,
    n: usize,
}

impl NoiseStream {
    pub fn new(seed: u64, algorithm: Algorithm, n: usize) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            sampled: algorithm.is_sampled(),
            n,
        }
    }

    /// Fill `z` for the next step; returns the sampled row if any.
    pub fn next_step(&mut self, z: &mut [f64]) -> Option<usize> {
        if self.sampled {
            let i = self.rng.random_range(0..self.n);
            z.fill(0.0);
            z[i] = StandardNormal.sample(&mut self.rng);
            Some(i)
        } else {
            for v in z.iter_mut() {
                *v = StandardNormal.sample(&mut self.rng);
            }
            None
        }
    }
}

/// Replay source for previously generated increments.
pub enum NoiseReplay<'a> {
    Stored { data: &'a [f64], n: usize, pos: usize },
    Seeded { stream: NoiseStream },
}

impl NoiseReplay<'_> {
    pub fn next_step(&mut self, z: &mut [f64]) {
        match self {
            NoiseReplay::Stored { data, n, pos } => {
                z.copy_from_slice(&data[*pos..*pos + *n]);
                *pos += *n;
            }
            NoiseReplay::Seeded { stream } => {
                stream.next_step(z);
            }
        }
    }
}

#[inline(always)]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    let mut s3 = 0.0;
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (pa, pb) in (&mut ca).zip(&mut cb) {
        s0 += pa[0] * pb[0];
        s1 += pa[1] * pb[1];
        s2 += pa[2] * pb[2];
        s3 += pa[3] * pb[3];
    }
    let mut rest = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        rest += x * y;
    }
    (s0 + s2) + (s1 + s3) + rest
}

#[inline(always)]
fn axpy(alpha: f64, x: &[f64], out: &mut [f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += alpha * v;
    }
}

#[inline(always)]
fn axpy2(a: f64, b: f64, x: &[f64], out_a: &mut [f64], out_b: &mut [f64]) {
    for ((oa, ob), v) in out_a.iter_mut().zip(out_b.iter_mut()).zip(x) {
        *oa += a * v;
        *ob += b * v;
    }
}

/// Row-major copies of the design plus scratch space for the step maps.
pub(crate) struct StepKernel {
    n: usize,
    d: usize,
    x_rows: Vec<f64>,
    y: Vec<f64>,
    xn_rows: Vec<f64>,
    yn: Vec<f64>,
    resid: Vec<f64>,
    grad: Vec<f64>,
    noise_acc: Vec<f64>,
}

/// Outcome of one in-place step.
pub(crate) struct StepOutcome {
    pub crossings: usize,
    pub finite: bool,
}

impl StepKernel {
    pub fn new(p: &Problem) -> Self {
        let (n, d) = (p.n(), p.d());
        let mut x_rows = vec![0.0; n * d];
        let mut xn_rows = vec![0.0; n * d];
        for i in 0..n {
            for k in 0..d {
                x_rows[i * d + k] = p.x[(i, k)];
                xn_rows[i * d + k] = p.xn[(i, k)];
            }
        }
        Self {
            n,
            d,
            x_rows,
            y: p.y.iter().copied().collect(),
            xn_rows,
            yn: p.yn.iter().copied().collect(),
            resid: vec![0.0; n],
            grad: vec![0.0; d],
            noise_acc: vec![0.0; d],
        }
    }

    #[inline(always)]
    fn apply_multiplier(theta: &mut [f64], beta: &mut [f64], mult: impl Fn(usize) -> f64) -> StepOutcome {
        let mut crossings = 0usize;
        let mut finite = true;
        for k in 0..theta.len() {
            let old = theta[k];
            let new = old * mult(k);
            if old * new < 0.0 {
                crossings += 1;
            }
            if !(new.is_finite() && new.abs() < THETA_LIMIT) {
                finite = false;
            }
            theta[k] = new;
            beta[k] = new * new;
        }
        StepOutcome { crossings, finite }
    }

    /// Label-noise GD step on the raw variables; `sd = √Δ` (0 gives plain GD).
    pub fn lngd(&mut self, gamma: f64, sd: f64, theta: &mut [f64], beta: &mut [f64], z: &[f64]) -> StepOutcome {
        let d = self.d;
        for i in 0..self.n {
            let row = &self.x_rows[i * d..(i + 1) * d];
            self.resid[i] = dot(row, beta) - self.y[i] - sd * z[i];
        }
        self.grad.fill(0.0);
        for i in 0..self.n {
            let row = &self.x_rows[i * d..(i + 1) * d];
            axpy(self.resid[i], row, &mut self.grad);
        }
        let c = gamma / self.n as f64;
        let grad = &self.grad;
        Self::apply_multiplier(theta, beta, |k| 1.0 - c * grad[k])
    }

    /// Label-noise SGD step on the sampled row `i`; `sd = √Δ`.
    pub fn lnsgd(&mut self, gamma: f64, sd: f64, i: usize, theta: &mut [f64], beta: &mut [f64], zi: f64) -> StepOutcome {
        let d = self.d;
        let row = &self.x_rows[i * d..(i + 1) * d];
        let r = dot(row, beta) - self.y[i] - sd * zi;
        let c = gamma * r;
        Self::apply_multiplier(theta, beta, |k| 1.0 - c * row[k])
    }

    /// Euler–Maruyama step of the renormalised flow with noise scale
    /// `√(δγ)` on a separate diffusion term.
    pub fn em(&mut self, gamma: f64, delta: f64, theta: &mut [f64], beta: &mut [f64], z: &[f64]) -> StepOutcome {
        let d = self.d;
        for i in 0..self.n {
            let row = &self.xn_rows[i * d..(i + 1) * d];
            self.resid[i] = dot(row, beta) - self.yn[i];
        }
        self.grad.fill(0.0);
        self.noise_acc.fill(0.0);
        for i in 0..self.n {
            let row = &self.xn_rows[i * d..(i + 1) * d];
            axpy2(self.resid[i], z[i], row, &mut self.grad, &mut self.noise_acc);
        }
        let sn = (delta * gamma).sqrt();
        let grad = &self.grad;
        let noise = &self.noise_acc;
        Self::apply_multiplier(theta, beta, |k| 1.0 - gamma * grad[k] + sn * noise[k])
    }
}

fn check_step_inputs(theta: &DVector<f64>, p: &Problem) -> Result<()> {
    if theta.len() != p.d() {
        return Err(Error::DimensionMismatch {
            what: "theta",
            expected: p.d(),
            got: theta.len(),
        });
    }
    Ok(())
}

fn one_shot(
    p: &Problem,
    theta: &DVector<f64>,
    f: impl FnOnce(&mut StepKernel, &mut [f64], &mut [f64]) -> StepOutcome,
) -> Result<DVector<f64>> {
    let mut kernel = StepKernel::new(p);
    let mut th: Vec<f64> = theta.iter().copied().collect();
    let mut beta: Vec<f64> = th.iter().map(|v| v * v).collect();
    let out = f(&mut kernel, &mut th, &mut beta);
    if !out.finite {
        return Err(Error::Exploded { step: 0 });
    }
    Ok(DVector::from_vec(th))
}

/// One label-noise GD step, `θ⁺ = θ − (γ/n)[Xᵀ(Xθ² − y − √Δ z)] ⊙ θ`.
pub fn lngd_step(theta: &DVector<f64>, p: &Problem, cfg: &NoiseConfig, z: &DVector<f64>) -> Result<DVector<f64>> {
    check_step_inputs(theta, p)?;
    if z.len() != p.n() {
        return Err(Error::DimensionMismatch {
            what: "z",
            expected: p.n(),
            got: z.len(),
        });
    }
    let sd = cfg.label_variance.sqrt();
    one_shot(p, theta, |k, th, b| k.lngd(cfg.gamma, sd, th, b, z.as_slice()))
}

/// One plain GD step (label-noise GD with `Δ = 0`).
pub fn gd_step(theta: &DVector<f64>, p: &Problem, cfg: &NoiseConfig) -> Result<DVector<f64>> {
    check_step_inputs(theta, p)?;
    one_shot(p, theta, |k, th, b| {
        k.lngd(cfg.gamma, 0.0, th, b, &vec![0.0; p.n()])
    })
}

/// One label-noise SGD step on row `i`,
/// `θ⁺ = θ − γ(⟨θ², x_i⟩ − y_i − √Δ z_i) x_i ⊙ θ`.
pub fn lnsgd_step(
    theta: &DVector<f64>,
    p: &Problem,
    cfg: &NoiseConfig,
    i: usize,
    z: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_step_inputs(theta, p)?;
    if i >= p.n() {
        return Err(Error::SupportOutOfRange { index: i, d: p.n() });
    }
    let sd = cfg.label_variance.sqrt();
    one_shot(p, theta, |k, th, b| k.lnsgd(cfg.gamma, sd, i, th, b, z[i]))
}

/// One plain SGD step on row `i` (label-noise SGD with `Δ = 0`).
pub fn sgd_step(theta: &DVector<f64>, p: &Problem, cfg: &NoiseConfig, i: usize) -> Result<DVector<f64>> {
    check_step_inputs(theta, p)?;
    if i >= p.n() {
        return Err(Error::SupportOutOfRange { index: i, d: p.n() });
    }
    one_shot(p, theta, |k, th, b| k.lnsgd(cfg.gamma, 0.0, i, th, b, 0.0))
}

/// One Euler–Maruyama step of the renormalised label-noise flow.
pub fn em_step(theta: &DVector<f64>, p: &Problem, cfg: &NoiseConfig, z: &DVector<f64>) -> Result<DVector<f64>> {
    check_step_inputs(theta, p)?;
    if z.len() != p.n() {
        return Err(Error::DimensionMismatch {
            what: "z",
            expected: p.n(),
            got: z.len(),
        });
    }
    one_shot(p, theta, |k, th, b| {
        k.em(cfg.gamma, cfg.delta, th, b, z.as_slice())
    })
}

/// Iterate the chosen algorithm, recording every `record_every`-th state
/// (plus the start and final states) and, by default, every Gaussian
/// increment. Deterministic given `cfg.seed`.
pub fn simulate(
    theta0: &DVector<f64>,
    p: &Problem,
    cfg: &NoiseConfig,
    algorithm: Algorithm,
    num_steps: usize,
    record_every: usize,
) -> Result<Trajectory> {
    simulate_with(theta0, p, cfg, algorithm, num_steps, record_every, SimOptions::default())
}

/// [`simulate`] with explicit options.
pub fn simulate_with(
    theta0: &DVector<f64>,
    p: &Problem,
    cfg: &NoiseConfig,
    algorithm: Algorithm,
    num_steps: usize,
    record_every: usize,
    opts: SimOptions,
) -> Result<Trajectory> {
    check_step_inputs(theta0, p)?;
    if theta0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter {
            what: "theta0",
            value: f64::NAN,
        });
    }
    let record_every = record_every.max(1);
    let n = p.n();
    let mut kernel = StepKernel::new(p);
    let mut stream = NoiseStream::new(cfg.seed, algorithm, n);
    let sd = if algorithm.uses_label_noise() {
        cfg.label_variance.sqrt()
    } else {
        0.0
    };

    let mut theta: Vec<f64> = theta0.iter().copied().collect();
    let mut beta: Vec<f64> = theta.iter().map(|v| v * v).collect();
    let mut z = vec![0.0; n];

    let expected_records = num_steps / record_every + 2;
    let mut traj = Trajectory {
        algorithm,
        cfg: *cfg,
        record_every,
        steps_run: 0,
        step_indices: Vec::with_capacity(expected_records),
        times: Vec::with_capacity(expected_records),
        theta: Vec::with_capacity(expected_records),
        beta: Vec::with_capacity(expected_records),
        gaussians: opts.record_noise.then(|| Vec::with_capacity(num_steps.saturating_mul(n))),
        zero_crossings: 0,
        explosion: None,
        theta0: theta0.clone(),
    };
    let record =
        |traj: &mut Trajectory, j: usize, theta: &[f64], beta: &[f64]| {
            traj.step_indices.push(j);
            traj.times.push(j as f64 * cfg.gamma);
            traj.theta.push(DVector::from_column_slice(theta));
            traj.beta.push(DVector::from_column_slice(beta));
        };
    record(&mut traj, 0, &theta, &beta);

    for j in 0..num_steps {
        let sampled = stream.next_step(&mut z);
        if let Some(g) = traj.gaussians.as_mut() {
            g.extend_from_slice(&z);
        }
        let out = match algorithm {
            Algorithm::Gd | Algorithm::Lngd => kernel.lngd(cfg.gamma, sd, &mut theta, &mut beta, &z),
            Algorithm::EulerMaruyama => kernel.em(cfg.gamma, cfg.delta, &mut theta, &mut beta, &z),
            Algorithm::Sgd | Algorithm::Lnsgd => {
                let i = sampled.expect("sampled algorithms draw a row");
                kernel.lnsgd(cfg.gamma, sd, i, &mut theta, &mut beta, z[i])
            }
        };
        traj.zero_crossings += out.crossings;
        traj.steps_run = j + 1;
        if !out.finite {
            traj.explosion = Some(j);
            break;
        }
        if (j + 1) % record_every == 0 || j + 1 == num_steps {
            record(&mut traj, j + 1, &theta, &beta);
        }
    }
    if traj.explosion.is_some() && *traj.step_indices.last().unwrap() != traj.steps_run - 1 {
        // keep the last finite state out of the record; the explosion
        // step itself is not representable
        traj.steps_run = traj.steps_run.saturating_sub(1);
    }
    Ok(traj)
}
