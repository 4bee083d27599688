//! Closed-form weighted-Lasso solutions and an independent numerical oracle.
//!
//! The program is `min_{β ≥ 0} ‖Xn β − yn‖² + δ⟨hn, β⟩`. A pair `(β, μ)`
//! of nonnegative vectors solves it iff it satisfies the KKT condition
//! `2Xnᵀ(Xnβ − yn) + δ hn = μ`, `⟨μ, β⟩ = 0`.
//!
//! Two noise thresholds split the closed-form landscape:
//! `δ₋ = min_{k∈S*} β*_k / [(2Xn_{S*}ᵀXn_{S*})⁻¹ hn_{S*}]_k` (standard
//! regime below it, exact support recovery) and
//! `δ₊ = max_k 2[Xnᵀyn]_k / hn_k` clipped at zero (large regime above it,
//! collapse to zero). The band in between is explicitly refused.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{GroundTruth, Problem};

/// Default acceptance tolerance on KKT residuals.
pub const KKT_TOL: f64 = 1e-8;

/// Noise regime of a weighted-Lasso instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `δ < δ₋`: the minimiser keeps the ground-truth support.
    Standard,
    /// `δ > δ₊` (or `S* = ∅`): the minimiser is identically zero.
    Large,
    /// `δ ∈ [δ₋, δ₊]`: no closed form is emitted.
    Untreated,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Standard => "standard",
            Regime::Large => "large",
            Regime::Untreated => "untreated",
        }
    }
}

/// The noise thresholds, together with the support coordinates that
/// impose no constraint on `δ₋` (nonpositive denominator).
#[derive(Debug, Clone)]
pub struct Thresholds {
    pub delta_minus: f64,
    pub delta_plus: f64,
    /// Support coordinates excluded from the `δ₋` minimum.
    pub unconstrained: Vec<usize>,
}

impl Thresholds {
    /// Classify a noise scale. Empty supports land in the large regime
    /// for every `δ > 0` (`δ₊ = 0`, `δ₋ = +∞` by convention, so the
    /// large test runs first).
    pub fn classify(&self, delta: f64) -> Regime {
        if delta > self.delta_plus {
            Regime::Large
        } else if delta < self.delta_minus {
            Regime::Standard
        } else {
            Regime::Untreated
        }
    }
}

/// Compute `δ₋` and `δ₊` for an instance. With an empty support,
/// `δ₋ = +∞` and `δ₊ = 0`.
pub fn thresholds(p: &Problem, gt: &GroundTruth) -> Thresholds {
    let delta_plus = (0..p.d())
        .filter(|&k| p.hn[k] > 0.0)
        .map(|k| 2.0 * p.xn.column(k).dot(&p.yn) / p.hn[k])
        .fold(0.0f64, f64::max);
    if gt.support.is_empty() {
        return Thresholds {
            delta_minus: f64::INFINITY,
            delta_plus: 0.0,
            unconstrained: Vec::new(),
        };
    }
    let q = shrinkage_direction(p, &gt.support);
    let mut delta_minus = f64::INFINITY;
    let mut unconstrained = Vec::new();
    for (j, &k) in gt.support.iter().enumerate() {
        if q[j] > 0.0 {
            delta_minus = delta_minus.min(gt.beta_star[k] / q[j]);
        } else {
            unconstrained.push(k);
        }
    }
    Thresholds {
        delta_minus,
        delta_plus,
        unconstrained,
    }
}

/// `(2 Xn_SᵀXn_S)⁻¹ hn_S`, the direction along which the support entries
/// shrink as `δ` grows.
fn shrinkage_direction(p: &Problem, support: &[usize]) -> DVector<f64> {
    let xs = p.xn_cols(support);
    let gram2 = (xs.transpose() * &xs) * 2.0;
    let hs = linalg::gather(&p.hn, support);
    gram2.lu().solve(&hs).expect("gram invertible on a valid support")
}

/// A closed-form primal/dual pair with its regime tag.
#[derive(Debug, Clone)]
pub struct LassoSolution {
    pub delta: f64,
    pub beta_hat: DVector<f64>,
    pub mu_hat: DVector<f64>,
    pub regime: Regime,
    pub delta_minus: f64,
    pub delta_plus: f64,
}

impl LassoSolution {
    /// Support entries of `β̂` (nonzero coordinates).
    pub fn support(&self) -> Vec<usize> {
        (0..self.beta_hat.len())
            .filter(|&k| self.beta_hat[k] > 0.0)
            .collect()
    }
}

/// Weighted-Lasso objective `‖Xn β − yn‖² + δ⟨hn, β⟩`.
pub fn wl_objective(p: &Problem, beta: &DVector<f64>, delta: f64) -> Result<f64> {
    if beta.len() != p.d() {
        return Err(Error::DimensionMismatch {
            what: "beta",
            expected: p.d(),
            got: beta.len(),
        });
    }
    if let Some((k, &v)) = beta.iter().enumerate().find(|(_, &v)| v < 0.0) {
        return Err(Error::NegativeEntry { index: k, value: v });
    }
    Ok((&p.xn * beta - &p.yn).norm_squared() + delta * p.hn.dot(beta))
}

/// The explicit primal/dual witness pair for a noise scale `δ > 0`.
///
/// Standard regime: `β̂ = [β*_{S*} − δ(2Xn_{S*}ᵀXn_{S*})⁻¹hn_{S*}, 0]` with
/// the dual supported off `S*`. Large regime: `β̂ = 0`,
/// `μ̂ = δ hn − 2Xnᵀyn`. Empty support: `β̂ = 0`, `μ̂ = δ hn`.
/// Inside the untreated band the call is refused.
pub fn closed_form(p: &Problem, gt: &GroundTruth, delta: f64) -> Result<LassoSolution> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter {
            what: "delta",
            value: delta,
        });
    }
    let th = thresholds(p, gt);
    if gt.support.is_empty() {
        return Ok(LassoSolution {
            delta,
            beta_hat: DVector::zeros(p.d()),
            mu_hat: &p.hn * delta,
            regime: Regime::Large,
            delta_minus: th.delta_minus,
            delta_plus: th.delta_plus,
        });
    }
    match th.classify(delta) {
        Regime::Standard => {
            let q = shrinkage_direction(p, &gt.support);
            let mut beta_hat = DVector::zeros(p.d());
            for (j, &k) in gt.support.iter().enumerate() {
                beta_hat[k] = gt.beta_star[k] - delta * q[j];
            }
            let check = crate::model::domination_condition(p, &gt.support)?;
            let margin = check.margin.ok_or(Error::SingularGram {
                ratio: check.condition_ratio,
            })?;
            // margins are in raw h units; mu lives on the hn = h/n scale
            let mut mu_hat = DVector::zeros(p.d());
            for (j, &k) in gt.off_support(p.d()).iter().enumerate() {
                mu_hat[k] = delta * margin[j] / p.n() as f64;
            }
            Ok(LassoSolution {
                delta,
                beta_hat,
                mu_hat,
                regime: Regime::Standard,
                delta_minus: th.delta_minus,
                delta_plus: th.delta_plus,
            })
        }
        Regime::Large => {
            let mu_hat = &p.hn * delta - p.xn.transpose() * &p.yn * 2.0;
            Ok(LassoSolution {
                delta,
                beta_hat: DVector::zeros(p.d()),
                mu_hat,
                regime: Regime::Large,
                delta_minus: th.delta_minus,
                delta_plus: th.delta_plus,
            })
        }
        Regime::Untreated => Err(Error::UntreatedNoise {
            delta,
            delta_minus: th.delta_minus,
            delta_plus: th.delta_plus,
        }),
    }
}

/// Pointwise KKT residuals of a candidate pair; pure evaluation.
#[derive(Debug, Clone)]
pub struct KktResidual {
    /// `2Xnᵀ(Xnβ − yn) + δ hn − μ`.
    pub stationarity: DVector<f64>,
    /// `⟨μ, β⟩`.
    pub complementarity: f64,
    /// `max(0, −min β, −min μ)`.
    pub nonneg_violation: f64,
}

impl KktResidual {
    pub fn stationarity_linf(&self) -> f64 {
        self.stationarity.amax()
    }

    /// Accept iff all residuals pass at tolerance `tol`.
    pub fn accepted(&self, tol: f64) -> bool {
        self.stationarity_linf() <= tol
            && self.complementarity.abs() <= tol
            && self.nonneg_violation == 0.0
    }
}

/// Evaluate the KKT residuals of `(β, μ)` at noise scale `δ`.
pub fn kkt_residual(p: &Problem, beta: &DVector<f64>, mu: &DVector<f64>, delta: f64) -> KktResidual {
    let stationarity =
        p.xn.transpose() * (&p.xn * beta - &p.yn) * 2.0 + &p.hn * delta - mu;
    KktResidual {
        stationarity,
        complementarity: mu.dot(beta),
        nonneg_violation: (-beta.min()).max(-mu.min()).max(0.0),
    }
}

/// Outcome of the projected-gradient oracle.
#[derive(Debug, Clone)]
pub struct PgdOutcome {
    pub beta: DVector<f64>,
    pub iterations: usize,
    /// `‖β − max(0, β − η∇)‖∞ / η` at exit.
    pub pg_norm: f64,
    pub converged: bool,
}

/// Projected gradient descent on the weighted-Lasso objective over the
/// nonnegative orthant, from the all-ones start, with step
/// `η = 1/(2λ_max(XnᵀXn))`.
pub fn solve_numeric(p: &Problem, delta: f64, tol: f64, max_iter: usize) -> PgdOutcome {
    solve_numeric_from(p, delta, &DVector::from_element(p.d(), 1.0), tol, max_iter)
}

/// Projected gradient descent from an arbitrary nonnegative start.
pub fn solve_numeric_from(
    p: &Problem,
    delta: f64,
    beta0: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> PgdOutcome {
    let sigma_max = linalg::op_norm(&p.xn);
    let lip = 2.0 * sigma_max * sigma_max;
    let eta = if lip > 0.0 { 1.0 / lip } else { 1.0 };
    let mut beta = beta0.map(|v| v.max(0.0));
    let mut pg_norm = f64::INFINITY;
    for it in 0..max_iter {
        let grad = p.xn.transpose() * (&p.xn * &beta - &p.yn) * 2.0 + &p.hn * delta;
        let next = (&beta - &grad * eta).map(|v| v.max(0.0));
        pg_norm = (&beta - &next).amax() / eta;
        beta = next;
        if pg_norm <= tol {
            return PgdOutcome {
                beta,
                iterations: it + 1,
                pg_norm,
                converged: true,
            };
        }
    }
    PgdOutcome {
        beta,
        iterations: max_iter,
        pg_norm,
        converged: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_gaussian, ground_truth, GeneratorConfig, Problem};
    use nalgebra::DMatrix;

    fn pet() -> (Problem, GroundTruth) {
        let p = Problem::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 2.0]),
            DVector::from_vec(vec![1.0]),
        )
        .unwrap();
        let gt = ground_truth(&p, &[0]).unwrap();
        (p, gt)
    }

    #[test]
    fn objective_hand_values() {
        let (p, gt) = pet();
        // beta = 0: objective is ||yn||^2
        assert!((wl_objective(&p, &DVector::zeros(2), 0.3).unwrap() - 1.0).abs() < 1e-12);
        // beta = (1, 0), delta = 1: 0 + 1*1 = 1
        let b = DVector::from_vec(vec![1.0, 0.0]);
        assert!((wl_objective(&p, &b, 1.0).unwrap() - 1.0).abs() < 1e-12);
        // interpolator at delta -> 0
        assert!(wl_objective(&p, &gt.beta_star, 1e-300).unwrap() < 1e-12);
        assert!(wl_objective(&p, &DVector::from_vec(vec![-0.1, 0.0]), 1.0).is_err());
    }

    #[test]
    fn thresholds_pet_instance() {
        let (p, gt) = pet();
        let th = thresholds(&p, &gt);
        // delta_minus = 1 / ((1/2)*1) = 2 ; delta_plus = max(2, 1) = 2
        assert!((th.delta_minus - 2.0).abs() < 1e-12);
        assert!((th.delta_plus - 2.0).abs() < 1e-12);
        assert!(th.unconstrained.is_empty());
    }

    #[test]
    fn thresholds_zero_output() {
        let p = Problem::new(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        let gt = ground_truth(&p, &[]).unwrap();
        let th = thresholds(&p, &gt);
        assert_eq!(th.delta_plus, 0.0);
        assert!(th.delta_minus.is_infinite());
        assert_eq!(th.classify(0.7), Regime::Large);
    }

    #[test]
    fn gaussian_thresholds_track_extreme_amplitudes() {
        // at n >> s the gram concentrates, so delta_- ~ 2 beta*_min and
        // delta_+ ~ 2 beta*_max within a factor of two
        let (p, gt) = generate_gaussian(&GeneratorConfig::new(40, 100, 4, 13)).unwrap();
        let th = thresholds(&p, &gt);
        let bmin = gt
            .support
            .iter()
            .map(|&k| gt.beta_star[k])
            .fold(f64::INFINITY, f64::min);
        let bmax = gt
            .support
            .iter()
            .map(|&k| gt.beta_star[k])
            .fold(0.0f64, f64::max);
        assert!(th.delta_minus >= bmin && th.delta_minus <= 4.0 * bmin);
        assert!(th.delta_plus >= bmax && th.delta_plus <= 4.0 * bmax);
    }

    #[test]
    fn closed_form_standard_regime_pet() {
        let (p, gt) = pet();
        let sol = closed_form(&p, &gt, 1.0).unwrap();
        assert_eq!(sol.regime, Regime::Standard);
        assert!((sol.beta_hat[0] - 0.5).abs() < 1e-12);
        assert_eq!(sol.beta_hat[1], 0.0);
        assert_eq!(sol.mu_hat[0], 0.0);
        assert!((sol.mu_hat[1] - 2.0).abs() < 1e-12);
        let r = kkt_residual(&p, &sol.beta_hat, &sol.mu_hat, 1.0);
        assert!(r.accepted(1e-10));
    }

    #[test]
    fn closed_form_large_regime_pet() {
        let (p, gt) = pet();
        let sol = closed_form(&p, &gt, 3.0).unwrap();
        assert_eq!(sol.regime, Regime::Large);
        assert_eq!(sol.beta_hat.amax(), 0.0);
        assert!((sol.mu_hat[0] - 1.0).abs() < 1e-12);
        assert!((sol.mu_hat[1] - 8.0).abs() < 1e-12);
        assert!(kkt_residual(&p, &sol.beta_hat, &sol.mu_hat, 3.0).accepted(1e-10));
    }

    #[test]
    fn closed_form_zero_output() {
        let p = Problem::new(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        let gt = ground_truth(&p, &[]).unwrap();
        let sol = closed_form(&p, &gt, 0.7).unwrap();
        assert_eq!(sol.beta_hat.amax(), 0.0);
        assert!((sol.mu_hat[0] - 0.35).abs() < 1e-12);
        assert!(kkt_residual(&p, &sol.beta_hat, &sol.mu_hat, 0.7).accepted(1e-12));
    }

    #[test]
    fn untreated_band_is_refused() {
        let (p, gt) = pet();
        match closed_form(&p, &gt, 2.0) {
            Err(Error::UntreatedNoise { delta_minus, delta_plus, .. }) => {
                assert!((delta_minus - 2.0).abs() < 1e-12);
                assert!((delta_plus - 2.0).abs() < 1e-12);
            }
            other => panic!("expected untreated refusal, got {other:?}"),
        }
    }

    #[test]
    fn interpolator_is_not_the_minimiser() {
        let (p, gt) = pet();
        let delta = 0.5;
        let mu = &p.hn * delta;
        let r = kkt_residual(&p, &gt.beta_star, &mu, delta);
        // stationarity vanishes but complementarity is positive
        assert!(r.stationarity_linf() <= 1e-12);
        assert!(r.complementarity > 0.0);
        assert!(!r.accepted(1e-10));
    }

    #[test]
    fn stationarity_detects_support_perturbations() {
        let (p, gt) = generate_gaussian(&GeneratorConfig::new(10, 20, 3, 21)).unwrap();
        let th = thresholds(&p, &gt);
        let delta = 0.5 * th.delta_minus;
        let sol = closed_form(&p, &gt, delta).unwrap();
        let mut beta = sol.beta_hat.clone();
        let k = gt.support[0];
        beta[k] += 1e-3;
        let r = kkt_residual(&p, &beta, &sol.mu_hat, delta);
        let xs = p.xn_cols(&gt.support);
        let lam_min = {
            let (lo, _) = crate::linalg::singular_extrema(&xs);
            lo * lo
        };
        assert!(r.stationarity_linf() >= 2e-3 * lam_min);
    }

    #[test]
    fn pgd_matches_closed_form_pet() {
        let (p, gt) = pet();
        for delta in [1.0, 3.0] {
            let sol = closed_form(&p, &gt, delta).unwrap();
            let out = solve_numeric(&p, delta, 1e-12, 200_000);
            assert!(out.converged);
            assert!((&out.beta - &sol.beta_hat).amax() <= 1e-8);
        }
    }

    #[test]
    fn minimiser_approaches_ground_truth_as_delta_vanishes() {
        // the closed form shrinks affinely, so beta_hat - beta* is O(delta)
        let (p, gt) = generate_gaussian(&GeneratorConfig::new(40, 100, 4, 17)).unwrap();
        let tiny = closed_form(&p, &gt, 1e-8).unwrap();
        assert!((&tiny.beta_hat - &gt.beta_star).amax() <= 1e-6);
        // the oracle reaches the same minimiser at noise scales where the
        // off-support descent is numerically attainable
        let th = thresholds(&p, &gt);
        for frac in [0.02, 0.2] {
            let delta = frac * th.delta_minus;
            let sol = closed_form(&p, &gt, delta).unwrap();
            let out = solve_numeric(&p, delta, 1e-10, 400_000);
            assert!(out.converged, "pg_norm = {}", out.pg_norm);
            assert!((&out.beta - &sol.beta_hat).amax() <= 1e-6);
        }
    }

    #[test]
    fn pgd_flags_the_vanishing_noise_stall() {
        // at delta = 1e-8 the off-support drive is O(delta) per step, so
        // the oracle cannot finish the descent; it must say so instead of
        // pretending convergence
        let (p, _) = generate_gaussian(&GeneratorConfig::new(20, 50, 3, 17)).unwrap();
        let out = solve_numeric(&p, 1e-8, 1e-12, 50_000);
        assert!(!out.converged);
        assert!(out.pg_norm <= 1e-8 * p.hn.amax() * 10.0);
    }

    #[test]
    fn pgd_unique_minimiser_from_random_starts() {
        use rand::Rng;
        use rand::SeedableRng;
        let (p, gt) = generate_gaussian(&GeneratorConfig::new(8, 16, 2, 23)).unwrap();
        let th = thresholds(&p, &gt);
        let delta = 0.5 * th.delta_minus;
        let reference = closed_form(&p, &gt, delta).unwrap().beta_hat;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let b0 = DVector::from_fn(p.d(), |_, _| rng.random_range(0.0..3.0));
            let out = solve_numeric_from(&p, delta, &b0, 1e-12, 400_000);
            assert!(out.converged);
            assert!((&out.beta - &reference).amax() <= 1e-6);
        }
    }

    #[test]
    fn support_shrinkage_is_monotone_in_delta() {
        let (p, gt) = generate_gaussian(&GeneratorConfig::new(12, 24, 3, 31)).unwrap();
        let th = thresholds(&p, &gt);
        let lo = closed_form(&p, &gt, 0.3 * th.delta_minus).unwrap();
        let hi = closed_form(&p, &gt, 0.7 * th.delta_minus).unwrap();
        for &k in &gt.support {
            assert!(lo.beta_hat[k] >= hi.beta_hat[k] - 1e-14);
        }
    }

    #[test]
    fn support_minimum_vanishes_at_delta_minus() {
        let (p, gt) = generate_gaussian(&GeneratorConfig::new(12, 24, 3, 37)).unwrap();
        let th = thresholds(&p, &gt);
        let near = closed_form(&p, &gt, 0.9999 * th.delta_minus).unwrap();
        let min_near = gt
            .support
            .iter()
            .map(|&k| near.beta_hat[k])
            .fold(f64::INFINITY, f64::min);
        let mid = closed_form(&p, &gt, 0.5 * th.delta_minus).unwrap();
        let min_mid = gt
            .support
            .iter()
            .map(|&k| mid.beta_hat[k])
            .fold(f64::INFINITY, f64::min);
        assert!(min_near >= 0.0);
        assert!(min_near <= 1e-3 * min_mid);
    }

    #[test]
    fn complementarity_always_zero_for_closed_forms() {
        for seed in 0..10u64 {
            let (p, gt) = generate_gaussian(&GeneratorConfig::new(6, 14, 2, 40 + seed)).unwrap();
            let th = thresholds(&p, &gt);
            for delta in [0.1 * th.delta_minus, 0.9 * th.delta_minus, 1.1 * th.delta_plus] {
                let sol = closed_form(&p, &gt, delta).unwrap();
                let r = kkt_residual(&p, &sol.beta_hat, &sol.mu_hat, delta);
                assert!(r.complementarity.abs() <= 1e-12);
                assert!(r.accepted(1e-8), "seed {seed} delta {delta}");
            }
        }
    }
}
