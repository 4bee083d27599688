//! Crate-wide error type.

/// Errors reported by the model, solver and simulation layers.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("design must be overparametrised with d >= n >= 1 (n = {n}, d = {d})")]
    BadShape { n: usize, d: usize },

    #[error("support is empty")]
    EmptySupport,

    #[error("support index {index} out of range for d = {d}")]
    SupportOutOfRange { index: usize, d: usize },

    #[error("gram matrix on the support is numerically singular (sigma_min/sigma_max = {ratio:.3e})")]
    SingularGram { ratio: f64 },

    #[error("candidate support rejected as ground truth: {reason}")]
    NotGroundTruth { reason: String },

    #[error("nonnegative least squares stalled after {iterations} iterations")]
    NnlsStalled { iterations: usize },

    #[error("instance generation failed after {attempts} attempts ({summary})")]
    GenerationFailed { attempts: usize, summary: String },

    #[error("beta must be nonnegative: beta[{index}] = {value}")]
    NegativeEntry { index: usize, value: f64 },

    #[error("beta must be strictly positive: beta[{index}] = {value}")]
    NonPositiveEntry { index: usize, value: f64 },

    #[error("delta = {delta} lies in the untreated band [{delta_minus}, {delta_plus}]")]
    UntreatedNoise {
        delta: f64,
        delta_minus: f64,
        delta_plus: f64,
    },

    #[error("invalid parameter {what} = {value}")]
    InvalidParameter { what: &'static str, value: f64 },

    #[error("trajectory exploded at step {step}")]
    Exploded { step: usize },

    #[error("trajectory crossed zero on {count} coordinate steps; dual diagnostics need a sign-preserving path")]
    ZeroCrossings { count: usize },

    #[error("trajectory from {got} cannot drive dual diagnostics (needs label-noise GD or Euler-Maruyama)")]
    WrongAlgorithm { got: &'static str },

    #[error("dual constants are inconsistent: {what} residual = {residual:.3e}")]
    DualInconsistency { what: &'static str, residual: f64 },

    #[error("{what} is only defined in the {regime} regime")]
    WrongRegime {
        what: &'static str,
        regime: &'static str,
    },

    #[error("residual process starts at zero; the fluctuation comparison is undefined")]
    DegenerateResidual,

    #[error("the fluctuation comparison needs n >= 2 (got n = {n})")]
    DimensionTooSmall { n: usize },

    #[error("need at least {needed} samples, got {got}")]
    NotEnoughSamples { needed: usize, got: usize },

    #[error("exhaustive support scan is limited to d <= {limit} (got d = {d})")]
    ScanTooLarge { d: usize, limit: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
