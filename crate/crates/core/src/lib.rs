//! Label-noise gradient dynamics on quadratically parametrised linear regression.
//!
//! The library simulates (stochastic) gradient descent with injected label
//! noise on the model `x ↦ ⟨θ², x⟩`, computes in closed form the weighted
//! Lasso solution the flow implicitly targets, and provides the dual-process
//! machinery needed to verify the convergence envelopes pathwise at desk
//! scale.
//!
//! Module map:
//! - [`model`] — the regression instance, its renormalisation and the
//!   structural assumptions (nonnegative interpolators, degenerate columns,
//!   domination condition, ground truth).
//! - [`wlasso`] — closed-form weighted-Lasso primal/dual pairs, the noise
//!   thresholds `δ₋`/`δ₊`, KKT residuals, and an independent projected
//!   gradient solver used as an oracle.
//! - [`dynamics`] — discrete optimisers (GD, SGD, label-noise GD/SGD) and
//!   the Euler–Maruyama discretisation of the label-noise gradient flow.
//! - [`dual`] — dual/residual processes, the comparison processes `ζ` and
//!   `ξ`, envelope checks, and the stationary-law diagnostics (Poincaré
//!   constant, concentration tail).

pub mod dual;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod model;
pub mod wlasso;

pub use dual::{
    BoundKind, ComparisonPath, DriftComparison, DualConstants, DualDecomposition, DualPath,
    EnvelopeReport, PoincareBound, RadialIncrements, StationaryRun,
};
pub use dynamics::{Algorithm, NoiseConfig, SimOptions, Trajectory};
pub use error::{Error, Result};
pub use model::{AssumptionReport, DominationCheck, GeneratorConfig, GroundTruth, Problem};
pub use wlasso::{KktResidual, LassoSolution, PgdOutcome, Regime, Thresholds};
