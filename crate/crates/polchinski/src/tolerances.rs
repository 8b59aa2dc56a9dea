//! Centralised numeric tolerances and statistical thresholds.
//!
//! Every threshold used by tests and by the acceptance experiments lives
//! here, with its origin.

/// Accumulated f64 round-off across FFT round trips and spectral sums.
/// Transforms on grids up to 256² keep well below this.
pub const EXACT_F64: f64 = 1e-10;

/// Direct double-loop summation against the FFT path.
pub const SUMMATION_F64: f64 = 1e-12;

/// Adaptive quadrature of the scale derivative against the closed form.
pub const QUADRATURE_F64: f64 = 1e-8;

/// Central finite differences of the bare potential at step h = 1e-5:
/// truncation O(h²) = 1e-10 relative, round-off O(eps/h) = 1e-11, so 1e-6
/// is comfortable.
pub const FD_EXACT: f64 = 1e-6;
pub const FD_STEP: f64 = 1e-5;

/// Finite differences through the Monte Carlo estimate of the renormalised
/// potential with common random numbers; the residual is estimator noise.
pub const FD_MONTE_CARLO: f64 = 1e-2;

/// Standard z-score gate for stochastic comparisons (three standard errors).
pub const Z_CRIT: f64 = 3.0;

/// Importance-sampling reliability: flag estimates whose effective sample
/// size falls below this fraction of the sample count.
pub const ESS_FRACTION: f64 = 0.1;

/// Rejection sampling is declared infeasible below this acceptance rate.
pub const REJECTION_FLOOR: f64 = 1e-4;

/// Exponent clamp for Wick exponentials: e^{±700} brackets the f64 range.
pub const EXP_CLAMP: f64 = 700.0;

/// Default clamp on a single flow drift increment per site.
pub const DRIFT_CLAMP: f64 = 10.0;

/// Sweep statistics that the estimates of the theory call "uniform" are
/// gated by a factor-2 band across lattice spacings.
pub const SWEEP_STABILITY_FACTOR: f64 = 2.0;

/// Spread of bound-check ratios: the max over a cell must stay below ten
/// times the median, otherwise no uniform constant is plausible.
pub const RATIO_SPREAD: f64 = 10.0;
