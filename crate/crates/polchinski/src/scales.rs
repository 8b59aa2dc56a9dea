//! Covariance decomposition in scale and multiscale Gaussian sampling.
//!
//! The free-field covariance `c_∞ = (-Δ + m²)^{-1}` is split along a scale
//! parameter `t` as `c_t = (-Δ + m² + 1/t)^{-1}`, so that
//!
//! - `ĉ_t(k)   = 1 / (-Δ̂(k) + m² + 1/t)`        (monotone increasing in t)
//! - `q̂_t(k)   = 1 / (t(-Δ̂(k) + m²) + 1)`       (multiplier of `(ċ_t)^{1/2}`)
//! - `ĉ̇_t(k)  = q̂_t(k)²`
//! - `L_t      = √t ∧ 1/m`                       (effective length of scale t)
//!
//! A centred Gaussian field with covariance multiplier `σ²(k)` is sampled
//! spectrally: independent coefficients of variance `σ²(k)` under the crate's
//! transform normalisation, Hermitian-symmetrised, transformed back.  The
//! multiscale process is built by walking a dyadic scale grid downwards and
//! adding independent increments of covariance `ĉ_{t_{j+1}} - ĉ_{t_j}`; the
//! increment fields are retained so the flow can reuse the identical noise.

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{Field, SpectralField, TorusGrid};

/// Mass and grid: the parameters of the Gaussian reference measure.
#[derive(Debug, Clone, Copy)]
pub struct ScaleParams {
    mass: f64,
    grid: TorusGrid,
}

impl ScaleParams {
    /// The massless case is rejected: the reference measure needs `m > 0`.
    pub fn new(mass: f64, grid: TorusGrid) -> Result<Self> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::Domain(format!("mass must be positive, got {mass}")));
        }
        Ok(ScaleParams { mass, grid })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    /// `ĉ_t(k)`; `t = ∞` is allowed and gives `ĉ_∞(k)`.
    pub fn c_hat(&self, t: f64, k: [f64; 2]) -> Result<f64> {
        let lap = self.grid.neg_laplacian_multiplier(k)?;
        self.c_hat_from_lap(t, lap)
    }

    fn c_hat_from_lap(&self, t: f64, lap: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("scale must be positive, got {t}")));
        }
        let inv_t = if t.is_infinite() { 0.0 } else { 1.0 / t };
        Ok(1.0 / (lap + self.mass * self.mass + inv_t))
    }

    /// `q̂_t(k) = 1/(t(-Δ̂(k) + m²) + 1)`, the multiplier of `(ċ_t)^{1/2}`.
    pub fn q_hat(&self, t: f64, k: [f64; 2]) -> Result<f64> {
        let lap = self.grid.neg_laplacian_multiplier(k)?;
        self.q_hat_from_lap(t, lap)
    }

    fn q_hat_from_lap(&self, t: f64, lap: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("scale must be positive, got {t}")));
        }
        Ok(1.0 / (t * (lap + self.mass * self.mass) + 1.0))
    }

    /// `ĉ̇_t(k) = q̂_t(k)²`, exactly.
    pub fn cdot_hat(&self, t: f64, k: [f64; 2]) -> Result<f64> {
        Ok(self.q_hat(t, k)?.powi(2))
    }

    /// `L_t = √t ∧ 1/m`.
    pub fn scale_length(&self, t: f64) -> f64 {
        t.sqrt().min(1.0 / self.mass)
    }

    /// Multiplier table of `ĉ_t` over all coefficient indices.
    pub fn c_hat_table(&self, t: f64) -> Result<Vec<f64>> {
        let lap = self.grid.neg_laplacian_table();
        lap.iter().map(|&l| self.c_hat_from_lap(t, l)).collect()
    }

    /// Multiplier table of `q̂_t`.
    pub fn q_hat_table(&self, t: f64) -> Result<Vec<f64>> {
        let lap = self.grid.neg_laplacian_table();
        lap.iter().map(|&l| self.q_hat_from_lap(t, l)).collect()
    }

    /// Multiplier table of `ĉ_{tb} - ĉ_{ta}` for `0 < ta <= tb <= ∞`, with
    /// the convention that `ta = 0` contributes nothing (`ĉ_0 = 0`).
    pub fn c_hat_increment_table(&self, ta: f64, tb: f64) -> Result<Vec<f64>> {
        if ta < 0.0 || tb < ta {
            return Err(Error::Domain(format!(
                "need 0 <= ta <= tb, got ta = {ta}, tb = {tb}"
            )));
        }
        let lap = self.grid.neg_laplacian_table();
        lap.iter()
            .map(|&l| {
                let low = if ta == 0.0 {
                    0.0
                } else {
                    self.c_hat_from_lap(ta, l)?
                };
                Ok(self.c_hat_from_lap(tb, l)? - low)
            })
            .collect()
    }

    /// `c_t(x,x) = Σ_k ĉ_t(k)`, the per-site variance at scale `t`.
    pub fn diagonal_variance(&self, t: f64) -> Result<f64> {
        Ok(self.c_hat_table(t)?.iter().sum())
    }
}

/// Centred Gaussian field with spectral coefficient variances `cov[idx]`.
///
/// Coefficients are drawn for one representative of each conjugate pair (the
/// self-conjugate modes get real draws), so the output field is exactly real
/// and has per-site variance `Σ_k cov(k)`.  Draw order is fixed, so a given
/// generator state yields a bit-identical field.
pub fn sample_gaussian(grid: TorusGrid, cov: &[f64], rng: &mut impl Rng) -> Result<Field> {
    if cov.len() != grid.num_sites() {
        return Err(Error::Shape("covariance table length mismatch".into()));
    }
    if let Some(&bad) = cov.iter().find(|&&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::Domain(format!(
            "covariance multiplier must be finite and >= 0, got {bad}"
        )));
    }
    let mut spec = SpectralField::zeros(grid);
    let coeffs = spec.coefficients_mut();
    for idx in 0..grid.num_sites() {
        let conj = grid.conjugate_index(idx);
        if idx == conj {
            let x: f64 = rng.sample(StandardNormal);
            coeffs[idx] = Complex64::new(x * cov[idx].sqrt(), 0.0);
        } else if idx < conj {
            let sd = (cov[idx] / 2.0).sqrt();
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            coeffs[idx] = Complex64::new(re * sd, im * sd);
            coeffs[conj] = Complex64::new(re * sd, -im * sd);
        }
    }
    spec.inverse_transform()
}

/// Discretised scale axis: strictly increasing times `t_1 < … < t_N = t_max`,
/// refined dyadically towards zero (`t_j = t_max · 2^{j-N}`).
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleGrid {
    times: Vec<f64>,
}

impl ScaleGrid {
    /// Dyadic grid with `steps` points ending at `t_max`.
    pub fn dyadic(t_max: f64, steps: usize) -> Result<Self> {
        if !(t_max > 0.0) || steps == 0 {
            return Err(Error::Domain(
                "scale grid needs t_max > 0 and at least one step".into(),
            ));
        }
        let times = (1..=steps)
            .map(|j| t_max * 2.0f64.powi(j as i32 - steps as i32))
            .collect();
        Ok(ScaleGrid { times })
    }

    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times[0] <= 0.0 || times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain(
                "scale grid times must be strictly increasing and positive".into(),
            ));
        }
        Ok(ScaleGrid { times })
    }

    /// Positive grid times `t_1 … t_N`.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn t_max(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn steps(&self) -> usize {
        self.times.len()
    }

    /// The full time axis `[0, t_1, …, t_N]` on which path fields are stored.
    pub fn axis(&self) -> Vec<f64> {
        let mut axis = Vec::with_capacity(self.times.len() + 1);
        axis.push(0.0);
        axis.extend_from_slice(&self.times);
        axis
    }

    /// Halve every step (one extra dyadic level plus midpoints), used for
    /// step-size convergence checks.
    pub fn refined(&self) -> ScaleGrid {
        let mut times = Vec::with_capacity(2 * self.times.len());
        let mut prev = 0.0;
        for &t in &self.times {
            if prev == 0.0 {
                times.push(t / 2.0);
            } else {
                times.push((prev + t) / 2.0);
            }
            times.push(t);
            prev = t;
        }
        ScaleGrid { times }
    }

    /// Index of `t` on [`ScaleGrid::axis`], or a domain error for off-grid
    /// times.
    pub fn axis_index(&self, t: f64) -> Result<usize> {
        let axis = self.axis();
        axis.iter()
            .position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
            .ok_or_else(|| Error::Domain(format!("time {t} is not a scale grid point")))
    }
}

/// The multiscale Gaussian process sampled on a scale grid.
///
/// `fields[j]` holds the process at `axis()[j]`; `increments[j]` is the
/// difference `field(axis[j]) - field(axis[j+1])`, an independent Gaussian
/// field with covariance `ĉ_{axis[j+1]} - ĉ_{axis[j]}`.
#[derive(Debug, Clone)]
pub struct GffPath {
    params: ScaleParams,
    grid: ScaleGrid,
    fields: Vec<Field>,
    increments: Vec<Field>,
    /// Trace of the covariance left above `t_max` (zero-initialised terminal
    /// leaves this amount of variance unrealised).
    residual_trace: f64,
    terminal_sampled: bool,
}

impl GffPath {
    /// Sample a path whose terminal field carries the remaining covariance
    /// `ĉ_∞ - ĉ_{t_max}`, so the scale-zero field is exactly free-field
    /// distributed.
    pub fn sample(params: ScaleParams, grid: &ScaleGrid, rng: &mut impl Rng) -> Result<GffPath> {
        Self::build(params, grid, rng, true)
    }

    /// Sample a path with the terminal field pinned to zero (horizon
    /// truncation used by the flow).  The unrealised covariance trace is
    /// recorded.
    pub fn sample_truncated(
        params: ScaleParams,
        grid: &ScaleGrid,
        rng: &mut impl Rng,
    ) -> Result<GffPath> {
        Self::build(params, grid, rng, false)
    }

    fn build(
        params: ScaleParams,
        grid: &ScaleGrid,
        rng: &mut impl Rng,
        sample_terminal: bool,
    ) -> Result<GffPath> {
        let axis = grid.axis();
        let lattice = params.grid();
        let t_max = grid.t_max();
        let tail_table = params.c_hat_increment_table(t_max, f64::INFINITY)?;
        let residual_trace: f64 = tail_table.iter().sum();

        let terminal = if sample_terminal {
            sample_gaussian(lattice, &tail_table, rng)?
        } else {
            Field::zeros(lattice)
        };

        let steps = grid.steps();
        let mut increments = Vec::with_capacity(steps);
        for j in 0..steps {
            let table = params.c_hat_increment_table(axis[j], axis[j + 1])?;
            increments.push(sample_gaussian(lattice, &table, rng)?);
        }

        let mut fields = vec![terminal];
        for j in (0..steps).rev() {
            let next = fields.last().unwrap().added(&increments[j]);
            fields.push(next);
        }
        fields.reverse();

        Ok(GffPath {
            params,
            grid: grid.clone(),
            fields,
            increments,
            residual_trace,
            terminal_sampled: sample_terminal,
        })
    }

    pub fn params(&self) -> ScaleParams {
        self.params
    }

    pub fn scale_grid(&self) -> &ScaleGrid {
        &self.grid
    }

    /// Field at axis index `j` (0 is scale zero).
    pub fn field(&self, j: usize) -> &Field {
        &self.fields[j]
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    /// Increment over `[axis[j], axis[j+1]]` (covariance
    /// `ĉ_{axis[j+1]} - ĉ_{axis[j]}`); this is the noise the flow reuses.
    pub fn increment(&self, j: usize) -> &Field {
        &self.increments[j]
    }

    /// Small scales below axis index `j`: `Y_{t_j} = Φ_0 - Φ_{t_j}`, a
    /// Gaussian field with covariance `ĉ_{t_j}`.
    pub fn small_scales(&self, j: usize) -> Field {
        self.fields[0].subtracted(&self.fields[j])
    }

    pub fn residual_trace(&self) -> f64 {
        self.residual_trace
    }

    pub fn terminal_sampled(&self) -> bool {
        self.terminal_sampled
    }
}
