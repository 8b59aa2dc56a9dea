//! Discrete torus geometry and Fourier calculus.
//!
//! The unit torus is discretised as `Ω_ε = {0, ε, 2ε, …} ²` with `ε = 1/n`
//! and `n` a power of two.  The dual lattice is
//! `Ω_ε^* = {k ∈ 2πZ² : -π/ε ≤ k_i < π/ε}`.  Conventions:
//!
//! - discrete integral      `∫ f dx = ε² Σ_x f(x)`
//! - Fourier coefficients   `f̂(k) = ε² Σ_x f(x) e^{-ik·x}`
//! - Fourier series         `f(x) = Σ_k f̂(k) e^{ik·x}`
//!
//! With these normalisations the forward transform is an unnormalised DFT
//! scaled by ε² and the inverse is the plain unnormalised inverse DFT, so a
//! round trip is exact up to round-off (ε²·n² = 1).  Parseval reads
//! `ε² Σ_x f(x)² = Σ_k |f̂(k)|²`.
//!
//! The lattice Laplacian is the 5-point nearest-neighbour stencil
//! `(Δf)(x) = ε^{-2} Σ_{y~x} (f(y) - f(x))`; its Fourier multiplier is
//! `-Δ̂(k) = (4/ε²)(sin²(εk₁/2) + sin²(εk₂/2)) ≥ (4/π²)|k|²`.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};

/// The discrete torus `Ω_ε` with side count `n` and spacing `ε = 1/n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TorusGrid {
    n: usize,
}

impl TorusGrid {
    /// `n` must be a power of two (radix-2 transforms, dyadic ε sweeps)
    /// and at least 2.
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::Domain(format!(
                "grid side count must be a power of two >= 2, got {n}"
            )));
        }
        Ok(TorusGrid { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn epsilon(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Number of lattice sites (= number of dual frequencies).
    pub fn num_sites(&self) -> usize {
        self.n * self.n
    }

    /// Signed integer frequency for a DFT index along one axis, in
    /// `[-n/2, n/2)`.
    #[inline]
    pub fn signed_index(&self, m: usize) -> i64 {
        if m < self.n / 2 {
            m as i64
        } else {
            m as i64 - self.n as i64
        }
    }

    /// Dual frequency `k = 2π(j₁, j₂)` for the flat coefficient index.
    #[inline]
    pub fn frequency(&self, idx: usize) -> [f64; 2] {
        let (m1, m2) = (idx / self.n, idx % self.n);
        [
            2.0 * std::f64::consts::PI * self.signed_index(m1) as f64,
            2.0 * std::f64::consts::PI * self.signed_index(m2) as f64,
        ]
    }

    /// `|k|²` for the flat coefficient index.
    #[inline]
    pub fn freq_norm_sq(&self, idx: usize) -> f64 {
        let k = self.frequency(idx);
        k[0] * k[0] + k[1] * k[1]
    }

    /// True if `k` belongs to `Ω_ε^*` (components in `2πZ`, within the
    /// fundamental dual domain).
    pub fn contains_frequency(&self, k: [f64; 2]) -> bool {
        let two_pi = 2.0 * std::f64::consts::PI;
        let half = self.n as i64 / 2;
        k.iter().all(|&ki| {
            let j = ki / two_pi;
            (j - j.round()).abs() < 1e-9 && (-half..half).contains(&(j.round() as i64))
        })
    }

    /// Coefficient index of `-k` (complex-conjugate partner for real fields).
    #[inline]
    pub fn conjugate_index(&self, idx: usize) -> usize {
        let (m1, m2) = (idx / self.n, idx % self.n);
        ((self.n - m1) % self.n) * self.n + (self.n - m2) % self.n
    }

    /// Exact multiplier of the 5-point `-Δ` at dual frequency `k`:
    /// `(4/ε²)(sin²(εk₁/2) + sin²(εk₂/2))`.
    pub fn neg_laplacian_multiplier(&self, k: [f64; 2]) -> Result<f64> {
        if !self.contains_frequency(k) {
            return Err(Error::Domain(format!(
                "frequency ({}, {}) is not in the dual lattice of n = {}",
                k[0], k[1], self.n
            )));
        }
        let eps = self.epsilon();
        let s1 = (eps * k[0] / 2.0).sin();
        let s2 = (eps * k[1] / 2.0).sin();
        Ok(4.0 / (eps * eps) * (s1 * s1 + s2 * s2))
    }

    /// The `-Δ̂` multiplier table over all coefficient indices, cached per
    /// grid size.
    pub fn neg_laplacian_table(&self) -> Arc<Vec<f64>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<f64>>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap();
        guard
            .entry(self.n)
            .or_insert_with(|| {
                let mut v = Vec::with_capacity(self.num_sites());
                for idx in 0..self.num_sites() {
                    let k = self.frequency(idx);
                    let eps = self.epsilon();
                    let s1 = (eps * k[0] / 2.0).sin();
                    let s2 = (eps * k[1] / 2.0).sin();
                    v.push(4.0 / (eps * eps) * (s1 * s1 + s2 * s2));
                }
                Arc::new(v)
            })
            .clone()
    }
}

/// A real field on the lattice, row-major over integer coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: TorusGrid) -> Self {
        Field {
            grid,
            values: vec![0.0; grid.num_sites()],
        }
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        Field {
            grid,
            values: vec![c; grid.num_sites()],
        }
    }

    pub fn from_values(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_sites() {
            return Err(Error::Shape(format!(
                "expected {} values, got {}",
                grid.num_sites(),
                values.len()
            )));
        }
        Ok(Field { grid, values })
    }

    /// Build from a function of integer site coordinates `(x₁, x₂)`.
    pub fn from_fn(grid: TorusGrid, f: impl Fn(usize, usize) -> f64) -> Self {
        let n = grid.n();
        let values = (0..n * n).map(|i| f(i / n, i % n)).collect();
        Field { grid, values }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, x1: usize, x2: usize) -> f64 {
        self.values[x1 * self.grid.n() + x2]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn check_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidField(
                "field contains a non-finite value".into(),
            ))
        }
    }

    pub fn add_assign(&mut self, other: &Field) {
        for (v, w) in self.values.iter_mut().zip(&other.values) {
            *v += w;
        }
    }

    pub fn sub_assign(&mut self, other: &Field) {
        for (v, w) in self.values.iter_mut().zip(&other.values) {
            *v -= w;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.values {
            *v *= a;
        }
    }

    pub fn added(&self, other: &Field) -> Field {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn subtracted(&self, other: &Field) -> Field {
        let mut out = self.clone();
        out.sub_assign(other);
        out
    }

    pub fn scaled(&self, a: f64) -> Field {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    /// `∫ f dx = ε² Σ_x f(x)`.
    pub fn integrate(&self) -> Result<f64> {
        self.check_finite()?;
        let eps = self.grid.epsilon();
        Ok(eps * eps * self.values.iter().sum::<f64>())
    }

    /// `∫ f g dx`.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::Shape("fields live on different grids".into()));
        }
        let eps = self.grid.epsilon();
        Ok(eps
            * eps
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .sum::<f64>())
    }

    /// `‖f‖²_{L²} = ∫ f² dx`.
    pub fn l2_norm_sq(&self) -> f64 {
        let eps = self.grid.epsilon();
        eps * eps * self.values.iter().map(|v| v * v).sum::<f64>()
    }

    /// `‖f‖_{L¹} = ∫ |f| dx`.
    pub fn l1_norm(&self) -> f64 {
        let eps = self.grid.epsilon();
        eps * eps * self.values.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// `Σ_k w(k) |f̂(k)|²` for a multiplier table `w` (spectral quadratic
    /// form; equals `(f, W f)_{L²}` for the operator with that multiplier).
    pub fn spectral_quadratic(&self, table: &[f64]) -> Result<f64> {
        if table.len() != self.grid.num_sites() {
            return Err(Error::Shape("multiplier table length mismatch".into()));
        }
        let spec = self.forward_transform()?;
        Ok(spec
            .coefficients()
            .iter()
            .zip(table)
            .map(|(c, &w)| w * c.norm_sqr())
            .sum())
    }

    /// `f̂(k) = ε² Σ_x f(x) e^{-ik·x}`.
    pub fn forward_transform(&self) -> Result<SpectralField> {
        self.check_finite()?;
        let n = self.grid.n();
        let mut buf: Vec<Complex64> = self
            .values
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        fft2(&mut buf, n, FftDirection::Forward);
        let eps2 = self.grid.epsilon() * self.grid.epsilon();
        for c in &mut buf {
            *c *= eps2;
        }
        Ok(SpectralField {
            grid: self.grid,
            coefficients: buf,
        })
    }

    /// Multiply the spectrum by `mult(k)` and transform back.  Linear in `f`.
    ///
    /// The multiplier must be even under the lattice conjugation `k ↦ -k`
    /// (which aliases the boundary rows), or the product no longer encodes a
    /// real field; radial multipliers always qualify, anything else trips
    /// the symmetry check in the inverse transform.
    pub fn apply_spectral(&self, mult: impl Fn([f64; 2]) -> f64) -> Result<Field> {
        let mut spec = self.forward_transform()?;
        for idx in 0..spec.coefficients.len() {
            let k = self.grid.frequency(idx);
            spec.coefficients[idx] *= mult(k);
        }
        spec.inverse_transform()
    }

    /// Same as [`Field::apply_spectral`] with a precomputed multiplier table
    /// (hot path in the flow).  Skips the Hermitian check: a real multiplier
    /// table that is even in `k` preserves the symmetry by construction.
    pub fn apply_spectral_table(&self, table: &[f64]) -> Result<Field> {
        if table.len() != self.grid.num_sites() {
            return Err(Error::Shape("multiplier table length mismatch".into()));
        }
        let n = self.grid.n();
        let mut buf: Vec<Complex64> = self
            .values
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        fft2(&mut buf, n, FftDirection::Forward);
        let eps2 = self.grid.epsilon() * self.grid.epsilon();
        for (c, &m) in buf.iter_mut().zip(table) {
            *c *= eps2 * m;
        }
        fft2(&mut buf, n, FftDirection::Inverse);
        let values = buf.iter().map(|c| c.re).collect();
        Ok(Field {
            grid: self.grid,
            values,
        })
    }

    /// Binary record: header `n, ε` as little-endian f64, then the row-major
    /// payload.
    pub fn write_binary(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(&(self.grid.n() as f64).to_le_bytes())?;
        w.write_all(&self.grid.epsilon().to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(r: &mut impl Read) -> Result<Field> {
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf)?;
        let nf = f64::from_le_bytes(buf);
        r.read_exact(&mut buf)?;
        let eps = f64::from_le_bytes(buf);
        if !(nf.is_finite() && nf > 0.0 && nf.fract() == 0.0) {
            return Err(Error::InvalidField("corrupt field header".into()));
        }
        let grid = TorusGrid::new(nf as usize)?;
        if (eps - grid.epsilon()).abs() > 1e-12 {
            return Err(Error::InvalidField(format!(
                "header spacing {eps} inconsistent with n = {nf}"
            )));
        }
        let mut values = vec![0.0; grid.num_sites()];
        for v in &mut values {
            r.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        Ok(Field { grid, values })
    }

    /// Plain-text CSV (one row per lattice row) for inspection.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        let n = self.grid.n();
        for x1 in 0..n {
            let row: Vec<String> = (0..n).map(|x2| format!("{:.17e}", self.at(x1, x2))).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Fourier coefficients of a field, flat over DFT indices.
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: TorusGrid,
    coefficients: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: TorusGrid) -> Self {
        SpectralField {
            grid,
            coefficients: vec![Complex64::new(0.0, 0.0); grid.num_sites()],
        }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [Complex64] {
        &mut self.coefficients
    }

    /// Coefficient at an explicit dual frequency.
    pub fn coefficient_at(&self, k: [f64; 2]) -> Result<Complex64> {
        if !self.grid.contains_frequency(k) {
            return Err(Error::Domain("frequency not in dual lattice".into()));
        }
        let two_pi = 2.0 * std::f64::consts::PI;
        let n = self.grid.n() as i64;
        let wrap = |ki: f64| -> usize {
            let j = (ki / two_pi).round() as i64;
            (j.rem_euclid(n)) as usize
        };
        Ok(self.coefficients[wrap(k[0]) * self.grid.n() + wrap(k[1])])
    }

    /// Largest deviation from Hermitian symmetry `f̂(-k) = conj(f̂(k))`.
    pub fn symmetry_deviation(&self) -> f64 {
        let mut max_dev = 0.0f64;
        for idx in 0..self.coefficients.len() {
            let conj_idx = self.grid.conjugate_index(idx);
            let dev = (self.coefficients[idx] - self.coefficients[conj_idx].conj()).norm();
            max_dev = max_dev.max(dev);
        }
        max_dev
    }

    /// `f(x) = Σ_k f̂(k) e^{ik·x}`.  Errors if the coefficients do not
    /// represent a real field.
    pub fn inverse_transform(&self) -> Result<Field> {
        let scale: f64 = self
            .coefficients
            .iter()
            .fold(0.0f64, |m, c| m.max(c.norm()))
            .max(1.0);
        let dev = self.symmetry_deviation();
        if dev > 1e-8 * scale {
            return Err(Error::SymmetryViolation { max_dev: dev });
        }
        let n = self.grid.n();
        let mut buf = self.coefficients.clone();
        fft2(&mut buf, n, FftDirection::Inverse);
        let values = buf.iter().map(|c| c.re).collect();
        Ok(Field {
            grid: self.grid,
            values,
        })
    }
}

/// In-place 2D FFT over a flat row-major buffer: rows, transpose, rows,
/// transpose back.  Plans are cached per (size, direction).
fn fft2(buf: &mut [Complex64], n: usize, direction: FftDirection) {
    let plan = plan_for(n, direction);
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
    for row in buf.chunks_mut(n) {
        plan.process_with_scratch(row, &mut scratch);
    }
    transpose(buf, n);
    for row in buf.chunks_mut(n) {
        plan.process_with_scratch(row, &mut scratch);
    }
    transpose(buf, n);
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

fn plan_for(n: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let cache = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (n, direction == FftDirection::Forward);
    let mut guard = cache.lock().unwrap();
    guard
        .entry(key)
        .or_insert_with(|| FftPlanner::new().plan_fft(n, direction))
        .clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derived_rng;
    use crate::tolerances::{EXACT_F64, SUMMATION_F64};
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_field(n: usize, seed: u64) -> Field {
        let grid = TorusGrid::new(n).unwrap();
        let mut rng = derived_rng(seed, &[0xf1e1d]);
        let values = (0..grid.num_sites())
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        Field::from_values(grid, values).unwrap()
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(TorusGrid::new(0).is_err());
        assert!(TorusGrid::new(3).is_err());
        assert!(TorusGrid::new(12).is_err());
        assert!(TorusGrid::new(16).is_ok());
    }

    #[test]
    fn integrate_constant_is_volume() {
        for n in [4, 8, 32] {
            let grid = TorusGrid::new(n).unwrap();
            let f = Field::constant(grid, 1.0);
            assert!((f.integrate().unwrap() - 1.0).abs() < EXACT_F64);
        }
    }

    #[test]
    fn integrate_single_site_indicator() {
        let grid = TorusGrid::new(8).unwrap();
        let mut f = Field::zeros(grid);
        f.values_mut()[3] = 1.0;
        assert!((f.integrate().unwrap() - 0.015625).abs() < EXACT_F64);
    }

    #[test]
    fn integrate_matches_naive_double_loop() {
        let f = random_field(16, 1);
        let eps = f.grid().epsilon();
        let mut naive = 0.0;
        for x1 in 0..16 {
            for x2 in 0..16 {
                naive += eps * eps * f.at(x1, x2);
            }
        }
        assert!((f.integrate().unwrap() - naive).abs() < SUMMATION_F64);
    }

    #[test]
    fn integrate_rejects_non_finite() {
        let grid = TorusGrid::new(4).unwrap();
        let mut f = Field::zeros(grid);
        f.values_mut()[0] = f64::NAN;
        assert!(matches!(f.integrate(), Err(Error::InvalidField(_))));
    }

    #[test]
    fn constant_field_transforms_to_zero_mode() {
        let grid = TorusGrid::new(16).unwrap();
        let f = Field::constant(grid, 2.5);
        let spec = f.forward_transform().unwrap();
        for idx in 0..grid.num_sites() {
            let c = spec.coefficients()[idx];
            if idx == 0 {
                assert!((c.re - 2.5).abs() < EXACT_F64 && c.im.abs() < EXACT_F64);
            } else {
                assert!(c.norm() < EXACT_F64);
            }
        }
    }

    #[test]
    fn cosine_transforms_to_half_weights() {
        let grid = TorusGrid::new(16).unwrap();
        let two_pi = 2.0 * std::f64::consts::PI;
        let f = Field::from_fn(grid, |x1, _| (two_pi * x1 as f64 * grid.epsilon()).cos());
        let spec = f.forward_transform().unwrap();
        let cp = spec.coefficient_at([two_pi, 0.0]).unwrap();
        let cm = spec.coefficient_at([-two_pi, 0.0]).unwrap();
        assert!((cp.re - 0.5).abs() < EXACT_F64 && cp.im.abs() < EXACT_F64);
        assert!((cm.re - 0.5).abs() < EXACT_F64 && cm.im.abs() < EXACT_F64);
        let total: f64 = spec.coefficients().iter().map(|c| c.norm()).sum();
        assert!((total - 1.0).abs() < EXACT_F64);
    }

    #[test]
    fn direct_dft_oracle_at_n8() {
        // Independent O(n⁴) evaluation of the transform definition.
        let f = random_field(8, 2);
        let spec = f.forward_transform().unwrap();
        let grid = f.grid();
        let eps = grid.epsilon();
        for idx in 0..grid.num_sites() {
            let k = grid.frequency(idx);
            let mut acc = Complex64::new(0.0, 0.0);
            for x1 in 0..8 {
                for x2 in 0..8 {
                    let phase = -(k[0] * x1 as f64 * eps + k[1] * x2 as f64 * eps);
                    acc += f.at(x1, x2) * Complex64::new(phase.cos(), phase.sin());
                }
            }
            acc *= eps * eps;
            assert!((acc - spec.coefficients()[idx]).norm() < 1e-12);
        }
    }

    #[test]
    fn parseval_holds_across_grid_sizes() {
        for n in [4, 8, 16, 64, 256] {
            let f = random_field(n, 3 + n as u64);
            let spec = f.forward_transform().unwrap();
            let spatial = f.l2_norm_sq();
            let spectral: f64 = spec.coefficients().iter().map(|c| c.norm_sqr()).sum();
            assert!(
                (spatial - spectral).abs() < EXACT_F64 * spatial.max(1.0),
                "n = {n}: {spatial} vs {spectral}"
            );
        }
    }

    #[test]
    fn round_trip_is_identity() {
        for n in [4, 16, 256] {
            let f = random_field(n, 40 + n as u64);
            let back = f.forward_transform().unwrap().inverse_transform().unwrap();
            let max_dev = f
                .values()
                .iter()
                .zip(back.values())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(max_dev < EXACT_F64, "n = {n}: {max_dev}");
        }
    }

    #[test]
    fn zero_spectrum_inverts_to_zero_field() {
        let grid = TorusGrid::new(8).unwrap();
        let spec = SpectralField::zeros(grid);
        let f = spec.inverse_transform().unwrap();
        assert!(f.max_abs() == 0.0);
    }

    #[test]
    fn single_zero_mode_inverts_to_constant() {
        let grid = TorusGrid::new(8).unwrap();
        let mut spec = SpectralField::zeros(grid);
        spec.coefficients_mut()[0] = Complex64::new(3.25, 0.0);
        let f = spec.inverse_transform().unwrap();
        for &v in f.values() {
            assert!((v - 3.25).abs() < EXACT_F64);
        }
    }

    #[test]
    fn asymmetric_spectrum_is_rejected() {
        let grid = TorusGrid::new(8).unwrap();
        let mut spec = SpectralField::zeros(grid);
        spec.coefficients_mut()[1] = Complex64::new(1.0, 1.0);
        assert!(matches!(
            spec.inverse_transform(),
            Err(Error::SymmetryViolation { .. })
        ));
    }

    #[test]
    fn laplacian_multiplier_zero_mode() {
        let grid = TorusGrid::new(64).unwrap();
        assert_eq!(grid.neg_laplacian_multiplier([0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn laplacian_multiplier_rejects_off_lattice() {
        let grid = TorusGrid::new(8).unwrap();
        assert!(grid.neg_laplacian_multiplier([1.0, 0.0]).is_err());
        // |k| beyond the dual domain
        let big = 2.0 * std::f64::consts::PI * 5.0;
        assert!(grid.neg_laplacian_multiplier([big, 0.0]).is_err());
    }

    #[test]
    fn laplacian_multiplier_matches_stencil_application() {
        // Apply the 5-point stencil to cos(k·x) site by site.
        let grid = TorusGrid::new(64).unwrap();
        let two_pi = 2.0 * std::f64::consts::PI;
        let k = [two_pi, 0.0];
        let mult = grid.neg_laplacian_multiplier(k).unwrap();
        let n = grid.n();
        let eps = grid.epsilon();
        let f = Field::from_fn(grid, |x1, x2| {
            (k[0] * x1 as f64 * eps + k[1] * x2 as f64 * eps).cos()
        });
        for x1 in 0..n {
            for x2 in 0..n {
                let up = f.at((x1 + 1) % n, x2);
                let down = f.at((x1 + n - 1) % n, x2);
                let left = f.at(x1, (x2 + n - 1) % n);
                let right = f.at(x1, (x2 + 1) % n);
                let stencil = (4.0 * f.at(x1, x2) - up - down - left - right) / (eps * eps);
                assert!(
                    (stencil - mult * f.at(x1, x2)).abs() < EXACT_F64,
                    "site ({x1},{x2})"
                );
            }
        }
    }

    #[test]
    fn laplacian_multiplier_lower_bound() {
        // -Δ̂(k) ≥ (4/π²)|k|², the sharp stencil constant.
        let c = 4.0 / (std::f64::consts::PI * std::f64::consts::PI);
        for n in [4, 16, 128] {
            let grid = TorusGrid::new(n).unwrap();
            let table = grid.neg_laplacian_table();
            for idx in 0..grid.num_sites() {
                let bound = c * grid.freq_norm_sq(idx);
                assert!(
                    table[idx] >= bound - 1e-9 * bound.max(1.0),
                    "n = {n}, idx = {idx}"
                );
                if idx != 0 {
                    assert!(table[idx] > 0.0);
                }
            }
        }
    }

    #[test]
    fn laplacian_multiplier_is_even() {
        let grid = TorusGrid::new(16).unwrap();
        let table = grid.neg_laplacian_table();
        for idx in 0..grid.num_sites() {
            let conj = grid.conjugate_index(idx);
            assert_eq!(table[idx], table[conj]);
        }
    }

    #[test]
    fn apply_spectral_identity_and_composition() {
        let f = random_field(16, 9);
        let id = f.apply_spectral(|_| 1.0).unwrap();
        let max_dev = f
            .values()
            .iter()
            .zip(id.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(max_dev < EXACT_F64);

        // apply(a, apply(b, f)) = apply(ab, f); multipliers must be even
        // under the lattice conjugation (radial ones are), or the output is
        // no longer a real field
        let a = |k: [f64; 2]| 1.0 / (1.0 + k[0] * k[0] + k[1] * k[1]);
        let b = |k: [f64; 2]| (0.01 * (k[0] * k[0] + k[1] * k[1])).cos();
        let lhs = f.apply_spectral(b).unwrap().apply_spectral(a).unwrap();
        let rhs = f.apply_spectral(|k| a(k) * b(k)).unwrap();
        let max_dev = lhs
            .values()
            .iter()
            .zip(rhs.values())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(max_dev < EXACT_F64);
    }

    #[test]
    fn apply_laplacian_to_constant_is_zero() {
        let grid = TorusGrid::new(16).unwrap();
        let f = Field::constant(grid, 4.0);
        let table = grid.neg_laplacian_table();
        let out = f.apply_spectral_table(&table).unwrap();
        assert!(out.max_abs() < EXACT_F64);
    }

    #[test]
    fn apply_laplacian_matches_stencil_on_cosine() {
        let grid = TorusGrid::new(16).unwrap();
        let eps = grid.epsilon();
        let two_pi = 2.0 * std::f64::consts::PI;
        let f = Field::from_fn(grid, |x1, _| (two_pi * x1 as f64 * eps).cos());
        let table = grid.neg_laplacian_table();
        let out = f.apply_spectral_table(&table).unwrap();
        let expected_factor =
            4.0 / (eps * eps) * (std::f64::consts::PI * eps).sin().powi(2);
        for (o, v) in out.values().iter().zip(f.values()) {
            assert!((o - expected_factor * v).abs() < EXACT_F64);
        }
    }

    #[test]
    fn binary_round_trip() {
        let f = random_field(8, 77);
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        let g = Field::read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn csv_has_one_row_per_lattice_row() {
        let f = random_field(4, 5);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().next().unwrap().split(',').count(), 4);
    }

    #[test]
    fn rng_draw_order_is_fixed() {
        let mut rng = derived_rng(1, &[2]);
        let a: f64 = rng.random();
        let mut rng2 = derived_rng(1, &[2]);
        let b: f64 = rng2.random();
        assert_eq!(a, b);
    }
}
