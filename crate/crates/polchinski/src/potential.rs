//! Wick-ordered bare potentials and multiplicative-chaos masses.
//!
//! The bare potential of the interacting measure is
//! `v₀(φ) = λ ∫ :V(φ_x): dx` with `V = exp(√β ·)` for the Liouville model
//! and `V = cosh(√β ·)` for the sinh-Gordon model.  Two Wick orderings are
//! supported:
//!
//! - `EpsilonPower`:          `:e^{±√β φ}: = ε^{β/4π} e^{±√β φ}`
//! - `VarianceSubtraction`:   `:e^{±√β φ}: = e^{±√β φ - (β/2) c_∞(x,x)}`
//!
//! They differ by a factor that stays bounded as ε → 0.  The flow uses the
//! ε-power form; the chaos masses `M^{ε,±}(φ) = ∫ e^{±√β φ - (β/2)c_∞(x,x)} dx`
//! use variance subtraction by definition.  All exponentials are assembled in
//! log-domain and exponentiated last; an exponent beyond ±700 is a loud
//! saturation error rather than a silent inf/zero.

use crate::error::{Error, Result};
use crate::lattice::Field;
use crate::scales::ScaleParams;
use crate::tolerances::EXP_CLAMP;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Liouville,
    SinhGordon,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Liouville => "liouville",
            ModelKind::SinhGordon => "sinh-gordon",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "liouville" | "lv" => Ok(ModelKind::Liouville),
            "sinh-gordon" | "sinhgordon" | "shg" => Ok(ModelKind::SinhGordon),
            other => Err(Error::Config(format!("unknown model '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WickConvention {
    /// Multiply by `ε^{β/4π}`.
    EpsilonPower,
    /// Multiply by `e^{-(β/2) c_∞(x,x)}`.
    VarianceSubtraction,
}

impl std::str::FromStr for WickConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "epsilon-power" | "epsilon_power" | "eps" => Ok(WickConvention::EpsilonPower),
            "variance-subtraction" | "variance_subtraction" | "var" => {
                Ok(WickConvention::VarianceSubtraction)
            }
            other => Err(Error::Config(format!("unknown wick convention '{other}'"))),
        }
    }
}

/// Full parameter set of the interacting measure.
#[derive(Debug, Clone, Copy)]
pub struct ModelParams {
    kind: ModelKind,
    beta: f64,
    lambda: f64,
    scale: ScaleParams,
}

impl ModelParams {
    /// `β` must lie in `(0, 8π)`; the estimates this crate checks are only
    /// claimed for the L² phase `β < 4π`, so callers should consult
    /// [`ModelParams::in_l2_phase`] and warn outside it.  `λ ≥ 0` (the
    /// degenerate `λ = 0` is the free field and is used by many checks).
    pub fn new(kind: ModelKind, beta: f64, lambda: f64, scale: ScaleParams) -> Result<Self> {
        let eight_pi = 8.0 * std::f64::consts::PI;
        if !(beta > 0.0 && beta < eight_pi) {
            return Err(Error::Domain(format!(
                "beta must lie in (0, 8π) = (0, {eight_pi:.6}), got {beta}"
            )));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Domain(format!(
                "lambda must be finite and >= 0, got {lambda}"
            )));
        }
        Ok(ModelParams {
            kind,
            beta,
            lambda,
            scale,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn scale(&self) -> ScaleParams {
        self.scale
    }

    pub fn grid(&self) -> crate::lattice::TorusGrid {
        self.scale.grid()
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Domain(format!(
                "lambda must be finite and >= 0, got {lambda}"
            )));
        }
        self.lambda = lambda;
        Ok(self)
    }

    /// True for `β < 4π`, where second moments of the chaos stay bounded.
    pub fn in_l2_phase(&self) -> bool {
        self.beta < 4.0 * std::f64::consts::PI
    }

    /// Log of the Wick prefactor for the given convention:
    /// `(β/4π) log ε` or `-(β/2) c_∞(x,x)` (site-independent on the torus).
    pub fn log_wick_prefactor(&self, conv: WickConvention) -> Result<f64> {
        match conv {
            WickConvention::EpsilonPower => {
                Ok(self.beta / (4.0 * std::f64::consts::PI) * self.grid().epsilon().ln())
            }
            WickConvention::VarianceSubtraction => {
                Ok(-0.5 * self.beta * self.scale.diagonal_variance(f64::INFINITY)?)
            }
        }
    }

    /// Ratio of the two conventions' prefactors,
    /// `exp(log_pref(EpsilonPower) - log_pref(VarianceSubtraction))`; bounded
    /// in ε because the diagonal variance is `log(1/ε)/2π + O(1)`.
    pub fn wick_conversion_factor(&self) -> Result<f64> {
        Ok((self.log_wick_prefactor(WickConvention::EpsilonPower)?
            - self.log_wick_prefactor(WickConvention::VarianceSubtraction)?)
        .exp())
    }
}

/// Pointwise Wick exponential `:e^{±√β f}:` under the given convention.
pub fn wick_exp(f: &Field, sign: f64, mp: &ModelParams, conv: WickConvention) -> Result<Field> {
    let log_pref = mp.log_wick_prefactor(conv)?;
    let sqrt_beta = mp.beta.sqrt();
    let s = sign.signum();
    let mut out = Field::zeros(f.grid());
    for (i, (&v, o)) in f.values().iter().zip(out.values_mut().iter_mut()).enumerate() {
        let exponent = s * sqrt_beta * v + log_pref;
        if exponent.abs() > EXP_CLAMP {
            return Err(Error::Saturation { site: i, exponent });
        }
        *o = exponent.exp();
    }
    Ok(out)
}

/// `v₀(φ) = λ ∫ :V(φ): dx ≥ 0`.  For sinh-Gordon the integrand is the
/// half-sum of the two Wick signs.
pub fn v0(f: &Field, mp: &ModelParams, conv: WickConvention) -> Result<f64> {
    if mp.lambda == 0.0 {
        return Ok(0.0);
    }
    let log_pref = mp.log_wick_prefactor(conv)?;
    let sqrt_beta = mp.beta.sqrt();
    let eps2 = f.grid().epsilon().powi(2);
    let mut acc = 0.0;
    for (i, &v) in f.values().iter().enumerate() {
        acc += wick_v_site(v, sqrt_beta, log_pref, mp.kind, i)?;
    }
    Ok(mp.lambda * eps2 * acc)
}

#[inline]
fn wick_v_site(v: f64, sqrt_beta: f64, log_pref: f64, kind: ModelKind, site: usize) -> Result<f64> {
    match kind {
        ModelKind::Liouville => {
            let e = sqrt_beta * v + log_pref;
            if e.abs() > EXP_CLAMP {
                return Err(Error::Saturation { site, exponent: e });
            }
            Ok(e.exp())
        }
        ModelKind::SinhGordon => {
            let ep = sqrt_beta * v + log_pref;
            let em = -sqrt_beta * v + log_pref;
            if ep.abs() > EXP_CLAMP {
                return Err(Error::Saturation { site, exponent: ep });
            }
            if em.abs() > EXP_CLAMP {
                return Err(Error::Saturation { site, exponent: em });
            }
            Ok(0.5 * (ep.exp() + em.exp()))
        }
    }
}

/// Gradient of `v₀` with respect to the normalised inner product:
/// `∇v₀(φ)(x) = λ√β :exp(√β φ_x):` (Liouville) or `λ√β :sinh(√β φ_x):`
/// (sinh-Gordon), so that `v₀(φ + hg) - v₀(φ) = h ∫ ∇v₀ · g dx + o(h)`.
pub fn grad_v0(f: &Field, mp: &ModelParams, conv: WickConvention) -> Result<Field> {
    let mut out = Field::zeros(f.grid());
    if mp.lambda == 0.0 {
        return Ok(out);
    }
    let log_pref = mp.log_wick_prefactor(conv)?;
    let sqrt_beta = mp.beta.sqrt();
    let pref = mp.lambda * sqrt_beta;
    for (i, (&v, o)) in f.values().iter().zip(out.values_mut().iter_mut()).enumerate() {
        *o = pref * wick_v_prime_site(v, sqrt_beta, log_pref, mp.kind, i)?;
    }
    Ok(out)
}

#[inline]
fn wick_v_prime_site(
    v: f64,
    sqrt_beta: f64,
    log_pref: f64,
    kind: ModelKind,
    site: usize,
) -> Result<f64> {
    match kind {
        ModelKind::Liouville => {
            let e = sqrt_beta * v + log_pref;
            if e.abs() > EXP_CLAMP {
                return Err(Error::Saturation { site, exponent: e });
            }
            Ok(e.exp())
        }
        ModelKind::SinhGordon => {
            let ep = sqrt_beta * v + log_pref;
            let em = -sqrt_beta * v + log_pref;
            if ep.abs() > EXP_CLAMP {
                return Err(Error::Saturation { site, exponent: ep });
            }
            if em.abs() > EXP_CLAMP {
                return Err(Error::Saturation { site, exponent: em });
            }
            Ok(0.5 * (ep.exp() - em.exp()))
        }
    }
}

/// Both `v₀(φ)` and `∇v₀(φ)` in one pass over the field (the Monte Carlo
/// estimators need the pair for every sample).
pub fn v0_and_grad(f: &Field, mp: &ModelParams, conv: WickConvention) -> Result<(f64, Field)> {
    let mut grad = Field::zeros(f.grid());
    if mp.lambda == 0.0 {
        return Ok((0.0, grad));
    }
    let log_pref = mp.log_wick_prefactor(conv)?;
    let sqrt_beta = mp.beta.sqrt();
    let eps2 = f.grid().epsilon().powi(2);
    let pref = mp.lambda * sqrt_beta;
    let mut acc = 0.0;
    for (i, (&v, g)) in f.values().iter().zip(grad.values_mut().iter_mut()).enumerate() {
        let ep = sqrt_beta * v + log_pref;
        if ep.abs() > EXP_CLAMP {
            return Err(Error::Saturation { site: i, exponent: ep });
        }
        match mp.kind {
            ModelKind::Liouville => {
                let w = ep.exp();
                acc += w;
                *g = pref * w;
            }
            ModelKind::SinhGordon => {
                let em = -sqrt_beta * v + log_pref;
                if em.abs() > EXP_CLAMP {
                    return Err(Error::Saturation { site: i, exponent: em });
                }
                let (wp, wm) = (ep.exp(), em.exp());
                acc += 0.5 * (wp + wm);
                *g = pref * 0.5 * (wp - wm);
            }
        }
    }
    Ok((mp.lambda * eps2 * acc, grad))
}

/// Chaos mass `M^{ε,±}(f) = ∫ e^{±√β f - (β/2) c_∞(x,x)} dx`.
pub fn gmc_mass(f: &Field, mp: &ModelParams, sign: f64) -> Result<f64> {
    let log_pref = mp.log_wick_prefactor(WickConvention::VarianceSubtraction)?;
    let sqrt_beta = mp.beta.sqrt();
    let s = sign.signum();
    let eps2 = f.grid().epsilon().powi(2);
    let mut acc = 0.0;
    for (i, &v) in f.values().iter().enumerate() {
        let e = s * sqrt_beta * v + log_pref;
        if e.abs() > EXP_CLAMP {
            return Err(Error::Saturation { site: i, exponent: e });
        }
        acc += e.exp();
    }
    Ok(eps2 * acc)
}

/// Symmetrised chaos mass `(M^{ε,+} + M^{ε,-})/2`.
pub fn gmc_mass_sym(f: &Field, mp: &ModelParams) -> Result<f64> {
    Ok(0.5 * (gmc_mass(f, mp, 1.0)? + gmc_mass(f, mp, -1.0)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::TorusGrid;
    use crate::rng::derived_rng;
    use crate::scales::{sample_gaussian, ScaleParams};
    use crate::stats::{mean, se_mean};
    use crate::tolerances::{EXACT_F64, FD_EXACT, FD_STEP, Z_CRIT};

    fn mp(kind: ModelKind, n: usize, beta: f64, lambda: f64) -> ModelParams {
        let grid = TorusGrid::new(n).unwrap();
        let scale = ScaleParams::new(1.0, grid).unwrap();
        ModelParams::new(kind, beta, lambda, scale).unwrap()
    }

    fn random_field(n: usize, seed: u64, amp: f64) -> Field {
        let grid = TorusGrid::new(n).unwrap();
        let mut rng = derived_rng(seed, &[0xbeef]);
        let values = (0..grid.num_sites())
                        .map(|_| {
                let v: f64 = rand::Rng::sample(&mut rng, rand_distr::StandardNormal);
                amp * v
            })
            .collect();
        Field::from_values(grid, values).unwrap()
    }

    #[test]
    fn beta_range_is_enforced() {
        let grid = TorusGrid::new(4).unwrap();
        let scale = ScaleParams::new(1.0, grid).unwrap();
        assert!(ModelParams::new(ModelKind::Liouville, 0.0, 1.0, scale).is_err());
        assert!(ModelParams::new(ModelKind::Liouville, 8.0 * std::f64::consts::PI, 1.0, scale).is_err());
        assert!(ModelParams::new(ModelKind::Liouville, -1.0, 1.0, scale).is_err());
        let p = ModelParams::new(ModelKind::Liouville, 6.0 * std::f64::consts::PI, 1.0, scale).unwrap();
        assert!(!p.in_l2_phase());
        let p = ModelParams::new(ModelKind::Liouville, std::f64::consts::PI, 1.0, scale).unwrap();
        assert!(p.in_l2_phase());
        assert!(ModelParams::new(ModelKind::Liouville, 1.0, -0.5, scale).is_err());
        assert!(ModelParams::new(ModelKind::Liouville, 1.0, 0.0, scale).is_ok());
    }

    #[test]
    fn wick_exp_zero_field_epsilon_power() {
        // β = 2π, ε = 1/64: prefactor ε^{1/2} = 1/8
        let p = mp(ModelKind::Liouville, 64, 2.0 * std::f64::consts::PI, 1.0);
        let f = Field::zeros(p.grid());
        let w = wick_exp(&f, 1.0, &p, WickConvention::EpsilonPower).unwrap();
        for &v in w.values() {
            assert!((v - 0.125).abs() < EXACT_F64);
        }
    }

    #[test]
    fn wick_exp_zero_field_variance_subtraction() {
        let p = mp(ModelKind::Liouville, 8, std::f64::consts::PI, 1.0);
        let f = Field::zeros(p.grid());
        let w = wick_exp(&f, 1.0, &p, WickConvention::VarianceSubtraction).unwrap();
        let c_diag = p.scale().diagonal_variance(f64::INFINITY).unwrap();
        let expected = (-0.5 * p.beta() * c_diag).exp();
        for &v in w.values() {
            assert!((v - expected).abs() < EXACT_F64);
        }
    }

    #[test]
    fn wick_exp_sign_flip_is_field_negation() {
        let p = mp(ModelKind::Liouville, 8, std::f64::consts::PI, 1.0);
        let f = random_field(8, 3, 1.0);
        let a = wick_exp(&f, -1.0, &p, WickConvention::EpsilonPower).unwrap();
        let b = wick_exp(&f.scaled(-1.0), 1.0, &p, WickConvention::EpsilonPower).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn wick_exp_saturates_loudly() {
        let p = mp(ModelKind::Liouville, 4, std::f64::consts::PI, 1.0);
        let f = Field::constant(p.grid(), 500.0);
        assert!(matches!(
            wick_exp(&f, 1.0, &p, WickConvention::EpsilonPower),
            Err(Error::Saturation { .. })
        ));
    }

    #[test]
    fn v0_zero_field_values() {
        let beta = std::f64::consts::PI;
        let p = mp(ModelKind::Liouville, 16, beta, 1.0);
        let f = Field::zeros(p.grid());
        let expected = p.grid().epsilon().powf(beta / (4.0 * std::f64::consts::PI));
        let v = v0(&f, &p, WickConvention::EpsilonPower).unwrap();
        assert!((v - expected).abs() < EXACT_F64);
        // cosh(0) = 1 after Wick factors: sinh-Gordon gives the same value
        let ps = mp(ModelKind::SinhGordon, 16, beta, 1.0);
        let vs = v0(&f, &ps, WickConvention::EpsilonPower).unwrap();
        assert!((vs - expected).abs() < EXACT_F64);
    }

    #[test]
    fn v0_is_nonnegative_and_even_for_sinh_gordon() {
        let p = mp(ModelKind::SinhGordon, 8, std::f64::consts::PI, 1.3);
        for seed in 0..5 {
            let f = random_field(8, seed, 2.0);
            let versus = v0(&f, &p, WickConvention::EpsilonPower).unwrap();
            let neg = v0(&f.scaled(-1.0), &p, WickConvention::EpsilonPower).unwrap();
            assert!(versus >= 0.0);
            assert_eq!(versus, neg);
        }
    }

    #[test]
    fn grad_v0_zero_field_sinh_gordon_vanishes() {
        let p = mp(ModelKind::SinhGordon, 8, std::f64::consts::PI, 1.0);
        let f = Field::zeros(p.grid());
        let g = grad_v0(&f, &p, WickConvention::EpsilonPower).unwrap();
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn grad_v0_liouville_is_strictly_positive() {
        let p = mp(ModelKind::Liouville, 8, std::f64::consts::PI, 1.0);
        let f = random_field(8, 11, 2.0);
        let g = grad_v0(&f, &p, WickConvention::EpsilonPower).unwrap();
        assert!(g.values().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn grad_v0_is_odd_for_sinh_gordon() {
        let p = mp(ModelKind::SinhGordon, 8, std::f64::consts::PI, 1.0);
        let f = random_field(8, 12, 1.5);
        let g = grad_v0(&f, &p, WickConvention::EpsilonPower).unwrap();
        let gneg = grad_v0(&f.scaled(-1.0), &p, WickConvention::EpsilonPower).unwrap();
        for (a, b) in g.values().iter().zip(gneg.values()) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn gradient_matches_central_finite_difference() {
        // (v0(f+hg) - v0(f-hg)) / 2h = ∫ ∇v0 · g dx to 1e-6 relative.
        for kind in [ModelKind::Liouville, ModelKind::SinhGordon] {
            for conv in [WickConvention::EpsilonPower, WickConvention::VarianceSubtraction] {
                let p = mp(kind, 16, std::f64::consts::PI, 1.7);
                let f = random_field(16, 21, 1.0);
                let g = random_field(16, 22, 1.0);
                let h = FD_STEP;
                let plus = v0(&f.added(&g.scaled(h)), &p, conv).unwrap();
                let minus = v0(&f.added(&g.scaled(-h)), &p, conv).unwrap();
                let fd = (plus - minus) / (2.0 * h);
                let exact = grad_v0(&f, &p, conv).unwrap().inner(&g).unwrap();
                assert!(
                    (fd - exact).abs() < FD_EXACT * exact.abs().max(1.0),
                    "{kind:?}/{conv:?}: fd = {fd}, exact = {exact}"
                );
            }
        }
    }

    #[test]
    fn v0_and_grad_agrees_with_separate_calls() {
        for kind in [ModelKind::Liouville, ModelKind::SinhGordon] {
            let p = mp(kind, 8, std::f64::consts::PI, 0.8);
            let f = random_field(8, 31, 1.2);
            let (v, g) = v0_and_grad(&f, &p, WickConvention::EpsilonPower).unwrap();
            assert_eq!(v, v0(&f, &p, WickConvention::EpsilonPower).unwrap());
            assert_eq!(
                g.values(),
                grad_v0(&f, &p, WickConvention::EpsilonPower).unwrap().values()
            );
        }
    }

    #[test]
    fn perturbation_monotonicity_inequalities() {
        // -a·e^{b+a} <= -a·e^{b} and -a·sinh(b+a) <= -a·sinh(b)
        let mut rng = derived_rng(41, &[]);
        for _ in 0..1000 {
            let a: f64 = 4.0 * (rand::Rng::random::<f64>(&mut rng) - 0.5);
            let b: f64 = 4.0 * (rand::Rng::random::<f64>(&mut rng) - 0.5);
            assert!(-a * (b + a).exp() <= -a * b.exp() + 1e-12);
            assert!(-a * (b + a).sinh() <= -a * b.sinh() + 1e-12);
        }
    }

    #[test]
    fn gmc_mass_zero_field() {
        let p = mp(ModelKind::Liouville, 8, std::f64::consts::PI, 1.0);
        let f = Field::zeros(p.grid());
        let c_diag = p.scale().diagonal_variance(f64::INFINITY).unwrap();
        let expected = (-0.5 * p.beta() * c_diag).exp();
        assert!((gmc_mass(&f, &p, 1.0).unwrap() - expected).abs() < EXACT_F64);
        assert!((gmc_mass_sym(&f, &p).unwrap() - expected).abs() < EXACT_F64);
    }

    #[test]
    fn gmc_mass_expectation_is_one() {
        // E[M(Y_∞)] = 1 by the Gaussian moment generating identity.
        let p = mp(ModelKind::Liouville, 16, std::f64::consts::PI, 1.0);
        let cov = p.scale().c_hat_table(f64::INFINITY).unwrap();
        let replicas = 10_000usize;
        let masses: Vec<f64> = crate::exec::map_indexed(replicas, |r| {
            let mut rng = derived_rng(51, &[r as u64]);
            let f = sample_gaussian(p.grid(), &cov, &mut rng).unwrap();
            gmc_mass(&f, &p, 1.0).unwrap()
        });
        let z = (mean(&masses) - 1.0) / se_mean(&masses);
        assert!(z.abs() < Z_CRIT, "z = {z}");
    }

    #[test]
    fn gmc_second_moment_matches_double_spectral_sum() {
        // E[M²] = ∫∫ e^{β c_∞(x,y)} dx dy, evaluated from the covariance
        // kernel; empirical second moment within 3 SE at n = 8.
        let p = mp(ModelKind::Liouville, 8, std::f64::consts::PI, 1.0);
        let grid = p.grid();
        let cov = p.scale().c_hat_table(f64::INFINITY).unwrap();
        // kernel row via inverse transform of the multiplier table
        let mut spec = crate::lattice::SpectralField::zeros(grid);
        for (c, &t) in spec.coefficients_mut().iter_mut().zip(&cov) {
            *c = rustfft::num_complex::Complex64::new(t, 0.0);
        }
        let kernel = spec.inverse_transform().unwrap();
        let eps2 = grid.epsilon().powi(2);
        let mut exact = 0.0;
        for x1 in 0..8 {
            for x2 in 0..8 {
                // translation invariance: sum over displacement classes
                exact += eps2 * (p.beta() * kernel.at(x1, x2)).exp();
            }
        }
        // factor ∫dx = 1 from the outer variable
        let replicas = 20_000usize;
        let sq: Vec<f64> = crate::exec::map_indexed(replicas, |r| {
            let mut rng = derived_rng(52, &[r as u64]);
            let f = sample_gaussian(grid, &cov, &mut rng).unwrap();
            gmc_mass(&f, &p, 1.0).unwrap().powi(2)
        });
        let z = (mean(&sq) - exact) / se_mean(&sq);
        assert!(z.abs() < Z_CRIT, "z = {z}, emp = {}, exact = {exact}", mean(&sq));
    }

    #[test]
    fn wick_conversion_factor_is_bounded_across_eps() {
        let mut prev: Option<f64> = None;
        for n in [16, 32, 64, 128] {
            let p = mp(ModelKind::Liouville, n, std::f64::consts::PI, 1.0);
            let factor = p.wick_conversion_factor().unwrap();
            assert!(factor.is_finite() && factor > 0.0);
            if let Some(q) = prev {
                assert!((factor / q).abs() < 2.0 && (factor / q).abs() > 0.5);
            }
            prev = Some(factor);
        }
    }
}
