//! Norms and statistics on lattice fields and drift paths.
//!
//! Sobolev norms are spectral, `‖f‖²_{H^α} = Σ_k (1+|k|²)^α |f̂(k)|²`;
//! Hölder norms run over torus displacement classes; the dyadic block
//! decomposition uses a smooth annular partition of unity on the dual
//! lattice.  On top sit the drift budget diagnostics: the bound-check
//! ratios for integrated drifts, the small-scale scaling fit, the
//! recentred maximum, and the paired independence probe.

use crate::error::{Error, Result};
use crate::flow::DriftPath;
use crate::lattice::Field;
use crate::rng::derived_rng;
use crate::stats;

/// `‖f‖_{H^α}` with weights `(1+|k|²)^α` on the dual lattice.
pub fn sobolev_norm(f: &Field, alpha: f64) -> Result<f64> {
    Ok(sobolev_norm_sq(f, alpha)?.sqrt())
}

pub fn sobolev_norm_sq(f: &Field, alpha: f64) -> Result<f64> {
    let spec = f.forward_transform()?;
    let grid = f.grid();
    let mut acc = 0.0;
    for (idx, c) in spec.coefficients().iter().enumerate() {
        acc += (1.0 + grid.freq_norm_sq(idx)).powf(alpha) * c.norm_sqr();
    }
    Ok(acc)
}

/// Torus distance between displacement `(d1, d2)` in site units, scaled by ε.
fn torus_distance(grid: crate::lattice::TorusGrid, d1: usize, d2: usize) -> f64 {
    let n = grid.n();
    let w1 = d1.min(n - d1) as f64;
    let w2 = d2.min(n - d2) as f64;
    grid.epsilon() * (w1 * w1 + w2 * w2).sqrt()
}

/// Hölder norm `sup |f(x)-f(y)|/d(x,y)^s + ‖f‖_∞`, exact over all
/// displacement classes for `n ≤ 64`, displacement-subsampled above
/// (all `|d| ≤ n/4` plus 1024 deterministic random displacements).
pub fn holder_norm(f: &Field, s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain(format!("Hölder exponent must lie in (0,1), got {s}")));
    }
    let grid = f.grid();
    let n = grid.n();
    let displacements: Vec<(usize, usize)> = if n <= 64 {
        (0..n * n).filter(|&d| d != 0).map(|d| (d / n, d % n)).collect()
    } else {
        let mut ds: Vec<(usize, usize)> = Vec::new();
        let quarter = (n / 4) as f64 * grid.epsilon();
        for d1 in 0..n {
            for d2 in 0..n {
                if (d1, d2) != (0, 0) && torus_distance(grid, d1, d2) <= quarter {
                    ds.push((d1, d2));
                }
            }
        }
        let mut rng = derived_rng(0x401de7, &[n as u64]);
        for _ in 0..1024 {
            let d1 = rand::Rng::random_range(&mut rng, 0..n);
            let d2 = rand::Rng::random_range(&mut rng, 0..n);
            if (d1, d2) != (0, 0) {
                ds.push((d1, d2));
            }
        }
        ds.sort_unstable();
        ds.dedup();
        ds
    };
    let mut seminorm = 0.0f64;
    for &(d1, d2) in &displacements {
        let dist = torus_distance(grid, d1, d2).powf(s);
        let mut max_diff = 0.0f64;
        for x1 in 0..n {
            let shifted_row = (x1 + d1) % n;
            for x2 in 0..n {
                let diff = (f.at(x1, x2) - f.at(shifted_row, (x2 + d2) % n)).abs();
                max_diff = max_diff.max(diff);
            }
        }
        seminorm = seminorm.max(max_diff / dist);
    }
    Ok(seminorm + f.max_abs())
}

/// Smooth dyadic partition of unity on the dual plane.
///
/// The radial bump is built from the C^∞ step
/// `σ(u) = g(u)/(g(u)+g(1-u))`, `g(u) = e^{-1/u}` for `u > 0`:
/// `ψ(r) = 1 - σ((3r-2)/2)` equals 1 for `r ≤ 2/3` and 0 for `r ≥ 4/3`, and
/// the annular bumps are `χ_j(k) = ψ(|k|/2^{j+1}) - ψ(|k|/2^j)`, supported
/// in `{2/3·2^j ≤ |k| ≤ 8/3·2^j}` (blocks two apart are disjoint).  On the
/// lattice the last admissible block absorbs the remainder so the partition
/// sums to one exactly at every dual point.
#[derive(Debug, Clone)]
pub struct LpPartition {
    /// `blocks[i]` is the multiplier table of block `j = i - 1`.
    blocks: Vec<Vec<f64>>,
}

fn smooth_step(u: f64) -> f64 {
    fn g(u: f64) -> f64 {
        if u > 0.0 {
            (-1.0 / u).exp()
        } else {
            0.0
        }
    }
    let a = g(u);
    let b = g(1.0 - u);
    a / (a + b)
}

fn psi(r: f64) -> f64 {
    1.0 - smooth_step((3.0 * r - 2.0) / 2.0)
}

impl LpPartition {
    pub fn new(grid: crate::lattice::TorusGrid) -> Self {
        let n = grid.n() as f64;
        // largest j whose annulus fits inside the dual square (-πn, πn]²
        let j_eps = ((3.0 * std::f64::consts::PI * n / 8.0).log2()).floor() as i32;
        let sites = grid.num_sites();
        let mut blocks: Vec<Vec<f64>> = Vec::new();
        let mut assigned = vec![0.0f64; sites];
        for j in -1..=j_eps {
            let mut table = vec![0.0f64; sites];
            for idx in 0..sites {
                let r = grid.freq_norm_sq(idx).sqrt();
                let chi = if j == j_eps {
                    1.0 - assigned[idx]
                } else if j == -1 {
                    psi(r)
                } else {
                    let p = 2.0f64.powi(j);
                    psi(r / (2.0 * p)) - psi(r / p)
                };
                table[idx] = chi;
                assigned[idx] += chi;
            }
            blocks.push(table);
        }
        LpPartition { blocks }
    }

    /// Number of blocks; block index `j` runs from -1 to `len - 2`.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.blocks[i]
    }

    /// `Σ_j χ_j(k)` over all blocks (1 at every dual point by construction).
    pub fn partition_sum(&self, idx: usize) -> f64 {
        self.blocks.iter().map(|b| b[idx]).sum()
    }
}

/// Per-block `L²` norms and the assembled negative-regularity estimate.
#[derive(Debug, Clone)]
pub struct LpBlockReport {
    /// `‖Δ_j f‖_{L²}` for `j = -1, 0, …`.
    pub block_norms: Vec<f64>,
    /// `Σ_j 2^{-2j(1-δ)} ‖Δ_j f‖²_{L²}`.
    pub assembled_sq: f64,
    /// Direct spectral `‖f‖²_{H^{-1+δ}}` for cross-checking.
    pub direct_sq: f64,
}

/// Dyadic block norms of `f` and the assembled `H^{-1+δ}` estimate,
/// `δ ∈ (0,1)`.
pub fn lp_block_norms(f: &Field, delta: f64) -> Result<LpBlockReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta must lie in (0,1), got {delta}")));
    }
    let part = LpPartition::new(f.grid());
    let spec = f.forward_transform()?;
    let mut block_norms = Vec::with_capacity(part.len());
    let mut assembled_sq = 0.0;
    for i in 0..part.len() {
        let j = i as i32 - 1;
        let table = part.block(i);
        let mut sq = 0.0;
        for (c, &chi) in spec.coefficients().iter().zip(table) {
            sq += chi * chi * c.norm_sqr();
        }
        block_norms.push(sq.sqrt());
        assembled_sq += 2.0f64.powf(-2.0 * j as f64 * (1.0 - delta)) * sq;
    }
    let direct_sq = sobolev_norm_sq(f, -1.0 + delta)?;
    Ok(LpBlockReport {
        block_norms,
        assembled_sq,
        direct_sq,
    })
}

/// `∫_s^t ‖u_τ‖²_{L²} dτ` with the drift path's quadrature weights.
pub fn drift_l2_budget(d: &DriftPath, s: f64, t: f64) -> Result<f64> {
    d.l2_budget(s, t)
}

/// Bound-check for integrated drifts: `‖I_{s,t}(u)‖²_{H^α}` divided by the
/// scale-budget right-hand side
///
/// - `α ∈ [0,1)`: `(t-s)^{1-α} ∫_0^t ‖u‖² dτ`
/// - `α = 1`:     `∫_s^t ‖u‖² dτ` (uniform bound)
/// - `α ∈ (1,2]`: `(t-s)/s^α ∫_s^t ‖u‖² dτ` (needs `s > 0`)
#[derive(Debug, Clone, Copy)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

pub fn integrated_drift_bound_check(
    d: &DriftPath,
    alpha: f64,
    s: f64,
    t: f64,
) -> Result<BoundCheck> {
    if !(0.0..=2.0).contains(&alpha) {
        return Err(Error::Domain(format!("alpha must lie in [0,2], got {alpha}")));
    }
    let lhs = sobolev_norm_sq(&d.integrated(s, t)?, alpha)?;
    let rhs = if alpha < 1.0 {
        (t - s).powf(1.0 - alpha) * d.l2_budget(0.0, t)?
    } else if alpha == 1.0 {
        d.l2_budget(s, t)?
    } else {
        if s <= 0.0 {
            return Err(Error::Domain(
                "the high-regularity budget needs s > 0".into(),
            ));
        }
        (t - s) / s.powf(alpha) * d.l2_budget(s, t)?
    };
    let ratio = if rhs == 0.0 { 0.0 } else { lhs / rhs };
    Ok(BoundCheck { lhs, rhs, ratio })
}

/// Result of the small-scale scaling regression.
#[derive(Debug, Clone)]
pub struct ScalingFit {
    /// Fitted slope of `log E[∫_0^t ‖u‖²]^{1/2}` against `log t`, absent
    /// when the budgets are degenerate.
    pub slope: Option<f64>,
    pub degenerate: bool,
    /// `(log t, log E[budget]^{1/2})` points used.
    pub points: Vec<(f64, f64)>,
}

/// Regress the root ensemble-mean budget against `t` over the smallest two
/// dyadic decades (eight dyadic grid points).  Requires at least 100 paths.
pub fn smallscale_scaling_fit(ensemble: &[DriftPath], _delta: f64) -> Result<ScalingFit> {
    if ensemble.len() < 100 {
        return Err(Error::Precision(format!(
            "scaling fit needs >= 100 paths, got {}",
            ensemble.len()
        )));
    }
    let axis = ensemble[0].axis().to_vec();
    let window: Vec<f64> = axis
        .iter()
        .copied()
        .filter(|&t| t > 0.0 && t <= axis[1] * 128.0 * (1.0 + 1e-9))
        .collect();
    let mut points = Vec::new();
    let mut degenerate = false;
    for &t in &window {
        let budgets: Vec<f64> = ensemble
            .iter()
            .map(|d| d.l2_budget(0.0, t))
            .collect::<Result<_>>()?;
        let m = stats::mean(&budgets);
        if m <= 0.0 {
            degenerate = true;
            break;
        }
        points.push((t.ln(), 0.5 * m.ln()));
    }
    if degenerate {
        return Ok(ScalingFit {
            slope: None,
            degenerate: true,
            points,
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (slope, _) = stats::linear_fit(&xs, &ys)?;
    Ok(ScalingFit {
        slope: Some(slope),
        degenerate: false,
        points,
    })
}

/// Recentring constant
/// `m_ε = (2 log(1/ε) - (3/4) log log(1/ε)) / √(2π)`.
pub fn recentring_constant(epsilon: f64) -> Result<f64> {
    if epsilon >= 1.0 / std::f64::consts::E {
        return Err(Error::Domain(format!(
            "recentring needs ε < 1/e, got {epsilon}"
        )));
    }
    let l = (1.0 / epsilon).ln();
    Ok((2.0 * l - 0.75 * l.ln()) / (2.0 * std::f64::consts::PI).sqrt())
}

/// `max_x f(x) - m_ε`.
pub fn max_centered(f: &Field) -> Result<f64> {
    Ok(f.max() - recentring_constant(f.grid().epsilon())?)
}

/// Paired independence probe: the largest |Pearson correlation| between the
/// values of the two ensembles over a fixed set of probe sites, compared
/// with the `3/√replicas` threshold.
#[derive(Debug, Clone)]
pub struct IndependenceReport {
    pub max_abs_correlation: f64,
    pub threshold: f64,
    pub replicas: usize,
}

impl IndependenceReport {
    pub fn pass(&self) -> bool {
        self.max_abs_correlation < self.threshold
    }
}

pub fn independence_check(ys: &[Field], phis: &[Field]) -> Result<IndependenceReport> {
    if ys.len() != phis.len() || ys.is_empty() {
        return Err(Error::Shape("paired replicas required".into()));
    }
    let grid = ys[0].grid();
    if phis[0].grid() != grid {
        return Err(Error::Shape("probe ensembles live on different grids".into()));
    }
    let n = grid.n();
    // fixed probe sites: corner, two half-period shifts, one interior point
    let probes = [(0usize, 0usize), (0, n / 2), (n / 2, 0), (n / 4, n / 4)];
    let mut max_abs = 0.0f64;
    for &a in &probes {
        let ya: Vec<f64> = ys.iter().map(|f| f.at(a.0, a.1)).collect();
        for &b in &probes {
            let pb: Vec<f64> = phis.iter().map(|f| f.at(b.0, b.1)).collect();
            max_abs = max_abs.max(stats::pearson(&ya, &pb).abs());
        }
    }
    Ok(IndependenceReport {
        max_abs_correlation: max_abs,
        threshold: 3.0 / (ys.len() as f64).sqrt(),
        replicas: ys.len(),
    })
}

/// One computed statistic, ready for the results file.
#[derive(Debug, Clone)]
pub struct NormReport {
    pub kind: String,
    pub parameter: f64,
    pub value: f64,
    pub std_error: Option<f64>,
    pub replicas: usize,
}
