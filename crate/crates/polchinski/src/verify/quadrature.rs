//! Tensor Gauss–Hermite quadrature over small Gaussian vectors.
//!
//! Used as a sampling-free oracle on tiny lattices: the covariance matrix is
//! assembled from its spectral kernel, Cholesky-factorised, and expectations
//! `E[g(ζ)]`, `ζ ~ N(0, C)`, are evaluated as tensor quadratures over the
//! standard-normal coordinates.  Point counts grow like `order^(n²)`, so a
//! hard budget rejects anything beyond a 2×2 lattice at useful orders.

use crate::error::{Error, Result};
use crate::lattice::{Field, SpectralField, TorusGrid};
use crate::potential::{self, ModelParams, WickConvention};
use rustfft::num_complex::Complex64;

/// Nodes and weights for `E[g(ξ)] ≈ Σ w_i g(x_i)`, `ξ ~ N(0,1)`.
///
/// Roots of the Hermite polynomials are found by bisection using the
/// interlacing property (roots of `H_{k+1}` separate those of `H_k`),
/// then weights come from the standard closed form; everything is converted
/// to the standard-normal weight so `Σ w_i = 1`.
pub fn gauss_hermite_normal(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if order < 1 || order > 64 {
        return Err(Error::InfeasibleQuadrature(format!(
            "order {order} outside [1, 64]"
        )));
    }
    // physicists' H_n and its value via the recurrence
    fn h(n: usize, x: f64) -> f64 {
        let mut hm = 1.0;
        if n == 0 {
            return hm;
        }
        let mut hc = 2.0 * x;
        for k in 1..n {
            let next = 2.0 * x * hc - 2.0 * k as f64 * hm;
            hm = hc;
            hc = next;
        }
        hc
    }

    let mut roots: Vec<f64> = vec![0.0]; // roots of H_1
    for k in 1..order {
        // roots of H_{k+1} bracketed by roots of H_k and the outer bound
        let bound = (2.0 * (k + 1) as f64 + 1.0).sqrt() + 1.0;
        let mut brackets = Vec::with_capacity(k + 2);
        brackets.push(-bound);
        brackets.extend(roots.iter().copied());
        brackets.push(bound);
        let mut next = Vec::with_capacity(k + 1);
        for w in brackets.windows(2) {
            let (mut a, mut b) = (w[0], w[1]);
            let fa = h(k + 1, a);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                let fm = h(k + 1, m);
                if (fa > 0.0) == (fm > 0.0) {
                    a = m;
                } else {
                    b = m;
                }
            }
            next.push(0.5 * (a + b));
        }
        roots = next;
    }

    // physicists' weights, then the change of variables to N(0,1):
    // nodes √2·x, weights w/√π
    let n = order;
    let mut lnfact = 0.0;
    for i in 1..=n {
        lnfact += (i as f64).ln();
    }
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for &x in &roots {
        let hm = h(n - 1, x);
        let logw = (n as f64 - 1.0) * std::f64::consts::LN_2 + lnfact
            - 2.0 * (n as f64).ln()
            - 2.0 * hm.abs().ln();
        // w_i = 2^{n-1} n! √π / (n² H_{n-1}(x_i)²); the √π cancels in the
        // normal conversion
        nodes.push(std::f64::consts::SQRT_2 * x);
        weights.push(logw.exp());
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total; // exact normalisation Σw = 1 absorbs the √π factor
    }
    Ok((nodes, weights))
}

/// Dense covariance matrix `C(x,y) = Σ_k σ²(k) e^{ik(x-y)}` from a
/// multiplier table, row-major over flat site indices.
pub fn covariance_matrix(grid: TorusGrid, table: &[f64]) -> Result<Vec<f64>> {
    let mut spec = SpectralField::zeros(grid);
    for (c, &t) in spec.coefficients_mut().iter_mut().zip(table) {
        *c = Complex64::new(t, 0.0);
    }
    let kernel = spec.inverse_transform()?;
    let n = grid.n();
    let sites = grid.num_sites();
    let mut mat = vec![0.0; sites * sites];
    for x in 0..sites {
        let (x1, x2) = (x / n, x % n);
        for y in 0..sites {
            let (y1, y2) = (y / n, y % n);
            let d1 = (x1 + n - y1) % n;
            let d2 = (x2 + n - y2) % n;
            mat[x * sites + y] = kernel.at(d1, d2);
        }
    }
    Ok(mat)
}

/// Lower-triangular Cholesky factor of a small SPD matrix.
pub fn cholesky(mat: &[f64], dim: usize) -> Result<Vec<f64>> {
    if mat.len() != dim * dim || dim > 256 {
        return Err(Error::Shape(format!("cholesky needs dim² entries, dim <= 256, got {dim}")));
    }
    let mut l = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let mut sum = mat[i * dim + j];
            for k in 0..j {
                sum -= l[i * dim + k] * l[j * dim + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::Precision(format!(
                        "matrix not positive definite at pivot {i} ({sum:.3e})"
                    )));
                }
                l[i * dim + i] = sum.sqrt();
            } else {
                l[i * dim + j] = sum / l[j * dim + j];
            }
        }
    }
    Ok(l)
}

/// Budget-guarded order selection: the largest order with
/// `order^dim <= max_points`, at least 4, at most 20.
fn feasible_order(dim: usize, max_points: f64) -> Result<usize> {
    let mut order = 20usize;
    while order >= 4 {
        if (order as f64).powi(dim as i32) <= max_points {
            return Ok(order);
        }
        order -= 1;
    }
    Err(Error::InfeasibleQuadrature(format!(
        "dimension {dim} exceeds the tensor budget of {max_points:.0} points"
    )))
}

/// Tensor quadrature of `E[g(ζ)]`, `ζ = L ξ`, iterating all `order^dim`
/// multi-indices.  `g` receives the site-indexed Gaussian vector.
fn tensor_expectation(
    l: &[f64],
    dim: usize,
    order: usize,
    mut g: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<f64> {
    let (nodes, weights) = gauss_hermite_normal(order)?;
    let mut idx = vec![0usize; dim];
    let mut zeta = vec![0.0f64; dim];
    let mut acc = 0.0;
    loop {
        let mut w = 1.0;
        for &i in idx.iter() {
            w *= weights[i];
        }
        for r in 0..dim {
            let mut s = 0.0;
            for c in 0..=r {
                s += l[r * dim + c] * nodes[idx[c]];
            }
            zeta[r] = s;
        }
        acc += w * g(&zeta)?;
        // odometer increment
        let mut p = 0;
        loop {
            if p == dim {
                return Ok(acc);
            }
            idx[p] += 1;
            if idx[p] < order {
                break;
            }
            idx[p] = 0;
            p += 1;
        }
    }
}

/// `-log E[e^{-v₀(ζ)}]` for `ζ ~ N(0, C)` with covariance multiplier table
/// `cov`, by tensor quadrature at the given order.
pub fn log_mean_exp_neg_v0(
    mp: &ModelParams,
    conv: WickConvention,
    cov: &[f64],
    order: usize,
) -> Result<f64> {
    let grid = mp.grid();
    let dim = grid.num_sites();
    if (order as f64).powi(dim as i32) > 2e7 {
        return Err(Error::InfeasibleQuadrature(format!(
            "order {order} at dimension {dim} exceeds the point budget"
        )));
    }
    let mat = covariance_matrix(grid, cov)?;
    let l = cholesky(&mat, dim)?;
    let mean = tensor_expectation(&l, dim, order, |zeta| {
        let f = Field::from_values(grid, zeta.to_vec())?;
        Ok((-potential::v0(&f, mp, conv)?).exp())
    })?;
    Ok(-mean.ln())
}

/// Quadrature of the gradient ratio
/// `E[∇v₀(φ+ζ) e^{-v₀(φ+ζ)}] / E[e^{-v₀(φ+ζ)}]`.
pub fn grad_vt_by_quadrature(
    phi: &Field,
    mp: &ModelParams,
    conv: WickConvention,
    cov: &[f64],
    order: usize,
) -> Result<Field> {
    let grid = mp.grid();
    let dim = grid.num_sites();
    if (order as f64).powi(dim as i32) > 2e7 {
        return Err(Error::InfeasibleQuadrature(format!(
            "order {order} at dimension {dim} exceeds the point budget"
        )));
    }
    let mat = covariance_matrix(grid, cov)?;
    let l = cholesky(&mat, dim)?;
    let mut numer = vec![0.0f64; dim];
    let mut denom = 0.0;
    let (nodes, weights) = gauss_hermite_normal(order)?;
    let mut idx = vec![0usize; dim];
    let mut zeta = vec![0.0f64; dim];
    'outer: loop {
        let mut w = 1.0;
        for &i in idx.iter() {
            w *= weights[i];
        }
        for r in 0..dim {
            let mut s = 0.0;
            for c in 0..=r {
                s += l[r * dim + c] * nodes[idx[c]];
            }
            zeta[r] = s;
        }
        let shifted = Field::from_values(grid, zeta.clone())?.added(phi);
        let (v, grad) = potential::v0_and_grad(&shifted, mp, conv)?;
        let weight = w * (-v).exp();
        for (nu, &g) in numer.iter_mut().zip(grad.values()) {
            *nu += weight * g;
        }
        denom += weight;
        let mut p = 0;
        loop {
            if p == dim {
                break 'outer;
            }
            idx[p] += 1;
            if idx[p] < order {
                break;
            }
            idx[p] = 0;
            p += 1;
        }
    }
    let values = numer.iter().map(|nu| nu / denom).collect();
    Field::from_values(grid, values)
}

/// Order selection helper for the partition oracle.
pub fn partition_quadrature_order(dim: usize) -> Result<usize> {
    feasible_order(dim, 2e7)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gh_moments_are_exact() {
        // E[ξ^{2m}] = (2m-1)!! up to degree 2·order - 1
        let (nodes, weights) = gauss_hermite_normal(12).unwrap();
        let mut expected = 1.0; // (2m-1)!! running
        for m in 1..=5 {
            expected *= (2 * m - 1) as f64;
            let emp: f64 = nodes
                .iter()
                .zip(&weights)
                .map(|(x, w)| w * x.powi(2 * m as i32))
                .sum();
            assert!(
                (emp - expected).abs() < 1e-9 * expected,
                "moment {m}: {emp} vs {expected}"
            );
        }
        let odd: f64 = nodes.iter().zip(&weights).map(|(x, w)| w * x.powi(3)).sum();
        assert!(odd.abs() < 1e-12);
    }

    #[test]
    fn cholesky_reconstructs() {
        let mat = vec![4.0, 2.0, 0.0, 2.0, 5.0, 1.0, 0.0, 1.0, 3.0];
        let l = cholesky(&mat, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += l[i * 3 + k] * l[j * 3 + k];
                }
                assert!((s - mat[i * 3 + j]).abs() < 1e-12);
            }
        }
        let bad = vec![1.0, 2.0, 2.0, 1.0];
        assert!(cholesky(&bad, 2).is_err());
    }

    #[test]
    fn order_budget() {
        assert_eq!(partition_quadrature_order(4).unwrap(), 20);
        assert!(partition_quadrature_order(16).is_err());
    }
}
