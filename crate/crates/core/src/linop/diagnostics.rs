//! Schur complements, fixed-`k` space blocks and the quasi-periodic
//! Schrodinger operator on space regions.

use std::f64::consts::TAU;

use faer::Mat;
use serde::{Deserialize, Serialize};

use super::{analyze_inverse, assemble, Green, GreenThresholds, LinopError, OperatorSpec, SINGULAR_REL};
use crate::lattice::{IndexMap, Site};
use crate::linalg;
use crate::nonlin::neighbours;
use crate::spectrum::{dot, kdot, ModelParams};

#[derive(Debug, Clone)]
pub struct SchurReport {
    /// `S = H_BB - H_BC G_C H_CB` on the sites of `B*`.
    pub s: Mat<f64>,
    /// Smallest singular value of `S` (infinite when `B*` is empty).
    pub min_singular: f64,
    /// `||G_C||` for the complement `C = region \ B*`.
    pub complement_norm: f64,
    /// `||G_region||`, computed directly.
    pub green_norm: f64,
    /// `4 (1 + ||G_C||)^2 (1 + ||S^{-1}||)`
    pub bound: f64,
    pub holds: bool,
}

fn min_abs_eig(a: &Mat<f64>) -> Result<(f64, f64), LinopError> {
    let ev = linalg::sym_eigenvalues(a)?;
    let lo = ev.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    let hi = ev.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    Ok((lo, hi))
}

fn submatrix(a: &Mat<f64>, rows: &[usize], cols: &[usize]) -> Mat<f64> {
    Mat::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

pub fn schur_complement(spec: &OperatorSpec, b_star: &[Site]) -> Result<SchurReport, LinopError> {
    let h = assemble(spec)?;
    let a = h.dense();
    let mut bi = Vec::new();
    for s in b_star {
        bi.push(h.index.index_of(s)?);
    }
    bi.sort_unstable();
    bi.dedup();
    let ci: Vec<usize> = (0..h.len()).filter(|i| bi.binary_search(i).is_err()).collect();
    let acc = submatrix(&a, &ci, &ci);
    let (c_lo, c_hi) = min_abs_eig(&acc)?;
    if !ci.is_empty() && (c_lo == 0.0 || c_lo < SINGULAR_REL * c_hi) {
        return Err(LinopError::ComplementSingular { min_singular: c_lo });
    }
    let gc = if ci.is_empty() { Mat::zeros(0, 0) } else { linalg::inverse(&acc) };
    let complement_norm = if ci.is_empty() { 0.0 } else { 1.0 / c_lo };
    let abb = submatrix(&a, &bi, &bi);
    let abc = submatrix(&a, &bi, &ci);
    let acb = submatrix(&a, &ci, &bi);
    let s = if ci.is_empty() { abb } else { &abb - &abc * &gc * &acb };
    let s_sym = Mat::from_fn(s.nrows(), s.ncols(), |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
    let (s_lo, _) = if bi.is_empty() { (f64::INFINITY, 0.0) } else { min_abs_eig(&s_sym)? };
    let s_inv_norm = if bi.is_empty() { 0.0 } else { 1.0 / s_lo };
    let (a_lo, _) = min_abs_eig(&a)?;
    let green_norm = 1.0 / a_lo;
    let bound = 4.0 * (1.0 + complement_norm).powi(2) * (1.0 + s_inv_norm);
    Ok(SchurReport { s, min_singular: s_lo, complement_norm, green_norm, bound, holds: green_norm <= bound })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpectral {
    /// Eigenvalues of `diag(mu_n^2) + eps Delta` on the space block, ascending.
    pub zetas: Vec<f64>,
    /// `max_l |zeta_l - (sigma + k . omega)^2|^{-1}`
    pub bound: f64,
    /// `||A_k^{-1}||` from a direct inverse.
    pub direct_norm: f64,
    /// Some `zeta_l < 1/2`.
    pub below_half: bool,
}

/// Spectral data of `A_k = R (D(sigma) + eps Delta) R` at fixed `k` on the
/// space sites `space`.
pub fn block_spectral_bound(
    k: &[i64],
    space: &[Vec<i64>],
    sigma: f64,
    omega: &[f64],
    params: &ModelParams,
) -> Result<BlockSpectral, LinopError> {
    if space.is_empty() {
        return Err(LinopError::Invalid("empty space block".into()));
    }
    let index = IndexMap::from_sites(space.iter().map(|n| Site::new(vec![], n.clone())).collect());
    let n = index.len();
    let mut b = Mat::<f64>::zeros(n, n);
    for (i, s) in index.sites().iter().enumerate() {
        b[(i, i)] = params.mu(&s.n).powi(2);
        for m in neighbours(&s.n) {
            if let Some(j) = index.get(&Site::new(vec![], m)) {
                b[(i, j)] = params.eps;
            }
        }
    }
    let zetas = linalg::sym_eigenvalues(&b)?;
    let min_zeta = zetas[0];
    if min_zeta <= 0.0 {
        return Err(LinopError::NegativeShift { min_zeta });
    }
    let shift = (sigma + kdot(k, omega)).powi(2);
    let bound = zetas.iter().map(|z| 1.0 / (z - shift).abs()).fold(0.0, f64::max);
    let a = Mat::from_fn(n, n, |i, j| b[(i, j)] - if i == j { shift } else { 0.0 });
    let direct_norm = linalg::op_norm(&linalg::inverse(&a))?;
    Ok(BlockSpectral { zetas, bound, direct_norm, below_half: min_zeta < 0.5 })
}

/// Green's function of `cos(2 pi (theta + n . alpha)) + m - E + eps Delta`
/// on the space sites, against `||T^{-1}|| <= e^{sqrt N}` and decay rate
/// `|log eps| / 2` beyond distance `N^rho3`.
pub fn qp_schrodinger_green(
    space: &[Vec<i64>],
    e: f64,
    theta: f64,
    params: &ModelParams,
    scale: u64,
    rho3: f64,
) -> Result<Green, LinopError> {
    if space.is_empty() {
        return Err(LinopError::Invalid("empty space region".into()));
    }
    let index = IndexMap::from_sites(space.iter().map(|n| Site::new(vec![], n.clone())).collect());
    let n = index.len();
    let mut t = Mat::<f64>::zeros(n, n);
    for (i, s) in index.sites().iter().enumerate() {
        t[(i, i)] = (TAU * (theta + dot(&s.n, &params.alpha))).cos() + params.m - e;
        for m in neighbours(&s.n) {
            if let Some(j) = index.get(&Site::new(vec![], m)) {
                t[(i, j)] = params.eps;
            }
        }
    }
    let rate = if params.eps > 0.0 { 0.5 * params.eps.ln().abs() } else { f64::INFINITY };
    let s = scale as f64;
    let thr = GreenThresholds { norm_bound: s.sqrt().exp(), decay_rate: rate, decay_from: s.powf(rho3) };
    analyze_inverse(index, &t, &thr)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpThetaScan {
    pub bad_fraction: f64,
    pub bad_thetas: Vec<f64>,
    pub grid_len: usize,
}

/// Fraction of phases where the quasi-periodic Green's function fails a bound.
pub fn qp_theta_scan(
    space: &[Vec<i64>],
    e: f64,
    thetas: &[f64],
    params: &ModelParams,
    scale: u64,
    rho3: f64,
) -> Result<QpThetaScan, LinopError> {
    let mut bad = Vec::new();
    for &th in thetas {
        let good = match qp_schrodinger_green(space, e, th, params, scale, rho3) {
            Ok(g) => g.report.good(),
            Err(LinopError::Singular { .. }) => false,
            Err(e) => return Err(e),
        };
        if !good {
            bad.push(th);
        }
    }
    let n = thetas.len().max(1);
    Ok(QpThetaScan { bad_fraction: bad.len() as f64 / n as f64, bad_thetas: bad, grid_len: thetas.len() })
}
