//! Large-deviation scans over a family of translated elementary regions.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{analyze_inverse, assemble_on, Assembled, Kernel, LdeThresholds, LinopError};
use crate::lattice::{box_points, IndexMap, RegionSpec, Site};
use crate::spectrum::{kdot, ModelParams};

/// Translated elementary regions `(0, n) + R_w(0) \ (R_w(0) + z)` with
/// `|n| <= 2M` and diameter `M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdeFamily {
    pub regions: Vec<RegionSpec>,
    /// Size of the translation-by-shape product before subsampling.
    pub full_size: usize,
    pub subsampled: bool,
}

/// Translations `n in {-2M, -M, 0, M, 2M}^d` times shapes `z = s (w + 1)`
/// for `s in {-1, 0, 1}^{b+d}`, where `w = floor(M / 2)`. When the product
/// exceeds `max_regions`, evenly spaced members are kept.
pub fn lde_family(b: usize, d: usize, scale: u64, max_regions: usize) -> LdeFamily {
    let m = scale as i64;
    let w = (scale / 2).max(1);
    let translations: Vec<Vec<i64>> = box_points(d, 2).into_iter().map(|t| t.iter().map(|x| x * m).collect()).collect();
    let shapes: Vec<Vec<i64>> = box_points(b + d, 1)
        .into_iter()
        .map(|s| s.iter().map(|x| x * (w as i64 + 1)).collect())
        .collect();
    // the unshifted rectangle first, so it is always kept
    let mut shapes_sorted = shapes;
    shapes_sorted.sort_by_key(|z| z.iter().any(|&x| x != 0));
    let mut all = Vec::new();
    for z in &shapes_sorted {
        for t in &translations {
            let mut center = vec![0; b];
            center.extend(t);
            all.push(RegionSpec::rectangle(b, center, vec![w; b + d]).with_shift(z.clone()));
        }
    }
    let full_size = all.len();
    let cap = max_regions.max(1);
    if full_size <= cap {
        return LdeFamily { regions: all, full_size, subsampled: false };
    }
    let regions = (0..cap).map(|i| all[i * full_size / cap].clone()).collect();
    LdeFamily { regions, full_size, subsampled: true }
}

/// One plot row of a scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdeRow {
    pub sigma: f64,
    /// Largest Green's function norm over the family, or an upper bound for
    /// it where a Neumann-series estimate already settles the region.
    pub worst_norm: f64,
    /// Largest `log|G(j, j')| + gamma' |j - j'|` over far pairs (bounded
    /// the same way).
    pub worst_decay_margin: f64,
    pub bad: bool,
    /// Regions that needed a dense inverse.
    pub dense_checks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdeScanReport {
    pub scale: f64,
    pub thresholds: LdeThresholds,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    pub grid_len: usize,
    pub bad_fraction: f64,
    pub bad_measure: f64,
    pub bad_intervals: Vec<(f64, f64)>,
    /// `e^{-M^rho1}`
    pub comparison: f64,
    /// Fraction of grid points in the explicit small-scale set.
    pub explicit_fraction: f64,
    pub regions: usize,
    pub family_size: usize,
    pub subsampled: bool,
    pub rows: Vec<LdeRow>,
}

struct Prepared {
    h: Assembled,
    off_norm: f64,
    range: i64,
    /// Distances `>= decay_from` present in the region.
    far: Vec<i64>,
}

fn prepare(region: &RegionSpec, omega: &[f64], params: &ModelParams, kernel: &Kernel, thr: &LdeThresholds) -> Result<Prepared, LinopError> {
    let h = assemble_on(IndexMap::new(region)?, 0.0, omega, params, kernel);
    let off_norm = h.triplets().off_row_sum();
    let range = h.off_range();
    let diam = region.diameter()?;
    let from = thr.decay_from().ceil().max(1.0) as i64;
    let far = (from..=diam).collect();
    Ok(Prepared { h, off_norm, range, far })
}

/// `(norm, decay margin, dense?)` for one region at one shift.
fn check_region(p: &Prepared, sigma: f64, thr: &LdeThresholds) -> (f64, f64, bool) {
    let rate = thr.gamma_prime;
    let bound = thr.norm_bound();
    let diag = p.h.diag_at(sigma);
    let g = diag.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    // Neumann series around the diagonal: ||G|| <= 1/(g - ||P||) and
    // |G(j, j')| <= g^{-1} t^{ceil(dist/range)} / (1 - t), t = ||P||/g
    if g > p.off_norm {
        let norm_ub = 1.0 / (g - p.off_norm);
        let decay_ub = if p.off_norm == 0.0 {
            f64::NEG_INFINITY
        } else {
            let t = p.off_norm / g;
            p.far
                .iter()
                .map(|&dist| {
                    let steps = (dist + p.range - 1) / p.range;
                    (1.0 / (g * (1.0 - t))).ln() + steps as f64 * t.ln() + rate * dist as f64
                })
                .fold(f64::NEG_INFINITY, f64::max)
        };
        if norm_ub <= bound && decay_ub <= 0.0 {
            return (norm_ub, decay_ub, false);
        }
    }
    let a = p.h.at_sigma(sigma).to_dense();
    match analyze_inverse(p.h.index.clone(), &a, &thr.green()) {
        Ok(gr) => (gr.report.norm, gr.report.decay_margin, true),
        Err(_) => (f64::INFINITY, f64::INFINITY, true),
    }
}

/// `min_{xi, (k, n)} |xi (sigma + k . omega) + mu_n| <= e^{-2 M^rho1}` over
/// the union of the family.
pub fn explicit_small_scale_bad(sites: &[(f64, f64)], sigma: f64, thr: &LdeThresholds) -> bool {
    let t = thr.small_scale_threshold();
    sites.iter().any(|(kw, mu)| (sigma + kw + mu).abs() <= t || (-(sigma + kw) + mu).abs() <= t)
}

fn family_sites(family: &LdeFamily) -> Result<Vec<Site>, LinopError> {
    let mut all = BTreeSet::new();
    for r in &family.regions {
        all.extend(r.members()?);
    }
    Ok(all.into_iter().collect())
}

/// Merged open intervals of shifts where some diagonal entry
/// `mu_n^2 - (sigma + k . omega)^2` of the family is smaller than
/// `1 / norm_bound` in absolute value.
pub fn diagonal_bad_intervals(
    family: &LdeFamily,
    params: &ModelParams,
    omega: &[f64],
    thr: &LdeThresholds,
) -> Result<Vec<(f64, f64)>, LinopError> {
    let tau = 1.0 / thr.norm_bound();
    let mut iv = Vec::new();
    for s in family_sites(family)? {
        let mu2 = params.mu(&s.n).powi(2);
        let kw = kdot(&s.k, omega);
        let lo = (mu2 - tau).max(0.0).sqrt();
        let hi = (mu2 + tau).sqrt();
        if mu2 - tau <= 0.0 {
            iv.push((-kw - hi, -kw + hi));
        } else {
            iv.push((-kw + lo, -kw + hi));
            iv.push((-kw - hi, -kw - lo));
        }
    }
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (a, b) in iv {
        match merged.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => merged.push((a, b)),
        }
    }
    Ok(merged)
}

/// Classifies each shift of a uniform midpoint grid on `[sigma_lo, sigma_hi]`.
#[allow(clippy::too_many_arguments)]
pub fn lde_scan(
    params: &ModelParams,
    omega: &[f64],
    kernel: &Kernel,
    thr: &LdeThresholds,
    family: &LdeFamily,
    sigma_lo: f64,
    sigma_hi: f64,
    grid_len: usize,
) -> Result<LdeScanReport, LinopError> {
    if grid_len == 0 || !(sigma_hi > sigma_lo) {
        return Err(LinopError::Invalid("empty sigma grid".into()));
    }
    let prepared = family
        .regions
        .iter()
        .map(|r| prepare(r, omega, params, kernel, thr))
        .collect::<Result<Vec<_>, _>>()?;
    let h = (sigma_hi - sigma_lo) / grid_len as f64;
    let sigmas: Vec<f64> = (0..grid_len).map(|i| sigma_lo + (i as f64 + 0.5) * h).collect();
    let bound = thr.norm_bound();
    let rows: Vec<LdeRow> = sigmas
        .par_iter()
        .map(|&sigma| {
            let mut row = LdeRow {
                sigma,
                worst_norm: 0.0,
                worst_decay_margin: f64::NEG_INFINITY,
                bad: false,
                dense_checks: 0,
            };
            for p in &prepared {
                let (norm, margin, dense) = check_region(p, sigma, thr);
                row.worst_norm = row.worst_norm.max(norm);
                row.worst_decay_margin = row.worst_decay_margin.max(margin);
                row.dense_checks += usize::from(dense);
            }
            row.bad = !(row.worst_norm <= bound && row.worst_decay_margin <= 0.0);
            row
        })
        .collect();
    let site_vals: Vec<(f64, f64)> =
        family_sites(family)?.iter().map(|s| (kdot(&s.k, omega), params.mu(&s.n))).collect();
    let explicit = sigmas.iter().filter(|&&s| explicit_small_scale_bad(&site_vals, s, thr)).count();
    let bad_count = rows.iter().filter(|r| r.bad).count();
    let mut bad_intervals: Vec<(f64, f64)> = Vec::new();
    for r in rows.iter().filter(|r| r.bad) {
        let (a, b) = (r.sigma - h / 2.0, r.sigma + h / 2.0);
        match bad_intervals.last_mut() {
            Some(last) if (last.1 - a).abs() <= 1e-9 * h => last.1 = b,
            _ => bad_intervals.push((a, b)),
        }
    }
    Ok(LdeScanReport {
        scale: thr.scale,
        thresholds: *thr,
        sigma_lo,
        sigma_hi,
        grid_len,
        bad_fraction: bad_count as f64 / grid_len as f64,
        bad_measure: bad_count as f64 * h,
        bad_intervals,
        comparison: thr.measure_bound(),
        explicit_fraction: explicit as f64 / grid_len as f64,
        regions: family.regions.len(),
        family_size: family.full_size,
        subsampled: family.subsampled,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::tests::base_q;
    use crate::spectrum::golden_params;

    #[test]
    fn family_shape() {
        let f = lde_family(1, 1, 8, 64);
        assert_eq!(f.full_size, 45);
        assert!(!f.subsampled);
        for r in &f.regions {
            assert_eq!(r.diameter().unwrap(), 8);
            assert!(r.center[1].abs() <= 16);
        }
        let big = lde_family(1, 2, 4, 64);
        assert_eq!(big.full_size, 25 * 27);
        assert_eq!(big.regions.len(), 64);
        assert!(big.subsampled);
    }

    #[test]
    fn uncoupled_scan_matches_explicit_intervals() {
        let mut p = golden_params(1);
        p.eps = 0.0;
        p.delta = 0.0;
        let w = p.omega0().unwrap();
        let thr = LdeThresholds::defaults(6, p.gamma);
        let fam = lde_family(1, 1, 6, 64);
        let (lo, hi, n) = (-w[0] / 2.0, w[0] / 2.0, 3000);
        let rep = lde_scan(&p, &w, &Kernel::zero(), &thr, &fam, lo, hi, n).unwrap();
        let iv = diagonal_bad_intervals(&fam, &p, &w, &thr).unwrap();
        let step = (hi - lo) / n as f64;
        for r in &rep.rows {
            let inside = iv.iter().any(|(a, b)| r.sigma > *a && r.sigma < *b);
            let near_edge = iv.iter().any(|(a, b)| (r.sigma - a).abs() < step || (r.sigma - b).abs() < step);
            assert!(inside == r.bad || near_edge, "sigma {}", r.sigma);
        }
        assert!(rep.rows.iter().filter(|r| !r.bad).all(|r| r.dense_checks == 0));
    }

    #[test]
    fn coupling_shrinks_bad_set() {
        let p0 = golden_params(1);
        let w = p0.omega0().unwrap();
        let thr = LdeThresholds::defaults(6, p0.gamma);
        let fam = lde_family(1, 1, 6, 64);
        let mut fractions = Vec::new();
        for c in [1e-1, 1e-2, 1e-3] {
            let mut p = p0.clone();
            p.eps = c;
            p.delta = c;
            let k = Kernel::from_field(&base_q(), 2);
            let rep = lde_scan(&p, &w, &k, &thr, &fam, -w[0] / 2.0, w[0] / 2.0, 400).unwrap();
            assert!(rep.explicit_fraction >= 0.0);
            fractions.push(rep.bad_fraction);
        }
        assert!(fractions[0] >= fractions[1] && fractions[1] >= fractions[2], "{fractions:?}");
    }
}
